/* tslint:disable */
/* eslint-disable */

/**
 * Constant-velocity prediction for one window of a scene.
 */
export class Rollout {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    ade_km: number;
    fde_km: number;
    index: number;
    windows: number;
    readonly svg: string;
}

/**
 * Wind resolved along and across the runway, and the runway it selects.
 */
export class WindView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    u_along: number;
    u_cross: number;
    readonly runway: string;
}

export function rollout(seed: bigint, from_deg: number, speed_kt: number, position: number): Rollout;

export function scene_plot(seed: bigint, from_deg: number, speed_kt: number): string;

/**
 * `from_deg` is measured from the runway heading.
 */
export function wind(from_deg: number, speed_kt: number): WindView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_get_rollout_ade_km: (a: number) => number;
    readonly __wbg_get_rollout_fde_km: (a: number) => number;
    readonly __wbg_get_rollout_index: (a: number) => number;
    readonly __wbg_get_rollout_windows: (a: number) => number;
    readonly __wbg_get_windview_u_along: (a: number) => number;
    readonly __wbg_get_windview_u_cross: (a: number) => number;
    readonly __wbg_rollout_free: (a: number, b: number) => void;
    readonly __wbg_set_rollout_ade_km: (a: number, b: number) => void;
    readonly __wbg_set_rollout_fde_km: (a: number, b: number) => void;
    readonly __wbg_set_rollout_index: (a: number, b: number) => void;
    readonly __wbg_set_rollout_windows: (a: number, b: number) => void;
    readonly __wbg_set_windview_u_along: (a: number, b: number) => void;
    readonly __wbg_set_windview_u_cross: (a: number, b: number) => void;
    readonly __wbg_windview_free: (a: number, b: number) => void;
    readonly rollout: (a: bigint, b: number, c: number, d: number) => [number, number, number];
    readonly rollout_svg: (a: number) => [number, number];
    readonly scene_plot: (a: bigint, b: number, c: number) => [number, number, number, number];
    readonly wind: (a: number, b: number) => number;
    readonly windview_runway: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
