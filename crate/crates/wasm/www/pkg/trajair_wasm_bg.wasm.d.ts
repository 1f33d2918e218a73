/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_get_rollout_ade_km: (a: number) => number;
export const __wbg_get_rollout_fde_km: (a: number) => number;
export const __wbg_get_rollout_index: (a: number) => number;
export const __wbg_get_rollout_windows: (a: number) => number;
export const __wbg_get_windview_u_along: (a: number) => number;
export const __wbg_get_windview_u_cross: (a: number) => number;
export const __wbg_rollout_free: (a: number, b: number) => void;
export const __wbg_set_rollout_ade_km: (a: number, b: number) => void;
export const __wbg_set_rollout_fde_km: (a: number, b: number) => void;
export const __wbg_set_rollout_index: (a: number, b: number) => void;
export const __wbg_set_rollout_windows: (a: number, b: number) => void;
export const __wbg_set_windview_u_along: (a: number, b: number) => void;
export const __wbg_set_windview_u_cross: (a: number, b: number) => void;
export const __wbg_windview_free: (a: number, b: number) => void;
export const rollout: (a: bigint, b: number, c: number, d: number) => [number, number, number];
export const rollout_svg: (a: number) => [number, number];
export const scene_plot: (a: bigint, b: number, c: number) => [number, number, number, number];
export const wind: (a: number, b: number) => number;
export const windview_runway: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
