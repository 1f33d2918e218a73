/* @ts-self-types="./trajair_wasm.d.ts" */

/**
 * Constant-velocity prediction for one window of a scene.
 */
export class Rollout {
    static __wrap(ptr) {
        const obj = Object.create(Rollout.prototype);
        obj.__wbg_ptr = ptr;
        RolloutFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        RolloutFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_rollout_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get ade_km() {
        const ret = wasm.__wbg_get_rollout_ade_km(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get fde_km() {
        const ret = wasm.__wbg_get_rollout_fde_km(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get index() {
        const ret = wasm.__wbg_get_rollout_index(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {number}
     */
    get windows() {
        const ret = wasm.__wbg_get_rollout_windows(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @returns {string}
     */
    get svg() {
        let deferred1_0;
        let deferred1_1;
        try {
            const ret = wasm.rollout_svg(this.__wbg_ptr);
            deferred1_0 = ret[0];
            deferred1_1 = ret[1];
            return getStringFromWasm0(ret[0], ret[1]);
        } finally {
            wasm.__wbindgen_free(deferred1_0, deferred1_1, 1);
        }
    }
    /**
     * @param {number} arg0
     */
    set ade_km(arg0) {
        wasm.__wbg_set_rollout_ade_km(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set fde_km(arg0) {
        wasm.__wbg_set_rollout_fde_km(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set index(arg0) {
        wasm.__wbg_set_rollout_index(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set windows(arg0) {
        wasm.__wbg_set_rollout_windows(this.__wbg_ptr, arg0);
    }
}
if (Symbol.dispose) Rollout.prototype[Symbol.dispose] = Rollout.prototype.free;

/**
 * Wind resolved along and across the runway, and the runway it selects.
 */
export class WindView {
    static __wrap(ptr) {
        const obj = Object.create(WindView.prototype);
        obj.__wbg_ptr = ptr;
        WindViewFinalization.register(obj, obj.__wbg_ptr, obj);
        return obj;
    }
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        WindViewFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_windview_free(ptr, 0);
    }
    /**
     * @returns {number}
     */
    get u_along() {
        const ret = wasm.__wbg_get_windview_u_along(this.__wbg_ptr);
        return ret;
    }
    /**
     * @returns {number}
     */
    get u_cross() {
        const ret = wasm.__wbg_get_windview_u_cross(this.__wbg_ptr);
        return ret;
    }
    /**
     * @param {number} arg0
     */
    set u_along(arg0) {
        wasm.__wbg_set_windview_u_along(this.__wbg_ptr, arg0);
    }
    /**
     * @param {number} arg0
     */
    set u_cross(arg0) {
        wasm.__wbg_set_windview_u_cross(this.__wbg_ptr, arg0);
    }
    /**
     * @returns {string}
     */
    get runway() {
        let deferred1_0;
        let deferred1_1;
        try {
            const ret = wasm.windview_runway(this.__wbg_ptr);
            deferred1_0 = ret[0];
            deferred1_1 = ret[1];
            return getStringFromWasm0(ret[0], ret[1]);
        } finally {
            wasm.__wbindgen_free(deferred1_0, deferred1_1, 1);
        }
    }
}
if (Symbol.dispose) WindView.prototype[Symbol.dispose] = WindView.prototype.free;

/**
 * @param {bigint} seed
 * @param {number} from_deg
 * @param {number} speed_kt
 * @param {number} position
 * @returns {Rollout}
 */
export function rollout(seed, from_deg, speed_kt, position) {
    const ret = wasm.rollout(seed, from_deg, speed_kt, position);
    if (ret[2]) {
        throw takeFromExternrefTable0(ret[1]);
    }
    return Rollout.__wrap(ret[0]);
}

/**
 * @param {bigint} seed
 * @param {number} from_deg
 * @param {number} speed_kt
 * @returns {string}
 */
export function scene_plot(seed, from_deg, speed_kt) {
    let deferred2_0;
    let deferred2_1;
    try {
        const ret = wasm.scene_plot(seed, from_deg, speed_kt);
        var ptr1 = ret[0];
        var len1 = ret[1];
        if (ret[3]) {
            ptr1 = 0; len1 = 0;
            throw takeFromExternrefTable0(ret[2]);
        }
        deferred2_0 = ptr1;
        deferred2_1 = len1;
        return getStringFromWasm0(ptr1, len1);
    } finally {
        wasm.__wbindgen_free(deferred2_0, deferred2_1, 1);
    }
}

/**
 * `from_deg` is measured from the runway heading.
 * @param {number} from_deg
 * @param {number} speed_kt
 * @returns {WindView}
 */
export function wind(from_deg, speed_kt) {
    const ret = wasm.wind(from_deg, speed_kt);
    return WindView.__wrap(ret);
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg_Error_30c8987f7c2ed4e2: function(arg0, arg1) {
            const ret = Error(getStringFromWasm0(arg0, arg1));
            return ret;
        },
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./trajair_wasm_bg.js": import0,
    };
}

const RolloutFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_rollout_free(ptr, 1));
const WindViewFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_windview_free(ptr, 1));

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function takeFromExternrefTable0(idx) {
    const value = wasm.__wbindgen_externrefs.get(idx);
    wasm.__externref_table_dealloc(idx);
    return value;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('trajair_wasm_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
