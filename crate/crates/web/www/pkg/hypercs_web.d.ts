/* tslint:disable */
/* eslint-disable */

export class Detection {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Pixels above `multiplier * T`.
     */
    count(bulk: boolean, multiplier: number): number;
    readonly aceThreshold: number;
    readonly ace: Float64Array;
    readonly bulkThreshold: number;
    readonly bulk: Float64Array;
}

export class Reconstruction {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly iterations: number;
    readonly measurements: number;
    readonly recon: Float64Array;
    readonly relError: number;
    readonly truth: Float64Array;
}

export function bands(): number;

export function detect(strength: number): Detection;

/**
 * `method` is `"l1"` or `"tv"`.
 */
export function reconstructBand(method: string, compression: number, strength: number, band: number): Reconstruction;

export function side(): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_detection_free: (a: number, b: number) => void;
    readonly __wbg_reconstruction_free: (a: number, b: number) => void;
    readonly bands: () => number;
    readonly detect: (a: number) => [number, number, number];
    readonly detection_ace: (a: number) => [number, number];
    readonly detection_aceThreshold: (a: number) => number;
    readonly detection_bulk: (a: number) => [number, number];
    readonly detection_bulkThreshold: (a: number) => number;
    readonly detection_count: (a: number, b: number, c: number) => number;
    readonly reconstructBand: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly reconstruction_iterations: (a: number) => number;
    readonly reconstruction_measurements: (a: number) => number;
    readonly reconstruction_recon: (a: number) => [number, number];
    readonly reconstruction_relError: (a: number) => number;
    readonly reconstruction_truth: (a: number) => [number, number];
    readonly side: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
