/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_detection_free: (a: number, b: number) => void;
export const __wbg_reconstruction_free: (a: number, b: number) => void;
export const bands: () => number;
export const detect: (a: number) => [number, number, number];
export const detection_ace: (a: number) => [number, number];
export const detection_aceThreshold: (a: number) => number;
export const detection_bulk: (a: number) => [number, number];
export const detection_bulkThreshold: (a: number) => number;
export const detection_count: (a: number, b: number, c: number) => number;
export const reconstructBand: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const reconstruction_iterations: (a: number) => number;
export const reconstruction_measurements: (a: number) => number;
export const reconstruction_recon: (a: number) => [number, number];
export const reconstruction_relError: (a: number) => number;
export const reconstruction_truth: (a: number) => [number, number];
export const side: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
