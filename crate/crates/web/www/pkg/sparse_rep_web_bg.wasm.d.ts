/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const homotopy_path: (a: bigint, b: number, c: number) => [number, number, number, number];
export const omp_recovery: (a: bigint, b: number, c: number, d: number) => [number, number, number, number];
export const threshold_curves: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
