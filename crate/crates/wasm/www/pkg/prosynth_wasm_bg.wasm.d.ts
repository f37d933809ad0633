/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const net_sweep: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
export const observed_mean: () => [number, number];
export const sample_demand: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const solar_day: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
