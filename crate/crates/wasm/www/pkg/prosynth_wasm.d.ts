/* tslint:disable */
/* eslint-disable */

/**
 * Aggregate net demand (mean kWh per prosumer) at each level, 48 slots per
 * level, for one day of `prosumers`. Each panel draws its own weather so one
 * overcast path does not darken the whole cohort.
 */
export function net_sweep(levels: Float64Array, prosumers: number, area: number, persistence: number, seed: bigint): Float64Array;

/**
 * Mean profile of the chain the demo model was learned from.
 */
export function observed_mean(): Float64Array;

/**
 * `prosumers × days × 48` demand readings (kWh), prosumer-major, followed by
 * the 48-slot population mean.
 */
export function sample_demand(prosumers: number, days: number, reinforcement: number, seed: bigint): Float64Array;

/**
 * Clear-sky curve then one stochastic day, 48 slots each (kWh).
 */
export function solar_day(latitude: number, tilt: number, azimuth: number, day_of_year: number, area: number, persistence: number, seed: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly net_sweep: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly observed_mean: () => [number, number];
    readonly sample_demand: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly solar_day: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
