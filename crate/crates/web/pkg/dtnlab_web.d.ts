/* tslint:disable */
/* eslint-disable */

/**
 * Born reconstruction of a centred Gaussian from its synthetic DtN map,
 * truncated at `|p| < ρ`.
 */
export function born_reconstruction(n: number, side: number, amplitude: number, width: number, rho: number): string;

/**
 * Cutoff rule `ρ = λ ln(1 + 1/δ)` next to the split of `∫|v̂|` into the
 * ball `|p| < ρ` and its complement, for a finite-smoothness bump.
 */
export function cutoff_curves(alpha: number, exponent: number, width: number, p_max: number): string;

/**
 * Faddeev Green function `g(x, k)` for `k = born_pair(p).k` on the unit
 * square with `n` cells per side.
 */
export function green_field(n: number, p1: number, p2: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly born_reconstruction: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly cutoff_curves: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly green_field: (a: number, b: number, c: number) => [number, number, number, number];
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
