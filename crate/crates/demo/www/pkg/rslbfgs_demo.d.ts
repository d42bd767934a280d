/* tslint:disable */
/* eslint-disable */

/**
 * Names accepted by the convergence functions, for the page's legend.
 */
export function algorithmNames(): string;

export function eigConvergence(d: number, samples: number, gap: number, option: number, epochs: number, seed: number): string;

export function karcherConvergence(n: number, count: number, cond: number, eta2: number, epochs: number, seed: number): string;

export function sphereTransport(heading: number, arc: number, vector_angle: number, steps: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly algorithmNames: () => [number, number];
    readonly eigConvergence: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly karcherConvergence: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly sphereTransport: (a: number, b: number, c: number, d: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
