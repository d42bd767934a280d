/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const algorithmNames: () => [number, number];
export const eigConvergence: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const karcherConvergence: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const sphereTransport: (a: number, b: number, c: number, d: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
