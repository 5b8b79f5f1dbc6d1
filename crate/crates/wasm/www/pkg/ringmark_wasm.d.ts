/* tslint:disable */
/* eslint-disable */

export function detect(width: number, height: number, pixels: Uint8Array, min_hd: number, refine: boolean, focal: number): string;

export function librarySize(min_hd: number): number;

export function renderMarker(min_hd: number, id: number, side: number): Uint8Array;

export function renderScene(min_hd: number, id: number, angle: number, spin: number, noise: number, seed: number): Uint8Array;

export function sceneFocal(): number;

export function sceneHeight(): number;

export function sceneWidth(): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly detect: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly librarySize: (a: number) => [number, number, number];
    readonly renderMarker: (a: number, b: number, c: number) => [number, number, number, number];
    readonly renderScene: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly sceneFocal: () => number;
    readonly sceneHeight: () => number;
    readonly sceneWidth: () => number;
    readonly __externref_table_alloc: () => number;
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
