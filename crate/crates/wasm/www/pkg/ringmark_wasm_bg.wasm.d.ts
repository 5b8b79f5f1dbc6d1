/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const detect: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const librarySize: (a: number) => [number, number, number];
export const renderMarker: (a: number, b: number, c: number) => [number, number, number, number];
export const renderScene: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const sceneFocal: () => number;
export const sceneHeight: () => number;
export const sceneWidth: () => number;
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
