/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_segmentation_free: (a: number, b: number) => void;
export const associationView: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const rangeView: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const segmentView: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const segmentation_iou: (a: number) => number;
export const segmentation_movingPoints: (a: number) => number;
export const segmentation_rgba: (a: number) => [number, number];
export const streetStep: () => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
