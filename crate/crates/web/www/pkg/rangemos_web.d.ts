/* tslint:disable */
/* eslint-disable */

export class Segmentation {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Moving IoU, or NaN when undefined.
     */
    readonly iou: number;
    readonly movingPoints: number;
    readonly rgba: Uint8Array;
}

/**
 * RGBA pixels of the street scan reprojected under a sensor motion.
 */
export function associationView(width: number, height: number, dx: number, dy: number, yaw_deg: number): Uint8Array;

/**
 * RGBA pixels of the street scan's range image.
 */
export function rangeView(width: number, height: number, fov_up: number, fov_down: number): Uint8Array;

export function segmentView(width: number, height: number, car_speed: number, pose_noise: number, use_knn: boolean, seed: bigint): Segmentation;

export function streetStep(): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_segmentation_free: (a: number, b: number) => void;
    readonly associationView: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly rangeView: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly segmentView: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly segmentation_iou: (a: number) => number;
    readonly segmentation_movingPoints: (a: number) => number;
    readonly segmentation_rgba: (a: number) => [number, number];
    readonly streetStep: () => [number, number, number];
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
