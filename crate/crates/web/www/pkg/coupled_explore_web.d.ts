/* tslint:disable */
/* eslint-disable */

/**
 * A seeded exploration run advanced a few control steps at a time.
 */
export class Exploration {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `[x, y, heading, σxx, σxy, σyy]` of the pose belief.
     */
    belief(): Float64Array;
    decisions(): number;
    /**
     * Flat `[x0, y0, x1, y1, ...]` of frontier goal points in the current map.
     */
    frontier_goals(): Float64Array;
    height(): number;
    /**
     * Estimated occupancy, row-major with row 0 at the lowest y.
     */
    map(): Float64Array;
    /**
     * `fixture` is corridor, rooms or loop; `ablation` A1..A5 or B1..B3;
     * `alpha` parameterizes the behavioral entropy used for decisions.
     */
    constructor(fixture: string, ablation: string, alpha: number, seed: bigint);
    resolution(): number;
    /**
     * Run up to `steps` control periods; true once exploration is complete.
     */
    step(steps: number): boolean;
    steps(): bigint;
    true_pose(): Float64Array;
    /**
     * Ground-truth occupancy in the same layout.
     */
    truth(): Float64Array;
    width(): number;
}

/**
 * A room seen once from a fixed pose. The prior has the walls half-learned so
 * both hit and pass cells move visibly.
 */
export class ScanScene {
    free(): void;
    [Symbol.dispose](): void;
    height(): number;
    /**
     * Signed change in log-odds per cell for the same update.
     */
    log_odds_change(scale: number): Float64Array;
    constructor();
    /**
     * Robot pose `[x, y, heading]`.
     */
    pose(): Float64Array;
    /**
     * Occupancy after one scan with the pose covariance multiplied by
     * `scale`, row-major with row 0 at the lowest y.
     */
    posterior(scale: number): Float64Array;
    resolution(): number;
    width(): number;
}

/**
 * Probabilities at which [`entropy_curve`] samples, `samples` points in
 * `[P_MIN, 1 − P_MIN]`.
 */
export function curve_probs(samples: number): Float64Array;

/**
 * Cell entropy (nats) over [`curve_probs`] for `shannon`, `renyi` or
 * `behavioral`.
 */
export function entropy_curve(family: string, alpha: number, samples: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_exploration_free: (a: number, b: number) => void;
    readonly __wbg_scanscene_free: (a: number, b: number) => void;
    readonly curve_probs: (a: number) => [number, number];
    readonly entropy_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly exploration_belief: (a: number) => [number, number];
    readonly exploration_decisions: (a: number) => number;
    readonly exploration_frontier_goals: (a: number) => [number, number];
    readonly exploration_height: (a: number) => number;
    readonly exploration_map: (a: number) => [number, number];
    readonly exploration_new: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly exploration_resolution: (a: number) => number;
    readonly exploration_step: (a: number, b: number) => [number, number, number];
    readonly exploration_steps: (a: number) => bigint;
    readonly exploration_true_pose: (a: number) => [number, number];
    readonly exploration_truth: (a: number) => [number, number];
    readonly exploration_width: (a: number) => number;
    readonly scanscene_height: (a: number) => number;
    readonly scanscene_log_odds_change: (a: number, b: number) => [number, number];
    readonly scanscene_new: () => number;
    readonly scanscene_pose: (a: number) => [number, number];
    readonly scanscene_posterior: (a: number, b: number) => [number, number];
    readonly scanscene_resolution: (a: number) => number;
    readonly scanscene_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
