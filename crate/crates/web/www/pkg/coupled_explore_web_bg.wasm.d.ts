/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_exploration_free: (a: number, b: number) => void;
export const __wbg_scanscene_free: (a: number, b: number) => void;
export const curve_probs: (a: number) => [number, number];
export const entropy_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const exploration_belief: (a: number) => [number, number];
export const exploration_decisions: (a: number) => number;
export const exploration_frontier_goals: (a: number) => [number, number];
export const exploration_height: (a: number) => number;
export const exploration_map: (a: number) => [number, number];
export const exploration_new: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const exploration_resolution: (a: number) => number;
export const exploration_step: (a: number, b: number) => [number, number, number];
export const exploration_steps: (a: number) => bigint;
export const exploration_true_pose: (a: number) => [number, number];
export const exploration_truth: (a: number) => [number, number];
export const exploration_width: (a: number) => number;
export const scanscene_height: (a: number) => number;
export const scanscene_log_odds_change: (a: number, b: number) => [number, number];
export const scanscene_new: () => number;
export const scanscene_pose: (a: number) => [number, number];
export const scanscene_posterior: (a: number, b: number) => [number, number];
export const scanscene_resolution: (a: number) => number;
export const scanscene_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
