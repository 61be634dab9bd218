/* tslint:disable */
/* eslint-disable */

export class Trajectory {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    positions(): Float64Array;
    velocities(): Float64Array;
    readonly reached_goal: boolean;
    readonly total_reward: number;
}

/**
 * Closed-form `D_KL(N(m1, s1²) ‖ N(m2, s2²))`.
 */
export function gaussian_kl(m1: number, s1: number, m2: number, s2: number): number;

/**
 * Running Monte-Carlo KL estimate after each of `n` samples drawn from the
 * first Gaussian.
 */
export function kl_running_estimate(m1: number, s1: number, m2: number, s2: number, n: number, seed: number): Float64Array;

/**
 * Mountain car under a bang-bang controller that pushes with `throttle`
 * in the direction of motion.
 */
export function mountain_car_rollout(throttle: number, seed: number): Trajectory;

/**
 * `σ` for `points` values of `d_post` spread over `[-δ, 2δ]`, as
 * interleaved `[d_post, σ, ...]` pairs.
 */
export function sigma_schedule(delta: number, sigma_min: number, sigma_max: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_trajectory_free: (a: number, b: number) => void;
    readonly gaussian_kl: (a: number, b: number, c: number, d: number) => number;
    readonly kl_running_estimate: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly mountain_car_rollout: (a: number, b: number) => [number, number, number];
    readonly sigma_schedule: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly trajectory_positions: (a: number) => [number, number];
    readonly trajectory_reached_goal: (a: number) => number;
    readonly trajectory_total_reward: (a: number) => number;
    readonly trajectory_velocities: (a: number) => [number, number];
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
