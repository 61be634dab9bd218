/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_trajectory_free: (a: number, b: number) => void;
export const gaussian_kl: (a: number, b: number, c: number, d: number) => number;
export const kl_running_estimate: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const mountain_car_rollout: (a: number, b: number) => [number, number, number];
export const sigma_schedule: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const trajectory_positions: (a: number) => [number, number];
export const trajectory_reached_goal: (a: number) => number;
export const trajectory_total_reward: (a: number) => number;
export const trajectory_velocities: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
