//! Deterministic parallel reductions.
//!
//! Work is split into per-row items whose results are collected in index
//! order and combined with a fixed pairwise tree, so the floating-point result
//! does not depend on the number of worker threads.

use rayon::prelude::*;

const LEAF: usize = 32;

/// Pairwise (cascade) sum with a fixed split pattern.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        let mut acc = 0.0;
        for x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Evaluates `f(i)` for `i in 0..n` in parallel and returns the results in order.
pub fn map_rows<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// `Σ_i f(i)` with a thread-count independent result.
pub fn sum_rows<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    pairwise_sum(&map_rows(n, f))
}

/// Component-wise `Σ_i f(i)` for vector-valued row contributions of length `width`.
pub fn sum_rows_vec<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync + Send,
{
    let rows = map_rows(n, f);
    (0..width)
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            pairwise_sum(&col)
        })
        .collect()
}
