//! Particle-loop helpers.
//!
//! With the `parallel` feature the loops below run on rayon, otherwise they
//! run on the calling thread. The parallel path can also be switched off at
//! runtime with [`set_parallel`], which is how the benches compare the two.
//!
//! Reductions never depend on the schedule: [`sum_rows`] accumulates fixed
//! blocks of [`CHUNK`] rows in index order and then adds the block totals in
//! block order, so the floating-point result is the same for any thread count.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per block for reductions and scratch reuse.
pub const CHUNK: usize = 1024;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enables or disables the rayon path at runtime (no effect without the
/// `parallel` feature).
pub fn set_parallel(on: bool) {
    PARALLEL.store(on, Ordering::SeqCst);
}

/// True when particle loops currently run on rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::SeqCst)
}

/// Calls `f(i, row, scratch)` for every `width`-sized row of `out`. Each block
/// of rows gets a fresh zeroed scratch buffer of length `scratch_len`.
pub fn for_each_row<F>(out: &mut [f64], width: usize, scratch_len: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    let block = |b: usize, rows: &mut [f64]| {
        let mut scratch = vec![0.0; scratch_len];
        for (r, row) in rows.chunks_mut(width).enumerate() {
            f(b * CHUNK + r, row, &mut scratch);
        }
    };
    #[cfg(feature = "parallel")]
    if is_parallel() {
        out.par_chunks_mut(width * CHUNK)
            .enumerate()
            .for_each(|(b, rows)| block(b, rows));
        return;
    }
    for (b, rows) in out.chunks_mut(width * CHUNK).enumerate() {
        block(b, rows);
    }
}

/// Like [`for_each_row`] but walks two row-aligned outputs together.
pub fn for_each_row2<F>(a: &mut [f64], wa: usize, b: &mut [f64], wb: usize, f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    if wa == 0 || wb == 0 {
        return;
    }
    debug_assert_eq!(a.len() / wa, b.len() / wb);
    let block = |k: usize, ra: &mut [f64], rb: &mut [f64]| {
        for (r, (x, y)) in ra.chunks_mut(wa).zip(rb.chunks_mut(wb)).enumerate() {
            f(k * CHUNK + r, x, y);
        }
    };
    #[cfg(feature = "parallel")]
    if is_parallel() {
        a.par_chunks_mut(wa * CHUNK)
            .zip(b.par_chunks_mut(wb * CHUNK))
            .enumerate()
            .for_each(|(k, (ra, rb))| block(k, ra, rb));
        return;
    }
    for (k, (ra, rb)) in a
        .chunks_mut(wa * CHUNK)
        .zip(b.chunks_mut(wb * CHUNK))
        .enumerate()
    {
        block(k, ra, rb);
    }
}

/// Walks the rows of `out` together with one mutable state per row.
pub fn for_each_row_with<S, F>(out: &mut [f64], width: usize, states: &mut [S], f: F)
where
    S: Send,
    F: Fn(&mut S, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if is_parallel() {
        out.par_chunks_mut(width)
            .zip(states.par_iter_mut())
            .with_min_len(64)
            .for_each(|(row, s)| f(s, row));
        return;
    }
    for (row, s) in out.chunks_mut(width).zip(states.iter_mut()) {
        f(s, row);
    }
}

/// Evaluates `f(i)` for `i in 0..n` and collects the results in order.
pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return (0..n).into_par_iter().with_min_len(16).map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Deterministic sum over `i in 0..n` of the `width`-vector that `f(i, acc)`
/// adds into `acc`.
pub fn sum_rows<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    sum_rows_with(n, width, 0, |i, acc, _| f(i, acc))
}

/// [`sum_rows`] with a per-block scratch buffer of length `scratch_len`.
pub fn sum_rows_with<F>(n: usize, width: usize, scratch_len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    let blocks = n.div_ceil(CHUNK);
    let partial = map(blocks, |b| {
        let mut acc = vec![0.0; width];
        let mut scratch = vec![0.0; scratch_len];
        for i in b * CHUNK..((b + 1) * CHUNK).min(n) {
            f(i, &mut acc, &mut scratch);
        }
        acc
    });
    let mut total = vec![0.0; width];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Deterministic scalar sum of `f(i)` over `i in 0..n`.
pub fn sum(n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    sum_rows(n, 1, |i, acc| acc[0] += f(i))[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_schedule_independent() {
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e3;
        set_parallel(true);
        let a = sum(100_003, f);
        set_parallel(false);
        let b = sum(100_003, f);
        set_parallel(true);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn rows_visit_every_index() {
        let mut out = vec![0.0; 3 * 2500];
        for_each_row(&mut out, 3, 0, |i, row, _| row.fill(i as f64));
        assert!(out
            .chunks(3)
            .enumerate()
            .all(|(i, r)| r.iter().all(|&v| v == i as f64)));
    }
}
