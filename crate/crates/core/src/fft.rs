//! Thin wrappers around rustfft with per-thread plan caching.
//!
//! All transforms here are unnormalized: `inverse(forward(x)) = n * x`.
//! Callers apply the `1/n` (or `1/(n_t*n_x)`) factor themselves so that
//! adjoint bookkeeping stays explicit.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new(PlanCache::default());
}

#[derive(Default)]
struct PlanCache {
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
    planner: Option<FftPlanner<f64>>,
}

fn with_plan<R>(len: usize, inverse: bool, f: impl FnOnce(&Arc<dyn Fft<f64>>) -> R) -> R {
    PLANS.with(|cell| {
        let mut cache = cell.borrow_mut();
        let planner = cache.planner.get_or_insert_with(FftPlanner::new);
        let plan = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        let map = if inverse {
            &mut cache.inverse
        } else {
            &mut cache.forward
        };
        let plan = map.entry(len).or_insert(plan).clone();
        drop(cache);
        f(&plan)
    })
}

/// In-place unnormalized forward transform of one line.
pub fn fft_inplace(buf: &mut [Complex64]) {
    with_plan(buf.len(), false, |plan| plan.process(buf));
}

/// In-place unnormalized inverse transform of one line.
pub fn ifft_inplace(buf: &mut [Complex64]) {
    with_plan(buf.len(), true, |plan| plan.process(buf));
}

/// Unnormalized forward transform of a real line; full complex spectrum.
pub fn fft_real(row: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_inplace(&mut buf);
    buf
}

/// Real part of the normalized inverse of a full complex spectrum.
pub fn ifft_real(spectrum: &[Complex64]) -> Vec<f64> {
    let mut buf = spectrum.to_vec();
    ifft_inplace(&mut buf);
    let scale = 1.0 / spectrum.len() as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Unnormalized 2-D forward transform, in place, of a row-major
/// `(n_t, n_x)` complex buffer: rows first (the x axis), then columns.
/// Production paths use the truncated [`fft_columns`] pipeline directly;
/// this full form anchors its round-trip test.
#[cfg(test)]
pub fn fft2_inplace(buf: &mut [Complex64], n_t: usize, n_x: usize) {
    debug_assert_eq!(buf.len(), n_t * n_x);
    for row in buf.chunks_exact_mut(n_x) {
        fft_inplace(row);
    }
    fft_columns(buf, n_t, n_x, false, n_x);
}

/// Unnormalized 2-D inverse transform, in place. Columns first, then rows,
/// mirroring [`fft2_inplace`].
#[cfg(test)]
pub fn ifft2_inplace(buf: &mut [Complex64], n_t: usize, n_x: usize) {
    debug_assert_eq!(buf.len(), n_t * n_x);
    fft_columns(buf, n_t, n_x, true, n_x);
    for row in buf.chunks_exact_mut(n_x) {
        ifft_inplace(row);
    }
}

/// Column transforms restricted to the first `active_cols` columns.
///
/// After the x-direction pass only the retained low columns matter to a
/// truncated transform, so skipping the rest saves a third of the work.
pub fn fft_columns(buf: &mut [Complex64], n_t: usize, n_x: usize, inverse: bool, active_cols: usize) {
    let mut col = vec![Complex64::default(); n_t];
    for j in 0..active_cols.min(n_x) {
        for n in 0..n_t {
            col[n] = buf[n * n_x + j];
        }
        if inverse {
            ifft_inplace(&mut col);
        } else {
            fft_inplace(&mut col);
        }
        for n in 0..n_t {
            buf[n * n_x + j] = col[n];
        }
    }
}
