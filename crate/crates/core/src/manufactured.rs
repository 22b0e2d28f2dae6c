//! Separable Fourier trial solutions and their closed-form derivatives.
//!
//! A manufactured field is the double sum
//!
//! ```text
//! u(x, t) = Σ_i Σ_j A_i B_j sin(k_i x + φ_i) sin(ω_j t + ψ_j)
//! ```
//!
//! with integer spatial wavenumbers (exact 2π-periodicity) and continuous
//! temporal frequencies. Because the sum factorizes into a spatial profile
//! times a temporal profile, evaluation is an outer product of two vectors.

use crate::error::{MmlError, Result};
use crate::grid::Grid;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::TAU;

/// Sampling distribution for manufactured fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedSpec {
    /// Number of spatial terms K_x.
    pub k_x_terms: usize,
    /// Number of temporal terms K_t.
    pub k_t_terms: usize,
    /// Spatial wavenumbers are integers in `[1, k_max]`.
    pub k_max: u32,
    /// Temporal frequencies are reals in `[1, omega_max]`.
    pub omega_max: f64,
    /// Uniform range for the spatial amplitudes A_i.
    pub amp_x_range: (f64, f64),
    /// Uniform range for the temporal amplitudes B_j.
    pub amp_t_range: (f64, f64),
    /// Seed shared by every sample of one dataset.
    pub base_seed: u64,
}

impl ManufacturedSpec {
    /// Defaults: four terms per axis, wavenumbers up to 8, frequencies up to
    /// 8, B_j in (0.2, 1.0), and A_i in (0.2, 1.0) scaled by 1/(K_x·K_t) so
    /// each product term carries the normalization and the summed field stays
    /// O(1). Wavenumber 8 keeps cubic products alias-free on 128-point grids.
    pub fn with_defaults(base_seed: u64) -> Self {
        let (k_x_terms, k_t_terms) = (4, 4);
        let norm = (k_x_terms * k_t_terms) as f64;
        Self {
            k_x_terms,
            k_t_terms,
            k_max: 8,
            omega_max: 8.0,
            amp_x_range: (0.2 / norm, 1.0 / norm),
            amp_t_range: (0.2, 1.0),
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_x_terms == 0 || self.k_t_terms == 0 {
            return Err(MmlError::InvalidArgument(
                "manufactured field needs at least one term per axis".into(),
            ));
        }
        if self.k_max < 1 {
            return Err(MmlError::InvalidArgument("k_max must be at least 1".into()));
        }
        if self.omega_max < 1.0 {
            return Err(MmlError::InvalidArgument(
                "omega_max must be at least 1 (frequencies are drawn from [1, omega_max])".into(),
            ));
        }
        for (name, (lo, hi)) in [("amp_x_range", self.amp_x_range), ("amp_t_range", self.amp_t_range)] {
            if !(lo > 0.0 && lo <= hi) {
                return Err(MmlError::InvalidArgument(format!(
                    "{name} must satisfy 0 < min <= max, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// One spatial factor A·sin(k x + φ).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialTerm {
    pub amp: f64,
    pub wavenumber: u32,
    pub phase: f64,
}

/// One temporal factor B·sin(ω t + ψ).
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalTerm {
    pub amp: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// A concrete draw from the trial space.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedField {
    pub spatial_terms: Vec<SpatialTerm>,
    pub temporal_terms: Vec<TemporalTerm>,
}

/// Draws the coefficients of sample `sample_index`.
///
/// The generator is ChaCha12 seeded with `base_seed`, with the stream id set
/// to `sample_index`, so every sample owns an independent deterministic
/// stream. Draw order is fixed: for each spatial term in order, (A_i, k_i,
/// φ_i); then for each temporal term, (B_j, ω_j, ψ_j).
pub fn sample_field(spec: &ManufacturedSpec, sample_index: u64) -> Result<ManufacturedField> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.base_seed);
    rng.set_stream(sample_index);
    let spatial_terms = (0..spec.k_x_terms)
        .map(|_| SpatialTerm {
            amp: rng.gen_range(spec.amp_x_range.0..=spec.amp_x_range.1),
            wavenumber: rng.gen_range(1..=spec.k_max),
            phase: rng.gen_range(0.0..TAU),
        })
        .collect();
    let temporal_terms = (0..spec.k_t_terms)
        .map(|_| TemporalTerm {
            amp: rng.gen_range(spec.amp_t_range.0..=spec.amp_t_range.1),
            frequency: rng.gen_range(1.0..=spec.omega_max),
            phase: rng.gen_range(0.0..TAU),
        })
        .collect();
    Ok(ManufacturedField {
        spatial_terms,
        temporal_terms,
    })
}

/// Σ_i A_i k_i^order · {sin, cos, -sin}(k_i x + φ_i) at every grid node.
fn spatial_profile(field: &ManufacturedField, grid: &Grid, order: u32) -> Vec<f64> {
    (0..grid.n_x)
        .map(|j| {
            let x = grid.x(j);
            field
                .spatial_terms
                .iter()
                .map(|term| {
                    let arg = term.wavenumber as f64 * x + term.phase;
                    let k = term.wavenumber as f64;
                    match order {
                        0 => term.amp * arg.sin(),
                        1 => term.amp * k * arg.cos(),
                        2 => -term.amp * k * k * arg.sin(),
                        _ => unreachable!("orders are validated by the caller"),
                    }
                })
                .sum()
        })
        .collect()
}

/// Σ_j B_j sin(ω_j t + ψ_j), or its time derivative, at every grid level.
fn temporal_profile(field: &ManufacturedField, grid: &Grid, derivative: bool) -> Vec<f64> {
    (0..grid.n_t)
        .map(|n| {
            let t = grid.t(n);
            field
                .temporal_terms
                .iter()
                .map(|term| {
                    let arg = term.frequency * t + term.phase;
                    if derivative {
                        term.amp * term.frequency * arg.cos()
                    } else {
                        term.amp * arg.sin()
                    }
                })
                .sum()
        })
        .collect()
}

fn outer(rows: &[f64], cols: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(n, j)| rows[n] * cols[j])
}

/// Evaluates the double sum at every grid node, as an `(n_t, n_x)` array.
pub fn evaluate(field: &ManufacturedField, grid: &Grid) -> Array2<f64> {
    outer(
        &temporal_profile(field, grid, false),
        &spatial_profile(field, grid, 0),
    )
}

/// Analytic ∂u/∂t on the grid.
pub fn evaluate_dt(field: &ManufacturedField, grid: &Grid) -> Array2<f64> {
    outer(
        &temporal_profile(field, grid, true),
        &spatial_profile(field, grid, 0),
    )
}

/// Analytic ∂^order u/∂x^order on the grid, for order 1 or 2.
pub fn evaluate_dx(field: &ManufacturedField, grid: &Grid, order: u32) -> Result<Array2<f64>> {
    if !(1..=2).contains(&order) {
        return Err(MmlError::InvalidArgument(format!(
            "spatial derivative order must be 1 or 2, got {order}"
        )));
    }
    Ok(outer(
        &temporal_profile(field, grid, false),
        &spatial_profile(field, grid, order),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral;

    fn single_term(amp_x: f64, k: u32, phi: f64, amp_t: f64, omega: f64, psi: f64) -> ManufacturedField {
        ManufacturedField {
            spatial_terms: vec![SpatialTerm {
                amp: amp_x,
                wavenumber: k,
                phase: phi,
            }],
            temporal_terms: vec![TemporalTerm {
                amp: amp_t,
                frequency: omega,
                phase: psi,
            }],
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = ManufacturedSpec::with_defaults(7);
        let a = sample_field(&spec, 3).unwrap();
        let b = sample_field(&spec, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_field(&spec, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_ranges_pin_draws() {
        let spec = ManufacturedSpec {
            k_max: 1,
            amp_x_range: (0.5, 0.5),
            ..ManufacturedSpec::with_defaults(0)
        };
        let field = sample_field(&spec, 11).unwrap();
        for term in &field.spatial_terms {
            assert_eq!(term.wavenumber, 1);
            assert_eq!(term.amp, 0.5);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = ManufacturedSpec::with_defaults(0);
        spec.amp_x_range = (0.0, 1.0);
        assert!(sample_field(&spec, 0).is_err());
        let mut spec = ManufacturedSpec::with_defaults(0);
        spec.k_x_terms = 0;
        assert!(sample_field(&spec, 0).is_err());
        let mut spec = ManufacturedSpec::with_defaults(0);
        spec.omega_max = 0.5;
        assert!(sample_field(&spec, 0).is_err());
    }

    #[test]
    fn single_term_point_value() {
        // sin(π/2)·sin(0.5) at the grid node (t = 0.5, x = π/2).
        let grid = Grid::new(8, 9, TAU, 1.0).unwrap();
        let field = single_term(1.0, 1, 0.0, 1.0, 1.0, 0.0);
        let u = evaluate(&field, &grid);
        assert!((u[[4, 2]] - 0.47943).abs() < 1e-5);
    }

    #[test]
    fn zero_temporal_phase_gives_zero_initial_row() {
        let grid = Grid::unit(16, 9).unwrap();
        let spec = ManufacturedSpec::with_defaults(21);
        let mut field = sample_field(&spec, 5).unwrap();
        for term in &mut field.temporal_terms {
            term.phase = 0.0;
        }
        let u = evaluate(&field, &grid);
        assert!(u.row(0).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn two_terms_superpose() {
        let grid = Grid::unit(16, 9).unwrap();
        let a = single_term(0.4, 2, 0.3, 0.9, 2.5, 1.1);
        let b = single_term(0.7, 5, 1.9, 0.6, 4.0, 0.2);
        let both = ManufacturedField {
            spatial_terms: vec![a.spatial_terms[0].clone(), b.spatial_terms[0].clone()],
            temporal_terms: vec![a.temporal_terms[0].clone()],
        };
        // Same temporal factor, two spatial terms: the sums must superpose.
        let a_only = ManufacturedField {
            spatial_terms: vec![a.spatial_terms[0].clone()],
            temporal_terms: vec![a.temporal_terms[0].clone()],
        };
        let b_only = ManufacturedField {
            spatial_terms: vec![b.spatial_terms[0].clone()],
            temporal_terms: vec![a.temporal_terms[0].clone()],
        };
        let sum = evaluate(&a_only, &grid) + evaluate(&b_only, &grid);
        let joint = evaluate(&both, &grid);
        for (x, y) in joint.iter().zip(sum.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_time_derivative_point_value() {
        // ∂_t u = 3·cos(0)·sin(π/2) = 3 for A=B=1, k=2, ω=3, zero phases at
        // (t=0, x=π/4).
        let grid = Grid::new(8, 9, TAU, 1.0).unwrap();
        let field = single_term(1.0, 2, 0.0, 1.0, 3.0, 0.0);
        let du = evaluate_dt(&field, &grid);
        assert!((du[[0, 1]] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn second_x_derivative_is_minus_k_squared_u() {
        let grid = Grid::unit(32, 9).unwrap();
        let field = single_term(1.0, 2, 0.0, 1.0, 3.0, 0.0);
        let u = evaluate(&field, &grid);
        let dxx = evaluate_dx(&field, &grid, 2).unwrap();
        for (d, v) in dxx.iter().zip(u.iter()) {
            assert!((d + 4.0 * v).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_dx_matches_spectral_derivative() {
        let grid = Grid::unit(64, 17).unwrap();
        let spec = ManufacturedSpec::with_defaults(3);
        let field = sample_field(&spec, 9).unwrap();
        let u = evaluate(&field, &grid);
        let analytic = evaluate_dx(&field, &grid, 1).unwrap();
        let spectral = spectral::spatial_derivative_field(&u, 1, grid.length_x).unwrap();
        for (a, s) in analytic.iter().zip(spectral.iter()) {
            assert!((a - s).abs() < 1e-10);
        }
    }

    #[test]
    fn unsupported_order_is_rejected() {
        let grid = Grid::unit(16, 9).unwrap();
        let field = single_term(1.0, 1, 0.0, 1.0, 1.0, 0.0);
        assert!(evaluate_dx(&field, &grid, 0).is_err());
        assert!(evaluate_dx(&field, &grid, 3).is_err());
    }

    #[test]
    fn exact_spatial_periodicity() {
        let grid = Grid::unit(32, 9).unwrap();
        let spec = ManufacturedSpec::with_defaults(13);
        let field = sample_field(&spec, 2).unwrap();
        let u = evaluate(&field, &grid);
        // Trigonometric extension at x = 2π, computed directly.
        for n in 0..grid.n_t {
            let t = grid.t(n);
            let s_ext: f64 = field
                .spatial_terms
                .iter()
                .map(|term| term.amp * (term.wavenumber as f64 * TAU + term.phase).sin())
                .sum();
            let temporal: f64 = field
                .temporal_terms
                .iter()
                .map(|term| term.amp * (term.frequency * t + term.phase).sin())
                .sum();
            assert!((u[[n, 0]] - s_ext * temporal).abs() < 1e-12);
        }
    }

    #[test]
    fn amplitude_bound_holds() {
        let grid = Grid::unit(64, 33).unwrap();
        let spec = ManufacturedSpec::with_defaults(17);
        for idx in 0..8 {
            let field = sample_field(&spec, idx).unwrap();
            let bound: f64 = field
                .spatial_terms
                .iter()
                .map(|s| s.amp.abs())
                .sum::<f64>()
                * field.temporal_terms.iter().map(|t| t.amp.abs()).sum::<f64>();
            let max = evaluate(&field, &grid)
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(max <= bound + 1e-12, "sample {idx}: {max} > {bound}");
        }
    }
}
