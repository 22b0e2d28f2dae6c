//! FFT-based periodic differentiation in space and finite differences in time.

use crate::error::{MmlError, Result};
use crate::fft;
use ndarray::Array2;
use rustfft::num_complex::Complex64;

/// Signed integer wavenumbers of an `n_x`-point transform together with the
/// `2π/length_x` factor that maps them to physical wavenumbers.
#[derive(Debug, Clone)]
pub struct WavenumberLadder {
    pub modes: Vec<i64>,
    pub scale: f64,
}

impl WavenumberLadder {
    pub fn new(n_x: usize, length_x: f64) -> Self {
        let modes = (0..n_x)
            .map(|m| {
                if m <= n_x / 2 {
                    m as i64
                } else {
                    m as i64 - n_x as i64
                }
            })
            .collect();
        Self {
            modes,
            scale: std::f64::consts::TAU / length_x,
        }
    }

    /// Differentiation multiplier `(i k)^order` for spectral bin `m`.
    ///
    /// For even `n_x` the Nyquist bin gets a zero multiplier at odd orders,
    /// which keeps the derivative of a real signal real.
    pub fn multiplier(&self, m: usize, order: u32) -> Complex64 {
        let n_x = self.modes.len();
        let k = self.modes[m] as f64 * self.scale;
        if order % 2 == 1 && n_x % 2 == 0 && m == n_x / 2 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, k).powu(order)
    }
}

/// Spectral derivative of one periodic row sampled on `n_x` nodes.
pub fn spatial_derivative(row: &[f64], order: u32, length_x: f64) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(MmlError::InvalidArgument(
            "derivative order must be positive".into(),
        ));
    }
    let ladder = WavenumberLadder::new(row.len(), length_x);
    let mut spec = fft::fft_real(row);
    for (m, c) in spec.iter_mut().enumerate() {
        *c *= ladder.multiplier(m, order);
    }
    Ok(fft::ifft_real(&spec))
}

/// Spectral x-derivative of every time row of an `(n_t, n_x)` field.
pub fn spatial_derivative_field(field: &Array2<f64>, order: u32, length_x: f64) -> Result<Array2<f64>> {
    let (n_t, n_x) = field.dim();
    let mut out = Array2::zeros((n_t, n_x));
    for n in 0..n_t {
        let row = field.row(n);
        let d = spatial_derivative(row.as_slice().expect("contiguous row"), order, length_x)?;
        out.row_mut(n).iter_mut().zip(d).for_each(|(o, v)| *o = v);
    }
    Ok(out)
}

/// Second-order time derivative: central stencils on interior levels,
/// one-sided three-point stencils at both endpoints.
pub fn time_derivative_fd(field: &Array2<f64>, dt: f64) -> Array2<f64> {
    let (n_t, n_x) = field.dim();
    assert!(n_t >= 3, "time stencil needs at least 3 levels");
    let mut out = Array2::zeros((n_t, n_x));
    let half = 0.5 / dt;
    for j in 0..n_x {
        out[[0, j]] = (-3.0 * field[[0, j]] + 4.0 * field[[1, j]] - field[[2, j]]) * half;
        out[[n_t - 1, j]] = (3.0 * field[[n_t - 1, j]] - 4.0 * field[[n_t - 2, j]]
            + field[[n_t - 3, j]])
            * half;
    }
    for n in 1..n_t - 1 {
        for j in 0..n_x {
            out[[n, j]] = (field[[n + 1, j]] - field[[n - 1, j]]) * half;
        }
    }
    out
}

/// True iff pointwise degree-`nonlinearity_degree` products of a field with
/// spatial modes up to `field_modes` stay below the grid Nyquist limit.
pub fn nyquist_check(field_modes: u32, n_x: usize, nonlinearity_degree: u32) -> bool {
    2 * (nonlinearity_degree as usize) * (field_modes as usize) < n_x
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use std::f64::consts::TAU;

    fn nodes(n_x: usize) -> Vec<f64> {
        (0..n_x).map(|j| j as f64 * TAU / n_x as f64).collect()
    }

    #[test]
    fn derivative_of_resolved_sine() {
        let xs = nodes(64);
        let row: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let d = spatial_derivative(&row, 1, TAU).unwrap();
        for (v, x) in d.iter().zip(xs.iter()) {
            assert!((v - x.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_of_mode_three() {
        let xs = nodes(64);
        let row: Vec<f64> = xs.iter().map(|x| (3.0 * x).sin()).collect();
        let d = spatial_derivative(&row, 2, TAU).unwrap();
        for (v, x) in d.iter().zip(xs.iter()) {
            assert!((v + 9.0 * (3.0 * x).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_high_order_finite_differences_on_bandlimited_field() {
        // 8th-order central differences as an independent oracle.
        let n_x = 128;
        let xs = nodes(n_x);
        let mut rng = 0x243f6a88u64;
        let mut unit = || {
            // xorshift; plenty for a fixed test field
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let coeffs: Vec<(f64, f64, f64)> = (1..=8).map(|k| (k as f64, unit(), unit())).collect();
        let f = |x: f64| -> f64 {
            coeffs
                .iter()
                .map(|&(k, a, b)| a * (k * x).sin() + b * (k * x).cos())
                .sum()
        };
        let row: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let d = spatial_derivative(&row, 1, TAU).unwrap();

        let h = TAU / n_x as f64;
        let w = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        for j in 0..n_x {
            let mut fd = 0.0;
            for (s, &c) in w.iter().enumerate() {
                let s = s + 1;
                fd += c * (row[(j + s) % n_x] - row[(j + n_x - s) % n_x]) / h;
            }
            // The bound is the FD oracle's own truncation error: at mode 8 on
            // 128 nodes the stencil is only good to ~7e-6 per unit amplitude.
            assert!(
                (d[j] - fd).abs() < 2e-5,
                "spectral vs FD mismatch at {j}: {} vs {fd}",
                d[j]
            );
        }
    }

    #[test]
    fn linearity_and_zero_mean() {
        let xs = nodes(64);
        let u: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin() + 0.3).collect();
        let v: Vec<f64> = xs.iter().map(|x| (5.0 * x).cos()).collect();
        let (a, b) = (1.7, -0.4);
        let combo: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let d_combo = spatial_derivative(&combo, 1, TAU).unwrap();
        let d_u = spatial_derivative(&u, 1, TAU).unwrap();
        let d_v = spatial_derivative(&v, 1, TAU).unwrap();
        let mut mean = 0.0;
        for j in 0..64 {
            assert!((d_combo[j] - (a * d_u[j] + b * d_v[j])).abs() < 1e-12);
            mean += d_combo[j];
        }
        assert!((mean / 64.0).abs() < 1e-12);
    }

    #[test]
    fn first_derivative_twice_matches_second() {
        let xs = nodes(128);
        let row: Vec<f64> = xs
            .iter()
            .map(|x| (4.0 * x + 0.3).sin() + 0.5 * (7.0 * x).cos())
            .collect();
        let once = spatial_derivative(&row, 1, TAU).unwrap();
        let twice = spatial_derivative(&once, 1, TAU).unwrap();
        let second = spatial_derivative(&row, 2, TAU).unwrap();
        for j in 0..128 {
            assert!((twice[j] - second[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_order_is_rejected() {
        assert!(spatial_derivative(&[0.0; 16], 0, TAU).is_err());
    }

    #[test]
    fn time_stencils_exact_on_polynomials() {
        let (n_t, n_x) = (9, 8);
        let dt = 1.0 / (n_t as f64 - 1.0);
        let constant = Array2::from_elem((n_t, n_x), 3.25);
        assert!(time_derivative_fd(&constant, dt).iter().all(|v| v.abs() < 1e-13));

        let linear = Array2::from_shape_fn((n_t, n_x), |(n, _)| n as f64 * dt);
        for v in time_derivative_fd(&linear, dt).iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }

        let quadratic = Array2::from_shape_fn((n_t, n_x), |(n, _)| (n as f64 * dt).powi(2));
        let d = time_derivative_fd(&quadratic, dt);
        for n in 0..n_t {
            for j in 0..n_x {
                assert!((d[[n, j]] - 2.0 * n as f64 * dt).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn time_stencil_error_bound_on_oscillatory_field() {
        // max error of the second-order stencils on sin(ωt + ψ) stays below
        // 10·ω³·Δt² for ω up to 8.
        let (n_t, n_x) = (128, 8);
        let dt = 1.0 / (n_t as f64 - 1.0);
        for &omega in &[1.0, 3.0, 8.0] {
            let psi = 0.7;
            let f = Array2::from_shape_fn((n_t, n_x), |(n, _)| (omega * n as f64 * dt + psi).sin());
            let d = time_derivative_fd(&f, dt);
            let mut max_err: f64 = 0.0;
            for n in 0..n_t {
                let exact = omega * (omega * n as f64 * dt + psi).cos();
                max_err = max_err.max((d[[n, 0]] - exact).abs());
            }
            assert!(
                max_err <= 10.0 * omega.powi(3) * dt * dt,
                "ω={omega}: err {max_err}"
            );
        }
    }

    #[test]
    fn nyquist_check_cases() {
        assert!(nyquist_check(8, 128, 2));
        assert!(nyquist_check(8, 128, 3));
        assert!(!nyquist_check(40, 128, 2));
    }
}
