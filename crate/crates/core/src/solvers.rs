//! Ground-truth trajectories for zero-forcing evaluation: closed-form
//! spectral solutions for heat and advection, a 4th-order pseudo-spectral
//! integrator for the nonlinear equations.

use crate::error::{MmlError, Result};
use crate::fft;
use crate::grid::Grid;
use crate::pde::PdeKind;
use crate::spectral::WavenumberLadder;
use ndarray::Array2;
use rustfft::num_complex::Complex64;

/// Time-stepping controls for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegratorConfig {
    /// Runge–Kutta substeps between consecutive stored time levels; the
    /// effective step is `Δt / substeps_per_output`.
    pub substeps_per_output: usize,
    /// Zero the top third of the spectrum of nonlinear products (2/3 rule).
    pub dealias: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            substeps_per_output: 8,
            dealias: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.substeps_per_output == 0 {
            return Err(MmlError::InvalidArgument(
                "at least one substep per output level is required".into(),
            ));
        }
        Ok(())
    }
}

fn check_initial_state(u0: &[f64], grid: &Grid) -> Result<()> {
    if u0.len() != grid.n_x {
        return Err(MmlError::InvalidArgument(format!(
            "initial state has {} nodes, grid expects {}",
            u0.len(),
            grid.n_x
        )));
    }
    Ok(())
}

/// Exact heat trajectory: every mode decays as `exp(−ν k² t)`.
pub fn heat_exact(u0: &[f64], nu: f64, grid: &Grid) -> Result<Array2<f64>> {
    if !(nu > 0.0) {
        return Err(MmlError::InvalidArgument(format!(
            "heat viscosity must be positive, got {nu}"
        )));
    }
    check_initial_state(u0, grid)?;
    let ladder = WavenumberLadder::new(grid.n_x, grid.length_x);
    let spectrum = fft::fft_real(u0);
    let mut out = Array2::zeros((grid.n_t, grid.n_x));
    for n in 0..grid.n_t {
        let t = grid.t(n);
        let decayed: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let k = ladder.modes[m] as f64 * ladder.scale;
                c * (-nu * k * k * t).exp()
            })
            .collect();
        let row = fft::ifft_real(&decayed);
        out.row_mut(n).iter_mut().zip(row).for_each(|(o, v)| *o = v);
    }
    Ok(out)
}

/// Exact advection trajectory: every mode picks up the phase
/// `exp(−i c k t)`, i.e. `u(x, t) = u0(x − c t)` periodically.
///
/// An even grid's Nyquist bin has no well-defined signed wavenumber; it is
/// carried with `k = +n_x/2`, which is exact for every band-limited state
/// the benchmarks use.
pub fn advection_exact(u0: &[f64], c: f64, grid: &Grid) -> Result<Array2<f64>> {
    check_initial_state(u0, grid)?;
    let ladder = WavenumberLadder::new(grid.n_x, grid.length_x);
    let spectrum = fft::fft_real(u0);
    let mut out = Array2::zeros((grid.n_t, grid.n_x));
    for n in 0..grid.n_t {
        let t = grid.t(n);
        let shifted: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(m, coeff)| {
                let k = ladder.modes[m] as f64 * ladder.scale;
                coeff * Complex64::from_polar(1.0, -c * k * t)
            })
            .collect();
        let row = fft::ifft_real(&shifted);
        out.row_mut(n).iter_mut().zip(row).for_each(|(o, v)| *o = v);
    }
    Ok(out)
}

/// Spectral scratch shared by every right-hand-side evaluation.
struct PseudoSpectral {
    ladder: WavenumberLadder,
    /// 1 below the 2/3 cutoff, 0 above.
    keep: Vec<f64>,
}

impl PseudoSpectral {
    fn new(grid: &Grid) -> Self {
        let ladder = WavenumberLadder::new(grid.n_x, grid.length_x);
        let n = grid.n_x as i64;
        let keep = ladder
            .modes
            .iter()
            .map(|&k| if 3 * k.abs() < n { 1.0 } else { 0.0 })
            .collect();
        Self { ladder, keep }
    }

    fn derivative(&self, spectrum: &[Complex64], order: u32) -> Vec<f64> {
        let d: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(m, c)| c * self.ladder.multiplier(m, order))
            .collect();
        fft::ifft_real(&d)
    }

    /// Projects a pointwise product back under the 2/3 cutoff.
    fn dealias(&self, values: Vec<f64>, enabled: bool) -> Vec<f64> {
        if !enabled {
            return values;
        }
        let mut spec = fft::fft_real(&values);
        for (c, keep) in spec.iter_mut().zip(self.keep.iter()) {
            *c *= *keep;
        }
        fft::ifft_real(&spec)
    }
}

fn rhs(
    pde: PdeKind,
    u: &[f64],
    ws: &PseudoSpectral,
    cfg: &IntegratorConfig,
) -> Vec<f64> {
    let spectrum = fft::fft_real(u);
    match pde {
        PdeKind::Burgers { nu } => {
            let u_x = ws.derivative(&spectrum, 1);
            let u_xx = ws.derivative(&spectrum, 2);
            let advective: Vec<f64> = u.iter().zip(u_x.iter()).map(|(a, b)| a * b).collect();
            let advective = ws.dealias(advective, cfg.dealias);
            advective
                .iter()
                .zip(u_xx.iter())
                .map(|(adv, diff)| -adv + nu * diff)
                .collect()
        }
        PdeKind::DiffusionReaction { nu } => {
            let u_xx = ws.derivative(&spectrum, 2);
            let cubic: Vec<f64> = u.iter().map(|v| v * v * v).collect();
            let cubic = ws.dealias(cubic, cfg.dealias);
            u.iter()
                .zip(u_xx.iter())
                .zip(cubic.iter())
                .map(|((v, diff), c3)| nu * diff - v + c3)
                .collect()
        }
        PdeKind::Heat { .. } | PdeKind::Advection { .. } => {
            unreachable!("linear kinds are dispatched to their closed forms")
        }
    }
}

/// Classical RK4 pseudo-spectral integration of the nonlinear equations,
/// storing the state at the `n_t` grid levels.
pub fn integrate(
    pde: PdeKind,
    u0: &[f64],
    grid: &Grid,
    cfg: &IntegratorConfig,
) -> Result<Array2<f64>> {
    if pde.nonlinearity_degree() == 1 {
        return Err(MmlError::InvalidArgument(format!(
            "{} has a closed-form reference; integrate handles the nonlinear kinds",
            pde.name()
        )));
    }
    pde.validate()?;
    cfg.validate()?;
    check_initial_state(u0, grid)?;

    let ws = PseudoSpectral::new(grid);
    let h = grid.dt() / cfg.substeps_per_output as f64;
    let n_x = grid.n_x;
    let mut out = Array2::zeros((grid.n_t, n_x));
    let mut u = u0.to_vec();
    out.row_mut(0).iter_mut().zip(u.iter()).for_each(|(o, v)| *o = *v);

    let mut step = 0usize;
    for n in 1..grid.n_t {
        for _ in 0..cfg.substeps_per_output {
            let k1 = rhs(pde, &u, &ws, cfg);
            let mid1: Vec<f64> = u.iter().zip(k1.iter()).map(|(v, k)| v + 0.5 * h * k).collect();
            let k2 = rhs(pde, &mid1, &ws, cfg);
            let mid2: Vec<f64> = u.iter().zip(k2.iter()).map(|(v, k)| v + 0.5 * h * k).collect();
            let k3 = rhs(pde, &mid2, &ws, cfg);
            let end: Vec<f64> = u.iter().zip(k3.iter()).map(|(v, k)| v + h * k).collect();
            let k4 = rhs(pde, &end, &ws, cfg);
            for j in 0..n_x {
                u[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            step += 1;
            if u.iter().any(|v| !v.is_finite()) {
                return Err(MmlError::BlowUp { step });
            }
        }
        out.row_mut(n).iter_mut().zip(u.iter()).for_each(|(o, v)| *o = *v);
    }
    Ok(out)
}

/// The reference trajectory of any governing kind: closed form where one
/// exists, RK4 pseudo-spectral otherwise.
pub fn reference_solution(
    pde: PdeKind,
    u0: &[f64],
    grid: &Grid,
    cfg: &IntegratorConfig,
) -> Result<Array2<f64>> {
    match pde {
        PdeKind::Heat { nu } => heat_exact(u0, nu, grid),
        PdeKind::Advection { c } => advection_exact(u0, c, grid),
        PdeKind::Burgers { .. } | PdeKind::DiffusionReaction { .. } => {
            integrate(pde, u0, grid, cfg)
        }
    }
}
