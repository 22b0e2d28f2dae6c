//! Zero-forcing inference, benchmark suites, and error metrics.

use crate::error::{MmlError, Result};
use crate::fno::{Checkpoint, FnoModel};
use crate::grid::{coordinate_channels, Grid};
use crate::pde::PdeKind;
use crate::solvers::{reference_solution, IntegratorConfig};
use ndarray::{Array2, Array3};
use std::fmt::Write as _;

/// Relative L2 error in percent, `100·‖pred − ref‖₂ / ‖ref‖₂`, over every
/// grid point.
pub fn relative_l2(pred: &Array2<f64>, reference: &Array2<f64>) -> Result<f64> {
    if pred.dim() != reference.dim() {
        return Err(MmlError::InvalidArgument(format!(
            "field shapes differ: {:?} vs {:?}",
            pred.dim(),
            reference.dim()
        )));
    }
    let ref_norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ref_norm == 0.0 {
        return Err(MmlError::ZeroReferenceNorm);
    }
    let diff_norm = pred
        .iter()
        .zip(reference.iter())
        .map(|(p, r)| (p - r) * (p - r))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * diff_norm / ref_norm)
}

/// Bandwidth tier of a benchmark initial condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcId {
    SingleMode,
    TwoMode,
    ThreeMode,
}

impl IcId {
    pub const ALL: [IcId; 3] = [IcId::SingleMode, IcId::TwoMode, IcId::ThreeMode];

    pub fn label(&self) -> &'static str {
        match self {
            IcId::SingleMode => "single",
            IcId::TwoMode => "two",
            IcId::ThreeMode => "three",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "single" => Ok(IcId::SingleMode),
            "two" => Ok(IcId::TwoMode),
            "three" => Ok(IcId::ThreeMode),
            other => Err(MmlError::InvalidArgument(format!(
                "unknown initial-condition id '{other}' (expected single, two, or three)"
            ))),
        }
    }
}

/// One benchmark problem: a governing kind and one of its three canonical
/// initial conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkCase {
    pub pde: PdeKind,
    pub ic_id: IcId,
}

impl BenchmarkCase {
    /// The three cases of one governing kind, in bandwidth order.
    pub fn suite(pde: PdeKind) -> [BenchmarkCase; 3] {
        IcId::ALL.map(|ic_id| BenchmarkCase { pde, ic_id })
    }

    /// The canonical initial condition evaluated at `x`.
    ///
    /// Heat and advection share one hierarchy; Burgers and
    /// diffusion–reaction have their own.
    pub fn initial_condition_at(&self, x: f64) -> f64 {
        match (self.pde, self.ic_id) {
            (PdeKind::Heat { .. } | PdeKind::Advection { .. }, IcId::SingleMode) => 0.8 * x.sin(),
            (PdeKind::Heat { .. } | PdeKind::Advection { .. }, IcId::TwoMode) => {
                0.5 * x.sin() - 0.8 * (3.0 * x + 0.7).sin()
            }
            (PdeKind::Heat { .. } | PdeKind::Advection { .. }, IcId::ThreeMode) => {
                0.9 * x.sin() - 0.3 * (3.0 * x + 0.7).sin() + 0.7 * (5.0 * x - 1.2).sin()
            }
            (PdeKind::Burgers { .. }, IcId::SingleMode) => 0.8 * x.sin(),
            (PdeKind::Burgers { .. }, IcId::TwoMode) => {
                0.8 * x.sin() - 0.3 * (3.0 * x + 0.7).sin()
            }
            (PdeKind::Burgers { .. }, IcId::ThreeMode) => {
                -0.8 * x.sin() + 0.3 * (3.0 * x + 0.7).sin() - 0.2 * (5.0 * x - 1.1).sin()
            }
            (PdeKind::DiffusionReaction { .. }, IcId::SingleMode) => 0.8 * x.sin(),
            (PdeKind::DiffusionReaction { .. }, IcId::TwoMode) => {
                -0.5 * x.sin() + 0.8 * (3.0 * x + 0.7).sin()
            }
            (PdeKind::DiffusionReaction { .. }, IcId::ThreeMode) => {
                0.9 * x.sin() - 0.3 * (3.0 * x + 0.7).sin() + 0.7 * (5.0 * x - 1.2).sin()
            }
        }
    }

    /// The initial condition sampled on the grid's spatial nodes.
    pub fn initial_condition(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.n_x)
            .map(|j| self.initial_condition_at(grid.x(j)))
            .collect()
    }
}

/// The zero-forcing input tensor: channels `[f ≡ 0, X, T, U0 broadcast]`.
pub fn assemble_zero_forcing_input(u0: &[f64], grid: &Grid) -> Result<Array3<f64>> {
    if u0.len() != grid.n_x {
        return Err(MmlError::InvalidArgument(format!(
            "initial state has {} nodes, grid expects {}",
            u0.len(),
            grid.n_x
        )));
    }
    let (xx, tt) = coordinate_channels(grid);
    let mut input = Array3::zeros((4, grid.n_t, grid.n_x));
    for n in 0..grid.n_t {
        for j in 0..grid.n_x {
            input[[1, n, j]] = xx[[n, j]];
            input[[2, n, j]] = tt[[n, j]];
            input[[3, n, j]] = u0[j];
        }
    }
    Ok(input)
}

/// Runs the trained operator with the forcing channel zeroed, so its output
/// approximates the homogeneous dynamics started from `u0`.
pub fn zero_forcing_infer(
    checkpoint: &Checkpoint,
    u0: &[f64],
    grid: &Grid,
) -> Result<Array2<f64>> {
    if grid != &checkpoint.grid {
        return Err(MmlError::GridMismatch {
            expected_t: checkpoint.grid.n_t,
            expected_x: checkpoint.grid.n_x,
            got_t: grid.n_t,
            got_x: grid.n_x,
        });
    }
    let mut input = assemble_zero_forcing_input(u0, grid)?;
    if let Some(norm) = &checkpoint.norm {
        input = norm.apply(&input);
    }
    let model = FnoModel::from_params(&checkpoint.params)?;
    let pred = model.predict(&input)?;
    Ok(Array2::from_shape_fn((grid.n_t, grid.n_x), |(n, j)| {
        pred[[0, n, j]]
    }))
}

/// Error summary of one benchmark case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkReport {
    pub pde: PdeKind,
    pub ic_id: IcId,
    /// Full space-time relative L2, percent.
    pub rel_l2_pct: f64,
    /// Per-slice relative L2 at t = 0, 0.5, 1.0 (nearest grid levels).
    pub slice_pct: [f64; 3],
    /// Largest wrap-around seam of the prediction,
    /// `max_t |u(x_0) − u(x_{n_x−1})|`.
    pub periodicity_gap: f64,
    pub max_abs_err: f64,
}

pub const REPORT_HEADER: &str =
    "pde,ic_id,rel_l2_pct,slice_t0_pct,slice_t05_pct,slice_t1_pct,periodicity_gap,max_abs_err";

/// Zero-forcing inference against the case's reference trajectory.
pub fn run_benchmark(
    checkpoint: &Checkpoint,
    case: BenchmarkCase,
    integrator: &IntegratorConfig,
) -> Result<BenchmarkReport> {
    if case.pde != checkpoint.pde {
        return Err(MmlError::InvalidArgument(format!(
            "checkpoint was trained on {}, case asks for {}",
            checkpoint.pde.name(),
            case.pde.name()
        )));
    }
    let grid = checkpoint.grid.clone();
    let u0 = case.initial_condition(&grid);
    let pred = zero_forcing_infer(checkpoint, &u0, &grid)?;
    let reference = reference_solution(case.pde, &u0, &grid, integrator)?;

    let rel_l2_pct = relative_l2(&pred, &reference)?;
    let mut slice_pct = [0.0; 3];
    for (s, t) in [0.0, 0.5, 1.0].into_iter().enumerate() {
        let n = grid.time_index(t * grid.horizon_t);
        let p = pred.row(n).insert_axis(ndarray::Axis(0)).to_owned();
        let r = reference.row(n).insert_axis(ndarray::Axis(0)).to_owned();
        slice_pct[s] = relative_l2(&p, &r)?;
    }
    let periodicity_gap = (0..grid.n_t)
        .map(|n| (pred[[n, 0]] - pred[[n, grid.n_x - 1]]).abs())
        .fold(0.0f64, f64::max);
    let max_abs_err = pred
        .iter()
        .zip(reference.iter())
        .map(|(p, r)| (p - r).abs())
        .fold(0.0f64, f64::max);

    Ok(BenchmarkReport {
        pde: case.pde,
        ic_id: case.ic_id,
        rel_l2_pct,
        slice_pct,
        periodicity_gap,
        max_abs_err,
    })
}

/// Renders reports as the benchmark CSV.
pub fn report_csv(reports: &[BenchmarkReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6e}",
            r.pde.name(),
            r.ic_id.label(),
            r.rel_l2_pct,
            r.slice_pct[0],
            r.slice_pct[1],
            r.slice_pct[2],
            r.periodicity_gap,
            r.max_abs_err
        )
        .expect("string write");
    }
    out
}
