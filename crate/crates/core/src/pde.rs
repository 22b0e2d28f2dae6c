//! The four governing operators, manufactured forcings, and physics residuals.

use crate::error::{MmlError, Result};
use crate::grid::Grid;
use crate::manufactured::{self, ManufacturedField};
use crate::spectral;
use ndarray::Array2;

/// Governing operator P[u] with its physical parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdeKind {
    Heat { nu: f64 },
    Advection { c: f64 },
    Burgers { nu: f64 },
    DiffusionReaction { nu: f64 },
}

impl PdeKind {
    /// The benchmark parameter choices.
    pub fn heat_default() -> Self {
        PdeKind::Heat { nu: 0.2 }
    }
    pub fn advection_default() -> Self {
        PdeKind::Advection { c: 0.5 }
    }
    pub fn burgers_default() -> Self {
        PdeKind::Burgers { nu: 0.05 }
    }
    pub fn diffusion_reaction_default() -> Self {
        PdeKind::DiffusionReaction { nu: 0.05 }
    }

    pub fn validate(&self) -> Result<()> {
        let nu = match self {
            PdeKind::Heat { nu } | PdeKind::Burgers { nu } | PdeKind::DiffusionReaction { nu } => *nu,
            PdeKind::Advection { .. } => return Ok(()),
        };
        if nu <= 0.0 {
            return Err(MmlError::InvalidArgument(format!(
                "viscosity must be positive, got {nu}"
            )));
        }
        Ok(())
    }

    /// Stable id used in file headers.
    pub fn id(&self) -> u32 {
        match self {
            PdeKind::Heat { .. } => 0,
            PdeKind::Advection { .. } => 1,
            PdeKind::Burgers { .. } => 2,
            PdeKind::DiffusionReaction { .. } => 3,
        }
    }

    /// Inverse of [`PdeKind::id`] given the stored parameter value.
    pub fn from_id(id: u32, param: f64) -> Result<Self> {
        let kind = match id {
            0 => PdeKind::Heat { nu: param },
            1 => PdeKind::Advection { c: param },
            2 => PdeKind::Burgers { nu: param },
            3 => PdeKind::DiffusionReaction { nu: param },
            other => {
                return Err(MmlError::InvalidArgument(format!(
                    "unknown pde id {other}"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn param(&self) -> f64 {
        match self {
            PdeKind::Heat { nu } | PdeKind::Burgers { nu } | PdeKind::DiffusionReaction { nu } => *nu,
            PdeKind::Advection { c } => *c,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PdeKind::Heat { .. } => "heat",
            PdeKind::Advection { .. } => "advection",
            PdeKind::Burgers { .. } => "burgers",
            PdeKind::DiffusionReaction { .. } => "diffusion_reaction",
        }
    }

    /// Highest pointwise power of u in the operator: 1 for the linear PDEs,
    /// 2 for Burgers (u·u_x), 3 for diffusion–reaction (u³).
    pub fn nonlinearity_degree(&self) -> u32 {
        match self {
            PdeKind::Heat { .. } | PdeKind::Advection { .. } => 1,
            PdeKind::Burgers { .. } => 2,
            PdeKind::DiffusionReaction { .. } => 3,
        }
    }
}

/// How derivatives entering the forcing are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Closed forms from the manufactured field.
    Analytic,
    /// The same finite-difference/spectral stencils the training residual
    /// uses, making the residual exactly zero at the manufactured solution.
    Discrete,
}

impl DerivativeMode {
    pub fn id(&self) -> u32 {
        match self {
            DerivativeMode::Discrete => 0,
            DerivativeMode::Analytic => 1,
        }
    }

    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            0 => Ok(DerivativeMode::Discrete),
            1 => Ok(DerivativeMode::Analytic),
            other => Err(MmlError::InvalidArgument(format!(
                "unknown derivative mode id {other}"
            ))),
        }
    }
}

/// Pointwise P[u] from precomputed derivative fields.
pub fn apply(
    pde: PdeKind,
    u: &Array2<f64>,
    u_t: &Array2<f64>,
    u_x: &Array2<f64>,
    u_xx: &Array2<f64>,
) -> Result<Array2<f64>> {
    let dim = u.dim();
    if u_t.dim() != dim || u_x.dim() != dim || u_xx.dim() != dim {
        return Err(MmlError::InvalidArgument(format!(
            "derivative arrays must share the field shape {dim:?}"
        )));
    }
    let out = match pde {
        PdeKind::Heat { nu } => u_t - &(nu * u_xx),
        PdeKind::Advection { c } => u_t + &(c * u_x),
        PdeKind::Burgers { nu } => u_t + &(u * u_x) - &(nu * u_xx),
        PdeKind::DiffusionReaction { nu } => u_t - &(nu * u_xx) + u - &(u * u * u),
    };
    Ok(out)
}

/// Forcing f = P[u] for a manufactured field, with derivatives per `mode`.
///
/// In `Discrete` mode the field's largest wavenumber must leave pointwise
/// products of the operator's degree alias-free on the grid.
pub fn manufactured_forcing(
    field: &ManufacturedField,
    pde: PdeKind,
    grid: &Grid,
    mode: DerivativeMode,
) -> Result<Array2<f64>> {
    pde.validate()?;
    let u = manufactured::evaluate(field, grid);
    match mode {
        DerivativeMode::Analytic => {
            let u_t = manufactured::evaluate_dt(field, grid);
            let u_x = manufactured::evaluate_dx(field, grid, 1)?;
            let u_xx = manufactured::evaluate_dx(field, grid, 2)?;
            apply(pde, &u, &u_t, &u_x, &u_xx)
        }
        DerivativeMode::Discrete => {
            let field_modes = field
                .spatial_terms
                .iter()
                .map(|term| term.wavenumber)
                .max()
                .unwrap_or(0);
            let degree = pde.nonlinearity_degree();
            if !spectral::nyquist_check(field_modes, grid.n_x, degree) {
                return Err(MmlError::AliasingRisk {
                    modes: field_modes,
                    n_x: grid.n_x,
                    degree,
                });
            }
            Ok(residual_of_prediction(pde, &u, grid))
        }
    }
}

/// Discrete-mode P[u] for an arbitrary field: finite differences in time,
/// spectral derivatives in space. This is the operator the physics loss
/// differentiates through.
pub fn residual_of_prediction(pde: PdeKind, u_pred: &Array2<f64>, grid: &Grid) -> Array2<f64> {
    let u_t = spectral::time_derivative_fd(u_pred, grid.dt());
    let dx = |order| {
        spectral::spatial_derivative_field(u_pred, order, grid.length_x)
            .expect("positive order on a well-formed grid")
    };
    let zeros = || Array2::zeros(u_pred.dim());
    let (u_x, u_xx) = match pde {
        PdeKind::Heat { .. } | PdeKind::DiffusionReaction { .. } => (zeros(), dx(2)),
        PdeKind::Advection { .. } => (dx(1), zeros()),
        PdeKind::Burgers { .. } => (dx(1), dx(2)),
    };
    apply(pde, u_pred, &u_t, &u_x, &u_xx).expect("shapes match by construction")
}
