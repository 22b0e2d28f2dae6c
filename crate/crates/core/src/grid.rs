//! Discrete spatio-temporal lattice shared by the whole pipeline.
//!
//! The space axis is endpoint-exclusive (periodic FFT convention); the time
//! axis is endpoint-inclusive so both the initial state at t = 0 and the
//! final state at t = T are stored levels.

use crate::error::{MmlError, Result};
use ndarray::Array2;

/// Uniform lattice over `[0, length_x) x [0, horizon_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_x: usize,
    pub n_t: usize,
    pub length_x: f64,
    pub horizon_t: f64,
}

impl Grid {
    pub fn new(n_x: usize, n_t: usize, length_x: f64, horizon_t: f64) -> Result<Self> {
        if n_x < 8 || n_t < 8 {
            return Err(MmlError::InvalidArgument(format!(
                "grid must have at least 8 points per axis, got {n_t}x{n_x}"
            )));
        }
        if !(length_x > 0.0) || !(horizon_t > 0.0) {
            return Err(MmlError::InvalidArgument(
                "grid extents must be positive".into(),
            ));
        }
        Ok(Self {
            n_x,
            n_t,
            length_x,
            horizon_t,
        })
    }

    /// Square periodic domain `[0, 2π) x [0, 1]`, the setting every benchmark uses.
    pub fn unit(n_x: usize, n_t: usize) -> Result<Self> {
        Self::new(n_x, n_t, std::f64::consts::TAU, 1.0)
    }

    pub fn dx(&self) -> f64 {
        self.length_x / self.n_x as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon_t / (self.n_t - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Index of the time level closest to physical time `t`.
    pub fn time_index(&self, t: f64) -> usize {
        let n = (t / self.dt()).round() as isize;
        n.clamp(0, self.n_t as isize - 1) as usize
    }
}

/// The X and T coordinate channels: X varies along space and is constant in
/// time, T the other way around. Both have shape `(n_t, n_x)`.
pub fn coordinate_channels(grid: &Grid) -> (Array2<f64>, Array2<f64>) {
    let mut xs = Array2::zeros((grid.n_t, grid.n_x));
    let mut ts = Array2::zeros((grid.n_t, grid.n_x));
    for n in 0..grid.n_t {
        let t = grid.t(n);
        for j in 0..grid.n_x {
            xs[[n, j]] = grid.x(j);
            ts[[n, j]] = t;
        }
    }
    (xs, ts)
}
