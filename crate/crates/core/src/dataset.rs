//! Dataset assembly and the portable binary container.
//!
//! Each sample encodes one manufactured problem as a 4-channel input
//! `[f, X, T, U0]` over the grid and the manufactured solution as the
//! 1-channel target.

use crate::error::{MmlError, Result};
use crate::grid::{coordinate_channels, Grid};
use crate::manufactured::{self, ManufacturedSpec};
use crate::pde::{manufactured_forcing, DerivativeMode, PdeKind};
use crate::spectral::nyquist_check;
use crate::bytes::{self, Cursor};
use ndarray::Array3;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const DATASET_MAGIC: [u8; 8] = *b"MMLDATA1";
pub const DATASET_VERSION: u32 = 1;
/// Fixed header size of the container, in bytes.
pub const HEADER_BYTES: usize = 120;
const IN_CHANNELS: usize = 4;

/// One training pair: input channels `[f, X, T, U0]` and the target field.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Array3<f64>,
    pub target: Array3<f64>,
}

/// A self-describing collection of manufactured samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: Grid,
    pub pde: PdeKind,
    pub spec: ManufacturedSpec,
    pub derivative_mode: DerivativeMode,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Exact on-disk size of this dataset.
    pub fn encoded_len(&self) -> usize {
        HEADER_BYTES
            + self.samples.len() * (IN_CHANNELS + 1) * self.grid.n_t * self.grid.n_x * 8
    }
}

/// Generates `n_samples` manufactured pairs. Sample `i` depends only on
/// `(spec.base_seed, i)`, so any sub-range is reproducible in isolation.
pub fn build_dataset(
    spec: &ManufacturedSpec,
    pde: PdeKind,
    grid: &Grid,
    n_samples: usize,
    mode: DerivativeMode,
) -> Result<Dataset> {
    build_dataset_range(spec, pde, grid, 0, n_samples, mode)
}

/// [`build_dataset`] over the sample indices
/// `first_index .. first_index + n_samples`, so validation sets can occupy
/// an index range disjoint from training.
pub fn build_dataset_range(
    spec: &ManufacturedSpec,
    pde: PdeKind,
    grid: &Grid,
    first_index: u64,
    n_samples: usize,
    mode: DerivativeMode,
) -> Result<Dataset> {
    spec.validate()?;
    pde.validate()?;
    if n_samples == 0 {
        return Err(MmlError::InvalidArgument(
            "a dataset needs at least one sample".into(),
        ));
    }
    if mode == DerivativeMode::Discrete {
        // Fail fast on the whole family rather than on whichever sample
        // happens to draw the highest wavenumber.
        let degree = pde.nonlinearity_degree();
        if !nyquist_check(spec.k_max, grid.n_x, degree) {
            return Err(MmlError::AliasingRisk {
                modes: spec.k_max,
                n_x: grid.n_x,
                degree,
            });
        }
    }

    let (xx, tt) = coordinate_channels(grid);
    let (n_t, n_x) = (grid.n_t, grid.n_x);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let field = manufactured::sample_field(spec, first_index + i as u64)?;
        let u = manufactured::evaluate(&field, grid);
        let f = manufactured_forcing(&field, pde, grid, mode)?;
        let mut input = Array3::zeros((IN_CHANNELS, n_t, n_x));
        let mut target = Array3::zeros((1, n_t, n_x));
        for n in 0..n_t {
            for j in 0..n_x {
                input[[0, n, j]] = f[[n, j]];
                input[[1, n, j]] = xx[[n, j]];
                input[[2, n, j]] = tt[[n, j]];
                input[[3, n, j]] = u[[0, j]];
                target[[0, n, j]] = u[[n, j]];
            }
        }
        samples.push(Sample { input, target });
    }
    Ok(Dataset {
        grid: grid.clone(),
        pde,
        spec: spec.clone(),
        derivative_mode: mode,
        samples,
    })
}

/// Serializes to the documented container format.
pub fn encode_dataset(d: &Dataset) -> Result<Vec<u8>> {
    for s in &d.samples {
        if s.input.dim() != (IN_CHANNELS, d.grid.n_t, d.grid.n_x)
            || s.target.dim() != (1, d.grid.n_t, d.grid.n_x)
        {
            return Err(MmlError::InvalidArgument(
                "sample shape does not match the dataset grid".into(),
            ));
        }
    }
    let mut out = Vec::with_capacity(d.encoded_len());
    out.write_all(&DATASET_MAGIC).expect("vec write");
    for v in [
        DATASET_VERSION,
        d.pde.id(),
        d.derivative_mode.id(),
        d.samples.len() as u32,
        d.grid.n_t as u32,
        d.grid.n_x as u32,
        IN_CHANNELS as u32,
    ] {
        bytes::put_u32(&mut out, v).expect("vec write");
    }
    for v in [d.pde.param(), d.grid.length_x, d.grid.horizon_t] {
        bytes::put_f64(&mut out, v).expect("vec write");
    }
    bytes::put_u64(&mut out, d.spec.base_seed).expect("vec write");
    for v in [
        d.spec.k_x_terms as u32,
        d.spec.k_t_terms as u32,
        d.spec.k_max,
    ] {
        bytes::put_u32(&mut out, v).expect("vec write");
    }
    for v in [
        d.spec.omega_max,
        d.spec.amp_x_range.0,
        d.spec.amp_x_range.1,
        d.spec.amp_t_range.0,
        d.spec.amp_t_range.1,
    ] {
        bytes::put_f64(&mut out, v).expect("vec write");
    }
    debug_assert_eq!(out.len(), HEADER_BYTES);
    for s in &d.samples {
        for v in s.input.as_slice().expect("standard layout") {
            bytes::put_f64(&mut out, *v).expect("vec write");
        }
        for v in s.target.as_slice().expect("standard layout") {
            bytes::put_f64(&mut out, *v).expect("vec write");
        }
    }
    Ok(out)
}

pub fn write_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let buf = encode_dataset(d)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn decode_dataset(raw: &[u8]) -> Result<Dataset> {
    let mut cur = Cursor::new(raw);
    cur.magic(DATASET_MAGIC)?;
    let version = cur.u32()?;
    if version != DATASET_VERSION {
        return Err(MmlError::VersionMismatch {
            expected: DATASET_VERSION,
            found: version,
        });
    }
    let pde_id = cur.u32()?;
    let mode = DerivativeMode::from_id(cur.u32()?)?;
    let n_samples = cur.u32()? as usize;
    let n_t = cur.u32()? as usize;
    let n_x = cur.u32()? as usize;
    let channels = cur.u32()? as usize;
    if channels != IN_CHANNELS {
        return Err(MmlError::InvalidArgument(format!(
            "dataset declares {channels} input channels, this reader expects {IN_CHANNELS}"
        )));
    }
    let pde_param = cur.f64()?;
    let pde = PdeKind::from_id(pde_id, pde_param)?;
    let length_x = cur.f64()?;
    let horizon_t = cur.f64()?;
    let grid = Grid::new(n_x, n_t, length_x, horizon_t)?;
    let base_seed = cur.u64()?;
    let k_x_terms = cur.u32()? as usize;
    let k_t_terms = cur.u32()? as usize;
    let k_max = cur.u32()?;
    let omega_max = cur.f64()?;
    let amp_x_range = (cur.f64()?, cur.f64()?);
    let amp_t_range = (cur.f64()?, cur.f64()?);
    let spec = ManufacturedSpec {
        k_x_terms,
        k_t_terms,
        k_max,
        omega_max,
        amp_x_range,
        amp_t_range,
        base_seed,
    };
    spec.validate()?;

    let per_sample = (IN_CHANNELS + 1)
        .checked_mul(n_t)
        .and_then(|v| v.checked_mul(n_x))
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| {
            MmlError::ShapeOverflow(format!("sample of {n_t}×{n_x} nodes overflows"))
        })?;
    let payload = n_samples.checked_mul(per_sample).ok_or_else(|| {
        MmlError::ShapeOverflow(format!("{n_samples} samples of {per_sample} bytes overflow"))
    })?;
    let expected = (HEADER_BYTES + payload) as u64;
    if (raw.len() as u64) < expected {
        return Err(MmlError::Truncated {
            expected,
            found: raw.len() as u64,
        });
    }

    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let input = cur.f64_slice(IN_CHANNELS * n_t * n_x)?;
        let target = cur.f64_slice(n_t * n_x)?;
        samples.push(Sample {
            input: Array3::from_shape_vec((IN_CHANNELS, n_t, n_x), input)
                .expect("length checked"),
            target: Array3::from_shape_vec((1, n_t, n_x), target).expect("length checked"),
        });
    }
    if cur.remaining() != 0 {
        return Err(MmlError::InvalidArgument(format!(
            "{} trailing bytes after the declared payload",
            cur.remaining()
        )));
    }
    Ok(Dataset {
        grid,
        pde,
        spec,
        derivative_mode: mode,
        samples,
    })
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let raw = fs::read(path)?;
    decode_dataset(&raw)
}
