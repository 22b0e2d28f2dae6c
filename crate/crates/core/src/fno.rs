//! The Fourier neural operator: lifting, spectral convolution layers with
//! pointwise bypasses, and a two-layer projection head.
//!
//! Parameters live in one flat buffer whose layout is fixed by
//! [`FnoConfig::layout`]: lifting weight and bias; per layer the spectral
//! weight real part, imaginary part, bypass weight, bypass bias; projection
//! weight and bias twice. The same order defines initialization draws and
//! the checkpoint byte stream.

use crate::autodiff::{SharedTensor, Tape, Var};
use crate::bytes::{self, Cursor};
use crate::error::{MmlError, Result};
use crate::grid::Grid;
use crate::pde::PdeKind;
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"MMLCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FnoConfig {
    pub n_layers: usize,
    pub width: usize,
    /// Retained non-negative time modes; the layer also keeps the mirrored
    /// negative block, so a grid must satisfy `2·modes_t ≤ n_t`.
    pub modes_t: usize,
    /// Retained non-negative space modes out of the `n_x/2 + 1` half
    /// spectrum.
    pub modes_x: usize,
    pub lift_hidden: usize,
    pub init_seed: u64,
}

impl FnoConfig {
    /// The architecture of the reference experiments: four layers, 64
    /// channels, 40 modes per axis.
    pub fn paper_defaults(init_seed: u64) -> Self {
        Self {
            n_layers: 4,
            width: 64,
            modes_t: 40,
            modes_x: 40,
            lift_hidden: 128,
            init_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.width == 0 || self.lift_hidden == 0 {
            return Err(MmlError::InvalidArgument(
                "layer count, width, and projection hidden width must be positive".into(),
            ));
        }
        if self.modes_t == 0 || self.modes_x == 0 {
            return Err(MmlError::InvalidArgument(
                "mode counts must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Checks the retained modes fit the grid spectrum.
    pub fn validate_against_grid(&self, grid: &Grid) -> Result<()> {
        self.validate()?;
        if 2 * self.modes_t > grid.n_t {
            return Err(MmlError::InvalidArgument(format!(
                "modes_t = {} needs 2·modes_t ≤ n_t = {}",
                self.modes_t, grid.n_t
            )));
        }
        if self.modes_x > grid.n_x / 2 + 1 {
            return Err(MmlError::InvalidArgument(format!(
                "modes_x = {} exceeds the {}-point half spectrum",
                self.modes_x,
                grid.n_x
            )));
        }
        Ok(())
    }

    /// Parameter groups in storage order.
    pub fn layout(&self) -> Vec<GroupSpec> {
        let w = self.width;
        let modes = 2 * self.modes_t * self.modes_x;
        let mut groups = vec![
            GroupSpec::pointwise((w, 4, 1), 4),
            GroupSpec::bias((w, 1, 1), 4),
        ];
        for _ in 0..self.n_layers {
            groups.push(GroupSpec::spectral((w, w, modes)));
            groups.push(GroupSpec::spectral((w, w, modes)));
            groups.push(GroupSpec::pointwise((w, w, 1), w));
            groups.push(GroupSpec::bias((w, 1, 1), w));
        }
        groups.push(GroupSpec::pointwise((self.lift_hidden, w, 1), w));
        groups.push(GroupSpec::bias((self.lift_hidden, 1, 1), w));
        groups.push(GroupSpec::pointwise((1, self.lift_hidden, 1), self.lift_hidden));
        groups.push(GroupSpec::bias((1, 1, 1), self.lift_hidden));
        groups
    }

    /// Total parameter count, in closed form.
    pub fn param_count(&self) -> usize {
        let w = self.width;
        let spectral = 2 * w * w * 2 * self.modes_t * self.modes_x;
        let lifting = 4 * w + w;
        let per_layer = spectral + w * w + w;
        let projection = w * self.lift_hidden + self.lift_hidden + self.lift_hidden + 1;
        lifting + self.n_layers * per_layer + projection
    }
}

/// One parameter group: a shaped slice of the flat buffer.
#[derive(Debug, Clone, Copy)]
pub struct GroupSpec {
    pub shape: (usize, usize, usize),
    init: InitKind,
}

#[derive(Debug, Clone, Copy)]
enum InitKind {
    /// Uniform ±1/√fan_in (weights and biases of pointwise mixings).
    FanIn(usize),
    /// Uniform ±1/width² (spectral weight parts).
    Spectral,
}

impl GroupSpec {
    fn pointwise(shape: (usize, usize, usize), fan_in: usize) -> Self {
        Self {
            shape,
            init: InitKind::FanIn(fan_in),
        }
    }
    fn bias(shape: (usize, usize, usize), fan_in: usize) -> Self {
        Self {
            shape,
            init: InitKind::FanIn(fan_in),
        }
    }
    fn spectral(shape: (usize, usize, usize)) -> Self {
        Self {
            shape,
            init: InitKind::Spectral,
        }
    }
    pub fn len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Flat parameter buffer plus the config that shapes it.
#[derive(Debug, Clone, PartialEq)]
pub struct FnoParams {
    pub config: FnoConfig,
    pub data: Vec<f64>,
}

impl FnoParams {
    /// Deterministic initialization: one draw stream, groups filled in
    /// layout order.
    pub fn init(config: FnoConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(config.init_seed);
        let spectral_scale = 1.0 / (config.width * config.width) as f64;
        let mut data = Vec::with_capacity(config.param_count());
        for group in config.layout() {
            let bound = match group.init {
                InitKind::FanIn(fan_in) => 1.0 / (fan_in as f64).sqrt(),
                InitKind::Spectral => spectral_scale,
            };
            for _ in 0..group.len() {
                data.push(rng.gen_range(-bound..bound));
            }
        }
        debug_assert_eq!(data.len(), config.param_count());
        Ok(Self { config, data })
    }

    /// Start offsets of each layout group in `data`.
    pub fn group_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::new();
        let mut pos = 0;
        for group in self.config.layout() {
            offsets.push(pos);
            pos += group.len();
        }
        offsets
    }
}

/// Optional per-channel affine input normalization `(x − mean) / std`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNorm {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl ChannelNorm {
    pub fn apply(&self, input: &Array3<f64>) -> Array3<f64> {
        let mut out = input.clone();
        for (c, mut plane) in out.outer_iter_mut().enumerate() {
            plane.mapv_inplace(|v| (v - self.mean[c]) / self.std[c]);
        }
        out
    }
}

/// Parameters reshaped into shared tensors, ready to bind onto tapes.
pub struct FnoModel {
    pub config: FnoConfig,
    groups: Vec<SharedTensor>,
}

/// Tape handles of this model's parameter groups, in layout order.
pub struct FnoBinding {
    pub vars: Vec<Var>,
}

impl FnoModel {
    /// One copy of the flat buffer into shaped tensors; per-sample tapes then
    /// share these without further copying.
    pub fn from_params(params: &FnoParams) -> Result<Self> {
        params.config.validate()?;
        if params.data.len() != params.config.param_count() {
            return Err(MmlError::InvalidArgument(format!(
                "parameter buffer holds {} values, config needs {}",
                params.data.len(),
                params.config.param_count()
            )));
        }
        let mut groups = Vec::new();
        let mut pos = 0;
        for spec in params.config.layout() {
            let slice = &params.data[pos..pos + spec.len()];
            pos += spec.len();
            let arr = Array3::from_shape_vec(spec.shape, slice.to_vec())
                .expect("layout shapes match their lengths");
            groups.push(arr.into_shared());
        }
        Ok(Self {
            config: params.config,
            groups,
        })
    }

    /// Registers the parameter groups as shared leaves on `tape`.
    pub fn bind(&self, tape: &Tape) -> FnoBinding {
        FnoBinding {
            vars: self.groups.iter().map(|g| tape.shared(g.clone())).collect(),
        }
    }

    /// The operator forward pass, recorded on `tape`. `input` must be a
    /// `(4, n_t, n_x)` real node.
    pub fn forward_on_tape(&self, tape: &Tape, binding: &FnoBinding, input: Var) -> Result<Var> {
        let shape = tape.real_value(input)?.dim();
        let (channels, n_t, n_x) = shape;
        if channels != 4 {
            return Err(MmlError::InvalidArgument(format!(
                "operator input needs 4 channels, found {channels}"
            )));
        }
        let grid_probe = Grid {
            n_x,
            n_t,
            length_x: 1.0,
            horizon_t: 1.0,
        };
        self.config.validate_against_grid(&grid_probe)?;

        let v = &binding.vars;
        let mut h = tape.channel_mix(input, v[0], Some(v[1]))?;
        for layer in 0..self.config.n_layers {
            let base = 2 + 4 * layer;
            let spec = tape.rfft2_trunc(h, self.config.modes_t, self.config.modes_x)?;
            let mixed = tape.mode_mix(spec, v[base], v[base + 1])?;
            let spectral_out = tape.irfft2_pad(mixed, n_t, n_x)?;
            let bypass = tape.channel_mix(h, v[base + 2], Some(v[base + 3]))?;
            h = tape.add(spectral_out, bypass)?;
            if layer + 1 < self.config.n_layers {
                h = tape.gelu(h)?;
            }
        }
        let base = 2 + 4 * self.config.n_layers;
        let hidden = tape.channel_mix(h, v[base], Some(v[base + 1]))?;
        let hidden = tape.gelu(hidden)?;
        tape.channel_mix(hidden, v[base + 2], Some(v[base + 3]))
    }

    /// Forward pass on a private tape, returning the predicted field.
    pub fn predict(&self, input: &Array3<f64>) -> Result<Array3<f64>> {
        let tape = Tape::new();
        let x = tape.constant(input.clone());
        let binding = self.bind(&tape);
        let out = self.forward_on_tape(&tape, &binding, x)?;
        Ok(tape.real_value(out)?.to_owned())
    }
}

/// Everything needed to reload and run a trained operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: FnoParams,
    pub pde: PdeKind,
    pub grid: Grid,
    pub norm: Option<ChannelNorm>,
}

/// Byte layout (all little-endian): magic `MMLCKPT1`; u32 version; u32
/// n_layers, width, modes_t, modes_x, lift_hidden; u64 init_seed; u32
/// pde_id; f64 pde parameter; u32 n_t, n_x; f64 length_x, horizon_t; u32
/// normalization flag; 8 f64 normalization constants (means then stds,
/// zeros/ones when the flag is 0); u64 parameter count; then the flat
/// parameter buffer.
pub fn write_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    encode_checkpoint(checkpoint, &mut out)?;
    fs::write(path, out)?;
    Ok(())
}

pub fn encode_checkpoint(checkpoint: &Checkpoint, out: &mut Vec<u8>) -> Result<()> {
    let c = &checkpoint.params.config;
    if checkpoint.params.data.len() != c.param_count() {
        return Err(MmlError::InvalidArgument(format!(
            "parameter buffer holds {} values, config needs {}",
            checkpoint.params.data.len(),
            c.param_count()
        )));
    }
    out.write_all(&CHECKPOINT_MAGIC).expect("vec write");
    bytes::put_u32(out, CHECKPOINT_VERSION).expect("vec write");
    for v in [c.n_layers, c.width, c.modes_t, c.modes_x, c.lift_hidden] {
        bytes::put_u32(out, v as u32).expect("vec write");
    }
    bytes::put_u64(out, c.init_seed).expect("vec write");
    bytes::put_u32(out, checkpoint.pde.id()).expect("vec write");
    bytes::put_f64(out, checkpoint.pde.param()).expect("vec write");
    bytes::put_u32(out, checkpoint.grid.n_t as u32).expect("vec write");
    bytes::put_u32(out, checkpoint.grid.n_x as u32).expect("vec write");
    bytes::put_f64(out, checkpoint.grid.length_x).expect("vec write");
    bytes::put_f64(out, checkpoint.grid.horizon_t).expect("vec write");
    match &checkpoint.norm {
        Some(norm) => {
            bytes::put_u32(out, 1).expect("vec write");
            for v in norm.mean.iter().chain(norm.std.iter()) {
                bytes::put_f64(out, *v).expect("vec write");
            }
        }
        None => {
            bytes::put_u32(out, 0).expect("vec write");
            for i in 0..8 {
                bytes::put_f64(out, if i < 4 { 0.0 } else { 1.0 }).expect("vec write");
            }
        }
    }
    bytes::put_u64(out, checkpoint.params.data.len() as u64).expect("vec write");
    for v in &checkpoint.params.data {
        bytes::put_f64(out, *v).expect("vec write");
    }
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let raw = fs::read(path)?;
    decode_checkpoint(&raw)
}

pub fn decode_checkpoint(raw: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor::new(raw);
    cur.magic(CHECKPOINT_MAGIC)?;
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(MmlError::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let n_layers = cur.u32()? as usize;
    let width = cur.u32()? as usize;
    let modes_t = cur.u32()? as usize;
    let modes_x = cur.u32()? as usize;
    let lift_hidden = cur.u32()? as usize;
    let init_seed = cur.u64()?;
    let config = FnoConfig {
        n_layers,
        width,
        modes_t,
        modes_x,
        lift_hidden,
        init_seed,
    };
    config.validate()?;
    let pde = PdeKind::from_id(cur.u32()?, cur.f64()?)?;
    let n_t = cur.u32()? as usize;
    let n_x = cur.u32()? as usize;
    let length_x = cur.f64()?;
    let horizon_t = cur.f64()?;
    let grid = Grid::new(n_x, n_t, length_x, horizon_t)?;
    let norm_flag = cur.u32()?;
    let consts = cur.f64_slice(8)?;
    let norm = match norm_flag {
        0 => None,
        1 => Some(ChannelNorm {
            mean: consts[0..4].try_into().unwrap(),
            std: consts[4..8].try_into().unwrap(),
        }),
        other => {
            return Err(MmlError::InvalidArgument(format!(
                "unknown normalization flag {other}"
            )))
        }
    };
    let count = cur.u64()? as usize;
    if count != config.param_count() {
        return Err(MmlError::InvalidArgument(format!(
            "checkpoint declares {count} parameters, config needs {}",
            config.param_count()
        )));
    }
    let data = cur.f64_slice(count)?;
    Ok(Checkpoint {
        params: FnoParams { config, data },
        pde,
        grid,
        norm,
    })
}
