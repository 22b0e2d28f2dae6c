//! Composite-objective training: data fidelity, physics residual, initial
//! condition, and periodicity terms minimized with an adaptive-moment
//! first-order optimizer.

use crate::autodiff::{SharedTensor, Tape, Var};
use crate::dataset::{Dataset, Sample};
use crate::error::{MmlError, Result};
use crate::eval::relative_l2;
use crate::fno::{FnoBinding, FnoConfig, FnoModel, FnoParams};
use crate::grid::Grid;
use crate::pde::{residual_of_prediction, PdeKind};
use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::fmt::Write as _;
use std::path::Path;

/// Coefficients of the three constraint terms. All-zero reduces training to
/// plain regression on the target fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_phys: f64,
    pub lambda_ic: f64,
    pub lambda_bc: f64,
}

impl Default for LossWeights {
    /// Keeps the attainable-zero physics term from dominating early
    /// gradients.
    fn default() -> Self {
        Self {
            lambda_phys: 0.1,
            lambda_ic: 1.0,
            lambda_bc: 1.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            lambda_phys: 0.0,
            lambda_ic: 0.0,
            lambda_bc: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_phys", self.lambda_phys),
            ("lambda_ic", self.lambda_ic),
            ("lambda_bc", self.lambda_bc),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(MmlError::InvalidArgument(format!(
                    "{name} must be a finite non-negative weight, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Optimization schedule. Everything is exposed; the defaults are the
/// conventional operator-training choices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate is multiplied by `lr_decay_factor` every
    /// `lr_decay_every` epochs (step schedule).
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seeds the per-epoch shuffle stream only; parameter initialization is
    /// owned by `FnoConfig::init_seed`.
    pub seed: u64,
    pub weights: LossWeights,
    /// Print a progress line every this many epochs; 0 silences the loop.
    pub log_every: usize,
}

impl TrainConfig {
    pub fn paper_defaults(seed: u64) -> Self {
        Self {
            epochs: 300,
            batch_size: 16,
            learning_rate: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed,
            weights: LossWeights::default(),
            log_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(MmlError::InvalidArgument(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(MmlError::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        if self.lr_decay_every == 0 || !(self.lr_decay_factor > 0.0) {
            return Err(MmlError::InvalidArgument(
                "decay interval must be ≥ 1 epoch with a positive factor".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.epsilon > 0.0)
        {
            return Err(MmlError::InvalidArgument(
                "moment coefficients must lie in [0, 1) with positive epsilon".into(),
            ));
        }
        self.weights.validate()
    }

    fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }
}

/// The four objective terms plus their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub l_data: f64,
    pub l_phys: f64,
    pub l_ic: f64,
    pub l_bc: f64,
    pub total: f64,
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_data: f64,
    pub l_phys: f64,
    pub l_ic: f64,
    pub l_bc: f64,
    pub total: f64,
    pub val_rel_l2: f64,
}

pub const HISTORY_HEADER: &str = "epoch,l_data,l_phys,l_ic,l_bc,total,val_rel_l2";

/// Per-epoch training record, one row per epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// Epoch index with the lowest validation error.
    pub fn best_epoch(&self) -> Option<usize> {
        self.records
            .iter()
            .min_by(|a, b| a.val_rel_l2.total_cmp(&b.val_rel_l2))
            .map(|r| r.epoch)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(HISTORY_HEADER);
        out.push('\n');
        for r in &self.records {
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.epoch, r.l_data, r.l_phys, r.l_ic, r.l_bc, r.total, r.val_rel_l2
            )
            .expect("string write");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn check_pred_shape(pred_dim: (usize, usize, usize), grid: &Grid) -> Result<()> {
    if pred_dim != (1, grid.n_t, grid.n_x) {
        return Err(MmlError::InvalidArgument(format!(
            "prediction shape {pred_dim:?} does not match the (1, {}, {}) grid",
            grid.n_t, grid.n_x
        )));
    }
    Ok(())
}

/// The composite objective on plain arrays, for logging and cross-checks.
///
/// Every norm is a mean over its own index set, so the weights are
/// resolution-independent; every term is non-negative.
pub fn composite_loss(
    pred: &Array3<f64>,
    sample: &Sample,
    pde: PdeKind,
    grid: &Grid,
    weights: &LossWeights,
) -> Result<LossParts> {
    weights.validate()?;
    check_pred_shape(pred.dim(), grid)?;
    if sample.target.dim() != pred.dim() {
        return Err(MmlError::InvalidArgument(
            "sample target does not match the prediction shape".into(),
        ));
    }
    let (n_t, n_x) = (grid.n_t, grid.n_x);

    let l_data = pred
        .iter()
        .zip(sample.target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / (n_t * n_x) as f64;

    let u = Array2::from_shape_fn((n_t, n_x), |(n, j)| pred[[0, n, j]]);
    let residual = residual_of_prediction(pde, &u, grid);
    let l_phys = residual
        .indexed_iter()
        .map(|((n, j), r)| {
            let d = r - sample.input[[0, n, j]];
            d * d
        })
        .sum::<f64>()
        / (n_t * n_x) as f64;

    let l_ic = (0..n_x)
        .map(|j| {
            let d = pred[[0, 0, j]] - sample.input[[3, 0, j]];
            d * d
        })
        .sum::<f64>()
        / n_x as f64;

    let l_bc = (0..n_t)
        .map(|n| {
            let d = pred[[0, n, 0]] - pred[[0, n, n_x - 1]];
            d * d
        })
        .sum::<f64>()
        / n_t as f64;

    let total = l_data
        + weights.lambda_phys * l_phys
        + weights.lambda_ic * l_ic
        + weights.lambda_bc * l_bc;
    Ok(LossParts {
        l_data,
        l_phys,
        l_ic,
        l_bc,
        total,
    })
}

/// Loss constants of one sample, shaped for the tape and shared so repeated
/// epochs never copy them again.
struct SampleConstants {
    input: SharedTensor,
    target: SharedTensor,
    forcing: SharedTensor,
    u0: SharedTensor,
}

impl SampleConstants {
    fn new(sample: &Sample, grid: &Grid) -> Self {
        let (n_t, n_x) = (grid.n_t, grid.n_x);
        let forcing =
            Array3::from_shape_fn((1, n_t, n_x), |(_, n, j)| sample.input[[0, n, j]]);
        let u0 = Array3::from_shape_fn((1, 1, n_x), |(_, _, j)| sample.input[[3, 0, j]]);
        Self {
            input: sample.input.clone().into_shared(),
            target: sample.target.clone().into_shared(),
            forcing: forcing.into_shared(),
            u0: u0.into_shared(),
        }
    }
}

/// The PDE residual of the prediction, recorded through differentiable
/// fd-time and spectral-x primitives so it matches `residual_of_prediction`.
fn residual_on_tape(tape: &Tape, pred: Var, pde: PdeKind, grid: &Grid) -> Result<Var> {
    let u_t = tape.fd_time(pred, grid.dt())?;
    match pde {
        PdeKind::Heat { nu } => {
            let u_xx = tape.spectral_dx(pred, 2, grid.length_x)?;
            tape.sub(u_t, tape.scale(u_xx, nu)?)
        }
        PdeKind::Advection { c } => {
            let u_x = tape.spectral_dx(pred, 1, grid.length_x)?;
            tape.add(u_t, tape.scale(u_x, c)?)
        }
        PdeKind::Burgers { nu } => {
            let u_x = tape.spectral_dx(pred, 1, grid.length_x)?;
            let u_xx = tape.spectral_dx(pred, 2, grid.length_x)?;
            let advective = tape.mul(pred, u_x)?;
            let linear = tape.sub(u_t, tape.scale(u_xx, nu)?)?;
            tape.add(linear, advective)
        }
        PdeKind::DiffusionReaction { nu } => {
            let u_xx = tape.spectral_dx(pred, 2, grid.length_x)?;
            let cubic = tape.mul(tape.square(pred)?, pred)?;
            let diffusive = tape.sub(u_t, tape.scale(u_xx, nu)?)?;
            tape.sub(tape.add(diffusive, pred)?, cubic)
        }
    }
}

/// Tape node of the total loss plus the recorded part values.
struct TapeLoss {
    total: Var,
    parts: LossParts,
}

fn composite_loss_on_tape(
    tape: &Tape,
    pred: Var,
    constants: &SampleConstants,
    pde: PdeKind,
    grid: &Grid,
    weights: &LossWeights,
) -> Result<TapeLoss> {
    let target = tape.shared(constants.target.clone());
    let diff = tape.sub(pred, target)?;
    let l_data = tape.mean(tape.square(diff)?)?;

    let forcing = tape.shared(constants.forcing.clone());
    let residual = residual_on_tape(tape, pred, pde, grid)?;
    let phys_gap = tape.sub(residual, forcing)?;
    let l_phys = tape.mean(tape.square(phys_gap)?)?;

    let u0 = tape.shared(constants.u0.clone());
    let first = tape.slice_time(pred, 0)?;
    let ic_gap = tape.sub(first, u0)?;
    let l_ic = tape.mean(tape.square(ic_gap)?)?;

    let wrap = tape.wrap_diff(pred)?;
    let l_bc = tape.mean(tape.square(wrap)?)?;

    let constraint = tape.add(
        tape.add(
            tape.scale(l_phys, weights.lambda_phys)?,
            tape.scale(l_ic, weights.lambda_ic)?,
        )?,
        tape.scale(l_bc, weights.lambda_bc)?,
    )?;
    let total = tape.add(l_data, constraint)?;

    let parts = LossParts {
        l_data: tape.scalar_value(l_data)?,
        l_phys: tape.scalar_value(l_phys)?,
        l_ic: tape.scalar_value(l_ic)?,
        l_bc: tape.scalar_value(l_bc)?,
        total: tape.scalar_value(total)?,
    };
    Ok(TapeLoss { total, parts })
}

/// Records the full objective of `params` on one sample — forward pass plus
/// composite loss — on a fresh tape. Returns the tape, the parameter
/// binding (group order matches [`FnoParams::group_offsets`]), the measured
/// loss parts, and the total-loss node, so callers can run gradient checks
/// or custom optimization loops against exactly the trained objective.
pub fn sample_objective(
    params: &FnoParams,
    sample: &Sample,
    pde: PdeKind,
    grid: &Grid,
    weights: &LossWeights,
) -> Result<(Tape, FnoBinding, LossParts, Var)> {
    weights.validate()?;
    pde.validate()?;
    if sample.input.dim() != (4, grid.n_t, grid.n_x)
        || sample.target.dim() != (1, grid.n_t, grid.n_x)
    {
        return Err(MmlError::InvalidArgument(
            "sample shape does not match the grid".into(),
        ));
    }
    let model = FnoModel::from_params(params)?;
    let constants = SampleConstants::new(sample, grid);
    let tape = Tape::new();
    let binding = model.bind(&tape);
    let input = tape.shared(constants.input.clone());
    let pred = model.forward_on_tape(&tape, &binding, input)?;
    let loss = composite_loss_on_tape(&tape, pred, &constants, pde, grid, weights)?;
    Ok((tape, binding, loss.parts, loss.total))
}

/// Mean validation relative-L2 (percent) of the current parameters.
fn validation_error(model: &FnoModel, val: &Dataset) -> Result<f64> {
    let (n_t, n_x) = (val.grid.n_t, val.grid.n_x);
    let mut sum = 0.0;
    for sample in &val.samples {
        let pred = model.predict(&sample.input)?;
        let pred2 = Array2::from_shape_fn((n_t, n_x), |(n, j)| pred[[0, n, j]]);
        let ref2 = Array2::from_shape_fn((n_t, n_x), |(n, j)| sample.target[[0, n, j]]);
        sum += relative_l2(&pred2, &ref2)?;
    }
    Ok(sum / val.samples.len() as f64)
}

/// First-order moment state of the optimizer.
struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let bias1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bias2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Minimizes the composite objective over the dataset and returns the
/// parameters with the best validation error, plus the full history.
///
/// Deterministic under fixed seeds: one ChaCha12 shuffle stream, batches in
/// shuffled order, per-sample gradients reduced in batch order.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    model_config: FnoConfig,
    cfg: &TrainConfig,
) -> Result<(FnoParams, TrainHistory)> {
    cfg.validate()?;
    if train_set.grid != val_set.grid {
        return Err(MmlError::GridMismatch {
            expected_t: train_set.grid.n_t,
            expected_x: train_set.grid.n_x,
            got_t: val_set.grid.n_t,
            got_x: val_set.grid.n_x,
        });
    }
    if train_set.pde != val_set.pde {
        return Err(MmlError::InvalidArgument(format!(
            "training PDE {} differs from validation PDE {}",
            train_set.pde.name(),
            val_set.pde.name()
        )));
    }
    if train_set.samples.is_empty() || val_set.samples.is_empty() {
        return Err(MmlError::InvalidArgument(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let grid = &train_set.grid;
    let pde = train_set.pde;
    model_config.validate_against_grid(grid)?;

    let constants: Vec<SampleConstants> = train_set
        .samples
        .iter()
        .map(|s| SampleConstants::new(s, grid))
        .collect();

    let mut params = FnoParams::init(model_config)?;
    let offsets = params.group_offsets();
    let n_params = params.data.len();
    let mut adam = AdamState::new(n_params);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut history = TrainHistory::default();
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let mut grad = vec![0.0; n_params];

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        let mut order: Vec<usize> = (0..train_set.samples.len()).collect();
        order.shuffle(&mut rng);

        let mut sums = [0.0f64; 5];
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let model = FnoModel::from_params(&params)?;
            grad.fill(0.0);
            for &i in chunk {
                let tape = Tape::new();
                let binding = model.bind(&tape);
                let input = tape.shared(constants[i].input.clone());
                let pred = model.forward_on_tape(&tape, &binding, input)?;
                let loss =
                    composite_loss_on_tape(&tape, pred, &constants[i], pde, grid, &cfg.weights)?;
                if !loss.parts.total.is_finite() {
                    return Err(MmlError::Diverged {
                        epoch,
                        batch: batch_idx,
                    });
                }
                sums[0] += loss.parts.l_data;
                sums[1] += loss.parts.l_phys;
                sums[2] += loss.parts.l_ic;
                sums[3] += loss.parts.l_bc;
                sums[4] += loss.parts.total;

                let grads = tape.backward(loss.total)?;
                for (g_idx, var) in binding.vars.iter().enumerate() {
                    if let Some(g) = grads.real(*var) {
                        let base = offsets[g_idx];
                        for (k, v) in g.iter().enumerate() {
                            grad[base + k] += v;
                        }
                    }
                }
            }
            let inv_batch = 1.0 / chunk.len() as f64;
            for g in grad.iter_mut() {
                *g *= inv_batch;
            }
            adam.update(&mut params.data, &grad, lr, cfg);
        }

        let n = train_set.samples.len() as f64;
        let model = FnoModel::from_params(&params)?;
        let val_rel_l2 = validation_error(&model, val_set)?;
        let record = EpochRecord {
            epoch,
            l_data: sums[0] / n,
            l_phys: sums[1] / n,
            l_ic: sums[2] / n,
            l_bc: sums[3] / n,
            total: sums[4] / n,
            val_rel_l2,
        };
        history.records.push(record);
        if val_rel_l2 < best_val {
            best_val = val_rel_l2;
            best_params = params.clone();
        }
        if cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch + 1 == cfg.epochs) {
            println!(
                "epoch {:>4}  total {:.4e}  data {:.4e}  phys {:.4e}  ic {:.4e}  bc {:.4e}  val {:.3}%",
                epoch, record.total, record.l_data, record.l_phys, record.l_ic, record.l_bc,
                record.val_rel_l2
            );
        }
    }
    Ok((best_params, history))
}
