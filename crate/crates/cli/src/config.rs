//! Flat `key = value` run configuration.
//!
//! One file drives every subcommand: the equation, the grid, the
//! manufactured family, the model, the optimizer, and the reference
//! integrator. The format is UTF-8 text, one assignment per line, `#`
//! starting a comment. Unknown keys are rejected with their line number,
//! every key has a default, and [`RunConfig::effective_text`] renders the
//! fully resolved configuration back out — written as a sidecar next to
//! generated artifacts so a run is reproducible from its outputs alone.

use crate::error::{CliError, Result};
use mml_core::fno::FnoConfig;
use mml_core::grid::Grid;
use mml_core::manufactured::ManufacturedSpec;
use mml_core::pde::{DerivativeMode, PdeKind};
use mml_core::solvers::IntegratorConfig;
use mml_core::train::{LossWeights, TrainConfig};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::str::FromStr;

/// Everything a run needs, fully resolved and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pde: PdeKind,
    pub grid: Grid,
    pub spec: ManufacturedSpec,
    pub derivative_mode: DerivativeMode,
    /// Training samples occupy indices `0..n_samples`.
    pub n_samples: usize,
    /// Validation samples follow at `n_samples..n_samples + n_val_samples`.
    pub n_val_samples: usize,
    pub fno: FnoConfig,
    pub train: TrainConfig,
    pub integrator: IntegratorConfig,
}

/// Key values as written, seeded with every default so omitted keys simply
/// stay at theirs. Resolution into library types happens at the end, once
/// every line has been applied (so `pde_param` may precede `pde`).
struct Raw {
    pde_name: String,
    /// `None` → the canonical benchmark parameter for the chosen equation.
    pde_param: Option<f64>,
    n_x: usize,
    n_t: usize,
    length_x: f64,
    horizon_t: f64,
    k_x_terms: usize,
    k_t_terms: usize,
    k_max: u32,
    omega_max: f64,
    amp_x_min: f64,
    amp_x_max: f64,
    amp_t_min: f64,
    amp_t_max: f64,
    base_seed: u64,
    derivative_mode: String,
    n_samples: usize,
    n_val_samples: usize,
    n_layers: usize,
    width: usize,
    modes_t: usize,
    modes_x: usize,
    lift_hidden: usize,
    init_seed: u64,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    lr_decay_factor: f64,
    lr_decay_every: usize,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    train_seed: u64,
    lambda_phys: f64,
    lambda_ic: f64,
    lambda_bc: f64,
    log_every: usize,
    substeps_per_output: usize,
    dealias: bool,
}

impl Default for Raw {
    fn default() -> Self {
        let spec = ManufacturedSpec::with_defaults(17);
        let fno = FnoConfig::paper_defaults(29);
        let train = TrainConfig::paper_defaults(3);
        let integrator = IntegratorConfig::default();
        Self {
            pde_name: "heat".into(),
            pde_param: None,
            n_x: 128,
            n_t: 128,
            length_x: TAU,
            horizon_t: 1.0,
            k_x_terms: spec.k_x_terms,
            k_t_terms: spec.k_t_terms,
            k_max: spec.k_max,
            omega_max: spec.omega_max,
            amp_x_min: spec.amp_x_range.0,
            amp_x_max: spec.amp_x_range.1,
            amp_t_min: spec.amp_t_range.0,
            amp_t_max: spec.amp_t_range.1,
            base_seed: spec.base_seed,
            derivative_mode: "discrete".into(),
            n_samples: 1024,
            n_val_samples: 32,
            n_layers: fno.n_layers,
            width: fno.width,
            modes_t: fno.modes_t,
            modes_x: fno.modes_x,
            lift_hidden: fno.lift_hidden,
            init_seed: fno.init_seed,
            epochs: train.epochs,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            lr_decay_factor: train.lr_decay_factor,
            lr_decay_every: train.lr_decay_every,
            beta1: train.beta1,
            beta2: train.beta2,
            epsilon: train.epsilon,
            train_seed: train.seed,
            lambda_phys: train.weights.lambda_phys,
            lambda_ic: train.weights.lambda_ic,
            lambda_bc: train.weights.lambda_bc,
            log_every: train.log_every,
            substeps_per_output: integrator.substeps_per_output,
            dealias: integrator.dealias,
        }
    }
}

impl Raw {
    fn resolve(self, pde_line: usize) -> Result<RunConfig> {
        let pde = match self.pde_name.as_str() {
            "heat" => PdeKind::Heat {
                nu: self.pde_param.unwrap_or(0.2),
            },
            "advection" => PdeKind::Advection {
                c: self.pde_param.unwrap_or(0.5),
            },
            "burgers" => PdeKind::Burgers {
                nu: self.pde_param.unwrap_or(0.05),
            },
            "diffusion_reaction" => PdeKind::DiffusionReaction {
                nu: self.pde_param.unwrap_or(0.05),
            },
            other => {
                return Err(CliError::Config {
                    line: pde_line,
                    message: format!(
                        "invalid value for 'pde': '{other}' \
                         (expected heat|advection|burgers|diffusion_reaction)"
                    ),
                })
            }
        };
        pde.validate()?;
        let grid = Grid::new(self.n_x, self.n_t, self.length_x, self.horizon_t)?;
        let spec = ManufacturedSpec {
            k_x_terms: self.k_x_terms,
            k_t_terms: self.k_t_terms,
            k_max: self.k_max,
            omega_max: self.omega_max,
            amp_x_range: (self.amp_x_min, self.amp_x_max),
            amp_t_range: (self.amp_t_min, self.amp_t_max),
            base_seed: self.base_seed,
        };
        spec.validate()?;
        let derivative_mode = match self.derivative_mode.as_str() {
            "analytic" => DerivativeMode::Analytic,
            _ => DerivativeMode::Discrete,
        };
        if self.n_samples == 0 || self.n_val_samples == 0 {
            return Err(CliError::Config {
                line: 0,
                message: "n_samples and n_val_samples must be at least 1".into(),
            });
        }
        let fno = FnoConfig {
            n_layers: self.n_layers,
            width: self.width,
            modes_t: self.modes_t,
            modes_x: self.modes_x,
            lift_hidden: self.lift_hidden,
            init_seed: self.init_seed,
        };
        fno.validate()?;
        let train = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            lr_decay_factor: self.lr_decay_factor,
            lr_decay_every: self.lr_decay_every,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed: self.train_seed,
            weights: LossWeights {
                lambda_phys: self.lambda_phys,
                lambda_ic: self.lambda_ic,
                lambda_bc: self.lambda_bc,
            },
            log_every: self.log_every,
        };
        train.validate()?;
        let integrator = IntegratorConfig {
            substeps_per_output: self.substeps_per_output,
            dealias: self.dealias,
        };
        integrator.validate()?;
        Ok(RunConfig {
            pde,
            grid,
            spec,
            derivative_mode,
            n_samples: self.n_samples,
            n_val_samples: self.n_val_samples,
            fno,
            train,
            integrator,
        })
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| CliError::Config {
        line,
        message: format!("invalid value for '{key}': '{value}'"),
    })
}

impl Default for RunConfig {
    fn default() -> Self {
        Raw::default().resolve(0).expect("defaults are valid")
    }
}

impl RunConfig {
    /// Parses the flat format. Omitted keys take their documented defaults;
    /// unknown keys and malformed values fail with the 1-based line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Raw::default();
        let mut pde_line = 0;
        for (idx, full_line) in text.lines().enumerate() {
            let line = idx + 1;
            let stmt = full_line.split('#').next().unwrap_or("").trim();
            if stmt.is_empty() {
                continue;
            }
            let Some((key, value)) = stmt.split_once('=') else {
                return Err(CliError::Config {
                    line,
                    message: format!("expected `key = value`, got '{stmt}'"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(CliError::Config {
                    line,
                    message: format!("empty value for '{key}'"),
                });
            }
            match key {
                "pde" => {
                    raw.pde_name = value.to_string();
                    pde_line = line;
                }
                "pde_param" => raw.pde_param = Some(parse_value(key, value, line)?),
                "n_x" => raw.n_x = parse_value(key, value, line)?,
                "n_t" => raw.n_t = parse_value(key, value, line)?,
                "length_x" => raw.length_x = parse_value(key, value, line)?,
                "horizon_t" => raw.horizon_t = parse_value(key, value, line)?,
                "k_x_terms" => raw.k_x_terms = parse_value(key, value, line)?,
                "k_t_terms" => raw.k_t_terms = parse_value(key, value, line)?,
                "k_max" => raw.k_max = parse_value(key, value, line)?,
                "omega_max" => raw.omega_max = parse_value(key, value, line)?,
                "amp_x_min" => raw.amp_x_min = parse_value(key, value, line)?,
                "amp_x_max" => raw.amp_x_max = parse_value(key, value, line)?,
                "amp_t_min" => raw.amp_t_min = parse_value(key, value, line)?,
                "amp_t_max" => raw.amp_t_max = parse_value(key, value, line)?,
                "base_seed" => raw.base_seed = parse_value(key, value, line)?,
                "derivative_mode" => {
                    if value != "discrete" && value != "analytic" {
                        return Err(CliError::Config {
                            line,
                            message: format!(
                                "invalid value for 'derivative_mode': '{value}' \
                                 (expected discrete|analytic)"
                            ),
                        });
                    }
                    raw.derivative_mode = value.to_string();
                }
                "n_samples" => raw.n_samples = parse_value(key, value, line)?,
                "n_val_samples" => raw.n_val_samples = parse_value(key, value, line)?,
                "n_layers" => raw.n_layers = parse_value(key, value, line)?,
                "width" => raw.width = parse_value(key, value, line)?,
                "modes_t" => raw.modes_t = parse_value(key, value, line)?,
                "modes_x" => raw.modes_x = parse_value(key, value, line)?,
                "lift_hidden" => raw.lift_hidden = parse_value(key, value, line)?,
                "init_seed" => raw.init_seed = parse_value(key, value, line)?,
                "epochs" => raw.epochs = parse_value(key, value, line)?,
                "batch_size" => raw.batch_size = parse_value(key, value, line)?,
                "learning_rate" => raw.learning_rate = parse_value(key, value, line)?,
                "lr_decay_factor" => raw.lr_decay_factor = parse_value(key, value, line)?,
                "lr_decay_every" => raw.lr_decay_every = parse_value(key, value, line)?,
                "beta1" => raw.beta1 = parse_value(key, value, line)?,
                "beta2" => raw.beta2 = parse_value(key, value, line)?,
                "epsilon" => raw.epsilon = parse_value(key, value, line)?,
                "train_seed" => raw.train_seed = parse_value(key, value, line)?,
                "lambda_phys" => raw.lambda_phys = parse_value(key, value, line)?,
                "lambda_ic" => raw.lambda_ic = parse_value(key, value, line)?,
                "lambda_bc" => raw.lambda_bc = parse_value(key, value, line)?,
                "log_every" => raw.log_every = parse_value(key, value, line)?,
                "substeps_per_output" => raw.substeps_per_output = parse_value(key, value, line)?,
                "dealias" => raw.dealias = parse_value(key, value, line)?,
                other => {
                    return Err(CliError::Config {
                        line,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        raw.resolve(pde_line)
    }

    /// Renders every key with its resolved value. Reparsing the result gives
    /// an equal config, so the sidecar alone reproduces a run.
    pub fn effective_text(&self) -> String {
        let mode = match self.derivative_mode {
            DerivativeMode::Discrete => "discrete",
            DerivativeMode::Analytic => "analytic",
        };
        let mut s = String::from("# effective run configuration (all keys resolved)\n");
        let mut kv = |key: &str, value: String| {
            writeln!(s, "{key} = {value}").expect("string write");
        };
        kv("pde", self.pde.name().into());
        kv("pde_param", self.pde.param().to_string());
        kv("n_x", self.grid.n_x.to_string());
        kv("n_t", self.grid.n_t.to_string());
        kv("length_x", self.grid.length_x.to_string());
        kv("horizon_t", self.grid.horizon_t.to_string());
        kv("k_x_terms", self.spec.k_x_terms.to_string());
        kv("k_t_terms", self.spec.k_t_terms.to_string());
        kv("k_max", self.spec.k_max.to_string());
        kv("omega_max", self.spec.omega_max.to_string());
        kv("amp_x_min", self.spec.amp_x_range.0.to_string());
        kv("amp_x_max", self.spec.amp_x_range.1.to_string());
        kv("amp_t_min", self.spec.amp_t_range.0.to_string());
        kv("amp_t_max", self.spec.amp_t_range.1.to_string());
        kv("base_seed", self.spec.base_seed.to_string());
        kv("derivative_mode", mode.into());
        kv("n_samples", self.n_samples.to_string());
        kv("n_val_samples", self.n_val_samples.to_string());
        kv("n_layers", self.fno.n_layers.to_string());
        kv("width", self.fno.width.to_string());
        kv("modes_t", self.fno.modes_t.to_string());
        kv("modes_x", self.fno.modes_x.to_string());
        kv("lift_hidden", self.fno.lift_hidden.to_string());
        kv("init_seed", self.fno.init_seed.to_string());
        kv("epochs", self.train.epochs.to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv("learning_rate", self.train.learning_rate.to_string());
        kv("lr_decay_factor", self.train.lr_decay_factor.to_string());
        kv("lr_decay_every", self.train.lr_decay_every.to_string());
        kv("beta1", self.train.beta1.to_string());
        kv("beta2", self.train.beta2.to_string());
        kv("epsilon", self.train.epsilon.to_string());
        kv("train_seed", self.train.seed.to_string());
        kv("lambda_phys", self.train.weights.lambda_phys.to_string());
        kv("lambda_ic", self.train.weights.lambda_ic.to_string());
        kv("lambda_bc", self.train.weights.lambda_bc.to_string());
        kv("log_every", self.train.log_every.to_string());
        kv("substeps_per_output", self.integrator.substeps_per_output.to_string());
        kv("dealias", self.integrator.dealias.to_string());
        s
    }
}
