//! Subcommand bodies. Each is a thin shim: read inputs, call one library
//! operation, write its outputs. Nothing numerical happens here.

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use mml_core::dataset::{build_dataset, build_dataset_range, read_dataset, write_dataset};
use mml_core::eval::{report_csv, run_benchmark, zero_forcing_infer, BenchmarkCase, IcId};
use mml_core::fno::{read_checkpoint, write_checkpoint, Checkpoint};
use mml_core::solvers::{reference_solution, IntegratorConfig};
use mml_core::MmlError;
use ndarray::Array2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.into(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::File {
        path: path.into(),
        source,
    })
}

/// `<out>.effective.cfg`, the resolved-config echo written next to each
/// generated artifact.
fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".effective.cfg");
    PathBuf::from(name)
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn check_pde_name(checkpoint: &Checkpoint, pde_name: &str) -> Result<()> {
    if checkpoint.pde.name() != pde_name {
        return Err(CliError::Usage(format!(
            "checkpoint was trained on '{}', --pde asks for '{}'",
            checkpoint.pde.name(),
            pde_name
        )));
    }
    Ok(())
}

/// `generate`: synthesize the training set at sample indices
/// `0..n_samples` and, when requested, the validation set at the following
/// `n_val_samples` indices, so the two never share a sample.
pub fn generate(
    config: &Path,
    out: &Path,
    val_out: Option<&Path>,
    n_samples: Option<usize>,
) -> Result<()> {
    let mut cfg = RunConfig::parse(&read_text(config)?)?;
    if let Some(n) = n_samples {
        if n == 0 {
            return Err(CliError::Usage("--n-samples must be at least 1".into()));
        }
        cfg.n_samples = n;
    }
    let train_set = build_dataset(&cfg.spec, cfg.pde, &cfg.grid, cfg.n_samples, cfg.derivative_mode)?;
    write_dataset(&train_set, out)?;
    write_bytes(&sidecar_path(out), cfg.effective_text().as_bytes())?;
    println!(
        "wrote {} {} training samples to {}",
        cfg.n_samples,
        cfg.pde.name(),
        out.display()
    );
    if let Some(val_path) = val_out {
        let val_set = build_dataset_range(
            &cfg.spec,
            cfg.pde,
            &cfg.grid,
            cfg.n_samples as u64,
            cfg.n_val_samples,
            cfg.derivative_mode,
        )?;
        write_dataset(&val_set, val_path)?;
        println!(
            "wrote {} validation samples (indices {}..{}) to {}",
            cfg.n_val_samples,
            cfg.n_samples,
            cfg.n_samples + cfg.n_val_samples,
            val_path.display()
        );
    }
    Ok(())
}

/// `train`: fit the operator on a generated dataset pair and save the
/// best-validation checkpoint plus the per-epoch history CSV.
pub fn train(
    config: &Path,
    data: &Path,
    val: &Path,
    out: &Path,
    history: &Path,
    resume: Option<&Path>,
) -> Result<()> {
    if resume.is_some() {
        return Err(CliError::Usage(
            "resuming from a checkpoint is not supported; \
             training always starts from the seeded initialization"
                .into(),
        ));
    }
    let cfg = RunConfig::parse(&read_text(config)?)?;
    let train_set = read_dataset(data)?;
    let val_set = read_dataset(val)?;
    if train_set.grid != cfg.grid {
        return Err(CliError::Usage(format!(
            "dataset grid is {}x{} (time x space) but the config says {}x{}",
            train_set.grid.n_t, train_set.grid.n_x, cfg.grid.n_t, cfg.grid.n_x
        )));
    }
    if train_set.pde != cfg.pde {
        return Err(CliError::Usage(format!(
            "dataset holds {} data but the config says {}",
            train_set.pde.name(),
            cfg.pde.name()
        )));
    }
    let (params, hist) = mml_core::train::train(&train_set, &val_set, cfg.fno, &cfg.train)?;
    let checkpoint = Checkpoint {
        params,
        pde: train_set.pde,
        grid: train_set.grid.clone(),
        norm: None,
    };
    write_checkpoint(&checkpoint, out)?;
    hist.write_csv(history)?;
    write_bytes(&sidecar_path(out), cfg.effective_text().as_bytes())?;
    match hist.best_epoch() {
        Some(epoch) => println!(
            "saved best-validation parameters (epoch {epoch}) to {}",
            out.display()
        ),
        None => println!("saved parameters to {}", out.display()),
    }
    Ok(())
}

/// `eval`: run the three canonical starts and write the report CSV. This is
/// reporting, not gating: large errors still exit 0. A start whose
/// reference trajectory escapes to infinity within the horizon has no
/// meaningful error row; it is noted on stderr and omitted.
pub fn eval(checkpoint: &Path, pde_name: &str, out: &Path) -> Result<()> {
    let ckpt = read_checkpoint(checkpoint)?;
    check_pde_name(&ckpt, pde_name)?;
    let integrator = IntegratorConfig::default();
    let mut reports = Vec::new();
    for case in BenchmarkCase::suite(ckpt.pde) {
        match run_benchmark(&ckpt, case, &integrator) {
            Ok(report) => reports.push(report),
            Err(MmlError::BlowUp { step }) => eprintln!(
                "note: the {}-mode {} reference escapes to infinity (substep {step}); row omitted",
                case.ic_id.label(),
                ckpt.pde.name(),
            ),
            Err(e) => return Err(e.into()),
        }
    }
    write_bytes(out, report_csv(&reports).as_bytes())?;
    println!("wrote {} benchmark rows to {}", reports.len(), out.display());
    Ok(())
}

/// `plot`: dump one benchmark case as time-slice CSVs (t = 0, 0.5, 1.0),
/// full-field CSVs, and grayscale heatmaps for prediction, reference, and
/// absolute error.
pub fn plot(checkpoint: &Path, pde_name: &str, ic: &str, out_prefix: &Path) -> Result<()> {
    let ckpt = read_checkpoint(checkpoint)?;
    check_pde_name(&ckpt, pde_name)?;
    let ic_id = IcId::from_label(ic)?;
    let case = BenchmarkCase {
        pde: ckpt.pde,
        ic_id,
    };
    let grid = ckpt.grid.clone();
    let u0 = case.initial_condition(&grid);
    let pred = zero_forcing_infer(&ckpt, &u0, &grid)?;
    let reference = reference_solution(ckpt.pde, &u0, &grid, &IntegratorConfig::default())?;
    let abs_error = Array2::from_shape_fn(pred.dim(), |(n, j)| {
        (pred[[n, j]] - reference[[n, j]]).abs()
    });

    for (tag, frac) in [("t0", 0.0), ("t05", 0.5), ("t1", 1.0)] {
        let n = grid.time_index(frac * grid.horizon_t);
        let mut csv = String::from("x,prediction,reference\n");
        for j in 0..grid.n_x {
            writeln!(
                csv,
                "{:.12e},{:.12e},{:.12e}",
                grid.x(j),
                pred[[n, j]],
                reference[[n, j]]
            )
            .expect("string write");
        }
        write_bytes(&suffixed(out_prefix, &format!("_slice_{tag}.csv")), csv.as_bytes())?;
    }
    for (tag, field) in [
        ("prediction", &pred),
        ("reference", &reference),
        ("abs_error", &abs_error),
    ] {
        write_bytes(
            &suffixed(out_prefix, &format!("_{tag}.csv")),
            field_csv(field).as_bytes(),
        )?;
        write_bytes(&suffixed(out_prefix, &format!("_{tag}.pgm")), &pgm_bytes(field))?;
    }
    println!(
        "wrote slice, field, and heatmap files with prefix {}",
        out_prefix.display()
    );
    Ok(())
}

/// Field as plain CSV, one line per time level (line 0 is t = 0).
fn field_csv(field: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in field.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Binary 8-bit grayscale pixmap (`P5`), min–max normalized, width `n_x`,
/// height `n_t`, row 0 = t = 0. A constant field renders as black.
fn pgm_bytes(field: &Array2<f64>) -> Vec<u8> {
    let (n_t, n_x) = field.dim();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in field {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let mut bytes = format!("P5\n{n_x} {n_t}\n255\n").into_bytes();
    for &v in field {
        let gray = if span > 0.0 {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0)
        } else {
            0.0
        };
        bytes.push(gray as u8);
    }
    bytes
}
