use mml_core::dataset::{build_dataset, build_dataset_range};
use mml_core::eval::{run_benchmark, BenchmarkCase};
use mml_core::fno::{Checkpoint, FnoConfig};
use mml_core::grid::Grid;
use mml_core::manufactured::ManufacturedSpec;
use mml_core::pde::{DerivativeMode, PdeKind};
use mml_core::solvers::IntegratorConfig;
use mml_core::train::{train, LossWeights, TrainConfig};
use std::time::Instant;

fn desk_probe(pde: PdeKind) {
    let grid = Grid::unit(64, 64).unwrap();
    let spec = ManufacturedSpec {
        amp_x_range: (0.2, 1.0),
        ..ManufacturedSpec::with_defaults(11)
    };
    let train_set = build_dataset(&spec, pde, &grid, 256, DerivativeMode::Discrete).unwrap();
    let val_set =
        build_dataset_range(&spec, pde, &grid, 256, 16, DerivativeMode::Discrete).unwrap();
    let model = FnoConfig {
        n_layers: 4,
        width: 32,
        modes_t: 16,
        modes_x: 16,
        lift_hidden: 64,
        init_seed: 29,
    };
    let cfg = TrainConfig {
        epochs: 150,
        batch_size: 8,
        weights: LossWeights {
            lambda_phys: 0.1,
            lambda_ic: 1.0,
            lambda_bc: 0.01,
        },
        log_every: 10,
        ..TrainConfig::paper_defaults(3)
    };
    let t1 = Instant::now();
    let (params, hist) = train(&train_set, &val_set, model, &cfg).unwrap();
    println!(
        "[{}] 150 epochs: {:.0}s, best epoch {:?}, final val {:.3}%",
        pde.name(),
        t1.elapsed().as_secs_f64(),
        hist.best_epoch(),
        hist.records.last().unwrap().val_rel_l2
    );
    let ckpt = Checkpoint {
        params,
        pde,
        grid,
        norm: None,
    };
    for case in BenchmarkCase::suite(pde) {
        match run_benchmark(&ckpt, case, &IntegratorConfig::default()) {
            Ok(r) => println!(
                "[{}] ic {}: rel_l2 {:.4}%  slices t0 {:.3}% t05 {:.3}% t1 {:.3}%  max_abs {:.4}",
                pde.name(),
                case.ic_id.label(),
                r.rel_l2_pct,
                r.slice_pct[0],
                r.slice_pct[1],
                r.slice_pct[2],
                r.max_abs_err
            ),
            Err(e) => println!("[{}] ic {}: {e}", pde.name(), case.ic_id.label()),
        }
    }
}

#[test]
fn probe_desk_heat() {
    desk_probe(PdeKind::heat_default());
}

#[test]
fn probe_desk_advection() {
    desk_probe(PdeKind::advection_default());
}

#[test]
fn probe_desk_burgers() {
    desk_probe(PdeKind::burgers_default());
}

#[test]
fn probe_desk_diffusion_reaction() {
    desk_probe(PdeKind::diffusion_reaction_default());
}
