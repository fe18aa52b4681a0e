//! Executes a validated config.

use std::time::Instant;

use boa_core::effective::EffectiveOptions;
use boa_core::f64::Grid;
use boa_core::model::BandSelector;
use boa_core::propagate::DtPolicy;
use boa_core::superadiabatic::measurements;

use crate::config::{ExperimentConfig, Study};
use crate::ensemble::generate;
use crate::error::Result;
use crate::experiments::{conical_correction_study, defects, error_curves, Curve, CurveSetup};
use crate::report::{ScalingReport, Series, Status};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "BOA_LAB_THREADS";

/// Worker count from `BOA_LAB_THREADS` (unset or invalid: all cores).
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_VAR).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|n| *n > 0)
}

/// Runs `f` on a pool honouring [`THREADS_VAR`].
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        b = b.num_threads(n);
    }
    match b.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub fn policy(cfg: &ExperimentConfig) -> DtPolicy {
    DtPolicy {
        dt: cfg.time.dt,
        tolerance: cfg.tolerances.propagation,
        max_refinements: cfg.tolerances.max_dt_refinements,
        krylov_dim: cfg.tolerances.krylov_dim,
        samples: cfg.time.samples,
    }
}

fn options(cfg: &ExperimentConfig) -> EffectiveOptions {
    EffectiveOptions { gap_threshold: cfg.tolerances.gap_threshold, ..Default::default() }
}

fn per_state(curve: &Curve, n: usize, pick: impl Fn(&crate::experiments::Cell) -> f64) -> Vec<Vec<f64>> {
    curve
        .eps
        .iter()
        .map(|e| {
            let mut row = vec![0.0; n];
            for c in curve.cells.iter().filter(|c| c.eps == *e) {
                row[c.state] = pick(c);
            }
            row
        })
        .collect()
}

/// Runs the study described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let start = Instant::now();
    let model = cfg.model.build::<f64>()?;
    let grid: Grid = cfg.grid.build()?;
    let bands = BandSelector::new(cfg.bands.clone())?;
    let tol = &cfg.tolerances;
    let mut report = ScalingReport {
        config: cfg.clone(),
        status: Status::Ok,
        reasons: Vec::new(),
        series: Vec::new(),
        diagnostics: Vec::new(),
        conical: None,
        max_norm_drift: 0.0,
        max_energy_drift: 0.0,
        wall_clock_seconds: 0.0,
    };
    match &cfg.study {
        Study::ErrorCurve { orders, refine } => {
            let spec = cfg.ensemble.as_ref().expect("validated");
            let ensemble = generate(spec, bands.len());
            let run_on = |g: &Grid| {
                error_curves(&CurveSetup {
                    model: model.as_ref(),
                    grid: g,
                    bands: &bands,
                    orders,
                    eps: &cfg.epsilons,
                    ensemble: &ensemble,
                    kinetic_bound: spec.kinetic_bound,
                    final_time: cfg.time.final_time,
                    policy: policy(cfg),
                    options: options(cfg),
                })
            };
            let curves = run_on(&grid)?;
            let refined = if *refine { Some((cfg.grid.refined(), run_on(&cfg.grid.refined().build()?)?)) } else { None };
            for (k, c) in curves.iter().enumerate() {
                for cell in &c.cells {
                    report.max_norm_drift = report.max_norm_drift.max(cell.norm_drift);
                    report.max_energy_drift = report.max_energy_drift.max(cell.energy_drift);
                }
                let mut err = Series::new(format!("error/order{}", c.order), c.eps.clone(), per_state(c, spec.n, |x| x.error), c.sup_error.clone(), tol.min_r_squared);
                let mut den = Series::new(
                    format!("density_gap/order{}", c.order),
                    c.eps.clone(),
                    per_state(c, spec.n, |x| x.density_gap),
                    c.sup_density_gap.clone(),
                    tol.min_r_squared,
                );
                if let Some((g, rc)) = &refined {
                    err.refine(g.clone(), rc[k].sup_error.clone(), tol.min_r_squared, tol.refinement);
                    den.refine(g.clone(), rc[k].sup_density_gap.clone(), tol.min_r_squared, tol.refinement);
                }
                report.series.push(err);
                report.diagnostics.push(den);
            }
        }
        Study::Defects { refine } => {
            let spec = cfg.ensemble.as_ref().expect("validated");
            let ensemble = generate(spec, model.dim_electronic());
            let band = bands.indices()[0];
            let samples = defects(model.as_ref(), &grid, band, &cfg.epsilons, &ensemble, spec.kinetic_bound)?;
            let refined = if *refine {
                Some((cfg.grid.refined(), defects(model.as_ref(), &cfg.grid.refined().build()?, band, &cfg.epsilons, &ensemble, spec.kinetic_bound)?))
            } else {
                None
            };
            let ms = measurements(&samples, spec.n, spec.kinetic_bound, Some(spec.seed));
            let rms = refined.as_ref().map(|(_, s)| measurements(s, spec.n, spec.kinetic_bound, Some(spec.seed)));
            for (k, m) in ms.iter().enumerate() {
                let mut s = Series::new(m.name.clone(), m.eps.clone(), Vec::new(), m.defects.clone(), tol.min_r_squared);
                if let (Some((g, _)), Some(r)) = (&refined, &rms) {
                    s.refine(g.clone(), r[k].defects.clone(), tol.min_r_squared, tol.refinement);
                }
                if m.name == "p0_commutator" {
                    report.diagnostics.push(s);
                } else {
                    report.series.push(s);
                }
            }
        }
        Study::ConicalCorrection(spec) => {
            let c = match cfg.model {
                boa_core::model::ModelSpec::Conical { c } => c,
                _ => unreachable!("validated"),
            };
            let eps = cfg.epsilons[0];
            let cmp = conical_correction_study(c, eps, &grid, spec, cfg.time.final_time, cfg.time.samples, &policy(cfg))?;
            for b in [&cmp.upper, &cmp.lower] {
                for t in [&b.order1, &b.phi_only, &b.order2] {
                    report.max_norm_drift = report.max_norm_drift.max(t.norm_drift);
                    report.max_energy_drift = report.max_energy_drift.max(t.energy_drift);
                }
            }
            report.conical = Some(cmp);
        }
    }
    report.finalize();
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// 0 ok, 2 inconclusive.
pub fn exit_code(report: &ScalingReport) -> i32 {
    match report.status {
        Status::Ok => 0,
        Status::Inconclusive => 2,
    }
}
