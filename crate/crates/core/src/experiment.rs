//! Multi-path orchestration and statistics: moment validation against the
//! analytic oracles, martingale diagnostics, and the scaling-limit (strong
//! law) experiments with survival conditioning.
//!
//! Paths are embarrassingly parallel; every path owns the stream keyed
//! (seed, path index), so results are independent of the worker count and
//! collected in path order for bit-stable reports.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::particle::{
    mass_only_eligible, simulate_mass_path, simulate_path, SimConfig, TrajectoryRecord,
};
use crate::quad::QuadCtx;
use crate::semigroup;
use crate::spectral::SpectralData;
use crate::stats;
use crate::testfn::TestFunction;

pub use crate::particle::TrajectoryRecord as Record;

/// Simulate `n_paths` independent trajectories, optionally on a dedicated
/// worker pool. Records are returned in path order. A capacity-truncated
/// path aborts the ensemble with the offending information.
pub fn run_paths(
    model: &ModelSpec,
    cfg: &SimConfig,
    observables: &[TestFunction],
    sd: Option<&SpectralData>,
    n_paths: usize,
    workers: Option<usize>,
) -> Result<Vec<TrajectoryRecord>> {
    cfg.validate_for(model)?;
    let fast = mass_only_eligible(model, observables, sd);
    let simulate = |i: usize| -> Result<TrajectoryRecord> {
        if fast {
            simulate_mass_path(model, cfg, observables, sd, i as u64)
        } else {
            simulate_path(model, cfg, observables, sd, i as u64)
        }
    };
    let run = || -> Result<Vec<TrajectoryRecord>> {
        (0..n_paths).into_par_iter().map(simulate).collect()
    };
    let records = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }?;
    for r in &records {
        if let Some((time_reached, count)) = r.truncated {
            return Err(Error::Capacity {
                time_reached,
                count,
                cap: cfg.max_particles,
            });
        }
    }
    Ok(records)
}

/// One validated cell of the moment table.
#[derive(Clone, Debug)]
pub struct MomentRow {
    pub f_name: String,
    pub t: f64,
    /// "mean" or "variance".
    pub quantity: &'static str,
    pub empirical: f64,
    pub oracle: f64,
    pub z: f64,
}

#[derive(Clone, Debug)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
    pub n_paths: usize,
}

impl MomentTable {
    /// Fraction of cells with |z| ≤ 3.
    pub fn pass_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            return 1.0;
        }
        let ok = self.rows.iter().filter(|r| r.z.abs() <= 3.0).count();
        ok as f64 / self.rows.len() as f64
    }

    pub fn passed(&self) -> bool {
        self.pass_fraction() >= 0.95
    }
}

/// Empirical mean and variance of every ⟨f, X_t⟩ against the mean
/// semigroup and the second-moment formula, as z-scores.
pub fn run_moment_validation(
    model: &ModelSpec,
    cfg: &SimConfig,
    f_list: &[TestFunction],
    sd: Option<&SpectralData>,
    n_paths: usize,
    ctx: &QuadCtx,
    workers: Option<usize>,
) -> Result<MomentTable> {
    let records = run_paths(model, cfg, f_list, sd, n_paths, workers)?;
    moment_table_from_records(model, cfg, f_list, &records, ctx)
}

/// Moment table for an already-simulated ensemble (shared-record runs).
pub fn moment_table_from_records(
    model: &ModelSpec,
    cfg: &SimConfig,
    f_list: &[TestFunction],
    records: &[TrajectoryRecord],
    ctx: &QuadCtx,
) -> Result<MomentTable> {
    let n_paths = records.len();
    let x0 = &model.initial.atoms;
    let mut rows = Vec::new();
    for (j, f) in f_list.iter().enumerate() {
        for (k, &t) in cfg.observation_times.iter().enumerate() {
            let values: Vec<f64> = records.iter().map(|r| r.observable_values[j][k]).collect();
            // oracle moments for a finite atomic initial measure: means add;
            // variances add over atoms (branching is independent per atom)
            let mut mean_oracle = 0.0;
            let mut var_oracle = 0.0;
            for (x, m) in x0 {
                let per_unit = semigroup::mean_semigroup(model, t, f, x, ctx)?;
                mean_oracle += m * per_unit;
                var_oracle += m * semigroup::variance_oracle(model, t, f, x, ctx)?;
            }
            let emp_mean = stats::mean(&values);
            let se = stats::standard_error(&values);
            let z_mean = if se > 0.0 {
                (emp_mean - mean_oracle) / se
            } else if (emp_mean - mean_oracle).abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            rows.push(MomentRow {
                f_name: f.name.clone(),
                t,
                quantity: "mean",
                empirical: emp_mean,
                oracle: mean_oracle,
                z: z_mean,
            });
            let emp_var = stats::sample_variance(&values);
            let var_se = stats::variance_standard_error(&values);
            let z_var = if var_se > 0.0 {
                (emp_var - var_oracle) / var_se
            } else if (emp_var - var_oracle).abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            rows.push(MomentRow {
                f_name: f.name.clone(),
                t,
                quantity: "variance",
                empirical: emp_var,
                oracle: var_oracle,
                z: z_var,
            });
        }
    }
    Ok(MomentTable { rows, n_paths })
}

#[derive(Clone, Debug)]
pub struct MartingaleRow {
    pub t: f64,
    pub mean_w: f64,
    pub se_w: f64,
    pub z: f64,
}

/// Martingale diagnostics: E W_t constant, E W_T² against the variance
/// oracle, and the survival fraction against the extinction probability.
#[derive(Clone, Debug)]
pub struct MartingaleReport {
    pub rows: Vec<MartingaleRow>,
    pub w0: f64,
    pub w2_final_empirical: f64,
    pub w2_final_se: f64,
    pub w2_final_oracle: f64,
    pub w2_z: f64,
    pub survival_fraction: f64,
    pub survival_se: f64,
    pub survival_target: f64,
    pub survival_z: f64,
    pub n_paths: usize,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.z.abs() <= 3.0)
            && self.w2_z.abs() <= 3.0
            && self.survival_z.abs() <= 3.0
    }
}

pub fn run_martingale_test(
    model: &ModelSpec,
    cfg: &SimConfig,
    sd: &SpectralData,
    n_paths: usize,
    ctx: &QuadCtx,
    workers: Option<usize>,
) -> Result<MartingaleReport> {
    let records = run_paths(model, cfg, &[], Some(sd), n_paths, workers)?;
    martingale_report_from_records(model, cfg, sd, &records, ctx)
}

/// Martingale diagnostics for an already-simulated ensemble.
pub fn martingale_report_from_records(
    model: &ModelSpec,
    cfg: &SimConfig,
    sd: &SpectralData,
    records: &[TrajectoryRecord],
    ctx: &QuadCtx,
) -> Result<MartingaleReport> {
    let n_paths = records.len();
    let w0: f64 = model
        .initial
        .atoms
        .iter()
        .map(|(x, m)| m * sd.phi0.eval(x))
        .sum();
    let mut rows = Vec::new();
    for (k, &t) in cfg.observation_times.iter().enumerate() {
        let ws: Vec<f64> = records.iter().map(|r| r.w_values[k]).collect();
        let mean_w = stats::mean(&ws);
        let se_w = stats::standard_error(&ws);
        let z = if se_w > 0.0 {
            (mean_w - w0) / se_w
        } else {
            0.0
        };
        rows.push(MartingaleRow { t, mean_w, se_w, z });
    }
    // E W_T² from the variance formula with f = φ0:
    // Var W_T = e^{-2λ0 T} Σ_atoms m·Var_{δx}⟨φ0, X_T⟩
    let t_final = *cfg.observation_times.last().unwrap();
    let phi0_fn = TestFunction::from_field("phi0", sd.phi0.clone());
    let mut var_w = 0.0;
    for (x, m) in &model.initial.atoms {
        var_w += m
            * (-2.0 * sd.lambda0 * t_final).exp()
            * semigroup::variance_oracle(model, t_final, &phi0_fn, x, ctx)?;
    }
    let w2_oracle = var_w + w0 * w0;
    let w2s: Vec<f64> = records
        .iter()
        .map(|r| {
            let w = *r.w_values.last().unwrap();
            w * w
        })
        .collect();
    let w2_emp = stats::mean(&w2s);
    let w2_se = stats::standard_error(&w2s);
    let w2_z = if w2_se > 0.0 {
        (w2_emp - w2_oracle) / w2_se
    } else {
        0.0
    };

    let ext = semigroup::extinction_probability(model)?;
    let total_mass = model.initial.total_mass();
    let survival_target = 1.0 - ext.prob_per_unit_mass.powf(total_mass);
    let survivors = records.iter().filter(|r| r.survives()).count();
    let survival_fraction = survivors as f64 / n_paths as f64;
    let survival_se = (survival_fraction * (1.0 - survival_fraction) / n_paths as f64)
        .sqrt()
        .max(1e-300);
    let survival_z = (survival_fraction - survival_target) / survival_se;

    Ok(MartingaleReport {
        rows,
        w0,
        w2_final_empirical: w2_emp,
        w2_final_se: w2_se,
        w2_final_oracle: w2_oracle,
        w2_z,
        survival_fraction,
        survival_se,
        survival_target,
        survival_z,
        n_paths,
    })
}

/// Per-(f, t) statistics of the scaling-limit experiment.
#[derive(Clone, Debug)]
pub struct SllnRow {
    pub t: f64,
    /// mean and s.e. of e^{-λ0 t}⟨f, X_t⟩ over all paths
    pub scaled_mean: f64,
    pub scaled_se: f64,
    /// ratio ⟨f,X_t⟩/⟨φ0,X_t⟩ over surviving paths
    pub ratio_mean: f64,
    pub ratio_se: f64,
    pub ratio_iqr: f64,
    pub ratio_mad: f64,
}

#[derive(Clone, Debug)]
pub struct SllnFunctionReport {
    pub f_name: String,
    /// ⟨f, φ̂0⟩_m
    pub target: f64,
    pub target_provenance: &'static str,
    pub rows: Vec<SllnRow>,
    /// z-score of the final-time surviving-path ratio mean against the target
    pub final_ratio_z: f64,
    /// cross-path dispersion shrinks from burn-in to the final time
    pub iqr_shrinks: bool,
    pub mad_trend_decreasing: bool,
}

#[derive(Clone, Debug)]
pub struct SllnReport {
    pub functions: Vec<SllnFunctionReport>,
    pub survival_fraction: f64,
    pub n_paths: usize,
    /// all paths extinct: nothing to condition on
    pub degenerate: bool,
}

/// Burn-in time before which cross-path dispersion trends are not judged.
pub const SLLN_BURN_IN: f64 = 2.0;

/// Scaling-limit experiment: for each f, e^{-λ0 t}⟨f, X_t⟩ and the ratio
/// statistic ⟨f,X_t⟩/⟨φ0,X_t⟩ on surviving paths, against the target
/// ⟨f, φ̂0⟩_m, with dispersion trends as the observable rendering of
/// almost-sure convergence.
pub fn run_slln(
    model: &ModelSpec,
    cfg: &SimConfig,
    f_list: &[TestFunction],
    sd: &SpectralData,
    n_paths: usize,
    ctx: &QuadCtx,
    workers: Option<usize>,
) -> Result<SllnReport> {
    for f in f_list {
        if f.phi0_domination.is_none() && f.field().map_or(true, |fl| !fl.is_bounded()) {
            return Err(Error::Config(format!(
                "test function '{}' lacks a φ0-domination constant and is not bounded",
                f.name
            )));
        }
    }
    let records = run_paths(model, cfg, f_list, Some(sd), n_paths, workers)?;
    slln_report_from_records(model, cfg, f_list, sd, &records, ctx)
}

/// Scaling-limit statistics for an already-simulated ensemble.
pub fn slln_report_from_records(
    model: &ModelSpec,
    cfg: &SimConfig,
    f_list: &[TestFunction],
    sd: &SpectralData,
    records: &[TrajectoryRecord],
    ctx: &QuadCtx,
) -> Result<SllnReport> {
    let n_paths = records.len();
    let survivors: Vec<&TrajectoryRecord> = records.iter().filter(|r| r.survives()).collect();
    let survival_fraction = survivors.len() as f64 / n_paths as f64;
    let degenerate = survivors.is_empty();
    let times = &cfg.observation_times;
    let burn_in_idx = times.iter().position(|&t| t >= SLLN_BURN_IN).unwrap_or(0);

    let mut functions = Vec::with_capacity(f_list.len());
    for (j, f) in f_list.iter().enumerate() {
        let (target, target_provenance) =
            semigroup::pair_with_phi0_hat(ctx, &model.spatial, sd, f)?;
        let mut rows = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            let scaled: Vec<f64> = records
                .iter()
                .map(|r| (-sd.lambda0 * t).exp() * r.observable_values[j][k])
                .collect();
            // ⟨φ0, X_t⟩ = e^{λ0 t} W_t
            let ratios: Vec<f64> = survivors
                .iter()
                .map(|r| r.observable_values[j][k] / ((sd.lambda0 * t).exp() * r.w_values[k]))
                .collect();
            rows.push(SllnRow {
                t,
                scaled_mean: stats::mean(&scaled),
                scaled_se: stats::standard_error(&scaled),
                ratio_mean: if ratios.is_empty() {
                    f64::NAN
                } else {
                    stats::mean(&ratios)
                },
                ratio_se: if ratios.is_empty() {
                    f64::NAN
                } else {
                    stats::standard_error(&ratios)
                },
                ratio_iqr: if ratios.is_empty() {
                    f64::NAN
                } else {
                    stats::iqr(&ratios)
                },
                ratio_mad: if ratios.is_empty() {
                    f64::NAN
                } else {
                    stats::mad(&ratios)
                },
            });
        }
        let last = rows.last().expect("nonempty observation grid");
        let final_ratio_z = if last.ratio_se > 0.0 {
            (last.ratio_mean - target) / last.ratio_se
        } else if degenerate {
            f64::NAN
        } else {
            0.0
        };
        let iqr_shrinks = !degenerate && last.ratio_iqr < rows[burn_in_idx].ratio_iqr;
        let mad_trend_decreasing = !degenerate && last.ratio_mad <= rows[burn_in_idx].ratio_mad;
        functions.push(SllnFunctionReport {
            f_name: f.name.clone(),
            target,
            target_provenance,
            rows,
            final_ratio_z,
            iqr_shrinks,
            mad_trend_decreasing,
        });
    }
    Ok(SllnReport {
        functions,
        survival_fraction,
        n_paths,
        degenerate,
    })
}
