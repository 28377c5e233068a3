//! Alternating interference-leakage minimisation and a Monte Carlo
//! feasibility classifier built on it.
//!
//! With precoders fixed, each decoder `U[k]` is set to the `d_k` least
//! dominant eigenvectors of the interference covariance
//! `Q_k = sum_{j != k} H[k][j] V[j] V[j]^H H[k][j]^H`. With decoders fixed,
//! each precoder is updated the same way in the reciprocal network, using
//! `R_k = sum_{j != k} H[j][k]^H U[j] U[j]^H H[j][k]`. Both half-steps are
//! exact minimisers of the total leakage in their block of variables, so
//! the leakage never increases.

use rayon::prelude::*;
use serde::Serialize;

use crate::cj3;
use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, least_eigenvectors, orthonormal_columns};
use crate::model::{complex_normal_matrix, sample_channels, ChannelSet, IaSolution, StructureKind, SystemConfig};
use crate::rng::{derive_seed, substream, DOMAIN_SOLVER_CHANNEL, DOMAIN_SOLVER_INIT};
use crate::scalar::{CMat, Real};
use crate::verify::{check_with, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Success threshold on the final leakage.
    pub tol_align: f64,
    /// Random initialisations per channel draw.
    pub restarts: usize,
    /// Channel draws per configuration.
    pub trials: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol_align: 1e-8,
            restarts: 1,
            trials: 50,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.restarts == 0 || self.trials == 0 {
            return Err(Error::InvalidParameter("max_iters, restarts and trials must be at least 1".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.tol_align > 0.0) {
            return Err(Error::InvalidParameter("tol_align must be positive".into()));
        }
        Ok(())
    }

    /// Leakage below which iteration stops early.
    fn target(&self) -> f64 {
        self.tol_align * 1e-2
    }

    /// Per-iteration decrease below which the iteration is considered stalled.
    fn stall(&self) -> f64 {
        self.tol_align * 1e-4
    }
}

/// Result of one leakage-minimisation run.
#[derive(Clone, Debug)]
pub struct SolverRun<T: Real> {
    pub solution: IaSolution<T>,
    /// Leakage after the initial half-step, then after every iteration.
    pub trajectory: Vec<T>,
}

impl<T: Real> SolverRun<T> {
    pub fn final_leakage(&self) -> T {
        *self.trajectory.last().expect("trajectory is never empty")
    }

    pub fn iterations(&self) -> usize {
        self.trajectory.len() - 1
    }
}

fn total_leakage<T: Real>(ch: &ChannelSet<T>, u: &[CMat<T>], v: &[CMat<T>]) -> T {
    let k = ch.users();
    let mut acc = T::zero();
    for j in 0..k {
        for l in 0..k {
            if j != l {
                acc += frobenius_sq(&(u[j].adjoint() * ch.get(j, l) * &v[l]));
            }
        }
    }
    acc
}

fn update_decoders<T: Real>(ch: &ChannelSet<T>, v: &[CMat<T>], streams: &[usize]) -> Vec<CMat<T>> {
    let k = ch.users();
    (0..k)
        .map(|rx| {
            let n = ch.get(rx, rx).nrows();
            let mut q = CMat::zeros(n, n);
            for tx in (0..k).filter(|&tx| tx != rx) {
                let a = ch.get(rx, tx) * &v[tx];
                q += &a * a.adjoint();
            }
            least_eigenvectors(&q, streams[rx]).0
        })
        .collect()
}

fn update_precoders<T: Real>(ch: &ChannelSet<T>, u: &[CMat<T>], streams: &[usize]) -> Vec<CMat<T>> {
    let k = ch.users();
    (0..k)
        .map(|tx| {
            let n = ch.get(tx, tx).ncols();
            let mut r = CMat::zeros(n, n);
            for rx in (0..k).filter(|&rx| rx != tx) {
                let a = ch.get(rx, tx).adjoint() * &u[rx];
                r += &a * a.adjoint();
            }
            least_eigenvectors(&r, streams[tx]).0
        })
        .collect()
}

fn check_streams<T: Real>(ch: &ChannelSet<T>, streams: &[usize]) -> Result<Vec<usize>> {
    let dims = ch.signal_dims();
    if streams.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!("{} stream counts for {} users", streams.len(), dims.len())));
    }
    for (user, (&d, &n)) in streams.iter().zip(&dims).enumerate() {
        if d > n {
            return Err(Error::StreamOverflow { user, streams: d, dim: n });
        }
    }
    Ok(dims)
}

/// Random orthonormal starting precoders from `seed`.
pub fn initial_precoders<T: Real>(dims: &[usize], streams: &[usize], seed: u64) -> Vec<CMat<T>> {
    let mut rng = substream(seed, &[DOMAIN_SOLVER_INIT]);
    dims.iter()
        .zip(streams)
        .map(|(&n, &d)| {
            let raw: CMat<T> = complex_normal_matrix(&mut rng, n, d);
            orthonormal_columns(&raw).unwrap_or(raw)
        })
        .collect()
}

/// Run alternating minimisation from precoders `v0`.
pub fn minimize_from<T: Real>(ch: &ChannelSet<T>, streams: &[usize], v0: Vec<CMat<T>>, opts: &SolverOptions) -> Result<SolverRun<T>> {
    opts.validate()?;
    check_streams(ch, streams)?;
    let (target, stall) = (T::lit(opts.target()), T::lit(opts.stall()));
    let mut v = v0;
    let mut u = update_decoders(ch, &v, streams);
    let mut trajectory = vec![total_leakage(ch, &u, &v)];
    for _ in 0..opts.max_iters {
        let prev = *trajectory.last().unwrap();
        if prev <= target {
            break;
        }
        v = update_precoders(ch, &u, streams);
        u = update_decoders(ch, &v, streams);
        let now = total_leakage(ch, &u, &v);
        trajectory.push(now);
        if prev - now < stall {
            break;
        }
    }
    Ok(SolverRun {
        solution: IaSolution::new(u, v)?,
        trajectory,
    })
}

/// Alternating leakage minimisation from a random start seeded by
/// `opts.seed`.
pub fn minimize_leakage<T: Real>(ch: &ChannelSet<T>, streams: &[usize], opts: &SolverOptions) -> Result<SolverRun<T>> {
    let dims = check_streams(ch, streams)?;
    let v0 = initial_precoders(&dims, streams, opts.seed);
    minimize_from(ch, streams, v0, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    LikelyFeasible,
    LikelyInfeasible,
    Inconclusive,
}

/// `LikelyFeasible` at a success rate of at least 0.5; `LikelyInfeasible`
/// when nothing succeeded and the best leakage stayed above
/// `100 * tol_align`; `Inconclusive` otherwise.
pub fn classification_rule(success_rate: f64, best_leakage: f64, tol_align: f64) -> Classification {
    if success_rate >= 0.5 {
        Classification::LikelyFeasible
    } else if success_rate == 0.0 && best_leakage > 100.0 * tol_align {
        Classification::LikelyInfeasible
    } else {
        Classification::Inconclusive
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub trial: usize,
    pub restart: usize,
    pub iterations: usize,
    pub final_leakage: f64,
    pub rank_ok: bool,
    pub success: bool,
    /// Largest single-step increase of the leakage (zero when monotone).
    pub max_increase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityVerdict {
    pub config: SystemConfig,
    pub options: SolverOptions,
    pub success_rate: f64,
    pub best_leakage: f64,
    /// `(median, p90)` of the final leakages.
    pub leakage_quantiles: (f64, f64),
    pub classification: Classification,
    /// The explicit three-user diagonal construction verified on at least
    /// one channel draw.
    pub witness_found: bool,
    /// `(trial, restart)` of the run with the smallest final leakage.
    pub best_run: (usize, usize),
    pub runs: Vec<RunRecord>,
}

/// Seed of the channel draw for `trial`.
pub fn trial_config(cfg: &SystemConfig, opts: &SolverOptions, trial: usize) -> SystemConfig {
    cfg.clone().with_seed(derive_seed(opts.seed, &[DOMAIN_SOLVER_CHANNEL, cfg.seed, trial as u64]))
}

/// Options for one `(trial, restart)` run.
pub fn run_options(cfg: &SystemConfig, opts: &SolverOptions, trial: usize, restart: usize) -> SolverOptions {
    SolverOptions {
        seed: derive_seed(opts.seed, &[DOMAIN_SOLVER_INIT, cfg.seed, trial as u64, restart as u64]),
        ..*opts
    }
}

/// Reproduce the channels and solver run of one `(trial, restart)` pair.
pub fn replay<T: Real>(cfg: &SystemConfig, opts: &SolverOptions, trial: usize, restart: usize) -> Result<(ChannelSet<T>, SolverRun<T>)> {
    let ch = sample_channels(&trial_config(cfg, opts, trial))?;
    let run = minimize_leakage(&ch, &cfg.streams, &run_options(cfg, opts, trial, restart))?;
    Ok((ch, run))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Parameter `n` when `cfg` is the three-user diagonal `(n+1, n, n)` layout.
fn cj3_layout(cfg: &SystemConfig) -> Option<usize> {
    if cfg.structure.kind != StructureKind::Diagonal || cfg.users != 3 {
        return None;
    }
    let ns = cfg.signal_dims[0];
    if ns < 3 || ns.is_multiple_of(2) {
        return None;
    }
    let n = (ns - 1) / 2;
    (cfg.streams == cj3::cj3_streams(n)).then_some(n)
}

/// Monte Carlo feasibility verdict over `opts.trials` channel draws and
/// `opts.restarts` initialisations each. Runs execute in parallel; every
/// run derives its own substream so the verdict is order independent.
pub fn classify<T: Real>(cfg: &SystemConfig, opts: &SolverOptions) -> Result<FeasibilityVerdict> {
    cfg.validate()?;
    opts.validate()?;
    let tol = Tolerances {
        align: T::lit(opts.tol_align),
        rank_rtol: None,
    };
    let witness_n = cj3_layout(cfg);
    let per_trial: Vec<(Vec<RunRecord>, bool)> = (0..opts.trials)
        .into_par_iter()
        .map(|trial| -> Result<_> {
            let ch: ChannelSet<T> = sample_channels(&trial_config(cfg, opts, trial))?;
            let witness = witness_n.is_some_and(|n| {
                cj3::construct(&ch, n)
                    .and_then(|sol| check_with(&ch, &sol, tol))
                    .is_ok_and(|r| r.passed())
            });
            let runs = (0..opts.restarts)
                .map(|restart| -> Result<RunRecord> {
                    let run = minimize_leakage(&ch, &cfg.streams, &run_options(cfg, opts, trial, restart))?;
                    let verdict = check_with(&ch, &run.solution, tol)?;
                    let max_increase = run
                        .trajectory
                        .windows(2)
                        .map(|w| (w[1] - w[0]).as_f64())
                        .fold(0.0, f64::max);
                    Ok(RunRecord {
                        trial,
                        restart,
                        iterations: run.iterations(),
                        final_leakage: run.final_leakage().as_f64(),
                        rank_ok: verdict.rank_ok,
                        success: verdict.passed(),
                        max_increase,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((runs, witness))
        })
        .collect::<Result<_>>()?;

    let witness_found = per_trial.iter().any(|(_, w)| *w);
    let runs: Vec<RunRecord> = per_trial.into_iter().flat_map(|(r, _)| r).collect();
    let successes = runs.iter().filter(|r| r.success).count();
    let success_rate = successes as f64 / runs.len() as f64;
    let best = runs
        .iter()
        .min_by(|a, b| a.final_leakage.total_cmp(&b.final_leakage))
        .expect("at least one run");
    let best_leakage = best.final_leakage;
    let best_run = (best.trial, best.restart);
    let mut sorted: Vec<f64> = runs.iter().map(|r| r.final_leakage).collect();
    sorted.sort_by(f64::total_cmp);
    let mut classification = classification_rule(success_rate, best_leakage, opts.tol_align);
    if witness_found {
        classification = Classification::LikelyFeasible;
    }
    Ok(FeasibilityVerdict {
        config: cfg.clone(),
        options: *opts,
        success_rate,
        best_leakage,
        leakage_quantiles: (quantile(&sorted, 0.5), quantile(&sorted, 0.9)),
        classification,
        witness_found,
        best_run,
        runs,
    })
}
