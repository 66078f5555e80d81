//! Block coordinate ascent over auxiliaries, precoders, combiners and the scattering matrix.

use std::time::Instant;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamformers::{update_combiner, update_precoder};
use crate::channel::{effective_channels, prev, ChannelSet, EffectiveChannels};
use crate::config::{derive_trial_seed, RisArchitecture, Scenario, TrialSeed, UpdateOrder};
use crate::error::{Error, Result};
use crate::linalg::{block_diag, is_finite, random_symmetric_unitary, random_unitary, CMat, CVec, C64};
use crate::metrics::{weighted_sum_rate, BeamformerState, RateReport};
use crate::scattering::{optimize_scattering, PddTrace};
use crate::stats::{mean, std_err, PairedStats};
use crate::surrogate::{eval_f_tau, update_iota, update_tau, SurrogateState};

/// Slack allowed when checking that the objective never decreases.
pub const MONOTONE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Return an error instead of a warning when an invariant check fails.
    pub strict: bool,
    /// Keep the per-inner-iteration rows of every scattering trace.
    pub keep_pdd_rows: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            strict: cfg!(debug_assertions),
            keep_pdd_rows: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    /// Surrogate value at initialization followed by one entry per iteration.
    pub objective_trace: Vec<f64>,
    /// Weighted sum-rate, aligned with `objective_trace`.
    pub sum_rate_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    pub pdd_traces: Vec<PddTrace>,
    /// Scattering solves that stopped with a constraint gap above `1e3 ε`.
    pub pdd_nonconverged: usize,
    /// Scattering solves whose result was discarded because it lowered the objective.
    pub phi_rejections: usize,
    pub final_rates: RateReport,
    pub restart: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: OptimizerReport,
    pub beamformers: BeamformerState,
    pub surrogate: SurrogateState,
    pub phi: CMat,
}

/// Starting scattering matrix: `I`, or `−I` when structural scattering is modeled
/// (with `Φ = I` the surface-assisted links vanish and every block update stalls at zero).
pub fn initial_phi(sc: &Scenario) -> CMat {
    let m = sc.elements();
    let s = if sc.structural() { -1.0 } else { 1.0 };
    CMat::identity(m, m) * C64::new(s, 0.0)
}

/// Random feasible scattering matrix of the scenario's architecture.
pub fn random_phi(sc: &Scenario, rng: &mut ChaCha8Rng) -> CMat {
    let ris = &sc.config.ris;
    let blocks: Vec<CMat> = (0..ris.groups())
        .map(|_| {
            if ris.is_reciprocal() {
                random_symmetric_unitary(rng, ris.group_size)
            } else {
                random_unitary(rng, ris.group_size)
            }
        })
        .collect();
    block_diag(&blocks)
}

fn principal_left_singular(h: &CMat) -> CVec {
    let n = h.nrows();
    if h.iter().all(|z| z.norm() == 0.0) {
        let mut e = CVec::zeros(n);
        e[0] = C64::new(1.0, 0.0);
        return e;
    }
    let svd = h.clone().svd(true, false);
    let u = svd.u.expect("svd u");
    let mut best = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > svd.singular_values[best] {
            best = i;
        }
    }
    u.column(best).into_owned()
}

/// Beamformers and auxiliaries matched to the effective channels of `phi`.
pub fn initialize_with(
    sc: &Scenario,
    ch: &ChannelSet,
    phi: &CMat,
) -> Result<(BeamformerState, SurrogateState, EffectiveChannels)> {
    let eff = effective_channels(ch, phi, sc.structural())?;
    let (users, n) = (sc.users(), sc.antennas());
    let mut bf = BeamformerState::zeros(users, n);
    for k in 0..users {
        let h = eff.desired(k);
        let w = principal_left_singular(h);
        let v = h.adjoint() * &w;
        let budget = sc.tx_power_w[prev(k, users)];
        let dir = if v.norm() > 0.0 {
            &v / C64::new(v.norm(), 0.0)
        } else {
            CVec::from_element(n, C64::new(1.0 / (n as f64).sqrt(), 0.0))
        };
        bf.precoders[k] = dir * C64::new(budget.sqrt(), 0.0);
        bf.combiners[k] = w;
    }
    let iota = update_iota(&bf, &eff, ch, sc);
    let tau = update_tau(&bf, &eff, ch, &iota, sc);
    Ok((bf, SurrogateState { iota, tau }, eff))
}

pub fn initialize(sc: &Scenario, ch: &ChannelSet) -> Result<(BeamformerState, SurrogateState, CMat)> {
    let phi = initial_phi(sc);
    let (bf, sur, _) = initialize_with(sc, ch, &phi)?;
    Ok((bf, sur, phi))
}

fn check(cond: bool, strict: bool, msg: impl FnOnce() -> Error) -> Result<()> {
    if cond {
        return Ok(());
    }
    let e = msg();
    if strict {
        Err(e)
    } else {
        warn!("{e}");
        Ok(())
    }
}

/// Runs the optimizer, trying `restarts` starting points and keeping the best.
pub fn run(sc: &Scenario, ch: &ChannelSet) -> Result<RunOutcome> {
    run_with(sc, ch, &RunOptions::default())
}

pub fn run_with(sc: &Scenario, ch: &ChannelSet, opts: &RunOptions) -> Result<RunOutcome> {
    let mut best: Option<RunOutcome> = None;
    for r in 0..sc.solver().restarts {
        let phi0 = if r == 0 {
            initial_phi(sc)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(sc.config.seed, r as u64).derived_seed);
            random_phi(sc, &mut rng)
        };
        let mut out = run_from(sc, ch, &phi0, opts)?;
        out.report.restart = r;
        let better = best
            .as_ref()
            .is_none_or(|b| out.report.final_rates.weighted_sum > b.report.final_rates.weighted_sum);
        if better {
            best = Some(out);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// One optimization run from a given feasible scattering matrix.
pub fn run_from(sc: &Scenario, ch: &ChannelSet, phi0: &CMat, opts: &RunOptions) -> Result<RunOutcome> {
    let start = Instant::now();
    let solver = sc.solver().clone();
    let users = sc.users();
    let mut phi = phi0.clone();
    let (mut bf, mut sur, mut eff) = initialize_with(sc, ch, &phi)?;

    let mut v_prev = eval_f_tau(&bf, &eff, ch, &sur, sc);
    let mut objective_trace = vec![v_prev];
    let mut sum_rate_trace = vec![weighted_sum_rate(&bf, &eff, ch, sc).weighted_sum];
    let mut pdd_traces = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut pdd_nonconverged = 0;
    let mut phi_rejections = 0;

    for t in 1..=solver.bcd_max_iters {
        iterations = t;
        sur.iota = update_iota(&bf, &eff, ch, sc);
        sur.tau = update_tau(&bf, &eff, ch, &sur.iota, sc);
        if !sur.is_finite() {
            return Err(Error::NonFinite { block: "auxiliary" });
        }
        let f_tau = eval_f_tau(&bf, &eff, ch, &sur, sc);
        let f_o = weighted_sum_rate(&bf, &eff, ch, sc).weighted_sum;
        check((f_tau - f_o).abs() <= 1e-8 * (1.0 + f_o.abs()), opts.strict, || {
            Error::Invariant(format!("surrogate {f_tau} differs from sum-rate {f_o}"))
        })?;

        match solver.update_order {
            UpdateOrder::Sequential => {
                for k in 0..users {
                    let (p, mu) = update_precoder(k, &bf, &eff, ch, &sur, sc)?;
                    bf.precoders[k] = p;
                    bf.last_mu[k] = mu;
                }
            }
            UpdateOrder::Jacobi => {
                let snapshot = bf.clone();
                for k in 0..users {
                    let (p, mu) = update_precoder(k, &snapshot, &eff, ch, &sur, sc)?;
                    bf.precoders[k] = p;
                    bf.last_mu[k] = mu;
                }
            }
        }
        if !bf.is_finite() {
            return Err(Error::NonFinite { block: "precoder" });
        }

        // Each combiner only sees the precoders, so the order does not matter here.
        for k in 0..users {
            if let Some((w, norm)) = update_combiner(k, &bf, &eff, ch, &sur, sc) {
                bf.combiners[k] = w;
                // Keeps τ_k wᴴ unchanged so the surrogate value is not altered by normalization.
                sur.tau[k] *= norm;
            }
        }
        if !bf.is_finite() || !sur.is_finite() {
            return Err(Error::NonFinite { block: "combiner" });
        }

        let (out, coeffs) = optimize_scattering(&bf, &sur, ch, sc, &phi)?;
        if !is_finite(&out.phi) {
            return Err(Error::NonFinite { block: "scattering" });
        }
        if !out.trace.converged && out.trace.final_gap > 1e3 * solver.pdd_eps {
            pdd_nonconverged += 1;
        }
        if coeffs.value(&out.phi) >= coeffs.value(&phi) {
            phi = out.phi;
        } else {
            phi_rejections += 1;
            debug!("iteration {t}: scattering update lowered the surrogate; kept previous matrix");
        }
        let mut trace = out.trace;
        if !opts.keep_pdd_rows {
            trace.rows.clear();
        }
        pdd_traces.push(trace);
        eff = effective_channels(ch, &phi, sc.structural())?;

        let v = eval_f_tau(&bf, &eff, ch, &sur, sc);
        if !v.is_finite() {
            return Err(Error::NonFinite { block: "objective" });
        }
        check(v >= v_prev - MONOTONE_SLACK, opts.strict, || Error::Monotonicity {
            iteration: t,
            previous: v_prev,
            current: v,
        })?;
        objective_trace.push(v);
        sum_rate_trace.push(weighted_sum_rate(&bf, &eff, ch, sc).weighted_sum);
        if (v - v_prev).abs() <= solver.bcd_rel_tol * v_prev.abs() {
            converged = true;
            break;
        }
        v_prev = v;
    }

    let final_rates = weighted_sum_rate(&bf, &eff, ch, sc);
    Ok(RunOutcome {
        report: OptimizerReport {
            objective_trace,
            sum_rate_trace,
            converged,
            iterations_used: iterations,
            pdd_traces,
            pdd_nonconverged,
            phi_rejections,
            final_rates,
            restart: 0,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        beamformers: bf,
        surrogate: sur,
        phi,
    })
}

/// Paired comparison of several architectures on shared channel realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureComparison {
    pub arms: Vec<String>,
    /// `sum_rates[arm][trial]`.
    pub sum_rates: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Paired statistics of every arm against the first.
    pub paired_vs_first: Vec<PairedStats>,
}

pub fn compare_architectures(
    sc: &Scenario,
    arms: &[RisArchitecture],
    seeds: &[TrialSeed],
) -> Result<ArchitectureComparison> {
    let scenarios = arms
        .iter()
        .map(|a| sc.config.with_architecture(*a).validate())
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..arms.len())
        .flat_map(|a| (0..seeds.len()).map(move |t| (a, t)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(a, t)| {
            let s = &scenarios[a];
            let ch = ChannelSet::sample(s, seeds[t])?;
            Ok(run(s, &ch)?.report.final_rates.weighted_sum)
        })
        .collect::<Result<Vec<f64>>>()?;
    let sum_rates: Vec<Vec<f64>> = values.chunks(seeds.len()).map(|c| c.to_vec()).collect();
    Ok(ArchitectureComparison {
        arms: arms.iter().map(|a| a.label()).collect(),
        means: sum_rates.iter().map(|v| mean(v)).collect(),
        stderrs: sum_rates.iter().map(|v| std_err(v)).collect(),
        paired_vs_first: sum_rates.iter().map(|v| PairedStats::new(v, &sum_rates[0])).collect(),
        sum_rates,
    })
}
