//! Closed-form precoder and combiner updates.

use nalgebra::Cholesky;

use crate::channel::{next, prev, ChannelSet, EffectiveChannels};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::linalg::{psd_eigen, CMat, CVec, C64};
use crate::metrics::BeamformerState;
use crate::surrogate::SurrogateState;

/// Quadratic pieces of the surrogate in one precoder.
///
/// `zeta1` already carries the per-user weights `α_j |τ_j|²` of every receiver that hears
/// `p_k` through a surface-assisted link; `zeta2` is the unweighted loop term of the
/// transmitting user `k − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderQuadratics {
    pub zeta1: CMat,
    pub zeta2: CMat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionParams {
    pub tol: f64,
    pub max_iters: usize,
}

impl BisectionParams {
    pub fn from_scenario(sc: &Scenario) -> Self {
        BisectionParams {
            tol: sc.solver().bisection_tol,
            max_iters: sc.solver().bisection_max_iters,
        }
    }
}

fn outer(h: &CMat, w: &CVec) -> CMat {
    // hᴴ w wᴴ h for a column w.
    let v = h.adjoint() * w;
    &v * v.adjoint()
}

pub fn build_zeta(
    k: usize,
    bf: &BeamformerState,
    eff: &EffectiveChannels,
    ch: &ChannelSet,
    sur: &SurrogateState,
    weights: &[f64],
) -> PrecoderQuadratics {
    let users = bf.users();
    let n = ch.antennas();
    let src = prev(k, users);
    let mut zeta1 = CMat::zeros(n, n);
    for j in (0..users).filter(|&j| j != src) {
        let c = weights[j] * sur.tau[j].norm_sqr();
        if c != 0.0 {
            zeta1 += outer(&eff.h_tilde[j][src], &bf.combiners[j]) * C64::new(c, 0.0);
        }
    }
    let zeta2 = outer(&eff.loop_channel(ch, src), &bf.combiners[src]);
    PrecoderQuadratics { zeta1, zeta2 }
}

/// Regularized quadratic `Z` and linear term `b` of the precoder subproblem
/// `max 2 Re(pᴴ b) − pᴴ Z p`.
pub fn precoder_system(
    k: usize,
    bf: &BeamformerState,
    eff: &EffectiveChannels,
    ch: &ChannelSet,
    sur: &SurrogateState,
    weights: &[f64],
) -> (CMat, CVec) {
    let users = bf.users();
    let src = prev(k, users);
    let q = build_zeta(k, bf, eff, ch, sur, weights);
    let z = q.zeta1 + q.zeta2 * C64::new(weights[src] * sur.tau[src].norm_sqr(), 0.0);
    let b = eff.desired(k).adjoint() * &bf.combiners[k] * (sur.tau[k] * (weights[k] * (1.0 + sur.iota[k]).sqrt()));
    (z, b)
}

/// Solves `max 2 Re(pᴴ b) − pᴴ Z p` subject to `‖p‖² ≤ budget`, returning `(p, μ)`.
pub fn solve_power_constrained(
    z: &CMat,
    b: &CVec,
    budget: f64,
    params: BisectionParams,
    user: usize,
) -> Result<(CVec, f64)> {
    let n = b.len();
    if budget <= 0.0 || b.iter().all(|v| v.norm() == 0.0) {
        return Ok((CVec::zeros(n), 0.0));
    }
    let (lam, u) = psd_eigen(z);
    let c = u.adjoint() * b;
    let lam_max = lam.iter().cloned().fold(0.0_f64, f64::max);
    let norm2 = |mu: f64| -> f64 {
        c.iter()
            .zip(&lam)
            .map(|(ci, li)| ci.norm_sqr() / ((li + mu) * (li + mu)))
            .sum()
    };
    let build = |mu: f64| -> CVec {
        let scaled = CVec::from_iterator(n, c.iter().zip(&lam).map(|(ci, li)| ci / (li + mu)));
        &u * scaled
    };
    let singular = lam.iter().any(|&l| l <= 1e-14 * lam_max.max(f64::MIN_POSITIVE));
    if !singular {
        let n0 = norm2(0.0);
        if n0.is_finite() && n0 <= budget {
            return Ok((build(0.0), 0.0));
        }
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while norm2(hi) > budget {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > params.max_iters {
            return Err(Error::Bisection { user, iters: doublings });
        }
    }
    let mut mu = hi;
    for _ in 0..params.max_iters {
        let mid = 0.5 * (lo + hi);
        let v = norm2(mid);
        if v > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        mu = hi;
        if (norm2(hi) - budget).abs() <= params.tol * budget || hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let mut p = build(mu);
    let pn = p.norm_squared();
    if pn > budget {
        p *= C64::new((budget / pn).sqrt(), 0.0);
    }
    Ok((p, mu))
}

/// Optimal precoder `p_k` with its power multiplier.
pub fn update_precoder(
    k: usize,
    bf: &BeamformerState,
    eff: &EffectiveChannels,
    ch: &ChannelSet,
    sur: &SurrogateState,
    sc: &Scenario,
) -> Result<(CVec, f64)> {
    let (z, b) = precoder_system(k, bf, eff, ch, sur, sc.weights());
    let budget = sc.tx_power_w[prev(k, bf.users())];
    solve_power_constrained(&z, &b, budget, BisectionParams::from_scenario(sc), k)
}

/// Interference-plus-signal covariance at user `k`, including `σ² I`.
pub fn build_xi(k: usize, bf: &BeamformerState, eff: &EffectiveChannels, ch: &ChannelSet, sigma2: f64) -> CMat {
    let users = bf.users();
    let n = ch.antennas();
    let mut xi = CMat::identity(n, n) * C64::new(sigma2, 0.0);
    let nk = next(k, users);
    for i in (0..users).filter(|&i| i != nk) {
        let v = &eff.h_tilde[k][prev(i, users)] * &bf.precoders[i];
        xi += &v * v.adjoint();
    }
    let v = eff.loop_channel(ch, k) * &bf.precoders[nk];
    xi += &v * v.adjoint();
    xi
}

/// Unit-norm MMSE combiner and the norm of the unnormalized solution.
///
/// Returns `None` when `τ_k = 0` or the solution vanishes; the caller keeps the old combiner.
pub fn update_combiner(
    k: usize,
    bf: &BeamformerState,
    eff: &EffectiveChannels,
    ch: &ChannelSet,
    sur: &SurrogateState,
    sc: &Scenario,
) -> Option<(CVec, f64)> {
    let tau = sur.tau[k];
    if tau.norm() == 0.0 {
        return None;
    }
    let xi = build_xi(k, bf, eff, ch, sc.noise_w) * C64::new(tau.norm_sqr(), 0.0);
    let rhs = eff.desired(k) * &bf.precoders[k] * (tau.conj() * (1.0 + sur.iota[k]).sqrt());
    let w = match Cholesky::new(xi.clone()) {
        Some(chol) => chol.solve(&rhs),
        None => xi.lu().solve(&rhs)?,
    };
    let norm = w.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    Some((w / C64::new(norm, 0.0), norm))
}
