//! Exact performance metrics: interference, SINR, weighted sum-rate, eavesdropping power
//! and beampatterns.

use serde::{Deserialize, Serialize};

use crate::channel::{next, prev, steering_vector, ChannelSet, EffectiveChannels};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

/// Precoders, combiners and the last power multipliers.
///
/// `precoders[k]` is sent by user `k-1` and carries the stream destined for user `k`;
/// `combiners[k]` is applied at user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerState {
    pub precoders: Vec<CVec>,
    pub combiners: Vec<CVec>,
    pub last_mu: Vec<f64>,
}

impl BeamformerState {
    pub fn zeros(users: usize, antennas: usize) -> Self {
        BeamformerState {
            precoders: vec![CVec::zeros(antennas); users],
            combiners: vec![CVec::zeros(antennas); users],
            last_mu: vec![0.0; users],
        }
    }

    pub fn users(&self) -> usize {
        self.precoders.len()
    }

    pub fn is_finite(&self) -> bool {
        self.precoders
            .iter()
            .chain(&self.combiners)
            .all(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user_sinr: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub weighted_sum: f64,
    pub other_user_power: Vec<f64>,
}

#[inline]
fn gain(w: &CVec, h: &CMat, p: &CVec) -> C64 {
    w.dotc(&(h * p))
}

/// `w_kᴴ H̃_{k,k−1} p_k`.
pub fn desired_amplitude(k: usize, bf: &BeamformerState, eff: &EffectiveChannels) -> C64 {
    gain(&bf.combiners[k], eff.desired(k), &bf.precoders[k])
}

/// Power at user `k` from transmitters other than its source and itself.
pub fn other_user_power(k: usize, bf: &BeamformerState, eff: &EffectiveChannels) -> f64 {
    let users = bf.users();
    (0..users)
        .filter(|&i| i != k && i != next(k, users))
        .map(|i| gain(&bf.combiners[k], &eff.h_tilde[k][prev(i, users)], &bf.precoders[i]).norm_sqr())
        .sum()
}

/// `|w_kᴴ (H_SI,k + H̄_k) p_{k+1}|²`.
pub fn loop_power(k: usize, bf: &BeamformerState, eff: &EffectiveChannels, ch: &ChannelSet) -> f64 {
    let users = bf.users();
    gain(
        &bf.combiners[k],
        &eff.loop_channel(ch, k),
        &bf.precoders[next(k, users)],
    )
    .norm_sqr()
}

pub fn interference_power(k: usize, bf: &BeamformerState, eff: &EffectiveChannels, ch: &ChannelSet) -> f64 {
    other_user_power(k, bf, eff) + loop_power(k, bf, eff, ch)
}

pub fn sinr(k: usize, bf: &BeamformerState, eff: &EffectiveChannels, ch: &ChannelSet, noise: f64) -> f64 {
    let s = desired_amplitude(k, bf, eff).norm_sqr();
    if s == 0.0 {
        return 0.0;
    }
    s / (interference_power(k, bf, eff, ch) + bf.combiners[k].norm_squared() * noise)
}

pub fn weighted_sum_rate(bf: &BeamformerState, eff: &EffectiveChannels, ch: &ChannelSet, sc: &Scenario) -> RateReport {
    let users = bf.users();
    let per_user_sinr: Vec<f64> = (0..users).map(|k| sinr(k, bf, eff, ch, sc.noise_w)).collect();
    let per_user_rate: Vec<f64> = per_user_sinr.iter().map(|g| (1.0 + g).log2()).collect();
    let weighted_sum = per_user_rate.iter().zip(sc.weights()).map(|(r, a)| r * a).sum();
    RateReport {
        other_user_power: (0..users).map(|k| other_user_power(k, bf, eff)).collect(),
        per_user_sinr,
        per_user_rate,
        weighted_sum,
    }
}

/// Impinging and reflected angular responses of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Beampattern {
    pub user: usize,
    pub angles_deg: Vec<f64>,
    pub impinging: Vec<f64>,
    pub reflected: Vec<f64>,
}

/// 0° to 180° in 0.25° steps.
pub fn default_beampattern_grid() -> Vec<f64> {
    (0..=720).map(|i| i as f64 * 0.25).collect()
}

/// Unnormalized patterns of user `k`: impinging `|h_{k+1}ᵀ T a(θ)|²`, reflected `|a(θ)ᵀ T h_k|²`,
/// with `T = Φ` or `T = Φ − I` when `structural` is set.
pub fn raw_beampattern(
    k: usize,
    phi: &CMat,
    ch: &ChannelSet,
    grid_deg: &[f64],
    structural: bool,
) -> Result<Beampattern> {
    if ch.antennas() != 1 {
        return Err(Error::InvalidArgument(
            "beampatterns require single-antenna users".into(),
        ));
    }
    let m = ch.elements();
    if phi.shape() != (m, m) {
        return Err(Error::Shape(format!("scattering matrix must be {m}x{m}")));
    }
    if let Some(a) = grid_deg.iter().find(|a| !(0.0..=180.0).contains(*a)) {
        return Err(Error::InvalidArgument(format!("grid angle {a} outside [0, 180]")));
    }
    let mut t = phi.clone();
    if structural {
        for d in 0..m {
            t[(d, d)] -= C64::new(1.0, 0.0);
        }
    }
    let users = ch.users();
    let h_next = ch.h_ref[next(k, users)].column(0).into_owned();
    let h_k = ch.h_ref[k].column(0).into_owned();
    // Row vector h_{k+1}ᵀ T and column vector T h_k, reused over the grid.
    let left = t.transpose() * &h_next;
    let right = &t * &h_k;
    let mut impinging = Vec::with_capacity(grid_deg.len());
    let mut reflected = Vec::with_capacity(grid_deg.len());
    for &deg in grid_deg {
        let a = steering_vector(deg.to_radians(), m)?;
        impinging.push(left.dot(&a).norm_sqr());
        reflected.push(a.dot(&right).norm_sqr());
    }
    Ok(Beampattern {
        user: k,
        angles_deg: grid_deg.to_vec(),
        impinging,
        reflected,
    })
}

/// Patterns of every user, jointly normalized so the largest value over all users and
/// both families equals one.
pub fn beampatterns(phi: &CMat, ch: &ChannelSet, grid_deg: &[f64], structural: bool) -> Result<Vec<Beampattern>> {
    let mut out = (0..ch.users())
        .map(|k| raw_beampattern(k, phi, ch, grid_deg, structural))
        .collect::<Result<Vec<_>>>()?;
    let peak = out
        .iter()
        .flat_map(|b| b.impinging.iter().chain(&b.reflected))
        .fold(0.0_f64, |a, &v| a.max(v));
    if peak > 0.0 {
        for b in &mut out {
            b.impinging.iter_mut().for_each(|v| *v /= peak);
            b.reflected.iter_mut().for_each(|v| *v /= peak);
        }
    }
    Ok(out)
}

/// Grid angle at which a pattern peaks.
pub fn peak_angle(angles_deg: &[f64], values: &[f64]) -> f64 {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    angles_deg[best]
}
