//! Fractional-programming surrogate: auxiliary `ι`, `τ` and the transformed objective.
//!
//! Rates are in bits, so the non-logarithmic terms of each user's surrogate carry a
//! `1/ln 2` factor. With it `ι = γ` is the exact maximizer and the surrogate touches the
//! sum-rate from below; without it the touching point would still hold but the maximizer
//! would drift away from `γ`.

use std::f64::consts::LN_2;

use crate::channel::{ChannelSet, EffectiveChannels};
use crate::config::Scenario;
use crate::linalg::C64;
use crate::metrics::{desired_amplitude, interference_power, sinr, BeamformerState};

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateState {
    pub iota: Vec<f64>,
    pub tau: Vec<C64>,
}

impl SurrogateState {
    pub fn zeros(users: usize) -> Self {
        SurrogateState {
            iota: vec![0.0; users],
            tau: vec![C64::new(0.0, 0.0); users],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iota.iter().all(|v| v.is_finite()) && self.tau.iter().all(|t| t.re.is_finite() && t.im.is_finite())
    }
}

pub fn update_iota(bf: &BeamformerState, eff: &EffectiveChannels, ch: &ChannelSet, sc: &Scenario) -> Vec<f64> {
    (0..bf.users()).map(|k| sinr(k, bf, eff, ch, sc.noise_w)).collect()
}

/// Received signal plus interference power at user `k`, noise excluded.
pub fn gamma_total(k: usize, bf: &BeamformerState, eff: &EffectiveChannels, ch: &ChannelSet) -> f64 {
    interference_power(k, bf, eff, ch) + desired_amplitude(k, bf, eff).norm_sqr()
}

pub fn update_tau(
    bf: &BeamformerState,
    eff: &EffectiveChannels,
    ch: &ChannelSet,
    iota: &[f64],
    sc: &Scenario,
) -> Vec<C64> {
    (0..bf.users())
        .map(|k| {
            let d = desired_amplitude(k, bf, eff);
            let den = gamma_total(k, bf, eff, ch) + bf.combiners[k].norm_squared() * sc.noise_w;
            if den > 0.0 {
                d * ((1.0 + iota[k]).sqrt() / den)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Contribution of user `k` to the transformed objective, without the weight.
pub fn user_f_tau(
    k: usize,
    bf: &BeamformerState,
    eff: &EffectiveChannels,
    ch: &ChannelSet,
    sur: &SurrogateState,
    noise: f64,
) -> f64 {
    let iota = sur.iota[k];
    let tau = sur.tau[k];
    let d = desired_amplitude(k, bf, eff);
    let den = gamma_total(k, bf, eff, ch) + bf.combiners[k].norm_squared() * noise;
    (1.0 + iota).log2() + (-iota + 2.0 * (1.0 + iota).sqrt() * (tau.conj() * d).re - tau.norm_sqr() * den) / LN_2
}

pub fn eval_f_tau(
    bf: &BeamformerState,
    eff: &EffectiveChannels,
    ch: &ChannelSet,
    sur: &SurrogateState,
    sc: &Scenario,
) -> f64 {
    (0..bf.users())
        .map(|k| sc.weights()[k] * user_f_tau(k, bf, eff, ch, sur, sc.noise_w))
        .sum()
}

/// Lagrangian-dual objective with `τ` eliminated.
pub fn eval_f_iota(bf: &BeamformerState, eff: &EffectiveChannels, ch: &ChannelSet, iota: &[f64], sc: &Scenario) -> f64 {
    (0..bf.users())
        .map(|k| {
            let d = desired_amplitude(k, bf, eff).norm_sqr();
            let den = gamma_total(k, bf, eff, ch) + bf.combiners[k].norm_squared() * sc.noise_w;
            let frac = if den > 0.0 { (1.0 + iota[k]) * d / den } else { 0.0 };
            sc.weights()[k] * ((1.0 + iota[k]).log2() + (frac - iota[k]) / LN_2)
        })
        .sum()
}
