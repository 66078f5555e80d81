//! The transformed objective as an explicit function of the scattering matrix.
//!
//! Every received amplitude is affine in `Φ`: `c0 + u_kᴴ Φ v_i` with `u_k = H_ref,k* w_k`
//! and `v_i = H_ref,i−1 p_i`. Collecting terms gives
//! `f_τ(Φ) = const + 2 Re Tr(C Φ) − Tr(A Φ B Φᴴ)` with `C = C1 − C2 + C3 − C4`.

use std::f64::consts::LN_2;

use crate::channel::{next, prev, ChannelSet};
use crate::config::Scenario;
use crate::linalg::{trace_of_product, CMat, CVec, C64};
use crate::metrics::BeamformerState;
use crate::surrogate::SurrogateState;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFormCoefficients {
    pub a: CMat,
    pub b: CMat,
    /// Desired-signal term.
    pub c1: CMat,
    /// Cross term between residual self-interference and the loop channel.
    pub c2: CMat,
    /// Structural-scattering cross term, `B A` (zero without structural scattering).
    pub c3: CMat,
    /// Cross term between direct links and surface-assisted links.
    pub c4: CMat,
    /// Low-rank factors: `A = Σ_k a_k u_k u_kᴴ`.
    pub u: Vec<CVec>,
    pub a_weights: Vec<f64>,
    /// `B = Σ_i v_i v_iᴴ`.
    pub v: Vec<CVec>,
}

impl TraceFormCoefficients {
    pub fn elements(&self) -> usize {
        self.a.nrows()
    }

    /// `C1 − C2 + C3 − C4`.
    pub fn linear(&self) -> CMat {
        &self.c1 - &self.c2 + &self.c3 - &self.c4
    }

    /// `Tr(A Φ B Φᴴ)` through the low-rank factors.
    pub fn quadratic(&self, phi: &CMat) -> f64 {
        let pv: Vec<CVec> = self.v.iter().map(|v| phi * v).collect();
        let mut acc = 0.0;
        for (u, a) in self.u.iter().zip(&self.a_weights) {
            if *a == 0.0 {
                continue;
            }
            acc += a * pv.iter().map(|x| u.dotc(x).norm_sqr()).sum::<f64>();
        }
        acc
    }

    /// `2 Re Tr(C Φ) − Tr(A Φ B Φᴴ)`, equal to `f_τ(Φ)` up to a constant.
    pub fn value(&self, phi: &CMat) -> f64 {
        2.0 * trace_of_product(&self.linear(), phi).re - self.quadratic(phi)
    }
}

/// Builds the coefficients from the current beamformers and auxiliaries.
pub fn assemble_trace_form(
    bf: &BeamformerState,
    sur: &SurrogateState,
    ch: &ChannelSet,
    sc: &Scenario,
) -> TraceFormCoefficients {
    let users = bf.users();
    let m = ch.elements();
    let structural = sc.structural();
    let scale: Vec<f64> = sc.weights().iter().map(|a| a / LN_2).collect();

    let u: Vec<CVec> = (0..users)
        .map(|k| ch.h_ref[k].map(|z| z.conj()) * &bf.combiners[k])
        .collect();
    let v: Vec<CVec> = (0..users)
        .map(|i| &ch.h_ref[prev(i, users)] * &bf.precoders[i])
        .collect();
    let a_weights: Vec<f64> = (0..users).map(|k| scale[k] * sur.tau[k].norm_sqr()).collect();

    // Coefficient matrices X with C = Σ_{i,k} X[i,k] v_i u_kᴴ.
    let mut x1 = vec![vec![C64::new(0.0, 0.0); users]; users];
    let mut x2 = x1.clone();
    let mut x3 = x1.clone();
    let mut x4 = x1.clone();
    for k in 0..users {
        x1[k][k] = sur.tau[k].conj() * (scale[k] * (1.0 + sur.iota[k]).sqrt());
        let wk = &bf.combiners[k];
        for i in 0..users {
            let a = a_weights[k];
            if a == 0.0 {
                continue;
            }
            if i == next(k, users) {
                let c0 = wk.dotc(&(ch.h_si(k) * &bf.precoders[i]));
                x2[i][k] = c0.conj() * a;
            } else {
                let c0 = wk.dotc(&(ch.h_dir[k][prev(i, users)].transpose() * &bf.precoders[i]));
                x4[i][k] = c0.conj() * a;
            }
            if structural {
                x3[i][k] = v[i].dotc(&u[k]) * a;
            }
        }
    }
    let assemble = |x: &Vec<Vec<C64>>| -> CMat {
        let mut c = CMat::zeros(m, m);
        for (i, row) in x.iter().enumerate() {
            for (k, coef) in row.iter().enumerate() {
                if *coef != C64::new(0.0, 0.0) {
                    c += &v[i] * u[k].adjoint() * *coef;
                }
            }
        }
        c
    };
    let mut a = CMat::zeros(m, m);
    for (uk, ak) in u.iter().zip(&a_weights) {
        a += uk * uk.adjoint() * C64::new(*ak, 0.0);
    }
    let mut b = CMat::zeros(m, m);
    for vi in &v {
        b += vi * vi.adjoint();
    }
    TraceFormCoefficients {
        c1: assemble(&x1),
        c2: assemble(&x2),
        c3: assemble(&x3),
        c4: assemble(&x4),
        a,
        b,
        u,
        a_weights,
        v,
    }
}
