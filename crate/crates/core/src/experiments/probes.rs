//! Structural-scattering diagnostics for single-antenna line-of-sight links.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

/// `|Σ_{n=0}^{M−1} exp(j n π (cos θ1 + cos θ2))|`, the magnitude of `h_kᵀ h_{k−1}` for
/// unit-magnitude line-of-sight channels.
pub fn structural_scattering_probe(theta1: f64, theta2: f64, elements: usize) -> f64 {
    // The phase is reduced modulo 2π so that large element counts keep full precision.
    let u = (theta1.cos() + theta2.cos()) / 2.0;
    let x = 2.0 * PI * (u - u.round());
    let mut acc = C64::new(0.0, 0.0);
    for n in 0..elements {
        acc += C64::from_polar(1.0, n as f64 * x);
    }
    acc.norm()
}

/// Upper bound `(‖h_k‖ ‖h_{k−1}‖ + |h_kᵀ h_{k−1}|)²` on `|h_kᵀ (Φ − I) h_{k−1}|²` over unitary `Φ`.
pub fn channel_strength_bound(h_k: &CVec, h_km1: &CVec) -> f64 {
    let s = h_k.norm() * h_km1.norm() + h_k.dot(h_km1).norm();
    s * s
}

/// `|h_kᵀ (Φ − I) h_{k−1}|²`.
pub fn channel_strength(h_k: &CVec, h_km1: &CVec, phi: &CMat) -> f64 {
    let t = phi * h_km1 - h_km1;
    h_k.dot(&t).norm_sqr()
}

/// A unitary scattering matrix attaining [`channel_strength_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityConditionFixture {
    pub h_pair: (CVec, CVec),
    pub beta: C64,
    pub phi_constructed: CMat,
}

/// Unitary whose first column is the unit vector `x`.
fn complete_basis(x: &CVec) -> CMat {
    let m = x.len();
    let mut basis: Vec<CVec> = vec![x.clone()];
    for e in 0..m {
        if basis.len() == m {
            break;
        }
        let mut v = CVec::zeros(m);
        v[e] = C64::new(1.0, 0.0);
        // Two Gram-Schmidt passes keep the completion orthonormal to machine precision.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / C64::new(n, 0.0));
        }
    }
    CMat::from_columns(&basis)
}

/// Builds `Φ` sending `h_{k−1}/‖h_{k−1}‖` to `β h_k*/‖h_k‖`, with `β` chosen so the
/// reflected and structural terms add in phase.
pub fn build_equality_fixture(h_km1: &CVec, h_k: &CVec) -> Result<EqualityConditionFixture> {
    if h_k.len() != h_km1.len() || h_k.is_empty() {
        return Err(Error::Shape("channel vectors must have equal nonzero length".into()));
    }
    let (nk, nkm1) = (h_k.norm(), h_km1.norm());
    if nk == 0.0 || nkm1 == 0.0 {
        return Err(Error::InvalidArgument("channel vectors must be nonzero".into()));
    }
    let cross = h_k.dot(h_km1);
    let beta = if cross.norm() > 0.0 {
        -cross / cross.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let x = h_km1 / C64::new(nkm1, 0.0);
    let y = h_k.map(|z| z.conj()) * (beta / nk);
    let phi = complete_basis(&y) * complete_basis(&x).adjoint();
    Ok(EqualityConditionFixture {
        h_pair: (h_km1.clone(), h_k.clone()),
        beta,
        phi_constructed: phi,
    })
}
