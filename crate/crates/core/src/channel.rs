//! Channel synthesis and composition of the effective channels.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{db_to_linear, Scenario, TrialSeed, REFERENCE_DISTANCE_M};
use crate::error::{Error, Result};
use crate::linalg::{cis, complex_gaussian, CMat, CVec, C64};

/// One realization of every channel in the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `h_ref[k]`: user `k` to the surface, `M x N`.
    pub h_ref: Vec<CMat>,
    /// `h_dir[k][i]`: user `i` to user `k`, `N x N`; the diagonal holds self-interference.
    pub h_dir: Vec<Vec<CMat>>,
}

/// Effective end-to-end channels for a given scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannels {
    /// `h_tilde[k][i]`: transmitter `i` to receiver `k`.
    pub h_tilde: Vec<Vec<CMat>>,
    /// `h_bar[k]`: loop channel of user `k` through the surface.
    pub h_bar: Vec<CMat>,
}

#[inline]
pub fn next(k: usize, users: usize) -> usize {
    (k + 1) % users
}

#[inline]
pub fn prev(k: usize, users: usize) -> usize {
    (k + users - 1) % users
}

/// Unit-norm ULA steering vector, entry `n` equal to `exp(j pi n cos(theta)) / sqrt(L)`.
pub fn steering_vector(theta: f64, len: usize) -> Result<CVec> {
    if len == 0 {
        return Err(Error::InvalidArgument("steering vector length must be positive".into()));
    }
    let s = 1.0 / (len as f64).sqrt();
    let c = theta.cos();
    Ok(CVec::from_fn(len, |n, _| cis(std::f64::consts::PI * n as f64 * c) * s))
}

pub fn path_loss_linear(d: f64, exponent: f64, zeta0_db: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("distance {d} must be positive")));
    }
    Ok(db_to_linear(zeta0_db) * (d / REFERENCE_DISTANCE_M).powf(-exponent))
}

/// Distance between users `k` and `i` from their polar positions around the surface.
pub fn user_separation(sc: &Scenario, k: usize, i: usize) -> f64 {
    let c = &sc.config;
    let (dk, di) = (c.user_distances_m[k], c.user_distances_m[i]);
    let (tk, ti) = (sc.angles_rad[k], sc.angles_rad[i]);
    let dx = dk * tk.cos() - di * ti.cos();
    let dy = dk * tk.sin() - di * ti.sin();
    (dx * dx + dy * dy).sqrt()
}

/// Unit-magnitude line-of-sight matrix `sqrt(MN) a_M(theta) a_N(theta')^T`.
pub fn los_matrix(theta: f64, departure: f64, m: usize, n: usize) -> Result<CMat> {
    let a = steering_vector(theta, m)?;
    let b = steering_vector(departure, n)?;
    Ok(&a * b.transpose() * C64::new(((m * n) as f64).sqrt(), 0.0))
}

/// Rician surface-to-user channel of user `k`.
pub fn sample_ris_user_channel<R: Rng + ?Sized>(sc: &Scenario, k: usize, rng: &mut R) -> Result<CMat> {
    let c = &sc.config;
    let (m, n) = (c.ris.elements, c.antennas);
    let pl = path_loss_linear(c.user_distances_m[k], c.exponent_ris, c.pathloss_ref_db)?;
    let los = los_matrix(sc.angles_rad[k], sc.departure_rad, m, n)?;
    // Always draw the diffuse part so the random stream does not depend on kappa.
    let w = complex_gaussian(rng, m, n, 1.0);
    let kappa = c.rician_kappa;
    let (a_los, a_nlos) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    };
    Ok((los * C64::new(a_los, 0.0) + w * C64::new(a_nlos, 0.0)) * C64::new(pl.sqrt(), 0.0))
}

/// Rayleigh direct channel from user `i` to user `k`; zero when direct links are off.
pub fn sample_direct_channel<R: Rng + ?Sized>(sc: &Scenario, k: usize, i: usize, rng: &mut R) -> Result<CMat> {
    let c = &sc.config;
    let n = c.antennas;
    if k == i {
        return Err(Error::InvalidArgument("direct channel needs distinct users".into()));
    }
    let w = complex_gaussian(rng, n, n, 1.0);
    if !c.direct_links {
        return Ok(CMat::zeros(n, n));
    }
    // Co-located users would give infinite gain; clamp to the reference distance.
    let d = user_separation(sc, k, i).max(REFERENCE_DISTANCE_M);
    let pl = path_loss_linear(d, c.exponent_direct, c.pathloss_ref_db)?;
    Ok(w * C64::new(pl.sqrt(), 0.0))
}

/// Residual self-interference channel of user `k`.
pub fn sample_si_channel<R: Rng + ?Sized>(sc: &Scenario, k: usize, rng: &mut R) -> CMat {
    let n = sc.antennas();
    complex_gaussian(rng, n, n, sc.si_gain[k])
}

impl ChannelSet {
    pub fn sample(sc: &Scenario, seed: TrialSeed) -> Result<ChannelSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.derived_seed);
        ChannelSet::sample_with(sc, &mut rng)
    }

    /// Draws surface channels for all users, then direct pairs `k < i`, then SI.
    ///
    /// Direct links are reciprocal: `h_dir[i][k] = h_dir[k][i]^T`.
    pub fn sample_with<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> Result<ChannelSet> {
        let k_users = sc.users();
        let n = sc.antennas();
        let h_ref = (0..k_users)
            .map(|k| sample_ris_user_channel(sc, k, rng))
            .collect::<Result<Vec<_>>>()?;
        let mut h_dir = vec![vec![CMat::zeros(n, n); k_users]; k_users];
        for k in 0..k_users {
            for i in (k + 1)..k_users {
                let h = sample_direct_channel(sc, k, i, rng)?;
                h_dir[i][k] = h.transpose();
                h_dir[k][i] = h;
            }
        }
        for (k, row) in h_dir.iter_mut().enumerate() {
            row[k] = sample_si_channel(sc, k, rng);
        }
        Ok(ChannelSet { h_ref, h_dir })
    }

    pub fn users(&self) -> usize {
        self.h_ref.len()
    }

    pub fn elements(&self) -> usize {
        self.h_ref.first().map_or(0, |h| h.nrows())
    }

    pub fn antennas(&self) -> usize {
        self.h_ref.first().map_or(0, |h| h.ncols())
    }

    pub fn h_si(&self, k: usize) -> &CMat {
        &self.h_dir[k][k]
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (k, m, n) = (self.users(), self.elements(), self.antennas());
        if self.h_ref.iter().any(|h| h.shape() != (m, n)) {
            return Err(Error::Shape("surface channels differ in shape".into()));
        }
        if self.h_dir.len() != k
            || self
                .h_dir
                .iter()
                .any(|r| r.len() != k || r.iter().any(|h| h.shape() != (n, n)))
        {
            return Err(Error::Shape(format!(
                "direct channels must be {k}x{k} blocks of {n}x{n}"
            )));
        }
        Ok(())
    }

    /// Text dump: a `matrix <name> <rows> <cols>` header followed by rows of `re im` pairs.
    pub fn to_dump(&self) -> String {
        let mut out = String::from("# channel dump v1\n");
        let mut put = |name: String, m: &CMat| {
            let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .map(|c| format!("{:e} {:e}", m[(r, c)].re, m[(r, c)].im))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        for (k, h) in self.h_ref.iter().enumerate() {
            put(format!("h_ref.{k}"), h);
        }
        for (k, row) in self.h_dir.iter().enumerate() {
            for (i, h) in row.iter().enumerate() {
                put(format!("h_dir.{k}.{i}"), h);
            }
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<ChannelSet> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let mut h_ref: Vec<CMat> = Vec::new();
        let mut dir: Vec<(usize, usize, CMat)> = Vec::new();
        let bad = |line: usize, reason: &str| Error::Parse {
            line: line + 1,
            reason: reason.to_string(),
        };
        while let Some((ln, header)) = lines.next() {
            let parts: Vec<&str> = header.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "matrix" {
                return Err(bad(ln, "expected matrix header"));
            }
            let rows: usize = parts[2].parse().map_err(|_| bad(ln, "bad row count"))?;
            let cols: usize = parts[3].parse().map_err(|_| bad(ln, "bad column count"))?;
            let mut m = CMat::zeros(rows, cols);
            for r in 0..rows {
                let (ln, row) = lines.next().ok_or_else(|| bad(ln, "truncated matrix"))?;
                let vals: Vec<f64> = row
                    .split_whitespace()
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(ln, "bad number"))?;
                if vals.len() != 2 * cols {
                    return Err(bad(ln, "wrong number of entries"));
                }
                for c in 0..cols {
                    m[(r, c)] = C64::new(vals[2 * c], vals[2 * c + 1]);
                }
            }
            let name: Vec<&str> = parts[1].split('.').collect();
            match name.as_slice() {
                ["h_ref", k] => {
                    let k: usize = k.parse().map_err(|_| bad(ln, "bad index"))?;
                    if k != h_ref.len() {
                        return Err(bad(ln, "surface channels out of order"));
                    }
                    h_ref.push(m);
                }
                ["h_dir", k, i] => {
                    let k = k.parse().map_err(|_| bad(ln, "bad index"))?;
                    let i = i.parse().map_err(|_| bad(ln, "bad index"))?;
                    dir.push((k, i, m));
                }
                _ => return Err(bad(ln, "unknown matrix name")),
            }
        }
        let k_users = h_ref.len();
        let n = h_ref.first().map_or(0, |h| h.ncols());
        let mut h_dir = vec![vec![CMat::zeros(n, n); k_users]; k_users];
        for (k, i, m) in dir {
            if k >= k_users || i >= k_users {
                return Err(Error::Shape("direct channel index out of range".into()));
            }
            h_dir[k][i] = m;
        }
        let set = ChannelSet { h_ref, h_dir };
        set.check_shapes()?;
        Ok(set)
    }
}

impl EffectiveChannels {
    /// `H_SI,k + H̄_k`, the combined self-interference and loop channel of user `k`.
    pub fn loop_channel(&self, ch: &ChannelSet, k: usize) -> CMat {
        ch.h_si(k) + &self.h_bar[k]
    }

    /// Channel carrying the desired stream into user `k`.
    pub fn desired(&self, k: usize) -> &CMat {
        &self.h_tilde[k][prev(k, self.h_bar.len())]
    }
}

/// Composes `H̃_{k,i} = H_dir,k,iᵀ + H_ref,kᵀ (Φ − I) H_ref,i` and `H̄_k = H_ref,kᵀ (Φ − I) H_ref,k`.
///
/// With `structural = false` the `− I` is dropped.
pub fn effective_channels(ch: &ChannelSet, phi: &CMat, structural: bool) -> Result<EffectiveChannels> {
    let m = ch.elements();
    if phi.shape() != (m, m) {
        return Err(Error::Shape(format!(
            "scattering matrix must be {m}x{m}, got {:?}",
            phi.shape()
        )));
    }
    ch.check_shapes()?;
    let mut t = phi.clone();
    if structural {
        for d in 0..m {
            t[(d, d)] -= C64::new(1.0, 0.0);
        }
    }
    let k_users = ch.users();
    let scattered: Vec<CMat> = ch.h_ref.iter().map(|h| &t * h).collect();
    let mut h_tilde = Vec::with_capacity(k_users);
    let mut h_bar = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let hk_t = ch.h_ref[k].transpose();
        let mut row = Vec::with_capacity(k_users);
        for (i, s) in scattered.iter().enumerate() {
            let cascaded = &hk_t * s;
            if i == k {
                h_bar.push(cascaded.clone());
                // The diagonal of h_tilde is never a communication link; keep the
                // cascaded term only, without the self-interference channel.
                row.push(cascaded);
            } else {
                row.push(ch.h_dir[k][i].transpose() + cascaded);
            }
        }
        h_tilde.push(row);
    }
    Ok(EffectiveChannels { h_tilde, h_bar })
}
