#![allow(dead_code)]

use circulator_core::channel::effective_channels;
use circulator_core::linalg::{
    block_diag, complex_gaussian, complex_gaussian_vec, hermitian_part, random_symmetric_unitary, random_unitary,
};
use circulator_core::{
    BeamformerState, CMat, CVec, ChannelSet, Connectivity, EffectiveChannels, Reciprocity, RisArchitecture, Scenario,
    ScenarioConfig, SurrogateState, C64,
};
use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit path loss at 1 m, 0 dBm transmitters and −10 dBm noise, so every term of the
/// objective is of order one and relative tolerances are meaningful.
pub fn unit_config(users: usize, antennas: usize, ris: RisArchitecture) -> ScenarioConfig {
    let angles: Vec<f64> = (0..users)
        .map(|k| 25.0 + 130.0 * k as f64 / (users - 1).max(1) as f64)
        .collect();
    ScenarioConfig {
        users,
        antennas,
        user_angles_deg: angles,
        user_distances_m: vec![1.0; users],
        ris,
        pathloss_ref_db: 0.0,
        tx_power_dbm: vec![0.0; users],
        noise_dbm: -10.0,
        weights: vec![1.0 / users as f64; users],
        ..ScenarioConfig::default()
    }
}

pub fn scenario(cfg: &ScenarioConfig) -> Scenario {
    cfg.validate().expect("valid scenario")
}

/// The six surface classes: fully-, group- and single-connected, each with both symmetry classes.
pub fn architecture_classes(m: usize) -> Vec<RisArchitecture> {
    let g = if m % 2 == 0 { m / 2 } else { 1 };
    vec![
        RisArchitecture::fully_connected(m, Reciprocity::NonReciprocal),
        RisArchitecture::fully_connected(m, Reciprocity::Reciprocal),
        RisArchitecture::group_connected(m, g, Reciprocity::NonReciprocal),
        RisArchitecture::group_connected(m, g, Reciprocity::Reciprocal),
        RisArchitecture {
            elements: m,
            group_size: 1,
            connectivity: Connectivity::GroupConnected,
            reciprocity: Reciprocity::NonReciprocal,
        },
        RisArchitecture::diagonal(m),
    ]
}

pub fn random_feasible_phi<R: Rng>(ris: &RisArchitecture, rng: &mut R) -> CMat {
    let blocks: Vec<CMat> = (0..ris.elements / ris.group_size)
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

pub fn random_phase<R: Rng>(rng: &mut R) -> C64 {
    C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Random precoders inside the power budgets and random unit combiners.
pub fn random_beamformers<R: Rng>(sc: &Scenario, rng: &mut R) -> BeamformerState {
    let (k, n) = (sc.users(), sc.antennas());
    let mut bf = BeamformerState::zeros(k, n);
    for i in 0..k {
        let budget = sc.tx_power_w[(i + k - 1) % k];
        let p = complex_gaussian_vec(rng, n, 1.0);
        let frac: f64 = rng.random_range(0.2..1.0);
        bf.precoders[i] = &p * C64::new((budget * frac).sqrt() / p.norm(), 0.0);
        let w = complex_gaussian_vec(rng, n, 1.0);
        bf.combiners[i] = &w / C64::new(w.norm(), 0.0);
    }
    bf
}

/// Auxiliaries near their optimal values: `ι` random positive, `τ` the optimal value for
/// that `ι` times a random complex factor.
pub fn random_surrogate<R: Rng>(
    sc: &Scenario,
    bf: &BeamformerState,
    eff: &EffectiveChannels,
    ch: &ChannelSet,
    rng: &mut R,
) -> SurrogateState {
    let iota: Vec<f64> = (0..sc.users()).map(|_| rng.random_range(0.0..3.0)).collect();
    let tau = circulator_core::surrogate::update_tau(bf, eff, ch, &iota, sc)
        .into_iter()
        .map(|t| t * random_phase(rng) * rng.random_range(0.5..1.5))
        .collect();
    SurrogateState { iota, tau }
}

pub struct Instance {
    pub sc: Scenario,
    pub ch: ChannelSet,
    pub phi: CMat,
    pub bf: BeamformerState,
    pub sur: SurrogateState,
    pub eff: EffectiveChannels,
}

pub fn random_instance(cfg: &ScenarioConfig, seed: u64) -> Instance {
    let sc = scenario(cfg);
    let mut r = rng(seed);
    let ch = ChannelSet::sample_with(&sc, &mut r).expect("channels");
    let phi = random_feasible_phi(&sc.config.ris, &mut r);
    let eff = effective_channels(&ch, &phi, sc.structural()).expect("effective channels");
    let bf = random_beamformers(&sc, &mut r);
    let sur = random_surrogate(&sc, &bf, &eff, &ch, &mut r);
    Instance {
        sc,
        ch,
        phi,
        bf,
        sur,
        eff,
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Central-difference gradient `∂f/∂Re x_j + i ∂f/∂Im x_j`.
pub fn fd_gradient(x: &CVec, h: f64, f: impl Fn(&CVec) -> f64) -> CVec {
    CVec::from_iterator(
        x.len(),
        (0..x.len()).map(|j| {
            let d = |dir: C64| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[j] += dir * h;
                b[j] -= dir * h;
                (f(&a) - f(&b)) / (2.0 * h)
            };
            C64::new(d(C64::new(1.0, 0.0)), d(C64::new(0.0, 1.0)))
        }),
    )
}

/// Hermitian block-diagonal direction matching the architecture's group structure.
pub fn random_direction<R: Rng>(ris: &RisArchitecture, r: &mut R) -> CMat {
    let blocks: Vec<CMat> = (0..ris.groups())
        .map(|_| {
            let g = complex_gaussian(r, ris.group_size, ris.group_size, 1.0);
            hermitian_part(&g)
        })
        .collect();
    block_diag(&blocks)
}

pub fn expi(s: &CMat, t: f64) -> CMat {
    let e = SymmetricEigen::new(s.clone());
    let d = CVec::from_iterator(
        e.eigenvalues.len(),
        e.eigenvalues.iter().map(|l| C64::from_polar(1.0, t * l)),
    );
    &e.eigenvectors * CMat::from_diagonal(&d) * e.eigenvectors.adjoint()
}

/// Feasible curve through `phi`: `e^{itS} Φ`, or `e^{itS} Φ e^{itSᵀ}` when symmetric.
pub fn curve(phi: &CMat, s: &CMat, t: f64, reciprocal: bool) -> CMat {
    let l = expi(s, t);
    if reciprocal {
        &l * phi * l.transpose()
    } else {
        l * phi
    }
}
