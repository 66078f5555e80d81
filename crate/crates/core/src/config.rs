//! Scenario description, unit conversions, validation and trial seeding.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Reference distance for path loss, in meters.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Diagonal,
    GroupConnected,
    FullyConnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reciprocity {
    Reciprocal,
    NonReciprocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Gauss-Seidel: each user sees the freshest values of the others.
    Sequential,
    /// All users of a block read a frozen snapshot.
    Jacobi,
}

impl FromStr for Connectivity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "diagonal" => Ok(Connectivity::Diagonal),
            "group_connected" | "group" => Ok(Connectivity::GroupConnected),
            "fully_connected" | "fully" | "full" => Ok(Connectivity::FullyConnected),
            other => Err(format!("unknown connectivity `{other}`")),
        }
    }
}

impl FromStr for Reciprocity {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "reciprocal" | "r" => Ok(Reciprocity::Reciprocal),
            "non_reciprocal" | "nonreciprocal" | "nr" => Ok(Reciprocity::NonReciprocal),
            other => Err(format!("unknown reciprocity `{other}`")),
        }
    }
}

impl FromStr for UpdateOrder {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sequential" | "gauss_seidel" => Ok(UpdateOrder::Sequential),
            "jacobi" => Ok(UpdateOrder::Jacobi),
            other => Err(format!("unknown update order `{other}`")),
        }
    }
}

impl Connectivity {
    pub fn as_str(self) -> &'static str {
        match self {
            Connectivity::Diagonal => "diagonal",
            Connectivity::GroupConnected => "group_connected",
            Connectivity::FullyConnected => "fully_connected",
        }
    }
}

impl Reciprocity {
    pub fn as_str(self) -> &'static str {
        match self {
            Reciprocity::Reciprocal => "reciprocal",
            Reciprocity::NonReciprocal => "non_reciprocal",
        }
    }
}

impl UpdateOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateOrder::Sequential => "sequential",
            UpdateOrder::Jacobi => "jacobi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RisArchitecture {
    pub elements: usize,
    pub group_size: usize,
    pub connectivity: Connectivity,
    pub reciprocity: Reciprocity,
}

impl RisArchitecture {
    pub fn fully_connected(elements: usize, reciprocity: Reciprocity) -> Self {
        RisArchitecture {
            elements,
            group_size: elements,
            connectivity: Connectivity::FullyConnected,
            reciprocity,
        }
    }

    pub fn group_connected(elements: usize, group_size: usize, reciprocity: Reciprocity) -> Self {
        RisArchitecture {
            elements,
            group_size,
            connectivity: Connectivity::GroupConnected,
            reciprocity,
        }
    }

    pub fn diagonal(elements: usize) -> Self {
        RisArchitecture {
            elements,
            group_size: 1,
            connectivity: Connectivity::Diagonal,
            reciprocity: Reciprocity::Reciprocal,
        }
    }

    /// Number of groups `G = M / M_g` (0 when the group size is invalid).
    pub fn groups(&self) -> usize {
        if self.group_size == 0 {
            0
        } else {
            self.elements / self.group_size
        }
    }

    pub fn is_reciprocal(&self) -> bool {
        self.reciprocity == Reciprocity::Reciprocal
    }

    /// Short arm label: `nr`, `r`, `d`, or `g<M_g>-nr` / `g<M_g>-r`.
    pub fn label(&self) -> String {
        let rec = if self.is_reciprocal() { "r" } else { "nr" };
        match self.connectivity {
            Connectivity::Diagonal => "d".to_string(),
            Connectivity::FullyConnected => rec.to_string(),
            Connectivity::GroupConnected => format!("g{}-{}", self.group_size, rec),
        }
    }

    /// Fully connected and diagonal surfaces imply their group size.
    fn sync_group_size(&mut self) {
        match self.connectivity {
            Connectivity::FullyConnected => self.group_size = self.elements,
            Connectivity::Diagonal => self.group_size = 1,
            Connectivity::GroupConnected => {}
        }
    }

    fn validate(&self) -> Result<Self> {
        let mut a = *self;
        if a.elements == 0 {
            return Err(Error::config("elements", "must be positive"));
        }
        if a.group_size == 0 {
            return Err(Error::config("group_size", "must be positive"));
        }
        if a.elements % a.group_size != 0 {
            return Err(Error::config("group_size", "group size must divide element count"));
        }
        match a.connectivity {
            Connectivity::Diagonal if a.group_size != 1 => {
                return Err(Error::config(
                    "group_size",
                    "diagonal connectivity requires group size 1",
                ));
            }
            Connectivity::FullyConnected if a.group_size != a.elements => {
                return Err(Error::config(
                    "group_size",
                    "fully connected requires group size equal to the element count",
                ));
            }
            _ => {}
        }
        if a.connectivity == Connectivity::Diagonal {
            a.reciprocity = Reciprocity::Reciprocal;
        }
        Ok(a)
    }
}

/// Per-run solver knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub bcd_max_iters: usize,
    pub bcd_rel_tol: f64,
    pub pdd_inner_max: usize,
    pub pdd_outer_max: usize,
    pub pdd_eps: f64,
    /// Initial penalty in units of the inverse curvature scale of the scattering objective.
    pub pdd_rho0: f64,
    pub pdd_scale: f64,
    /// Relative change of the augmented Lagrangian that ends an inner loop.
    pub pdd_inner_tol: f64,
    /// Initial constraint-gap threshold for taking a dual step.
    pub pdd_dual_tol0: f64,
    /// Factor applied to the observed gap to obtain the next dual-step threshold.
    pub pdd_dual_decay: f64,
    pub bisection_tol: f64,
    pub bisection_max_iters: usize,
    pub update_order: UpdateOrder,
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            bcd_max_iters: 50,
            bcd_rel_tol: 1e-4,
            pdd_inner_max: 50,
            pdd_outer_max: 200,
            pdd_eps: 1e-6,
            pdd_rho0: 1.0,
            pdd_scale: 0.8,
            pdd_inner_tol: 1e-8,
            pdd_dual_tol0: 1e-3,
            pdd_dual_decay: 0.9,
            bisection_tol: 1e-8,
            bisection_max_iters: 200,
            update_order: UpdateOrder::Sequential,
            restarts: 1,
        }
    }
}

mod kappa_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.trim().parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

/// Full experiment description in external units (degrees, dBm, meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub users: usize,
    pub antennas: usize,
    pub user_angles_deg: Vec<f64>,
    pub user_distances_m: Vec<f64>,
    pub ris: RisArchitecture,
    pub pathloss_ref_db: f64,
    pub exponent_ris: f64,
    pub exponent_direct: f64,
    #[serde(with = "kappa_serde")]
    pub rician_kappa: f64,
    /// User-side array departure angle, shared by all users.
    pub departure_angle_deg: f64,
    pub tx_power_dbm: Vec<f64>,
    pub noise_dbm: f64,
    /// Self-interference channel variance; `None` places the received SI at the noise floor.
    pub residual_si_gain: Option<f64>,
    pub weights: Vec<f64>,
    pub structural_scattering: bool,
    pub direct_links: bool,
    pub solver: SolverConfig,
    pub seed: u64,
    pub trials: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            users: 3,
            antennas: 1,
            user_angles_deg: vec![30.0, 90.0, 150.0],
            user_distances_m: vec![35.0; 3],
            ris: RisArchitecture::fully_connected(16, Reciprocity::NonReciprocal),
            pathloss_ref_db: -30.0,
            exponent_ris: 2.2,
            exponent_direct: 3.3,
            rician_kappa: 5.0,
            departure_angle_deg: 90.0,
            tx_power_dbm: vec![20.0; 3],
            noise_dbm: -80.0,
            residual_si_gain: None,
            weights: vec![1.0 / 3.0; 3],
            structural_scattering: false,
            direct_links: false,
            solver: SolverConfig::default(),
            seed: 1,
            trials: 20,
        }
    }
}

/// Validated scenario with derived quantities in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub groups: usize,
    pub angles_rad: Vec<f64>,
    pub departure_rad: f64,
    pub tx_power_w: Vec<f64>,
    pub noise_w: f64,
    /// Per-user self-interference channel variance.
    pub si_gain: Vec<f64>,
}

impl Scenario {
    pub fn users(&self) -> usize {
        self.config.users
    }
    pub fn antennas(&self) -> usize {
        self.config.antennas
    }
    pub fn elements(&self) -> usize {
        self.config.ris.elements
    }
    pub fn weights(&self) -> &[f64] {
        &self.config.weights
    }
    pub fn structural(&self) -> bool {
        self.config.structural_scattering
    }
    pub fn solver(&self) -> &SolverConfig {
        &self.config.solver
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Seed for one Monte-Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialSeed {
    pub trial_index: u64,
    pub derived_seed: u64,
}

/// Counter-based seed derivation: the counter step is odd, so `trial` maps to distinct
/// pre-images, and the splitmix64 finalizer is a bijection.
pub fn derive_trial_seed(seed: u64, trial: u64) -> TrialSeed {
    let mut z = seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    TrialSeed {
        trial_index: trial,
        derived_seed: z,
    }
}

fn check_list(field: &str, list: &mut Vec<f64>, k: usize, broadcast: bool) -> Result<()> {
    if broadcast && list.len() == 1 && k > 1 {
        *list = vec![list[0]; k];
    }
    if list.len() != k {
        return Err(Error::config(
            field,
            format!("expected {k} entries, found {}", list.len()),
        ));
    }
    Ok(())
}

impl ScenarioConfig {
    /// Checks every invariant and returns the scenario with derived fields.
    ///
    /// Single-entry distance and power lists are broadcast to all users, an empty weight
    /// list becomes uniform, and the reciprocity of a diagonal surface is normalized.
    pub fn validate(&self) -> Result<Scenario> {
        let mut c = self.clone();
        let k = c.users;
        if k < 2 {
            return Err(Error::config("users", "at least two users are required"));
        }
        if c.antennas == 0 {
            return Err(Error::config("antennas", "must be positive"));
        }
        c.ris = c.ris.validate()?;
        check_list("user_angles_deg", &mut c.user_angles_deg, k, false)?;
        for &a in &c.user_angles_deg {
            if !(a > 0.0 && a < 180.0) {
                return Err(Error::config("user_angles_deg", format!("angle {a} outside (0, 180)")));
            }
        }
        check_list("user_distances_m", &mut c.user_distances_m, k, true)?;
        for &d in &c.user_distances_m {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::config(
                    "user_distances_m",
                    format!("distance {d} must be positive"),
                ));
            }
        }
        check_list("tx_power_dbm", &mut c.tx_power_dbm, k, true)?;
        if let Some(p) = c
            .tx_power_dbm
            .iter()
            .find(|p| !p.is_finite() && **p != f64::NEG_INFINITY)
        {
            return Err(Error::config("tx_power_dbm", format!("power {p} must be finite")));
        }
        if !c.noise_dbm.is_finite() {
            return Err(Error::config("noise_dbm", "must be finite"));
        }
        for (name, v) in [
            ("pathloss_ref_db", c.pathloss_ref_db),
            ("exponent_ris", c.exponent_ris),
            ("exponent_direct", c.exponent_direct),
            ("departure_angle_deg", c.departure_angle_deg),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if !(c.rician_kappa >= 0.0) {
            return Err(Error::config("rician_kappa", "must be nonnegative"));
        }
        if let Some(g) = c.residual_si_gain {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::config("residual_si_gain", "must be finite and nonnegative"));
            }
        }
        if c.weights.is_empty() {
            c.weights = vec![1.0 / k as f64; k];
        }
        check_list("weights", &mut c.weights, k, false)?;
        if c.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::config("weights", "weights must be nonnegative"));
        }
        let sum: f64 = c.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config("weights", "weights must sum to 1"));
        }
        let s = &c.solver;
        if s.bcd_max_iters == 0 {
            return Err(Error::config("bcd_max_iters", "must be positive"));
        }
        if s.pdd_inner_max == 0 || s.pdd_outer_max == 0 {
            return Err(Error::config("pdd_outer_max", "iteration caps must be positive"));
        }
        if !(s.pdd_scale > 0.0 && s.pdd_scale < 1.0) {
            return Err(Error::config("pdd_scale", "must lie in (0, 1)"));
        }
        for (name, v) in [
            ("bcd_rel_tol", s.bcd_rel_tol),
            ("pdd_eps", s.pdd_eps),
            ("pdd_rho0", s.pdd_rho0),
            ("pdd_inner_tol", s.pdd_inner_tol),
            ("pdd_dual_tol0", s.pdd_dual_tol0),
            ("bisection_tol", s.bisection_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if !(s.pdd_dual_decay > 0.0 && s.pdd_dual_decay < 1.0) {
            return Err(Error::config("pdd_dual_decay", "must lie in (0, 1)"));
        }
        if s.bisection_max_iters == 0 {
            return Err(Error::config("bisection_max_iters", "must be positive"));
        }
        if s.restarts == 0 {
            return Err(Error::config("restarts", "must be positive"));
        }
        if c.trials == 0 {
            return Err(Error::config("trials", "must be positive"));
        }

        let tx_power_w: Vec<f64> = c.tx_power_dbm.iter().map(|&p| dbm_to_watts(p)).collect();
        let noise_w = dbm_to_watts(c.noise_dbm);
        let si_gain = match c.residual_si_gain {
            Some(g) => vec![g; k],
            None => tx_power_w
                .iter()
                .map(|&p| if p > 0.0 { noise_w / p } else { 0.0 })
                .collect(),
        };
        Ok(Scenario {
            groups: c.ris.groups(),
            angles_rad: c.user_angles_deg.iter().map(|a| a.to_radians()).collect(),
            departure_rad: c.departure_angle_deg.to_radians(),
            tx_power_w,
            noise_w,
            si_gain,
            config: c,
        })
    }

    /// Resizes per-user lists to `k` users: angles spread uniformly over (0, 180),
    /// distances and powers repeat the first entry, weights become uniform.
    pub fn with_users(&self, k: usize) -> ScenarioConfig {
        let mut c = self.clone();
        c.users = k;
        c.user_angles_deg = (0..k).map(|i| 180.0 * (i as f64 + 0.5) / k as f64).collect();
        let d = self.user_distances_m.first().copied().unwrap_or(35.0);
        let p = self.tx_power_dbm.first().copied().unwrap_or(20.0);
        c.user_distances_m = vec![d; k];
        c.tx_power_dbm = vec![p; k];
        c.weights = vec![1.0 / k as f64; k];
        c
    }

    /// Replaces the surface architecture, keeping the element count.
    pub fn with_architecture(&self, ris: RisArchitecture) -> ScenarioConfig {
        let mut c = self.clone();
        c.ris = ris;
        c
    }

    /// Parses `key = value` text (or a JSON document) on top of the defaults.
    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let v: serde_json::Value = serde_json::from_str(text)?;
            let inner = v.get("config").cloned().unwrap_or(v);
            return Ok(serde_json::from_value(inner)?);
        }
        let mut c = ScenarioConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected `key = value`, found `{line}`"),
            })?;
            c.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config { field, reason } => Error::Parse {
                    line: i + 1,
                    reason: format!("{field}: {reason}"),
                },
                other => other,
            })?;
        }
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path)?;
        ScenarioConfig::parse(&text)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.solver;
        match key {
            "users" => {
                let k = parse_int(key, value)?;
                if k != self.users {
                    *self = self.with_users(k);
                }
            }
            "antennas" => self.antennas = parse_int(key, value)?,
            "user_angles_deg" => self.user_angles_deg = parse_list(key, value)?,
            "user_distances_m" => self.user_distances_m = parse_list(key, value)?,
            "elements" => {
                self.ris.elements = parse_int(key, value)?;
                self.ris.sync_group_size();
            }
            "group_size" => self.ris.group_size = parse_int(key, value)?,
            "connectivity" => {
                self.ris.connectivity = value.parse().map_err(|e| Error::config(key, e))?;
                self.ris.sync_group_size();
            }
            "reciprocity" => self.ris.reciprocity = value.parse().map_err(|e| Error::config(key, e))?,
            "pathloss_ref_db" => self.pathloss_ref_db = parse_num(key, value)?,
            "exponent_ris" => self.exponent_ris = parse_num(key, value)?,
            "exponent_direct" => self.exponent_direct = parse_num(key, value)?,
            "rician_kappa" => self.rician_kappa = parse_num(key, value)?,
            "departure_angle_deg" => self.departure_angle_deg = parse_num(key, value)?,
            "tx_power_dbm" => self.tx_power_dbm = parse_list(key, value)?,
            "noise_dbm" => self.noise_dbm = parse_num(key, value)?,
            "residual_si_gain" => {
                self.residual_si_gain = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "weights" => self.weights = parse_list(key, value)?,
            "structural_scattering" => self.structural_scattering = parse_bool(key, value)?,
            "direct_links" => self.direct_links = parse_bool(key, value)?,
            "bcd_max_iters" => s.bcd_max_iters = parse_int(key, value)?,
            "bcd_rel_tol" => s.bcd_rel_tol = parse_num(key, value)?,
            "pdd_inner_max" => s.pdd_inner_max = parse_int(key, value)?,
            "pdd_outer_max" => s.pdd_outer_max = parse_int(key, value)?,
            "pdd_eps" => s.pdd_eps = parse_num(key, value)?,
            "pdd_rho0" => s.pdd_rho0 = parse_num(key, value)?,
            "pdd_scale" => s.pdd_scale = parse_num(key, value)?,
            "pdd_inner_tol" => s.pdd_inner_tol = parse_num(key, value)?,
            "pdd_dual_tol0" => s.pdd_dual_tol0 = parse_num(key, value)?,
            "pdd_dual_decay" => s.pdd_dual_decay = parse_num(key, value)?,
            "bisection_tol" => s.bisection_tol = parse_num(key, value)?,
            "bisection_max_iters" => s.bisection_max_iters = parse_int(key, value)?,
            "update_order" => s.update_order = value.parse().map_err(|e| Error::config(key, e))?,
            "restarts" => s.restarts = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "trials" => self.trials = parse_int(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Serializes to the `key = value` format accepted by [`ScenarioConfig::parse`].
    pub fn to_kv_string(&self) -> String {
        let s = &self.solver;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("users", self.users.to_string());
        put("antennas", self.antennas.to_string());
        put("user_angles_deg", join(&self.user_angles_deg));
        put("user_distances_m", join(&self.user_distances_m));
        put("elements", self.ris.elements.to_string());
        put("group_size", self.ris.group_size.to_string());
        put("connectivity", self.ris.connectivity.as_str().into());
        put("reciprocity", self.ris.reciprocity.as_str().into());
        put("pathloss_ref_db", self.pathloss_ref_db.to_string());
        put("exponent_ris", self.exponent_ris.to_string());
        put("exponent_direct", self.exponent_direct.to_string());
        put("rician_kappa", self.rician_kappa.to_string());
        put("departure_angle_deg", self.departure_angle_deg.to_string());
        put("tx_power_dbm", join(&self.tx_power_dbm));
        put("noise_dbm", self.noise_dbm.to_string());
        put(
            "residual_si_gain",
            self.residual_si_gain.map_or("auto".into(), |g| g.to_string()),
        );
        put("weights", join(&self.weights));
        put("structural_scattering", self.structural_scattering.to_string());
        put("direct_links", self.direct_links.to_string());
        put("bcd_max_iters", s.bcd_max_iters.to_string());
        put("bcd_rel_tol", s.bcd_rel_tol.to_string());
        put("pdd_inner_max", s.pdd_inner_max.to_string());
        put("pdd_outer_max", s.pdd_outer_max.to_string());
        put("pdd_eps", s.pdd_eps.to_string());
        put("pdd_rho0", s.pdd_rho0.to_string());
        put("pdd_scale", s.pdd_scale.to_string());
        put("pdd_inner_tol", s.pdd_inner_tol.to_string());
        put("pdd_dual_tol0", s.pdd_dual_tol0.to_string());
        put("pdd_dual_decay", s.pdd_dual_decay.to_string());
        put("bisection_tol", s.bisection_tol.to_string());
        put("bisection_max_iters", s.bisection_max_iters.to_string());
        put("update_order", s.update_order.as_str().into());
        put("restarts", s.restarts.to_string());
        put("seed", self.seed.to_string());
        put("trials", self.trials.to_string());
        out
    }

    /// Git-style content hash (`blob <len>\0<bytes>`) of the canonical text form.
    pub fn content_hash(&self) -> String {
        content_hash(self.to_kv_string().as_bytes())
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Parses a number, accepting `a/b` fractions.
pub fn parse_number(text: &str) -> std::result::Result<f64, String> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("bad number `{t}`"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("bad number `{t}`"))?;
        return Ok(a / b);
    }
    t.parse().map_err(|_| format!("bad number `{t}`"))
}

fn parse_num(key: &str, v: &str) -> Result<f64> {
    parse_number(v).map_err(|e| Error::config(key, e))
}

fn parse_int<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(key, format!("bad integer `{}`", v.trim())))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_num(key, x)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(Error::config(key, format!("bad boolean `{other}`"))),
    }
}
