//! Parameter sweeps over architectures and Monte-Carlo trials.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::table::{Cell, Table};
use crate::channel::{next, ChannelSet};
use crate::config::{derive_trial_seed, Reciprocity, RisArchitecture, Scenario, ScenarioConfig};
use crate::driver::{run_with, OptimizerReport, RunOptions};
use crate::error::{Error, Result};
use crate::metrics::{beampatterns, default_beampattern_grid, peak_angle, Beampattern};
use crate::scattering::PddTraceRow;
use crate::stats::{mean, std_err};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Elements,
    MovingUser,
    GroupSize,
    Antennas,
    Users,
    RateRegion,
    Beampatterns,
    SecurityPower,
    Convergence,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Elements,
        Experiment::MovingUser,
        Experiment::GroupSize,
        Experiment::Antennas,
        Experiment::Users,
        Experiment::RateRegion,
        Experiment::Beampatterns,
        Experiment::SecurityPower,
        Experiment::Convergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Elements => "elements",
            Experiment::MovingUser => "moving_user",
            Experiment::GroupSize => "group_size",
            Experiment::Antennas => "antennas",
            Experiment::Users => "users",
            Experiment::RateRegion => "rate_region",
            Experiment::Beampatterns => "beampatterns",
            Experiment::SecurityPower => "security_power",
            Experiment::Convergence => "convergence",
        }
    }

    /// Whether swept values must be positive integers.
    fn integer_values(self) -> bool {
        !matches!(self, Experiment::MovingUser | Experiment::SecurityPower)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment `{s}`")))
    }
}

/// One architecture arm of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Arm {
    NonReciprocal,
    Reciprocal,
    Diagonal,
    Group { size: usize, reciprocal: bool },
}

impl Arm {
    pub fn label(&self) -> String {
        match self {
            Arm::NonReciprocal => "nr".into(),
            Arm::Reciprocal => "r".into(),
            Arm::Diagonal => "d".into(),
            Arm::Group { size, reciprocal } => format!("g{size}-{}", if *reciprocal { "r" } else { "nr" }),
        }
    }

    fn reciprocity(&self) -> Reciprocity {
        match self {
            Arm::NonReciprocal | Arm::Group { reciprocal: false, .. } => Reciprocity::NonReciprocal,
            _ => Reciprocity::Reciprocal,
        }
    }

    /// Architecture for `elements` elements; `group_size` replaces the group size of
    /// fully- and group-connected arms (used by the group-size sweep).
    pub fn architecture(&self, elements: usize, group_size: Option<usize>) -> RisArchitecture {
        match (self, group_size) {
            (Arm::Diagonal, _) => RisArchitecture::diagonal(elements),
            (_, Some(g)) => RisArchitecture::group_connected(elements, g, self.reciprocity()),
            (Arm::Group { size, .. }, None) => RisArchitecture::group_connected(elements, *size, self.reciprocity()),
            (_, None) => RisArchitecture::fully_connected(elements, self.reciprocity()),
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Arm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "nr" => return Ok(Arm::NonReciprocal),
            "r" => return Ok(Arm::Reciprocal),
            "d" => return Ok(Arm::Diagonal),
            _ => {}
        }
        let bad = || {
            Error::InvalidArgument(format!(
                "unknown arm `{s}` (expected nr, r, d, g<size>-nr or g<size>-r)"
            ))
        };
        let rest = t.strip_prefix('g').ok_or_else(bad)?;
        let (size, rec) = rest.split_once('-').ok_or_else(bad)?;
        let size: usize = size.parse().map_err(|_| bad())?;
        let reciprocal = match rec {
            "r" => true,
            "nr" => false,
            _ => return Err(bad()),
        };
        Ok(Arm::Group { size, reciprocal })
    }
}

impl From<Arm> for String {
    fn from(a: Arm) -> String {
        a.label()
    }
}

impl TryFrom<String> for Arm {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

pub fn parse_arms(list: &str) -> Result<Vec<Arm>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Uniform barycentric grid on the weight simplex with the given step.
pub fn weight_grid(users: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidArgument(format!("weight step {step} must lie in (0, 1]")));
    }
    let n = (1.0 / step).round() as usize;
    if ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("weight step {step} must divide 1")));
    }
    fn rec(left: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            rec(left - c, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut counts = Vec::new();
    rec(n, users, &mut Vec::new(), &mut counts);
    Ok(counts
        .into_iter()
        .map(|c| c.into_iter().map(|x| x as f64 / n as f64).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub experiment: Experiment,
    pub swept_values: Vec<f64>,
    /// `key = value` overrides applied on top of the base configuration.
    pub fixed_overrides: Vec<(String, String)>,
    pub trials: usize,
    pub arms: Vec<Arm>,
    /// Step of the weight grid (rate region).
    pub weight_step: f64,
    /// User whose angle moves (moving-user sweep); defaults to the last user.
    pub moving_user: Option<usize>,
}

impl SweepSpec {
    /// Default values and arms for an experiment, given the base configuration.
    pub fn new(experiment: Experiment, base: &ScenarioConfig) -> SweepSpec {
        let m = base.ris.elements as f64;
        let three = vec![Arm::NonReciprocal, Arm::Reciprocal, Arm::Diagonal];
        let (values, arms) = match experiment {
            Experiment::Elements => (vec![8.0, 16.0, 24.0, 32.0], three),
            Experiment::MovingUser => ((1..180).map(f64::from).collect(), three),
            Experiment::GroupSize => (
                [1usize, 2, 4, 8, 16, 32, 64]
                    .into_iter()
                    .filter(|g| base.ris.elements % g == 0 && *g <= base.ris.elements)
                    .map(|g| g as f64)
                    .collect(),
                vec![Arm::NonReciprocal, Arm::Reciprocal],
            ),
            Experiment::Antennas => (vec![1.0, 2.0, 3.0, 4.0], three),
            Experiment::Users => (vec![2.0, 3.0, 4.0, 5.0, 6.0], three),
            Experiment::RateRegion => (Vec::new(), three),
            Experiment::Beampatterns => (vec![m], three),
            Experiment::SecurityPower => (vec![10.0, 20.0, 30.0, 40.0], three),
            Experiment::Convergence => (vec![m], three),
        };
        SweepSpec {
            experiment,
            swept_values: values,
            fixed_overrides: Vec::new(),
            trials: if experiment == Experiment::Beampatterns {
                1
            } else {
                base.trials
            },
            arms,
            weight_step: 0.1,
            moving_user: None,
        }
    }

    /// Base configuration with overrides and experiment-wide settings applied.
    pub fn resolve_base(&self, cfg: &ScenarioConfig) -> Result<ScenarioConfig> {
        let mut c = cfg.clone();
        for (k, v) in &self.fixed_overrides {
            c.set(k, v)?;
        }
        if self.experiment == Experiment::Beampatterns {
            c.rician_kappa = f64::INFINITY;
            c.antennas = 1;
        }
        c.trials = self.trials;
        Ok(c)
    }

    /// Swept points; for the rate region these are the weight-grid indices.
    pub fn points(&self, base: &ScenarioConfig) -> Result<Vec<f64>> {
        if self.experiment == Experiment::RateRegion {
            let n = weight_grid(base.users, self.weight_step)?.len();
            return Ok((0..n).map(|i| i as f64).collect());
        }
        Ok(self.swept_values.clone())
    }

    fn validate(&self, base: &ScenarioConfig) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::InvalidArgument("at least one arm is required".into()));
        }
        if self.experiment != Experiment::RateRegion && self.swept_values.is_empty() {
            return Err(Error::InvalidArgument("swept values must be nonempty".into()));
        }
        if self.experiment.integer_values() && self.experiment != Experiment::RateRegion {
            if let Some(v) = self.swept_values.iter().find(|v| !(v.fract() == 0.0 && **v >= 1.0)) {
                return Err(Error::InvalidArgument(format!(
                    "{} sweep expects positive integers, got {v}",
                    self.experiment
                )));
            }
        }
        if let Some(u) = self.moving_user {
            if u >= base.users {
                return Err(Error::InvalidArgument(format!("moving user {u} out of range")));
            }
        }
        Ok(())
    }

    /// Scenario of one cell.
    pub fn cell_config(&self, base: &ScenarioConfig, arm: Arm, value: f64, trial: usize) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        let as_int = value as usize;
        let mut group_override = None;
        match self.experiment {
            Experiment::Elements | Experiment::Beampatterns | Experiment::Convergence => c.ris.elements = as_int,
            Experiment::MovingUser => {
                let u = self.moving_user.unwrap_or(c.users - 1);
                c.user_angles_deg[u] = value;
            }
            Experiment::GroupSize => group_override = Some(as_int),
            Experiment::Antennas => c.antennas = as_int,
            Experiment::Users => {
                c = c.with_users(as_int);
                let seed = derive_trial_seed(base.seed ^ 0x5EED_0A11_CE00_0000, trial as u64).derived_seed;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                c.user_angles_deg = (0..as_int).map(|_| rng.random_range(5.0..175.0)).collect();
            }
            Experiment::RateRegion => {
                let grid = weight_grid(c.users, self.weight_step)?;
                c.weights = grid
                    .get(as_int)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("weight index {as_int} out of range")))?;
            }
            Experiment::SecurityPower => c.tx_power_dbm = vec![value; c.users],
        }
        c.ris = arm.architecture(c.ris.elements, group_override);
        Ok(c)
    }
}

/// Output of one (arm, value, trial) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub arm: usize,
    pub value: usize,
    pub trial: usize,
    pub scenario: Scenario,
    pub report: OptimizerReport,
    pub patterns: Vec<Beampattern>,
    pub pdd_rows: Vec<PddTraceRow>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub config: ScenarioConfig,
    pub points: Vec<f64>,
    pub cells: Vec<CellResult>,
    pub tables: Vec<Table>,
}

impl SweepResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Final weighted sum-rates indexed `[arm][value][trial]`.
    pub fn weighted_sums(&self) -> Vec<Vec<Vec<f64>>> {
        let mut out = vec![vec![vec![f64::NAN; self.spec.trials]; self.points.len()]; self.spec.arms.len()];
        for c in &self.cells {
            out[c.arm][c.value][c.trial] = c.report.final_rates.weighted_sum;
        }
        out
    }
}

fn run_cell(
    spec: &SweepSpec,
    base: &ScenarioConfig,
    points: &[f64],
    (arm, value, trial): (usize, usize, usize),
    strict: bool,
) -> Result<CellResult> {
    let cfg = spec.cell_config(base, spec.arms[arm], points[value], trial)?;
    let sc = cfg.validate()?;
    let ch = ChannelSet::sample(&sc, derive_trial_seed(base.seed, trial as u64))?;
    let convergence = spec.experiment == Experiment::Convergence;
    let opts = RunOptions {
        keep_pdd_rows: convergence,
        strict,
    };
    let out = run_with(&sc, &ch, &opts)?;
    let mut report = out.report;
    let mut pdd_rows = Vec::new();
    if convergence {
        if let Some(first) = report.pdd_traces.first() {
            pdd_rows = first.rows.clone();
        }
        report.pdd_traces.iter_mut().for_each(|t| t.rows.clear());
    }
    let patterns = if spec.experiment == Experiment::Beampatterns {
        beampatterns(&out.phi, &ch, &default_beampattern_grid(), sc.structural())?
    } else {
        Vec::new()
    };
    Ok(CellResult {
        arm,
        value,
        trial,
        scenario: sc,
        report,
        patterns,
        pdd_rows,
    })
}

/// Runs every (arm, value, trial) cell and assembles the result tables.
pub fn run_sweep(spec: &SweepSpec, cfg: &ScenarioConfig) -> Result<SweepResult> {
    run_sweep_with(spec, cfg, RunOptions::default().strict)
}

/// As [`run_sweep`]; `strict` turns invariant warnings into errors.
pub fn run_sweep_with(spec: &SweepSpec, cfg: &ScenarioConfig, strict: bool) -> Result<SweepResult> {
    let base = spec.resolve_base(cfg)?;
    spec.validate(&base)?;
    let points = spec.points(&base)?;
    let mut index = Vec::new();
    for a in 0..spec.arms.len() {
        for v in 0..points.len() {
            for t in 0..spec.trials {
                index.push((a, v, t));
            }
        }
    }
    let cells = index
        .par_iter()
        .map(|&cell| run_cell(spec, &base, &points, cell, strict))
        .collect::<Result<Vec<_>>>()?;
    let tables = build_tables(spec, &base, &points, &cells)?;
    Ok(SweepResult {
        spec: spec.clone(),
        config: base,
        points,
        cells,
        tables,
    })
}

fn fixed_users(spec: &SweepSpec) -> bool {
    spec.experiment != Experiment::Users
}

fn build_tables(spec: &SweepSpec, base: &ScenarioConfig, points: &[f64], cells: &[CellResult]) -> Result<Vec<Table>> {
    let k = base.users;
    let mut cols: Vec<String> = [
        "arm",
        "value",
        "trial",
        "stat",
        "weighted_sum_rate",
        "sum_rate",
        "iterations",
        "converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let per_user = fixed_users(spec);
    if spec.experiment == Experiment::RateRegion {
        cols.extend((1..=k).map(|i| format!("weight_{i}")));
    }
    if per_user {
        cols.extend((1..=k).map(|i| format!("rate_{i}")));
    }
    if spec.experiment == Experiment::SecurityPower {
        cols.push("other_power_db_mean".into());
        cols.extend((1..=k).map(|i| format!("other_power_w_{i}")));
        cols.extend((1..=k).map(|i| format!("other_power_db_{i}")));
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut results = Table::new("results", &col_refs);

    let numeric_row = |c: &CellResult| -> Vec<f64> {
        let r = &c.report.final_rates;
        let mut v = vec![
            r.weighted_sum,
            r.per_user_rate.iter().sum(),
            c.report.iterations_used as f64,
            if c.report.converged { 1.0 } else { 0.0 },
        ];
        if spec.experiment == Experiment::RateRegion {
            v.extend(c.scenario.weights());
        }
        if per_user {
            v.extend(&r.per_user_rate);
        }
        if spec.experiment == Experiment::SecurityPower {
            let noise = c.scenario.noise_w;
            let db: Vec<f64> = r.other_user_power.iter().map(|p| 10.0 * (p / noise).log10()).collect();
            // Averaged in the linear domain: a switched-off stream leaves a zero entry.
            v.push(10.0 * (mean(&r.other_user_power) / noise).log10());
            v.extend(&r.other_user_power);
            v.extend(db);
        }
        v
    };

    for (a, arm) in spec.arms.iter().enumerate() {
        for (vi, value) in points.iter().enumerate() {
            let group: Vec<&CellResult> = cells.iter().filter(|c| c.arm == a && c.value == vi).collect();
            let rows: Vec<Vec<f64>> = group.iter().map(|c| numeric_row(c)).collect();
            for (c, nums) in group.iter().zip(&rows) {
                let mut row: Vec<Cell> = vec![arm.label().into(), (*value).into(), c.trial.into(), "trial".into()];
                row.extend(nums.iter().map(|x| Cell::Float(*x)));
                results.push(row);
            }
            for (stat, f) in [("mean", mean as fn(&[f64]) -> f64), ("stderr", std_err)] {
                let mut row: Vec<Cell> = vec![arm.label().into(), (*value).into(), Cell::Empty, stat.into()];
                for j in 0..rows[0].len() {
                    let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    row.push(Cell::Float(f(&col)));
                }
                results.push(row);
            }
        }
    }
    let mut tables = vec![results];

    if spec.experiment == Experiment::Convergence {
        let mut trace = Table::new(
            "trace",
            &["arm", "value", "trial", "iteration", "objective", "sum_rate"],
        );
        let mut pdd = Table::new(
            "pdd",
            &[
                "arm",
                "value",
                "trial",
                "outer_iter",
                "inner_iter",
                "augmented_lagrangian",
                "gap",
                "rho",
            ],
        );
        for c in cells {
            let label = spec.arms[c.arm].label();
            for (it, (o, s)) in c
                .report
                .objective_trace
                .iter()
                .zip(&c.report.sum_rate_trace)
                .enumerate()
            {
                trace.push(vec![
                    label.clone().into(),
                    points[c.value].into(),
                    c.trial.into(),
                    it.into(),
                    (*o).into(),
                    (*s).into(),
                ]);
            }
            for r in &c.pdd_rows {
                pdd.push(vec![
                    label.clone().into(),
                    points[c.value].into(),
                    c.trial.into(),
                    r.outer_iter.into(),
                    r.inner_iter.into(),
                    r.augmented_lagrangian.into(),
                    r.gap.into(),
                    r.rho.into(),
                ]);
            }
        }
        tables.push(trace);
        tables.push(pdd);
    }

    if spec.experiment == Experiment::Beampatterns {
        let model = if base.structural_scattering {
            "phi_minus_identity (extension)"
        } else {
            "phi"
        };
        let mut pat = Table::new(
            "patterns",
            &[
                "arm",
                "value",
                "trial",
                "user",
                "angle_deg",
                "impinging",
                "reflected",
                "model",
            ],
        );
        let mut peaks = Table::new(
            "peaks",
            &[
                "arm",
                "value",
                "trial",
                "user",
                "user_angle_deg",
                "next_user_angle_deg",
                "impinging_peak_deg",
                "reflected_peak_deg",
            ],
        );
        for c in cells {
            let label = spec.arms[c.arm].label();
            let angles = &c.scenario.config.user_angles_deg;
            for b in &c.patterns {
                for ((ang, imp), refl) in b.angles_deg.iter().zip(&b.impinging).zip(&b.reflected) {
                    pat.push(vec![
                        label.clone().into(),
                        points[c.value].into(),
                        c.trial.into(),
                        (b.user + 1).into(),
                        (*ang).into(),
                        (*imp).into(),
                        (*refl).into(),
                        model.into(),
                    ]);
                }
                peaks.push(vec![
                    label.clone().into(),
                    points[c.value].into(),
                    c.trial.into(),
                    (b.user + 1).into(),
                    angles[b.user].into(),
                    angles[next(b.user, angles.len())].into(),
                    peak_angle(&b.angles_deg, &b.impinging).into(),
                    peak_angle(&b.angles_deg, &b.reflected).into(),
                ]);
            }
        }
        tables.push(pat);
        tables.push(peaks);
    }
    Ok(tables)
}
