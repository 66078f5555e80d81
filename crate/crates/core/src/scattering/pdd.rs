//! Penalty dual decomposition over the groups of the scattering matrix.

use log::{debug, warn};
use nalgebra::{Cholesky, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::maps::{ArchitectureMaps, GroupMap};
use super::trace_form::TraceFormCoefficients;
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, hermitian_part, is_finite, max_abs, symmetrize, unitary_polar_factor, vec_of, CMat, CVec, C64,
};

/// Penalty below which the outer loop gives up.
pub const RHO_FLOOR: f64 = 1e-12;

/// Scattering blocks plus the PDD auxiliaries.
#[derive(Debug, Clone, PartialEq)]
pub struct RisState {
    pub phi_groups: Vec<CMat>,
    pub psi_groups: Vec<CMat>,
    pub lambda_groups: Vec<CMat>,
    pub rho: f64,
}

impl RisState {
    /// Warm start: `Φ_g = Ψ_g` taken from `phi`, zero duals.
    pub fn from_phi(phi: &CMat, maps: &ArchitectureMaps, rho: f64) -> Self {
        let blocks = maps.split(phi);
        let mg = maps.group_size();
        RisState {
            psi_groups: blocks.clone(),
            phi_groups: blocks,
            lambda_groups: vec![CMat::zeros(mg, mg); maps.groups],
            rho,
        }
    }

    /// `max_g ‖Φ_g − Ψ_g‖_∞` (largest entry modulus).
    pub fn gap(&self) -> f64 {
        self.phi_groups
            .iter()
            .zip(&self.psi_groups)
            .map(|(p, q)| max_abs(&(p - q)))
            .fold(0.0, f64::max)
    }

    pub fn phi(&self) -> CMat {
        block_diag(&self.phi_groups)
    }

    pub fn psi(&self) -> CMat {
        block_diag(&self.psi_groups)
    }
}

/// Quadratic model of one group: minimize `xᴴ Δ x − 2 Re(xᴴ δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSubproblem {
    pub delta_mat: CMat,
    pub delta_vec: CVec,
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `[A Φ_other B]_gg` where `Φ_other` is `Φ` with block `g` removed.
fn coupling(coeffs: &TraceFormCoefficients, maps: &ArchitectureMaps, phi_groups: &[CMat], g: usize) -> CMat {
    let mg = maps.group_size();
    let mut acc = CMat::zeros(mg, mg);
    if maps.groups == 1 {
        return acc;
    }
    let og = maps.offset(g);
    for (u, a) in coeffs.u.iter().zip(&coeffs.a_weights) {
        if *a == 0.0 {
            continue;
        }
        let ug = u.rows(og, mg);
        for v in &coeffs.v {
            let mut s = C64::new(0.0, 0.0);
            for (h, block) in phi_groups.iter().enumerate() {
                if h == g {
                    continue;
                }
                let oh = maps.offset(h);
                s += u.rows(oh, mg).dotc(&(block * v.rows(oh, mg)));
            }
            acc += ug * v.rows(og, mg).adjoint() * (s * *a);
        }
    }
    acc
}

/// Dense quadratic model of group `g` with all other groups frozen.
pub fn assemble_group_subproblem(
    g: usize,
    coeffs: &TraceFormCoefficients,
    maps: &ArchitectureMaps,
    state: &RisState,
) -> GroupSubproblem {
    let map = maps.group;
    let dup = map.duplication_matrix().map(|x| C64::new(x, 0.0));
    let a_gg = maps.block(&coeffs.a, g);
    let b_gg = maps.block(&coeffs.b, g);
    let q = kron(&b_gg.transpose(), &a_gg);
    let s = 1.0 / (2.0 * state.rho);
    let delta_mat = dup.adjoint() * q * &dup + dup.adjoint() * &dup * C64::new(s, 0.0);
    let target = linear_target(g, coeffs, maps, state);
    GroupSubproblem {
        delta_vec: map.adjoint(&target),
        delta_mat,
    }
}

fn linear_target(g: usize, coeffs: &TraceFormCoefficients, maps: &ArchitectureMaps, state: &RisState) -> CMat {
    let s = 1.0 / (2.0 * state.rho);
    let g_full = maps.block(&coeffs.linear(), g).adjoint();
    g_full - coupling(coeffs, maps, &state.phi_groups, g) + &state.psi_groups[g] * C64::new(s, 0.0)
        - &state.lambda_groups[g] * C64::new(0.5, 0.0)
}

/// Solves `Δ φ = δ` by Cholesky, falling back to a ridge-regularized solve.
pub fn update_phi_group(delta_mat: &CMat, delta_vec: &CVec) -> CVec {
    if let Some(ch) = Cholesky::new(hermitian_part(delta_mat)) {
        return ch.solve(delta_vec);
    }
    let l = delta_mat.nrows().max(1);
    let ridge = 1e-12 * delta_mat.trace().re.abs() / l as f64;
    warn!("group system not positive definite; adding ridge {ridge:e}");
    let reg = hermitian_part(delta_mat) + CMat::identity(l, l) * C64::new(ridge.max(f64::MIN_POSITIVE), 0.0);
    match Cholesky::new(reg.clone()) {
        Some(ch) => ch.solve(delta_vec),
        None => reg
            .pseudo_inverse(1e-14)
            .map(|p| p * delta_vec)
            .unwrap_or_else(|_| CVec::zeros(l)),
    }
}

/// Nearest unitary to `ρ Λ_g + Φ_g`; symmetric when `reciprocal`.
pub fn update_psi_group(phi_g: &CMat, lambda_g: &CMat, rho: f64, reciprocal: bool) -> CMat {
    let target = lambda_g * C64::new(rho, 0.0) + phi_g;
    let psi = match unitary_polar_factor(&target) {
        Some(p) => p,
        None => {
            debug!("zero projection target; using identity");
            CMat::identity(phi_g.nrows(), phi_g.ncols())
        }
    };
    if reciprocal {
        symmetrize(&psi)
    } else {
        psi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterBranch {
    Dual,
    Penalty,
}

/// One outer step: dual ascent when the gap is below `threshold`, otherwise `ρ ← c ρ`.
pub fn pdd_outer_update(state: &mut RisState, threshold: f64, scale: f64) -> Result<OuterBranch> {
    let gap = state.gap();
    if gap < threshold {
        let inv = C64::new(1.0 / state.rho, 0.0);
        for ((l, p), q) in state
            .lambda_groups
            .iter_mut()
            .zip(&state.phi_groups)
            .zip(&state.psi_groups)
        {
            *l += (p - q) * inv;
        }
        Ok(OuterBranch::Dual)
    } else {
        state.rho *= scale;
        if state.rho < RHO_FLOOR {
            return Err(Error::PenaltyRunaway { rho: state.rho, gap });
        }
        Ok(OuterBranch::Penalty)
    }
}

/// Structured solver for one group's system `(K_gᴴ (B_ggᵀ ⊗ A_gg) K_g + s K_gᴴ K_g) x = δ`.
///
/// The Kronecker term has rank at most `rank(A_gg) rank(B_gg)`, so the solve uses the
/// Woodbury identity around the diagonal `s K_gᴴ K_g`.
pub struct GroupSolver {
    map: GroupMap,
    gram: Vec<f64>,
    /// `K_gᴴ e_j sqrt(λ_j)` for each retained eigenpair of the Kronecker term.
    factors: CMat,
    scale: f64,
    capacitance: Option<Cholesky<C64, nalgebra::Dyn>>,
    dense: Option<Cholesky<C64, nalgebra::Dyn>>,
}

impl GroupSolver {
    pub fn new(a_gg: &CMat, b_gg: &CMat, map: GroupMap) -> Self {
        let ea = SymmetricEigen::new(hermitian_part(a_gg));
        let eb = SymmetricEigen::new(hermitian_part(b_gg));
        let amax = ea.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let bmax = eb.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mut cols = Vec::new();
        for (i, &la) in ea.eigenvalues.iter().enumerate() {
            if la <= 1e-13 * amax || la <= 0.0 {
                continue;
            }
            let ua = ea.eigenvectors.column(i);
            for (j, &lb) in eb.eigenvalues.iter().enumerate() {
                if lb <= 1e-13 * bmax || lb <= 0.0 {
                    continue;
                }
                let ub = eb.eigenvectors.column(j);
                let e = ua * ub.adjoint();
                cols.push(map.adjoint(&e) * C64::new((la * lb).sqrt(), 0.0));
            }
        }
        let l = map.free_len();
        let factors = if cols.is_empty() {
            CMat::zeros(l, 0)
        } else {
            CMat::from_columns(&cols)
        };
        GroupSolver {
            gram: map.gram_diag(),
            map,
            factors,
            scale: f64::NAN,
            capacitance: None,
            dense: None,
        }
    }

    pub fn rank(&self) -> usize {
        self.factors.ncols()
    }

    /// Refactors for a new proximal weight `s = 1/(2ρ)`.
    pub fn set_scale(&mut self, s: f64) {
        if s == self.scale {
            return;
        }
        self.scale = s;
        let l = self.map.free_len();
        let r = self.rank();
        if r < l {
            let mut scaled = self.factors.clone();
            for (i, d) in self.gram.iter().enumerate() {
                let f = 1.0 / (s * d);
                scaled.row_mut(i).iter_mut().for_each(|z| *z *= f);
            }
            let t = CMat::identity(r, r) + self.factors.adjoint() * scaled;
            self.capacitance = Cholesky::new(hermitian_part(&t));
            self.dense = None;
        } else {
            let mut d = &self.factors * self.factors.adjoint();
            for (i, g) in self.gram.iter().enumerate() {
                d[(i, i)] += C64::new(s * g, 0.0);
            }
            self.dense = Cholesky::new(hermitian_part(&d));
            self.capacitance = None;
        }
    }

    pub fn solve(&self, rhs: &CVec) -> CVec {
        if let Some(d) = &self.dense {
            return d.solve(rhs);
        }
        let s = self.scale;
        let y = CVec::from_iterator(rhs.len(), rhs.iter().zip(&self.gram).map(|(v, d)| v / (s * d)));
        let Some(cap) = &self.capacitance else {
            return y;
        };
        if self.rank() == 0 {
            return y;
        }
        let z = cap.solve(&(self.factors.adjoint() * &y));
        let corr = &self.factors * z;
        CVec::from_iterator(
            rhs.len(),
            y.iter()
                .zip(corr.iter())
                .zip(&self.gram)
                .map(|((yi, ci), d)| yi - ci / (s * d)),
        )
    }
}

/// PDD loop parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PddParams {
    pub inner_max: usize,
    pub outer_max: usize,
    pub eps: f64,
    pub rho0: f64,
    pub scale: f64,
    pub inner_tol: f64,
    pub dual_tol0: f64,
    pub dual_decay: f64,
}

impl From<&SolverConfig> for PddParams {
    fn from(s: &SolverConfig) -> Self {
        PddParams {
            inner_max: s.pdd_inner_max,
            outer_max: s.pdd_outer_max,
            eps: s.pdd_eps,
            rho0: s.pdd_rho0,
            scale: s.pdd_scale,
            inner_tol: s.pdd_inner_tol,
            dual_tol0: s.pdd_dual_tol0,
            dual_decay: s.pdd_dual_decay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PddTraceRow {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub augmented_lagrangian: f64,
    pub gap: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PddTrace {
    pub rows: Vec<PddTraceRow>,
    pub outer_iters: usize,
    pub converged: bool,
    pub final_gap: f64,
}

impl PddTrace {
    /// Gap at the end of each outer iteration.
    pub fn outer_gaps(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        let mut last = 0;
        for r in &self.rows {
            if r.outer_iter != last {
                out.push(r.gap);
                last = r.outer_iter;
            } else if let Some(x) = out.last_mut() {
                *x = r.gap;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringOutcome {
    /// Exactly feasible block-diagonal matrix assembled from the `Ψ_g`.
    pub phi: CMat,
    pub state: RisState,
    pub trace: PddTrace,
}

/// Low-rank bookkeeping of `Y = Uᴴ Φ V` (users × users) for fast coupling and objective
/// evaluation.
struct Projection {
    y: CMat,
}

impl Projection {
    fn block_term(coeffs: &TraceFormCoefficients, maps: &ArchitectureMaps, g: usize, block: &CMat) -> CMat {
        let (mg, o) = (maps.group_size(), maps.offset(g));
        let k = coeffs.u.len();
        CMat::from_fn(k, k, |r, c| {
            coeffs.u[r].rows(o, mg).dotc(&(block * coeffs.v[c].rows(o, mg)))
        })
    }

    fn new(coeffs: &TraceFormCoefficients, maps: &ArchitectureMaps, groups: &[CMat]) -> Self {
        let k = coeffs.u.len();
        let mut y = CMat::zeros(k, k);
        for (g, b) in groups.iter().enumerate() {
            y += Self::block_term(coeffs, maps, g, b);
        }
        Projection { y }
    }

    fn quadratic(&self, coeffs: &TraceFormCoefficients) -> f64 {
        let mut acc = 0.0;
        for (r, a) in coeffs.a_weights.iter().enumerate() {
            acc += a * self.y.row(r).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        acc
    }
}

struct Workspace<'a> {
    coeffs: &'a TraceFormCoefficients,
    maps: &'a ArchitectureMaps,
    /// Blocks of `Cᴴ`.
    g_blocks: Vec<CMat>,
    /// Blocks of `C`, for the linear part of the objective.
    c_blocks: Vec<CMat>,
}

impl Workspace<'_> {
    fn coupling(&self, proj: &Projection, g: usize, own: &CMat) -> CMat {
        let (mg, o) = (self.maps.group_size(), self.maps.offset(g));
        let mut acc = CMat::zeros(mg, mg);
        if self.maps.groups == 1 {
            return acc;
        }
        let y_other = &proj.y - Projection::block_term(self.coeffs, self.maps, g, own);
        for (r, (u, a)) in self.coeffs.u.iter().zip(&self.coeffs.a_weights).enumerate() {
            if *a == 0.0 {
                continue;
            }
            let mut vsum = CVec::zeros(mg);
            for (c, v) in self.coeffs.v.iter().enumerate() {
                vsum += v.rows(o, mg) * y_other[(r, c)].conj();
            }
            acc += u.rows(o, mg) * vsum.adjoint() * C64::new(*a, 0.0);
        }
        acc
    }

    fn lagrangian(&self, proj: &Projection, st: &RisState) -> f64 {
        let s = 1.0 / (2.0 * st.rho);
        let mut lin = 0.0;
        let mut pen = 0.0;
        for g in 0..self.maps.groups {
            let p = &st.phi_groups[g];
            lin += crate::linalg::trace_of_product(&self.c_blocks[g], p).re;
            let d = p - &st.psi_groups[g];
            pen += s * d.norm_squared() + st.lambda_groups[g].dotc(&d).re;
        }
        proj.quadratic(self.coeffs) - 2.0 * lin + pen
    }
}

/// `‖C‖_F + ‖A‖_F ‖B‖_F`, the unit in which the initial penalty is expressed.
///
/// Without it the proximal term swamps the objective whenever the channel gains are
/// small and the inner loop creeps.
pub fn curvature_scale(coeffs: &TraceFormCoefficients) -> f64 {
    let s = coeffs.linear().norm() + coeffs.a.norm() * coeffs.b.norm();
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Runs the two-loop PDD starting from `phi`. The initial penalty is `ρ₀ / curvature_scale`.
pub fn run_pdd(
    coeffs: &TraceFormCoefficients,
    maps: &ArchitectureMaps,
    phi: &CMat,
    params: &PddParams,
) -> Result<ScatteringOutcome> {
    let groups = maps.groups;
    let c = coeffs.linear();
    let ws = Workspace {
        coeffs,
        maps,
        g_blocks: (0..groups).map(|g| maps.block(&c, g).adjoint()).collect(),
        c_blocks: (0..groups).map(|g| maps.block(&c, g)).collect(),
    };
    let mut solvers: Vec<GroupSolver> = (0..groups)
        .map(|g| GroupSolver::new(&maps.block(&coeffs.a, g), &maps.block(&coeffs.b, g), maps.group))
        .collect();

    let mut st = RisState::from_phi(phi, maps, params.rho0 / curvature_scale(coeffs));
    let mut proj = Projection::new(coeffs, maps, &st.phi_groups);
    let mut trace = PddTrace::default();
    let mut threshold = params.dual_tol0;
    let reciprocal = maps.group.reciprocal;

    for outer in 1..=params.outer_max {
        let s = 1.0 / (2.0 * st.rho);
        solvers.iter_mut().for_each(|sv| sv.set_scale(s));
        let mut l_prev = ws.lagrangian(&proj, &st);
        for inner in 1..=params.inner_max {
            for g in 0..groups {
                let old = st.phi_groups[g].clone();
                let target = &ws.g_blocks[g] - ws.coupling(&proj, g, &old) + &st.psi_groups[g] * C64::new(s, 0.0)
                    - &st.lambda_groups[g] * C64::new(0.5, 0.0);
                let x = solvers[g].solve(&maps.group.adjoint(&target));
                let new = maps.group.expand(&x);
                proj.y += Projection::block_term(coeffs, maps, g, &(&new - &old));
                st.psi_groups[g] = update_psi_group(&new, &st.lambda_groups[g], st.rho, reciprocal);
                st.phi_groups[g] = new;
            }
            let l = ws.lagrangian(&proj, &st);
            if !l.is_finite() || st.phi_groups.iter().chain(&st.psi_groups).any(|b| !is_finite(b)) {
                return Err(Error::NonFinite { block: "scattering" });
            }
            trace.rows.push(PddTraceRow {
                outer_iter: outer,
                inner_iter: inner,
                augmented_lagrangian: l,
                gap: st.gap(),
                rho: st.rho,
            });
            let done = (l - l_prev).abs() <= params.inner_tol * l.abs().max(l_prev.abs());
            l_prev = l;
            if done {
                break;
            }
        }
        // Rounding drift in the running projection is reset once per outer step.
        proj = Projection::new(coeffs, maps, &st.phi_groups);
        trace.outer_iters = outer;
        let gap = st.gap();
        trace.final_gap = gap;
        if gap <= params.eps {
            trace.converged = true;
            break;
        }
        pdd_outer_update(&mut st, threshold, params.scale)?;
        threshold = params.dual_decay * gap;
    }
    if !trace.converged {
        debug!(
            "scattering loop stopped with gap {:e} after {} outer iterations",
            trace.final_gap, trace.outer_iters
        );
    }
    let phi = st.psi();
    Ok(ScatteringOutcome { phi, state: st, trace })
}

/// Value of the augmented Lagrangian for a state, evaluated densely.
pub fn augmented_lagrangian(coeffs: &TraceFormCoefficients, st: &RisState) -> f64 {
    let phi = st.phi();
    let s = 1.0 / (2.0 * st.rho);
    let mut pen = 0.0;
    for ((p, q), l) in st.phi_groups.iter().zip(&st.psi_groups).zip(&st.lambda_groups) {
        let d = p - q;
        pen += s * d.norm_squared() + l.dotc(&d).re;
    }
    -coeffs.value(&phi) + pen
}

/// `vec(Φ)ᴴ (Bᵀ ⊗ A) vec(Φ)` evaluated with an explicit Kronecker product (test helper).
pub fn kron_quadratic(coeffs: &TraceFormCoefficients, phi: &CMat) -> f64 {
    let q = kron(&coeffs.b.transpose(), &coeffs.a);
    let x = vec_of(phi);
    x.dotc(&(q * &x)).re
}
