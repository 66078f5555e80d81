//! Scattering-matrix optimization under unitarity, block-diagonal and symmetry constraints.

pub mod maps;
pub mod pdd;
pub mod trace_form;

pub use maps::{build_maps, ArchitectureMaps, GroupMap};
pub use pdd::{
    assemble_group_subproblem, augmented_lagrangian, curvature_scale, pdd_outer_update, run_pdd, update_phi_group,
    update_psi_group, GroupSolver, GroupSubproblem, OuterBranch, PddParams, PddTrace, PddTraceRow, RisState,
    ScatteringOutcome,
};
pub use trace_form::{assemble_trace_form, TraceFormCoefficients};

use crate::channel::ChannelSet;
use crate::config::Scenario;
use crate::error::Result;
use crate::linalg::CMat;
use crate::metrics::BeamformerState;
use crate::surrogate::SurrogateState;

/// Optimizes `Φ` with every other block frozen, warm-started from `phi`.
pub fn optimize_scattering(
    bf: &BeamformerState,
    sur: &SurrogateState,
    ch: &ChannelSet,
    sc: &Scenario,
    phi: &CMat,
) -> Result<(ScatteringOutcome, TraceFormCoefficients)> {
    let coeffs = assemble_trace_form(bf, sur, ch, sc);
    let maps = build_maps(&sc.config.ris);
    let out = run_pdd(&coeffs, &maps, phi, &PddParams::from(sc.solver()))?;
    Ok((out, coeffs))
}
