//! Experiment runner: sweeps, diagnostics and result export.

pub mod export;
pub mod probes;
pub mod sweep;
pub mod table;

pub use export::{export, manifest, Format};
pub use probes::{
    build_equality_fixture, channel_strength, channel_strength_bound, structural_scattering_probe,
    EqualityConditionFixture,
};
pub use sweep::{
    parse_arms, run_sweep, run_sweep_with, weight_grid, Arm, CellResult, Experiment, SweepResult, SweepSpec,
};
pub use table::{Cell, Table};
