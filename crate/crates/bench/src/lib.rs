//! Shared fixtures for the optimizer benchmarks.

use circulator_core::{derive_trial_seed, ChannelSet, Reciprocity, RisArchitecture, Scenario, ScenarioConfig};

/// Three users at 30°, 90° and 150° around an `elements`-element surface.
pub fn scenario(elements: usize, ris: fn(usize) -> RisArchitecture) -> Scenario {
    let mut c = ScenarioConfig::default();
    c.ris = ris(elements);
    c.validate().expect("benchmark scenario is valid")
}

pub fn fully_connected_nr(m: usize) -> RisArchitecture {
    RisArchitecture::fully_connected(m, Reciprocity::NonReciprocal)
}

pub fn fully_connected_r(m: usize) -> RisArchitecture {
    RisArchitecture::fully_connected(m, Reciprocity::Reciprocal)
}

pub fn diagonal(m: usize) -> RisArchitecture {
    RisArchitecture::diagonal(m)
}

pub fn channels(sc: &Scenario, trial: u64) -> ChannelSet {
    ChannelSet::sample(sc, derive_trial_seed(sc.config.seed, trial)).expect("channel sampling")
}
