//! Shared fixtures for the criterion benches.

use std::path::{Path, PathBuf};

use aspt_cli::{load_scenario, LoadedScenario, Overrides};

/// Path of a scenario bundled with the cli crate.
pub fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/scenarios").join(format!("{name}.toml"))
}

pub fn load(name: &str) -> LoadedScenario {
    load_scenario(&bundled(name), &Overrides::default()).expect("bundled scenario loads")
}
