//! Shared setup for the benchmarks in `benches/`.

use std::path::PathBuf;

use curvlab::scenario::{load_scenario, PolytopeScenario, Scenario, ScenarioBody};

/// Load one of the bundled scenario fixtures by name.
pub fn fixture(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.json"));
    load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn polytope(s: &Scenario) -> &PolytopeScenario {
    match &s.body {
        ScenarioBody::Polytope(p) => p,
        ScenarioBody::Exterior(_) => panic!("{} is an exterior scenario", s.name),
    }
}
