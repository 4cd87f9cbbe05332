//! Shared fixtures for the planner benchmarks.

use std::path::PathBuf;

use slp_core::{plan, LinearProgram, Method, PlanOptions, Scenario};

pub fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Last LP the SLP loop solved on a bundled scenario.
pub fn last_lp(name: &str, grid: usize) -> LinearProgram {
    let options = PlanOptions { grid: Some(grid), keep_last_lp: true, ..PlanOptions::default() };
    let out = plan(&scenario(name), Method::Slp, &options).expect("bundled scenario plans");
    out.last_lp.expect("SLP keeps its last LP on request")
}
