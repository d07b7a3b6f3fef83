//! A quick, deterministic subset of every experiment.

use super::config::{Config, ExactConfig, NonC2Config, SolverConfig};
use super::decoherence::run_decoherence_exact;
use super::diagnostics::{run_norms, run_soliton, SolitonCheck};
use super::interactions::run_suppression;
use super::non_c2::run_non_c2;
use super::report::ExperimentReport;
use super::Overrides;
use crate::error::Result;

/// Scaled-down configurations used by [`run_selftest`].
pub fn selftest_config() -> Config {
    let mut c = Config::default();
    c.decohere_exact = ExactConfig {
        m_list: vec![25.0, 50.0],
        grid_points: 8192,
        ..ExactConfig::default()
    };
    c.non_c2 = NonC2Config {
        cases: vec![c.non_c2.cases[0]],
        n_list: vec![16.0, 32.0, 64.0],
        ..NonC2Config::default()
    };
    c
}

/// Runs the soliton check on a coarse grid, the norm diagnostics, the exact
/// decoherence pair, the suppression check and one non-C² case. Grid
/// overrides are ignored so that the output depends on nothing but the code.
pub fn run_selftest(ov: &Overrides) -> Result<ExperimentReport> {
    let cfg = selftest_config();
    let ov = Overrides {
        jobs: ov.jobs,
        ..Overrides::default()
    };
    let soliton = SolitonCheck {
        grid_points: 1024,
        t_final: 0.25,
        dt: 2e-3,
        ..SolitonCheck::default()
    };
    let inflation = &cfg.inflation;
    let parts = vec![
        run_soliton(&soliton, &SolverConfig::default(), &ov)?,
        run_norms(&cfg.norms, &ov)?,
        run_decoherence_exact(&cfg.decohere_exact, &ov)?,
        run_suppression(&[16.0, 32.0], inflation.k, inflation.s, inflation.suppression_time, &ov)?,
        run_non_c2(&cfg.non_c2, &ov)?,
    ];
    let inputs = serde_json::json!({ "config": cfg, "soliton": soliton });
    Ok(ExperimentReport::merge("selftest", inputs, parts))
}
