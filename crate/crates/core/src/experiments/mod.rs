//! Experiment harness: sweeps, reports and verdicts behind the CLI.

pub mod config;
pub mod decoherence;
pub mod diagnostics;
pub mod fit;
pub mod inflation;
pub mod interactions;
pub mod non_c2;
pub mod report;
pub mod selftest;

pub use config::Config;
pub use fit::{fit_exponent, FitResult};
pub use report::{ExperimentReport, Rule, Sample, SampleKey, Verdict};

use rayon::prelude::*;

use crate::error::{param, Result};
use crate::linear::{refine_until_converged, RefinementTrace, TimeGrid, DEFAULT_NODES_PER_UNIT, MAX_REFINEMENTS, QUADRATURE_TOL};
use crate::solver::StepControl;
use crate::spectral::FourierGrid;

use config::SolverConfig;

/// Command-line overrides applied on top of a config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub grid_points: Option<usize>,
    pub box_length: Option<f64>,
    pub dt: Option<f64>,
    pub jobs: Option<usize>,
}

impl Overrides {
    /// `default` with any grid override applied.
    pub fn grid(&self, default: FourierGrid) -> Result<FourierGrid> {
        if self.grid_points.is_none() && self.box_length.is_none() {
            return Ok(default);
        }
        FourierGrid::new(
            self.grid_points.unwrap_or(default.num_points()),
            self.box_length.unwrap_or(default.length()),
        )
    }

    pub fn control(&self, solver: &SolverConfig) -> Result<StepControl> {
        let mut c = StepControl::with_scheme(self.dt.unwrap_or(solver.dt), solver.scheme)?;
        c.dealias = solver.dealias;
        Ok(c)
    }

    /// Maps `f` over `items` on the worker pool, keeping the input order.
    pub(crate) fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            if j == 0 {
                return Err(param("--jobs must be at least 1"));
            }
            builder = builder.num_threads(j);
        }
        let pool = builder.build().map_err(|e| param(e.to_string()))?;
        Ok(pool.install(|| items.par_iter().map(f).collect()))
    }
}

/// Runs a Duhamel quadrature on successively doubled time grids until the
/// summary settles, starting from the default node density.
pub(crate) fn converged<T>(
    t: f64,
    eval: impl FnMut(&TimeGrid) -> Result<T>,
    summary: impl Fn(&T) -> f64,
) -> Result<(T, RefinementTrace)> {
    refine_until_converged(
        TimeGrid::with_density(t, DEFAULT_NODES_PER_UNIT)?,
        QUADRATURE_TOL,
        MAX_REFINEMENTS,
        eval,
        summary,
    )
}

/// Rows `(t, norm_name, value)` produced by one sweep point.
pub(crate) type Rows = Vec<(f64, String, f64)>;
