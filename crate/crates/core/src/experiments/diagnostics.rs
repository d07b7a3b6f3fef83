//! Norm diagnostics and the soliton accuracy check.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{NormsConfig, SolverConfig};
use super::report::{ExperimentReport, Rule, SampleKey};
use super::Overrides;
use crate::data::{soliton, soliton_initial_data, SolitonParams};
use crate::error::Result;
use crate::linear::apply_schrodinger;
use crate::norms::{
    bourgain_norm, bourgain_norm_padded, dual_norm_y, plateau_bump, table1_params, BourgainParams, Flavor,
    SpaceTimeField, TimeCutoff, TIME_PADDING,
};
use crate::solver::{solve_full, Output, StepControl};
use crate::spectral::{sobolev_norm_spectrum, FourierGrid, SobolevParams, C64};

/// Half-width of the time window holding `ψ`, whose support is `[−2, 2]`.
const HALF_WINDOW: f64 = 2.5;

/// `(∫⟨τ⟩^{2b}|ψ̂(τ)|² dτ)^{1/2}` by direct quadrature of the time transform.
pub fn cutoff_sobolev_norm(b: f64) -> f64 {
    let nt = 4000;
    let dt = 4.0 / nt as f64;
    let psi: Vec<f64> = (0..=nt).map(|j| plateau_bump(-2.0 + j as f64 * dt)).collect();
    let tau_max = 200.0;
    let ntau = 8000;
    let dtau = 2.0 * tau_max / ntau as f64;
    let mut acc = 0.0;
    for l in 0..=ntau {
        let tau = -tau_max + l as f64 * dtau;
        let hat: C64 = psi
            .iter()
            .enumerate()
            .map(|(j, &p)| p * C64::from_polar(1.0, -tau * (-2.0 + j as f64 * dt)))
            .sum::<C64>()
            * dt
            / (2.0 * PI).sqrt();
        let w = if l == 0 || l == ntau { 0.5 } else { 1.0 };
        acc += w * (1.0 + tau * tau).powf(b) * hat.norm_sqr();
    }
    (acc * dtau).sqrt()
}

fn random_band(grid: &FourierGrid, band: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let mut spec = vec![C64::new(0.0, 0.0); grid.num_points()];
    for j in -(band as i64)..=(band as i64) {
        if let Some(idx) = grid.index_of_mode(j) {
            spec[idx] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    spec
}

/// `ψ(t)U(t)φ` sampled on the diagnostic window.
fn windowed_flow(grid: &FourierGrid, phi: &[C64], nodes: usize) -> Result<SpaceTimeField> {
    let mut engine = grid.engine();
    let field = SpaceTimeField::sample(grid, HALF_WINDOW, nodes, |t| {
        let mut s = phi.to_vec();
        apply_schrodinger(grid, &mut s, t);
        engine.inverse(&s)
    })?;
    Ok(field.windowed(&TimeCutoff::new(1.0)?))
}

/// Table parameters, the measured group estimate `‖ψU(t)φ‖_{X_{k,b₁}} ≤ C‖φ‖_{H^k}`
/// over random band-limited data, and transform consistency checks.
pub fn run_norms(cfg: &NormsConfig, ov: &Overrides) -> Result<ExperimentReport> {
    let grid = ov.grid(FourierGrid::new(cfg.grid_points, cfg.box_length)?)?;
    let mut report = ExperimentReport::new("norms", serde_json::to_value(cfg)?);
    let row = match table1_params(cfg.k, cfg.s) {
        Ok(r) => r,
        Err(e) => {
            report.note(format!("no table row: {e}"));
            return Ok(report);
        }
    };
    for (name, v) in [("b1", row.b1), ("c1", row.c1), ("b", row.b), ("c", row.c), ("epsilon", row.epsilon)] {
        report.push(0.0, 0.0, &format!("table_{name}"), v);
    }
    let params = BourgainParams {
        index: cfg.k,
        b: row.b1,
        flavor: Flavor::Schrodinger,
    };
    let hk = SobolevParams::new(cfg.k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let phis: Vec<Vec<C64>> = (0..cfg.samples).map(|_| random_band(&grid, cfg.band, &mut rng)).collect();
    let ratios = ov.map(&phis, |phi| -> Result<f64> {
        let field = windowed_flow(&grid, phi, cfg.time_nodes)?;
        Ok(bourgain_norm(&field, &params) / sobolev_norm_spectrum(&grid, phi, &hk))
    })?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (j, r) in ratios.into_iter().enumerate() {
        let r = r?;
        report.push(j as f64, 0.0, "group_ratio", r);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    report.push(0.0, 0.0, "group_ratio_min", lo);
    report.push(0.0, 0.0, "group_ratio_max", hi);
    report.push(0.0, 0.0, "cutoff_sobolev_norm", cutoff_sobolev_norm(row.b1));
    report.check(
        "group_constant_uniform",
        Rule::Ratio {
            num: SampleKey::new("group_ratio_max", 0.0, 0.0),
            den: SampleKey::new("group_ratio_min", 0.0, 0.0),
            min: None,
            max: Some(1.01),
        },
    );
    report.check(
        "group_constant_matches_cutoff",
        Rule::Ratio {
            num: SampleKey::new("group_ratio_max", 0.0, 0.0),
            den: SampleKey::new("cutoff_sobolev_norm", 0.0, 0.0),
            min: Some(0.99),
            max: Some(1.01),
        },
    );
    if let Some(phi) = phis.first() {
        let field = windowed_flow(&grid, phi, cfg.time_nodes)?;
        report.push(0.0, 0.0, "padding_base", bourgain_norm_padded(&field, &params, TIME_PADDING));
        report.push(0.0, 0.0, "padding_doubled", bourgain_norm_padded(&field, &params, 2 * TIME_PADDING));
        report.check(
            "padding_converged",
            Rule::Ratio {
                num: SampleKey::new("padding_doubled", 0.0, 0.0),
                den: SampleKey::new("padding_base", 0.0, 0.0),
                min: Some(0.995),
                max: Some(1.005),
            },
        );
        let flat = BourgainParams { b: 0.0, ..params };
        let direct = field
            .rows()
            .iter()
            .map(|r| {
                let s = grid.engine().forward(r);
                sobolev_norm_spectrum(&grid, &s, &hk).powi(2)
            })
            .sum::<f64>()
            * field.dt();
        report.push(0.0, 0.0, "plancherel_space_time", bourgain_norm(&field, &flat));
        report.push(0.0, 0.0, "plancherel_direct", direct.sqrt());
        report.check(
            "plancherel",
            Rule::Ratio {
                num: SampleKey::new("plancherel_space_time", 0.0, 0.0),
                den: SampleKey::new("plancherel_direct", 0.0, 0.0),
                min: Some(1.0 - 1e-10),
                max: Some(1.0 + 1e-10),
            },
        );
        report.push(0.0, 0.0, "dual_norm_y", dual_norm_y(&field, &params));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonCheck {
    pub lambda: f64,
    pub velocity: f64,
    pub grid_points: usize,
    pub box_length: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl Default for SolitonCheck {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            velocity: 0.1,
            grid_points: 1024,
            box_length: 16.0 * PI,
            t_final: 1.0,
            dt: 1e-3,
        }
    }
}

/// Accuracy of a solve against the exact traveling soliton at `dt` and `dt/2`.
pub const SOLITON_TOL: f64 = 1e-5;
/// Error reduction required when halving the step.
pub const SOLITON_ORDER_RATIO: f64 = 12.0;

fn soliton_error(check: &SolitonCheck, grid: &FourierGrid, solver: &SolverConfig, dt: f64) -> Result<(f64, f64)> {
    let params = SolitonParams::new(check.lambda, check.velocity)?;
    let (u0, wave) = soliton_initial_data(&params, grid)?;
    let mut control = StepControl::with_scheme(dt, solver.scheme)?;
    control.dealias = solver.dealias;
    let traj = solve_full(&u0, &wave, check.t_final, &control, &Output::Final)?;
    let last = traj.snapshots.last().expect("final snapshot");
    let (u, n) = soliton(&params, check.t_final, grid)?;
    let rel = |a: &[C64], b: &[C64]| {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    };
    let err_u = rel(last.u.samples(), u.samples());
    let n_num = last.n().to_complex();
    Ok((err_u, rel(n_num.samples(), n.to_complex().samples())))
}

/// Solves from soliton data and compares with the exact solution; the step
/// is halved once to measure the order.
pub fn run_soliton(check: &SolitonCheck, solver: &SolverConfig, ov: &Overrides) -> Result<ExperimentReport> {
    let grid = ov.grid(FourierGrid::new(check.grid_points, check.box_length)?)?;
    let dt = ov.dt.unwrap_or(check.dt);
    let inputs = serde_json::json!({ "check": check, "solver": solver, "dt": dt });
    let mut report = ExperimentReport::new("soliton", inputs);
    let steps = [dt, dt / 2.0];
    let errs = ov.map(&steps, |&h| soliton_error(check, &grid, solver, h))?;
    let t = check.t_final;
    for (&h, e) in steps.iter().zip(errs) {
        let (eu, en) = e?;
        report.push(h, t, "rel_error_u", eu);
        report.push(h, t, "rel_error_n", en);
    }
    for name in ["rel_error_u", "rel_error_n"] {
        report.check(
            &format!("{name}_small"),
            Rule::Bound {
                key: SampleKey::new(name, dt, t),
                min: None,
                max: Some(SOLITON_TOL),
            },
        );
    }
    report.check(
        "order_ratio",
        Rule::Ratio {
            num: SampleKey::new("rel_error_u", dt, t),
            den: SampleKey::new("rel_error_u", dt / 2.0, t),
            min: Some(SOLITON_ORDER_RATIO),
            max: None,
        },
    );
    Ok(report)
}
