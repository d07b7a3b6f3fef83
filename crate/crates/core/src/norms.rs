//! Space-time Bourgain-type norms on windowed trajectories, the time cutoff
//! `ψ`, and the parameter table for the well-posedness strip.
//!
//! The time transform is unitary, `ẑ(ξ,τ) = (2π)^{-1/2} ∫ e^{-itτ} ẑ(ξ,t) dt`,
//! so with `b = 0` the norm reduces to `‖z‖_{L²_t H^k_x}`.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::spectral::{FourierGrid, C64};

/// `C^∞` step: 0 for `y ≤ 0`, 1 for `y ≥ 1`, built from `e^{-1/y}`.
pub fn smooth_step(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / y).exp();
    let b = (-1.0 / (1.0 - y)).exp();
    a / (a + b)
}

/// `ψ`: 1 on `[−1, 1]`, 0 outside `[−2, 2]`, smooth in between.
pub fn plateau_bump(t: f64) -> f64 {
    smooth_step(2.0 - t.abs())
}

/// `ψ_T(t) = ψ(t/T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeCutoff {
    pub scale: f64,
}

impl TimeCutoff {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(param(format!("cutoff scale must be positive, got {scale}")));
        }
        Ok(Self { scale })
    }

    pub fn eval(&self, t: f64) -> f64 {
        plateau_bump(t / self.scale)
    }
}

/// Field sampled at uniform times on `[−T_w, T_w]`, one physical row per time.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: FourierGrid,
    times: Vec<f64>,
    rows: Vec<Vec<C64>>,
}

impl SpaceTimeField {
    /// Samples `f(t)` at `num_times` uniform nodes on `[−half_window, half_window]`.
    pub fn sample(
        grid: &FourierGrid,
        half_window: f64,
        num_times: usize,
        mut f: impl FnMut(f64) -> Vec<C64>,
    ) -> Result<Self> {
        if num_times < 2 || !(half_window > 0.0) {
            return Err(param("need at least two time samples on a nonempty window"));
        }
        let dt = 2.0 * half_window / (num_times - 1) as f64;
        let times: Vec<f64> = (0..num_times).map(|n| -half_window + n as f64 * dt).collect();
        let mut rows = Vec::with_capacity(num_times);
        for &t in &times {
            let row = f(t);
            grid.check_len(row.len())?;
            rows.push(row);
        }
        Ok(Self {
            grid: grid.clone(),
            times,
            rows,
        })
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rows(&self) -> &[Vec<C64>] {
        &self.rows
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn windowed(&self, cutoff: &TimeCutoff) -> Self {
        let rows = self
            .times
            .iter()
            .zip(&self.rows)
            .map(|(&t, row)| {
                let w = cutoff.eval(t);
                row.iter().map(|v| v * w).collect()
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            rows,
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            rows: self.rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Modulation `⟨τ + ξ²⟩`.
    Schrodinger,
    /// Modulation `⟨τ + ξ⟩`.
    WavePlus,
    /// Modulation `⟨τ − ξ⟩`.
    WaveMinus,
}

impl Flavor {
    fn symbol(self, xi: f64) -> f64 {
        match self {
            Flavor::Schrodinger => xi * xi,
            Flavor::WavePlus => xi,
            Flavor::WaveMinus => -xi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BourgainParams {
    /// Spatial Sobolev index (`k` or `s`).
    pub index: f64,
    /// Modulation exponent.
    pub b: f64,
    pub flavor: Flavor,
}

/// Zero-padding factor of the time window before the τ transform.
pub const TIME_PADDING: usize = 4;

/// Space-time spectrum `|ẑ(ξ_j, τ_l)|` with the τ grid, padded by `padding`.
struct SpaceTimeSpectrum {
    taus: Vec<f64>,
    dtau: f64,
    /// `modulus[j][l]` for spatial index `j` and τ index `l`.
    modulus: Vec<Vec<f64>>,
}

fn space_time_spectrum(field: &SpaceTimeField, padding: usize) -> SpaceTimeSpectrum {
    let grid = &field.grid;
    let nt = field.times.len();
    let p = padding * nt;
    let dt = field.dt();
    let mut engine = grid.engine();
    let spatial: Vec<Vec<C64>> = field.rows.iter().map(|r| engine.forward(r)).collect();
    let fft = FftPlanner::new().plan_fft_forward(p);
    let norm = dt / (2.0 * PI).sqrt();
    let mut modulus = Vec::with_capacity(grid.num_points());
    let mut column = vec![C64::new(0.0, 0.0); p];
    for j in 0..grid.num_points() {
        column.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (n, row) in spatial.iter().enumerate() {
            column[n] = row[j];
        }
        fft.process(&mut column);
        modulus.push(column.iter().map(|v| norm * v.norm()).collect());
    }
    let dtau = 2.0 * PI / (p as f64 * dt);
    let taus = (0..p)
        .map(|l| {
            let signed = if l < p / 2 { l as i64 } else { l as i64 - p as i64 };
            signed as f64 * dtau
        })
        .collect();
    SpaceTimeSpectrum {
        taus,
        dtau,
        modulus,
    }
}

fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `(∬ ⟨ξ⟩^{2k} ⟨τ + w(ξ)⟩^{2b} |ẑ|² dξ dτ)^{1/2}`. The field should already be
/// multiplied by a time cutoff; the τ grid must resolve `|w(ξ)|` on the support.
pub fn bourgain_norm(field: &SpaceTimeField, params: &BourgainParams) -> f64 {
    bourgain_norm_padded(field, params, TIME_PADDING)
}

pub fn bourgain_norm_padded(field: &SpaceTimeField, params: &BourgainParams, padding: usize) -> f64 {
    let spec = space_time_spectrum(field, padding);
    let grid = &field.grid;
    let mut acc = 0.0;
    for (j, col) in spec.modulus.iter().enumerate() {
        let xi = grid.wavenumber(j);
        let w = params.flavor.symbol(xi);
        let mut inner = 0.0;
        for (tau, m) in spec.taus.iter().zip(col) {
            if *m != 0.0 {
                inner += japanese(tau + w).powf(2.0 * params.b) * m * m;
            }
        }
        acc += japanese(xi).powf(2.0 * params.index) * inner;
    }
    (acc * spec.dtau * grid.dxi()).sqrt()
}

/// `(∫ ⟨ξ⟩^{2k} (∫ ⟨τ + w(ξ)⟩^{-1} |ẑ| dτ)² dξ)^{1/2}`; `params.b` is ignored.
pub fn dual_norm_y(field: &SpaceTimeField, params: &BourgainParams) -> f64 {
    let spec = space_time_spectrum(field, TIME_PADDING);
    let grid = &field.grid;
    let mut acc = 0.0;
    for (j, col) in spec.modulus.iter().enumerate() {
        let xi = grid.wavenumber(j);
        let w = params.flavor.symbol(xi);
        let inner: f64 = spec
            .taus
            .iter()
            .zip(col)
            .map(|(tau, m)| m / japanese(tau + w))
            .sum::<f64>()
            * spec.dtau;
        acc += japanese(xi).powf(2.0 * params.index) * inner * inner;
    }
    (acc * grid.dxi()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub b1: f64,
    pub c1: f64,
    pub b: f64,
    pub c: f64,
    pub epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 0.01;

pub fn table1_params(k: f64, s: f64) -> Result<Table1Row> {
    table1_params_with(k, s, DEFAULT_EPSILON)
}

/// Modulation exponents for `(k, s)` in the well-posedness strip
/// `k ≥ 0, s ≥ −½, −1 ≤ s−k < ½, s ≤ 2k − ½`.
pub fn table1_params_with(k: f64, s: f64, epsilon: f64) -> Result<Table1Row> {
    let d = s - k;
    let in_strip = k >= 0.0 && s >= -0.5 && d >= -1.0 && d < 0.5 && s <= 2.0 * k - 0.5;
    if !in_strip {
        return Err(Error::Domain(format!("(k, s) = ({k}, {s}) is outside the strip")));
    }
    let e = epsilon;
    let (b1, c1, b, c) = if d == -1.0 {
        (0.5 - e, 0.5, 0.75 - 3.0 * e, 0.25 + 2.0 * e)
    } else if d < -0.5 {
        (d / 2.0 + 1.0 - e, -d / 2.0, 0.75 - 2.0 * e, 0.25 + e)
    } else if d <= 0.0 {
        (0.75 - 2.0 * e, 0.25 + e, 0.75 - 2.0 * e, 0.25 + e)
    } else {
        (0.75 - 2.0 * e, 0.25 + e, 0.75 - d / 2.0 - 2.0 * e, d / 2.0 + 0.25 + e)
    };
    Ok(Table1Row {
        b1,
        c1,
        b,
        c,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn cutoff_plateau_and_support() {
        for t in [-1.0, -0.3, 0.0, 0.99, 1.0] {
            assert_eq!(plateau_bump(t), 1.0);
        }
        for t in [-2.0, 2.0, 2.5, -7.0] {
            assert_eq!(plateau_bump(t), 0.0);
        }
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = plateau_bump(1.0 + i as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v) && v <= prev);
            prev = v;
        }
        assert!((plateau_bump(1.5) - 0.5).abs() < 1e-15);
        assert_eq!(TimeCutoff::new(0.5).unwrap().eval(1.0), 0.0);
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let g = make_grid(16, 2.0 * PI).unwrap();
        let z = SpaceTimeField::sample(&g, 2.0, 33, |_| vec![C64::new(0.0, 0.0); 16]).unwrap();
        let p = BourgainParams {
            index: 1.0,
            b: 0.7,
            flavor: Flavor::Schrodinger,
        };
        assert_eq!(bourgain_norm(&z, &p), 0.0);
        assert_eq!(dual_norm_y(&z, &p), 0.0);
    }

    #[test]
    fn table_rows() {
        let r = table1_params(1.0, 0.25).unwrap();
        assert!((r.b1 - (-0.375 + 1.0 - 0.01)).abs() < 1e-15);
        assert!((r.c1 - 0.375).abs() < 1e-15);
        let r = table1_params(0.5, 0.5).unwrap();
        assert!((r.b1 - 0.73).abs() < 1e-15 && (r.c1 - 0.26).abs() < 1e-15);
        assert_eq!(table1_params(1.0, 0.0).unwrap().c1, 0.5);
        let r = table1_params(1.0, 1.25).unwrap();
        assert!((r.b - (0.75 - 0.125 - 0.02)).abs() < 1e-15);
        assert!(matches!(table1_params(0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(table1_params(1.0, 1.5), Err(Error::Domain(_))));
    }
}
