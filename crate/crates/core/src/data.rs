//! Initial-data families: two-box frequency data, exact solitons, the
//! near-soliton decoherence ingredients and the bilinear data for the
//! second-derivative experiment.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::linear::{FreqBox, WaveData};
use crate::norms::{plateau_bump, smooth_step};
use crate::spectral::{derivative, ComplexField, FourierGrid, RealField, Spectral, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Smallest grid whose spacing is at most `dxi_max` and whose 2/3-dealiased
/// band still reaches `reach`.
pub fn resolved_grid(dxi_max: f64, reach: f64) -> Result<FourierGrid> {
    if !(dxi_max > 0.0 && reach > 0.0) {
        return Err(param("grid spacing and reach must be positive"));
    }
    let length = 2.0 * PI / dxi_max;
    let needed = (3.0 * reach / dxi_max).ceil() as usize;
    FourierGrid::new(needed.next_power_of_two().max(8), length)
}

/// Grid for frequency scale `N`: `Δξ = 1/(8N)` and quadratic products of the
/// two boxes survive dealiasing.
pub fn box_grid(n_scale: f64) -> Result<FourierGrid> {
    resolved_grid(1.0 / (8.0 * n_scale), 2.0 * n_scale + 3.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum BoxParts {
    A,
    B,
    AB,
}

impl BoxParts {
    fn has_a(self) -> bool {
        matches!(self, BoxParts::A | BoxParts::AB)
    }

    fn has_b(self) -> bool {
        matches!(self, BoxParts::B | BoxParts::AB)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxData {
    pub n_scale: f64,
    pub k: f64,
    pub parts: BoxParts,
}

impl BoxData {
    pub fn new(n_scale: f64, k: f64, parts: BoxParts) -> Result<Self> {
        if n_scale < 2.0 {
            return Err(param(format!("frequency scale must be >= 2, got {n_scale}")));
        }
        Ok(Self { n_scale, k, parts })
    }

    /// Box A on `[−N−1/N, −N]` and box B on `[N+1, N+1+1/N]`, height `N^{1/2−k}`.
    pub fn profiles(&self) -> (FreqBox, FreqBox) {
        let n = self.n_scale;
        let h = n.powf(0.5 - self.k);
        (
            FreqBox::indicator(-n - 1.0 / n, -n, h),
            FreqBox::indicator(n + 1.0, n + 1.0 + 1.0 / n, h),
        )
    }
}

/// Samples each box by its average over the grid cell, so a box edge that
/// falls on a grid node contributes half its height and the discrete mass
/// equals the continuum mass.
fn sample_boxes(grid: &FourierGrid, boxes: &[FreqBox]) -> Result<Vec<C64>> {
    for b in boxes {
        let inside = b.modes_inside(grid);
        if inside < 4 {
            let (lo, hi) = b.support();
            return Err(Error::Resolution(format!(
                "box [{lo}, {hi}] holds {inside} modes, need at least 4"
            )));
        }
        let (lo, hi) = b.support();
        if lo.abs().max(hi.abs()) + grid.dxi() > grid.max_wavenumber() {
            return Err(Error::Resolution(format!(
                "box [{lo}, {hi}] exceeds the grid band {}",
                grid.max_wavenumber()
            )));
        }
    }
    let dxi = grid.dxi();
    Ok((0..grid.num_points())
        .map(|idx| {
            let xi = grid.wavenumber(idx);
            let v: f64 = boxes.iter().map(|b| b.cell_average(xi, dxi)).sum();
            C64::new(v, 0.0)
        })
        .collect())
}

pub fn make_box_data(data: &BoxData, grid: &FourierGrid) -> Result<ComplexField> {
    let (a, b) = data.profiles();
    if grid.max_wavenumber() < data.n_scale + 2.0 {
        return Err(Error::Resolution(format!(
            "grid band {} below N + 2 = {}",
            grid.max_wavenumber(),
            data.n_scale + 2.0
        )));
    }
    let mut boxes = Vec::new();
    if data.parts.has_a() {
        boxes.push(a);
    }
    if data.parts.has_b() {
        boxes.push(b);
    }
    ComplexField::from_spectrum(grid, sample_boxes(grid, &boxes)?)
}

/// `√2 sech x`, the positive solution of `−f + f″ + f³ = 0`.
pub fn ground_state(grid: &FourierGrid) -> RealField {
    RealField::from_fn(grid, |x| 2f64.sqrt() / x.cosh())
}

/// `‖−f + f″ + f³‖_{L²}` with `f″` computed spectrally.
pub fn ground_state_residual(grid: &FourierGrid) -> f64 {
    let f = ground_state(grid);
    let fxx = RealField::from_spectrum(grid, &derivative(grid, f.spectrum(), 2)).expect("same grid");
    let res: Vec<f64> = f
        .samples()
        .iter()
        .zip(fxx.samples())
        .map(|(&v, &d)| -v + d + v * v * v)
        .collect();
    RealField::new(grid, res).expect("same grid").l2_norm()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolitonParams {
    pub lambda: f64,
    pub velocity: f64,
}

impl SolitonParams {
    pub fn new(lambda: f64, velocity: f64) -> Result<Self> {
        let p = Self { lambda, velocity };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.velocity.abs() < 0.5) {
            return Err(param(format!("soliton velocity must satisfy |N| < 1/2, got {}", self.velocity)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(param(format!("soliton scale must be positive, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        (1.0 - 4.0 * self.velocity * self.velocity).sqrt()
    }
}

/// `(u, n)` of the exact traveling soliton at time `t`:
/// `u = e^{it(λ²−N²)} e^{iNx} √(1−4N²) f_λ(x−2Nt)`, `n = −f_λ(x−2Nt)²`,
/// where `f_λ(x) = λ√2 sech(λx)`.
pub fn soliton(params: &SolitonParams, t: f64, grid: &FourierGrid) -> Result<(ComplexField, RealField)> {
    params.validate()?;
    let (lam, v) = (params.lambda, params.velocity);
    let amp = params.amplitude();
    let phase_t = t * (lam * lam - v * v);
    let f = |y: f64| lam * 2f64.sqrt() / (lam * y).cosh();
    let u = ComplexField::from_fn(grid, |x| C64::from_polar(amp * f(x - 2.0 * v * t), phase_t + v * x));
    let n = RealField::from_fn(grid, |x| -f(x - 2.0 * v * t).powi(2));
    Ok((u, n))
}

/// Soliton initial data in solver form: `u(0)` and wave data `(n(0), ∂_t n(0))`.
pub fn soliton_initial_data(params: &SolitonParams, grid: &FourierGrid) -> Result<(ComplexField, WaveData)> {
    let (u, n) = soliton(params, 0.0, grid)?;
    let (lam, v) = (params.lambda, params.velocity);
    // ∂_t n = 2N (f_λ²)′ = −8Nλ³ sech²(λx) tanh(λx)
    let nt = RealField::from_fn(grid, |x| {
        let s = 1.0 / (lam * x).cosh();
        -8.0 * v * lam.powi(3) * s * s * (lam * x).tanh()
    });
    Ok((u, WaveData::new(n, nt)?))
}

/// The soliton pair of the exact decoherence construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PropPair {
    pub first: SolitonParams,
    pub second: SolitonParams,
    pub velocity: f64,
}

/// `λ₁ = M`, `λ₂ = √(M² + π/(2T))`, `N = (1 − 1/M)/2`.
pub fn prop_pair(m: f64, t_final: f64) -> Result<PropPair> {
    if !(m >= 4.0) {
        return Err(param(format!("M must be >= 4, got {m}")));
    }
    if !(t_final > 0.0) {
        return Err(param(format!("T must be positive, got {t_final}")));
    }
    let velocity = 0.5 * (1.0 - 1.0 / m);
    let lambda2 = (m * m + PI / (2.0 * t_final)).sqrt();
    Ok(PropPair {
        first: SolitonParams::new(m, velocity)?,
        second: SolitonParams::new(lambda2, velocity)?,
        velocity,
    })
}

/// Edge half-width of the smoothed `n̂₀` band.
pub const BAND_EDGE: f64 = 0.25;

/// Band density of `n̂₀`: 1/4 on `2 ≤ |ξ| ≤ 4` (the transform of
/// `cos 3x sin x / x` in this convention), edges smoothed over `±BAND_EDGE`.
pub fn band_profile(xi: f64) -> f64 {
    let r = xi.abs();
    let rise = smooth_step((r - (2.0 - BAND_EDGE)) / (2.0 * BAND_EDGE));
    let fall = smooth_step(((4.0 + BAND_EDGE) - r) / (2.0 * BAND_EDGE));
    0.25 * rise * fall
}

#[derive(Clone, Debug)]
pub struct CctIngredients {
    pub u0_bump: ComplexField,
    pub n0_band: RealField,
    pub g_truncated: RealField,
}

pub fn cct_ingredients(grid: &FourierGrid) -> Result<CctIngredients> {
    if grid.max_wavenumber() < 4.0 + BAND_EDGE + grid.dxi() {
        return Err(Error::Resolution(format!(
            "grid band {} cannot hold the n0 band",
            grid.max_wavenumber()
        )));
    }
    if grid.length() < 8.0 {
        return Err(Error::Resolution("box shorter than the bump support".into()));
    }
    let u0_bump = ComplexField::from_fn(grid, |x| C64::new(plateau_bump(x), 0.0));
    let band: Vec<C64> = grid
        .wavenumbers()
        .iter()
        .map(|&xi| C64::new(band_profile(xi), 0.0))
        .collect();
    let n0_band = RealField::from_spectrum(grid, &band)?;
    let f = ground_state(grid);
    let f2 = RealField::new(grid, f.samples().iter().map(|v| v * v).collect())?;
    let g: Vec<C64> = f2
        .spectrum()
        .iter()
        .enumerate()
        .map(|(idx, &v)| if grid.wavenumber(idx).abs() < 1.0 { ZERO } else { v })
        .collect();
    let g_truncated = RealField::from_spectrum(grid, &g)?;
    Ok(CctIngredients {
        u0_bump,
        n0_band,
        g_truncated,
    })
}

/// Largest scale the desk-scale runs accept.
pub const DESK_LAMBDA_CAP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeFlags {
    /// `λ²T ≤ 2|ln ν|` (the time condition, constant taken as 2).
    pub time_window: bool,
    /// `λ ≥ ν^{-5}`.
    pub lambda_large: bool,
    /// `λ₂/λ₁ ≤ 1 + δ`.
    pub ratio_close: bool,
    /// `λ ≥ ν^{-α}`.
    pub wave_norm_small: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CctSchedule {
    pub delta: f64,
    pub s: f64,
    pub nu: f64,
    pub alpha: f64,
    pub m: f64,
    pub t_final: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub velocity: f64,
    /// `1 − 2N = ν/M`, kept separately because it underflows `N` quickly.
    pub one_minus_2n: f64,
    pub flags: RegimeFlags,
}

/// `α = max((½ − s)/(−s − 3/2), 5)`.
pub fn cct_alpha(s: f64) -> f64 {
    ((0.5 - s) / (-s - 1.5)).max(5.0)
}

/// Builds the schedule for fixed `ν` and `M`, evaluating all regime flags.
pub fn cct_schedule_at(delta: f64, s: f64, nu: f64, m: f64) -> CctSchedule {
    let alpha = cct_alpha(s);
    let ln_nu = nu.ln().abs();
    let t_final = ln_nu / (m * m);
    let lambda1 = m;
    let lambda2 = (PI / (2.0 * t_final) + m * m).sqrt();
    let one_minus_2n = nu / m;
    let velocity = 0.5 * (1.0 - one_minus_2n);
    let flags = RegimeFlags {
        time_window: lambda2 * lambda2 * t_final <= 2.0 * ln_nu,
        lambda_large: lambda1 >= nu.powf(-5.0),
        ratio_close: lambda2 / lambda1 <= 1.0 + delta,
        wave_norm_small: lambda1 >= nu.powf(-alpha),
    };
    CctSchedule {
        delta,
        s,
        nu,
        alpha,
        m,
        t_final,
        lambda1,
        lambda2,
        velocity,
        one_minus_2n,
        flags,
    }
}

/// Schedule for closeness `δ`: `ν` from `λ₂/λ₁ = 1 + δ`, then `M = ν^{−α}`,
/// `T = |ln ν|/M²`, `(1−2N)M = ν`. If the result is not representable or
/// exceeds [`DESK_LAMBDA_CAP`], the error carries the frontier schedule with
/// `M` at the cap.
pub fn cct_schedule(delta: f64, s: f64) -> Result<CctSchedule> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(param(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    if !(s < -1.5) {
        return Err(param(format!("the schedule needs s < -3/2, got {s}")));
    }
    let nu = (-PI / (2.0 * ((1.0 + delta).powi(2) - 1.0))).exp();
    let m = nu.powf(-cct_alpha(s));
    let sched = cct_schedule_at(delta, s, nu, m);
    let representable = {
        let recovered = 1.0 - 2.0 * sched.velocity;
        (recovered - sched.one_minus_2n).abs() <= 1e-3 * sched.one_minus_2n
    };
    if !representable || m > DESK_LAMBDA_CAP || !sched.t_final.is_normal() {
        let reason = if !representable {
            format!("1 - 2N = {:e} is below double precision resolution", sched.one_minus_2n)
        } else {
            format!("M = {m:e} exceeds the desk cap {DESK_LAMBDA_CAP:e}")
        };
        let frontier = cct_schedule_at(delta, s, nu, m.min(DESK_LAMBDA_CAP));
        return Err(Error::ScheduleInfeasible {
            reason,
            frontier: Box::new(frontier),
        });
    }
    Ok(sched)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BilinearVariant {
    /// `s < −1/2`: one u box against a mirrored pair of n boxes.
    BelowStrip,
    /// `s > 2k − 1/2`: the two-box u data with zero wave data.
    AboveStrip,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BilinearData {
    pub n_scale: f64,
    pub k: f64,
    pub s: f64,
    pub variant: BilinearVariant,
}

pub fn make_bilinear_data(data: &BilinearData, grid: &FourierGrid) -> Result<(ComplexField, RealField, RealField)> {
    let n = data.n_scale;
    match data.variant {
        BilinearVariant::AboveStrip => {
            let u0 = make_box_data(&BoxData::new(n, data.k, BoxParts::AB)?, grid)?;
            Ok((u0, RealField::zeros(grid), RealField::zeros(grid)))
        }
        BilinearVariant::BelowStrip => {
            let u0 = make_box_data(&BoxData::new(n, data.k, BoxParts::A)?, grid)?;
            let h = n.powf(0.5 - data.s);
            let right = FreqBox::indicator(2.0 * n - 1.0, 2.0 * n - 1.0 + 1.0 / n, h);
            let left = FreqBox::indicator(-2.0 * n + 1.0 - 1.0 / n, -2.0 * n + 1.0, h);
            let spec = sample_boxes(grid, &[right, left])?;
            let n0 = RealField::from_spectrum_checked(grid, &spec)?;
            Ok((u0, n0, RealField::zeros(grid)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, sobolev_norm, SobolevParams};

    #[test]
    fn box_height_at_k_half() {
        let b = BoxData::new(8.0, 0.5, BoxParts::A).unwrap();
        let (a, _) = b.profiles();
        assert_eq!(a.eval(-8.05), 1.0);
    }

    #[test]
    fn box_grid_resolves() {
        for n in [8.0, 16.0, 64.0] {
            let g = box_grid(n).unwrap();
            assert!(g.dxi() <= 1.0 / (8.0 * n) * (1.0 + 1e-12));
            assert!(g.max_wavenumber() * 2.0 / 3.0 >= 2.0 * n + 3.0);
        }
    }

    #[test]
    fn box_supports_are_exact() {
        let n = 8.0;
        let g = box_grid(n).unwrap();
        let phi = make_box_data(&BoxData::new(n, 0.25, BoxParts::AB).unwrap(), &g).unwrap();
        let (a, b) = BoxData::new(n, 0.25, BoxParts::AB).unwrap().profiles();
        for (idx, v) in phi.spectrum().iter().enumerate() {
            let xi = g.wavenumber(idx);
            let inside = [a.support(), b.support()]
                .iter()
                .any(|(lo, hi)| xi >= lo - 1e-9 && xi <= hi + 1e-9);
            if !inside {
                assert!(v.norm() < 1e-12, "xi = {xi}: {v}");
            }
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = make_grid(1024, 16.0 * PI).unwrap(); // Δξ = 1/8, box width 1/16
        let r = make_box_data(&BoxData::new(16.0, 0.25, BoxParts::A).unwrap(), &g);
        assert!(matches!(r, Err(Error::Resolution(_))));
    }

    #[test]
    fn ground_state_basics() {
        let g = make_grid(1024, 80.0).unwrap();
        let f = ground_state(&g);
        assert!((f.samples()[512] - 2f64.sqrt()).abs() < 1e-15);
        assert!((f.l2_norm().powi(2) - 4.0).abs() < 1e-12);
        assert!(ground_state_residual(&g) < 1e-10);
    }

    #[test]
    fn soliton_at_rest() {
        let g = make_grid(512, 40.0).unwrap();
        let p = SolitonParams::new(1.5, 0.0).unwrap();
        let (u, n) = soliton(&p, 0.0, &g).unwrap();
        for m in 0..g.num_points() {
            let x = g.x(m);
            let s = 1.0 / (1.5 * x).cosh();
            assert!((u.samples()[m] - C64::new(1.5 * 2f64.sqrt() * s, 0.0)).norm() < 1e-14);
            assert!((n.samples()[m] + 2.0 * 2.25 * s * s).abs() < 1e-13);
        }
        assert!(SolitonParams::new(1.0, 0.5).is_err());
        assert!(soliton(&SolitonParams { lambda: 1.0, velocity: -0.7 }, 0.0, &g).is_err());
    }

    #[test]
    fn soliton_mass_is_translation_invariant() {
        let g = make_grid(1024, 60.0).unwrap();
        let p = SolitonParams::new(2.0, 0.3).unwrap();
        let m0 = soliton(&p, 0.0, &g).unwrap().0.l2_norm();
        let m1 = soliton(&p, 3.0, &g).unwrap().0.l2_norm();
        assert!((m0 - m1).abs() < 1e-12);
        assert!((m0 - p.amplitude() * 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn prop_pair_identities() {
        let pair = prop_pair(100.0, 1.0).unwrap();
        assert!((pair.velocity - 0.495).abs() < 1e-15);
        let dphase = 1.0 * (pair.second.lambda.powi(2) - pair.first.lambda.powi(2));
        let z = C64::from_polar(1.0, dphase);
        assert!((z - C64::new(0.0, 1.0)).norm() < 1e-12);
        let r1 = prop_pair(10.0, 1.0).unwrap();
        let r2 = prop_pair(1000.0, 1.0).unwrap();
        assert!(r2.second.lambda / r2.first.lambda < r1.second.lambda / r1.first.lambda);
        assert!(prop_pair(3.0, 1.0).is_err());
        assert!(prop_pair(10.0, 0.0).is_err());
    }

    #[test]
    fn alpha_and_ratio() {
        assert_eq!(cct_alpha(-2.0), 5.0);
        assert!((cct_alpha(-1.6) - 21.0).abs() < 1e-9);
        let s = cct_schedule_at(0.1, -2.0, 1e-3, 50.0);
        let expected = (PI / (2.0 * 1e-3f64.ln().abs()) + 1.0).sqrt();
        assert!((s.lambda2 / s.lambda1 - expected).abs() < 1e-12);
    }

    #[test]
    fn schedule_reports_frontier() {
        match cct_schedule(0.1, -2.0) {
            Err(Error::ScheduleInfeasible { frontier, .. }) => {
                assert_eq!(frontier.m, DESK_LAMBDA_CAP);
                assert!(!frontier.flags.lambda_large);
                assert!(frontier.flags.ratio_close);
            }
            other => panic!("expected an infeasible schedule, got {other:?}"),
        }
        assert!(cct_schedule(0.6, -2.0).is_err());
        assert!(cct_schedule(0.1, -1.0).is_err());
    }

    #[test]
    fn band_profile_support() {
        assert_eq!(band_profile(1.75), 0.0);
        assert_eq!(band_profile(4.25), 0.0);
        assert_eq!(band_profile(-3.0), 0.25);
        assert!((band_profile(2.0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn cct_ingredient_supports() {
        let g = make_grid(2048, 64.0).unwrap();
        let c = cct_ingredients(&g).unwrap();
        for (idx, (n, gt)) in c.n0_band.spectrum().iter().zip(c.g_truncated.spectrum()).enumerate() {
            let xi = g.wavenumber(idx).abs();
            if xi <= 2.0 - BAND_EDGE || xi >= 4.0 + BAND_EDGE {
                assert!(n.norm() < 1e-14);
            }
            if xi < 1.0 {
                assert!(gt.norm() < 1e-14);
            }
        }
        let x0 = g.index_of_mode(0).map(|_| g.num_points() / 2).unwrap();
        assert_eq!(c.u0_bump.samples()[x0], C64::new(1.0, 0.0));
    }

    #[test]
    fn bilinear_variants() {
        let n = 8.0;
        let g = box_grid(n).unwrap();
        let d = BilinearData {
            n_scale: n,
            k: 0.25,
            s: 0.25,
            variant: BilinearVariant::AboveStrip,
        };
        let (u, n0, _) = make_bilinear_data(&d, &g).unwrap();
        let phi = make_box_data(&BoxData::new(n, 0.25, BoxParts::AB).unwrap(), &g).unwrap();
        assert_eq!(u.spectrum(), phi.spectrum());
        assert_eq!(n0.max_abs(), 0.0);

        let d = BilinearData {
            variant: BilinearVariant::BelowStrip,
            s: -1.0,
            ..d
        };
        let (_, n0, _) = make_bilinear_data(&d, &g).unwrap();
        assert!(sobolev_norm(&n0, &SobolevParams::new(-1.0)) > 0.0);
    }
}
