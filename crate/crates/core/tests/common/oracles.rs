//! Reference values computed independently of the library's quadratures:
//! exact time integrals summed over mode pairs, and continuum integrals of
//! the frequency profiles.

use zakharov::spectral::{FourierGrid, Spectral};
use zakharov::C64 as C;

const I: C = C::new(0.0, 1.0);

/// `∫_0^t e^{ias} ds`.
fn exp_integral(a: f64, t: f64) -> C {
    if (a * t).abs() < 1e-9 {
        return C::new(t, 0.0) + I * a * t * t / 2.0;
    }
    (C::from_polar(1.0, a * t) - 1.0) / (I * a)
}

fn modes(spec: &[C]) -> Vec<(usize, C)> {
    spec.iter().enumerate().filter(|(_, v)| v.norm_sqr() != 0.0).map(|(i, v)| (i, *v)).collect()
}

fn index_of(grid: &FourierGrid, xi: f64) -> usize {
    let j = (xi / grid.dxi()).round() as i64;
    grid.index_of_mode(j).expect("mode on grid")
}

/// First iterate of `n` for data `(u₀, 0, 0)`:
/// `n̂(ξ,t) = −ξ ∫_0^t sin(ξ(t−s)) (|U(s)u₀|²)^(ξ) ds`, with the time
/// integral done exactly for every pair of modes.
pub fn first_iterate_modes(u0: &impl Spectral, t: f64) -> Vec<C> {
    let grid = u0.grid();
    let dxi = grid.dxi();
    let m = modes(u0.spectrum());
    let mut out = vec![C::new(0.0, 0.0); grid.num_points()];
    for &(ja, a) in &m {
        for &(jb, b) in &m {
            let (xa, xb) = (grid.wavenumber(ja), grid.wavenumber(jb));
            let xi = xa - xb;
            if xi == 0.0 {
                continue;
            }
            let theta = xa * xa - xb * xb;
            // ∫ sin(ξ(t−s)) e^{−iθs} ds
            let plus = C::from_polar(1.0, xi * t) * exp_integral(-(xi + theta), t);
            let minus = C::from_polar(1.0, -xi * t) * exp_integral(xi - theta, t);
            let integral = (plus - minus) / (2.0 * I);
            out[index_of(grid, xi)] += -xi * dxi * a * b.conj() * integral;
        }
    }
    out
}

/// `∂²_γ u|_{γ=0}(t) = −2i ∫_0^t U(t−s)[U(s)u₀ · n(s)] ds` with
/// `n̂(ξ,s) = n̂₀(ξ) cos(ξs)` (zero initial velocity).
pub fn second_derivative_modes(u0: &impl Spectral, n0: &impl Spectral, t: f64) -> Vec<C> {
    let grid = u0.grid();
    let dxi = grid.dxi();
    let (um, nm) = (modes(u0.spectrum()), modes(n0.spectrum()));
    let mut out = vec![C::new(0.0, 0.0); grid.num_points()];
    for &(ju, a) in &um {
        for &(jn, b) in &nm {
            let (xu, xn) = (grid.wavenumber(ju), grid.wavenumber(jn));
            let xi = xu + xn;
            let base = xi * xi - xu * xu;
            let integral = 0.5 * (exp_integral(base + xn, t) + exp_integral(base - xn, t));
            out[index_of(grid, xi)] += -2.0 * I * dxi * a * b * C::from_polar(1.0, -t * xi * xi) * integral;
        }
    }
    out
}

/// `(∫ ⟨ξ⟩^{2s} h(ξ)² dξ)^{1/2}` for a profile supported on `[lo, hi]`, by
/// composite Simpson on `2·panels` intervals.
pub fn continuum_norm(h: impl Fn(f64) -> f64, lo: f64, hi: f64, s: f64, panels: usize) -> f64 {
    let n = 2 * panels;
    let dx = (hi - lo) / n as f64;
    let f = |x: f64| (1.0 + x * x).powf(s) * h(x).powi(2);
    let mut acc = f(lo) + f(hi);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + j as f64 * dx);
    }
    (acc * dx / 3.0).sqrt()
}

/// `(Σ ⟨ξ⟩^{2s}|v̂|² Δξ)^{1/2}` written out without the library helper.
pub fn discrete_norm(grid: &FourierGrid, spec: &[C], s: f64) -> f64 {
    let acc: f64 = spec
        .iter()
        .enumerate()
        .map(|(i, v)| (1.0 + grid.wavenumber(i).powi(2)).powf(s) * v.norm_sqr())
        .sum();
    (acc * grid.dxi()).sqrt()
}
