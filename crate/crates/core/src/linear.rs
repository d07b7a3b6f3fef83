//! Exact linear propagators, Duhamel quadratures and closed-form first iterates.
//!
//! Sign convention for the wave part: `W_±∗_R f(x,t) = ½∫_0^t f(x∓s, t−s) ds`,
//! so `(∂_t ± ∂_x) W_±∗_R f = ½ f`.

use crate::error::{param, Error, Result};
use crate::spectral::{shift_symbol, ComplexField, FftEngine, FourierGrid, RealField, Spectral, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Spectrum of `U(t)u`.
pub fn schrodinger_group(u0: &ComplexField, t: f64) -> ComplexField {
    let grid = u0.grid();
    let mut spec = u0.spectrum().to_vec();
    apply_schrodinger(grid, &mut spec, t);
    ComplexField::from_spectrum(grid, spec).expect("grid-consistent spectrum")
}

/// Multiplies by `e^{-itξ²}` in place.
pub fn apply_schrodinger(grid: &FourierGrid, spectrum: &mut [C64], t: f64) {
    for (idx, v) in spectrum.iter_mut().enumerate() {
        if *v != ZERO {
            let xi = grid.wavenumber(idx);
            *v *= C64::from_polar(1.0, -t * xi * xi);
        }
    }
}

/// Nonzero modes `(index, value)` in index order.
type Modes = Vec<(usize, C64)>;

fn nonzero_modes(spec: &[C64]) -> Modes {
    spec.iter().enumerate().filter(|(_, v)| **v != ZERO).map(|(i, v)| (i, *v)).collect()
}

/// Direct convolution pays off when the pair count is below a few FFT passes.
fn prefer_sparse(num_points: usize, na: usize, nb: usize) -> bool {
    na * nb <= 4 * num_points
}

/// Circular convolution of two sparse spectra, `Δξ Σ â_j b̂_l` at `j + l`.
fn sparse_product(grid: &FourierGrid, a: &[(usize, C64)], b: &[(usize, C64)], conj_b: bool) -> Modes {
    let m = grid.num_points();
    let dxi = grid.dxi();
    let mut out: Modes = Vec::with_capacity(a.len() * b.len());
    for &(ia, va) in a {
        for &(ib, vb) in b {
            // conj(b)^ at index j is conj(b̂ at −j)
            let (ib, vb) = if conj_b { ((m - ib) % m, vb.conj()) } else { (ib, vb) };
            out.push(((ia + ib) % m, dxi * va * vb));
        }
    }
    out.sort_by_key(|p| p.0);
    let mut merged: Modes = Vec::with_capacity(out.len());
    for (idx, v) in out {
        match merged.last_mut() {
            Some(last) if last.0 == idx => last.1 += v,
            _ => merged.push((idx, v)),
        }
    }
    merged
}

fn scatter(num_points: usize, modes: &[(usize, C64)]) -> Vec<C64> {
    let mut out = vec![ZERO; num_points];
    for &(idx, v) in modes {
        out[idx] += v;
    }
    out
}

/// Spectrum of `a·b` (or `a·b̄` when `conj_b`). Spectra with few nonzero
/// modes are convolved directly; the result is the same circular product the
/// FFT route gives, so the choice only affects speed and roundoff.
pub(crate) fn product_spectrum(engine: &mut FftEngine, a_hat: &[C64], b_hat: &[C64], conj_b: bool) -> Vec<C64> {
    let grid = engine.grid().clone();
    let m = grid.num_points();
    let a = nonzero_modes(a_hat);
    let b = nonzero_modes(b_hat);
    if prefer_sparse(m, a.len(), b.len()) {
        return scatter(m, &sparse_product(&grid, &a, &b, conj_b));
    }
    let mut x = engine.inverse(a_hat);
    let y = engine.inverse(b_hat);
    for (p, q) in x.iter_mut().zip(&y) {
        *p *= if conj_b { q.conj() } else { *q };
    }
    engine.forward_in_place(&mut x);
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Wave initial data `(n0, n1)` with the low/high split of `n1` at `low_cutoff`.
#[derive(Clone, Debug)]
pub struct WaveData {
    pub n0: RealField,
    pub n1: RealField,
    pub low_cutoff: f64,
}

impl WaveData {
    pub fn new(n0: RealField, n1: RealField) -> Result<Self> {
        Self::with_cutoff(n0, n1, 1.0)
    }

    pub fn with_cutoff(n0: RealField, n1: RealField, low_cutoff: f64) -> Result<Self> {
        if n0.grid() != n1.grid() {
            return Err(param("n0 and n1 live on different grids"));
        }
        if !(low_cutoff > 0.0) {
            return Err(param(format!("low cutoff must be positive, got {low_cutoff}")));
        }
        Ok(Self {
            n0,
            n1,
            low_cutoff,
        })
    }

    pub fn zero(grid: &FourierGrid) -> Self {
        Self {
            n0: RealField::zeros(grid),
            n1: RealField::zeros(grid),
            low_cutoff: 1.0,
        }
    }

    pub fn grid(&self) -> &FourierGrid {
        self.n0.grid()
    }

    /// `(n̂_{1L}, n̂_{1H})` split by `|ξ| < low_cutoff`.
    pub fn split_n1(&self) -> (Vec<C64>, Vec<C64>) {
        let grid = self.grid();
        let spec = self.n1.spectrum();
        let mut low = vec![ZERO; spec.len()];
        let mut high = vec![ZERO; spec.len()];
        for (idx, &v) in spec.iter().enumerate() {
            if grid.wavenumber(idx).abs() < self.low_cutoff {
                low[idx] = v;
            } else {
                high[idx] = v;
            }
        }
        (low, high)
    }

    /// `ν̂ = n̂_{1H}/(iξ)`, the antiderivative of the high part of `n1`.
    pub fn nu_spectrum(&self) -> Vec<C64> {
        let grid = self.grid();
        let (_, high) = self.split_n1();
        high.iter()
            .enumerate()
            .map(|(idx, &v)| {
                let xi = grid.odd_wavenumber(idx);
                if xi == 0.0 {
                    ZERO
                } else {
                    v / C64::new(0.0, xi)
                }
            })
            .collect()
    }

    /// Spectra of `n_±(0) = ½n0 ∓ ½ν`.
    pub fn initial_split(&self) -> (Vec<C64>, Vec<C64>) {
        let nu = self.nu_spectrum();
        let n0 = self.n0.spectrum();
        let plus = n0.iter().zip(&nu).map(|(a, b)| 0.5 * (a - b)).collect();
        let minus = n0.iter().zip(&nu).map(|(a, b)| 0.5 * (a + b)).collect();
        (plus, minus)
    }
}

/// `(1 - e^{-itξ})/(iξ)`, equal to `t` at `ξ = 0`.
fn transport_integral(t: f64, xi: f64) -> C64 {
    let z = 0.5 * t * xi;
    let sinc = if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
    C64::from_polar(t * sinc, -z)
}

/// Split wave data ready for repeated evaluation of `W_±(n0, n1)(t)`.
struct WavePropagator {
    grid: FourierGrid,
    p0: Vec<C64>,
    m0: Vec<C64>,
    low: Vec<C64>,
}

impl WavePropagator {
    fn new(data: &WaveData) -> Self {
        let (p0, m0) = data.initial_split();
        let (low, _) = data.split_n1();
        Self {
            grid: data.grid().clone(),
            p0,
            m0,
            low,
        }
    }

    fn at(&self, idx: usize, t: f64) -> (C64, C64) {
        let grid = &self.grid;
        let (p, m, l) = (self.p0[idx], self.m0[idx], self.low[idx]);
        if p == ZERO && m == ZERO && l == ZERO {
            return (ZERO, ZERO);
        }
        let xi = grid.odd_wavenumber(idx);
        (
            p * shift_symbol(grid, idx, t) + 0.5 * l * transport_integral(t, xi),
            m * shift_symbol(grid, idx, -t) - 0.5 * l * transport_integral(-t, xi),
        )
    }

    fn spectra(&self, t: f64) -> (Vec<C64>, Vec<C64>) {
        (0..self.p0.len()).map(|idx| self.at(idx, t)).unzip()
    }

    /// Indices where `W(n0, n1)` can be nonzero.
    fn support(&self) -> Vec<usize> {
        (0..self.p0.len())
            .filter(|&i| self.p0[i] != ZERO || self.m0[i] != ZERO || self.low[i] != ZERO)
            .collect()
    }
}

fn evolve_modes(grid: &FourierGrid, modes: &[(usize, C64)], t: f64) -> Modes {
    modes
        .iter()
        .map(|&(idx, v)| {
            let xi = grid.wavenumber(idx);
            (idx, v * C64::from_polar(1.0, -t * xi * xi))
        })
        .collect()
}

/// Spectra of `W_±(n0, n1)(t)`.
pub fn wave_group_spectra(data: &WaveData, t: f64) -> (Vec<C64>, Vec<C64>) {
    WavePropagator::new(data).spectra(t)
}

/// `(W_+(n0,n1)(t), W_-(n0,n1)(t))`; their sum solves the free wave equation.
pub fn wave_group(data: &WaveData, t: f64) -> (RealField, RealField) {
    let grid = data.grid();
    let (plus, minus) = wave_group_spectra(data, t);
    let mut engine = grid.engine();
    (
        RealField::from_spectrum_with(&mut engine, &plus),
        RealField::from_spectrum_with(&mut engine, &minus),
    )
}

/// Uniform nodes on `[0, t_final]` with fourth-order weights: composite
/// Simpson for an even number of intervals, Simpson plus a closing 3/8 panel
/// otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Default node density for Duhamel quadratures.
pub const DEFAULT_NODES_PER_UNIT: f64 = 65.0;

impl TimeGrid {
    pub fn uniform(t_final: f64, num_nodes: usize) -> Result<Self> {
        if num_nodes < 3 {
            return Err(param(format!("need at least 3 time nodes, got {num_nodes}")));
        }
        if !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(param(format!("final time must be nonnegative, got {t_final}")));
        }
        let n = num_nodes - 1;
        let h = t_final / n as f64;
        let nodes = (0..=n).map(|j| j as f64 * h).collect();
        let mut weights = vec![0.0; num_nodes];
        let simpson_end = if n % 2 == 0 { n } else { n - 3 };
        for j in (0..simpson_end).step_by(2) {
            weights[j] += h / 3.0;
            weights[j + 1] += 4.0 * h / 3.0;
            weights[j + 2] += h / 3.0;
        }
        if n % 2 == 1 {
            let j = simpson_end;
            for (off, c) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
                weights[j + off] += 3.0 * h / 8.0 * c;
            }
        }
        Ok(Self {
            t_final,
            nodes,
            weights,
        })
    }

    /// At least `per_unit` nodes per unit time, with an even interval count.
    pub fn with_density(t_final: f64, per_unit: f64) -> Result<Self> {
        let mut intervals = ((per_unit * t_final).ceil() as usize).max(2);
        intervals += intervals % 2;
        Self::uniform(t_final, intervals + 1)
    }

    /// Same window with twice as many intervals.
    pub fn refined(&self) -> Self {
        Self::uniform(self.t_final, 2 * (self.nodes.len() - 1) + 1).expect("refining a valid grid")
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Relative-change target for quadrature refinement.
pub const QUADRATURE_TOL: f64 = 1e-4;
/// Doublings tried before giving up.
pub const MAX_REFINEMENTS: usize = 10;

/// Summary values on successively refined grids.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RefinementTrace {
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

/// Evaluates `eval` on `start`, then on doubled grids, until the relative
/// change of `summary` between consecutive grids is below `tol`.
pub fn refine_until_converged<T>(
    start: TimeGrid,
    tol: f64,
    max_refinements: usize,
    mut eval: impl FnMut(&TimeGrid) -> Result<T>,
    summary: impl Fn(&T) -> f64,
) -> Result<(T, RefinementTrace)> {
    let mut times = start;
    let mut current = eval(&times)?;
    let mut trace = RefinementTrace {
        nodes: vec![times.len()],
        values: vec![summary(&current)],
    };
    let mut last_change = f64::INFINITY;
    for _ in 0..max_refinements {
        times = times.refined();
        let next = eval(&times)?;
        let (a, b) = (summary(&current), summary(&next));
        trace.nodes.push(times.len());
        trace.values.push(b);
        last_change = if b == 0.0 && a == 0.0 { 0.0 } else { (b - a).abs() / b.abs().max(a.abs()) };
        current = next;
        if last_change < tol {
            return Ok((current, trace));
        }
    }
    Err(Error::Quadrature {
        refinements: max_refinements,
        last_change,
    })
}

/// `Σ_j w_j P(t - t_j) f̂(t_j)` with the propagator symbol `P(idx, elapsed)`.
/// Nodes are visited in order, so the sum is reproducible.
fn retarded_quadrature(
    grid: &FourierGrid,
    times: &TimeGrid,
    symbol: impl Fn(usize, f64) -> C64,
    mut source: impl FnMut(usize, f64, &mut FftEngine) -> Result<Vec<C64>>,
) -> Result<Vec<C64>> {
    let mut engine = grid.engine();
    let mut acc = vec![ZERO; grid.num_points()];
    for (j, (&tj, &wj)) in times.nodes().iter().zip(times.weights()).enumerate() {
        let f = source(j, tj, &mut engine)?;
        grid.check_len(f.len())?;
        let elapsed = times.t_final() - tj;
        for (idx, (a, v)) in acc.iter_mut().zip(&f).enumerate() {
            if *v != ZERO {
                *a += wj * symbol(idx, elapsed) * v;
            }
        }
    }
    Ok(acc)
}

/// Sparse counterpart of [`retarded_quadrature`] for sources with few modes.
fn retarded_quadrature_sparse(
    grid: &FourierGrid,
    times: &TimeGrid,
    symbol: impl Fn(usize, f64) -> C64,
    mut source: impl FnMut(f64) -> Modes,
) -> Vec<C64> {
    let mut acc = vec![ZERO; grid.num_points()];
    for (&tj, &wj) in times.nodes().iter().zip(times.weights()) {
        let elapsed = times.t_final() - tj;
        for (idx, v) in source(tj) {
            acc[idx] += wj * symbol(idx, elapsed) * v;
        }
    }
    acc
}

fn schrodinger_symbol(grid: &FourierGrid) -> impl Fn(usize, f64) -> C64 + '_ {
    |idx, s| {
        let xi = grid.wavenumber(idx);
        C64::from_polar(1.0, -s * xi * xi)
    }
}

fn box_inverse_symbol(grid: &FourierGrid) -> impl Fn(usize, f64) -> C64 + '_ {
    |idx, s| {
        let xi = grid.odd_wavenumber(idx);
        C64::new(-xi * (s * xi).sin(), 0.0)
    }
}

fn check_path_len(times: &TimeGrid, n: usize) -> Result<()> {
    if times.len() != n {
        return Err(Error::Shape {
            expected: times.len(),
            actual: n,
        });
    }
    Ok(())
}

/// `U∗_R f(t) = ∫_0^t U(t−t′) f(t′) dt′` from samples at the nodes of `times`.
pub fn duhamel_schrodinger(forcing: &[ComplexField], times: &TimeGrid) -> Result<ComplexField> {
    check_path_len(times, forcing.len())?;
    let grid = forcing[0].grid().clone();
    let spec = duhamel_schrodinger_with(&grid, times, |j, _, _| Ok(forcing[j].spectrum().to_vec()))?;
    ComplexField::from_spectrum(&grid, spec)
}

/// Streaming form: `source(j, t_j, engine)` returns the forcing spectrum at node `j`.
pub fn duhamel_schrodinger_with(
    grid: &FourierGrid,
    times: &TimeGrid,
    source: impl FnMut(usize, f64, &mut FftEngine) -> Result<Vec<C64>>,
) -> Result<Vec<C64>> {
    retarded_quadrature(grid, times, schrodinger_symbol(grid), source)
}

/// `W_±∗_R f(t)` from real samples at the nodes of `times`.
pub fn duhamel_wave(forcing: &[RealField], sign: Sign, times: &TimeGrid) -> Result<RealField> {
    check_path_len(times, forcing.len())?;
    let grid = forcing[0].grid().clone();
    let spec = duhamel_wave_with(&grid, sign, times, |j, _, _| Ok(forcing[j].spectrum().to_vec()))?;
    RealField::from_spectrum(&grid, &spec)
}

pub fn duhamel_wave_with(
    grid: &FourierGrid,
    sign: Sign,
    times: &TimeGrid,
    source: impl FnMut(usize, f64, &mut FftEngine) -> Result<Vec<C64>>,
) -> Result<Vec<C64>> {
    let sg = sign.value();
    retarded_quadrature(grid, times, |idx, s| 0.5 * shift_symbol(grid, idx, sg * s), source)
}

/// Spectrum of `|u|²` from the spectrum of `u`.
pub(crate) fn modulus_squared_spectrum(engine: &mut FftEngine, u_hat: &[C64]) -> Vec<C64> {
    product_spectrum(engine, u_hat, u_hat, true)
}

/// `n(t) = (W_−∗_R − W_+∗_R)(∂_x|u|²) = □^{-1}∂_x²|u|²`, the wave response with
/// zero data. In Fourier space the kernel is `−ξ sin((t−t′)ξ)`.
pub fn box_inverse_forcing(u_path: &[ComplexField], times: &TimeGrid) -> Result<RealField> {
    check_path_len(times, u_path.len())?;
    let grid = u_path[0].grid().clone();
    let spec = box_inverse_forcing_with(&grid, times, |j, _, _| Ok(u_path[j].spectrum().to_vec()))?;
    RealField::from_spectrum(&grid, &spec)
}

/// Streaming form: `u_source` returns the spectrum of `u(t_j)`.
pub fn box_inverse_forcing_with(
    grid: &FourierGrid,
    times: &TimeGrid,
    mut u_source: impl FnMut(usize, f64, &mut FftEngine) -> Result<Vec<C64>>,
) -> Result<Vec<C64>> {
    retarded_quadrature(grid, times, box_inverse_symbol(grid), |j, t, engine| {
        let u = u_source(j, t, engine)?;
        Ok(modulus_squared_spectrum(engine, &u))
    })
}

/// `□^{-1}∂_x²|U(t′)u₀|²` at `t = times.t_final()`: the wave response to the
/// free Schrödinger flow, i.e. the first iterate of `n` for data `(u₀, 0, 0)`.
pub fn linear_wave_response(u0: &ComplexField, times: &TimeGrid) -> Result<RealField> {
    let grid = u0.grid().clone();
    let modes = nonzero_modes(u0.spectrum());
    let spec = if prefer_sparse(grid.num_points(), modes.len(), modes.len()) {
        retarded_quadrature_sparse(&grid, times, box_inverse_symbol(&grid), |t| {
            let u = evolve_modes(&grid, &modes, t);
            sparse_product(&grid, &u, &u, true)
        })
    } else {
        let u_hat = u0.spectrum().to_vec();
        box_inverse_forcing_with(&grid, times, |_, t, _| {
            let mut u = u_hat.clone();
            apply_schrodinger(&grid, &mut u, t);
            Ok(u)
        })?
    };
    RealField::from_spectrum(&grid, &spec)
}

/// `W_±∗_R ∂_x(U(t′)a · conj(U(t′)b))`, one bilinear interaction of two linear flows.
pub fn linear_wave_interaction(
    sign: Sign,
    a0: &ComplexField,
    b0: &ComplexField,
    times: &TimeGrid,
) -> Result<ComplexField> {
    let grid = a0.grid().clone();
    if b0.grid() != &grid {
        return Err(param("interaction factors live on different grids"));
    }
    let derivative = |idx: usize, v: C64| v * C64::new(0.0, grid.odd_wavenumber(idx));
    let (am, bm) = (nonzero_modes(a0.spectrum()), nonzero_modes(b0.spectrum()));
    if prefer_sparse(grid.num_points(), am.len(), bm.len()) {
        let sg = sign.value();
        let spec = retarded_quadrature_sparse(
            &grid,
            times,
            |idx, s| 0.5 * shift_symbol(&grid, idx, sg * s),
            |t| {
                let (a, b) = (evolve_modes(&grid, &am, t), evolve_modes(&grid, &bm, t));
                sparse_product(&grid, &a, &b, true)
                    .into_iter()
                    .map(|(idx, v)| (idx, derivative(idx, v)))
                    .collect()
            },
        );
        return ComplexField::from_spectrum(&grid, spec);
    }
    let (ahat, bhat) = (a0.spectrum().to_vec(), b0.spectrum().to_vec());
    let spec = duhamel_wave_with(&grid, sign, times, |_, t, engine| {
        let mut a = ahat.clone();
        let mut b = bhat.clone();
        apply_schrodinger(&grid, &mut a, t);
        apply_schrodinger(&grid, &mut b, t);
        let mut ab = product_spectrum(engine, &a, &b, true);
        for (idx, v) in ab.iter_mut().enumerate() {
            *v = derivative(idx, *v);
        }
        Ok(ab)
    })?;
    ComplexField::from_spectrum(&grid, spec)
}

/// Piecewise-linear spectral density with compact support. Jumps are allowed
/// between segments, which is how indicator boxes are represented.
#[derive(Clone, Debug, PartialEq)]
pub struct FreqBox {
    segments: Vec<Segment>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Segment {
    a: f64,
    b: f64,
    ya: f64,
    yb: f64,
}

impl Segment {
    fn eval(&self, xi: f64) -> f64 {
        let w = (xi - self.a) / (self.b - self.a);
        self.ya + w * (self.yb - self.ya)
    }

    /// Exact integral over `[lo, hi] ∩ [a, b]`.
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let l = lo.max(self.a);
        let h = hi.min(self.b);
        if h <= l {
            return 0.0;
        }
        0.5 * (self.eval(l) + self.eval(h)) * (h - l)
    }
}

impl FreqBox {
    pub fn indicator(lo: f64, hi: f64, height: f64) -> Self {
        assert!(hi > lo && height >= 0.0, "bad indicator box");
        Self {
            segments: vec![Segment {
                a: lo,
                b: hi,
                ya: height,
                yb: height,
            }],
        }
    }

    pub fn triangle(center: f64, half_width: f64, height: f64) -> Self {
        assert!(half_width > 0.0 && height >= 0.0, "bad triangle");
        Self {
            segments: vec![
                Segment {
                    a: center - half_width,
                    b: center,
                    ya: 0.0,
                    yb: height,
                },
                Segment {
                    a: center,
                    b: center + half_width,
                    ya: height,
                    yb: 0.0,
                },
            ],
        }
    }

    pub fn support(&self) -> (f64, f64) {
        let lo = self.segments.iter().map(|s| s.a).fold(f64::INFINITY, f64::min);
        let hi = self.segments.iter().map(|s| s.b).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Pointwise value; closed intervals, so box edges evaluate to the height.
    pub fn eval(&self, xi: f64) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.a <= xi && xi <= s.b)
            .map(|s| s.eval(xi))
            .fold(0.0, f64::max)
    }

    pub fn integral(&self) -> f64 {
        self.segments.iter().map(|s| s.integral(s.a, s.b)).sum()
    }

    /// Mean density over the cell `[center − width/2, center + width/2]`.
    pub fn cell_average(&self, center: f64, width: f64) -> f64 {
        let (lo, hi) = (center - 0.5 * width, center + 0.5 * width);
        self.segments.iter().map(|s| s.integral(lo, hi)).sum::<f64>() / width
    }

    /// Number of grid wavenumbers inside the support.
    pub fn modes_inside(&self, grid: &FourierGrid) -> usize {
        let (lo, hi) = self.support();
        grid.wavenumbers().iter().filter(|&&xi| xi >= lo && xi <= hi).count()
    }
}

/// The AB and BA triangles: `h₁` centered at `−2N−1−1/N`, `h₂` at `2N+1+1/N`,
/// both of half-width and height `1/N`.
pub fn interaction_triangles(n_scale: f64) -> (FreqBox, FreqBox) {
    let c = 2.0 * n_scale + 1.0 + 1.0 / n_scale;
    let w = 1.0 / n_scale;
    (FreqBox::triangle(-c, w, w), FreqBox::triangle(c, w, w))
}

/// Leading-order spectrum of `W_+∗_R ∂_x(AB̄ + BĀ)` for the two-box data:
/// `½ iξ t N^{1−2k} e^{−itξ}(h₁ + h₂)`, sampled at the grid wavenumbers.
pub fn first_iterate_closed_form(n_scale: f64, k: f64, t: f64, grid: &FourierGrid) -> Result<Vec<C64>> {
    if n_scale < 2.0 {
        return Err(param(format!("frequency scale must be >= 2, got {n_scale}")));
    }
    if t < 0.0 {
        return Err(param(format!("time must be nonnegative, got {t}")));
    }
    let (h1, h2) = interaction_triangles(n_scale);
    let amp = 0.5 * t * n_scale.powf(1.0 - 2.0 * k);
    Ok((0..grid.num_points())
        .map(|idx| {
            let xi = grid.wavenumber(idx);
            let h = h1.eval(xi) + h2.eval(xi);
            if h == 0.0 {
                ZERO
            } else {
                I * xi * amp * h * C64::from_polar(1.0, -t * xi)
            }
        })
        .collect())
}

/// `g(t, ξ₁, ξ₂) = (e^{itθ} − 1)/(iθ)` with `θ = (ξ₁+ξ₂)(ξ₁−ξ₂−1)`.
pub fn g_factor(t: f64, xi1: f64, xi2: f64) -> C64 {
    let theta = (xi1 + xi2) * (xi1 - xi2 - 1.0);
    let phase = t * theta;
    if phase.abs() < 1e-6 {
        // t Σ (iφ)^n/(n+1)!, four terms
        let p = C64::new(0.0, phase);
        return t * (1.0 + p / 2.0 + p * p / 6.0 + p * p * p / 24.0);
    }
    (C64::from_polar(1.0, phase) - 1.0) / C64::new(0.0, theta)
}

/// `∂²_γ u|_{γ=0}(t) = −2i ∫_0^t U(t−t′)[U(t′)u₀ · W(n₀,n₁)(t′)] dt′`.
pub fn second_derivative_u(u0: &ComplexField, wave: &WaveData, times: &TimeGrid) -> Result<ComplexField> {
    let grid = u0.grid().clone();
    if wave.grid() != &grid {
        return Err(param("u0 and wave data live on different grids"));
    }
    let prop = WavePropagator::new(wave);
    let u_modes = nonzero_modes(u0.spectrum());
    let n_support = prop.support();
    let spec = if prefer_sparse(grid.num_points(), u_modes.len(), n_support.len()) {
        retarded_quadrature_sparse(&grid, times, schrodinger_symbol(&grid), |t| {
            let u = evolve_modes(&grid, &u_modes, t);
            let n: Modes = n_support
                .iter()
                .map(|&idx| {
                    let (p, m) = prop.at(idx, t);
                    (idx, p + m)
                })
                .collect();
            sparse_product(&grid, &u, &n, false)
        })
    } else {
        let u_hat = u0.spectrum().to_vec();
        duhamel_schrodinger_with(&grid, times, |_, t, engine| {
            let (p, m) = prop.spectra(t);
            let n: Vec<C64> = p.iter().zip(&m).map(|(a, b)| a + b).collect();
            let mut u = u_hat.clone();
            apply_schrodinger(&grid, &mut u, t);
            Ok(product_spectrum(engine, &u, &n, false))
        })?
    };
    let spec = spec.into_iter().map(|v| C64::new(0.0, -2.0) * v).collect();
    ComplexField::from_spectrum(&grid, spec)
}

/// `∂²_γ n|_{γ=0}(t)` for data `(γu₀, 0, 0)`: twice the wave response to the
/// linear flow, `2 □^{-1}∂_x²|U(t′)u₀|²`.
pub fn second_derivative_n(u0: &ComplexField, times: &TimeGrid) -> Result<RealField> {
    let n = linear_wave_response(u0, times)?;
    let spec: Vec<C64> = n.spectrum().iter().map(|v| 2.0 * v).collect();
    RealField::from_spectrum(u0.grid(), &spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, sobolev_norm, SobolevParams};
    use std::f64::consts::PI;

    fn sin_over(xi: f64, t: f64) -> f64 {
        (xi * t).sin() / xi
    }

    fn grid() -> FourierGrid {
        make_grid(128, 8.0 * PI).unwrap()
    }

    fn gaussian(grid: &FourierGrid) -> ComplexField {
        ComplexField::from_fn(grid, |x| C64::new((-x * x).exp(), 0.3 * x * (-x * x).exp()))
    }

    #[test]
    fn refinement_stops_when_settled() {
        let start = TimeGrid::uniform(1.0, 5).unwrap();
        let (v, trace) = refine_until_converged(
            start,
            1e-8,
            8,
            |g| Ok(g.nodes().iter().zip(g.weights()).map(|(t, w)| w * (3.0 * t).cos()).sum::<f64>()),
            |v| *v,
        )
        .unwrap();
        assert!((v - 3f64.sin() / 3.0).abs() < 1e-8);
        assert_eq!(trace.nodes[0], 5);
        assert!(trace.nodes.len() > 2);
        let fail = refine_until_converged(TimeGrid::uniform(1.0, 5).unwrap(), 0.0, 2, |g| Ok(g.len() as f64), |v| *v);
        assert!(matches!(fail, Err(Error::Quadrature { refinements: 2, .. })));
    }

    #[test]
    fn sparse_and_fft_products_agree() {
        let g = make_grid(256, 16.0 * PI).unwrap();
        let mut a = vec![C64::new(0.0, 0.0); 256];
        let mut b = a.clone();
        for (k, idx) in [3usize, 4, 5, 250].iter().enumerate() {
            a[*idx] = C64::new(1.0 + k as f64, -0.5);
            b[(*idx * 7) % 256] = C64::new(0.25, k as f64);
        }
        let mut engine = g.engine();
        for conj in [false, true] {
            let sparse = product_spectrum(&mut engine, &a, &b, conj);
            let mut x = engine.inverse(&a);
            let y = engine.inverse(&b);
            for (p, q) in x.iter_mut().zip(&y) {
                *p *= if conj { q.conj() } else { *q };
            }
            engine.forward_in_place(&mut x);
            for (p, q) in sparse.iter().zip(&x) {
                assert!((p - q).norm() < 1e-12, "{p} vs {q}");
            }
        }
    }

    #[test]
    fn schrodinger_group_is_unitary_and_composes() {
        let g = grid();
        let u = gaussian(&g);
        let a = schrodinger_group(&schrodinger_group(&u, 0.3), 0.4);
        let b = schrodinger_group(&u, 0.7);
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).norm() < 1e-12);
        }
        assert!((b.l2_norm() / u.l2_norm() - 1.0).abs() < 1e-12);
        let same = schrodinger_group(&u, 0.0);
        for (x, y) in same.samples().iter().zip(u.samples()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_phase() {
        let g = make_grid(32, 2.0 * PI).unwrap();
        let u = ComplexField::from_fn(&g, |x| C64::from_polar(1.0, 2.0 * x));
        let v = schrodinger_group(&u, 0.5);
        for (m, s) in v.samples().iter().enumerate() {
            let expected = C64::from_polar(1.0, 2.0 * g.x(m) - 0.5 * 4.0);
            assert!((s - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn wave_group_with_zero_velocity_is_dalembert() {
        let g = grid();
        let n0 = RealField::from_fn(&g, |x| (-x * x).exp());
        let data = WaveData::new(n0, RealField::zeros(&g)).unwrap();
        let (p, m) = wave_group(&data, 1.5);
        for (idx, (a, b)) in p.samples().iter().zip(m.samples()).enumerate() {
            let x = g.x(idx);
            let expected = 0.5 * (-(x - 1.5f64).powi(2)).exp() + 0.5 * (-(x + 1.5f64).powi(2)).exp();
            assert!((a + b - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn wave_group_with_velocity_only() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        let n1 = RealField::from_fn(&g, |x| (5.0 * x).cos());
        let data = WaveData::new(RealField::zeros(&g), n1).unwrap();
        let t = 0.37;
        let (p, m) = wave_group(&data, t);
        for (idx, (a, b)) in p.samples().iter().zip(m.samples()).enumerate() {
            let expected = sin_over(5.0, t) * (5.0 * g.x(idx)).cos();
            assert!((a + b - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn wave_group_low_frequency_velocity() {
        // cos(x/2) sits below the default cutoff, so it goes through the n_{1L} integral.
        let g = make_grid(64, 4.0 * PI).unwrap();
        let n1 = RealField::from_fn(&g, |x| (0.5 * x).cos());
        let data = WaveData::new(RealField::zeros(&g), n1).unwrap();
        let t = 0.8;
        let (p, m) = wave_group(&data, t);
        for (idx, (a, b)) in p.samples().iter().zip(m.samples()).enumerate() {
            let expected = sin_over(0.5, t) * (0.5 * g.x(idx)).cos();
            assert!((a + b - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn initial_split_sums_to_n0() {
        let g = grid();
        let n0 = RealField::from_fn(&g, |x| (-x * x).exp() * x);
        let n1 = RealField::from_fn(&g, |x| (-(x - 1.0) * (x - 1.0)).exp());
        let data = WaveData::new(n0.clone(), n1).unwrap();
        let (p, m) = data.initial_split();
        for ((a, b), c) in p.iter().zip(&m).zip(n0.spectrum()) {
            assert!((a + b - c).norm() < 1e-15);
        }
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        for nodes in [3, 4, 5, 8, 11] {
            let tg = TimeGrid::uniform(2.0, nodes).unwrap();
            let s: f64 = tg.nodes().iter().zip(tg.weights()).map(|(t, w)| w * t.powi(3)).sum();
            assert!((s - 4.0).abs() < 1e-12, "{nodes} nodes: {s}");
        }
        assert!(TimeGrid::uniform(1.0, 2).is_err());
        let tg = TimeGrid::with_density(0.5, 65.0).unwrap();
        assert_eq!((tg.len() - 1) % 2, 0);
        assert!(tg.len() >= 33);
    }

    #[test]
    fn duhamel_of_free_flow_is_t_times_flow() {
        let g = grid();
        let phi = gaussian(&g);
        let times = TimeGrid::uniform(0.6, 9).unwrap();
        let path: Vec<ComplexField> = times.nodes().iter().map(|&t| schrodinger_group(&phi, t)).collect();
        let d = duhamel_schrodinger(&path, &times).unwrap();
        let expected = schrodinger_group(&phi, 0.6);
        for (a, b) in d.samples().iter().zip(expected.samples()) {
            assert!((a - 0.6 * b).norm() < 1e-12);
        }
    }

    #[test]
    fn duhamel_wave_of_static_cosine() {
        // ½∫_0^t cos(ξ₀(x ∓ s)) ds = ±(sin(ξ₀x) − sin(ξ₀(x∓t)))/(2ξ₀)
        let g = make_grid(64, 2.0 * PI).unwrap();
        let f = RealField::from_fn(&g, |x| (3.0 * x).cos());
        let times = TimeGrid::uniform(0.9, 129).unwrap();
        let path = vec![f; times.len()];
        for sign in [Sign::Plus, Sign::Minus] {
            let w = duhamel_wave(&path, sign, &times).unwrap();
            let sg = sign.value();
            for (m, v) in w.samples().iter().enumerate() {
                let x = g.x(m);
                let expected = sg * ((3.0 * x).sin() - (3.0 * (x - sg * 0.9)).sin()) / 6.0;
                assert!((v - expected).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn g_factor_limits() {
        assert_eq!(g_factor(0.7, 1.0, -1.0), C64::new(0.7, 0.0));
        assert_eq!(g_factor(0.7, 2.0, 1.0), C64::new(0.7, 0.0));
        for (t, a, b) in [(1.0, 3.0, -0.2), (0.3, 10.0, 2.0), (2.0, 1e-4, 0.0)] {
            assert!(g_factor(t, a, b).norm() <= t * (1.0 + 1e-12));
        }
        // series and closed branches agree at the switch-over
        let theta_small = g_factor(1.0, 1e-6 + 0.5, -0.5);
        let direct = {
            let th: f64 = (1e-6 + 0.5 - 0.5) * (1e-6 + 0.5 + 0.5 - 1.0);
            (C64::from_polar(1.0, th) - 1.0) / C64::new(0.0, th)
        };
        assert!((theta_small - direct).norm() < 1e-9);
        for n in [8.0, 16.0, 64.0] {
            let g = g_factor(1.0, -n - 1.0 / (2.0 * n), -n - 1.0);
            assert!((g.norm() - 1.0).abs() < 0.1, "N={n}: {g}");
        }
    }

    #[test]
    fn freq_box_cell_average_preserves_mass() {
        let b = FreqBox::indicator(-2.0, -1.0, 3.0);
        let dxi = 0.125;
        let mass: f64 = (-40..40).map(|j| b.cell_average(j as f64 * dxi, dxi) * dxi).sum();
        assert!((mass - 3.0).abs() < 1e-14);
        let t = FreqBox::triangle(1.0, 0.5, 2.0);
        assert!((t.integral() - 1.0).abs() < 1e-15);
        assert_eq!(t.eval(1.0), 2.0);
        assert_eq!(t.eval(1.6), 0.0);
    }

    #[test]
    fn closed_form_support_and_zero_time() {
        let n = 8.0;
        let g = make_grid(8192, 16.0 * PI * n).unwrap();
        let zero = first_iterate_closed_form(n, 0.25, 0.0, &g).unwrap();
        assert!(zero.iter().all(|v| *v == ZERO));
        let s = first_iterate_closed_form(n, 0.25, 0.25, &g).unwrap();
        let c = 2.0 * n + 1.0 + 1.0 / n;
        for (idx, v) in s.iter().enumerate() {
            let xi = g.wavenumber(idx);
            if (xi.abs() - c).abs() >= 1.0 / n {
                assert_eq!(*v, ZERO);
            }
        }
        assert!(sobolev_norm_spectrum_nonzero(&g, &s));
        assert!(first_iterate_closed_form(1.0, 0.25, 0.1, &g).is_err());
    }

    fn sobolev_norm_spectrum_nonzero(g: &FourierGrid, s: &[C64]) -> bool {
        crate::spectral::sobolev_norm_spectrum(g, s, &SobolevParams::new(0.25)) > 0.0
    }

    #[test]
    fn second_derivatives_vanish_on_zero_data() {
        let g = grid();
        let times = TimeGrid::uniform(0.2, 5).unwrap();
        let u = gaussian(&g);
        let zero_u = ComplexField::zeros(&g);
        let d = second_derivative_u(&u, &WaveData::zero(&g), &times).unwrap();
        assert_eq!(d.max_abs(), 0.0);
        let n0 = RealField::from_fn(&g, |x| (-x * x).exp());
        let wave = WaveData::new(n0, RealField::zeros(&g)).unwrap();
        assert_eq!(second_derivative_u(&zero_u, &wave, &times).unwrap().max_abs(), 0.0);
        assert_eq!(second_derivative_n(&zero_u, &times).unwrap().max_abs(), 0.0);
        let b = box_inverse_forcing(&vec![zero_u; times.len()], &times).unwrap();
        assert_eq!(sobolev_norm(&b, &SobolevParams::new(0.0)), 0.0);
    }

    #[test]
    fn path_length_must_match_nodes() {
        let g = grid();
        let times = TimeGrid::uniform(0.2, 5).unwrap();
        let r = duhamel_schrodinger(&vec![gaussian(&g); 3], &times);
        assert!(matches!(r, Err(Error::Shape { expected: 5, actual: 3 })));
    }
}
