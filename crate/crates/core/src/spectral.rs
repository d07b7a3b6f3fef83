//! Periodic grids, the continuum-normalized Fourier transform and Sobolev norms.
//!
//! Transform convention: `u(x) = ∫ e^{ixξ} û(ξ) dξ`, discretized as
//! `û_j = (Δx/2π) Σ_m u_m e^{-iξ_j x_m}` and `u_m = Δξ Σ_j û_j e^{iξ_j x_m}`.
//! Spectra are stored in FFT order (index 0 is ξ = 0, the upper half holds
//! negative wavenumbers, index M/2 is the Nyquist mode).

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{param, Error, Result};

pub type C64 = Complex64;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

/// Uniform periodic grid on `[-L/2, L/2)`. Cloning is cheap; FFT plans are shared.
#[derive(Clone)]
pub struct FourierGrid {
    num_points: usize,
    length: f64,
    plans: Arc<Plans>,
}

impl fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid")
            .field("num_points", &self.num_points)
            .field("length", &self.length)
            .finish()
    }
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.num_points == other.num_points && self.length == other.length
    }
}

pub fn make_grid(num_points: usize, length: f64) -> Result<FourierGrid> {
    FourierGrid::new(num_points, length)
}

impl FourierGrid {
    pub fn new(num_points: usize, length: f64) -> Result<Self> {
        if num_points < 8 || !num_points.is_power_of_two() {
            return Err(param(format!(
                "grid size must be a power of two >= 8, got {num_points}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(param(format!("box length must be positive, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(num_points);
        let inverse = planner.plan_fft_inverse(num_points);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Ok(Self {
            num_points,
            length,
            plans: Arc::new(Plans {
                forward,
                inverse,
                scratch_len,
            }),
        })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.num_points as f64
    }

    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn x(&self, m: usize) -> f64 {
        -0.5 * self.length + m as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.num_points).map(|m| self.x(m)).collect()
    }

    /// Signed mode number of storage index `idx`, in `-M/2 ..= M/2 - 1`.
    pub fn signed_index(&self, idx: usize) -> i64 {
        let m = self.num_points as i64;
        let i = idx as i64;
        if i < m / 2 {
            i
        } else {
            i - m
        }
    }

    pub fn index_of_mode(&self, j: i64) -> Option<usize> {
        let m = self.num_points as i64;
        if j < -m / 2 || j >= m / 2 {
            return None;
        }
        Some(if j >= 0 { j as usize } else { (j + m) as usize })
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        idx == self.num_points / 2
    }

    pub fn wavenumber(&self, idx: usize) -> f64 {
        self.signed_index(idx) as f64 * self.dxi()
    }

    /// Wavenumbers in storage (FFT) order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.num_points).map(|i| self.wavenumber(i)).collect()
    }

    /// Wavenumber used by odd symbols (derivatives, translations). The Nyquist
    /// mode has no partner, so odd symbols treat it as ξ = 0 to keep real
    /// fields real.
    pub fn odd_wavenumber(&self, idx: usize) -> f64 {
        if self.is_nyquist(idx) {
            0.0
        } else {
            self.wavenumber(idx)
        }
    }

    pub fn max_wavenumber(&self) -> f64 {
        (self.num_points / 2) as f64 * self.dxi()
    }

    pub fn engine(&self) -> FftEngine {
        FftEngine {
            grid: self.clone(),
            scratch: vec![C64::new(0.0, 0.0); self.plans.scratch_len],
        }
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.num_points {
            return Err(Error::Shape {
                expected: self.num_points,
                actual: n,
            });
        }
        Ok(())
    }
}

/// Transform engine owning its scratch space. One per worker thread.
pub struct FftEngine {
    grid: FourierGrid,
    scratch: Vec<C64>,
}

impl FftEngine {
    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    /// Physical samples to spectrum, in place. Panics on a length mismatch.
    pub fn forward_in_place(&mut self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.grid.num_points, "transform size mismatch");
        self.grid
            .plans
            .forward
            .process_with_scratch(buf, &mut self.scratch);
        let scale = self.grid.dx() / (2.0 * PI);
        for (j, v) in buf.iter_mut().enumerate() {
            // (-1)^j accounts for the grid starting at -L/2
            *v *= if j % 2 == 0 { scale } else { -scale };
        }
    }

    /// Spectrum to physical samples, in place. Panics on a length mismatch.
    pub fn inverse_in_place(&mut self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.grid.num_points, "transform size mismatch");
        let scale = self.grid.dxi();
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= if j % 2 == 0 { scale } else { -scale };
        }
        self.grid
            .plans
            .inverse
            .process_with_scratch(buf, &mut self.scratch);
    }

    pub fn forward(&mut self, samples: &[C64]) -> Vec<C64> {
        let mut buf = samples.to_vec();
        self.forward_in_place(&mut buf);
        buf
    }

    pub fn inverse(&mut self, spectrum: &[C64]) -> Vec<C64> {
        let mut buf = spectrum.to_vec();
        self.inverse_in_place(&mut buf);
        buf
    }

    pub fn forward_real(&mut self, samples: &[f64]) -> Vec<C64> {
        let mut buf: Vec<C64> = samples.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&mut self, spectrum: &[C64]) -> Vec<f64> {
        self.inverse(spectrum).into_iter().map(|v| v.re).collect()
    }
}

pub fn transform(grid: &FourierGrid, samples: &[C64]) -> Result<Vec<C64>> {
    grid.check_len(samples.len())?;
    Ok(grid.engine().forward(samples))
}

pub fn inverse_transform(grid: &FourierGrid, spectrum: &[C64]) -> Result<Vec<C64>> {
    grid.check_len(spectrum.len())?;
    Ok(grid.engine().inverse(spectrum))
}

/// Anything with a grid and a spectrum on it.
pub trait Spectral {
    fn grid(&self) -> &FourierGrid;
    fn spectrum(&self) -> &[C64];
}

/// Complex field sampled on a grid, spectrum computed lazily and cached.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: FourierGrid,
    samples: Vec<C64>,
    spectrum: OnceLock<Vec<C64>>,
}

impl ComplexField {
    pub fn new(grid: &FourierGrid, samples: Vec<C64>) -> Result<Self> {
        grid.check_len(samples.len())?;
        Ok(Self {
            grid: grid.clone(),
            samples,
            spectrum: OnceLock::new(),
        })
    }

    pub fn zeros(grid: &FourierGrid) -> Self {
        Self::from_parts(grid, vec![C64::new(0.0, 0.0); grid.num_points()], None)
    }

    pub fn from_fn(grid: &FourierGrid, f: impl Fn(f64) -> C64) -> Self {
        let samples = (0..grid.num_points()).map(|m| f(grid.x(m))).collect();
        Self::from_parts(grid, samples, None)
    }

    pub fn from_spectrum(grid: &FourierGrid, spectrum: Vec<C64>) -> Result<Self> {
        grid.check_len(spectrum.len())?;
        let samples = grid.engine().inverse(&spectrum);
        Ok(Self::from_parts(grid, samples, Some(spectrum)))
    }

    /// Same as [`from_spectrum`](Self::from_spectrum) reusing the caller's engine.
    pub fn from_spectrum_with(engine: &mut FftEngine, spectrum: Vec<C64>) -> Self {
        let samples = engine.inverse(&spectrum);
        let grid = engine.grid().clone();
        Self::from_parts(&grid, samples, Some(spectrum))
    }

    fn from_parts(grid: &FourierGrid, samples: Vec<C64>, spectrum: Option<Vec<C64>>) -> Self {
        let cell = OnceLock::new();
        if let Some(s) = spectrum {
            let _ = cell.set(s);
        }
        Self {
            grid: grid.clone(),
            samples,
            spectrum: cell,
        }
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    /// Physical-space L² norm by the trapezoid (periodic) rule.
    pub fn l2_norm(&self) -> f64 {
        physical_l2(&self.grid, self.samples.iter().map(|v| v.norm_sqr()))
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl Spectral for ComplexField {
    fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    fn spectrum(&self) -> &[C64] {
        self.spectrum
            .get_or_init(|| self.grid.engine().forward(&self.samples))
    }
}

/// Real field; its spectrum is conjugate symmetric up to roundoff.
#[derive(Clone, Debug)]
pub struct RealField {
    grid: FourierGrid,
    samples: Vec<f64>,
    spectrum: OnceLock<Vec<C64>>,
}

impl RealField {
    pub fn new(grid: &FourierGrid, samples: Vec<f64>) -> Result<Self> {
        grid.check_len(samples.len())?;
        Ok(Self::from_parts(grid, samples, None))
    }

    pub fn zeros(grid: &FourierGrid) -> Self {
        Self::from_parts(grid, vec![0.0; grid.num_points()], None)
    }

    pub fn from_fn(grid: &FourierGrid, f: impl Fn(f64) -> f64) -> Self {
        let samples = (0..grid.num_points()).map(|m| f(grid.x(m))).collect();
        Self::from_parts(grid, samples, None)
    }

    /// Builds the field from a spectrum, discarding the imaginary part of the
    /// inverse transform. The cached spectrum is the conjugate-symmetric part
    /// `½(f̂(ξ) + conj f̂(−ξ))`, which is exactly the spectrum of the real part
    /// and keeps zero modes zero.
    pub fn from_spectrum(grid: &FourierGrid, spectrum: &[C64]) -> Result<Self> {
        grid.check_len(spectrum.len())?;
        let samples = grid.engine().inverse_real(spectrum);
        Ok(Self::from_parts(grid, samples, Some(hermitian_part(spectrum))))
    }

    /// Like [`from_spectrum`](Self::from_spectrum) but rejects spectra whose
    /// inverse has imaginary part above `1e-10 * max|samples|`.
    pub fn from_spectrum_checked(grid: &FourierGrid, spectrum: &[C64]) -> Result<Self> {
        grid.check_len(spectrum.len())?;
        let contamination = imag_contamination(grid, spectrum);
        if contamination > 1e-10 {
            return Err(param(format!(
                "spectrum is not conjugate symmetric (relative imaginary part {contamination:e})"
            )));
        }
        Self::from_spectrum(grid, spectrum)
    }

    pub fn from_spectrum_with(engine: &mut FftEngine, spectrum: &[C64]) -> Self {
        let samples = engine.inverse_real(spectrum);
        let grid = engine.grid().clone();
        Self::from_parts(&grid, samples, Some(hermitian_part(spectrum)))
    }

    fn from_parts(grid: &FourierGrid, samples: Vec<f64>, spectrum: Option<Vec<C64>>) -> Self {
        let cell = OnceLock::new();
        if let Some(s) = spectrum {
            let _ = cell.set(s);
        }
        Self {
            grid: grid.clone(),
            samples,
            spectrum: cell,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn l2_norm(&self) -> f64 {
        physical_l2(&self.grid, self.samples.iter().map(|v| v * v))
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> ComplexField {
        let samples = self.samples.iter().map(|&v| C64::new(v, 0.0)).collect();
        ComplexField::from_parts(&self.grid, samples, self.spectrum.get().cloned())
    }
}

impl Spectral for RealField {
    fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    fn spectrum(&self) -> &[C64] {
        self.spectrum
            .get_or_init(|| self.grid.engine().forward_real(&self.samples))
    }
}

fn hermitian_part(spectrum: &[C64]) -> Vec<C64> {
    let m = spectrum.len();
    (0..m)
        .map(|j| 0.5 * (spectrum[j] + spectrum[(m - j) % m].conj()))
        .collect()
}

fn physical_l2(grid: &FourierGrid, sq: impl Iterator<Item = f64>) -> f64 {
    (grid.dx() * sq.sum::<f64>()).sqrt()
}

/// Max imaginary part of the inverse transform relative to its max modulus.
pub fn imag_contamination(grid: &FourierGrid, spectrum: &[C64]) -> f64 {
    let samples = grid.engine().inverse(spectrum);
    let peak = samples.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    samples.iter().map(|v| v.im.abs()).fold(0.0, f64::max) / peak
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevParams {
    pub exponent: f64,
    /// When set, the weight becomes `|ξ|^{2s}` restricted to `|ξ| >= M`.
    pub low_cutoff: Option<f64>,
}

impl SobolevParams {
    pub fn new(exponent: f64) -> Self {
        Self {
            exponent,
            low_cutoff: None,
        }
    }

    pub fn truncated(exponent: f64, cutoff: f64) -> Self {
        Self {
            exponent,
            low_cutoff: Some(cutoff),
        }
    }

    pub fn weight(&self, xi: f64) -> f64 {
        match self.low_cutoff {
            None => (1.0 + xi * xi).powf(self.exponent),
            Some(m) if xi.abs() >= m && xi != 0.0 => xi.abs().powf(2.0 * self.exponent),
            Some(_) => 0.0,
        }
    }
}

/// `(Σ w(ξ_j) |û_j|² Δξ)^{1/2}`; with `s = 0` this is `‖u‖_{L²}/√(2π)` in
/// this transform convention.
pub fn sobolev_norm(field: &impl Spectral, params: &SobolevParams) -> f64 {
    sobolev_norm_spectrum(field.grid(), field.spectrum(), params)
}

pub fn sobolev_norm_spectrum(grid: &FourierGrid, spectrum: &[C64], params: &SobolevParams) -> f64 {
    let mut acc = 0.0;
    for (idx, v) in spectrum.iter().enumerate() {
        acc += params.weight(grid.wavenumber(idx)) * v.norm_sqr();
    }
    (acc * grid.dxi()).sqrt()
}

/// Physical L² norm computed from the spectrum (Plancherel).
pub fn spectral_l2_norm(grid: &FourierGrid, spectrum: &[C64]) -> f64 {
    (2.0 * PI).sqrt() * sobolev_norm_spectrum(grid, spectrum, &SobolevParams::new(0.0))
}

/// 2/3-rule filter: zeroes every mode with `|j| > M/3`.
pub fn dealias(grid: &FourierGrid, spectrum: &mut [C64]) {
    let m = grid.num_points() as i64;
    for (idx, v) in spectrum.iter_mut().enumerate() {
        if 3 * grid.signed_index(idx).abs() > m {
            *v = C64::new(0.0, 0.0);
        }
    }
}

pub fn dealiased(grid: &FourierGrid, spectrum: &[C64]) -> Vec<C64> {
    let mut out = spectrum.to_vec();
    dealias(grid, &mut out);
    out
}

/// Spectral derivative `∂_x^order`.
pub fn derivative(grid: &FourierGrid, spectrum: &[C64], order: u32) -> Vec<C64> {
    spectrum
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let xi = if order % 2 == 1 {
                grid.odd_wavenumber(idx)
            } else {
                grid.wavenumber(idx)
            };
            v * C64::new(0.0, xi).powu(order)
        })
        .collect()
}

/// Spectrum of `f(x - a)`.
pub fn translate(grid: &FourierGrid, spectrum: &[C64], a: f64) -> Vec<C64> {
    spectrum
        .iter()
        .enumerate()
        .map(|(idx, &v)| v * shift_symbol(grid, idx, a))
        .collect()
}

/// `e^{-iaξ}`, with the Nyquist mode reduced to its real part.
pub(crate) fn shift_symbol(grid: &FourierGrid, idx: usize, a: f64) -> C64 {
    let xi = grid.wavenumber(idx);
    if grid.is_nyquist(idx) {
        C64::new((a * xi).cos(), 0.0)
    } else {
        C64::from_polar(1.0, -a * xi)
    }
}
