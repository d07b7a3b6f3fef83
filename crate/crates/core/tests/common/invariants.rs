//! Randomized invariants shared by the invariant suite and the acceptance run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zakharov::linear::{schrodinger_group, wave_group, wave_group_spectra, WaveData};
use zakharov::solver::{solve_full, Output, Scheme, StepControl};
use zakharov::spectral::{
    imag_contamination, sobolev_norm, spectral_l2_norm, ComplexField, FourierGrid, RealField, SobolevParams,
    Spectral,
};
use zakharov::C64;

pub const CASES: usize = 100;
pub const SEED: u64 = 20_261_015;

pub type Check = fn(&mut ChaCha8Rng) -> Result<(), String>;

pub const CHECKS: [(&str, Check); 7] = [
    ("parseval", parseval),
    ("transform_round_trip", round_trip),
    ("schrodinger_unitary", schrodinger_unitary),
    ("wave_transport_isometric", wave_isometric),
    ("wave_group_real", wave_real),
    ("mass_conserved_splitting", mass_splitting),
    ("mass_conserved_if_rk4", mass_rk4),
];

fn random_grid(rng: &mut ChaCha8Rng) -> FourierGrid {
    let m = [16, 32, 64, 128][rng.gen_range(0..4)];
    FourierGrid::new(m, rng.gen_range(5.0..40.0)).unwrap()
}

/// Random spectrum supported on `|j| ≤ M/4`.
fn band_limited(grid: &FourierGrid, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let m = grid.num_points() as i64;
    (0..grid.num_points())
        .map(|idx| {
            if 4 * grid.signed_index(idx).abs() <= m {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

fn real_band_limited(grid: &FourierGrid, rng: &mut ChaCha8Rng) -> RealField {
    let spec = band_limited(grid, rng);
    let samples: Vec<f64> = grid.engine().inverse(&spec).iter().map(|v| v.re).collect();
    RealField::new(grid, samples).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn expect(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parseval(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let g = random_grid(rng);
    let samples: Vec<C64> = (0..g.num_points())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let u = ComplexField::new(&g, samples).unwrap();
    let (a, b) = (spectral_l2_norm(&g, u.spectrum()), u.l2_norm());
    let h0 = sobolev_norm(&u, &SobolevParams::new(0.0)) * (2.0 * std::f64::consts::PI).sqrt();
    expect(rel(a, b) < 1e-12 && rel(h0, b) < 1e-12, || format!("spectral {a} vs physical {b}"))
}

fn round_trip(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let g = random_grid(rng);
    let samples: Vec<C64> = (0..g.num_points())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut e = g.engine();
    let spec = e.forward(&samples);
    let back = e.inverse(&spec);
    let err = back.iter().zip(&samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    expect(err < 1e-13, || format!("round trip error {err:e}"))
}

fn schrodinger_unitary(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let g = random_grid(rng);
    let u = ComplexField::from_spectrum(&g, band_limited(&g, rng)).unwrap();
    let t = rng.gen_range(-3.0..3.0);
    let v = schrodinger_group(&u, t);
    let back = schrodinger_group(&v, -t);
    let err = back.samples().iter().zip(u.samples()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    expect(rel(v.l2_norm(), u.l2_norm()) < 1e-12 && err < 1e-12, || {
        format!("norms {} vs {}, inverse error {err:e}", v.l2_norm(), u.l2_norm())
    })
}

fn wave_isometric(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let g = random_grid(rng);
    let n0 = real_band_limited(&g, rng);
    let data = WaveData::new(n0.clone(), RealField::zeros(&g)).unwrap();
    let (p0, m0) = wave_group(&data, 0.0);
    let (p, m) = wave_group(&data, rng.gen_range(0.0..5.0));
    let sum: f64 = p0.samples().iter().zip(m0.samples()).zip(n0.samples()).map(|((a, b), c)| (a + b - c).abs()).fold(0.0, f64::max);
    expect(
        rel(p.l2_norm(), p0.l2_norm()) < 1e-12 && rel(m.l2_norm(), m0.l2_norm()) < 1e-12 && sum < 1e-12,
        || format!("transport norms changed or split mismatch {sum:e}"),
    )
}

fn wave_real(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let g = random_grid(rng);
    let data = WaveData::new(real_band_limited(&g, rng), real_band_limited(&g, rng)).unwrap();
    let (p, m) = wave_group_spectra(&data, rng.gen_range(0.0..5.0));
    let (a, b) = (imag_contamination(&g, &p), imag_contamination(&g, &m));
    expect(a < 1e-12 && b < 1e-12, || format!("imaginary parts {a:e}, {b:e}"))
}

/// Relative mass drift allowed per unit time.
const MASS_DRIFT_PER_TIME: f64 = 1e-8;
const MASS_HORIZON: f64 = 0.5;

fn mass_case(rng: &mut ChaCha8Rng, scheme: Scheme) -> Result<(), String> {
    let g = FourierGrid::new(64, rng.gen_range(10.0..30.0)).unwrap();
    let (c, w) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.5..2.0));
    let k = rng.gen_range(-1.0..1.0);
    let amp = rng.gen_range(0.1..1.0);
    let u0 = ComplexField::from_fn(&g, |x| C64::from_polar(amp * (-((x - c) / w).powi(2)).exp(), k * x));
    let n0 = RealField::from_fn(&g, |x| -amp * (-(x / w).powi(2)).exp());
    let wave = WaveData::new(n0, RealField::zeros(&g)).unwrap();
    let control = StepControl::with_scheme(1e-3, scheme).unwrap();
    let traj = solve_full(&u0, &wave, MASS_HORIZON, &control, &Output::Final).map_err(|e| e.to_string())?;
    expect(traj.max_mass_drift < MASS_DRIFT_PER_TIME * MASS_HORIZON, || format!("mass drift {:e}", traj.max_mass_drift))
}

fn mass_splitting(rng: &mut ChaCha8Rng) -> Result<(), String> {
    mass_case(rng, Scheme::Splitting2)
}

fn mass_rk4(rng: &mut ChaCha8Rng) -> Result<(), String> {
    mass_case(rng, Scheme::IfRk4)
}

/// Runs one check over `CASES` seeded cases; returns the first failure.
pub fn run(name: &str, check: Check) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ name.len() as u64);
    for case in 0..CASES {
        check(&mut rng).map_err(|e| format!("{name}, case {case}: {e}"))?;
    }
    Ok(())
}
