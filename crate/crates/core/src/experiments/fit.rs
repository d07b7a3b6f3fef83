//! Log-log power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Twice the standard error of the slope.
    pub half_width: f64,
    pub points: usize,
}

/// Ordinary least squares of `ln y` against `ln x`.
pub fn fit_exponent(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 samples, got {}", samples.len())));
    }
    if let Some(&(x, y)) = samples.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::Domain(format!("log fit needs positive samples, got ({x}, {y})")));
    }
    let n = samples.len() as f64;
    let lx: Vec<f64> = samples.iter().map(|(x, _)| x.ln()).collect();
    let ly: Vec<f64> = samples.iter().map(|(_, y)| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(FitResult {
        slope,
        intercept,
        half_width: 2.0 * se,
        points: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, 7.0 * x.powi(3))).collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-12);
        assert!(f.half_width < 1e-6);
    }

    #[test]
    fn constant_has_zero_slope() {
        let f = fit_exponent(&[(1.0, 2.5), (3.0, 2.5), (9.0, 2.5)]).unwrap();
        assert!(f.slope.abs() < 1e-14);
    }

    #[test]
    fn noisy_law_within_half_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..12)
            .map(|j| {
                let x = 2f64.powf(j as f64 / 2.0 + 1.0);
                (x, 0.3 * x.powf(-1.5) * (1.0 + 0.05 * rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let f = fit_exponent(&pts).unwrap();
        assert!((f.slope + 1.5).abs() <= f.half_width, "{f:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_exponent(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::Domain(_))));
        assert!(matches!(fit_exponent(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(Error::Domain(_))));
        assert!(matches!(fit_exponent(&[(-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)]), Err(Error::Domain(_))));
    }
}
