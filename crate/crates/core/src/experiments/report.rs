//! Experiment reports: long-format samples, fits, flags and verdicts that
//! can be recomputed from the samples alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::fit::{fit_exponent, FitResult};
use crate::error::Result;

/// Version of the report layout.
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub experiment: String,
    /// Sweep parameter: the frequency scale `N`, or `M`, `ν`, `λ` depending on the run.
    #[serde(rename = "N")]
    pub n: f64,
    pub t: f64,
    pub norm_name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleKey {
    pub norm_name: String,
    #[serde(rename = "N")]
    pub n: f64,
    pub t: f64,
}

impl SampleKey {
    pub fn new(norm_name: &str, n: f64, t: f64) -> Self {
        Self {
            norm_name: norm_name.to_string(),
            n,
            t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    /// Log-log slope of `norm_name` against `N` at fixed `t`.
    Slope {
        norm_name: String,
        t: f64,
        expected: f64,
        tolerance: f64,
    },
    /// Log-log slope against `t` at fixed `N`, using samples with `t ≤ t_max`.
    TimeSlope {
        norm_name: String,
        #[serde(rename = "N")]
        n: f64,
        t_max: f64,
        expected: f64,
        tolerance: f64,
    },
    /// A single sample inside `[min, max]`.
    Bound {
        key: SampleKey,
        min: Option<f64>,
        max: Option<f64>,
    },
    /// The quotient `num / den` inside `[min, max]`.
    Ratio {
        num: SampleKey,
        den: SampleKey,
        min: Option<f64>,
        max: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub rule: Rule,
    /// `None` when the samples the rule needs are missing.
    pub measured: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitAxis {
    N,
    T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub norm_name: String,
    pub axis: FitAxis,
    /// The held-fixed coordinate (`t` for an `N` fit and vice versa).
    pub fixed: f64,
    pub fit: FitResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub report_version: u32,
    pub experiment: String,
    pub inputs: serde_json::Value,
    pub samples: Vec<Sample>,
    pub fits: Vec<FitRecord>,
    pub flags: BTreeMap<String, bool>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn lookup(samples: &[Sample], key: &SampleKey) -> Option<f64> {
    samples
        .iter()
        .find(|s| s.norm_name == key.norm_name && same(s.n, key.n) && same(s.t, key.t))
        .map(|s| s.value)
}

fn within(v: f64, min: Option<f64>, max: Option<f64>) -> bool {
    v.is_finite() && min.map_or(true, |m| v >= m) && max.map_or(true, |m| v <= m)
}

fn slope_over(points: Vec<(f64, f64)>) -> Option<f64> {
    fit_exponent(&points).ok().map(|f| f.slope)
}

/// Recomputes `(measured, passed)` for `rule` from `samples`.
pub fn evaluate(rule: &Rule, samples: &[Sample]) -> (Option<f64>, bool) {
    let measured = match rule {
        Rule::Slope { norm_name, t, .. } => slope_over(
            samples
                .iter()
                .filter(|s| &s.norm_name == norm_name && same(s.t, *t))
                .map(|s| (s.n, s.value))
                .collect(),
        ),
        Rule::TimeSlope { norm_name, n, t_max, .. } => slope_over(
            samples
                .iter()
                .filter(|s| &s.norm_name == norm_name && same(s.n, *n) && s.t <= t_max * (1.0 + 1e-12))
                .map(|s| (s.t, s.value))
                .collect(),
        ),
        Rule::Bound { key, .. } => lookup(samples, key),
        Rule::Ratio { num, den, .. } => match (lookup(samples, num), lookup(samples, den)) {
            (Some(a), Some(b)) if b != 0.0 => Some(a / b),
            _ => None,
        },
    };
    let passed = match (rule, measured) {
        (_, None) => false,
        (
            Rule::Slope {
                expected, tolerance, ..
            }
            | Rule::TimeSlope {
                expected, tolerance, ..
            },
            Some(v),
        ) => (v - expected).abs() <= *tolerance,
        (Rule::Bound { min, max, .. } | Rule::Ratio { min, max, .. }, Some(v)) => within(v, *min, *max),
    };
    (measured, passed)
}

impl ExperimentReport {
    pub fn new(experiment: &str, inputs: serde_json::Value) -> Self {
        Self {
            report_version: REPORT_VERSION,
            experiment: experiment.to_string(),
            inputs,
            samples: Vec::new(),
            fits: Vec::new(),
            flags: BTreeMap::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, n: f64, t: f64, norm_name: &str, value: f64) {
        self.samples.push(Sample {
            experiment: self.experiment.clone(),
            n,
            t,
            norm_name: norm_name.to_string(),
            value,
        });
    }

    pub fn value(&self, norm_name: &str, n: f64, t: f64) -> Option<f64> {
        lookup(&self.samples, &SampleKey::new(norm_name, n, t))
    }

    pub fn flag(&mut self, name: &str, value: bool) {
        self.flags.insert(name.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Evaluates `rule` against the current samples and records the verdict.
    pub fn check(&mut self, name: &str, rule: Rule) -> bool {
        let (measured, passed) = evaluate(&rule, &self.samples);
        self.verdicts.push(Verdict {
            name: name.to_string(),
            rule,
            measured,
            passed,
        });
        passed
    }

    /// Fits `norm_name` along `axis` with the other coordinate fixed, and
    /// records the fit when it succeeds.
    pub fn fit(&mut self, norm_name: &str, axis: FitAxis, fixed: f64) -> Option<FitResult> {
        let points: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|s| s.norm_name == norm_name)
            .filter_map(|s| match axis {
                FitAxis::N if same(s.t, fixed) => Some((s.n, s.value)),
                FitAxis::T if same(s.n, fixed) => Some((s.t, s.value)),
                _ => None,
            })
            .collect();
        let fit = fit_exponent(&points).ok()?;
        self.fits.push(FitRecord {
            norm_name: norm_name.to_string(),
            axis,
            fixed,
            fit,
        });
        Some(fit)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// Concatenates sub-reports; verdict, flag and fit names are prefixed with
    /// the sub-experiment name.
    pub fn merge(experiment: &str, inputs: serde_json::Value, parts: Vec<ExperimentReport>) -> Self {
        let mut out = Self::new(experiment, inputs);
        for p in parts {
            let tag = |s: &str| format!("{}/{}", p.experiment, s);
            out.samples.extend(p.samples.iter().cloned());
            out.flags.extend(p.flags.iter().map(|(k, v)| (tag(k), *v)));
            out.notes.extend(p.notes.iter().map(|n| tag(n)));
            for f in &p.fits {
                out.fits.push(f.clone());
            }
            for v in &p.verdicts {
                out.verdicts.push(Verdict {
                    name: tag(&v.name),
                    ..v.clone()
                });
            }
        }
        out
    }

    /// Names of verdicts whose stored outcome differs from a fresh evaluation.
    /// Samples of merged reports carry their experiment name, so the lookup is
    /// scoped to the verdict's prefix when there is one.
    pub fn verify(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .filter(|v| {
                let scoped: Vec<Sample>;
                let samples = match v.name.split_once('/') {
                    Some((exp, _)) if self.samples.iter().any(|s| s.experiment == exp) => {
                        scoped = self.samples.iter().filter(|s| s.experiment == exp).cloned().collect();
                        &scoped[..]
                    }
                    _ => &self.samples[..],
                };
                let (measured, passed) = evaluate(&v.rule, samples);
                passed != v.passed || measured.map(f64::to_bits) != v.measured.map(f64::to_bits)
            })
            .map(|v| v.name.clone())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn samples_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.samples {
            w.serialize(s)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn verdicts_text(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let measured = v.measured.map_or("missing".to_string(), |m| format!("{m:.6e}"));
            let status = if v.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{status} {} measured={measured} {}", v.name, describe(&v.rule));
        }
        for (k, v) in &self.flags {
            let _ = writeln!(out, "FLAG {k}={v}");
        }
        out
    }

    /// Writes `report.json`, `samples.csv`, `verdicts.txt`, and `timing.json`
    /// when a runtime is given. Timing is kept out of the report so that the
    /// report stays byte-identical across runs.
    pub fn write(&self, dir: &Path, runtime: Option<Duration>) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        fs::write(dir.join("samples.csv"), self.samples_csv()?)?;
        fs::write(dir.join("verdicts.txt"), self.verdicts_text())?;
        if let Some(rt) = runtime {
            let timing = serde_json::json!({ "experiment": self.experiment, "runtime_seconds": rt.as_secs_f64() });
            fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn describe(rule: &Rule) -> String {
    let range = |min: &Option<f64>, max: &Option<f64>| match (min, max) {
        (Some(a), Some(b)) => format!("in [{a}, {b}]"),
        (Some(a), None) => format!(">= {a}"),
        (None, Some(b)) => format!("<= {b}"),
        (None, None) => "finite".to_string(),
    };
    match rule {
        Rule::Slope {
            norm_name,
            t,
            expected,
            tolerance,
        } => format!("slope of {norm_name} vs N at t={t}: {expected} +- {tolerance}"),
        Rule::TimeSlope {
            norm_name,
            n,
            t_max,
            expected,
            tolerance,
        } => format!("slope of {norm_name} vs t at N={n}, t <= {t_max}: {expected} +- {tolerance}"),
        Rule::Bound { key, min, max } => format!("{}(N={}, t={}) {}", key.norm_name, key.n, key.t, range(min, max)),
        Rule::Ratio { num, den, min, max } => format!(
            "{}(N={}, t={}) / {}(N={}, t={}) {}",
            num.norm_name,
            num.n,
            num.t,
            den.norm_name,
            den.n,
            den.t,
            range(min, max)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo", serde_json::json!({"k": 0.25}));
        for n in [8.0, 16.0, 32.0] {
            for t in [0.1, 0.2, 0.4] {
                r.push(n, t, "norm", t * f64::powf(n, 0.25));
            }
        }
        r
    }

    #[test]
    fn slope_rules_recover_exponents() {
        let mut r = sample_report();
        assert!(r.check(
            "n_slope",
            Rule::Slope {
                norm_name: "norm".into(),
                t: 0.4,
                expected: 0.25,
                tolerance: 1e-9,
            }
        ));
        assert!(r.check(
            "t_slope",
            Rule::TimeSlope {
                norm_name: "norm".into(),
                n: 32.0,
                t_max: 0.4,
                expected: 1.0,
                tolerance: 1e-9,
            }
        ));
        let (m, _) = evaluate(
            &Rule::TimeSlope {
                norm_name: "norm".into(),
                n: 32.0,
                t_max: 0.2,
                expected: 1.0,
                tolerance: 1.0,
            },
            &r.samples,
        );
        // only two samples qualify
        assert_eq!(m, None);
        assert!(r.verify().is_empty());
    }

    #[test]
    fn missing_samples_fail() {
        let mut r = sample_report();
        assert!(!r.check(
            "absent",
            Rule::Bound {
                key: SampleKey::new("other", 8.0, 0.1),
                min: None,
                max: Some(1.0),
            }
        ));
        assert_eq!(r.verdicts[0].measured, None);
    }

    #[test]
    fn tampered_verdict_is_detected() {
        let mut r = sample_report();
        r.check(
            "ratio",
            Rule::Ratio {
                num: SampleKey::new("norm", 32.0, 0.1),
                den: SampleKey::new("norm", 8.0, 0.1),
                min: Some(1.4),
                max: Some(1.42),
            },
        );
        assert!(r.verdicts[0].passed);
        r.verdicts[0].passed = false;
        assert_eq!(r.verify(), vec!["ratio".to_string()]);
    }

    #[test]
    fn json_round_trip_and_csv_layout() {
        let mut r = sample_report();
        r.flag("outside_regime", true);
        r.fit("norm", FitAxis::N, 0.1).unwrap();
        let back: ExperimentReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let csv = r.samples_csv().unwrap();
        assert!(csv.starts_with("experiment,N,t,norm_name,value\n"));
        assert_eq!(csv.lines().count(), 10);
    }

    #[test]
    fn merged_reports_stay_verifiable() {
        let mut a = sample_report();
        a.check(
            "b",
            Rule::Bound {
                key: SampleKey::new("norm", 8.0, 0.1),
                min: Some(0.0),
                max: None,
            },
        );
        let mut b = ExperimentReport::new("other", serde_json::Value::Null);
        b.push(8.0, 0.1, "norm", -1.0);
        b.check(
            "b",
            Rule::Bound {
                key: SampleKey::new("norm", 8.0, 0.1),
                min: None,
                max: Some(0.0),
            },
        );
        let m = ExperimentReport::merge("all", serde_json::Value::Null, vec![a, b]);
        assert!(m.all_passed());
        assert!(m.verify().is_empty());
        assert!(m.verdict("other/b").is_some());
    }
}
