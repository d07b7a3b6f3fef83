//! TOML run configuration. Every section is optional except the schema version.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::BilinearVariant;
use crate::error::{Error, Result};
use crate::solver::Scheme;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub inflation: InflationConfig,
    #[serde(default)]
    pub decohere_exact: ExactConfig,
    #[serde(default)]
    pub decohere_cct: CctConfig,
    #[serde(default)]
    pub non_c2: NonC2Config,
    #[serde(default)]
    pub norms: NormsConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            solver: SolverConfig::default(),
            inflation: InflationConfig::default(),
            decohere_exact: ExactConfig::default(),
            decohere_cct: CctConfig::default(),
            non_c2: NonC2Config::default(),
            norms: NormsConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Value = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        match value.get("schema_version") {
            None => return Err(Error::Config("missing schema_version".into())),
            Some(v) if v.as_integer() != Some(SCHEMA_VERSION as i64) => {
                return Err(Error::Config(format!(
                    "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
                )))
            }
            Some(_) => {}
        }
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub dealias: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::IfRk4,
            dealias: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InflationConfig {
    pub k: f64,
    pub s: f64,
    pub n_list: Vec<f64>,
    pub t_final: f64,
    /// Sample times as fractions of `t_final`.
    pub time_fractions: Vec<f64>,
    /// Also run the first-iterate equivalence and suppression checks.
    pub interaction_checks: bool,
    pub check_n_list: Vec<f64>,
    pub check_time: f64,
    pub suppression_n_list: Vec<f64>,
    pub suppression_time: f64,
}

impl Default for InflationConfig {
    fn default() -> Self {
        Self {
            k: 0.25,
            s: 0.25,
            n_list: vec![8.0, 16.0, 32.0, 64.0],
            t_final: 0.5,
            time_fractions: vec![0.125, 0.15625, 0.1875, 0.21875, 0.25, 0.5, 1.0],
            interaction_checks: true,
            check_n_list: vec![8.0, 16.0, 32.0],
            check_time: 0.25,
            suppression_n_list: vec![16.0, 32.0, 64.0],
            suppression_time: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactConfig {
    pub m_list: Vec<f64>,
    pub t_final: f64,
    pub s: f64,
    pub delta: f64,
    pub grid_points: usize,
    pub box_length: f64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            m_list: vec![25.0, 50.0, 100.0, 200.0],
            t_final: 1.0,
            s: -2.0,
            delta: 0.1,
            grid_points: 32768,
            box_length: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CctConfig {
    /// Dispersion values for the small-dispersion runs, at `λ = ν^{-lambda_exponent}`.
    pub nu_list: Vec<f64>,
    pub lambda_exponent: f64,
    /// Multiples of the base `λ` for the wave-size trend.
    pub lambda_factors: Vec<f64>,
    pub t_final: f64,
    pub velocity: f64,
    /// `ν` of the two-solution separation run; `M = ν^{-pair_lambda_exponent}`.
    pub pair_nu: f64,
    pub pair_lambda_exponent: f64,
    pub delta: f64,
    pub s: f64,
    pub grid_points: usize,
    pub box_length: f64,
}

impl Default for CctConfig {
    fn default() -> Self {
        Self {
            nu_list: vec![0.1, 0.05],
            lambda_exponent: 2.0,
            lambda_factors: vec![1.0, 2.0, 4.0],
            t_final: 1.0,
            velocity: 0.0,
            pair_nu: 0.01,
            pair_lambda_exponent: 2.0,
            delta: 0.1,
            s: -2.0,
            grid_points: 1024,
            box_length: 64.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonC2Case {
    pub k: f64,
    pub s: f64,
    pub variant: BilinearVariant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonC2Config {
    pub cases: Vec<NonC2Case>,
    pub n_list: Vec<f64>,
    pub t: f64,
    /// Extra sample times, as fractions of `t`, for the linear-in-time check.
    pub time_fractions: Vec<f64>,
    /// Closed-form agreement is only judged from this scale up.
    pub closed_form_min_n: f64,
}

impl Default for NonC2Config {
    fn default() -> Self {
        let case = |s| NonC2Case {
            k: 0.0,
            s,
            variant: BilinearVariant::BelowStrip,
        };
        Self {
            cases: vec![case(-1.0), case(-2.0)],
            n_list: vec![8.0, 16.0, 32.0, 64.0],
            t: 0.25,
            time_fractions: vec![0.25, 0.5],
            closed_form_min_n: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsConfig {
    pub k: f64,
    pub s: f64,
    pub grid_points: usize,
    pub box_length: f64,
    /// Largest `|j|` of the random band-limited data.
    pub band: usize,
    pub samples: usize,
    pub seed: u64,
    pub time_nodes: usize,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self {
            k: 0.5,
            s: 0.0,
            grid_points: 32,
            box_length: 8.0 * std::f64::consts::PI,
            band: 6,
            samples: 8,
            seed: 7,
            time_nodes: 256,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = Config::from_toml("schema_version = 1\n[solver]\ndt = 0.002\n").unwrap();
        assert_eq!(c.solver.dt, 0.002);
        assert_eq!(c.inflation, InflationConfig::default());
    }

    #[test]
    fn schema_version_is_required() {
        assert!(matches!(Config::from_toml("[solver]\ndt = 0.1\n"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml("schema_version = 9\n"), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            Config::from_toml("schema_version = 1\n[solver]\nstep = 0.1\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn default_round_trips_through_toml() {
        let c = Config::default();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(Config::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn cases_parse_from_tables() {
        let text = "schema_version = 1\n[[non_c2.cases]]\nk = 0.5\ns = 2.0\nvariant = \"above_strip\"\n";
        let c = Config::from_toml(text).unwrap();
        assert_eq!(c.non_c2.cases.len(), 1);
        assert_eq!(c.non_c2.cases[0].variant, BilinearVariant::AboveStrip);
    }
}
