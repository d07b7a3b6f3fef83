//! The leading bilinear interaction of the two-box data: agreement of the
//! first iterate with its closed form, and the size of the interactions that
//! the closed form drops.

use super::report::{ExperimentReport, Rule, SampleKey};
use super::{converged, Overrides, Rows};
use crate::data::{box_grid, make_box_data, BoxData, BoxParts};
use crate::error::Result;
use crate::linear::{first_iterate_closed_form, linear_wave_interaction, linear_wave_response, Sign, TimeGrid};
use crate::spectral::{sobolev_norm, sobolev_norm_spectrum, ComplexField, SobolevParams, Spectral, C64};

/// Allowed relative gap between the first iterate and its closed form.
pub const CLOSED_FORM_GAP: f64 = 0.02;
/// Dropped interactions must be below `N^{-SUPPRESSION_EXPONENT}` times the main term.
pub const SUPPRESSION_EXPONENT: f64 = 0.8;

fn first_iterate_point(n: f64, k: f64, s: f64, t: f64, ov: &Overrides) -> Result<Rows> {
    let grid = ov.grid(box_grid(n)?)?;
    let hs = SobolevParams::new(s);
    let u0 = make_box_data(&BoxData::new(n, k, BoxParts::AB)?, &grid)?;
    let (first, trace) = converged(t, |g| linear_wave_response(&u0, g), |f| sobolev_norm(f, &hs))?;
    let closed = first_iterate_closed_form(n, k, t, &grid)?;
    Ok(vec![
        (t, "first_iterate_Hs".into(), sobolev_norm(&first, &hs)),
        (t, "closed_form_Hs".into(), sobolev_norm_spectrum(&grid, &closed, &hs)),
        (t, "quadrature_nodes".into(), *trace.nodes.last().expect("nonempty trace") as f64),
    ])
}

/// First iterate of `n` from `(φ_N, 0, 0)` against the closed-form leading term.
pub fn run_first_iterate(n_list: &[f64], k: f64, s: f64, t: f64, ov: &Overrides) -> Result<ExperimentReport> {
    let inputs = serde_json::json!({ "n_list": n_list, "k": k, "s": s, "t": t });
    let mut report = ExperimentReport::new("first_iterate", inputs);
    let runs = ov.map(n_list, |&n| first_iterate_point(n, k, s, t, ov))?;
    for (&n, rows) in n_list.iter().zip(runs) {
        for (t, name, v) in rows? {
            report.push(n, t, &name, v);
        }
        report.check(
            &format!("closed_form_N={n}"),
            Rule::Ratio {
                num: SampleKey::new("first_iterate_Hs", n, t),
                den: SampleKey::new("closed_form_Hs", n, t),
                min: Some(1.0 - CLOSED_FORM_GAP),
                max: Some(1.0 + CLOSED_FORM_GAP),
            },
        );
    }
    Ok(report)
}

/// Interaction terms measured by [`run_suppression`], besides the main term.
pub const DROPPED_TERMS: [&str; 5] = ["w_minus_ab_Hs", "w_plus_aa_Hs", "w_plus_bb_Hs", "w_minus_aa_Hs", "w_minus_bb_Hs"];

fn suppression_point(n: f64, k: f64, s: f64, t: f64, ov: &Overrides) -> Result<Rows> {
    let grid = ov.grid(box_grid(n)?)?;
    let hs = SobolevParams::new(s);
    let a = make_box_data(&BoxData::new(n, k, BoxParts::A)?, &grid)?;
    let b = make_box_data(&BoxData::new(n, k, BoxParts::B)?, &grid)?;
    let sym = |sign: Sign, p: &ComplexField, q: &ComplexField, g: &TimeGrid| -> Result<Vec<C64>> {
        let pq = linear_wave_interaction(sign, p, q, g)?;
        let qp = linear_wave_interaction(sign, q, p, g)?;
        Ok(pq.spectrum().iter().zip(qp.spectrum()).map(|(x, y)| x + y).collect())
    };
    let norm = |v: &Vec<C64>| sobolev_norm_spectrum(&grid, v, &hs);
    let (main, trace) = converged(t, |g| sym(Sign::Plus, &a, &b, g), norm)?;
    let times = TimeGrid::uniform(t, *trace.nodes.last().expect("nonempty trace"))?;
    let single = |sign, p: &ComplexField| -> Result<f64> {
        Ok(sobolev_norm(&linear_wave_interaction(sign, p, p, &times)?, &hs))
    };
    Ok(vec![
        (t, "main_Hs".into(), norm(&main)),
        (t, DROPPED_TERMS[0].into(), norm(&sym(Sign::Minus, &a, &b, &times)?)),
        (t, DROPPED_TERMS[1].into(), single(Sign::Plus, &a)?),
        (t, DROPPED_TERMS[2].into(), single(Sign::Plus, &b)?),
        (t, DROPPED_TERMS[3].into(), single(Sign::Minus, &a)?),
        (t, DROPPED_TERMS[4].into(), single(Sign::Minus, &b)?),
    ])
}

/// The `W₊` cross interaction of the two boxes against the self-interactions
/// and the `W₋` cross interaction.
pub fn run_suppression(n_list: &[f64], k: f64, s: f64, t: f64, ov: &Overrides) -> Result<ExperimentReport> {
    let inputs = serde_json::json!({ "n_list": n_list, "k": k, "s": s, "t": t });
    let mut report = ExperimentReport::new("suppression", inputs);
    let runs = ov.map(n_list, |&n| suppression_point(n, k, s, t, ov))?;
    for (&n, rows) in n_list.iter().zip(runs) {
        for (t, name, v) in rows? {
            report.push(n, t, &name, v);
        }
        for term in DROPPED_TERMS {
            report.check(
                &format!("{term}_N={n}"),
                Rule::Ratio {
                    num: SampleKey::new(term, n, t),
                    den: SampleKey::new("main_Hs", n, t),
                    min: None,
                    max: Some(n.powf(-SUPPRESSION_EXPONENT)),
                },
            );
        }
    }
    Ok(report)
}
