//! The full solve pipeline and its serializable result.

use serde::Serialize;

use crate::error::Result;
use crate::model::{AssumptionReport, LevyModel};
use crate::scale::{boundary_values, build_scale_pair, ScalePair};
use crate::threshold::{solve_threshold, ThresholdSolution};
use crate::value::{build_value, ValueFunction};

/// One sampled point of the value function.
#[derive(Debug, Clone, Serialize)]
pub struct ValueSample {
    pub x: f64,
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
}

/// Everything the solve command emits: model echo, assumption report,
/// spectral data, threshold solution, and value samples.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub model: LevyModel,
    pub assumptions: AssumptionReport,
    pub roots_x: Vec<f64>,
    pub residues_x: Vec<f64>,
    pub roots_y: Vec<f64>,
    pub residues_y: Vec<f64>,
    pub big_phi_q: f64,
    pub phi_q: f64,
    /// `(w(0), w'(0+), w''(0+), w'''(0+))`, verified against closed forms.
    pub boundary: [f64; 4],
    pub threshold: ThresholdSolution,
    pub value_samples: Vec<ValueSample>,
}

/// Runs the analytic pipeline end to end.
pub fn solve_model(m: &LevyModel) -> Result<SolveReport> {
    let (sp, sol, vf) = solve_parts(m)?;
    let boundary = boundary_values(&sp, m)?;
    let xs = sample_grid(sol.b_star);
    let value_samples = xs
        .iter()
        .map(|&x| {
            let (v1, v2) = vf.value_derivatives(x);
            ValueSample {
                x,
                v: vf.eval(x),
                v1,
                v2,
            }
        })
        .collect();
    Ok(SolveReport {
        model: m.clone(),
        assumptions: m.validate_assumptions(),
        roots_x: sp.roots_x.clone(),
        residues_x: sp.residues_x.clone(),
        roots_y: sp.roots_y.clone(),
        residues_y: sp.residues_y.clone(),
        big_phi_q: sp.big_phi_q,
        phi_q: sp.phi_q,
        boundary: [boundary.0, boundary.1, boundary.2, boundary.3],
        threshold: sol,
        value_samples,
    })
}

/// The pipeline pieces, for callers that keep working with them.
pub fn solve_parts(m: &LevyModel) -> Result<(ScalePair, ThresholdSolution, ValueFunction)> {
    let sp = build_scale_pair(m)?;
    let sol = solve_threshold(&sp, m)?;
    let vf = build_value(&sp, m, sol.b_star)?;
    Ok((sp, sol, vf))
}

fn sample_grid(b_star: f64) -> Vec<f64> {
    let mut xs = vec![0.0, 0.5 * b_star, b_star];
    let hi = b_star + 5.0;
    for i in 1..=20 {
        xs.push(b_star + (hi - b_star) * i as f64 / 20.0);
    }
    xs
}

#[cfg(test)]
mod tests {
    use crate::testkit::case_study;

    #[test]
    fn report_serializes_and_round_trips_key_fields() {
        let m = case_study();
        let report = super::solve_model(&m).unwrap();
        let json = serde_json::to_string_pretty(&report).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["model"]["S"], 0.05);
        let b = parsed["threshold"]["b_star"].as_f64().unwrap();
        // Full round-trip precision is preserved in JSON output.
        assert_eq!(b, report.threshold.b_star);
        assert_eq!(parsed["roots_x"].as_array().unwrap().len(), 3);
    }
}
