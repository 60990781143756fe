//! The candidate value function of a barrier strategy, its derivatives, the
//! variational-inequality verification, and the spectral diagnostics that
//! certify concavity beyond the barrier.

use serde::Serialize;

use crate::error::{Error, HjbOffender, Result};
use crate::expsum::ExpPolySum;
use crate::model::LevyModel;
use crate::scale::{apply_generator_piecewise, GeneratorPiece, ScalePair};
use crate::threshold;

/// Closed-form value function of the barrier strategy at level `b`, stored as
/// two exponential-polynomial branches in the absolute variable.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    pub b: f64,
    /// The tail-integral coefficient evaluated at `b`.
    pub a_at_b: f64,
    below: ExpPolySum,
    above: ExpPolySum,
    below1: ExpPolySum,
    above1: ExpPolySum,
    below2: ExpPolySum,
    above2: ExpPolySum,
    model: LevyModel,
    scale: ScalePair,
}

/// One verified grid point.
#[derive(Debug, Clone, Serialize)]
pub struct HjbRow {
    pub x: f64,
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    /// Signed residual of the variational inequality (should be <= 0 up to
    /// tolerance; for a barrier value function it vanishes identically).
    pub residual: f64,
    /// Generator residual judged at this point (false inside the exclusion
    /// zone around the barrier, where one-sided third derivatives differ).
    pub residual_checked: bool,
}

/// Grid verification summary.
#[derive(Debug, Clone, Serialize)]
pub struct HjbReport {
    pub rows: Vec<HjbRow>,
    pub offenders: Vec<HjbOffender>,
    pub pass: bool,
}

/// Assembles the value function at barrier `b >= 0`.
pub fn build_value(sp: &ScalePair, m: &LevyModel, b: f64) -> Result<ValueFunction> {
    let a_at_b = threshold::a_s(sp, m, b)?;
    let half = 0.5 * m.s * m.sigma * m.sigma;
    let w1 = sp.w.derivative();

    let below = &(&w1 * half) + &(&sp.w * a_at_b);
    let above = if b == 0.0 {
        reduced_above(sp, m, a_at_b)
    } else {
        general_above(sp, m, b, a_at_b)
    };

    let below1 = below.derivative();
    let above1 = above.derivative();
    Ok(ValueFunction {
        b,
        a_at_b,
        below2: below1.derivative(),
        above2: above1.derivative(),
        below1,
        above1,
        below,
        above,
        model: m.clone(),
        scale: sp.clone(),
    })
}

/// Zero-barrier form: everything collapses onto the drag-adjusted scale
/// function. `S sigma^2/2 wb' + (A - S delta) wb - delta int_0 wb`.
fn reduced_above(sp: &ScalePair, m: &LevyModel, a0: f64) -> ExpPolySum {
    let half = 0.5 * m.s * m.sigma * m.sigma;
    let wb1 = sp.w_bold.derivative();
    let sum = &(&wb1 * half) + &(&sp.w_bold * (a0 - m.s * m.delta));
    &sum + &(&sp.w_bold.antiderivative() * (-m.delta))
}

/// General barrier form via lagged convolutions against the drag-adjusted
/// scale function, valid on `(b, inf)`.
fn general_above(sp: &ScalePair, m: &LevyModel, b: f64, a_at_b: f64) -> ExpPolySum {
    let half = 0.5 * m.s * m.sigma * m.sigma;
    let w1 = sp.w.derivative();
    let w2 = w1.derivative();
    let conv2 = sp.w_bold.convolve_on(&w2, b);
    let conv1 = sp.w_bold.convolve_on(&w1, b);
    let term1 = &(&w1 + &(&conv2 * m.delta)) * half;
    let term2 = &(&sp.w + &(&conv1 * m.delta)) * a_at_b;
    let tail = &sp.w_bold.antiderivative().shift(b) * (-m.delta);
    &(&term1 + &term2) + &tail
}

impl ValueFunction {
    /// Value at `x`; zero below the origin, `S` in the limit at the origin.
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x <= self.b && self.b > 0.0 {
            self.below.eval(x)
        } else {
            self.above.eval(x)
        }
    }

    /// First and second derivatives in closed form. At the barrier itself the
    /// below-branch (left) expressions are returned.
    pub fn value_derivatives(&self, x: f64) -> (f64, f64) {
        if x <= self.b && self.b > 0.0 {
            (self.below1.eval(x), self.below2.eval(x))
        } else {
            (self.above1.eval(x), self.above2.eval(x))
        }
    }

    /// One-sided gaps `|below - above|` of the value and its first two
    /// derivatives at the barrier. All three vanish at the optimal barrier.
    pub fn continuity_gaps(&self) -> [f64; 3] {
        let b = self.b;
        [
            (self.below.eval(b) - self.above.eval(b)).abs(),
            (self.below1.eval(b) - self.above1.eval(b)).abs(),
            (self.below2.eval(b) - self.above2.eval(b)).abs(),
        ]
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// Evaluates the variational inequality on a grid and reports per-point
    /// residuals without failing.
    ///
    /// Checks `V' >= 1` up to the barrier, `V' <= 1` beyond it, and the signed
    /// generator residual `(G - q)V + delta * max(0, 1 - V')` outside a
    /// `1e-4`-neighborhood of the barrier (one-sided third derivatives jump
    /// there, the inequality itself only needs to hold almost everywhere).
    pub fn hjb_report(&self, grid: &[f64]) -> HjbReport {
        const D_TOL: f64 = 1e-6;
        let m = &self.model;
        let pieces: Vec<GeneratorPiece> = if self.b > 0.0 {
            vec![
                GeneratorPiece {
                    lo: 0.0,
                    hi: self.b,
                    f: &self.below,
                },
                GeneratorPiece {
                    lo: self.b,
                    hi: f64::INFINITY,
                    f: &self.above,
                },
            ]
        } else {
            vec![GeneratorPiece {
                lo: 0.0,
                hi: f64::INFINITY,
                f: &self.above,
            }]
        };

        let mut rows = Vec::with_capacity(grid.len());
        let mut offenders = Vec::new();
        for &x in grid.iter().filter(|&&x| x > 0.0) {
            let v = self.eval(x);
            let (v1, v2) = self.value_derivatives(x);
            if x <= self.b && v1 < 1.0 - D_TOL {
                offenders.push(HjbOffender {
                    x,
                    residual: 1.0 - v1,
                    what: "V' < 1 below the barrier",
                });
            }
            if x > self.b && v1 > 1.0 + D_TOL {
                offenders.push(HjbOffender {
                    x,
                    residual: v1 - 1.0,
                    what: "V' > 1 above the barrier",
                });
            }
            let residual = apply_generator_piecewise(m, &pieces, x) - m.q * v
                + m.delta * (1.0 - v1).max(0.0);
            let residual_checked = (x - self.b).abs() > 1e-4;
            if residual_checked {
                let tol = 1e-6 * (1.0 + m.q * v.abs());
                if residual > tol {
                    offenders.push(HjbOffender {
                        x,
                        residual,
                        what: "generator residual above tolerance",
                    });
                }
            }
            rows.push(HjbRow {
                x,
                v,
                v1,
                v2,
                residual,
                residual_checked,
            });
        }
        let pass = offenders.is_empty();
        HjbReport {
            rows,
            offenders,
            pass,
        }
    }

    /// Strict variant of [`hjb_report`]: any offending grid point is an error.
    pub fn hjb_verify(&self, grid: &[f64]) -> Result<HjbReport> {
        let report = self.hjb_report(grid);
        if report.pass {
            Ok(report)
        } else {
            Err(Error::HjbViolation {
                offenders: report.offenders,
            })
        }
    }

    /// The spectral weight function: the value derivative beyond the barrier
    /// is the integral of `e^{-xz} p_S(z)` against the atomic decay measure of
    /// the drag-adjusted scale function. `p_S(0) = delta`, and concavity of
    /// `p_S` forces the derivative to decay monotonically past the barrier.
    pub fn p_s(&self, z: f64) -> f64 {
        let m = &self.model;
        let w1 = self.scale.w.derivative();
        let w2 = w1.derivative();
        let i1 = w1.integral_exp_weighted(z, self.b);
        let i2 = w2.integral_exp_weighted(z, self.b);
        -0.5 * m.s * m.sigma * m.sigma
            * (z * z + 2.0 * m.delta / (m.sigma * m.sigma) * z + m.delta * z * i2)
            + m.delta * (self.b * z).exp()
            + self.a_at_b * (z - m.delta * z * i1)
    }

    /// Atoms `(z_j, xi_j)` of the decay measure: the non-dominant spectral
    /// terms of the drag-adjusted scale function, negated.
    pub fn decay_atoms(&self) -> Vec<(f64, f64)> {
        self.scale
            .w_bold
            .terms()
            .iter()
            .filter(|t| t.rate < self.scale.phi_q)
            .map(|t| (-t.rate, -t.coeff))
            .collect()
    }

    /// `V'(x)` for `x > b` reconstructed from the spectral atoms, an
    /// independent route through the decay measure.
    pub fn spectral_first_derivative(&self, x: f64) -> f64 {
        self.decay_atoms()
            .iter()
            .map(|&(z, xi)| xi * self.p_s(z) * (-x * z).exp())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::build_scale_pair;
    use crate::testkit::case_study;
    use crate::threshold::solve_threshold;

    fn optimal() -> (LevyModel, ScalePair, ValueFunction) {
        let m = case_study();
        let sp = build_scale_pair(&m).unwrap();
        let sol = solve_threshold(&sp, &m).unwrap();
        let vf = build_value(&sp, &m, sol.b_star).unwrap();
        (m, sp, vf)
    }

    #[test]
    fn value_at_origin_is_the_salvage_value() {
        let (m, sp, vf) = optimal();
        assert!((vf.eval(0.0) - m.s).abs() < 1e-12);
        // Any barrier, not just the optimal one.
        for &b in &[0.0, 0.3, 1.0] {
            let v = build_value(&sp, &m, b).unwrap();
            assert!((v.eval(0.0) - m.s).abs() < 1e-12, "b = {b}");
        }
    }

    #[test]
    fn value_vanishes_below_the_origin() {
        let (_, _, vf) = optimal();
        assert_eq!(vf.eval(-0.3), 0.0);
    }

    #[test]
    fn marginal_value_is_one_at_the_barrier() {
        let (_, _, vf) = optimal();
        let (v1, _) = vf.value_derivatives(vf.b);
        assert!((v1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn smooth_pasting_at_the_optimal_barrier() {
        let (_, _, vf) = optimal();
        let [g0, g1, g2] = vf.continuity_gaps();
        assert!(g0 < 1e-10 && g1 < 1e-8 && g2 < 1e-7, "gaps {g0} {g1} {g2}");
    }

    #[test]
    fn second_derivative_is_nonpositive_past_the_barrier() {
        let (m, sp, vf) = optimal();
        let (_, v2_plus) = vf.value_derivatives(vf.b + 1e-12);
        assert!(v2_plus <= 1e-9);
        // Equals -theta_S'(b) w'(b) at the barrier.
        let expect = -crate::threshold::theta_s_deriv(&sp, &m, vf.b) * sp.w.derivative().eval(vf.b);
        assert!((v2_plus - expect).abs() < 1e-7 * expect.abs().max(1.0));
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let (_, _, vf) = optimal();
        // Fourth-order central stencils keep the roundoff noise well below the
        // relative 1e-6 target even where the second derivative is small.
        let h = 1e-3;
        let fd = |x: f64| {
            let f = |d: f64| vf.eval(x + d);
            let d1 = (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
            let d2 = (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h))
                / (12.0 * h * h);
            (d1, d2)
        };
        for i in 0..10 {
            let x = 0.06 + 0.37 * i as f64;
            if (x - vf.b).abs() < 4.0 * h {
                continue;
            }
            let (v1, v2) = vf.value_derivatives(x);
            let (fd1, fd2) = fd(x);
            assert!((v1 - fd1).abs() < 1e-6 * (1.0 + v1.abs()), "x = {x}");
            assert!((v2 - fd2).abs() < 1e-6 * (1.0 + v2.abs()), "x = {x}");
        }
    }

    #[test]
    fn variational_inequality_holds_at_the_optimum() {
        let (_, _, vf) = optimal();
        let grid: Vec<f64> = (1..=400).map(|i| i as f64 / 40.0).collect();
        let report = vf.hjb_verify(&grid).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn suboptimal_barrier_violates_the_inequality() {
        let (m, sp, vf) = optimal();
        let bad = build_value(&sp, &m, vf.b + 0.5).unwrap();
        let grid: Vec<f64> = (1..=200).map(|i| i as f64 / 20.0).collect();
        let report = bad.hjb_report(&grid);
        assert!(!report.pass);
        assert!(!report.offenders.is_empty());
    }

    #[test]
    fn spectral_weight_at_zero_is_the_dividend_ceiling() {
        let (m, _, vf) = optimal();
        assert!((vf.p_s(0.0) - m.delta).abs() < 1e-12);
    }

    #[test]
    fn spectral_weight_is_strongly_concave_up_to_the_barrier() {
        let (m, _, vf) = optimal();
        let bound = -m.s * m.sigma * m.sigma;
        let h = 1e-4;
        for i in 0..=20 {
            let z = vf.b * i as f64 / 20.0;
            let dd = (vf.p_s(z + h) - 2.0 * vf.p_s(z) + vf.p_s(z - h)) / (h * h);
            assert!(dd <= bound + 1e-6, "p_S'' = {dd} at z = {z}");
        }
    }

    #[test]
    fn spectral_weight_changes_sign_at_most_once() {
        let (m, sp, vf) = optimal();
        let z_hi = 10.0 * sp.phi_q.max(m.jumps.iter().map(|j| j.p).fold(0.0, f64::max));
        let mut changes = 0;
        let mut prev = vf.p_s(1e-9).signum();
        for i in 1..=2000 {
            let z = z_hi * i as f64 / 2000.0;
            let s = vf.p_s(z).signum();
            if s != prev {
                changes += 1;
                prev = s;
            }
        }
        assert!(changes <= 1, "{changes} sign changes");
    }

    #[test]
    fn spectral_route_reproduces_the_derivative() {
        let (_, _, vf) = optimal();
        for &x in &[0.1, 0.5, 1.0, 2.0, 5.0] {
            let direct = vf.value_derivatives(x).0;
            let spectral = vf.spectral_first_derivative(x);
            assert!(
                (direct - spectral).abs() < 1e-9 * (1.0 + direct.abs()),
                "x = {x}: {direct} vs {spectral}"
            );
        }
    }

    #[test]
    fn zero_barrier_reduction_matches_the_general_assembly() {
        let (m, sp, _) = optimal();
        let reduced = reduced_above(&sp, &m, crate::threshold::a_s(&sp, &m, 0.0).unwrap());
        let general = general_above(&sp, &m, 0.0, crate::threshold::a_s(&sp, &m, 0.0).unwrap());
        for i in 0..=40 {
            let x = 0.05 + i as f64 * 0.1;
            let (a, b) = (reduced.eval(x), general.eval(x));
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "x = {x}: {a} vs {b}");
        }
    }
}
