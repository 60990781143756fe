//! The surplus model: a Brownian motion with drift minus a compound Poisson
//! sum of hyperexponential claims, together with the control parameters
//! (discount rate, dividend-rate ceiling, creeping salvage value).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots;

/// One phase of the hyperexponential claim mixture: claims arrive at rate
/// `lambda` and are exponentially distributed with decay `p` (mean `1/p`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpComponent {
    pub lambda: f64,
    pub p: f64,
}

/// Surplus process and problem parameters.
///
/// The claim density is `rho(x) = sum_i lambda_i p_i exp(-p_i x)`, which is
/// completely monotone, so the scale machinery downstream applies. Decay rates
/// must be pairwise distinct; duplicate phases are required to be pre-merged by
/// summing their arrival rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyModel {
    /// Drift of the uncontrolled surplus (premium income rate).
    pub c: f64,
    /// Volatility of the Gaussian part.
    pub sigma: f64,
    /// Hyperexponential claim mixture.
    pub jumps: Vec<JumpComponent>,
    /// Discount rate.
    pub q: f64,
    /// Maximal admissible dividend rate.
    pub delta: f64,
    /// Terminal value paid when ruin happens by creeping (zero deficit).
    #[serde(rename = "S", alias = "s")]
    pub s: f64,
}

/// Which Laplace exponent to invert: the free surplus `X` or the surplus under
/// the maximal dividend drag `Y = X - delta * t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    X,
    Y,
}

/// Clause-by-clause report of the standing assumptions, plus the salvage-value
/// window inside which the optimal threshold is strictly positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub sigma_positive: bool,
    /// `phi(q) < 2 delta / sigma^2`.
    pub phi_bound: bool,
    /// Total claim arrival rate is finite (structural for this model class).
    pub finite_mass: bool,
    /// `S < c / (mass + q)`.
    pub s_mass_bound: bool,
    /// `(delta/phi(q) - sigma^2/2) / (c - delta + phi(q) sigma^2/2)`.
    pub s_window_upper: f64,
    /// `0 < S < s_window_upper`: the threshold solver returns an interior level.
    pub s_in_window: bool,
    /// `c - delta + sigma^2 phi(q) / 2`, positive whenever `phi(q)` exists.
    pub drift_margin: f64,
    pub drift_margin_positive: bool,
    pub phi_q: f64,
    pub big_phi_q: f64,
    pub messages: Vec<String>,
}

impl AssumptionReport {
    /// True when every standing assumption holds (the window clause is
    /// informational: it selects interior vs. boundary thresholds).
    pub fn assumptions_ok(&self) -> bool {
        self.sigma_positive && self.phi_bound && self.finite_mass && self.s_mass_bound
    }
}

impl LevyModel {
    pub fn new(
        c: f64,
        sigma: f64,
        jumps: Vec<JumpComponent>,
        q: f64,
        delta: f64,
        s: f64,
    ) -> Result<Self> {
        let m = LevyModel {
            c,
            sigma,
            jumps,
            q,
            delta,
            s,
        };
        m.check_structure()?;
        Ok(m)
    }

    fn check_structure(&self) -> Result<()> {
        let all = [self.c, self.sigma, self.q, self.delta, self.s];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidModel("sigma must be non-negative".into()));
        }
        if self.q <= 0.0 {
            return Err(Error::InvalidModel("discount rate q must be positive".into()));
        }
        if self.delta <= 0.0 {
            return Err(Error::InvalidModel(
                "dividend ceiling delta must be positive".into(),
            ));
        }
        if self.s < 0.0 {
            return Err(Error::InvalidModel(
                "terminal value S must be non-negative".into(),
            ));
        }
        for j in &self.jumps {
            if !(j.lambda.is_finite() && j.p.is_finite()) || j.lambda <= 0.0 || j.p <= 0.0 {
                return Err(Error::InvalidModel(
                    "jump phases need lambda > 0 and p > 0".into(),
                ));
            }
        }
        for (i, a) in self.jumps.iter().enumerate() {
            for b in &self.jumps[i + 1..] {
                if (a.p - b.p).abs() < 1e-8 * a.p.abs().max(b.p.abs()) {
                    return Err(Error::InvalidModel(format!(
                        "duplicate jump decay rates (p = {}); merge phases by summing lambdas",
                        a.p
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total claim arrival rate (the mass of the jump measure).
    pub fn jump_mass(&self) -> f64 {
        self.jumps.iter().map(|j| j.lambda).sum()
    }

    pub fn drift(&self, which: Process) -> f64 {
        match which {
            Process::X => self.c,
            Process::Y => self.c - self.delta,
        }
    }

    /// Laplace exponent `psi(theta) = drift*theta + sigma^2 theta^2/2
    /// - sum_i lambda_i theta / (p_i + theta)`.
    pub fn laplace_exponent(&self, which: Process, theta: f64) -> Result<f64> {
        let mut v = self.drift(which) * theta + 0.5 * self.sigma * self.sigma * theta * theta;
        for j in &self.jumps {
            let denom = j.p + theta;
            if denom.abs() < 1e-12 * j.p.max(1.0) {
                return Err(Error::PoleEvaluation { theta });
            }
            v -= j.lambda * theta / denom;
        }
        Ok(v)
    }

    pub fn psi_x(&self, theta: f64) -> Result<f64> {
        self.laplace_exponent(Process::X, theta)
    }

    pub fn psi_y(&self, theta: f64) -> Result<f64> {
        self.laplace_exponent(Process::Y, theta)
    }

    /// Derivative of the Laplace exponent (used for Newton steps and residues).
    pub(crate) fn laplace_exponent_deriv(&self, which: Process, theta: f64) -> f64 {
        let mut v = self.drift(which) + self.sigma * self.sigma * theta;
        for j in &self.jumps {
            let denom = j.p + theta;
            v -= j.lambda * j.p / (denom * denom);
        }
        v
    }

    /// The strictly positive root of `psi = q`.
    ///
    /// The exponent is strictly convex with `psi(0) = 0`, so for `q > 0` the
    /// root is unique on `(0, inf)`. Located by doubling a bracket upward and
    /// polishing with safeguarded Newton to `|psi - q| < 1e-12 * max(1, q)`.
    pub fn right_inverse(&self, which: Process) -> Result<f64> {
        let f = |t: f64| self.laplace_exponent(which, t).unwrap_or(f64::NAN) - self.q;
        // psi(theta) -> inf needs sigma > 0 or a positive asymptotic drift.
        let asym = self.drift(which) - self.jump_mass();
        if self.sigma == 0.0 && asym <= 0.0 {
            return Err(Error::RootIsolationFailure(format!(
                "laplace exponent of {:?} stays below q; no positive root",
                which
            )));
        }
        let (lo, hi) = roots::expand_upward(f, 0.0, 1.0).ok_or_else(|| {
            Error::RootIsolationFailure("no upward bracket for the right inverse".into())
        })?;
        let seed = roots::bisect(f, lo, hi, 1e-9 * hi.max(1.0));
        let root = roots::newton_polish(
            f,
            |t| self.laplace_exponent_deriv(which, t),
            lo,
            hi,
            seed,
            1e-12 * self.q.max(1.0),
        );
        Ok(root)
    }

    /// Evaluates every standing-assumption clause. Violations are reported,
    /// never thrown; structural failures show up as messages too.
    pub fn validate_assumptions(&self) -> AssumptionReport {
        let mut messages = Vec::new();
        let sigma_positive = self.sigma > 0.0;
        if !sigma_positive {
            messages.push("sigma must be positive: creeping requires a Gaussian part".into());
        }
        let mass = self.jump_mass();
        let finite_mass = mass.is_finite();

        let (phi_q, big_phi_q) = if sigma_positive {
            (
                self.right_inverse(Process::Y).unwrap_or(f64::NAN),
                self.right_inverse(Process::X).unwrap_or(f64::NAN),
            )
        } else {
            (f64::NAN, f64::NAN)
        };

        let phi_bound = phi_q.is_finite() && phi_q < 2.0 * self.delta / (self.sigma * self.sigma);
        if sigma_positive && !phi_bound {
            messages.push(format!(
                "phi(q) = {phi_q:.6} must be below 2*delta/sigma^2 = {:.6}",
                2.0 * self.delta / (self.sigma * self.sigma)
            ));
        }

        let s_mass_bound = self.s < self.c / (mass + self.q);
        if !s_mass_bound {
            messages.push(format!(
                "terminal value S = {} must be below c/(mass+q) = {:.6}",
                self.s,
                self.c / (mass + self.q)
            ));
        }

        let drift_margin = self.c - self.delta + 0.5 * self.sigma * self.sigma * phi_q;
        let drift_margin_positive = drift_margin > 0.0;
        let s_window_upper = if drift_margin_positive {
            (self.delta / phi_q - 0.5 * self.sigma * self.sigma) / drift_margin
        } else {
            f64::NAN
        };
        let s_in_window = self.s > 0.0 && s_window_upper.is_finite() && self.s < s_window_upper;

        AssumptionReport {
            sigma_positive,
            phi_bound,
            finite_mass,
            s_mass_bound,
            s_window_upper,
            s_in_window,
            drift_margin,
            drift_margin_positive,
            phi_q,
            big_phi_q,
            messages,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::case_study;

    #[test]
    fn exponent_vanishes_at_zero() {
        let m = case_study();
        assert_eq!(m.psi_x(0.0).unwrap(), 0.0);
        assert_eq!(m.psi_y(0.0).unwrap(), 0.0);
    }

    #[test]
    fn exponent_values() {
        let m = case_study();
        // 2 + 1/2 - 1/1.5 and the same minus delta.
        assert!((m.psi_x(1.0).unwrap() - 11.0 / 6.0).abs() < 1e-15);
        assert!((m.psi_y(1.0).unwrap() - (11.0 / 6.0 - 1.8)).abs() < 1e-15);
    }

    #[test]
    fn exponent_pole_is_reported() {
        let m = case_study();
        assert!(matches!(
            m.psi_x(-0.5),
            Err(Error::PoleEvaluation { .. })
        ));
    }

    #[test]
    fn right_inverses_solve_the_exponent_equation() {
        let m = case_study();
        let big_phi = m.right_inverse(Process::X).unwrap();
        let phi = m.right_inverse(Process::Y).unwrap();
        assert!((big_phi - 1.67984395964113).abs() < 1e-4);
        // The dominant growth rate of the drag-adjusted scale function. The
        // value is pinned by the root-sum identity of the cleared cubic.
        assert!((phi - 2.92214438511238).abs() < 1e-4);
        assert!((m.psi_x(big_phi).unwrap() - 4.0).abs() < 1e-10 * 4.0);
        assert!((m.psi_y(phi).unwrap() - 4.0).abs() < 1e-10 * 4.0);
        assert!(phi > big_phi && big_phi > 0.0);
    }

    #[test]
    fn right_inverse_pure_brownian() {
        // theta^2 = 1 for c = 0, sigma = sqrt(2), q = 1.
        let m = LevyModel::new(0.0, 2f64.sqrt(), vec![], 1.0, 0.5, 0.01).unwrap();
        assert!((m.right_inverse(Process::X).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_phases_are_rejected() {
        let jumps = vec![
            JumpComponent {
                lambda: 1.0,
                p: 0.5,
            },
            JumpComponent {
                lambda: 0.5,
                p: 0.5,
            },
        ];
        assert!(matches!(
            LevyModel::new(2.0, 1.0, jumps, 4.0, 1.8, 0.05),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn assumption_report_for_case_study() {
        let m = case_study();
        let r = m.validate_assumptions();
        assert!(r.assumptions_ok());
        assert!(r.s_in_window);
        assert!((r.s_window_upper - 0.0698259773657037).abs() < 1e-9);
        assert!(r.drift_margin_positive);
        assert!(r.messages.is_empty());
    }

    #[test]
    fn window_excludes_large_terminal_value() {
        let mut m = case_study();
        m.s = 0.39;
        let r = m.validate_assumptions();
        assert!(!r.s_in_window);
        assert!(r.s_mass_bound, "0.39 is still below c/(mass+q) = 0.4");
    }

    #[test]
    fn widened_volatility_breaks_the_phi_bound() {
        let mut m = case_study();
        m.sigma = 2.0;
        let r = m.validate_assumptions();
        // 2*delta/sigma^2 = 0.9 while phi(q) stays above it.
        assert!(r.phi_q > 0.9);
        assert!(!r.phi_bound);
        assert!(!r.assumptions_ok());
    }

    #[test]
    fn sigma_zero_reports_instead_of_throwing() {
        let m = LevyModel::new(
            2.0,
            0.0,
            vec![JumpComponent {
                lambda: 1.0,
                p: 0.5,
            }],
            4.0,
            1.8,
            0.05,
        )
        .unwrap();
        let r = m.validate_assumptions();
        assert!(!r.sigma_positive);
        assert!(!r.assumptions_ok());
        assert!(!r.messages.is_empty());
    }
}
