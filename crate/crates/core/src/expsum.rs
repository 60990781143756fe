//! Closed-form algebra on finite sums of `coeff * x^power * exp(rate * x)` terms.
//!
//! Scale functions of jump diffusions with hyperexponential claims live in this
//! class, and the class is closed under differentiation, antidifferentiation,
//! convolution and exponential tail integrals. Every quantity downstream
//! (threshold curves, value functions, generator residuals) therefore evaluates
//! without quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial powers above this indicate a modeling bug: the solver pipeline
/// only produces powers <= 2 (confluent convolutions bump a power by one).
pub const POWER_CAP: u32 = 8;

/// Coefficients below `PRUNE_REL * max|coeff|` are dropped during canonicalization.
const PRUNE_REL: f64 = 1e-14;

/// Rate pairs closer than `CONFLUENCE_REL * max(1, max|rate|)` are convolved as
/// equal rates. Dividing by a near-zero rate gap would lose all precision
/// exactly where the closed form stays finite.
const CONFLUENCE_REL: f64 = 1e-9;

/// A single `coeff * x^power * exp(rate * x)` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub power: u32,
    pub rate: f64,
}

impl Term {
    pub fn new(coeff: f64, power: u32, rate: f64) -> Self {
        Term { coeff, power, rate }
    }

    fn eval(&self, x: f64) -> f64 {
        self.coeff * x.powi(self.power as i32) * (self.rate * x).exp()
    }
}

/// A finite sum of polynomial-times-exponential terms in canonical merged form:
/// no two terms share a `(power, rate)` pair and negligible coefficients are
/// pruned. Values are immutable once built; all operations return new sums.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpPolySum {
    terms: Vec<Term>,
    /// Scale-type functions vanish on the negative half line.
    #[serde(default)]
    scale_type: bool,
}

fn factorial(n: u32) -> f64 {
    debug_assert!(n <= 2 * POWER_CAP + 2);
    (1..=n as u64).map(|k| k as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

impl ExpPolySum {
    /// Builds a sum from raw terms and canonicalizes it.
    pub fn new(terms: Vec<Term>) -> Self {
        let mut s = ExpPolySum {
            terms,
            scale_type: false,
        };
        s.canonicalize();
        s
    }

    pub fn zero() -> Self {
        ExpPolySum::default()
    }

    pub fn constant(c: f64) -> Self {
        ExpPolySum::new(vec![Term::new(c, 0, 0.0)])
    }

    pub fn exponential(coeff: f64, rate: f64) -> Self {
        ExpPolySum::new(vec![Term::new(coeff, 0, rate)])
    }

    /// Marks the sum as vanishing on `x < 0` (the scale-function convention).
    pub fn into_scale_type(mut self) -> Self {
        self.scale_type = true;
        self
    }

    pub fn is_scale_type(&self) -> bool {
        self.scale_type
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest rate appearing in the sum, or `-inf` for the zero sum.
    pub fn max_rate(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.rate)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn canonicalize(&mut self) {
        self.terms.retain(|t| t.coeff != 0.0);
        for t in &self.terms {
            assert!(
                t.power <= POWER_CAP,
                "polynomial power {} exceeds cap {}; this indicates a modeling bug",
                t.power,
                POWER_CAP
            );
            assert!(t.coeff.is_finite() && t.rate.is_finite());
        }
        self.terms.sort_by(|a, b| {
            (a.rate, a.power)
                .partial_cmp(&(b.rate, b.power))
                .expect("finite terms")
        });
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.power == t.power && last.rate.to_bits() == t.rate.to_bits() => {
                    last.coeff += t.coeff;
                }
                _ => merged.push(t),
            }
        }
        let max_coeff = merged.iter().map(|t| t.coeff.abs()).fold(0.0, f64::max);
        merged.retain(|t| t.coeff.abs() > PRUNE_REL * max_coeff);
        self.terms = merged;
    }

    /// Evaluates the sum. Scale-type sums return 0 for `x < 0`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.scale_type && x < 0.0 {
            return 0.0;
        }
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Termwise derivative: `(c, n, r) -> (c*r, n, r) + (c*n, n-1, r)`.
    pub fn derivative(&self) -> Self {
        let mut terms = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            if t.rate != 0.0 {
                terms.push(Term::new(t.coeff * t.rate, t.power, t.rate));
            }
            if t.power > 0 {
                terms.push(Term::new(t.coeff * t.power as f64, t.power - 1, t.rate));
            }
        }
        let mut s = ExpPolySum::new(terms);
        s.scale_type = self.scale_type;
        s
    }

    pub fn nth_derivative(&self, n: u32) -> Self {
        let mut f = self.clone();
        for _ in 0..n {
            f = f.derivative();
        }
        f
    }

    /// The antiderivative `F` with `F(0) = 0`.
    pub fn antiderivative(&self) -> Self {
        let mut terms = Vec::new();
        for t in &self.terms {
            if t.rate == 0.0 {
                terms.push(Term::new(
                    t.coeff / (t.power + 1) as f64,
                    t.power + 1,
                    0.0,
                ));
            } else {
                // Repeated integration by parts:
                // int x^n e^{rx} dx = e^{rx} * sum_k (-1)^k n!/(n-k)! x^{n-k} / r^{k+1}.
                let n = t.power;
                let mut sign = 1.0;
                for k in 0..=n {
                    let coef =
                        t.coeff * sign * factorial(n) / factorial(n - k) / t.rate.powi(k as i32 + 1);
                    terms.push(Term::new(coef, n - k, t.rate));
                    sign = -sign;
                }
                // Subtract F(0) so the antiderivative vanishes at the origin.
                let at_zero = t.coeff * (-1.0f64).powi(n as i32) * factorial(n)
                    / t.rate.powi(n as i32 + 1);
                terms.push(Term::new(-at_zero, 0, 0.0));
            }
        }
        let mut s = ExpPolySum::new(terms);
        s.scale_type = self.scale_type;
        s
    }

    /// Multiplies by `exp(shift * x)`, bumping every rate.
    pub fn rate_shift(&self, shift: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term::new(t.coeff, t.power, t.rate + shift))
            .collect();
        let mut s = ExpPolySum::new(terms);
        s.scale_type = self.scale_type;
        s
    }

    /// The translate `x -> f(x - b)`, expanded into absolute-argument terms.
    pub fn shift(&self, b: f64) -> Self {
        self.translate(-b)
    }

    /// The advance `x -> f(x + b)`, expanded into absolute-argument terms.
    pub fn advance(&self, b: f64) -> Self {
        self.translate(b)
    }

    fn translate(&self, h: f64) -> Self {
        // f(x + h): (c, n, r) -> c e^{rh} sum_j C(n,j) h^{n-j} x^j e^{rx}.
        let mut terms = Vec::new();
        for t in &self.terms {
            let scale = t.coeff * (t.rate * h).exp();
            for j in 0..=t.power {
                terms.push(Term::new(
                    scale * binomial(t.power, j) * h.powi((t.power - j) as i32),
                    j,
                    t.rate,
                ));
            }
        }
        let mut s = ExpPolySum::new(terms);
        s.scale_type = self.scale_type;
        s
    }

    /// Closed form of `int_b^inf e^{-decay * y} f(y) dy`.
    ///
    /// Requires `decay` to exceed every rate in `f` by at least a small margin;
    /// otherwise the integral diverges.
    pub fn tail_laplace(&self, decay: f64, b: f64) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            let gap = decay - t.rate;
            if gap < 1e-12 {
                return Err(Error::DivergentIntegral {
                    rate: t.rate,
                    decay,
                });
            }
            // int_b^inf y^n e^{-gap y} dy = e^{-gap b} sum_j n!/(n-j)! b^{n-j} / gap^{j+1}
            let n = t.power;
            let mut sum = 0.0;
            for j in 0..=n {
                sum += factorial(n) / factorial(n - j) * b.powi((n - j) as i32)
                    / gap.powi(j as i32 + 1);
            }
            total += t.coeff * (-gap * b).exp() * sum;
        }
        Ok(total)
    }

    /// Closed form of `int_0^b e^{z*y} f(y) dy`.
    ///
    /// Near-cancelling rates (`|rate + z|` small) switch to a power series, which
    /// keeps the result accurate where the direct closed form would subtract
    /// large, nearly equal quantities.
    pub fn integral_exp_weighted(&self, z: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let rho = t.rate + z;
            let n = t.power;
            if (rho * b).abs() < 0.5 {
                // int_0^b y^n e^{rho y} dy = sum_j rho^j b^{n+j+1} / (j! (n+j+1))
                let mut acc = 0.0;
                let mut rho_pow = 1.0;
                let mut jfact = 1.0;
                for j in 0..60u32 {
                    if j > 0 {
                        rho_pow *= rho;
                        jfact *= j as f64;
                    }
                    let term = rho_pow * b.powi((n + j) as i32 + 1) / (jfact * (n + j + 1) as f64);
                    acc += term;
                    if term.abs() < 1e-17 * acc.abs().max(1e-300) {
                        break;
                    }
                }
                total += t.coeff * acc;
            } else {
                let mut at_b = 0.0;
                let mut sign = 1.0;
                for k in 0..=n {
                    at_b += sign * factorial(n) / factorial(n - k) * b.powi((n - k) as i32)
                        / rho.powi(k as i32 + 1);
                    sign = -sign;
                }
                let at_zero = (-1.0f64).powi(n as i32) * factorial(n) / rho.powi(n as i32 + 1);
                total += t.coeff * ((rho * b).exp() * at_b - at_zero);
            }
        }
        total
    }

    /// Closed form of the lagged convolution `x -> int_b^x f(x - y) g(y) dy`,
    /// valid for `x >= b` and expressed in the absolute variable `x`.
    ///
    /// Confluent rate pairs merge into polynomial-factor terms instead of
    /// dividing by the vanishing rate gap.
    pub fn convolve_on(&self, g: &ExpPolySum, b: f64) -> Self {
        debug_assert!(b >= 0.0);
        let max_rate = self
            .terms
            .iter()
            .chain(g.terms.iter())
            .map(|t| t.rate.abs())
            .fold(1.0, f64::max);
        let tol = CONFLUENCE_REL * max_rate;

        // Reduce to a convolution from zero: substitute u = y - b, s = x - b.
        let g_adv = g.advance(b);
        let mut terms = Vec::new();
        for tf in &self.terms {
            for tg in &g_adv.terms {
                convolve_pair(tf, tg, tol, &mut terms);
            }
        }
        let mut conv0 = ExpPolySum::new(terms);
        conv0.scale_type = self.scale_type || g.scale_type;
        // Back to the absolute variable.
        conv0.shift(b)
    }
}

/// Convolution from zero of two single terms, appended onto `out`.
///
/// For distinct rates this is the partial-fraction expansion of
/// `m! n! / ((p - a)^{m+1} (p - b)^{n+1})`; for (near-)equal rates the Beta
/// integral gives a single term with a bumped power.
fn convolve_pair(f: &Term, g: &Term, tol: f64, out: &mut Vec<Term>) {
    let (m, a) = (f.power, f.rate);
    let (n, bb) = (g.power, g.rate);
    let c = f.coeff * g.coeff;
    if (a - bb).abs() < tol {
        let rate = 0.5 * (a + bb);
        out.push(Term::new(
            c * factorial(m) * factorial(n) / factorial(m + n + 1),
            m + n + 1,
            rate,
        ));
        return;
    }
    // Residue terms at rate `a`.
    let mut sign = 1.0;
    for i in 0..=m {
        let coef = sign * factorial(m) * factorial(n + i) / (factorial(i) * factorial(m - i))
            / (a - bb).powi((n + 1 + i) as i32);
        out.push(Term::new(c * coef, m - i, a));
        sign = -sign;
    }
    // Residue terms at rate `b`.
    let mut sign = 1.0;
    for j in 0..=n {
        let coef = sign * factorial(n) * factorial(m + j) / (factorial(j) * factorial(n - j))
            / (bb - a).powi((m + 1 + j) as i32);
        out.push(Term::new(c * coef, n - j, bb));
        sign = -sign;
    }
}

impl std::ops::Add<&ExpPolySum> for &ExpPolySum {
    type Output = ExpPolySum;

    fn add(self, rhs: &ExpPolySum) -> ExpPolySum {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&rhs.terms);
        let mut s = ExpPolySum::new(terms);
        s.scale_type = self.scale_type || rhs.scale_type;
        s
    }
}

impl std::ops::Mul<f64> for &ExpPolySum {
    type Output = ExpPolySum;

    fn mul(self, k: f64) -> ExpPolySum {
        let terms = self
            .terms
            .iter()
            .map(|t| Term::new(t.coeff * k, t.power, t.rate))
            .collect();
        let mut s = ExpPolySum::new(terms);
        s.scale_type = self.scale_type;
        s
    }
}
