//! Scale functions of the surplus and of its dividend-dragged variant, built
//! exactly by partial fractions.
//!
//! For a hyperexponential claim mixture the equation `psi(theta) = q` clears
//! into a real polynomial of degree `2 + #phases` whose roots interlace the
//! poles `-p_i`. Inverting the defining Laplace transform termwise gives the
//! scale function as a pure exponential sum with residue coefficients
//! `1/psi'(theta_k)`, so every derivative, tail integral, and convolution
//! downstream stays in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expsum::ExpPolySum;
use crate::model::{LevyModel, Process};
use crate::roots;

/// The pair of scale functions with their spectral data.
#[derive(Debug, Clone, Serialize)]
pub struct ScalePair {
    /// Scale function of the free surplus.
    pub w: ExpPolySum,
    /// Scale function of the surplus under the maximal dividend drag.
    pub w_bold: ExpPolySum,
    pub roots_x: Vec<f64>,
    pub residues_x: Vec<f64>,
    pub roots_y: Vec<f64>,
    pub residues_y: Vec<f64>,
    /// Positive root of `psi_X = q` (dominant growth rate of `w`).
    pub big_phi_q: f64,
    /// Positive root of `psi_Y = q` (dominant growth rate of `w_bold`).
    pub phi_q: f64,
    /// Unique minimizer of `w'`: `w''` changes sign from negative to positive here.
    pub a_star: f64,
}

impl ScalePair {
    pub fn w_deriv(&self, order: u32) -> ExpPolySum {
        self.w.nth_derivative(order)
    }
}

/// Builds both scale functions. Fails loudly when the pole-interlacing
/// structure does not produce the expected root count, which indicates
/// violated preconditions rather than a numerical accident.
pub fn build_scale_pair(m: &LevyModel) -> Result<ScalePair> {
    if m.sigma <= 0.0 {
        return Err(Error::AssumptionViolated(
            "scale construction requires sigma > 0".into(),
        ));
    }
    let (roots_x, residues_x) = invert_exponent(m, Process::X)?;
    let (roots_y, residues_y) = invert_exponent(m, Process::Y)?;
    let w = ExpPolySum::new(
        roots_x
            .iter()
            .zip(&residues_x)
            .map(|(&r, &c)| crate::expsum::Term::new(c, 0, r))
            .collect(),
    )
    .into_scale_type();
    let w_bold = ExpPolySum::new(
        roots_y
            .iter()
            .zip(&residues_y)
            .map(|(&r, &c)| crate::expsum::Term::new(c, 0, r))
            .collect(),
    )
    .into_scale_type();

    let big_phi_q = *roots_x.last().expect("at least two roots");
    let phi_q = *roots_y.last().expect("at least two roots");
    let a_star = locate_w_prime_minimum(&w)?;

    Ok(ScalePair {
        w,
        w_bold,
        roots_x,
        residues_x,
        roots_y,
        residues_y,
        big_phi_q,
        phi_q,
        a_star,
    })
}

/// Clears denominators of `psi(theta) - q`: a polynomial with the same roots,
/// finite at the poles, evaluated in product form for stability.
fn cleared_polynomial(m: &LevyModel, which: Process, theta: f64) -> f64 {
    let base = m.drift(which) * theta + 0.5 * m.sigma * m.sigma * theta * theta - m.q;
    let mut v = base;
    for j in &m.jumps {
        v *= j.p + theta;
    }
    for (i, j) in m.jumps.iter().enumerate() {
        let mut prod = j.lambda * theta;
        for (k, other) in m.jumps.iter().enumerate() {
            if k != i {
                prod *= other.p + theta;
            }
        }
        v -= prod;
    }
    v
}

fn invert_exponent(m: &LevyModel, which: Process) -> Result<(Vec<f64>, Vec<f64>)> {
    let roots = isolate_roots(m, which)?;
    let residues: Vec<f64> = roots
        .iter()
        .map(|&r| 1.0 / m.laplace_exponent_deriv(which, r))
        .collect();
    if residues.iter().any(|c| !c.is_finite()) {
        return Err(Error::RootIsolationFailure(
            "non-finite residue; roots too close to a pole".into(),
        ));
    }
    Ok((roots, residues))
}

/// Isolates all `2 + #phases` real roots of `psi = q` on the pole-interlaced
/// intervals, one root per interval.
fn isolate_roots(m: &LevyModel, which: Process) -> Result<Vec<f64>> {
    let poly = |t: f64| cleared_polynomial(m, which, t);
    let mut decays: Vec<f64> = m.jumps.iter().map(|j| j.p).collect();
    decays.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_expected = decays.len() + 2;

    let mut brackets: Vec<(f64, f64)> = Vec::with_capacity(n_expected);

    // One root below every pole: expand downward until the polynomial flips.
    let floor = -decays.last().copied().unwrap_or(0.0);
    let f_floor = poly(floor);
    let mut step = 1.0f64.max(0.1 * floor.abs());
    let mut lo = floor;
    let mut found = false;
    for _ in 0..200 {
        let cand = lo - step;
        if poly(cand) * f_floor <= 0.0 {
            brackets.push((cand, lo));
            found = true;
            break;
        }
        lo = cand;
        step *= 2.0;
    }
    if !found {
        return Err(Error::RootIsolationFailure(
            "no sign change below the deepest pole".into(),
        ));
    }

    // One root between consecutive poles, one in (-p_min, 0).
    for w in decays.windows(2) {
        brackets.push((-w[1], -w[0]));
    }
    if let Some(&p_min) = decays.first() {
        brackets.push((-p_min, 0.0));
    }

    // The positive root.
    let psi_gap = |t: f64| m.laplace_exponent(which, t).unwrap_or(f64::NAN) - m.q;
    let (plo, phi_hi) = roots::expand_upward(psi_gap, 0.0, 1.0).ok_or_else(|| {
        Error::RootIsolationFailure("no upward bracket for the positive root".into())
    })?;
    brackets.push((plo, phi_hi));

    let mut out = Vec::with_capacity(n_expected);
    for (blo, bhi) in brackets {
        if poly(blo) * poly(bhi) > 0.0 {
            return Err(Error::RootIsolationFailure(format!(
                "interval ({blo}, {bhi}) fails to bracket a root of psi = q"
            )));
        }
        let seed = roots::bisect(poly, blo, bhi, 0.0);
        let root = roots::newton_polish(
            psi_gap,
            |t| m.laplace_exponent_deriv(which, t),
            blo,
            bhi,
            seed,
            1e-12 * m.q.max(1.0),
        );
        out.push(root);
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if out.len() != n_expected {
        return Err(Error::RootIsolationFailure(format!(
            "expected {n_expected} roots, found {}",
            out.len()
        )));
    }
    Ok(out)
}

/// The minimizer of `w'`: zero of `w''`, which starts negative at the origin
/// (for positive drift) and ends positive under the dominant growth rate. When
/// `w''(0+) >= 0` the minimum sits at the origin.
fn locate_w_prime_minimum(w: &ExpPolySum) -> Result<f64> {
    let w2 = w.nth_derivative(2);
    let w3 = w.nth_derivative(3);
    if w2.eval(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = roots::expand_upward(|x| w2.eval(x), 0.0, 1.0).ok_or_else(|| {
        Error::RootIsolationFailure("w'' never turns positive; corrupted roots".into())
    })?;
    let seed = roots::bisect(|x| w2.eval(x), lo, hi, 0.0);
    Ok(roots::newton_polish(
        |x| w2.eval(x),
        |x| w3.eval(x),
        lo,
        hi,
        seed,
        0.0,
    ))
}

/// Boundary values `(w(0), w'(0+), w''(0+), w'''(0+))`, cross-checked against
/// their closed forms. A mismatch signals corrupted roots or residues.
pub fn boundary_values(sp: &ScalePair, m: &LevyModel) -> Result<(f64, f64, f64, f64)> {
    let sums: Vec<f64> = (0..4)
        .map(|k| {
            sp.roots_x
                .iter()
                .zip(&sp.residues_x)
                .map(|(&r, &c)| c * r.powi(k))
                .sum()
        })
        .collect();
    let s2 = m.sigma * m.sigma;
    let expected = [
        0.0,
        2.0 / s2,
        -4.0 * m.c / (s2 * s2),
        4.0 / (s2 * s2) * (m.jump_mass() + m.q + 2.0 * m.c * m.c / s2),
    ];
    let coeff_scale = sp
        .residues_x
        .iter()
        .map(|c| c.abs())
        .fold(0.0f64, f64::max);
    for (k, (&got, &want)) in sums.iter().zip(&expected).enumerate() {
        let scale = if want == 0.0 {
            coeff_scale
        } else {
            want.abs()
        };
        if (got - want).abs() > 1e-8 * scale {
            return Err(Error::BoundaryMismatch(format!(
                "derivative order {k}: computed {got}, closed form {want}"
            )));
        }
    }
    Ok((sums[0], sums[1], sums[2], sums[3]))
}

/// One branch of a piecewise function handed to the generator: `f` is the
/// analytic expression valid on `(lo, hi]`.
#[derive(Clone, Copy)]
pub struct GeneratorPiece<'a> {
    pub lo: f64,
    pub hi: f64,
    pub f: &'a ExpPolySum,
}

/// The extended generator applied to a function that vanishes on the negative
/// half line, evaluated at `x > 0`:
///
/// `c f'(x) + sigma^2/2 f''(x) + sum_i lambda_i (int_0^x f(x-y) p_i e^{-p_i y} dy - f(x))`.
///
/// The claim law is absolutely continuous, so a jump discontinuity of `f` at
/// the origin carries no mass: functions vanishing on `(-inf, 0)` and on
/// `(-inf, 0]` integrate identically.
pub fn apply_generator(m: &LevyModel, f: &ExpPolySum, x: f64) -> f64 {
    let piece = GeneratorPiece {
        lo: 0.0,
        hi: f64::INFINITY,
        f,
    };
    apply_generator_piecewise(m, &[piece], x)
}

/// Generator of a piecewise exponential-polynomial function. Pieces must be
/// ordered, disjoint, and cover `(0, max grid x]`; the function vanishes
/// below zero. The claim convolution integrates each branch in closed form.
pub fn apply_generator_piecewise(m: &LevyModel, pieces: &[GeneratorPiece], x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let here = pieces
        .iter()
        .find(|p| p.lo < x && x <= p.hi)
        .or_else(|| pieces.last())
        .expect("at least one piece");
    let f1 = here.f.derivative();
    let f2 = f1.derivative();
    let mut v = m.c * f1.eval(x) + 0.5 * m.sigma * m.sigma * f2.eval(x);
    let f_at_x = here.f.eval(x);
    for j in &m.jumps {
        // int_0^x f(x-y) p e^{-py} dy = p e^{-px} int_0^x f(u) e^{pu} du,
        // split over the pieces that intersect (0, x).
        let mut inner = 0.0;
        for piece in pieces {
            let u0 = piece.lo.max(0.0);
            let u1 = piece.hi.min(x);
            if u1 <= u0 {
                continue;
            }
            let g = piece.f.rate_shift(j.p).antiderivative();
            inner += g.eval(u1) - g.eval(u0);
        }
        let conv = j.p * (-j.p * x).exp() * inner;
        v += j.lambda * (conv - f_at_x);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::case_study;

    const SEC4_ROOTS_X: [f64; 3] = [-5.76694351396, -0.41290044568, 1.67984395964];
    const SEC4_COEF_X: [f64; 3] = [-0.264203055857, -0.0155470458197, 0.279750101676];
    const SEC4_ROOTS_Y: [f64; 3] = [-3.42214438511, -0.4, 2.92214438511];
    const SEC4_COEF_Y: [f64; 3] = [-0.304813020819, -0.0199203187251, 0.324733339544];

    #[test]
    fn case_study_spectral_data() {
        let m = case_study();
        let sp = build_scale_pair(&m).unwrap();
        for (got, want) in sp.roots_x.iter().zip(&SEC4_ROOTS_X) {
            assert!((got - want).abs() < 1e-9, "root {got} vs {want}");
        }
        for (got, want) in sp.residues_x.iter().zip(&SEC4_COEF_X) {
            assert!((got - want).abs() < 1e-9, "residue {got} vs {want}");
        }
        for (got, want) in sp.roots_y.iter().zip(&SEC4_ROOTS_Y) {
            assert!((got - want).abs() < 1e-9, "root {got} vs {want}");
        }
        for (got, want) in sp.residues_y.iter().zip(&SEC4_COEF_Y) {
            assert!((got - want).abs() < 1e-9, "residue {got} vs {want}");
        }
        assert_eq!(sp.roots_x.len(), 3);
        assert!((sp.big_phi_q - 1.67984395964113).abs() < 1e-9);
        assert!((sp.phi_q - 2.92214438511238).abs() < 1e-9);
    }

    #[test]
    fn no_jump_scale_function_is_hyperbolic_sine() {
        // c = 0, sigma = sqrt(2), q = 1: w(x) = (e^x - e^{-x}) / 2.
        let m = crate::model::LevyModel::new(0.0, 2f64.sqrt(), vec![], 1.0, 0.5, 0.01).unwrap();
        let sp = build_scale_pair(&m).unwrap();
        for &x in &[0.0, 0.3, 1.0, 2.5] {
            assert!((sp.w.eval(x) - x.sinh()).abs() < 1e-12 * x.sinh().max(1.0));
        }
    }

    #[test]
    fn case_study_boundary_values() {
        let m = case_study();
        let sp = build_scale_pair(&m).unwrap();
        let (w0, w1, w2, w3) = boundary_values(&sp, &m).unwrap();
        assert!(w0.abs() < 1e-9);
        assert!((w1 - 2.0).abs() < 1e-8);
        assert!((w2 + 8.0).abs() < 1e-7);
        assert!((w3 - 52.0).abs() < 1e-6);
    }

    #[test]
    fn quiet_brownian_boundary_values() {
        // sigma = 2, c = 1, no jumps, q = 1.
        let m = crate::model::LevyModel::new(1.0, 2.0, vec![], 1.0, 0.5, 0.01).unwrap();
        let sp = build_scale_pair(&m).unwrap();
        let (_, w1, w2, _) = boundary_values(&sp, &m).unwrap();
        assert!((w1 - 0.5).abs() < 1e-10);
        assert!((w2 + 0.25).abs() < 1e-10);
    }

    #[test]
    fn w_prime_minimizer() {
        let m = case_study();
        let sp = build_scale_pair(&m).unwrap();
        assert!((sp.a_star - 0.323818871727891).abs() < 1e-9);
        let w2 = sp.w_deriv(2);
        assert!(w2.eval(sp.a_star).abs() < 1e-10);
        assert!(w2.eval(0.5 * sp.a_star) < 0.0);
        assert!(w2.eval(2.0 * sp.a_star) > 0.0);
    }

    #[test]
    fn scale_function_is_an_eigenfunction() {
        let m = case_study();
        let sp = build_scale_pair(&m).unwrap();
        for &x in &[0.1, 0.5, 1.0, 2.0] {
            let resid = apply_generator(&m, &sp.w, x) - m.q * sp.w.eval(x);
            let tol = 1e-6 * (1.0 + m.q * sp.w.eval(x));
            assert!(resid.abs() <= tol, "residual {resid} at x = {x}");
        }
    }

    #[test]
    fn scale_derivative_is_an_eigenfunction() {
        let m = case_study();
        let sp = build_scale_pair(&m).unwrap();
        let w1 = sp.w.derivative();
        for &x in &[0.1, 0.5, 1.0, 2.0] {
            let resid = apply_generator(&m, &w1, x) - m.q * w1.eval(x);
            let tol = 1e-6 * (1.0 + m.q * sp.w.eval(x));
            assert!(resid.abs() <= tol, "residual {resid} at x = {x}");
        }
    }

    #[test]
    fn generator_of_constant_without_jumps() {
        let m = crate::model::LevyModel::new(1.0, 2.0, vec![], 1.0, 0.5, 0.01).unwrap();
        let one = ExpPolySum::constant(1.0).into_scale_type();
        for &x in &[0.2, 1.0, 3.0] {
            assert_eq!(apply_generator(&m, &one, x), 0.0);
        }
    }

    #[test]
    fn drag_adjusted_decomposition() {
        // Leading coefficient is the reciprocal exponent slope at phi(q); the
        // remaining terms have negative rates and non-positive coefficients.
        let m = case_study();
        let sp = build_scale_pair(&m).unwrap();
        let lead = 1.0 / m.laplace_exponent_deriv(crate::model::Process::Y, sp.phi_q);
        let last = sp.w_bold.terms().last().unwrap();
        assert!((last.coeff - lead).abs() < 1e-12 * lead.abs());
        for t in &sp.w_bold.terms()[..sp.w_bold.terms().len() - 1] {
            assert!(t.rate < 0.0 && t.coeff <= 0.0);
        }
    }
}
