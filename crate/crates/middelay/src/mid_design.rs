//! Closed-form controller synthesis through roots of maximal multiplicity.
//!
//! For the feedback loop `y'(t) + a₀y(t) = Σ aᵢ·y(t − τᵢ)` the characteristic
//! function `Δ(s) = s + a₀ − Σ aᵢ·exp(−sτᵢ)` has degree `N + 1`, so no root
//! exceeds multiplicity `N + 1`. Forcing that multiplicity pins the root and
//! the gains in closed form:
//!
//! - one delay: double root at `s* = −a₀ − 1/τ₁` with `a₁ = −e^(−1−τ₁a₀)/τ₁`;
//! - two delays: triple root at `s₀ = −a₀ − 1/τ₁ − 1/τ₂` with the gains
//!   produced by [`design_two_delay`].
//!
//! The maximal-multiplicity root is strictly dominant in both cases, so it is
//! the spectral abscissa. The module also provides the λ-normalization that
//! rescales a two-delay design to delays `(λ, 1)` with the triple root moved
//! to the origin, the general interpolation solve for any number of delays,
//! and numerical multiplicity verification.

use crate::quasipoly::{from_two_delay_system, Quasipolynomial, QuasipolyError};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("delay must be positive, got {0}")]
    NonpositiveDelay(f64),
    #[error("delays must be distinct, got {0}")]
    EqualDelays(f64),
    #[error("no delays supplied")]
    NoDelays,
    #[error("normalization ratio must lie in (0, 1), got {0}")]
    LambdaOutOfRange(f64),
    /// The requested `(a₀, s₀)` pair is not compatible with a root of maximal
    /// multiplicity at `s₀` for these delays.
    #[error("inconsistent multiplicity target: interpolation residual {0:.3e}")]
    InconsistentTarget(f64),
    #[error("interpolation system is numerically singular")]
    SingularSystem,
    /// Requested multiplicity exceeds the quasipolynomial degree, which the
    /// strip bound rules out before any evaluation.
    #[error("multiplicity {requested} exceeds the degree bound {degree}")]
    MultiplicityExceedsDegree { requested: u32, degree: usize },
    #[error(transparent)]
    Quasipoly(#[from] QuasipolyError),
}

/// Double-root design for a single delayed gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneDelayDesign {
    pub a0: f64,
    pub tau1: f64,
    pub s_star: f64,
    pub a1: f64,
}

impl OneDelayDesign {
    /// `Δ(s) = s + a₀ − a₁·exp(−sτ₁)`.
    pub fn characteristic(&self) -> Quasipolynomial {
        Quasipolynomial::from_terms(vec![
            (crate::quasipoly::Polynomial::new(vec![self.a0, 1.0]), 0.0),
            (crate::quasipoly::Polynomial::constant(-self.a1), self.tau1),
        ])
        .expect("one-delay characteristic is well formed")
    }
}

/// Triple-root design for two delayed gains; the serialized form
/// `{"a0", "tau1", "tau2", "s0", "a1", "a2"}` is the wire format of the
/// `design` and `verify` commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoDelayDesign {
    pub a0: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub s0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl TwoDelayDesign {
    /// `Δ(s) = s + a₀ − a₁·exp(−sτ₁) − a₂·exp(−sτ₂)`.
    pub fn characteristic(&self) -> Quasipolynomial {
        from_two_delay_system(self.a0, self.a1, self.a2, self.tau1, self.tau2)
            .expect("two-delay characteristic is well formed")
    }
}

/// A two-delay design rescaled to delays `(λ, 1)`, `λ = τ₁/τ₂`, with the
/// triple root moved to the origin: `Q(s) = s + ã₀ + ã₁·e^(−λs) + ã₂·e^(−s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSystem {
    pub lambda: f64,
    pub a0_t: f64,
    pub a1_t: f64,
    pub a2_t: f64,
}

impl NormalizedSystem {
    /// Closed-form coefficients of the normalized family at ratio `λ`:
    /// `ã₀ = −(λ+1)/λ`, `ã₁ = 1/(λ(1−λ))`, `ã₂ = −λ/(1−λ)`.
    pub fn closed_form(lambda: f64) -> Result<Self, DesignError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(DesignError::LambdaOutOfRange(lambda));
        }
        Ok(Self {
            lambda,
            a0_t: -(lambda + 1.0) / lambda,
            a1_t: 1.0 / (lambda * (1.0 - lambda)),
            a2_t: -lambda / (1.0 - lambda),
        })
    }

    pub fn to_quasipolynomial(&self) -> Quasipolynomial {
        Quasipolynomial::from_terms(vec![
            (crate::quasipoly::Polynomial::new(vec![self.a0_t, 1.0]), 0.0),
            (crate::quasipoly::Polynomial::constant(self.a1_t), self.lambda),
            (crate::quasipoly::Polynomial::constant(self.a2_t), 1.0),
        ])
        .expect("normalized system is well formed")
    }
}

/// Gains interpolating a maximal-multiplicity root, as returned by
/// [`solve_multiplicity_system`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicitySolution {
    pub a0: f64,
    pub gains: Vec<f64>,
    pub s0: f64,
    /// Least-squares residual of the full interpolation system.
    pub residual: f64,
}

impl MultiplicitySolution {
    /// `Δ(s) = s + a₀ − Σ aᵢ·exp(−sτᵢ)` for the solved gains.
    pub fn characteristic(&self, delays: &[f64]) -> Result<Quasipolynomial, DesignError> {
        let mut terms = vec![(crate::quasipoly::Polynomial::new(vec![self.a0, 1.0]), 0.0)];
        for (&gain, &tau) in self.gains.iter().zip(delays) {
            terms.push((crate::quasipoly::Polynomial::constant(-gain), tau));
        }
        Ok(Quasipolynomial::from_terms(terms)?)
    }
}

/// Numerical check that `s₀` is a root of multiplicity exactly `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub s0: Complex64,
    pub multiplicity: u32,
    /// `|Δ^(k)(s₀)|` for `k = 0..=m`.
    pub derivative_magnitudes: Vec<f64>,
    /// Per-order thresholds `1e-9·(1 + |s₀|^k)`.
    pub tolerances: Vec<f64>,
    /// All orders below `m` vanish and order `m` does not.
    pub passed: bool,
}

/// Double-root placement for a single delay: `s* = −a₀ − 1/τ₁` and
/// `a₁ = −e^(−1−τ₁a₀)/τ₁`. The root is strictly dominant, so `s*` is the
/// spectral abscissa of the closed loop.
pub fn design_one_delay(a0: f64, tau1: f64) -> Result<OneDelayDesign, DesignError> {
    if !(tau1 > 0.0) {
        return Err(DesignError::NonpositiveDelay(tau1));
    }
    Ok(OneDelayDesign {
        a0,
        tau1,
        s_star: -a0 - 1.0 / tau1,
        a1: -(-1.0 - tau1 * a0).exp() / tau1,
    })
}

/// Triple-root placement for two delays:
/// `s₀ = −a₀ − 1/τ₁ − 1/τ₂`,
/// `a₁ = −τ₂·e^(s₀τ₁) / (τ₁(τ₂−τ₁))`,
/// `a₂ =  τ₁·e^(s₀τ₂) / (τ₂(τ₂−τ₁))`.
/// Inputs with `tau1 > tau2` are swapped (the formulas are symmetric under
/// the swap); equal delays are rejected.
pub fn design_two_delay(a0: f64, tau1: f64, tau2: f64) -> Result<TwoDelayDesign, DesignError> {
    if !(tau1 > 0.0) {
        return Err(DesignError::NonpositiveDelay(tau1));
    }
    if !(tau2 > 0.0) {
        return Err(DesignError::NonpositiveDelay(tau2));
    }
    if tau1 == tau2 {
        return Err(DesignError::EqualDelays(tau1));
    }
    let (tau1, tau2) = if tau1 < tau2 { (tau1, tau2) } else { (tau2, tau1) };
    let s0 = -a0 - 1.0 / tau1 - 1.0 / tau2;
    Ok(TwoDelayDesign {
        a0,
        tau1,
        tau2,
        s0,
        a1: -tau2 * (s0 * tau1).exp() / (tau1 * (tau2 - tau1)),
        a2: tau1 * (s0 * tau2).exp() / (tau2 * (tau2 - tau1)),
    })
}

/// Rescales a design to delays `(λ, 1)` with the triple root at the origin:
/// `λ = τ₁/τ₂`, `ã₀ = (s₀+a₀)τ₂`, `ã₁ = −a₁τ₂·e^(−s₀τ₁)`,
/// `ã₂ = −a₂τ₂·e^(−s₀τ₂)`. The map `s ↦ τ₂(s − s₀)` carries roots to roots,
/// preserving multiplicities and the ordering of real parts.
pub fn normalize(design: &TwoDelayDesign) -> NormalizedSystem {
    NormalizedSystem {
        lambda: design.tau1 / design.tau2,
        a0_t: (design.s0 + design.a0) * design.tau2,
        a1_t: -design.a1 * design.tau2 * (-design.s0 * design.tau1).exp(),
        a2_t: -design.a2 * design.tau2 * (-design.s0 * design.tau2).exp(),
    }
}

/// The normalized family evaluated directly from its closed form:
/// `Q(s, λ) = s − (λ+1)/λ − (λ/(1−λ))·e^(−s) + (1/(λ(1−λ)))·e^(−λs)`.
/// Kept independent of the quasipolynomial machinery so the two evaluation
/// routes can check each other.
pub fn normalized_q(s: Complex64, lambda: f64) -> Result<Complex64, DesignError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(DesignError::LambdaOutOfRange(lambda));
    }
    Ok(
        s - (lambda + 1.0) / lambda - lambda / (1.0 - lambda) * (-s).exp()
            + 1.0 / (lambda * (1.0 - lambda)) * (-lambda * s).exp(),
    )
}

/// Solves the interpolation conditions `Δ^(k)(s₀) = 0`, `k = 0..=N`, for the
/// gains of `Δ(s) = s + a₀ − Σ aᵢ·exp(−sτᵢ)`.
///
/// With `a0` given, the `N+1` conditions overdetermine the `N` gains; the
/// least-squares solution is accepted only if the residual stays below 1e−9,
/// so an `s₀` that is inconsistent with `a₀` surfaces as an error instead of
/// garbage gains. With `a0 = None` the square system in `(a₀, a₁, …, a_N)`
/// is solved, which picks the unique intercept making `s₀` attainable.
pub fn solve_multiplicity_system(
    a0: Option<f64>,
    delays: &[f64],
    s0: f64,
) -> Result<MultiplicitySolution, DesignError> {
    if delays.is_empty() {
        return Err(DesignError::NoDelays);
    }
    for &tau in delays {
        if !(tau > 0.0) {
            return Err(DesignError::NonpositiveDelay(tau));
        }
    }
    let mut sorted = delays.to_vec();
    sorted.sort_by(f64::total_cmp);
    for pair in sorted.windows(2) {
        if pair[0] == pair[1] {
            return Err(DesignError::EqualDelays(pair[0]));
        }
    }

    let n = delays.len();
    // Row k solves Δ^(k)(s₀) = 0 rewritten with a sign making the gain matrix
    // a generalized Vandermonde in the delays:
    //   k = 0:  a₀·(present?) − Σ aᵢ·e^(−s₀τᵢ)·(−1) … → Σ aᵢ τᵢ⁰ e^(−s₀τᵢ) = s₀ + a₀
    //   k = 1:  Σ aᵢ τᵢ¹ e^(−s₀τᵢ) = −1
    //   k ≥ 2:  Σ aᵢ τᵢᵏ e^(−s₀τᵢ) = 0
    match a0 {
        Some(a0) => {
            let mut a = DMatrix::<f64>::zeros(n + 1, n);
            let mut b = DVector::<f64>::zeros(n + 1);
            for (k, mut row) in (0..=n).zip(a.row_iter_mut()) {
                for (i, &tau) in delays.iter().enumerate() {
                    row[i] = tau.powi(k as i32) * (-s0 * tau).exp();
                }
                b[k] = match k {
                    0 => s0 + a0,
                    1 => -1.0,
                    _ => 0.0,
                };
            }
            let svd = a.clone().svd(true, true);
            let gains = svd
                .solve(&b, 1e-14)
                .map_err(|_| DesignError::SingularSystem)?;
            let residual = (&a * &gains - &b).norm();
            if residual > 1e-9 {
                return Err(DesignError::InconsistentTarget(residual));
            }
            Ok(MultiplicitySolution { a0, gains: gains.iter().copied().collect(), s0, residual })
        }
        None => {
            let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
            let mut b = DVector::<f64>::zeros(n + 1);
            a[(0, 0)] = 1.0;
            for (i, &tau) in delays.iter().enumerate() {
                a[(0, i + 1)] = -(-s0 * tau).exp();
            }
            b[0] = -s0;
            for k in 1..=n {
                for (i, &tau) in delays.iter().enumerate() {
                    a[(k, i + 1)] = tau.powi(k as i32) * (-s0 * tau).exp();
                }
                b[k] = if k == 1 { -1.0 } else { 0.0 };
            }
            let solution = a
                .clone()
                .lu()
                .solve(&b)
                .ok_or(DesignError::SingularSystem)?;
            let residual = (&a * &solution - &b).norm();
            Ok(MultiplicitySolution {
                a0: solution[0],
                gains: solution.iter().skip(1).copied().collect(),
                s0,
                residual,
            })
        }
    }
}

/// Evaluates `|Δ^(k)(s₀)|` for `k = 0..=m` and reports whether all orders
/// below `m` vanish (within `1e-9·(1 + |s₀|^k)`) while order `m` does not.
/// Requests beyond the degree bound are rejected before any evaluation.
pub fn verify_multiplicity(
    qp: &Quasipolynomial,
    s0: Complex64,
    m: u32,
) -> Result<MultiplicityReport, DesignError> {
    let degree = qp.degree().unwrap_or(0);
    if m as usize > degree {
        return Err(DesignError::MultiplicityExceedsDegree { requested: m, degree });
    }
    let mut derivative_magnitudes = Vec::with_capacity(m as usize + 1);
    let mut tolerances = Vec::with_capacity(m as usize + 1);
    let mut current = qp.clone();
    for k in 0..=m {
        derivative_magnitudes.push(current.eval(s0).norm());
        tolerances.push(1e-9 * (1.0 + s0.norm().powi(k as i32)));
        current = current.derivative(1);
    }
    let passed = derivative_magnitudes[..m as usize]
        .iter()
        .zip(&tolerances[..m as usize])
        .all(|(mag, tol)| mag <= tol)
        && derivative_magnitudes[m as usize] > tolerances[m as usize];
    Ok(MultiplicityReport { s0, multiplicity: m, derivative_magnitudes, tolerances, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    #[test]
    fn one_delay_integrator_optimum() {
        let d = design_one_delay(0.0, 1.0 / E).unwrap();
        assert_abs_diff_eq!(d.s_star, -E, epsilon = 1e-14);
        assert_abs_diff_eq!(d.a1, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn one_delay_unit_delay() {
        let d = design_one_delay(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(d.s_star, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.a1, -(-1.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn one_delay_marginal_design() {
        let d = design_one_delay(-1.0, 1.0).unwrap();
        assert_abs_diff_eq!(d.s_star, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.a1, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn one_delay_rejects_nonpositive_delay() {
        assert!(design_one_delay(0.0, 0.0).is_err());
        assert!(design_one_delay(0.0, -1.0).is_err());
    }

    #[test]
    fn two_delay_unit_case() {
        let d = design_two_delay(0.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(d.s0, -1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.a1, -2.0 * (-1.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(d.a2, (-3.0f64).exp() / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn two_delay_constrained_optimum_values() {
        let d = design_two_delay(0.0, 0.4063, 1.122).unwrap();
        assert_abs_diff_eq!(d.s0, -3.3525, epsilon = 1e-3);
        assert_abs_diff_eq!(d.a1, -0.9882, epsilon = 1e-3);
        assert_abs_diff_eq!(d.a2, 0.01176, epsilon = 1e-4);
    }

    #[test]
    fn two_delay_platelet_abscissa() {
        let d = design_two_delay(3.0, 9.0, 19.0).unwrap();
        assert_abs_diff_eq!(d.s0, -3.0 - 1.0 / 9.0 - 1.0 / 19.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.s0, -3.1637, epsilon = 1e-4);
    }

    #[test]
    fn two_delay_swaps_and_rejects() {
        let d = design_two_delay(0.0, 2.0, 1.0).unwrap();
        assert_eq!((d.tau1, d.tau2), (1.0, 2.0));
        assert_eq!(design_two_delay(0.0, 1.0, 1.0), Err(DesignError::EqualDelays(1.0)));
        assert!(design_two_delay(0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn normalize_unit_case_matches_closed_form() {
        let d = design_two_delay(0.0, 1.0, 2.0).unwrap();
        let n = normalize(&d);
        assert_abs_diff_eq!(n.lambda, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(n.a0_t, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.a1_t, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.a2_t, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_satisfies_interpolation_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let a0 = rng.gen_range(-2.0..2.0);
            let tau1 = rng.gen_range(0.1..2.0);
            let tau2 = tau1 + rng.gen_range(0.1..2.0);
            let n = normalize(&design_two_delay(a0, tau1, tau2).unwrap());
            // Q(0) = 0, Q'(0) = 0, Q''(0) = 0 in terms of the coefficients
            assert_abs_diff_eq!(n.a0_t + n.a1_t + n.a2_t, 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(-n.lambda * n.a1_t - n.a2_t, -1.0, epsilon = 1e-9);
            let cf = NormalizedSystem::closed_form(n.lambda).unwrap();
            assert_relative_eq!(n.a0_t, cf.a0_t, max_relative = 1e-9);
            assert_relative_eq!(n.a1_t, cf.a1_t, max_relative = 1e-9);
            assert_relative_eq!(n.a2_t, cf.a2_t, max_relative = 1e-9);
        }
    }

    #[test]
    fn normalized_q_triple_root_at_origin() {
        for lambda in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let v = normalized_q(Complex64::new(0.0, 0.0), lambda).unwrap();
            assert!(v.norm() < 1e-12, "Q(0, {lambda}) = {v}");
            // first two derivatives vanish, the third does not (≈ λ via
            // central differences; h balances truncation against the
            // cancellation noise of the O(10) coefficients)
            let h = 5e-3;
            let f = |x: f64| normalized_q(Complex64::new(x, 0.0), lambda).unwrap().re;
            let d1 = (f(h) - f(-h)) / (2.0 * h);
            let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
            let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
            assert_abs_diff_eq!(d1, 0.0, epsilon = 1e-4);
            assert_abs_diff_eq!(d2, 0.0, epsilon = 1e-4);
            assert_abs_diff_eq!(d3, lambda, epsilon = 1e-3);
        }
    }

    #[test]
    fn normalized_q_rejects_lambda_outside_unit_interval() {
        for lambda in [0.0, 1.0, -0.5, 1.5] {
            assert!(normalized_q(Complex64::new(1.0, 0.0), lambda).is_err());
        }
    }

    #[test]
    fn normalized_q_matches_quasipolynomial_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sys = NormalizedSystem::closed_form(0.5).unwrap();
        let qp = sys.to_quasipolynomial();
        for _ in 0..50 {
            let s = Complex64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let direct = normalized_q(s, 0.5).unwrap();
            let via_qp = qp.eval(s);
            assert!((direct - via_qp).norm() <= 1e-10 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn interpolation_matches_two_delay_closed_form() {
        let d = design_two_delay(0.7, 0.8, 2.1).unwrap();
        let sol = solve_multiplicity_system(Some(d.a0), &[d.tau1, d.tau2], d.s0).unwrap();
        assert_relative_eq!(sol.gains[0], d.a1, max_relative = 1e-9);
        assert_relative_eq!(sol.gains[1], d.a2, max_relative = 1e-9);
    }

    #[test]
    fn interpolation_matches_one_delay_closed_form() {
        let d = design_one_delay(0.3, 1.4).unwrap();
        let sol = solve_multiplicity_system(Some(d.a0), &[d.tau1], d.s_star).unwrap();
        assert_relative_eq!(sol.gains[0], d.a1, max_relative = 1e-10);
    }

    #[test]
    fn interpolation_three_delays_quadruple_root() {
        let delays = [0.917686, 1.0, 1.067836];
        let sol = solve_multiplicity_system(None, &delays, 0.0).unwrap();
        assert!(sol.residual < 1e-9);
        let qp = sol.characteristic(&delays).unwrap();
        let report = verify_multiplicity(&qp, Complex64::new(0.0, 0.0), 4).unwrap();
        assert!(report.passed, "report: {report:?}");
    }

    #[test]
    fn interpolation_rejects_inconsistent_target() {
        // s0 not matching −a₀ − 1/τ₁ − 1/τ₂ cannot carry multiplicity 3
        let err = solve_multiplicity_system(Some(0.0), &[1.0, 2.0], -2.0).unwrap_err();
        assert!(matches!(err, DesignError::InconsistentTarget(_)));
    }

    #[test]
    fn verify_multiplicity_design_passes() {
        let d = design_two_delay(0.0, 1.0, 2.0).unwrap();
        let report =
            verify_multiplicity(&d.characteristic(), Complex64::new(d.s0, 0.0), 3).unwrap();
        assert!(report.passed);
        assert!(report.derivative_magnitudes[3] > 1e-3);
    }

    #[test]
    fn verify_multiplicity_rejects_beyond_degree() {
        let d = design_two_delay(0.0, 1.0, 2.0).unwrap();
        let err = verify_multiplicity(&d.characteristic(), Complex64::new(d.s0, 0.0), 4)
            .unwrap_err();
        assert_eq!(err, DesignError::MultiplicityExceedsDegree { requested: 4, degree: 3 });
    }

    #[test]
    fn verify_multiplicity_one_delay_passes() {
        let d = design_one_delay(0.2, 0.9).unwrap();
        let report =
            verify_multiplicity(&d.characteristic(), Complex64::new(d.s_star, 0.0), 2).unwrap();
        assert!(report.passed);
    }

    #[test]
    fn two_delay_improves_on_one_delay() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a0 = rng.gen_range(-3.0..3.0);
            let tau1 = rng.gen_range(0.05..3.0);
            let tau2 = tau1 + rng.gen_range(0.01..3.0);
            let one = design_one_delay(a0, tau1).unwrap();
            let two = design_two_delay(a0, tau1, tau2).unwrap();
            assert!(two.s0 < one.s_star);
        }
    }

    #[test]
    fn design_json_round_trip() {
        let d = design_two_delay(0.0, 1.0, 2.0).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"s0\":-1.5"));
        let back: TwoDelayDesign = serde_json::from_str(&json).unwrap();
        assert_eq!(d, back);
    }
}
