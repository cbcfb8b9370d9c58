//! Quasipolynomials: entire functions of the form `Σ pⱼ(s)·exp(−s·τⱼ)` with
//! polynomial coefficients and nonnegative, pairwise distinct delays.
//!
//! These are the characteristic functions of scalar linear delay-differential
//! equations of retarded type. The module provides exact evaluation,
//! differentiation, degree bookkeeping, and the Pólya–Szegő root-count bounds
//! for horizontal strips that everything downstream (root counting, design
//! verification, dominance checks) is built on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Errors from quasipolynomial construction and strip queries.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuasipolyError {
    /// Construction would produce an identically zero function.
    #[error("all terms are zero polynomials")]
    AllTermsZero,
    #[error("delay {0} is negative")]
    NegativeDelay(f64),
    #[error("duplicate delay {0}")]
    DuplicateDelay(f64),
    /// A delayed-feedback system needs strictly positive, distinct delays.
    #[error("invalid two-delay system: {0}")]
    InvalidSystem(String),
    /// All delays coincide, so there is no exclusion strip.
    #[error("single-exponential quasipolynomial has zero delay spread")]
    NoExclusionStrip,
    #[error("strip bounds are inverted: [{0}, {1}]")]
    InvalidStrip(f64, f64),
}

/// Real univariate polynomial with ascending coefficients; index `k` holds the
/// coefficient of `s^k`. Trailing exact zeros are trimmed, so the zero
/// polynomial has an empty coefficient list.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Index of the last nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Horner evaluation.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * s + c;
        }
        acc
    }

    pub fn eval_real(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Polynomial::new(coeffs)
    }

    /// `self' − τ·self`, the polynomial factor produced by differentiating
    /// `self·exp(−sτ)` once.
    fn shifted_derivative(&self, tau: f64) -> Polynomial {
        let n = self.coeffs.len();
        let mut out = vec![0.0; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k] -= tau * c;
            if k > 0 {
                out[k - 1] += k as f64 * c;
            }
        }
        Polynomial::new(out)
    }
}

/// One `p(s)·exp(−s·delay)` term.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub polynomial: Polynomial,
    pub delay: f64,
}

/// Horizontal strip `{ s : im_low ≤ Im(s) ≤ im_high }` (bounds in rad/time).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizontalStrip {
    pub im_low: f64,
    pub im_high: f64,
}

impl HorizontalStrip {
    pub fn new(im_low: f64, im_high: f64) -> Result<Self, QuasipolyError> {
        if !(im_low <= im_high) {
            return Err(QuasipolyError::InvalidStrip(im_low, im_high));
        }
        Ok(Self { im_low, im_high })
    }

    pub fn width(&self) -> f64 {
        self.im_high - self.im_low
    }
}

/// `Δ(s) = Σⱼ pⱼ(s)·exp(−s·τⱼ)` with delays strictly increasing and every
/// term polynomial nonzero. Values are immutable after construction and all
/// operations are pure, so sharing across threads is safe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuasipolynomial", into = "RawQuasipolynomial")]
pub struct Quasipolynomial {
    terms: Vec<Term>,
}

impl Quasipolynomial {
    /// Builds from `(polynomial, delay)` pairs. Zero polynomials are pruned
    /// immediately so degree bookkeeping stays correct; delays must be
    /// nonnegative and pairwise distinct (compared exactly, no snapping).
    pub fn from_terms(terms: Vec<(Polynomial, f64)>) -> Result<Self, QuasipolyError> {
        let mut kept: Vec<Term> = Vec::with_capacity(terms.len());
        for (polynomial, delay) in terms {
            if !delay.is_finite() || delay < 0.0 {
                return Err(QuasipolyError::NegativeDelay(delay));
            }
            if polynomial.is_zero() {
                continue;
            }
            kept.push(Term { polynomial, delay });
        }
        if kept.is_empty() {
            return Err(QuasipolyError::AllTermsZero);
        }
        kept.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        for pair in kept.windows(2) {
            if pair[0].delay == pair[1].delay {
                return Err(QuasipolyError::DuplicateDelay(pair[0].delay));
            }
        }
        Ok(Self { terms: kept })
    }

    /// Internal constructor that tolerates the identically zero function
    /// (produced by differentiating past the degree).
    fn from_terms_pruned(terms: Vec<Term>) -> Self {
        let mut kept: Vec<Term> = terms.into_iter().filter(|t| !t.polynomial.is_zero()).collect();
        kept.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        Self { terms: kept }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.terms.iter().map(|t| t.delay)
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.last().map(|t| t.delay).unwrap_or(0.0)
    }

    /// Largest delay minus smallest delay (the exponent spread `r_δ`).
    pub fn delay_spread(&self) -> f64 {
        match (self.terms.first(), self.terms.last()) {
            (Some(a), Some(b)) => b.delay - a.delay,
            _ => 0.0,
        }
    }

    /// `Σⱼ pⱼ(s)·exp(−s·τⱼ)` with the polynomials evaluated by Horner's
    /// scheme. Entire function, so no failure modes.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let e = if term.delay == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                (-s * term.delay).exp()
            };
            acc += term.polynomial.eval(s) * e;
        }
        acc
    }

    /// Evaluation together with the sum of term magnitudes, which sets the
    /// scale of cancellation noise in the result: the value is meaningless
    /// once it sinks below roughly `ε` times the magnitude.
    pub fn eval_with_magnitude(&self, s: Complex64) -> (Complex64, f64) {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut magnitude = 0.0;
        for term in &self.terms {
            let e = if term.delay == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                (-s * term.delay).exp()
            };
            let value = term.polynomial.eval(s) * e;
            acc += value;
            magnitude += value.norm();
        }
        (acc, magnitude)
    }

    /// `order`-th derivative. One differentiation maps a term `(p, τ)` to
    /// `(p' − τ·p, τ)`; the delay set never changes, and terms whose
    /// polynomial collapses to zero are dropped.
    pub fn derivative(&self, order: u32) -> Quasipolynomial {
        let mut terms = self.terms.clone();
        for _ in 0..order {
            terms = terms
                .into_iter()
                .map(|t| Term {
                    polynomial: t.polynomial.shifted_derivative(t.delay),
                    delay: t.delay,
                })
                .filter(|t| !t.polynomial.is_zero())
                .collect();
        }
        Quasipolynomial::from_terms_pruned(terms)
    }

    /// Degree `D = N + Σⱼ dⱼ` where `N` is the number of terms minus one.
    /// `None` for the identically zero function.
    pub fn degree(&self) -> Option<usize> {
        if self.terms.is_empty() {
            return None;
        }
        let sum: usize = self
            .terms
            .iter()
            .map(|t| t.polynomial.degree().expect("terms are nonzero"))
            .sum();
        Some(self.terms.len() - 1 + sum)
    }

    /// Pólya–Szegő bounds `(⌈r_δ·w/2π − D⌉, ⌊r_δ·w/2π + D⌋)` on the number of
    /// roots (with multiplicity) inside a horizontal strip of width `w`.
    pub fn polya_szego_bounds(&self, strip: &HorizontalStrip) -> (i64, i64) {
        let d = self.degree().unwrap_or(0) as f64;
        let x = self.delay_spread() * strip.width() / (2.0 * PI);
        ((x - d).ceil() as i64, (x + d).floor() as i64)
    }

    /// Half-width `2π/r_δ` of the strip in which a maximal-multiplicity root
    /// is the unique root. Fails for a single-exponential (zero spread).
    pub fn exclusion_strip_halfwidth(&self) -> Result<f64, QuasipolyError> {
        let spread = self.delay_spread();
        if spread <= 0.0 {
            return Err(QuasipolyError::NoExclusionStrip);
        }
        Ok(2.0 * PI / spread)
    }

    /// A-priori bound `|a₀| + Σ|aᵢ|` on the real part of any root, available
    /// only for the feedback shape `s + a₀ − Σ aᵢ·exp(−sτᵢ)` (monic linear
    /// zero-delay term, constant delayed terms). General quasipolynomials
    /// need a caller-supplied right edge.
    pub fn feedback_form_root_bound(&self) -> Option<f64> {
        let first = self.terms.first()?;
        let c0 = first.polynomial.coeffs();
        if first.delay != 0.0 || c0.len() != 2 || c0[1] != 1.0 {
            return None;
        }
        let mut bound = c0[0].abs();
        for term in &self.terms[1..] {
            let c = term.polynomial.coeffs();
            if c.len() != 1 {
                return None;
            }
            bound += c[0].abs();
        }
        Some(bound)
    }
}

/// Characteristic function `Δ(s) = s + a₀ − a₁·exp(−s·τ₁) − a₂·exp(−s·τ₂)` of
/// the scalar two-delay feedback loop. Zero gains drop the corresponding
/// delayed term.
pub fn from_two_delay_system(
    a0: f64,
    a1: f64,
    a2: f64,
    tau1: f64,
    tau2: f64,
) -> Result<Quasipolynomial, QuasipolyError> {
    if !(tau1 > 0.0) || !(tau2 > 0.0) {
        return Err(QuasipolyError::InvalidSystem(format!(
            "delays must be positive, got ({tau1}, {tau2})"
        )));
    }
    if tau1 == tau2 {
        return Err(QuasipolyError::InvalidSystem(format!(
            "delays must be distinct, got ({tau1}, {tau2})"
        )));
    }
    Quasipolynomial::from_terms(vec![
        (Polynomial::new(vec![a0, 1.0]), 0.0),
        (Polynomial::constant(-a1), tau1),
        (Polynomial::constant(-a2), tau2),
    ])
}

/// Same builder for coefficients written in the additive convention
/// `Δ(s) = s + a₀ + b₁·exp(−s·τ₁) + b₂·exp(−s·τ₂)`; the gains are negated
/// into the canonical feedback form.
pub fn from_two_delay_system_additive(
    a0: f64,
    b1: f64,
    b2: f64,
    tau1: f64,
    tau2: f64,
) -> Result<Quasipolynomial, QuasipolyError> {
    from_two_delay_system(a0, -b1, -b2, tau1, tau2)
}

/// Wire format: `{"terms": [{"coeffs": [c0, c1, ...], "delay": t}, ...]}`
/// with delays strictly increasing.
#[derive(Serialize, Deserialize)]
struct RawQuasipolynomial {
    terms: Vec<RawTerm>,
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    coeffs: Vec<f64>,
    delay: f64,
}

impl TryFrom<RawQuasipolynomial> for Quasipolynomial {
    type Error = QuasipolyError;

    fn try_from(raw: RawQuasipolynomial) -> Result<Self, Self::Error> {
        for pair in raw.terms.windows(2) {
            if !(pair[0].delay < pair[1].delay) {
                return Err(QuasipolyError::DuplicateDelay(pair[1].delay));
            }
        }
        Quasipolynomial::from_terms(
            raw.terms
                .into_iter()
                .map(|t| (Polynomial::new(t.coeffs), t.delay))
                .collect(),
        )
    }
}

impl From<Quasipolynomial> for RawQuasipolynomial {
    fn from(qp: Quasipolynomial) -> Self {
        RawQuasipolynomial {
            terms: qp
                .terms
                .into_iter()
                .map(|t| RawTerm {
                    coeffs: t.polynomial.coeffs().to_vec(),
                    delay: t.delay,
                })
                .collect(),
        }
    }
}
