//! Numerical instruments for the normalized family `Q(·, λ)`: continuation of
//! root branches in the delay ratio λ, imaginary-axis crossing diagnostics,
//! and the λ → 1 limit function.
//!
//! A nontrivial root of `Q(·, λ)` in the closed right half-plane would be
//! simple and would extend analytically in λ; tracking such branches and
//! scanning for imaginary-axis crossings are falsification probes for the
//! dominance of the triple root at the origin. The crossing equations and
//! the branch derivative come from implicit differentiation of
//! `λ(1−λ)·Q(s, λ)`.

use crate::mid_design::{normalized_q, DesignError};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BranchError {
    #[error("lambda {0} outside (0, 1)")]
    LambdaOutOfRange(f64),
    /// Branches through the origin are identically zero; only nontrivial
    /// branches can be continued.
    #[error("starting root is the trivial root at the origin")]
    TrivialBranch,
    #[error("starting point is not a root: |Q| = {0:.3e}")]
    NotARoot(f64),
    #[error("branch-derivative denominator vanished: |den| = {0:.3e}")]
    SingularDerivative(f64),
    #[error("Newton corrector diverged at lambda = {0}")]
    CorrectorDivergence(f64),
    #[error("omega must be nonzero")]
    ZeroOmega,
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// One point of a root branch `λ ↦ s(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub s: Complex64,
    /// `|Q(s, λ)|`.
    pub residual: f64,
}

/// A frequency/ratio pair satisfying both imaginary-axis crossing equations
/// within tolerance, with the transversal direction `Re s'(λ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingCandidate {
    pub omega: f64,
    pub lambda0: f64,
    pub residual_re: f64,
    pub residual_im: f64,
    /// Sign-determining numerator of `Re s'(λ₀)`; nonnegative.
    pub direction: f64,
}

const BRANCH_RESIDUAL_TOL: f64 = 1e-9;

/// `∂Q/∂s` for the normalized family.
fn normalized_q_ds(s: Complex64, lambda: f64) -> Complex64 {
    1.0 + lambda / (1.0 - lambda) * (-s).exp() - 1.0 / (1.0 - lambda) * (-lambda * s).exp()
}

/// Derivative of a root branch with respect to λ, by implicit
/// differentiation:
/// `s'(λ) = −[(1−2λ)s + 2λ − 2λe^(−s) − s·e^(−λs)] / [λ(1−λ) + λ²e^(−s) − λe^(−λs)]`.
/// The denominator is nonzero along branches in the closed right half-plane
/// away from the origin; a vanishing denominator is reported with its value.
pub fn branch_derivative(s: Complex64, lambda: f64) -> Result<Complex64, BranchError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(BranchError::LambdaOutOfRange(lambda));
    }
    let em_s = (-s).exp();
    let em_ls = (-lambda * s).exp();
    let numerator = (1.0 - 2.0 * lambda) * s + 2.0 * lambda - 2.0 * lambda * em_s - s * em_ls;
    let denominator = lambda * (1.0 - lambda) + lambda * lambda * em_s - lambda * em_ls;
    if denominator.norm() < 1e-13 * (1.0 + numerator.norm()) {
        return Err(BranchError::SingularDerivative(denominator.norm()));
    }
    Ok(-numerator / denominator)
}

/// Newton correction of `s` onto the root set of `Q(·, λ)`.
fn correct_onto_root(s: Complex64, lambda: f64) -> Result<Complex64, BranchError> {
    let mut z = s;
    for _ in 0..30 {
        let q = normalized_q(z, lambda)?;
        if q.norm() <= 1e-13 * (1.0 + z.norm()) {
            return Ok(z);
        }
        let dq = normalized_q_ds(z, lambda);
        if dq.norm() == 0.0 {
            break;
        }
        let step = q / dq;
        z -= step;
        if !z.is_finite() {
            break;
        }
    }
    let q = normalized_q(z, lambda)?;
    if q.norm() <= BRANCH_RESIDUAL_TOL {
        Ok(z)
    } else {
        Err(BranchError::CorrectorDivergence(lambda))
    }
}

/// Newton-corrects an approximate root location onto the root set of
/// `Q(·, λ)`, yielding a starting point for [`continue_branch`].
pub fn locate_branch_point(lambda: f64, s_guess: Complex64) -> Result<BranchPoint, BranchError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(BranchError::LambdaOutOfRange(lambda));
    }
    let s = correct_onto_root(s_guess, lambda)?;
    if s.norm() < 1e-6 {
        return Err(BranchError::TrivialBranch);
    }
    Ok(BranchPoint { lambda, s, residual: normalized_q(s, lambda)?.norm() })
}

/// Continues a nontrivial root branch from `start.lambda` to `lambda_end`
/// with `steps` classical 4th-order predictor steps on the branch derivative,
/// each followed by a Newton corrector onto `Q(·, λ) = 0`. Every emitted
/// point has residual at most 1e−9.
pub fn continue_branch(
    start: &BranchPoint,
    lambda_end: f64,
    steps: u32,
) -> Result<Vec<BranchPoint>, BranchError> {
    if !(start.lambda > 0.0 && start.lambda < 1.0) {
        return Err(BranchError::LambdaOutOfRange(start.lambda));
    }
    if !(lambda_end > 0.0 && lambda_end < 1.0) {
        return Err(BranchError::LambdaOutOfRange(lambda_end));
    }
    if start.s.norm() < 1e-6 {
        return Err(BranchError::TrivialBranch);
    }
    let q0 = normalized_q(start.s, start.lambda)?.norm();
    if q0 > BRANCH_RESIDUAL_TOL {
        return Err(BranchError::NotARoot(q0));
    }

    let h = (lambda_end - start.lambda) / steps as f64;
    let mut path = Vec::with_capacity(steps as usize + 1);
    let mut lambda = start.lambda;
    let mut s = start.s;
    path.push(BranchPoint { lambda, s, residual: q0 });
    for _ in 0..steps {
        let k1 = branch_derivative(s, lambda)?;
        let k2 = branch_derivative(s + 0.5 * h * k1, lambda + 0.5 * h)?;
        let k3 = branch_derivative(s + 0.5 * h * k2, lambda + 0.5 * h)?;
        let k4 = branch_derivative(s + h * k3, lambda + h)?;
        let predicted = s + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4);
        lambda += h;
        s = correct_onto_root(predicted, lambda)?;
        if s.norm() < 1e-9 {
            // collapsed onto the trivial root: the branch was lost
            return Err(BranchError::CorrectorDivergence(lambda));
        }
        path.push(BranchPoint { lambda, s, residual: normalized_q(s, lambda)?.norm() });
    }
    Ok(path)
}

/// Candidate ratio for an imaginary-axis crossing at frequency `ω`, from the
/// closed form `λ₀ = (ω² + 2(cos ω − 1)) / ((ω − sin ω)² + (1 − cos ω)²)`.
pub fn crossing_lambda(omega: f64) -> Result<f64, BranchError> {
    if omega == 0.0 {
        return Err(BranchError::ZeroOmega);
    }
    let num = omega * omega + 2.0 * (omega.cos() - 1.0);
    let den = (omega - omega.sin()).powi(2) + (1.0 - omega.cos()).powi(2);
    Ok(num / den)
}

/// Residuals of the two crossing equations at `(ω, λ)`:
/// `r₁ = cos(λω) − λ²cos ω + λ² − 1`,
/// `r₂ = sin(λω) − λ²sin ω + λ²ω − λω`.
/// `Q(iω, λ) = 0` exactly when both vanish.
pub fn crossing_residuals(omega: f64, lambda: f64) -> (f64, f64) {
    let r1 = (lambda * omega).cos() - lambda * lambda * omega.cos() + lambda * lambda - 1.0;
    let r2 = (lambda * omega).sin() - lambda * lambda * omega.sin() + lambda * lambda * omega
        - lambda * omega;
    (r1, r2)
}

/// Sign-determining numerator of `Re s'(λ₀)` at a crossing:
/// `2λ₀³(1−λ₀)·(ω·cos(ω/2) − 2·sin(ω/2))²`. Nonnegative, so a branch can
/// only cross the imaginary axis from left to right.
pub fn crossing_direction(omega: f64, lambda0: f64) -> f64 {
    let w = omega * (omega / 2.0).cos() - 2.0 * (omega / 2.0).sin();
    2.0 * lambda0.powi(3) * (1.0 - lambda0) * w * w
}

/// Scans `ω ∈ (0, omega_max]` on a uniform grid for pairs
/// `(ω, crossing_lambda(ω))` with ratio inside `(0, 1)` where both crossing
/// residuals drop below `tol`. An empty result means no imaginary-axis
/// crossing was detected for the normalized family.
///
/// Both residuals vanish identically at λ = 1, so the raw values shrink like
/// `(1 − λ₀)` for candidates squeezed against that endpoint regardless of
/// whether a crossing exists; the detector therefore thresholds the residuals
/// divided by `(1 − λ₀)`, which removes exactly that structural zero.
pub fn scan_crossings(omega_max: f64, samples: u32, tol: f64) -> Vec<CrossingCandidate> {
    let mut found = Vec::new();
    for k in 1..=samples {
        let omega = omega_max * k as f64 / samples as f64;
        let lambda0 = match crossing_lambda(omega) {
            Ok(l) => l,
            Err(_) => continue,
        };
        if !(lambda0 > 0.0 && lambda0 < 1.0) {
            continue;
        }
        let (r1, r2) = crossing_residuals(omega, lambda0);
        let scale = 1.0 - lambda0;
        if (r1 / scale).abs() < tol && (r2 / scale).abs() < tol {
            found.push(CrossingCandidate {
                omega,
                lambda0,
                residual_re: r1,
                residual_im: r2,
                direction: crossing_direction(omega, lambda0),
            });
        }
    }
    found
}

/// Uniform limit of `Q(·, λ)` as λ → 1: `s − 2 + e^(−s)·(s + 2)`, which has
/// a triple root at the origin and simple roots `±2ζᵢ·i` with `tan ζᵢ = ζᵢ`.
pub fn limit_quasipolynomial(s: Complex64) -> Complex64 {
    s - 2.0 + (-s).exp() * (s + 2.0)
}

/// First `count` upper-half-plane roots `2ζᵢ·i` of the limit function, with
/// `ζᵢ` the positive nontrivial solutions of `tan x = x`. Roots are found by
/// bisection on `sin x − x·cos x` over `(kπ, (k+1)π)`, a reformulation with
/// no poles (conjugate roots are implied by the real coefficients and not
/// returned).
pub fn limit_roots(count: u32) -> Vec<Complex64> {
    use std::f64::consts::PI;
    let mut roots = Vec::with_capacity(count as usize);
    let f = |x: f64| x.sin() - x * x.cos();
    for k in 1..=count {
        let (mut lo, mut hi) = (k as f64 * PI, (k as f64 + 1.0) * PI);
        debug_assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        roots.push(Complex64::new(0.0, 0.5 * (lo + hi) * 2.0));
    }
    roots
}
