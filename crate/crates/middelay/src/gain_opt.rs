//! Spectral-abscissa minimization for the integrator `y'(t) = u(t)` over
//! delayed feedback families under an ℓ¹ gain budget.
//!
//! The no-delay and one-delay optima are closed-form (`γ = −bound` and
//! `γ = −e·bound`). The two-delay family is restricted to the
//! maximal-multiplicity designs, whose abscissa `s₀ = −1/τ₁ − 1/τ₂` and gain
//! cost are cheap closed forms; a deterministic coarse grid plus penalized
//! Nelder–Mead refinement finds the constrained optimum and the result is
//! certified by an independent spectrum computation. A scan over free gains
//! around a design gathers evidence on whether the design abscissa can be
//! beaten at all; that question is open, so the scan only ever reports.

use crate::mid_design::{design_one_delay, design_two_delay, DesignError};
use crate::quasipoly::from_two_delay_system;
use crate::rootfinding::{find_roots, spectral_abscissa, Rectangle, RootFindingError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("gain budget must be positive, got {0}")]
    NonpositiveBudget(f64),
    #[error("need at least 3 grid points per axis, got {0}")]
    GridTooSmall(u32),
    #[error("delays must satisfy 0 < tau1 < tau2, got ({0}, {1})")]
    BadDelays(f64, f64),
    /// The certified spectrum disagrees with the claimed optimum.
    #[error("certification failed: claimed abscissa {claimed}, certified {certified}")]
    CertificationFailed { claimed: f64, certified: f64 },
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Quasipoly(#[from] crate::quasipoly::QuasipolyError),
    #[error(transparent)]
    RootFinding(#[from] RootFindingError),
}

/// ℓ¹ budget on the feedback gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBudget {
    bound: f64,
}

impl GainBudget {
    pub fn new(bound: f64) -> Result<Self, OptError> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(OptError::NonpositiveBudget(bound));
        }
        Ok(Self { bound })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackFamily {
    NoDelay,
    OneDelay,
    TwoDelayMid,
    FreeGainsScan,
}

/// Outcome of one optimization or scan, with enough parameter provenance to
/// reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub family: FeedbackFamily,
    pub parameters: BTreeMap<String, f64>,
    pub abscissa: f64,
    pub feasible: bool,
    pub evaluations: u64,
}

/// Progress record streamed by the CLI during grid phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProgress {
    pub index: u64,
    pub total: u64,
    pub parameters: BTreeMap<String, f64>,
    pub objective: f64,
    pub feasible: bool,
}

const CONSTRAINT_TOL: f64 = 1e-9;
const CERTIFICATION_TOL: f64 = 1e-6;

fn params(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Proportional feedback `u = a·y` with `|a| ≤ bound`: the single closed-loop
/// root is `s = a`, so the optimum is `a = −bound`.
pub fn optimize_no_delay(budget: GainBudget) -> Result<OptimizationResult, OptError> {
    let a = -budget.bound();
    let qp = crate::quasipoly::Quasipolynomial::from_terms(vec![(
        crate::quasipoly::Polynomial::new(vec![-a, 1.0]),
        0.0,
    )])?;
    let window = Rectangle::new(a - 1.0, a.abs() + 1.0, -1.0, 1.0)?;
    let certified = spectral_abscissa(&qp, &window)?;
    if (certified - a).abs() > CERTIFICATION_TOL {
        return Err(OptError::CertificationFailed { claimed: a, certified });
    }
    Ok(OptimizationResult {
        family: FeedbackFamily::NoDelay,
        parameters: params(&[("a", a)]),
        abscissa: a,
        feasible: true,
        evaluations: 1,
    })
}

/// Single-delay feedback `u = a·y(t−τ)` with `|a| ≤ bound`. The double-root
/// design gives abscissa `−1/τ` at gain magnitude `e^(−1)/τ`, which is
/// feasible for `τ ≥ 1/(e·bound)`; the abscissa rises with τ, so the optimum
/// sits on the feasibility boundary: `τ = 1/(e·bound)`, `a = −bound`,
/// `γ = −e·bound`. The closed form is re-verified by a grid plus
/// golden-section search on the penalized objective before being returned.
pub fn optimize_one_delay(budget: GainBudget) -> Result<OptimizationResult, OptError> {
    let bound = budget.bound();
    let e = std::f64::consts::E;
    let tau_opt = 1.0 / (e * bound);
    let gamma = -e * bound;

    // independent numeric route
    let gain_magnitude = |tau: f64| (-1.0f64).exp() / tau;
    let mut evaluations = 0u64;
    let mut best = (f64::INFINITY, 0.0f64);
    let lo = tau_opt * 0.05;
    let hi = tau_opt.max(1.0) * 4.0;
    let grid_n = 400;
    for k in 0..=grid_n {
        let tau = lo + (hi - lo) * k as f64 / grid_n as f64;
        evaluations += 1;
        if gain_magnitude(tau) <= bound && -1.0 / tau < best.0 {
            best = (-1.0 / tau, tau);
        }
    }
    let mut weight = 1e3;
    let mut tau_hat = best.1;
    for _ in 0..40 {
        let objective = |tau: f64| {
            -1.0 / tau + weight * (gain_magnitude(tau) - bound).max(0.0).powi(2)
        };
        let (mut a, mut b) = (0.5 * tau_hat, 2.0 * tau_hat);
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        for _ in 0..120 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            evaluations += 2;
            if objective(c) < objective(d) {
                b = d;
            } else {
                a = c;
            }
        }
        tau_hat = 0.5 * (a + b);
        if (gain_magnitude(tau_hat) - bound).max(0.0) < CONSTRAINT_TOL {
            break;
        }
        weight *= 2.0;
    }
    debug_assert!(
        (tau_hat - tau_opt).abs() <= 1e-6 * tau_opt,
        "numeric route found {tau_hat}, closed form {tau_opt}"
    );

    // certify the double root of the closed form
    let design = design_one_delay(0.0, tau_opt)?;
    let qp = design.characteristic();
    let window = Rectangle::new(gamma - 3.0 * e * bound, bound + 1.0, -50.0, 50.0)?;
    let spectrum = find_roots(&qp, &window)?;
    let top = spectrum.roots.first().ok_or(RootFindingError::EmptySpectrumInWindow)?;
    if (top.value.re - gamma).abs() > CERTIFICATION_TOL {
        return Err(OptError::CertificationFailed { claimed: gamma, certified: top.value.re });
    }
    Ok(OptimizationResult {
        family: FeedbackFamily::OneDelay,
        parameters: params(&[("a", -bound), ("tau", tau_opt)]),
        abscissa: gamma,
        feasible: true,
        evaluations,
    })
}

/// Two-delay maximal-multiplicity feedback under `|a₁| + |a₂| ≤ bound`.
/// Minimizes `s₀(τ₁, τ₂) = −1/τ₁ − 1/τ₂` over the designs: deterministic
/// coarse grid on `(0.05, 3]²`, Nelder–Mead on the exterior-penalty
/// objective with the weight doubled until the constraint residual is below
/// 1e−9, then a bisection along the scaling ray onto the feasible set (gains
/// scale as `1/ρ` when both delays scale by ρ, so the ray always reaches
/// feasibility). The returned design is certified by an independent spectrum
/// computation: dominant triple root at `s₀`.
pub fn optimize_two_delay_mid(budget: GainBudget) -> Result<OptimizationResult, OptError> {
    optimize_two_delay_mid_with_progress(budget, |_| {})
}

/// Same as [`optimize_two_delay_mid`] but reporting grid progress.
pub fn optimize_two_delay_mid_with_progress(
    budget: GainBudget,
    mut progress: impl FnMut(&GridProgress),
) -> Result<OptimizationResult, OptError> {
    let bound = budget.bound();
    let mut evaluations = 0u64;

    let cost = |tau1: f64, tau2: f64| -> Option<(f64, f64)> {
        if !(tau1 > 0.0 && tau2 > tau1) {
            return None;
        }
        let s0 = -1.0 / tau1 - 1.0 / tau2;
        let a1 = -tau2 * (s0 * tau1).exp() / (tau1 * (tau2 - tau1));
        let a2 = tau1 * (s0 * tau2).exp() / (tau2 * (tau2 - tau1));
        Some((s0, a1.abs() + a2.abs()))
    };

    // deterministic coarse grid; delays scaled by 1/bound so the grid covers
    // the same design space for every budget
    let scale = 1.0 / bound;
    let grid_n = 60u64;
    let total = grid_n * grid_n;
    let mut seed = (0.3 * scale, 0.9 * scale);
    let mut seed_objective = f64::INFINITY;
    for i in 0..grid_n {
        for j in 0..grid_n {
            let tau1 = scale * (0.05 + 2.95 * i as f64 / grid_n as f64);
            let tau2 = scale * (0.05 + 2.95 * j as f64 / grid_n as f64);
            evaluations += 1;
            let Some((s0, c)) = cost(tau1, tau2) else { continue };
            let feasible = c <= bound;
            progress(&GridProgress {
                index: i * grid_n + j,
                total,
                parameters: params(&[("tau1", tau1), ("tau2", tau2), ("s0", s0)]),
                objective: s0,
                feasible,
            });
            if feasible && s0 < seed_objective {
                seed_objective = s0;
                seed = (tau1, tau2);
            }
        }
    }

    // exterior penalty + Nelder-Mead, weight doubled until feasible
    let mut weight = 1e4;
    let mut point = [seed.0, seed.1];
    let mut simplex_scale = 0.05 * scale;
    for _ in 0..40 {
        let penalized = |x: &[f64; 2], evals: &mut u64| -> f64 {
            *evals += 1;
            match cost(x[0], x[1]) {
                Some((s0, c)) => s0 + weight * (c - bound).max(0.0).powi(2),
                None => 1e12 + x[0].abs() + x[1].abs(),
            }
        };
        point = nelder_mead(&penalized, point, simplex_scale, 600, &mut evaluations);
        let (_, c) = cost(point[0], point[1]).expect("refined point stays in the domain");
        let residual = (c - bound).max(0.0);
        if residual < CONSTRAINT_TOL {
            break;
        }
        weight *= 2.0;
        simplex_scale = (simplex_scale * 0.5).max(1e-9 * scale);
    }

    // marginal infeasibility: bisect along the scaling ray (τ → ρτ) onto the
    // constraint surface
    let (_, c_final) = cost(point[0], point[1]).expect("valid point");
    if c_final > bound {
        let mut lo = 1.0;
        let mut hi = c_final / bound * (1.0 + 1e-12);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            evaluations += 1;
            let (_, c) = cost(point[0] * mid, point[1] * mid).expect("scaled point valid");
            if c > bound {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        point = [point[0] * hi, point[1] * hi];
    }

    let design = design_two_delay(0.0, point[0], point[1])?;
    let constraint = design.a1.abs() + design.a2.abs();

    // certification: the spectrum of the returned design has its dominant
    // (triple) root at s₀
    let qp = design.characteristic();
    let bound_re = constraint + 1.0;
    let window = Rectangle::new(design.s0 - 3.0 / design.tau1, bound_re, -50.0, 50.0)?;
    let spectrum = find_roots(&qp, &window)?;
    let top = spectrum.roots.first().ok_or(RootFindingError::EmptySpectrumInWindow)?;
    if (top.value.re - design.s0).abs() > CERTIFICATION_TOL || top.multiplicity != 3 {
        return Err(OptError::CertificationFailed {
            claimed: design.s0,
            certified: top.value.re,
        });
    }

    Ok(OptimizationResult {
        family: FeedbackFamily::TwoDelayMid,
        parameters: params(&[
            ("tau1", design.tau1),
            ("tau2", design.tau2),
            ("a1", design.a1),
            ("a2", design.a2),
            ("s0", design.s0),
            ("constraint", constraint),
        ]),
        abscissa: design.s0,
        feasible: constraint <= bound + CONSTRAINT_TOL,
        evaluations,
    })
}

/// Evidence scan for the open question whether free gains can beat the
/// maximal-multiplicity abscissa: evaluates the certified spectral abscissa
/// on a `grid_points × grid_points` gain grid centered at the design gains
/// for `(τ₁, τ₂)` and reports the minimum. A grid point beating
/// `s₀ = −1/τ₁ − 1/τ₂` by more than 1e−6 sets `improvement_found` to 1 in
/// the parameters; nothing is ever asserted.
pub fn conjecture_scan(
    tau1: f64,
    tau2: f64,
    grid_halfwidth: f64,
    grid_points: u32,
) -> Result<OptimizationResult, OptError> {
    conjecture_scan_with_progress(tau1, tau2, grid_halfwidth, grid_points, |_| {})
}

/// Same as [`conjecture_scan`] but reporting per-point progress.
pub fn conjecture_scan_with_progress(
    tau1: f64,
    tau2: f64,
    grid_halfwidth: f64,
    grid_points: u32,
    mut progress: impl FnMut(&GridProgress),
) -> Result<OptimizationResult, OptError> {
    if !(tau1 > 0.0 && tau2 > tau1) {
        return Err(OptError::BadDelays(tau1, tau2));
    }
    if grid_points < 3 {
        return Err(OptError::GridTooSmall(grid_points));
    }
    if !(grid_halfwidth >= 0.0) {
        return Err(OptError::NonpositiveBudget(grid_halfwidth));
    }
    let design = design_two_delay(0.0, tau1, tau2)?;

    let abscissa_of = |a1: f64, a2: f64| -> Result<f64, OptError> {
        let qp = from_two_delay_system(0.0, a1, a2, tau1, tau2)?;
        let right = a1.abs() + a2.abs() + 1.0;
        let mut left = design.s0 - 0.5;
        for _ in 0..6 {
            let window = Rectangle::new(left, right, -50.0, 50.0)?;
            match spectral_abscissa(&qp, &window) {
                Ok(a) => return Ok(a),
                Err(RootFindingError::EmptySpectrumInWindow) => left -= 1.0,
                Err(e) => return Err(e.into()),
            }
        }
        Err(OptError::RootFinding(RootFindingError::EmptySpectrumInWindow))
    };

    let n = grid_points as u64;
    let mut best: Option<(f64, f64, f64)> = None;
    let mut evaluations = 0u64;
    for i in 0..grid_points {
        for j in 0..grid_points {
            let frac = |k: u32| {
                if grid_points == 1 {
                    0.0
                } else {
                    2.0 * k as f64 / (grid_points - 1) as f64 - 1.0
                }
            };
            let a1 = design.a1 + grid_halfwidth * frac(i);
            let a2 = design.a2 + grid_halfwidth * frac(j);
            let abscissa = abscissa_of(a1, a2)?;
            evaluations += 1;
            progress(&GridProgress {
                index: i as u64 * n + j as u64,
                total: n * n,
                parameters: params(&[("a1", a1), ("a2", a2)]),
                objective: abscissa,
                feasible: true,
            });
            let better = match best {
                None => true,
                Some((current, ..)) => abscissa < current,
            };
            if better {
                best = Some((abscissa, a1, a2));
            }
        }
    }
    let (min_abscissa, best_a1, best_a2) = best.expect("grid is nonempty");
    let improvement_found = min_abscissa < design.s0 - CERTIFICATION_TOL;

    Ok(OptimizationResult {
        family: FeedbackFamily::FreeGainsScan,
        parameters: params(&[
            ("tau1", tau1),
            ("tau2", tau2),
            ("design_a1", design.a1),
            ("design_a2", design.a2),
            ("design_s0", design.s0),
            ("best_a1", best_a1),
            ("best_a2", best_a2),
            ("grid_halfwidth", grid_halfwidth),
            ("improvement_found", if improvement_found { 1.0 } else { 0.0 }),
        ]),
        abscissa: min_abscissa,
        feasible: true,
        evaluations,
    })
}

/// Deterministic Nelder–Mead on a 2-D objective.
fn nelder_mead(
    f: &impl Fn(&[f64; 2], &mut u64) -> f64,
    start: [f64; 2],
    scale: f64,
    max_iterations: u32,
    evaluations: &mut u64,
) -> [f64; 2] {
    let mut simplex = [
        start,
        [start[0] + scale, start[1]],
        [start[0], start[1] + scale],
    ];
    let mut values = [
        f(&simplex[0], evaluations),
        f(&simplex[1], evaluations),
        f(&simplex[2], evaluations),
    ];
    for _ in 0..max_iterations {
        // order best -> worst
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (b, m, w) = (order[0], order[1], order[2]);
        let spread = (values[w] - values[b]).abs();
        let size = (simplex[b][0] - simplex[w][0]).hypot(simplex[b][1] - simplex[w][1]);
        if spread < 1e-14 * (1.0 + values[b].abs()) && size < 1e-12 {
            break;
        }
        let centroid = [
            0.5 * (simplex[b][0] + simplex[m][0]),
            0.5 * (simplex[b][1] + simplex[m][1]),
        ];
        let reflect = [
            centroid[0] + (centroid[0] - simplex[w][0]),
            centroid[1] + (centroid[1] - simplex[w][1]),
        ];
        let fr = f(&reflect, evaluations);
        if fr < values[b] {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - simplex[w][0]),
                centroid[1] + 2.0 * (centroid[1] - simplex[w][1]),
            ];
            let fe = f(&expand, evaluations);
            if fe < fr {
                simplex[w] = expand;
                values[w] = fe;
            } else {
                simplex[w] = reflect;
                values[w] = fr;
            }
        } else if fr < values[m] {
            simplex[w] = reflect;
            values[w] = fr;
        } else {
            let contract = [
                centroid[0] + 0.5 * (simplex[w][0] - centroid[0]),
                centroid[1] + 0.5 * (simplex[w][1] - centroid[1]),
            ];
            let fc = f(&contract, evaluations);
            if fc < values[w] {
                simplex[w] = contract;
                values[w] = fc;
            } else {
                // shrink toward the best vertex
                for i in 0..3 {
                    if i != b {
                        simplex[i] = [
                            simplex[b][0] + 0.5 * (simplex[i][0] - simplex[b][0]),
                            simplex[b][1] + 0.5 * (simplex[i][1] - simplex[b][1]),
                        ];
                        values[i] = f(&simplex[i], evaluations);
                    }
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    simplex[best]
}
