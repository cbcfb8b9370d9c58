//! Pole placement for scalar linear delay-differential equations with one and
//! two delays, built around roots of maximal multiplicity.
//!
//! A delayed feedback `u(t) = Σ aᵢ·y(t − τᵢ)` applied to `y'(t) + a₀·y(t) = u(t)`
//! yields the characteristic quasipolynomial `Δ(s) = s + a₀ − Σ aᵢ·exp(−sτᵢ)`.
//! Forcing a real root of maximal multiplicity makes that root strictly
//! dominant, so the closed-loop spectral abscissa (and hence the decay rate)
//! is placed in closed form. This crate provides:
//!
//! - [`quasipoly`] — exact quasipolynomial arithmetic and the Pólya–Szegő
//!   strip bounds;
//! - [`rootfinding`] — certified root location in rectangles via the argument
//!   principle, subdivision, and Newton refinement;
//! - [`mid_design`] — closed-form one- and two-delay maximal-multiplicity
//!   designs, the λ-normalization, and multiplicity verification;
//! - [`branch_analysis`] — root-branch continuation in λ and imaginary-axis
//!   crossing diagnostics for the normalized family;
//! - [`dde_sim`] — method-of-steps integration of the linear two-delay
//!   equation and a nonlinear platelet-population model, with decay-rate
//!   estimation;
//! - [`gain_opt`] — constrained spectral-abscissa minimization over delay
//!   feedback families under a gain budget.

pub mod branch_analysis;
pub mod dde_sim;
pub mod gain_opt;
pub mod mid_design;
pub mod quasipoly;
pub mod rootfinding;

pub use num_complex::Complex64;

pub use quasipoly::{
    from_two_delay_system, from_two_delay_system_additive, HorizontalStrip, Polynomial,
    Quasipolynomial, QuasipolyError,
};
pub use rootfinding::{Rectangle, RootCertificate, RootFindingError, SpectrumResult};

pub use branch_analysis::{BranchError, BranchPoint, CrossingCandidate};
pub use dde_sim::{
    HistoryFunction, LinearTwoDelaySystem, PlateletFeedback, PlateletModel, SimError, Trajectory,
};
pub use gain_opt::{FeedbackFamily, GainBudget, OptError, OptimizationResult};
pub use mid_design::{
    DesignError, MultiplicityReport, MultiplicitySolution, NormalizedSystem, OneDelayDesign,
    TwoDelayDesign,
};
