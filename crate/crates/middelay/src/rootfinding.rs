//! Certified location of characteristic roots inside a rectangle.
//!
//! The count of roots enclosed by a contour is the winding number
//! `(1/2πi)·∮ Δ'(s)/Δ(s) ds`, evaluated here by adaptive Gauss–Kronrod
//! quadrature along rectangle edges. Rectangles are quadrisected until each
//! piece holds a single root cluster; the cluster is then polished by Newton
//! iteration and its multiplicity certified by argument-principle counts on
//! shrinking disks. For a certified multiple root the reported location is
//! the first contour moment of the cluster (the centroid), which stays
//! accurate where Newton iteration hits the `ε^(1/m)` floor.
//!
//! Subregion processing is sequential and deterministic; results are sorted
//! so the output does not depend on traversal order.

use crate::quasipoly::Quasipolynomial;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Search region `[re_low, re_high] × [im_low, im_high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub re_low: f64,
    pub re_high: f64,
    pub im_low: f64,
    pub im_high: f64,
}

impl Rectangle {
    pub fn new(re_low: f64, re_high: f64, im_low: f64, im_high: f64) -> Result<Self, RootFindingError> {
        if !(re_low < re_high && im_low < im_high) {
            return Err(RootFindingError::InvalidRectangle {
                re_low,
                re_high,
                im_low,
                im_high,
            });
        }
        Ok(Self { re_low, re_high, im_low, im_high })
    }

    pub fn width(&self) -> f64 {
        self.re_high - self.re_low
    }

    pub fn height(&self) -> f64 {
        self.im_high - self.im_low
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_low + self.re_high),
            0.5 * (self.im_low + self.im_high),
        )
    }

    pub fn contains(&self, s: Complex64) -> bool {
        self.re_low <= s.re && s.re <= self.re_high && self.im_low <= s.im && s.im <= self.im_high
    }

    fn dilated(&self, amount: f64) -> Rectangle {
        Rectangle {
            re_low: self.re_low - amount,
            re_high: self.re_high + amount,
            im_low: self.im_low - amount,
            im_high: self.im_high + amount,
        }
    }

    /// Corners in counterclockwise order starting at the lower-left one.
    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_low, self.im_low),
            Complex64::new(self.re_high, self.im_low),
            Complex64::new(self.re_high, self.im_high),
            Complex64::new(self.re_low, self.im_high),
        ]
    }
}

/// A located root with certified multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCertificate {
    pub value: Complex64,
    pub multiplicity: u32,
    /// `|Δ(value)|`.
    pub residual: f64,
    /// Radius of the disk whose argument-principle count equals `multiplicity`.
    pub cluster_radius: f64,
}

/// All roots found in a region, sorted by real part descending, then
/// imaginary part ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub roots: Vec<RootCertificate>,
    /// Region actually searched; this is the requested rectangle unless a
    /// boundary root forced a dilation.
    pub region: Rectangle,
    pub total_count: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootFindingError {
    #[error("invalid rectangle [{re_low}, {re_high}] x [{im_low}, {im_high}]")]
    InvalidRectangle { re_low: f64, re_high: f64, im_low: f64, im_high: f64 },
    /// `|Δ|` stayed below threshold on a boundary sample after the maximum
    /// number of dilations.
    #[error("root suspected on the contour near ({0}, {1}) after max dilations")]
    BoundaryRootSuspected(f64, f64),
    #[error("contour quadrature did not stabilize to an integer count")]
    QuadratureNonConvergent,
    /// A subregion count kept disagreeing with its parent.
    #[error("subdivision counts do not add up: parent {parent}, children {children}")]
    CountMismatch { parent: u32, children: u32 },
    #[error("cluster refinement stagnated in a box of size {0:.3e}")]
    RefinementStagnation(f64),
    #[error("no roots found in the search window")]
    EmptySpectrumInWindow,
}

/// Residual bound a certificate must satisfy, relative to the evaluation
/// scale at the root (see [`residual_tolerance_at`]).
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

const BOUNDARY_SAMPLES: usize = 64;
const MAX_DILATIONS: usize = 5;
const DILATION_FACTOR: f64 = 1e-6;
/// Adaptive-quadrature depth at which a pole is considered to sit on the
/// contour itself (distance below ~`edge · 2^-44`).
const STUCK_DEPTH: u32 = 44;
/// Panels are never required to resolve below this absolute error: near a
/// root the integrand is evaluation-noise-dominated and tighter targets send
/// the refinement into an exponential crawl. The winding number only needs
/// the total to ~0.1, so a generous floor is harmless.
const QUAD_TOL_FLOOR: f64 = 1e-8;
const NEWTON_STEP_TOL: f64 = 1e-13;
const CERT_RADIUS_START: f64 = 1e-2;
const CERT_MAX_SHRINKS: usize = 20;
/// Boxes at most this large are candidates for cluster extraction.
const CAPTURE_SIZE: f64 = 0.25;
const MIN_BOX_SIZE: f64 = 1e-7;

/// Number of roots (with multiplicity) strictly inside `rect`, by the
/// argument principle. If `|Δ|` drops below threshold on a boundary sample,
/// or the quadrature jams on a pole sitting on the contour, the rectangle is
/// dilated by `1e-6·diameter` and the count retried, up to five times.
pub fn count_roots(qp: &Quasipolynomial, rect: &Rectangle) -> Result<u32, RootFindingError> {
    let dqp = qp.derivative(1);
    let (_, count) = robust_count(qp, &dqp, rect, true)?;
    Ok(count)
}

/// Locates every root in `rect` with multiplicities. Recursive quadrisection
/// isolates clusters; cluster centers are refined by Newton iteration (with a
/// derivative-normalized secant fallback) and certified on shrinking disks.
pub fn find_roots(qp: &Quasipolynomial, rect: &Rectangle) -> Result<SpectrumResult, RootFindingError> {
    let dqp = qp.derivative(1);
    let (region, total) = robust_count(qp, &dqp, rect, true)?;
    let mut roots = Vec::new();
    subdivide(qp, &dqp, &region, total, &mut roots)?;
    roots.sort_by(|a, b| {
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    let found: u32 = roots.iter().map(|r| r.multiplicity).sum();
    if found != total {
        return Err(RootFindingError::CountMismatch { parent: total, children: found });
    }
    Ok(SpectrumResult { roots, region, total_count: total })
}

/// Largest real part over the roots found in `rect`. Correct for the
/// spectral abscissa whenever the right edge exceeds every root's real part
/// (for feedback-form systems use `feedback_form_root_bound` plus margin) and
/// at least one root lies in the window.
pub fn spectral_abscissa(qp: &Quasipolynomial, rect: &Rectangle) -> Result<f64, RootFindingError> {
    let spectrum = find_roots(qp, rect)?;
    spectrum
        .roots
        .first()
        .map(|r| r.value.re)
        .ok_or(RootFindingError::EmptySpectrumInWindow)
}

/// Default search window for a feedback-form quasipolynomial: real part in
/// `[−(B + 3/τ_min), B + 1]` with `B = |a₀| + Σ|aᵢ|`, imaginary part in
/// `[−50, 50]`. `None` when the coarse root bound does not apply.
pub fn default_window(qp: &Quasipolynomial) -> Option<Rectangle> {
    let bound = qp.feedback_form_root_bound()?;
    let min_delay = qp.delays().find(|&d| d > 0.0)?;
    Some(Rectangle {
        re_low: -(bound + 3.0 / min_delay),
        re_high: bound + 1.0,
        im_low: -50.0,
        im_high: 50.0,
    })
}

/// Largest certificate residual acceptable at `s`: 1e−10 scaled by the sum
/// of term magnitudes, which is the cancellation-noise floor of evaluating
/// the quasipolynomial there. For well-scaled systems this is the plain
/// absolute 1e−10.
pub fn residual_tolerance_at(qp: &Quasipolynomial, s: Complex64) -> f64 {
    RESIDUAL_TOLERANCE * evaluation_scale(qp, s).max(1.0)
}

fn evaluation_scale(qp: &Quasipolynomial, s: Complex64) -> f64 {
    qp.eval_with_magnitude(s).1
}

/// CSV export with columns `re, im, multiplicity, residual`.
pub fn spectrum_to_csv(spectrum: &SpectrumResult) -> String {
    let mut out = String::from("re,im,multiplicity,residual\n");
    for root in &spectrum.roots {
        out.push_str(&format!(
            "{},{},{},{}\n",
            root.value.re, root.value.im, root.multiplicity, root.residual
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Contour counting
// ---------------------------------------------------------------------------
//
// Within ~(noise/|c_m|)^(1/m) of an m-fold root the quasipolynomial
// evaluates as pure cancellation noise, so a contour passing through that
// zone cannot be integrated in double precision no matter how the
// quadrature refines. When the count jams near such a root, the root is
// certified from a disk centered on it (which is numerically clean), the
// contour is deformed by a small square detour that swallows the zone, and
// the certified multiplicity is subtracted back out if the root itself lies
// outside the requested rectangle. Whole-rectangle dilation remains the
// last resort for roots sitting indistinguishably on the boundary.

/// A certified root pinned against one edge of the contour, with the square
/// detour (side `2·half`, centered on the edge at `along`) that routes the
/// contour around its noise zone.
#[derive(Debug, Clone, Copy)]
struct Bump {
    /// 0 = bottom, 1 = right, 2 = top, 3 = left.
    edge: usize,
    /// Center of the detour along the edge axis (re for horizontal edges,
    /// im for vertical ones).
    along: f64,
    half: f64,
    root: Complex64,
    multiplicity: u32,
    /// The root lies strictly outside the base rectangle, so the detour
    /// swallowed it and its multiplicity must be subtracted from the count.
    outside: bool,
}

enum CountFailure {
    /// The contour grazes a root near this point.
    NearRoot(Complex64),
    NonConvergent,
}

/// Contour counting with automatic handling of roots pinned against the
/// boundary. `allow_dilation` permits growing the rectangle as a last
/// resort (forbidden for subdivision children, whose counts must stay
/// exactly additive); bump detours are always allowed since they do not
/// change the counted region.
fn robust_count(
    qp: &Quasipolynomial,
    dqp: &Quasipolynomial,
    rect: &Rectangle,
    allow_dilation: bool,
) -> Result<(Rectangle, u32), RootFindingError> {
    let mut region = *rect;
    let mut bumps: Vec<Bump> = Vec::new();
    let mut dilations = 0;
    let mut refinements = 0;
    loop {
        match count_exact(qp, dqp, &region, &bumps) {
            Ok(raw) => {
                let outside: u32 =
                    bumps.iter().filter(|b| b.outside).map(|b| b.multiplicity).sum();
                let count = raw.checked_sub(outside).ok_or(RootFindingError::CountMismatch {
                    parent: raw,
                    children: outside,
                })?;
                return Ok((region, count));
            }
            Err(CountFailure::NearRoot(hint)) if refinements < 8 => {
                refinements += 1;
                match certify_boundary_root(qp, dqp, &region, hint, &bumps) {
                    Some(bump) => bumps.push(bump),
                    None if allow_dilation && dilations < MAX_DILATIONS => {
                        dilations += 1;
                        region = region.dilated(DILATION_FACTOR * region.diameter());
                        bumps.clear();
                    }
                    None => {
                        return Err(RootFindingError::BoundaryRootSuspected(hint.re, hint.im))
                    }
                }
            }
            Err(CountFailure::NearRoot(hint)) => {
                return Err(RootFindingError::BoundaryRootSuspected(hint.re, hint.im))
            }
            Err(CountFailure::NonConvergent) if allow_dilation && dilations < MAX_DILATIONS => {
                dilations += 1;
                region = region.dilated(DILATION_FACTOR * region.diameter());
                bumps.clear();
            }
            Err(CountFailure::NonConvergent) => {
                return Err(RootFindingError::QuadratureNonConvergent)
            }
        }
    }
}

/// One straight piece of the (possibly bump-deformed) contour.
struct ContourSegment {
    from: Complex64,
    to: Complex64,
    /// Detour segments skirt a certified root on purpose; their small |Δ|
    /// must not re-trigger the near-zero boundary check.
    is_detour: bool,
}

/// Counterclockwise contour of `rect` with square detours around each bump.
fn build_contour(rect: &Rectangle, bumps: &[Bump]) -> Vec<ContourSegment> {
    // edge k runs from corner k to corner k+1; outward normals follow
    let corners = rect.corners();
    let normals = [
        Complex64::new(0.0, -1.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
    ];
    let mut segments = Vec::new();
    for edge in 0..4 {
        let (a, b) = (corners[edge], corners[(edge + 1) % 4]);
        let direction = (b - a) / (b - a).norm();
        let mut cuts: Vec<&Bump> = bumps.iter().filter(|bump| bump.edge == edge).collect();
        // order along the traversal direction of this edge
        let along_of = |bump: &Bump| -> f64 {
            let p = Complex64::new(
                if edge % 2 == 0 { bump.along } else { a.re },
                if edge % 2 == 0 { a.im } else { bump.along },
            );
            ((p - a) / direction).re
        };
        cuts.sort_by(|x, y| along_of(x).total_cmp(&along_of(y)));
        let mut position = a;
        for bump in cuts {
            let t = along_of(bump);
            let p1 = a + direction * (t - bump.half);
            let p2 = a + direction * (t + bump.half);
            let n = normals[edge] * bump.half;
            segments.push(ContourSegment { from: position, to: p1, is_detour: false });
            segments.push(ContourSegment { from: p1, to: p1 + n, is_detour: true });
            segments.push(ContourSegment { from: p1 + n, to: p2 + n, is_detour: true });
            segments.push(ContourSegment { from: p2 + n, to: p2, is_detour: true });
            position = p2;
        }
        segments.push(ContourSegment { from: position, to: b, is_detour: false });
    }
    segments
}

/// Counts roots inside the bump-deformed contour of `rect`. Fails with a
/// location hint when the contour passes through (or indistinguishably close
/// to) a root that no bump protects yet.
fn count_exact(
    qp: &Quasipolynomial,
    dqp: &Quasipolynomial,
    rect: &Rectangle,
    bumps: &[Bump],
) -> Result<u32, CountFailure> {
    let segments = build_contour(rect, bumps);
    if let Some(hit) = contour_near_zero(qp, &segments, bumps) {
        return Err(CountFailure::NearRoot(hit));
    }
    // Refinement ladder: halve the per-edge tolerance until the winding
    // number is an integer within 0.25.
    let mut tol = 0.15;
    for _ in 0..6 {
        let mut integral = Complex64::new(0.0, 0.0);
        let mut stuck: Option<Complex64> = None;
        for segment in &segments {
            if segment.from == segment.to {
                continue;
            }
            let (val, seg_stuck) =
                integrate_edge(qp, dqp, segment.from, segment.to, tol, Weight::One);
            if let Some(at) = seg_stuck {
                stuck = Some(at);
                break;
            }
            if !val.is_finite() {
                stuck = Some(0.5 * (segment.from + segment.to));
                break;
            }
            integral += val;
        }
        if let Some(at) = stuck {
            // a pole is jammed against the contour at a distance the
            // quadrature cannot resolve
            return Err(CountFailure::NearRoot(at));
        }
        let winding = integral / Complex64::new(0.0, 2.0 * PI);
        let n = winding.re.round();
        if n >= -0.25 && (winding - n).norm() < 0.25 {
            return Ok(n as u32);
        }
        tol *= 0.5;
    }
    Err(CountFailure::NonConvergent)
}

/// Scans midpoint samples of base contour segments for |Δ| below the
/// boundary-root threshold. Midpoint sampling (even count) never lands on
/// the symmetric center of an edge, where real roots of real-coefficient
/// quasipolynomials preferentially sit. Samples inside the protection zone
/// of an existing bump are skipped: small |Δ| there is expected and already
/// certified.
fn contour_near_zero(
    qp: &Quasipolynomial,
    segments: &[ContourSegment],
    bumps: &[Bump],
) -> Option<Complex64> {
    for segment in segments {
        if segment.is_detour || segment.from == segment.to {
            continue;
        }
        for i in 0..BOUNDARY_SAMPLES {
            let t = (i as f64 + 0.5) / BOUNDARY_SAMPLES as f64;
            let s = segment.from + (segment.to - segment.from) * t;
            if bumps.iter().any(|b| (s - b.root).norm() < 4.0 * b.half) {
                continue;
            }
            if qp.eval(s).norm() < 1e-10 * (1.0 + s.norm()) {
                return Some(s);
            }
        }
    }
    None
}

/// Locates and certifies the root responsible for a jammed contour near
/// `hint`, and sizes a detour that clears its numerical noise zone. Returns
/// `None` when the root sits indistinguishably on the boundary (caller
/// dilates) or the local picture is not a single certified cluster.
fn certify_boundary_root(
    qp: &Quasipolynomial,
    dqp: &Quasipolynomial,
    rect: &Rectangle,
    hint: Complex64,
    existing: &[Bump],
) -> Option<Bump> {
    // plain Newton walks into the root basin even for multiple roots
    let rough = newton_polish(qp, dqp, hint, 1);

    // multiplicity from disk counts stabilizing over two consecutive radii
    let mut radius = CERT_RADIUS_START;
    let mut previous: Option<u32> = None;
    let mut certified: Option<(u32, f64)> = None;
    for _ in 0..CERT_MAX_SHRINKS {
        let count = disk_count(qp, rough, radius);
        match (count, previous) {
            (Some(c), Some(p)) if c == p && c >= 1 => {
                certified = Some((c, radius));
                break;
            }
            _ => {}
        }
        previous = count;
        radius *= 0.5;
    }
    let (m, r_stable) = certified?;

    // for multiple roots the disk moment pins the location far better than
    // Newton; for simple roots Newton is already at machine accuracy
    let value = if m >= 2 {
        let mu = disk_moment(qp, dqp, rough, r_stable * 2.0, m)?;
        if qp.eval(mu).norm() > residual_tolerance_at(qp, mu) {
            return None;
        }
        mu
    } else {
        if qp.eval(rough).norm() > residual_tolerance_at(qp, rough) {
            return None;
        }
        rough
    };

    // size of the zone where evaluation is cancellation noise
    let m_factorial: f64 = (1..=m).map(|k| k as f64).product();
    let lead = qp.derivative(m).eval(value).norm();
    if lead == 0.0 {
        return None;
    }
    let eta = f64::EPSILON * evaluation_scale(qp, value).max(1.0);
    let r_noise = (eta * m_factorial / lead).powf(1.0 / m as f64);

    // nearest edge and the signed side of the root
    let edges = [
        (0usize, (value.im - rect.im_low), value.re),
        (1, (rect.re_high - value.re), value.im),
        (2, (rect.im_high - value.im), value.re),
        (3, (value.re - rect.re_low), value.im),
    ];
    let &(edge, signed, along) = edges
        .iter()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .expect("four edges");
    if signed.abs() <= 1e-8 * (1.0 + value.norm()) {
        return None; // genuinely on the boundary
    }
    let half = 32.0 * r_noise + 2.0 * signed.abs() + 1e-9 * (1.0 + value.norm());

    // the detour must fit inside its edge, stay clear of the other edges,
    // not collide with existing bumps, and contain nothing but this cluster
    let (edge_lo, edge_hi, other_gap) = match edge {
        0 | 2 => (rect.re_low, rect.re_high, (value.im - rect.im_low).abs().min((rect.im_high - value.im).abs())),
        _ => (rect.im_low, rect.im_high, (value.re - rect.re_low).abs().min((rect.re_high - value.re).abs())),
    };
    let fits_edge = along - half > edge_lo && along + half < edge_hi;
    let other_edge_clear = match edge {
        0 => rect.im_high - value.im > 4.0 * half,
        2 => value.im - rect.im_low > 4.0 * half,
        1 => value.re - rect.re_low > 4.0 * half,
        _ => rect.re_high - value.re > 4.0 * half,
    } && other_gap > 0.0;
    if !fits_edge || !other_edge_clear {
        return None;
    }
    if existing.iter().any(|b| (b.root - value).norm() < 4.0 * (b.half + half)) {
        return None;
    }
    if disk_count(qp, value, 1.8 * half)? != m {
        return None;
    }
    Some(Bump { edge, along, half, root: value, multiplicity: m, outside: !rect.contains(value) })
}

#[derive(Clone, Copy, PartialEq)]
enum Weight {
    /// `∮ Δ'/Δ` — the counting integral.
    One,
    /// `∮ s·Δ'/Δ` — first moment, for cluster centroids.
    S,
}

/// Adaptive Gauss–Kronrod (G7, K15) integration of `weight·Δ'/Δ` along the
/// segment `a → b`. Returns the integral and, when refinement had to stop at
/// a depth indicating a pole essentially on the segment, the point where it
/// jammed.
fn integrate_edge(
    qp: &Quasipolynomial,
    dqp: &Quasipolynomial,
    a: Complex64,
    b: Complex64,
    tol: f64,
    weight: Weight,
) -> (Complex64, Option<Complex64>) {
    let direction = b - a;
    // A node where |Δ| sinks to the cancellation-noise scale is numerically
    // a root on the contour: flag it instead of integrating garbage.
    let noise_hit = std::cell::Cell::new(None);
    let f = |t: f64| -> Complex64 {
        let s = a + direction * t;
        let (value, magnitude) = qp.eval_with_magnitude(s);
        if value.norm() <= 2.0 * f64::EPSILON * magnitude && noise_hit.get().is_none() {
            noise_hit.set(Some(t));
        }
        let w = match weight {
            Weight::One => Complex64::new(1.0, 0.0),
            Weight::S => s,
        };
        w * dqp.eval(s) / value * direction
    };
    // The integrand winds like exp(-s·τ_max) along the segment, and a single
    // Gauss-Kronrod panel spanning many turns can alias to a tiny error
    // estimate while being turns off. Pre-split so each initial panel spans
    // at most ~half a turn of delay phase before refining adaptively.
    let phase_span = qp.max_delay() * direction.norm();
    let panels = ((phase_span / 3.0).ceil() as usize).clamp(8, 8192);
    let mut total = Complex64::new(0.0, 0.0);
    let mut stuck = None;
    let panel_tol = tol / panels as f64;
    for k in 0..panels {
        let (lo, hi) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
        adaptive_gk(&f, lo, hi, panel_tol, 0, &mut total, &mut stuck, &noise_hit);
        if stuck.is_some() || noise_hit.get().is_some() {
            break;
        }
    }
    (total, noise_hit.get().or(stuck).map(|t: f64| a + direction * t))
}

// 15-point Kronrod rule with embedded 7-point Gauss rule on [-1, 1].
const KRONROD_NODES: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kronrod = Complex64::new(0.0, 0.0);
    let mut gauss = Complex64::new(0.0, 0.0);
    for (i, (&x, &wk)) in KRONROD_NODES.iter().zip(&KRONROD_WEIGHTS).enumerate() {
        let pair = if x == 0.0 {
            f(mid)
        } else {
            f(mid - half * x) + f(mid + half * x)
        };
        kronrod += wk * pair;
        if i % 2 == 1 {
            // odd Kronrod nodes (plus the center) are the embedded G7 nodes
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * half, (kronrod - gauss).norm() * half.abs())
}

fn adaptive_gk(
    f: &impl Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
    total: &mut Complex64,
    stuck: &mut Option<f64>,
    noise_hit: &std::cell::Cell<Option<f64>>,
) {
    if stuck.is_some() || noise_hit.get().is_some() {
        return;
    }
    let (value, err) = gk15(f, a, b);
    if noise_hit.get().is_some() {
        return;
    }
    // absolute target with a noise floor, plus a relative term: a panel
    // resolved to 1e-7 of its own magnitude contributes nothing harmful to a
    // winding number read at +-0.25
    let target = tol.max(QUAD_TOL_FLOOR).max(1e-7 * value.norm());
    if err <= target && value.is_finite() {
        *total += value;
        return;
    }
    if depth >= STUCK_DEPTH {
        *stuck = Some(0.5 * (a + b));
        return;
    }
    let mid = 0.5 * (a + b);
    adaptive_gk(f, a, mid, 0.5 * tol, depth + 1, total, stuck, noise_hit);
    adaptive_gk(f, mid, b, 0.5 * tol, depth + 1, total, stuck, noise_hit);
}

// ---------------------------------------------------------------------------
// Disk counts (multiplicity certification)
// ---------------------------------------------------------------------------

/// Winding number of `Δ` around the circle `|s − center| = radius`, computed
/// by tracking the continuous argument of `Δ` along sampled points. Sampling
/// doubles until consecutive phase increments stay below π/2.
fn disk_count(qp: &Quasipolynomial, center: Complex64, radius: f64) -> Option<u32> {
    let mut n = 64usize;
    while n <= (1 << 15) {
        if let Some(count) = disk_count_at(qp, center, radius, n) {
            return Some(count);
        }
        n *= 2;
    }
    None
}

fn disk_count_at(qp: &Quasipolynomial, center: Complex64, radius: f64, n: usize) -> Option<u32> {
    let mut total_phase = 0.0;
    let value_at = |k: usize| -> Complex64 {
        let theta = 2.0 * PI * (k % n) as f64 / n as f64;
        qp.eval(center + radius * Complex64::new(theta.cos(), theta.sin()))
    };
    let mut prev = value_at(0);
    if prev == Complex64::new(0.0, 0.0) || !prev.is_finite() {
        return None;
    }
    for k in 1..=n {
        let cur = value_at(k);
        if cur == Complex64::new(0.0, 0.0) || !cur.is_finite() {
            return None;
        }
        let inc = (cur / prev).arg();
        if inc.abs() > 0.5 * PI {
            return None; // under-resolved; caller doubles n
        }
        total_phase += inc;
        prev = cur;
    }
    let winding = total_phase / (2.0 * PI);
    let rounded = winding.round();
    if (winding - rounded).abs() < 0.25 && rounded >= 0.0 {
        Some(rounded as u32)
    } else {
        None
    }
}

/// First moment of the roots inside `|s − center| = radius`, i.e. the sum of
/// enclosed roots weighted by multiplicity, divided by `m`. For a genuine
/// multiplicity-`m` root this is the root itself, to quadrature accuracy,
/// independent of the `ε^(1/m)` Newton floor.
fn disk_moment(
    qp: &Quasipolynomial,
    dqp: &Quasipolynomial,
    center: Complex64,
    radius: f64,
    m: u32,
) -> Option<Complex64> {
    let mut n = 256usize;
    let mut prev: Option<Complex64> = None;
    while n <= (1 << 14) {
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..n {
            let theta = 2.0 * PI * k as f64 / n as f64;
            let offset = radius * Complex64::new(theta.cos(), theta.sin());
            let s = center + offset;
            let v = qp.eval(s);
            if v == Complex64::new(0.0, 0.0) {
                return None;
            }
            // (1/2πi)·∮ s·Δ'/Δ ds with ds = i·offset·dθ cancels the i and
            // leaves a plain periodic trapezoid sum
            sum += s * dqp.eval(s) / v * offset;
        }
        let value = sum / n as f64 / m as f64;
        if let Some(p) = prev {
            if (value - p).norm() < 1e-10 * (1.0 + value.norm()) {
                return Some(value);
            }
        }
        prev = Some(value);
        n *= 2;
    }
    prev
}

// ---------------------------------------------------------------------------
// Subdivision and cluster refinement
// ---------------------------------------------------------------------------

fn subdivide(
    qp: &Quasipolynomial,
    dqp: &Quasipolynomial,
    rect: &Rectangle,
    count: u32,
    out: &mut Vec<RootCertificate>,
) -> Result<(), RootFindingError> {
    if count == 0 {
        return Ok(());
    }
    let max_dim = rect.width().max(rect.height());
    if max_dim <= CAPTURE_SIZE {
        if let Some(cert) = extract_cluster(qp, dqp, rect, count) {
            out.push(cert);
            return Ok(());
        }
        if max_dim <= MIN_BOX_SIZE {
            return Err(RootFindingError::RefinementStagnation(max_dim));
        }
    }

    // Quadrisect, nudging the internal split lines off any root they would
    // otherwise graze; the children always tile the parent exactly. Offsets
    // are ranked by the smallest |Δ| their lines come across, so a line
    // through a root (a real root on the midline is the common case) is
    // deferred rather than ground through the quadrature.
    const NUDGES: [f64; 7] = [0.0, 0.07, -0.07, 0.17, -0.17, 0.29, -0.29];
    let mut candidates: Vec<(f64, f64, f64)> = NUDGES
        .iter()
        .map(|&nudge| {
            let mid_re = rect.re_low + rect.width() * (0.5 + nudge);
            let mid_im = rect.im_low + rect.height() * (0.5 + nudge);
            let score = split_line_score(
                qp,
                Complex64::new(mid_re, rect.im_low),
                Complex64::new(mid_re, rect.im_high),
            )
            .min(split_line_score(
                qp,
                Complex64::new(rect.re_low, mid_im),
                Complex64::new(rect.re_high, mid_im),
            ));
            (score, mid_re, mid_im)
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    'nudge: for &(score, mid_re, mid_im) in &candidates {
        if score < 1e-9 {
            continue;
        }
        let children = [
            Rectangle { re_low: rect.re_low, re_high: mid_re, im_low: rect.im_low, im_high: mid_im },
            Rectangle { re_low: mid_re, re_high: rect.re_high, im_low: rect.im_low, im_high: mid_im },
            Rectangle { re_low: rect.re_low, re_high: mid_re, im_low: mid_im, im_high: rect.im_high },
            Rectangle { re_low: mid_re, re_high: rect.re_high, im_low: mid_im, im_high: rect.im_high },
        ];
        let mut counts = [0u32; 4];
        for (i, child) in children.iter().enumerate() {
            match robust_count(qp, dqp, child, false) {
                Ok((_, c)) => counts[i] = c,
                Err(_) => continue 'nudge,
            }
        }
        if counts.iter().sum::<u32>() != count {
            continue;
        }
        for (child, &c) in children.iter().zip(&counts) {
            subdivide(qp, dqp, child, c, out)?;
        }
        return Ok(());
    }
    Err(RootFindingError::CountMismatch { parent: count, children: 0 })
}

/// Smallest scaled |Δ| seen along the segment; the larger, the safer the
/// segment is as an internal contour.
fn split_line_score(qp: &Quasipolynomial, a: Complex64, b: Complex64) -> f64 {
    const LINE_SAMPLES: usize = 128;
    let mut worst = f64::INFINITY;
    for i in 0..LINE_SAMPLES {
        let t = (i as f64 + 0.5) / LINE_SAMPLES as f64;
        let s = a + (b - a) * t;
        worst = worst.min(qp.eval(s).norm() / (1.0 + s.norm()));
    }
    worst
}

/// Attempts to certify the `m` roots counted in `rect` as one cluster:
/// centroid from the first contour moment, Newton polish, residual gate, and
/// disk counts that stabilize at `m` over two consecutive radii.
fn extract_cluster(
    qp: &Quasipolynomial,
    dqp: &Quasipolynomial,
    rect: &Rectangle,
    m: u32,
) -> Option<RootCertificate> {
    let corners = rect.corners();
    let mut moment = Complex64::new(0.0, 0.0);
    for k in 0..4 {
        let (val, stuck) = integrate_edge(
            qp,
            dqp,
            corners[k],
            corners[(k + 1) % 4],
            1e-7 * (1.0 + rect.center().norm()),
            Weight::S,
        );
        if stuck.is_some() || !val.is_finite() {
            return None;
        }
        moment += val;
    }
    let centroid = moment / Complex64::new(0.0, 2.0 * PI) / m as f64;
    let polished = newton_polish(qp, dqp, centroid, m);

    let guard = rect.width().max(rect.height()) * 0.55;
    let inside = polished.re >= rect.re_low - guard
        && polished.re <= rect.re_high + guard
        && polished.im >= rect.im_low - guard
        && polished.im <= rect.im_high + guard;
    if !inside {
        return None;
    }

    // Multiplicity certification on shrinking disks.
    let mut radius = CERT_RADIUS_START;
    let mut prev_matched = false;
    let mut certified_radius = None;
    for _ in 0..CERT_MAX_SHRINKS {
        match disk_count(qp, polished, radius) {
            Some(c) if c == m => {
                if prev_matched {
                    certified_radius = Some(radius);
                    break;
                }
                prev_matched = true;
            }
            _ => prev_matched = false,
        }
        radius *= 0.5;
    }
    let cluster_radius = certified_radius?;

    // For multiple roots, re-center on the disk moment: the centroid of the
    // certified cluster is exact for a true multiple root, while Newton can
    // only reach |Δ|^(1/m) accuracy in position.
    let value = if m >= 2 {
        match disk_moment(qp, dqp, polished, cluster_radius * 2.0, m) {
            Some(mu) if qp.eval(mu).norm() <= residual_tolerance_at(qp, mu) => mu,
            _ => polished,
        }
    } else {
        polished
    };

    let residual = qp.eval(value).norm();
    if residual > residual_tolerance_at(qp, value) {
        return None;
    }
    Some(RootCertificate { value, multiplicity: m, residual, cluster_radius })
}

/// Multiplicity-aware Newton iteration `z ← z − m·Δ(z)/Δ'(z)`, falling back
/// to a derivative-normalized secant step when `Δ'` vanishes.
fn newton_polish(qp: &Quasipolynomial, dqp: &Quasipolynomial, start: Complex64, m: u32) -> Complex64 {
    let mfac = m as f64;
    let mut z = start;
    let mut best = z;
    let mut best_val = qp.eval(z).norm();
    let mut prev: Option<(Complex64, Complex64)> = None;
    for _ in 0..80 {
        let f = qp.eval(z);
        let fp = dqp.eval(z);
        let step = if fp.norm() > 0.0 && (f / fp).is_finite() {
            mfac * f / fp
        } else if let Some((zp, fzp)) = prev {
            let denom = f - fzp;
            if denom.norm() == 0.0 {
                break;
            }
            mfac * f * (z - zp) / denom
        } else {
            break;
        };
        prev = Some((z, f));
        z -= step;
        let val = qp.eval(z).norm();
        if val < best_val {
            best_val = val;
            best = z;
        }
        if step.norm() <= NEWTON_STEP_TOL * (1.0 + z.norm()) {
            break;
        }
    }
    best
}
