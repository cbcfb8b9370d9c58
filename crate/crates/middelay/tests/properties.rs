//! Cross-module invariants that need both the design formulas and the
//! certified root finder.

use middelay::mid_design::{design_two_delay, normalize};
use middelay::rootfinding::{count_roots, find_roots, Rectangle};
use middelay::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inside the exclusion strip of half-width 2π/τ₂ around the triple root,
/// the design has no other root at all: the search window
/// [s₀−5, s₀+1] × ±(2π/τ₂ − ε) returns exactly the triple.
#[test]
fn exclusion_strip_contains_only_the_triple_root() {
    for (a0, tau1, tau2) in [(0.0, 1.0, 2.0), (0.5, 0.6, 1.7), (-0.3, 0.4, 1.1)] {
        let design = design_two_delay(a0, tau1, tau2).unwrap();
        let halfwidth = 2.0 * std::f64::consts::PI / design.tau2;
        let eps = 1e-3 * halfwidth;
        let window = Rectangle::new(
            design.s0 - 5.0,
            design.s0 + 1.0,
            -halfwidth + eps,
            halfwidth - eps,
        )
        .unwrap();
        let spectrum = find_roots(&design.characteristic(), &window).unwrap();
        assert_eq!(spectrum.total_count, 3, "spectrum in the strip: {spectrum:?}");
        assert_eq!(spectrum.roots.len(), 1);
        assert_eq!(spectrum.roots[0].multiplicity, 3);
        assert!((spectrum.roots[0].value - Complex64::new(design.s0, 0.0)).norm() < 1e-6);
    }
}

/// Strict dominance over a grid of designs: no root at all in a window
/// strictly right of the triple root.
#[test]
fn designed_triple_roots_are_strictly_dominant_on_a_grid() {
    for a0 in [-1.0, 0.0, 1.0] {
        for lambda in [0.1, 0.25, 0.5, 0.75, 0.9] {
            for tau2 in [0.5, 1.0, 2.0] {
                let tau1 = lambda * tau2;
                let design = design_two_delay(a0, tau1, tau2).unwrap();
                let window =
                    Rectangle::new(design.s0 + 1e-6, design.s0 + 10.0, -200.0, 200.0).unwrap();
                let count = count_roots(&design.characteristic(), &window).unwrap();
                assert_eq!(
                    count, 0,
                    "roots right of s0 for (a0, tau1, tau2) = ({a0}, {tau1}, {tau2})"
                );
            }
        }
    }
}

/// The normalization `s ↦ τ₂(s − s₀)` maps roots to roots both ways: a root
/// `ŝ` of the normalized system pulls back to a root `s₀ + ŝ/τ₂` of the
/// original characteristic function.
#[test]
fn normalization_maps_roots_bijectively() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e6f726d);
    for _ in 0..6 {
        let a0 = rng.gen_range(-1.0..1.0);
        let tau1 = rng.gen_range(0.3..1.2);
        let tau2 = tau1 + rng.gen_range(0.3..1.5);
        let design = design_two_delay(a0, tau1, tau2).unwrap();
        let normalized = normalize(&design).to_quasipolynomial();
        let window = Rectangle::new(-12.0, 1.0, 0.5, 30.0).unwrap();
        let spectrum = find_roots(&normalized, &window).unwrap();
        assert!(!spectrum.roots.is_empty(), "no oscillatory roots for {design:?}");
        let original = design.characteristic();
        for root in &spectrum.roots {
            let pulled_back = Complex64::new(design.s0, 0.0) + root.value / design.tau2;
            let (value, magnitude) = original.eval_with_magnitude(pulled_back);
            assert!(
                value.norm() <= 1e-9 * magnitude.max(1.0),
                "pullback of {} has residual {:.3e}",
                root.value,
                value.norm()
            );
        }
    }
}
