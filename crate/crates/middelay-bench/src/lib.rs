//! Shared fixtures for the criterion benchmarks.

use middelay::mid_design::{design_two_delay, TwoDelayDesign};
use middelay::quasipoly::Quasipolynomial;

/// The unit two-delay design: triple root at −3/2 with delays (1, 2).
pub fn unit_design() -> TwoDelayDesign {
    design_two_delay(0.0, 1.0, 2.0).expect("valid design")
}

pub fn unit_characteristic() -> Quasipolynomial {
    unit_design().characteristic()
}
