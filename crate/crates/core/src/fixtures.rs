//! Reference technology pairs used by the tests, the CLI examples and the
//! FFI smoke tests.

use crate::frontier::{Frontier, TechnologyPair};

/// Affine old frontier with a kinked new frontier: `u0 = 1`, `u1 = 0.8`,
/// `u_star = 0.3`, `r = 1`.
pub fn instance_a() -> TechnologyPair {
    let f0 = Frontier::piecewise(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).expect("valid breakpoints");
    let f1 = Frontier::piecewise(&[(0.0, 0.6), (0.3, 1.2), (0.8, 1.4), (1.8, 0.6)])
        .expect("valid breakpoints");
    TechnologyPair::new(f0, f1, 1.0).expect("instance A is well formed")
}

/// Smooth strictly concave pair on `[0, 1.2]`: `f0 = 2u - u^2`,
/// `f1 = 1.45 - 1.5 (u - 0.7)^2`, so `u0 = 1`, `u1 = 0.7`, `u_star = 0.1`.
pub fn instance_b() -> TechnologyPair {
    let f0 = Frontier::quadratic("instance-b f0", [0.0, 2.0, -1.0], 0.0, 1.2).expect("valid domain");
    // 1.45 - 1.5 (u - 0.7)^2 = 0.715 + 2.1 u - 1.5 u^2
    let f1 = Frontier::quadratic("instance-b f1", [0.715, 2.1, -1.5], 0.0, 1.2).expect("valid domain");
    TechnologyPair::new(f0, f1, 1.0).expect("instance B is well formed")
}
