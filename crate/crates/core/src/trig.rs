use std::f64::consts::FRAC_PI_2;

/// `sin_cos` that returns exact values at the floating-point quarter turns
/// `k * FRAC_PI_2`, `|k| <= 8`.
///
/// The equilibria of the pendulum sit at θ ∈ {0, π}; without this the stored
/// value `std::f64::consts::PI` would leave a residual `sin(PI) ≈ 1.2e-16`
/// in every gravity term.
pub(crate) fn sin_cos(x: f64) -> (f64, f64) {
    let q = (x / FRAC_PI_2).round();
    if q.abs() <= 8.0 && q * FRAC_PI_2 == x {
        match (q as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        x.sin_cos()
    }
}
