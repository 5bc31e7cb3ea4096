//! Log of the standard normal CDF, accurate deep into the lower tail.

use libm::erfc;

/// Below this argument the tail continued fraction replaces `erfc`.
const TAIL_THRESHOLD: f64 = -8.0;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Φ(x)`.
///
/// Finite for every finite `x`; for `x → -∞` it behaves like `-x²/2`, so
/// arguments down to about `-1e154` do not overflow.
pub fn log_ndtr(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 0.0 {
        // Φ(x) = 1 - Q(x); ln_1p keeps precision when Q is tiny.
        (-0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)).ln_1p()
    } else if x >= TAIL_THRESHOLD {
        (0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)).ln()
    } else {
        log_lower_tail(x)
    }
}

/// Laplace continued fraction for Mills' ratio,
/// `Φ(x) = φ(x) / (z + 1/(z + 2/(z + 3/(z + …))))` with `z = -x`,
/// evaluated bottom-up and taken in log space.
fn log_lower_tail(x: f64) -> f64 {
    let z = -x;
    let mut frac = z;
    for n in (1..=60).rev() {
        frac = z + n as f64 / frac;
    }
    -0.5 * x * x - LN_SQRT_2PI - frac.ln()
}

/// `Φ(x)` in linear space.
pub fn ndtr(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}
