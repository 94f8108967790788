//! Lower real branch of the Lambert W function.

use super::TheoryError;

const BRANCH_POINT: f64 = -1.0 / std::f64::consts::E;

/// Chatzigeorgiou's bracket for `W₋₁(-e^{-u-1})`, `u > 0`:
/// `-1 - √(2u) - u < W₋₁ < -1 - √(2u) - 2u/3`.
pub fn chatzigeorgiou_bounds(u: f64) -> (f64, f64) {
    let s = (2.0 * u).sqrt();
    (-1.0 - s - u, -1.0 - s - 2.0 * u / 3.0)
}

fn residual(w: f64, y: f64) -> f64 {
    w * w.exp() - y
}

/// `w ≤ -1` with `w e^w = y`, for `y ∈ [-1/e, 0)`.
pub fn lambert_wm1(y: f64) -> Result<f64, TheoryError> {
    if !(BRANCH_POINT..0.0).contains(&y) {
        // tolerate the rounding of -1/e itself
        if (y - BRANCH_POINT).abs() <= 4.0 * f64::EPSILON {
            return Ok(-1.0);
        }
        return Err(TheoryError::LambertDomain(y));
    }
    let near = 1.0 + std::f64::consts::E * y;
    if near <= 0.0 {
        return Ok(-1.0);
    }
    let u = -(-y).ln() - 1.0;
    let (lo, hi) = chatzigeorgiou_bounds(u.max(0.0));
    let mut w = if near < 0.25 {
        let p = -(2.0 * near).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 * p * p * p / 72.0
    } else {
        0.5 * (lo + hi)
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - y;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = (w - step).min(-1.0);
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * w.abs();
        w = next;
        if done {
            break;
        }
    }
    if residual(w, y).abs() <= 1e-12 * y.abs() {
        return Ok(w);
    }

    // w e^w decreases on (-∞, -1]: bisect between the lower bound and -1
    let mut a = lo - 1.0;
    let mut b = -1.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if residual(mid, y) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= f64::EPSILON * mid.abs() {
            break;
        }
    }
    Ok(0.5 * (a + b))
}
