//! Standard normal upper tail `Q(x) = 1 - Phi(x)`, its logarithm and inverse.
//!
//! For `x <= 8` the tail comes from `erfc`, which keeps full relative
//! precision across the whole range. Further out the tail is evaluated in log
//! space through the continued fraction for the Mills ratio, so ratios of two
//! tiny tails never underflow.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

const TAIL_SWITCH: f64 = 8.0;
/// ln(sqrt(2 pi))
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Natural log of the standard normal density.
pub fn log_density(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Mills ratio `Q(x) / phi(x)` for large positive `x`, by backward evaluation
/// of `1 / (x + 1/(x + 2/(x + 3/(x + ...))))`.
fn mills_ratio_cf(x: f64) -> f64 {
    let mut tail = x;
    for k in (1..=64).rev() {
        tail = x + k as f64 / tail;
    }
    1.0 / tail
}

/// Upper tail probability `Q(x) = P(Z > x)` for `Z ~ N(0, 1)`.
pub fn upper_tail(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > TAIL_SWITCH {
        log_upper_tail(x).exp()
    } else {
        0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    }
}

/// `ln Q(x)`, accurate far into both tails.
pub fn log_upper_tail(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > TAIL_SWITCH {
        log_density(x) + mills_ratio_cf(x).ln()
    } else if x < -1.0 {
        (-upper_tail(-x)).ln_1p()
    } else {
        upper_tail(x).ln()
    }
}

/// `phi(x) / Q(x)`, the hazard of the standard normal, without underflow.
pub fn inverse_mills(x: f64) -> f64 {
    if x > TAIL_SWITCH {
        1.0 / mills_ratio_cf(x)
    } else {
        (log_density(x) - log_upper_tail(x)).exp()
    }
}

/// `Q(a) / Q(b)` computed in log space.
pub fn upper_tail_ratio(a: f64, b: f64) -> f64 {
    (log_upper_tail(a) - log_upper_tail(b)).exp()
}

// Rational approximation of the lower-tail quantile (P. J. Acklam), used only
// as a starting point for Newton refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn lower_quantile_guess(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Inverse of [`upper_tail`]: the `x` with `Q(x) = p`.
///
/// Fails with [`Error::Domain`] unless `0 < p < 1`.
pub fn upper_tail_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "upper-tail inverse needs 0 < p < 1, got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        // 1 - p is exact for p in [0.5, 1].
        return Ok(-upper_tail_inverse_small(1.0 - p));
    }
    Ok(upper_tail_inverse_small(p))
}

/// Newton iteration on `ln Q(x) = ln p`; `ln Q` is concave so the iteration
/// converges monotonically from the rational starting point.
fn upper_tail_inverse_small(p: f64) -> f64 {
    let target = p.ln();
    let mut x = -lower_quantile_guess(p);
    for _ in 0..16 {
        let f = log_upper_tail(x) - target;
        let step = f / inverse_mills(x);
        x += step;
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}
