use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// ln(sqrt(2π))
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x), total on the extended reals.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

/// Φ⁻¹(p) for p in (0, 1).
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("normal quantile needs p in (0,1), got {p}")));
    }
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step on the cdf cleans up the last few ulps
    let pdf = std_normal_pdf(x);
    if pdf > 0.0 {
        x -= (std_normal_cdf(x) - p) / pdf;
    }
    Ok(x)
}

/// P(a < Z <= b) for a standard normal Z, evaluated on the side of the
/// distribution that avoids cancellation.
pub fn normal_interval_prob(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a > 0.0 {
        std_normal_cdf(-a) - std_normal_cdf(-b)
    } else {
        std_normal_cdf(b) - std_normal_cdf(a)
    }
}
