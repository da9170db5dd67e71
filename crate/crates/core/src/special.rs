//! Bessel functions of integer order 0 and 1 and the Hankel function `H₀⁽¹⁾`.
//!
//! Rational approximations on `[0, 8)` and the modulus/phase form beyond, after
//! Hart's tables as popularized by Numerical Recipes. Absolute accuracy is
//! about `1e-8`, which keeps `H₀⁽¹⁾` within `1e-7` relative everywhere because
//! `|H₀⁽¹⁾|` has no zeros.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_4};

use crate::C64;

const THREE_PI_4: f64 = 3.0 * FRAC_PI_4;

/// Large-argument modulus and phase correction shared by `J₀` and `Y₀`.
fn p0_q0(x: f64) -> (f64, f64, f64) {
    let z = 8.0 / x;
    let y = z * z;
    let p = 1.0
        + y * (-0.1098628627e-2
            + y * (0.2734510407e-4 + y * (-0.2073370639e-5 + y * 0.2093887211e-6)));
    let q = -0.1562499995e-1
        + y * (0.1430488765e-3
            + y * (-0.6911147651e-5 + y * (0.7621095161e-6 - y * 0.934935152e-7)));
    (z, p, q)
}

pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let y = x * x;
        let num = 57568490574.0
            + y * (-13362590354.0
                + y * (651619640.7 + y * (-11214424.18 + y * (77392.33017 + y * (-184.9052456)))));
        let den = 57568490411.0
            + y * (1029532985.0
                + y * (9494680.718 + y * (59272.64853 + y * (267.8532712 + y))));
        num / den
    } else {
        let (z, p, q) = p0_q0(ax);
        let xx = ax - FRAC_PI_4;
        (FRAC_2_PI / ax).sqrt() * (xx.cos() * p - z * xx.sin() * q)
    }
}

/// `Y₀(x)` for `x > 0`; returns NaN for `x ≤ 0`.
pub fn bessel_y0(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x < 8.0 {
        let y = x * x;
        let num = -2957821389.0
            + y * (7062834065.0
                + y * (-512359803.6 + y * (10879881.29 + y * (-86327.92757 + y * 228.4622733))));
        let den = 40076544269.0
            + y * (745249964.8
                + y * (7189466.438 + y * (47447.26470 + y * (226.1030244 + y))));
        num / den + FRAC_2_PI * bessel_j0(x) * x.ln()
    } else {
        let (z, p, q) = p0_q0(x);
        let xx = x - FRAC_PI_4;
        (FRAC_2_PI / x).sqrt() * (xx.sin() * p + z * xx.cos() * q)
    }
}

pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 8.0 {
        let y = x * x;
        let num = x
            * (72362614232.0
                + y * (-7895059235.0
                    + y * (242396853.1
                        + y * (-2972611.439 + y * (15704.48260 + y * (-30.16036606))))));
        let den = 144725228442.0
            + y * (2300535178.0
                + y * (18583304.74 + y * (99447.43394 + y * (376.9991397 + y))));
        num / den
    } else {
        let z = 8.0 / ax;
        let y = z * z;
        let xx = ax - THREE_PI_4;
        let p = 1.0
            + y * (0.183105e-2
                + y * (-0.3516396496e-4 + y * (0.2457520174e-5 + y * (-0.240337019e-6))));
        let q = 0.04687499995
            + y * (-0.2002690873e-3
                + y * (0.8449199096e-5 + y * (-0.88228987e-6 + y * 0.105787412e-6)));
        let ans = (FRAC_2_PI / ax).sqrt() * (xx.cos() * p - z * xx.sin() * q);
        if x < 0.0 {
            -ans
        } else {
            ans
        }
    }
}

/// Hankel function of the first kind, `H₀⁽¹⁾(x) = J₀(x) + i·Y₀(x)`, for `x > 0`.
pub fn hankel0(x: f64) -> C64 {
    C64::new(bessel_j0(x), bessel_y0(x))
}
