//! Complex numbers in polar log form: `z = exp(log_mag) * exp(i * arg)`.
//!
//! Zero is the sentinel `{log_mag: -inf, arg: 0}`. Arguments live in `(-pi, pi]`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogC {
    pub log_mag: f64,
    pub arg: f64,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if (-PI..=PI).contains(&theta) && theta != -PI {
        return theta;
    }
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        PI
    } else {
        t
    }
}

impl LogC {
    pub const ZERO: LogC = LogC { log_mag: f64::NEG_INFINITY, arg: 0.0 };
    pub const ONE: LogC = LogC { log_mag: 0.0, arg: 0.0 };

    pub fn new(log_mag: f64, arg: f64) -> LogC {
        if log_mag == f64::NEG_INFINITY {
            return LogC::ZERO;
        }
        LogC { log_mag, arg: wrap_angle(arg) }
    }

    pub fn from_complex(z: C64) -> LogC {
        if z.re == 0.0 && z.im == 0.0 {
            return LogC::ZERO;
        }
        LogC { log_mag: z.norm().ln(), arg: z.im.atan2(z.re) }
    }

    pub fn from_real(x: f64) -> LogC {
        if x == 0.0 {
            LogC::ZERO
        } else if x > 0.0 {
            LogC { log_mag: x.ln(), arg: 0.0 }
        } else {
            LogC { log_mag: (-x).ln(), arg: PI }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    pub fn to_complex(self) -> C64 {
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        C64::from_polar(self.log_mag.exp(), self.arg)
    }

    pub fn mul(self, other: LogC) -> LogC {
        if self.is_zero() || other.is_zero() {
            return LogC::ZERO;
        }
        LogC { log_mag: self.log_mag + other.log_mag, arg: wrap_angle(self.arg + other.arg) }
    }

    pub fn div(self, other: LogC) -> LogC {
        if self.is_zero() {
            return LogC::ZERO;
        }
        LogC { log_mag: self.log_mag - other.log_mag, arg: wrap_angle(self.arg - other.arg) }
    }

    pub fn conj(self) -> LogC {
        if self.is_zero() {
            return LogC::ZERO;
        }
        LogC { log_mag: self.log_mag, arg: wrap_angle(-self.arg) }
    }

    pub fn powi(self, k: i32) -> LogC {
        if k == 0 {
            return LogC::ONE;
        }
        if self.is_zero() {
            return LogC::ZERO;
        }
        LogC { log_mag: self.log_mag * k as f64, arg: wrap_angle(self.arg * k as f64) }
    }

    pub fn add(self, other: LogC) -> LogC {
        logsumexp_complex(&[self, other])
    }

    pub fn is_finite(&self) -> bool {
        !self.log_mag.is_nan() && self.log_mag != f64::INFINITY && self.arg.is_finite()
    }
}

/// Numerically stable `log(sum_k z_k)` over terms given in [`LogC`] form.
///
/// Terms are shifted by the largest `log_mag` before exponentiation, so the
/// result is exact up to the usual floating-point rounding even when the
/// magnitudes span hundreds of orders of magnitude. A sum whose magnitude is
/// below the rounding noise of its terms is reported as exact zero.
pub fn logsumexp_complex(terms: &[LogC]) -> LogC {
    let mut acc = LseAcc::default();
    for t in terms {
        acc.push(*t);
    }
    acc.finish()
}

/// Weighted form: `log(sum_k w_k exp(v_k))`.
pub fn logsumexp_weighted(terms: &[(C64, LogC)]) -> LogC {
    let mut acc = LseAcc::default();
    for (w, v) in terms {
        acc.push(LogC::from_complex(*w).mul(*v));
    }
    acc.finish()
}

const CANCEL_TOL: f64 = 2.0 * f64::EPSILON;

/// Streaming accumulator producing the same result as [`logsumexp_complex`]
/// without collecting the terms first.
#[derive(Clone, Copy, Debug)]
pub struct LseAcc {
    shift: f64,
    acc: C64,
    mass: f64,
}

impl Default for LseAcc {
    fn default() -> Self {
        LseAcc { shift: f64::NEG_INFINITY, acc: C64::new(0.0, 0.0), mass: 0.0 }
    }
}

impl LseAcc {
    pub fn push(&mut self, t: LogC) {
        if t.is_zero() {
            return;
        }
        if t.log_mag > self.shift {
            if self.shift != f64::NEG_INFINITY {
                let r = (self.shift - t.log_mag).exp();
                self.acc *= r;
                self.mass *= r;
            }
            self.shift = t.log_mag;
        }
        let m = (t.log_mag - self.shift).exp();
        self.acc += C64::from_polar(m, t.arg);
        self.mass += m;
    }

    pub fn finish(self) -> LogC {
        if self.shift == f64::NEG_INFINITY || self.acc.norm() <= CANCEL_TOL * self.mass {
            return LogC::ZERO;
        }
        let r = LogC::from_complex(self.acc);
        if r.is_zero() {
            return LogC::ZERO;
        }
        LogC { log_mag: r.log_mag + self.shift, arg: r.arg }
    }
}

/// Real log-sum-exp, `-inf` for an empty or all `-inf` input.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
