//! Extended-range floating point.
//!
//! Dyadic block positions reach `2^(4^40)`-ish magnitudes in the structured
//! windows, far past `f64`. `Ext` keeps an `f64` mantissa in `[0.5, 1)` and an
//! `i64` binary exponent.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest exponent gap below which alignment still changes the sum.
const ALIGN_LIMIT: i64 = 1100;

#[derive(Clone, Copy, PartialEq)]
pub struct Ext {
    mant: f64,
    exp: i64,
}

impl fmt::Debug for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp.abs() < 1000 {
            write!(f, "{:e}", self.to_f64())
        } else {
            write!(f, "{}*2^{}", self.mant, self.exp)
        }
    }
}

impl Ext {
    pub const ZERO: Ext = Ext { mant: 0.0, exp: 0 };
    pub const ONE: Ext = Ext { mant: 0.5, exp: 1 };

    fn norm(mant: f64, exp: i64) -> Ext {
        if mant == 0.0 || !mant.is_finite() {
            return Ext { mant, exp: 0 };
        }
        let (m, e) = libm::frexp(mant);
        Ext { mant: m, exp: exp + e as i64 }
    }

    pub fn from_f64(x: f64) -> Ext {
        Ext::norm(x, 0)
    }

    /// `2^e`.
    pub fn pow2(e: i64) -> Ext {
        Ext { mant: 0.5, exp: e + 1 }
    }

    /// `2^e` for an `i128` exponent; saturates far outside the `i64` range.
    pub fn pow2_i128(e: i128) -> Ext {
        let e = e.clamp(i64::MIN as i128 / 4, i64::MAX as i128 / 4) as i64;
        Ext::pow2(e)
    }

    /// `2^x` for real `x`.
    pub fn exp2(x: f64) -> Ext {
        if x.is_nan() {
            return Ext { mant: f64::NAN, exp: 0 };
        }
        let i = x.floor();
        Ext::norm((x - i).exp2(), i as i64)
    }

    /// `e^x`; `-inf` maps to zero.
    pub fn exp(x: f64) -> Ext {
        if x == f64::NEG_INFINITY {
            return Ext::ZERO;
        }
        Ext::exp2(x * std::f64::consts::LOG2_E)
    }

    pub fn mantissa(self) -> f64 {
        self.mant
    }

    pub fn exponent(self) -> i64 {
        self.exp
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0.0
    }

    pub fn is_finite(self) -> bool {
        self.mant.is_finite()
    }

    pub fn is_sign_negative(self) -> bool {
        self.mant < 0.0
    }

    pub fn to_f64(self) -> f64 {
        if self.mant == 0.0 || !self.mant.is_finite() {
            return self.mant;
        }
        libm::ldexp(self.mant, self.exp.clamp(-1200, 1200) as i32)
    }

    pub fn abs(self) -> Ext {
        Ext { mant: self.mant.abs(), exp: self.exp }
    }

    /// Natural log of a positive value; `-inf` for zero.
    pub fn ln(self) -> f64 {
        if self.mant == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.mant.ln() + self.exp as f64 * std::f64::consts::LN_2
    }

    pub fn log2(self) -> f64 {
        if self.mant == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.mant.log2() + self.exp as f64
    }

    /// `self^a` for positive `self`.
    pub fn powf(self, a: f64) -> Ext {
        if self.mant == 0.0 {
            return if a > 0.0 { Ext::ZERO } else { Ext::from_f64(f64::INFINITY) };
        }
        // split the exponent to keep a*exp exact enough at huge magnitudes
        let whole = a * self.exp as f64;
        let i = whole.floor();
        Ext::exp2(whole - i + a * self.mant.log2()) * Ext::pow2(i as i64)
    }

    pub fn sqrt(self) -> Ext {
        if self.exp % 2 == 0 {
            Ext::norm(self.mant.sqrt(), self.exp / 2)
        } else {
            Ext::norm((2.0 * self.mant).sqrt(), (self.exp - 1) / 2)
        }
    }

    pub fn scale(self, c: f64) -> Ext {
        Ext::norm(self.mant * c, self.exp)
    }

    /// Multiply by `2^k`.
    pub fn ldexp(self, k: i64) -> Ext {
        if self.mant == 0.0 {
            return self;
        }
        Ext { mant: self.mant, exp: self.exp + k }
    }

    pub fn max(self, o: Ext) -> Ext {
        if self >= o {
            self
        } else {
            o
        }
    }

    pub fn min(self, o: Ext) -> Ext {
        if self <= o {
            self
        } else {
            o
        }
    }

    /// `self / o` as `f64`.
    pub fn ratio(self, o: Ext) -> f64 {
        (self / o).to_f64()
    }

    /// `ln(self / a)` accurate when the two are close.
    pub fn ln_ratio(self, a: Ext) -> f64 {
        let r = (self - a) / a;
        if r.exp > -8 {
            self.ln() - a.ln()
        } else {
            libm::log1p(r.to_f64())
        }
    }

    /// Floor, exact while the value fits the mantissa; larger values are
    /// already integral.
    pub fn floor(self) -> Ext {
        if self.exp >= 53 {
            self
        } else {
            Ext::from_f64(self.to_f64().floor())
        }
    }

    pub fn ceil(self) -> Ext {
        if self.exp >= 53 {
            self
        } else {
            Ext::from_f64(self.to_f64().ceil())
        }
    }

    /// Integer value as `i128`, saturating.
    pub fn to_i128(self) -> i128 {
        if self.mant == 0.0 {
            return 0;
        }
        if self.exp > 120 {
            return if self.mant > 0.0 { i128::MAX } else { i128::MIN };
        }
        if self.exp <= 53 {
            return self.to_f64() as i128;
        }
        let m = libm::ldexp(self.mant, 53) as i128;
        m << (self.exp - 53)
    }

    pub fn from_i128(n: i128) -> Ext {
        if n.unsigned_abs() < (1u128 << 53) {
            return Ext::from_f64(n as f64);
        }
        let bits = 128 - n.unsigned_abs().leading_zeros() as i64;
        let shift = bits - 60;
        Ext::norm((n >> shift) as f64, shift)
    }
}

impl From<f64> for Ext {
    fn from(x: f64) -> Ext {
        Ext::from_f64(x)
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, o: Ext) -> Ext {
        if self.mant == 0.0 {
            return o;
        }
        if o.mant == 0.0 {
            return self;
        }
        let (big, small) = if self.exp >= o.exp { (self, o) } else { (o, self) };
        let d = big.exp - small.exp;
        if d > ALIGN_LIMIT {
            return big;
        }
        Ext::norm(big.mant + libm::ldexp(small.mant, -(d as i32)), big.exp)
    }
}

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext { mant: -self.mant, exp: self.exp }
    }
}

impl Sub for Ext {
    type Output = Ext;
    fn sub(self, o: Ext) -> Ext {
        self + (-o)
    }
}

impl Mul for Ext {
    type Output = Ext;
    fn mul(self, o: Ext) -> Ext {
        Ext::norm(self.mant * o.mant, self.exp + o.exp)
    }
}

impl Div for Ext {
    type Output = Ext;
    fn div(self, o: Ext) -> Ext {
        Ext::norm(self.mant / o.mant, self.exp - o.exp)
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, o: &Ext) -> Option<Ordering> {
        if self.mant.is_nan() || o.mant.is_nan() {
            return None;
        }
        let sa = self.mant.signum() * (self.mant != 0.0) as i32 as f64;
        let sb = o.mant.signum() * (o.mant != 0.0) as i32 as f64;
        if sa != sb {
            return sa.partial_cmp(&sb);
        }
        if sa == 0.0 {
            return Some(Ordering::Equal);
        }
        let mag = match self.exp.cmp(&o.exp) {
            Ordering::Equal => self.mant.abs().partial_cmp(&o.mant.abs())?,
            c => c,
        };
        Some(if sa > 0.0 { mag } else { mag.reverse() })
    }
}
