//! Small numeric kernels shared by the modules.

use crate::error::{Error, Result};

/// `ln(e^a + e^b)`.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + libm::log1p((lo - hi).exp())
}

/// Neumaier compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn digamma_tail(z: f64) -> f64 {
    // asymptotic part of psi(z) - ln z
    let z2 = 1.0 / (z * z);
    -0.5 / z - z2 * (1.0 / 12.0 - z2 * (1.0 / 120.0 - z2 / 252.0))
}

/// `sum_{k=a}^{b} 1/k` for `1 <= a`, zero when `b < a`.
pub fn harmonic_range(a: i128, b: i128) -> f64 {
    assert!(a >= 1, "harmonic_range needs a >= 1");
    if b < a {
        return 0.0;
    }
    const DIRECT: i128 = 4096;
    if b - a < DIRECT {
        let mut s = CompensatedSum::new();
        for k in (a..=b).rev() {
            s.add(1.0 / k as f64);
        }
        return s.value();
    }
    if a < DIRECT {
        return harmonic_range(a, DIRECT - 1) + harmonic_range(DIRECT, b);
    }
    // psi(b+1) - psi(a)
    let lr = libm::log1p((b + 1 - a) as f64 / a as f64);
    lr + digamma_tail((b + 1) as f64) - digamma_tail(a as f64)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 7/15 panel: (estimate, error).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss-Kronrod integration on `[a, b]`.
///
/// Fails with [`Error::Numeric`] when the panel budget runs out before
/// `max(atol, rtol*|I|)` is met.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rtol: f64,
    atol: f64,
) -> Result<f64> {
    const MAX_PANELS: usize = 4000;
    if a == b {
        return Ok(0.0);
    }
    let mut panels = vec![(a, b, gk15(&mut f, a, b))];
    loop {
        let total: f64 = panels.iter().map(|p| p.2 .0).sum();
        let err: f64 = panels.iter().map(|p| p.2 .1).sum();
        let target = atol.max(rtol * total.abs());
        if err <= target {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::numeric(
                "adaptive quadrature did not converge",
                err / total.abs().max(f64::MIN_POSITIVE),
                rtol,
            ));
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = panels.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::numeric(
                "quadrature panel underflow",
                err / total.abs().max(f64::MIN_POSITIVE),
                rtol,
            ));
        }
        panels.push((lo, mid, gk15(&mut f, lo, mid)));
        panels.push((mid, hi, gk15(&mut f, mid, hi)));
    }
}

/// Round to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let s = format!("{:.*e}", (digits - 1).max(0) as usize, x);
    s.parse().unwrap_or(x)
}
