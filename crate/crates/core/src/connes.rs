//! Trace formula checks in dimension one.
//!
//! Model operators are diagonal in the Fourier basis of the circle, with
//! eigenvalue `lambda_k` on `e_k`, and come with an `L_2` symbol `p(x, xi)`
//! supported in `x in [0, 1]`. Shell integrals of the symbol over
//! `2^n <= <xi> <= 2^(n+1)`, `<xi> = (1 + xi^2)^(1/2)`, are compared with the
//! eigenvalue sums over the same shells.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::num::{integrate, CompensatedSum};
use crate::seqcore::{
    almost_convergent, invariance_residual, Answer, DyadicSequence, EnvelopeConfig, Evidence,
    Index, Side, Status, ValueEnvelope, Verdict,
};
use crate::transforms::MuFunction;
use crate::weights::Weight;

/// `<xi> = (1 + xi^2)^(1/2)`.
pub fn bracket(xi: f64) -> f64 {
    xi.hypot(1.0)
}

/// `ln <e^u>`, stable for large `u`.
fn ln_bracket_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + 0.5 * libm::log1p((-2.0 * u).exp())
    } else {
        0.5 * libm::log1p((2.0 * u).exp())
    }
}

/// `ln s_n` where `<s_n> = 2^n`, for `n >= 1`.
fn ln_shell_edge(n: Index) -> f64 {
    n as f64 * LN_2 + 0.5 * libm::log1p(-(-2.0 * n as f64).exp2())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XProfile {
    /// `chi_(0,1)(x)`.
    Indicator01,
    /// `sin^2(pi x)` on `[0, 1]`.
    SinSquared,
}

impl XProfile {
    fn eval(self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            XProfile::Indicator01 => 1.0,
            XProfile::SinSquared => (PI * x).sin().powi(2),
        }
    }

    /// `int_0^1`; both profiles are nonnegative.
    fn integral(self) -> f64 {
        match self {
            XProfile::Indicator01 => 1.0,
            XProfile::SinSquared => 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub enum XiProfile {
    /// `<xi>^-1`.
    BracketInverse,
    /// `<xi>^-s`.
    BracketPow(f64),
    /// `c_n <xi>^-1` on the shell `2^n <= <xi> < 2^(n+1)`; zero off the
    /// window of `c`.
    ShellPattern(DyadicSequence),
}

impl XiProfile {
    /// `(sign, ln |value|)` at `<xi> = exp(lb)`.
    fn ln_eval(&self, lb: f64) -> (f64, f64) {
        match self {
            XiProfile::BracketInverse => (1.0, -lb),
            XiProfile::BracketPow(s) => (1.0, -s * lb),
            XiProfile::ShellPattern(c) => {
                let n = (lb / LN_2).floor() as Index;
                let (lo, hi) = c.window();
                let v = if n >= lo && n <= hi { c.value(n) } else { 0.0 };
                if v == 0.0 {
                    (0.0, f64::NEG_INFINITY)
                } else {
                    (v.signum(), v.abs().ln() - lb)
                }
            }
        }
    }

    fn eval(&self, xi: f64) -> f64 {
        let (s, l) = self.ln_eval(bracket(xi).ln());
        if s == 0.0 {
            0.0
        } else {
            s * l.exp()
        }
    }
}

/// Bilinear interpolation on a tensor grid, zero outside it.
///
/// `values` is row-major with `x` as the slow index:
/// `values[i * xi.len() + j] = p(x[i], xi[j])`.
#[derive(Clone, Debug)]
pub struct Tabulated {
    x: Vec<f64>,
    xi: Vec<f64>,
    values: Vec<f64>,
}

fn locate(knots: &[f64], t: f64) -> Option<(usize, f64)> {
    if knots.len() < 2 || t < knots[0] || t > knots[knots.len() - 1] {
        return None;
    }
    let i = knots.partition_point(|&k| k <= t).clamp(1, knots.len() - 1) - 1;
    Some((i, (t - knots[i]) / (knots[i + 1] - knots[i])))
}

impl Tabulated {
    pub fn new(x: Vec<f64>, xi: Vec<f64>, values: Vec<f64>) -> Result<Tabulated> {
        if x.len() < 2 || xi.len() < 2 || values.len() != x.len() * xi.len() {
            return Err(Error::domain("tabulated symbol needs a 2x2 grid or larger with matching values"));
        }
        let inc = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if !inc(&x) || !inc(&xi) {
            return Err(Error::domain("grid knots must be increasing"));
        }
        if x[0] < 0.0 || x[x.len() - 1] > 1.0 {
            return Err(Error::domain("symbol must be supported in x in [0, 1]"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite symbol value"));
        }
        Ok(Tabulated { x, xi, values })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.xi.len() + j]
    }

    fn eval(&self, x: f64, xi: f64) -> f64 {
        let (Some((i, s)), Some((j, t))) = (locate(&self.x, x), locate(&self.xi, xi)) else {
            return 0.0;
        };
        let a = self.at(i, j) * (1.0 - t) + self.at(i, j + 1) * t;
        let b = self.at(i + 1, j) * (1.0 - t) + self.at(i + 1, j + 1) * t;
        a * (1.0 - s) + b * s
    }

    /// `int_0^1 p(x, xi) dx` (or of `|p|`), exact for the bilinear form.
    fn marginal(&self, xi: f64, abs: bool) -> f64 {
        let Some((j, t)) = locate(&self.xi, xi) else {
            return 0.0;
        };
        let col = |i: usize| self.at(i, j) * (1.0 - t) + self.at(i, j + 1) * t;
        let mut s = 0.0;
        for i in 0..self.x.len() - 1 {
            let (a, b, h) = (col(i), col(i + 1), self.x[i + 1] - self.x[i]);
            s += if abs && a * b < 0.0 {
                // linear piece through zero
                0.5 * h * (a * a + b * b) / (a.abs() + b.abs())
            } else if abs {
                0.5 * h * (a.abs() + b.abs())
            } else {
                0.5 * h * (a + b)
            };
        }
        s
    }

    /// `int_a^b` of the marginal; exact since it is linear between knots.
    fn marginal_integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut pts = vec![a, b];
        pts.extend(self.xi.iter().copied().filter(|&k| k > a && k < b));
        pts.sort_by(f64::total_cmp);
        pts.windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.marginal(w[0], false) + self.marginal(w[1], false)))
            .sum()
    }
}

#[derive(Clone, Debug)]
pub enum Symbol {
    Zero,
    Separable { x: XProfile, xi: XiProfile },
    Tabulated(Arc<Tabulated>),
    Combination(Vec<(f64, Symbol)>),
}

impl Symbol {
    /// `chi_(0,1)(x) <xi>^-1`.
    pub fn model() -> Symbol {
        Symbol::Separable { x: XProfile::Indicator01, xi: XiProfile::BracketInverse }
    }

    pub fn scaled(self, c: f64) -> Symbol {
        Symbol::Combination(vec![(c, self)])
    }

    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        match self {
            Symbol::Zero => 0.0,
            Symbol::Separable { x: xp, xi: xip } => {
                let a = xp.eval(x);
                if a == 0.0 {
                    0.0
                } else {
                    a * xip.eval(xi)
                }
            }
            Symbol::Tabulated(t) => t.eval(x, xi),
            Symbol::Combination(v) => v.iter().map(|(c, s)| c * s.eval(x, xi)).sum(),
        }
    }

    fn is_even(&self) -> bool {
        match self {
            Symbol::Zero | Symbol::Separable { .. } => true,
            Symbol::Tabulated(t) => {
                let n = t.xi.len();
                (0..n).all(|j| (t.xi[j] + t.xi[n - 1 - j]).abs() <= 1e-12 * t.xi[j].abs().max(1.0))
                    && (0..t.x.len()).all(|i| (0..n).all(|j| t.at(i, j) == t.at(i, n - 1 - j)))
            }
            Symbol::Combination(v) => v.iter().all(|(_, s)| s.is_even()),
        }
    }

    /// Points in `(a, b)` where the marginal may have kinks or jumps.
    fn xi_breaks(&self, a: f64, b: f64, out: &mut Vec<f64>) {
        match self {
            Symbol::Tabulated(t) => out.extend(t.xi.iter().copied().filter(|&k| k > a && k < b)),
            Symbol::Separable { xi: XiProfile::ShellPattern(_), .. } => {
                let mut n = 1;
                loop {
                    let e = ln_shell_edge(n).exp();
                    if e >= b || !e.is_finite() {
                        break;
                    }
                    if e > a {
                        out.push(e);
                    }
                    n += 1;
                }
            }
            Symbol::Combination(v) => v.iter().for_each(|(_, s)| s.xi_breaks(a, b, out)),
            _ => {}
        }
    }

    /// `int_0^1 p(x, xi) dx`, or of `|p|` when `abs`.
    fn marginal(&self, xi: f64, abs: bool, rtol: f64) -> Result<f64> {
        Ok(match self {
            Symbol::Zero => 0.0,
            Symbol::Separable { x, xi: xp } => {
                let v = x.integral() * xp.eval(xi);
                if abs {
                    v.abs()
                } else {
                    v
                }
            }
            Symbol::Tabulated(t) => t.marginal(xi, abs),
            Symbol::Combination(v) if !abs => {
                let mut s = 0.0;
                for (c, p) in v {
                    s += c * p.marginal(xi, false, rtol)?;
                }
                s
            }
            Symbol::Combination(_) => integrate(|x| self.eval(x, xi).abs(), 0.0, 1.0, rtol, 1e-300)?,
        })
    }
}

/// A symbol with its frequency range `|xi| <= 2^log2_xi_max`.
#[derive(Clone, Debug)]
pub struct SymbolGrid {
    pub symbol: Symbol,
    pub log2_xi_max: f64,
}

impl SymbolGrid {
    pub fn new(symbol: Symbol, log2_xi_max: f64) -> Result<SymbolGrid> {
        if !(log2_xi_max > 0.0) {
            return Err(Error::domain("xi_max must exceed 1"));
        }
        Ok(SymbolGrid { symbol, log2_xi_max })
    }

    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        if xi.abs().log2() > self.log2_xi_max {
            return 0.0;
        }
        self.symbol.eval(x, xi)
    }

    fn xi_max(&self) -> Result<f64> {
        let m = self.log2_xi_max.exp2();
        if !m.is_finite() {
            return Err(Error::domain("xi_max too large for a direct frequency integral"));
        }
        Ok(m)
    }

    /// `int_{a <= |xi| <= b} h(xi) int_0^1 p dx dxi` (of `|p|` when `abs`),
    /// with panels split at dyadic points and at the symbol's breaks.
    fn xi_integral<H: Fn(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        h: H,
        extra: &[f64],
        abs: bool,
        rtol: f64,
    ) -> Result<f64> {
        let b = b.min(self.xi_max()?);
        if b <= a {
            return Ok(0.0);
        }
        let mut pts = vec![a, b];
        let mut d = 1.0;
        while d < b {
            if d > a {
                pts.push(d);
            }
            d *= 2.0;
        }
        pts.extend(extra.iter().copied().filter(|&e| e > a && e < b));
        self.symbol.xi_breaks(a, b, &mut pts);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let even = self.symbol.is_even();
        let mut s = CompensatedSum::new();
        for w in pts.windows(2) {
            let mut err = None;
            let v = integrate(
                |xi| {
                    let mut m = match self.symbol.marginal(xi, abs, rtol) {
                        Ok(v) => v,
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    };
                    if !even {
                        m += self.symbol.marginal(-xi, abs, rtol).unwrap_or(0.0);
                    } else {
                        m *= 2.0;
                    }
                    m * h(xi)
                },
                w[0],
                w[1],
                rtol,
                1e-300,
            )?;
            if let Some(e) = err {
                return Err(e);
            }
            s.add(v);
        }
        Ok(s.value())
    }
}

fn leaf_shell(sym: &Symbol, n: Index, ln_norm: f64, rtol: f64) -> Result<f64> {
    match sym {
        Symbol::Zero => Ok(0.0),
        Symbol::Combination(v) => {
            let mut s = 0.0;
            for (c, p) in v {
                s += c * leaf_shell(p, n, ln_norm, rtol)?;
            }
            Ok(s)
        }
        Symbol::Tabulated(t) => {
            let lo = if n == 0 { 0.0 } else { ln_shell_edge(n).exp() };
            let hi = ln_shell_edge(n + 1).exp();
            if !hi.is_finite() && lo > t.xi[t.xi.len() - 1].abs() {
                return Ok(0.0);
            }
            let v = t.marginal_integral(lo, hi) + t.marginal_integral(-hi, -lo);
            Ok(v * (-ln_norm).exp())
        }
        Symbol::Separable { x, xi } => {
            let xint = x.integral();
            let v = if n == 0 {
                // |xi| in [0, sqrt 3], linear variable
                let hi = 3f64.sqrt();
                integrate(|t| xi.eval(t), 0.0, hi, rtol, 1e-300)? * (-ln_norm).exp()
            } else {
                // xi = e^u, d xi = e^u du, normalization folded into the exponent
                let (ua, ub) = (ln_shell_edge(n), ln_shell_edge(n + 1));
                integrate(
                    |u| {
                        let (s, l) = xi.ln_eval(ln_bracket_exp(u));
                        if s == 0.0 {
                            0.0
                        } else {
                            s * (l + u - ln_norm).exp()
                        }
                    },
                    ua,
                    ub,
                    rtol,
                    1e-300,
                )?
            };
            Ok(2.0 * xint * v)
        }
    }
}

/// `(2^n g(2^n))^-1 int_0^1 int_{2^n <= <xi> <= 2^(n+1)} p(x, xi) dxi dx`.
pub fn shell_integral(p: &SymbolGrid, g: &Weight, n: Index, rtol: f64) -> Result<f64> {
    if n < 0 {
        return Err(Error::domain("shell index must be >= 0"));
    }
    if (n + 1) as f64 > p.log2_xi_max {
        return Err(Error::domain(format!(
            "shell {n} reaches past xi_max = 2^{}",
            p.log2_xi_max
        )));
    }
    let ln_norm = g.ln_dyadic_weight(n);
    if !ln_norm.is_finite() {
        return Err(Error::numeric("dyadic weight underflow", ln_norm, 0.0));
    }
    leaf_shell(&p.symbol, n, ln_norm, rtol)
}

/// Shell integrals for `n` in the window.
pub fn shell_sequence(p: &SymbolGrid, g: &Weight, window: (Index, Index), rtol: f64) -> Result<DyadicSequence> {
    let (a, b) = window;
    if a < 0 || b < a {
        return Err(Error::domain(format!("bad shell window [{a}, {b}]")));
    }
    let v = (a..=b)
        .map(|n| shell_integral(p, g, n, rtol))
        .collect::<Result<Vec<_>>>()?;
    DyadicSequence::dense(Side::ZPlus, a, v)
}

fn label(t: f64) -> Index {
    t.log2().floor() as Index
}

/// Envelope over `t` of `int |p(x, xi)| / <t - <xi>> dxi dx / (t g(t))`.
pub fn decay_estimate(p: &SymbolGrid, g: &Weight, t_grid: &[f64], rtol: f64) -> Result<ValueEnvelope> {
    let xmax = p.xi_max()?;
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t >= 1.0 && t <= xmax) {
            return Err(Error::domain(format!("t = {t} outside [1, xi_max]")));
        }
        let peak = (t * t - 1.0).sqrt();
        let extra: Vec<f64> = [-100.0, -10.0, -1.0, 0.0, 1.0, 10.0, 100.0]
            .iter()
            .map(|d| peak + d)
            .collect();
        let h = |xi: f64| 1.0 / bracket(t - bracket(xi));
        let v = p.xi_integral(0.0, xmax, h, &extra, true, rtol)?;
        samples.push((label(t), v / (t * g.eval(t))));
    }
    ValueEnvelope::from_samples(&samples, &EnvelopeConfig::default())
}

/// Fourier-diagonal operator on the circle with its symbol.
#[derive(Clone)]
pub struct ModelOperator {
    pub k_max: i64,
    eig: Arc<dyn Fn(i64) -> f64 + Send + Sync>,
    pub symbol: SymbolGrid,
}

impl std::fmt::Debug for ModelOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ModelOperator(k_max = {}, {:?})", self.k_max, self.symbol)
    }
}

impl ModelOperator {
    pub fn new<F>(k_max: i64, eig: F, symbol: SymbolGrid) -> Result<ModelOperator>
    where
        F: Fn(i64) -> f64 + Send + Sync + 'static,
    {
        if k_max < 1 {
            return Err(Error::domain("k_max must be >= 1"));
        }
        Ok(ModelOperator { k_max, eig: Arc::new(eig), symbol })
    }

    /// `lambda_k = <k>^-1` with symbol `chi_(0,1)(x) <xi>^-1`.
    pub fn bracket_inverse(k_max: i64) -> Result<ModelOperator> {
        let grid = SymbolGrid::new(Symbol::model(), (k_max as f64).log2().max(1.0) + 1.0)?;
        ModelOperator::new(k_max, |k| 1.0 / bracket(k as f64), grid)
    }

    /// Same symbol, new eigenvalues.
    pub fn with_eigenvalues<F>(&self, eig: F) -> ModelOperator
    where
        F: Fn(i64) -> f64 + Send + Sync + 'static,
    {
        ModelOperator { k_max: self.k_max, eig: Arc::new(eig), symbol: self.symbol.clone() }
    }

    pub fn scaled(&self, c: f64) -> ModelOperator {
        let e = self.eig.clone();
        ModelOperator {
            k_max: self.k_max,
            eig: Arc::new(move |k| c * e(k)),
            symbol: SymbolGrid { symbol: self.symbol.symbol.clone().scaled(c), ..self.symbol },
        }
    }

    pub fn eigenvalue(&self, k: i64) -> f64 {
        (self.eig)(k)
    }

    /// `sum_{|k| <= m} lambda_k` for `m = 0..=k_max`.
    fn cumulative(&self) -> Vec<f64> {
        let mut s = CompensatedSum::new();
        let mut out = Vec::with_capacity(self.k_max as usize + 1);
        s.add(self.eigenvalue(0));
        out.push(s.value());
        for m in 1..=self.k_max {
            s.add(self.eigenvalue(m));
            s.add(self.eigenvalue(-m));
            out.push(s.value());
        }
        out
    }

    /// Singular value function of the eigenvalue list.
    pub fn mu(&self) -> Result<MuFunction> {
        let v: Vec<f64> = (-self.k_max..=self.k_max).map(|k| self.eigenvalue(k)).collect();
        MuFunction::diag(&v)
    }
}

/// Largest `m >= 0` with `<m> < 2^(n+1)`, i.e. `m^2 <= 4^(n+1) - 2`.
pub fn shell_top(n: Index) -> i64 {
    let lim = (1i128 << (2 * (n + 1))) - 2;
    let mut m = (lim as f64).sqrt() as i128;
    while m * m > lim {
        m -= 1;
    }
    while (m + 1) * (m + 1) <= lim {
        m += 1;
    }
    m as i64
}

/// Envelope over `t` of `(sum_{<k> <= t} lambda_k - int_{<xi> <= t} p) / (t g(t))`.
pub fn diagonal_vs_symbol(op: &ModelOperator, g: &Weight, t_grid: &[f64], rtol: f64) -> Result<ValueEnvelope> {
    let cum = op.cumulative();
    let kb = bracket(op.k_max as f64);
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t >= 1.0 && t <= kb) {
            return Err(Error::domain(format!("t = {t} outside [1, <k_max>]")));
        }
        let r = (t * t - 1.0).sqrt();
        let mut m = r.floor() as i64;
        while m > 0 && bracket(m as f64) > t {
            m -= 1;
        }
        let sum = cum[m as usize];
        let int = op.symbol.xi_integral(0.0, r, |_| 1.0, &[], false, rtol)?;
        samples.push((label(t), (sum - int) / (t * g.eval(t))));
    }
    ValueEnvelope::from_samples(&samples, &EnvelopeConfig::default())
}

/// `r_n = (sum_{shell n} lambda_k) / (2^n g(2^n)) - shell_integral(p, g, n)`.
pub fn trace_residuals(op: &ModelOperator, g: &Weight, window: (Index, Index), rtol: f64) -> Result<DyadicSequence> {
    let (a, b) = window;
    if a < 0 || b < a {
        return Err(Error::domain(format!("bad shell window [{a}, {b}]")));
    }
    if shell_top(b) > op.k_max {
        return Err(Error::domain(format!(
            "shell {b} needs |k| up to {}, past k_max = {}",
            shell_top(b),
            op.k_max
        )));
    }
    let cum = op.cumulative();
    let mut v = Vec::with_capacity((b - a + 1) as usize);
    for n in a..=b {
        let top = cum[shell_top(n) as usize];
        let below = if n == 0 { 0.0 } else { cum[shell_top(n - 1) as usize] };
        let e = (top - below) * (-g.ln_dyadic_weight(n)).exp();
        v.push(e - shell_integral(&op.symbol, g, n, rtol)?);
    }
    DyadicSequence::dense(Side::ZPlus, a, v)
}

/// Window averages of `r` vanish on the upper half of the shell window.
///
/// The averaging length is `min(p_max, length of the upper half)`.
pub fn trace_formula_check(
    op: &ModelOperator,
    g: &Weight,
    window: (Index, Index),
    p_max: Index,
    tol: f64,
) -> Result<Verdict> {
    let r = trace_residuals(op, g, window, tol.min(1e-3) * 1e-3)?;
    let (a, b) = window;
    let mid = a + (b - a + 1) / 2;
    let p = p_max.min(b - mid + 1).max(1);
    let tail = invariance_residual(&r, p, (mid, b))?;
    let full = invariance_residual(&r, p, (a, b))?;
    let cfg = EnvelopeConfig::default();
    let answer = if tail <= tol {
        Answer::Yes
    } else if cfg.classify(full, tail) != Status::Converged {
        Answer::No
    } else {
        Answer::Inconclusive
    };
    let (lo, hi) = r.extremes(mid, b)?;
    let mut ev = Evidence::default()
        .metric("residual", tail)
        .metric("residual_full_window", full)
        .metric("p_eff", p as f64)
        .metric("r_tail_lo", lo)
        .metric("r_tail_hi", hi)
        .metric("tol", tol);
    if p < p_max {
        ev = ev.note(format!("averaging length clipped from {p_max} to {p}"));
    }
    Ok(Verdict { answer, value: None, evidence: ev })
}

/// Almost convergence of the shell sequence on the upper half of the shell
/// window; the averaging length is clipped to half of that.
pub fn connes_measurability(
    p: &SymbolGrid,
    g: &Weight,
    window: (Index, Index),
    p_max: Index,
    tol: f64,
) -> Result<Verdict> {
    let s = shell_sequence(p, g, window, tol.min(1e-3) * 1e-3)?;
    let (a, b) = window;
    let mid = a + (b - a + 1) / 2;
    let pe = p_max.min((b - mid + 1) / 2).max(1);
    let mut v = almost_convergent(&s, pe, tol, (mid, b))?;
    if pe < p_max {
        v.evidence = v.evidence.note(format!("averaging length clipped from {p_max} to {pe}"));
    }
    Ok(v)
}

/// Whether `X V^(-1/p)` lies in `L_g^(q)`, `q = p/(p-1)`, for `V = g(<k>)`.
///
/// The quasinorm `sup_j mu_j / g(j+1)` of the sorted values
/// `(|lambda_k| g(<k>)^(-1/p))^q` is compared over the first quarter, half and
/// all of the ranks; `p = 1` falls back to boundedness of `lambda_k / g(<k>)`.
pub fn modulation_check(op: &ModelOperator, g: &Weight, p: f64, tol: f64) -> Result<Verdict> {
    if !(p >= 1.0) {
        return Err(Error::domain("modulation exponent must be >= 1"));
    }
    let ks = -op.k_max..=op.k_max;
    let mut ev = Evidence::default().metric("p", p);
    let (vals, rank_weight): (Vec<f64>, Box<dyn Fn(usize) -> f64>) = if p == 1.0 {
        ev = ev.note("p = 1: the exponent degenerates, checking sup |lambda_k| / g(<k>) instead");
        (
            ks.map(|k| op.eigenvalue(k).abs() / g.eval(bracket(k as f64))).collect(),
            Box::new(|_| 1.0),
        )
    } else {
        let q = p / (p - 1.0);
        (
            ks.map(|k| {
                let gk = g.eval(bracket(k as f64));
                (op.eigenvalue(k).abs() * gk.powf(-1.0 / p)).powf(q)
            })
            .collect(),
            Box::new(|j| g.eval((j + 1) as f64)),
        )
    };
    let mut sorted = vals;
    sorted.sort_by(|a, b| b.total_cmp(a));
    let sup_upto = |m: usize| {
        sorted[..m]
            .iter()
            .enumerate()
            .fold(0.0f64, |best, (j, &v)| best.max(v / rank_weight(j)))
    };
    let n = sorted.len();
    let (q1, q2, q4) = (sup_upto(n / 4), sup_upto(n / 2), sup_upto(n));
    let answer = if q4 <= q2 * (1.0 + tol) {
        Answer::Yes
    } else if q4 / q2 >= EnvelopeConfig::default().shrink * (q2 / q1) {
        Answer::No
    } else {
        Answer::Inconclusive
    };
    ev = ev
        .metric("quasinorm", q4)
        .metric("quasinorm_half", q2)
        .metric("quasinorm_quarter", q1);
    Ok(Verdict { answer, value: Some(q4), evidence: ev })
}
