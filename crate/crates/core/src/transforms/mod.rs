//! Dyadic synthesis `D_g`, rearrangement, the averaging map `Phi_g` and the
//! summation methods built on them.

mod means;
mod mu;

use std::f64::consts::LN_2;
use std::sync::Arc;

pub use means::{cesaro, cesaro_g, cesaro_inverse, lg_norm, log_mean, n_map};
pub use mu::{MuFunction, Tail, STEP_LIMIT};

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::seqcore::{Block, DyadicSequence, Index, LazyRule, Side, MATERIALIZE_LIMIT};
use crate::weights::Weight;
use mu::{MuRepr, RunsMu};

/// A block `[start, start + len)` carrying `value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepBlock {
    pub start: Ext,
    pub len: Ext,
    pub value: Ext,
}

/// Step function on `(0, inf)`.
#[derive(Clone, Debug)]
pub enum StepFunction {
    /// `sum_n x_n g(2^n) chi_[2^n, 2^(n+1))`; unit weight when `weight` is `None`.
    /// A two-sided `x` leaves `(0, 2^lo)` as an unspecified head.
    Dyadic {
        coeffs: DyadicSequence,
        weight: Option<Weight>,
    },
    /// Explicit blocks after a head of measure `head`.
    Blocks { head: Ext, blocks: Vec<StepBlock> },
}

/// `D_g x` (or `D x` without a weight).
pub fn synth_d(x: &DyadicSequence, g: Option<&Weight>) -> StepFunction {
    StepFunction::Dyadic {
        coeffs: x.clone(),
        weight: g.cloned(),
    }
}

fn ln_g_at_pow2(w: Option<&Weight>, n: Index) -> f64 {
    match w {
        Some(w) => w.ln_dyadic_weight(n) - n as f64 * LN_2,
        None => 0.0,
    }
}

impl StepFunction {
    /// Explicit blocks over the coefficient window.
    pub fn blocks(&self) -> Result<(Ext, Vec<StepBlock>)> {
        match self {
            StepFunction::Blocks { head, blocks } => Ok((*head, blocks.clone())),
            StepFunction::Dyadic { coeffs, weight } => {
                let (lo, hi) = coeffs.window();
                if hi - lo >= MATERIALIZE_LIMIT {
                    return Err(Error::domain("dyadic window too long to list its blocks"));
                }
                let head = match coeffs.side() {
                    Side::TwoSided => Ext::pow2_i128(lo),
                    Side::ZPlus => Ext::ZERO,
                };
                let blocks = (lo..=hi)
                    .map(|n| StepBlock {
                        start: Ext::pow2_i128(n),
                        len: Ext::pow2_i128(n),
                        value: Ext::exp(ln_g_at_pow2(weight.as_ref(), n)).scale(coeffs.value(n)),
                    })
                    .collect();
                Ok((head, blocks))
            }
        }
    }

    /// `f(t)` outside the head.
    pub fn value_at(&self, t: Ext) -> Ext {
        match self {
            StepFunction::Dyadic { coeffs, weight } => {
                let n = t.log2().floor() as Index;
                if n < coeffs.lo() || n > coeffs.hi() {
                    return Ext::ZERO;
                }
                Ext::exp(ln_g_at_pow2(weight.as_ref(), n)).scale(coeffs.value(n))
            }
            StepFunction::Blocks { blocks, .. } => blocks
                .iter()
                .find(|b| b.start <= t && t < b.start + b.len)
                .map(|b| b.value)
                .unwrap_or(Ext::ZERO),
        }
    }

    /// `int_{2^n}^{2^(n+1)} f` for a dyadic step function.
    pub fn dyadic_block_integral(&self, n: Index) -> Result<Ext> {
        match self {
            StepFunction::Dyadic { coeffs, weight } => {
                let x = coeffs.get(n)?;
                let w = match weight {
                    Some(w) => w.dyadic_weight(n),
                    None => Ext::pow2_i128(n),
                };
                Ok(w.scale(x))
            }
            StepFunction::Blocks { .. } => Err(Error::domain("not a dyadic step function")),
        }
    }
}

/// Sort blocks by value and lay them out from `head`.
fn sort_blocks(head: Ext, mut blocks: Vec<StepBlock>) -> Result<MuFunction> {
    blocks.retain(|b| !b.value.is_zero() && b.len > Ext::ZERO);
    for b in blocks.iter_mut() {
        b.value = b.value.abs();
    }
    blocks.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap_or(std::cmp::Ordering::Equal));
    let mut breaks = vec![head];
    let mut values: Vec<Ext> = Vec::with_capacity(blocks.len());
    let mut pos = head;
    for b in blocks {
        pos = pos + b.len;
        if values.last() == Some(&b.value) {
            *breaks.last_mut().unwrap() = pos;
        } else {
            values.push(b.value);
            breaks.push(pos);
        }
    }
    MuFunction::steps(breaks, values, None)
}

/// Runs `(a, b, |c|)` of the coefficients over their window, zero runs dropped.
fn coefficient_runs(x: &DyadicSequence) -> Result<Vec<(Index, Index, f64)>> {
    let (lo, hi) = x.window();
    let blocks: Vec<Block> = match x.runs_in(lo, hi) {
        Some(b) => b,
        None => {
            let v = x.values(lo, hi)?;
            let mut out: Vec<Block> = Vec::new();
            for (i, val) in v.into_iter().enumerate() {
                let n = lo + i as Index;
                match out.last_mut() {
                    Some(b) if b.value.abs() == val.abs() && b.end() + 1 == n => b.len += 1,
                    _ => out.push(Block { start: n, len: 1, value: val }),
                }
            }
            out
        }
    };
    Ok(blocks
        .into_iter()
        .filter(|b| b.value != 0.0)
        .map(|b| (b.start, b.end(), b.value.abs()))
        .collect())
}

/// Decreasing rearrangement `mu(t) = inf{s : |{|f| > s}| <= t}`.
///
/// When the dyadic block values are already nonincreasing the result keeps
/// the run structure and never lists blocks. A two-sided source needs its
/// first coefficient to dominate, since `(0, 2^lo)` is taken as the head.
pub fn rearrange(f: &StepFunction) -> Result<MuFunction> {
    match f {
        StepFunction::Blocks { head, blocks } => sort_blocks(*head, blocks.clone()),
        StepFunction::Dyadic { coeffs, weight } => {
            let runs = coefficient_runs(coeffs)?;
            let (lo, _) = coeffs.window();
            let two_sided = coeffs.side() == Side::TwoSided;
            let w = weight.as_ref();
            let lnv = |n: Index, c: f64| c.ln() + ln_g_at_pow2(w, n);
            let monotone = runs.windows(2).all(|p| lnv(p[0].1, p[0].2) >= lnv(p[1].0, p[1].2));
            if two_sided {
                let ok = runs.first().map_or(false, |r| r.0 == lo);
                if !ok || !monotone {
                    return Err(Error::domain(
                        "two-sided rearrangement needs a dominant first coefficient",
                    ));
                }
            }
            if runs.is_empty() {
                return MuFunction::steps(vec![Ext::ZERO], vec![], None);
            }
            if monotone {
                let head = two_sided.then_some(lo);
                return Ok(MuFunction::from_runs(RunsMu::new(weight.clone(), head, &runs)));
            }
            let (head, blocks) = f.blocks()?;
            sort_blocks(head, blocks)
        }
    }
}

/// Averages of a structured `mu` over dyadic blocks, evaluated from the run
/// layout without listing blocks.
struct RunsPhi {
    mu: Arc<RunsMu>,
    h: Weight,
}

/// Explicit terms kept before a run while `2^(k-a)` is representable.
const GAP_REACH: Index = 1100;
/// Explicit terms kept at a run start while the carried shift matters.
const CARRY_REACH: Index = 90;

impl RunsPhi {
    fn ln_h(&self, k: Index) -> f64 {
        self.h.ln_dyadic_weight(k) - k as f64 * LN_2
    }

    fn value(&self, k: Index) -> f64 {
        let runs = &self.mu.runs;
        let j = runs.partition_point(|r| r.b < k);
        let Some(run) = runs.get(j) else {
            return 0.0;
        };
        let mu = &self.mu;
        if k < run.a {
            // the whole block lies inside the first compressed block of run j
            return run.c * (mu.ln_w(run.a) - self.ln_h(k)).exp();
        }
        let rho_k = run.rho * ((run.a - k) as f64).exp2();
        let q = (mu.ln_w(k) - self.ln_h(k)).exp();
        let own = run.c * q * (1.0 - rho_k);
        let spill = if k < run.b {
            run.c * q * rho_k * (mu.ln_w(k + 1) - mu.ln_w(k)).exp()
        } else if let Some(next) = runs.get(j + 1) {
            next.c * rho_k * (mu.ln_w(next.a) - self.ln_h(k)).exp()
        } else {
            0.0
        };
        own + spill
    }

    /// Indices where the explicit formula must be evaluated one by one.
    fn special_ranges(&self, lo: Index, hi: Index) -> Vec<(Index, Index)> {
        let mut out = Vec::new();
        let mut prev_end: Option<Index> = self.mu.head.map(|h| h - 1);
        for run in &self.mu.runs {
            let gap_from = prev_end.map_or(run.a - GAP_REACH, |e| (e + 1).max(run.a - GAP_REACH));
            out.push((gap_from, run.a - 1));
            let carry_to = if run.rho == 0.0 { run.a - 1 } else { (run.a + CARRY_REACH).min(run.b) };
            out.push((run.a, carry_to));
            out.push((run.b, run.b));
            prev_end = Some(run.b);
        }
        out.into_iter()
            .map(|(a, b)| (a.max(lo), b.min(hi)))
            .filter(|(a, b)| a <= b)
            .collect()
    }

    /// Run-length form; exact when the synthesis and averaging weights agree.
    fn to_runs(&self, lo: Index, hi: Index) -> Vec<Block> {
        let mut blocks = Vec::new();
        let special = self.special_ranges(lo, hi);
        for &(a, b) in &special {
            for k in a..=b {
                blocks.push(Block { start: k, len: 1, value: self.value(k) });
            }
        }
        // constant interior of each run, between the carry zone and the end
        for run in &self.mu.runs {
            let from = if run.rho == 0.0 { run.a } else { run.a + CARRY_REACH + 1 };
            let (s, e) = (from.max(lo), (run.b - 1).min(hi));
            if s <= e {
                blocks.push(Block { start: s, len: e - s + 1, value: run.c });
            }
        }
        blocks.sort_by_key(|b| b.start);
        blocks.dedup_by_key(|b| b.start);
        blocks
    }
}

impl LazyRule for RunsPhi {
    fn value(&self, k: Index) -> f64 {
        RunsPhi::value(self, k)
    }

    fn breakpoints(&self, a: Index, b: Index) -> Vec<Index> {
        let mut out = Vec::new();
        for (s, e) in self.special_ranges(a, b) {
            out.extend(s..=e.min(s + 4 * GAP_REACH));
            out.push(e + 1);
        }
        for run in &self.mu.runs {
            out.push(run.a);
            out.push(run.b);
            out.push(run.b + 1);
        }
        out.retain(|&k| k >= a && k <= b);
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn same_weight(a: Option<&Weight>, b: &Weight) -> bool {
    a.map_or(false, |w| w.name() == b.name())
}

/// `Phi_g(mu)_k = (2^k g(2^k))^-1 int_{2^k}^{2^(k+1)} mu` for `k` in the window.
pub fn phi_g(mu: &MuFunction, g: &Weight, window: (Index, Index)) -> Result<DyadicSequence> {
    let (lo, hi) = window;
    let side = if lo >= 0 { Side::ZPlus } else { Side::TwoSided };
    if hi < lo {
        return Err(Error::domain("empty window"));
    }
    if Ext::pow2_i128(lo) < mu.origin() {
        return Err(Error::domain(
            "window starts inside the head of mu; raise the lower index",
        ));
    }
    if let MuRepr::Runs(r) = &mu.repr {
        let rule = RunsPhi { mu: r.clone(), h: g.clone() };
        let exact_runs = match &r.weight {
            None => false,
            Some(_) => same_weight(r.weight.as_ref(), g),
        };
        if exact_runs {
            return DyadicSequence::runs(side, lo, hi, rule.to_runs(lo, hi));
        }
        if hi - lo < MATERIALIZE_LIMIT {
            let v = (lo..=hi).map(|k| rule.value(k)).collect();
            return DyadicSequence::dense(side, lo, v);
        }
        return DyadicSequence::lazy(side, lo, hi, Arc::new(rule));
    }
    phi_g_direct(mu, g, window)
}

/// Block-by-block quadrature of `mu`; the reference route for [`phi_g`].
pub fn phi_g_direct(mu: &MuFunction, g: &Weight, window: (Index, Index)) -> Result<DyadicSequence> {
    let (lo, hi) = window;
    if hi - lo >= MATERIALIZE_LIMIT {
        return Err(Error::domain("window too long for blockwise averaging"));
    }
    let side = if lo >= 0 { Side::ZPlus } else { Side::TwoSided };
    let mut v = Vec::with_capacity((hi - lo + 1) as usize);
    for k in lo..=hi {
        let norm = g.ln_dyadic_weight(k);
        if !norm.is_finite() {
            return Err(Error::numeric("dyadic weight underflow", norm, 0.0));
        }
        let int = mu.integral(Ext::pow2_i128(k), Ext::pow2_i128(k + 1))?;
        v.push(int.ratio(Ext::exp(norm)));
    }
    DyadicSequence::dense(side, lo, v)
}

/// `sup_t mu(t)/g(t)` over the steps of `mu` and the extra grid points.
///
/// Steps are compared against the left limit of `g` at their right end, so
/// the value is exact for step `mu` against step `g`.
pub fn quasinorm_lg(mu: &MuFunction, g: &Weight, t_grid: &[f64]) -> Result<f64> {
    let steps = mu.to_steps()?;
    let MuRepr::Steps(s) = &steps.repr else { unreachable!() };
    let mut best = 0.0f64;
    let mut see = |v: Ext, t: Ext| {
        let gv = g.eval_ext(t);
        if gv > Ext::ZERO {
            best = best.max(v.ratio(gv));
        }
    };
    for i in 0..s.values.len() {
        let right = s.breaks[i + 1];
        let left_limit = right - right.ldexp(-40);
        see(s.values[i], left_limit.max(s.breaks[i]));
        if s.breaks[i] > Ext::ZERO {
            see(s.values[i], s.breaks[i]);
        }
    }
    if let Some(t) = &s.tail {
        let start = s.breaks[s.breaks.len() - 1];
        let mut pts: Vec<Ext> = t_grid.iter().map(|&x| Ext::from_f64(x)).filter(|x| *x >= start).collect();
        if start > Ext::ZERO {
            pts.push(start);
        }
        for p in pts {
            if t.until.map_or(true, |u| p < u) {
                see(steps.value_at(p), p);
            }
        }
    }
    for &x in t_grid {
        let p = Ext::from_f64(x);
        if p >= steps.origin() && p > Ext::ZERO {
            see(steps.value_at(p), p);
        }
    }
    Ok(best)
}

/// `mu = mu chi_[0, d) + mu(. + d)` at `d = inf{t : mu(t) <= a}`.
#[derive(Clone, Debug)]
pub struct Split {
    pub d: Ext,
    pub head: MuFunction,
    pub tail: MuFunction,
}

pub fn split_at_level(mu: &MuFunction, a: f64) -> Result<Split> {
    if !(a >= 0.0) {
        return Err(Error::domain("split level must be nonnegative"));
    }
    let steps = mu.to_steps()?;
    let MuRepr::Steps(s) = &steps.repr else { unreachable!() };
    let level = Ext::from_f64(a);
    let origin = s.breaks[0];
    let last = s.breaks[s.breaks.len() - 1];
    let d = match s.values.iter().position(|v| *v <= level) {
        Some(i) => s.breaks[i],
        None => match &s.tail {
            None => last,
            Some(t) => {
                let c = tail_crossing(t, last, level)?;
                t.until.map_or(c, |u| c.min(u))
            }
        },
    };
    // head: everything before d
    let mut hb = vec![origin];
    let mut hv = Vec::new();
    for i in 0..s.values.len() {
        if s.breaks[i] >= d {
            break;
        }
        hv.push(s.values[i]);
        hb.push(s.breaks[i + 1].min(d));
    }
    let head_tail = match &s.tail {
        Some(t) if d > last => Some(Tail { until: Some(t.until.map_or(d, |u| u.min(d))), ..t.clone() }),
        _ => None,
    };
    let head = MuFunction::steps(hb, hv, head_tail)?;
    // tail: mu(t + d) for t >= 0
    let mut tb = vec![Ext::ZERO];
    let mut tv = Vec::new();
    for i in 0..s.values.len() {
        if s.breaks[i + 1] <= d {
            continue;
        }
        tv.push(s.values[i]);
        tb.push(s.breaks[i + 1] - d);
    }
    let tail_tail = s.tail.as_ref().map(|t| Tail {
        shift: t.shift + d,
        until: t.until.map(|u| u - d),
        ..t.clone()
    });
    let tail = if d > last {
        MuFunction::steps(vec![Ext::ZERO], vec![], tail_tail)?
    } else {
        MuFunction::steps(tb, tv, tail_tail)?
    };
    Ok(Split { d, head, tail })
}

/// Smallest `t >= start` with `scale * g(t + shift) <= level`.
fn tail_crossing(t: &Tail, start: Ext, level: Ext) -> Result<Ext> {
    let f = |x: Ext| t.weight.eval_ext(x + t.shift).scale(t.scale);
    if f(start) <= level {
        return Ok(start);
    }
    if level.is_zero() {
        return Ok(t.until.unwrap_or(Ext::from_f64(f64::INFINITY)));
    }
    // bracket by doubling, then bisect in log scale
    let mut lo = start.max(Ext::ONE);
    let mut hi = lo.ldexp(1);
    let mut steps = 0;
    while f(hi) > level {
        lo = hi;
        hi = hi * hi.max(Ext::from_f64(2.0));
        steps += 1;
        if steps > 200 {
            return Err(Error::numeric("tail never drops below the split level", 0.0, 0.0));
        }
    }
    for _ in 0..200 {
        let mid = Ext::exp2(0.5 * (lo.log2() + hi.log2()));
        if !(mid > lo && mid < hi) {
            break;
        }
        if f(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `rearrange(D_g Phi_f(mu_Y))` over the dyadic window.
pub fn transport_pushforward(
    mu_y: &MuFunction,
    f: &Weight,
    g: &Weight,
    window: (Index, Index),
) -> Result<MuFunction> {
    let phi = phi_g(mu_y, f, window)?;
    rearrange(&synth_d(&phi, Some(g)))
}

/// `x - Phi_g(rearrange(D_g x))`; zero for decreasing two-sided `x`.
pub fn inv_residual_seq(x: &DyadicSequence, g: &Weight) -> Result<DyadicSequence> {
    let mu = rearrange(&synth_d(x, Some(g)))?;
    let back = phi_g(&mu, g, x.window())?;
    x.sub(&back)
}
