//! Bi-infinite and one-sided sequences with finite-horizon limit diagnostics.
//!
//! A [`DyadicSequence`] is a rule plus an inclusive index window. Rules keep
//! structure (runs, periods, monotone pieces) so that envelopes over windows
//! near `4^40` stay cheap: extrema and window averages are only evaluated at
//! the points where the structure changes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::CompensatedSum;

pub type Index = i128;

/// Longest window that is ever materialized point by point.
pub const MATERIALIZE_LIMIT: Index = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// Indices `n >= 0`.
    ZPlus,
    TwoSided,
}

/// A constant run `x_n = value` for `start <= n < start + len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Block {
    pub start: Index,
    pub len: Index,
    pub value: f64,
}

impl Block {
    pub fn end(&self) -> Index {
        self.start + self.len - 1
    }
}

/// Sequence rule with monotone pieces and no cheaper structure.
pub trait LazyRule: Send + Sync {
    fn value(&self, n: Index) -> f64;
    /// Starts of the monotone pieces meeting `[a, b]`.
    fn breakpoints(&self, a: Index, b: Index) -> Vec<Index>;
}

#[derive(Clone)]
enum Rule {
    Runs(Arc<Vec<Block>>),
    Dense { offset: Index, data: Arc<Vec<f64>> },
    Periodic(Arc<Vec<f64>>),
    Formula(Arc<dyn Fn(Index) -> f64 + Send + Sync>),
    Lazy(Arc<dyn LazyRule>),
}

#[derive(Clone)]
pub struct DyadicSequence {
    lo: Index,
    hi: Index,
    side: Side,
    /// `x_n = rule(n - shift)`.
    shift: Index,
    rule: Rule,
}

impl fmt::Debug for DyadicSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.rule {
            Rule::Runs(b) => format!("runs({})", b.len()),
            Rule::Dense { data, .. } => format!("dense({})", data.len()),
            Rule::Periodic(p) => format!("periodic({})", p.len()),
            Rule::Formula(_) => "formula".into(),
            Rule::Lazy(_) => "lazy".into(),
        };
        write!(f, "DyadicSequence[{}, {}] {:?} {}", self.lo, self.hi, self.side, kind)
    }
}

fn check_window(side: Side, lo: Index, hi: Index) -> Result<()> {
    if hi < lo {
        return Err(Error::domain(format!("empty window [{lo}, {hi}]")));
    }
    if side == Side::ZPlus && lo < 0 {
        return Err(Error::domain("one-sided sequence indexed below 0"));
    }
    Ok(())
}

/// Sort, drop zero runs and merge equal neighbours; overlaps are an error.
fn normalize_blocks(mut blocks: Vec<Block>) -> Result<Vec<Block>> {
    blocks.retain(|b| b.len > 0 && b.value != 0.0);
    blocks.sort_by_key(|b| b.start);
    let mut out: Vec<Block> = Vec::with_capacity(blocks.len());
    for b in blocks {
        if !b.value.is_finite() {
            return Err(Error::domain("non-finite run value"));
        }
        if let Some(last) = out.last_mut() {
            if b.start <= last.end() {
                return Err(Error::domain(format!(
                    "overlapping runs at index {}",
                    b.start
                )));
            }
            if b.start == last.end() + 1 && b.value == last.value {
                last.len += b.len;
                continue;
            }
        }
        out.push(b);
    }
    Ok(out)
}

fn runs_first_at_or_after(blocks: &[Block], a: Index) -> usize {
    blocks.partition_point(|b| b.end() < a)
}

impl DyadicSequence {
    /// Run-length sequence; indices outside every run are zero.
    pub fn runs(side: Side, lo: Index, hi: Index, blocks: Vec<Block>) -> Result<Self> {
        check_window(side, lo, hi)?;
        Ok(Self {
            lo,
            hi,
            side,
            shift: 0,
            rule: Rule::Runs(Arc::new(normalize_blocks(blocks)?)),
        })
    }

    pub fn dense(side: Side, offset: Index, data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::domain("empty data"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("non-finite sequence value"));
        }
        let hi = offset + data.len() as Index - 1;
        check_window(side, offset, hi)?;
        Ok(Self {
            lo: offset,
            hi,
            side,
            shift: 0,
            rule: Rule::Dense {
                offset,
                data: Arc::new(data),
            },
        })
    }

    /// `x_n = pattern[n mod len]`.
    pub fn periodic(side: Side, lo: Index, hi: Index, pattern: Vec<f64>) -> Result<Self> {
        check_window(side, lo, hi)?;
        if pattern.is_empty() {
            return Err(Error::domain("empty period"));
        }
        Ok(Self {
            lo,
            hi,
            side,
            shift: 0,
            rule: Rule::Periodic(Arc::new(pattern)),
        })
    }

    pub fn formula<F>(side: Side, lo: Index, hi: Index, f: F) -> Result<Self>
    where
        F: Fn(Index) -> f64 + Send + Sync + 'static,
    {
        check_window(side, lo, hi)?;
        Ok(Self {
            lo,
            hi,
            side,
            shift: 0,
            rule: Rule::Formula(Arc::new(f)),
        })
    }

    pub fn lazy(side: Side, lo: Index, hi: Index, rule: Arc<dyn LazyRule>) -> Result<Self> {
        check_window(side, lo, hi)?;
        Ok(Self {
            lo,
            hi,
            side,
            shift: 0,
            rule: Rule::Lazy(rule),
        })
    }

    pub fn constant(side: Side, lo: Index, hi: Index, c: f64) -> Result<Self> {
        Self::runs(side, lo, hi, vec![Block { start: lo, len: hi - lo + 1, value: c }])
    }

    /// Indicator of the whole window.
    pub fn chi(side: Side, lo: Index, hi: Index) -> Result<Self> {
        Self::constant(side, lo, hi, 1.0)
    }

    pub fn delta(side: Side, lo: Index, hi: Index, at: Index) -> Result<Self> {
        Self::runs(side, lo, hi, vec![Block { start: at, len: 1, value: 1.0 }])
    }

    /// `(-1)^n`.
    pub fn alt(side: Side, lo: Index, hi: Index) -> Result<Self> {
        Self::periodic(side, lo, hi, vec![1.0, -1.0])
    }

    /// Indicator of `[4^j, 2*4^j)` for `j >= 1`, on `[0, hi]`.
    pub fn y_dixcor(hi: Index) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut s: Index = 4;
        while s <= hi {
            blocks.push(Block { start: s, len: s, value: 1.0 });
            match s.checked_mul(4) {
                Some(t) => s = t,
                None => break,
            }
        }
        Self::runs(Side::ZPlus, 0, hi, blocks)
    }

    pub fn lo(&self) -> Index {
        self.lo
    }

    pub fn hi(&self) -> Index {
        self.hi
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn window(&self) -> (Index, Index) {
        (self.lo, self.hi)
    }

    pub fn len(&self) -> Index {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_structured(&self) -> bool {
        matches!(self.rule, Rule::Runs(_) | Rule::Periodic(_))
    }

    fn raw(&self, m: Index) -> f64 {
        match &self.rule {
            Rule::Runs(blocks) => {
                let i = runs_first_at_or_after(blocks, m);
                match blocks.get(i) {
                    Some(b) if b.start <= m => b.value,
                    _ => 0.0,
                }
            }
            Rule::Dense { offset, data } => {
                let k = m - offset;
                if k >= 0 && k < data.len() as Index {
                    data[k as usize]
                } else {
                    0.0
                }
            }
            Rule::Periodic(p) => p[m.rem_euclid(p.len() as Index) as usize],
            Rule::Formula(f) => f(m),
            Rule::Lazy(r) => r.value(m),
        }
    }

    /// `x_n` without the window check.
    pub fn value(&self, n: Index) -> f64 {
        self.raw(n - self.shift)
    }

    pub fn get(&self, n: Index) -> Result<f64> {
        self.check_in(n, n)?;
        Ok(self.value(n))
    }

    fn check_in(&self, a: Index, b: Index) -> Result<()> {
        if a > b {
            return Err(Error::domain(format!("empty window [{a}, {b}]")));
        }
        if a < self.lo || b > self.hi {
            return Err(Error::domain(format!(
                "window [{a}, {b}] outside the sequence window [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Values on `[a, b]`.
    pub fn values(&self, a: Index, b: Index) -> Result<Vec<f64>> {
        self.check_in(a, b)?;
        if b - a >= MATERIALIZE_LIMIT {
            return Err(Error::domain(format!(
                "window of length {} exceeds the materialization limit",
                b - a + 1
            )));
        }
        Ok((a..=b).map(|n| self.value(n)).collect())
    }

    /// Runs translated to sequence indices and clipped to `[a, b]`, for
    /// run-length rules.
    pub fn runs_in(&self, a: Index, b: Index) -> Option<Vec<Block>> {
        let Rule::Runs(blocks) = &self.rule else {
            return None;
        };
        let (ra, rb) = (a - self.shift, b - self.shift);
        let mut out = Vec::new();
        for blk in &blocks[runs_first_at_or_after(blocks, ra)..] {
            if blk.start > rb {
                break;
            }
            let s = blk.start.max(ra);
            let e = blk.end().min(rb);
            out.push(Block {
                start: s + self.shift,
                len: e - s + 1,
                value: blk.value,
            });
        }
        Some(out)
    }

    /// Same rule on a different window.
    pub fn restrict(&self, lo: Index, hi: Index) -> Result<Self> {
        check_window(self.side, lo, hi)?;
        let mut s = self.clone();
        s.lo = lo;
        s.hi = hi;
        Ok(s)
    }

    /// Dense copy of the window.
    pub fn to_dense(&self) -> Result<Self> {
        let v = self.values(self.lo, self.hi)?;
        Self::dense(self.side, self.lo, v)
    }

    /// Pointwise map. Runs are mapped blockwise when `f(0) == 0`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        if f(0.0) == 0.0 {
            if let Some(blocks) = self.runs_in(self.lo, self.hi) {
                let mapped = blocks
                    .into_iter()
                    .map(|b| Block { value: f(b.value), ..b })
                    .collect();
                return Self::runs(self.side, self.lo, self.hi, mapped);
            }
        }
        let v = self.values(self.lo, self.hi)?;
        Self::dense(self.side, self.lo, v.into_iter().map(f).collect())
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// Pointwise `f(x_n, y_n)` on the common window.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Result<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        check_window(self.side, lo, hi)?;
        if f(0.0, 0.0) == 0.0 {
            if let (Some(a), Some(b)) = (self.runs_in(lo, hi), other.runs_in(lo, hi)) {
                let mut cuts: Vec<Index> = Vec::with_capacity(2 * (a.len() + b.len()));
                for blk in a.iter().chain(b.iter()) {
                    cuts.push(blk.start);
                    cuts.push(blk.end() + 1);
                }
                cuts.sort_unstable();
                cuts.dedup();
                let mut blocks = Vec::with_capacity(cuts.len());
                for w in cuts.windows(2) {
                    let v = f(self.value(w[0]), other.value(w[0]));
                    blocks.push(Block { start: w[0], len: w[1] - w[0], value: v });
                }
                return Self::runs(self.side, lo, hi, blocks);
            }
        }
        let v: Vec<f64> = (lo..=hi)
            .map(|n| f(self.value(n), other.value(n)))
            .collect::<Vec<_>>();
        if hi - lo >= MATERIALIZE_LIMIT {
            return Err(Error::domain("window exceeds the materialization limit"));
        }
        Self::dense(self.side, lo, v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `sum_{k=a}^{b} x_k`.
    pub fn block_sum(&self, a: Index, b: Index) -> Result<f64> {
        self.check_in(a, b)?;
        let (ra, rb) = (a - self.shift, b - self.shift);
        let mut s = CompensatedSum::new();
        match &self.rule {
            Rule::Runs(blocks) => {
                for blk in &blocks[runs_first_at_or_after(blocks, ra)..] {
                    if blk.start > rb {
                        break;
                    }
                    let n = blk.end().min(rb) - blk.start.max(ra) + 1;
                    s.add(n as f64 * blk.value);
                }
            }
            Rule::Periodic(p) => {
                let l = p.len() as Index;
                let total = rb - ra + 1;
                let full = total / l;
                if full > 0 {
                    let per: f64 = p.iter().sum();
                    s.add(full as f64 * per);
                }
                for m in (ra + full * l)..=rb {
                    s.add(p[m.rem_euclid(l) as usize]);
                }
            }
            _ => {
                if rb - ra >= MATERIALIZE_LIMIT {
                    return Err(Error::domain(
                        "block sum over an unstructured window beyond the materialization limit",
                    ));
                }
                for m in ra..=rb {
                    s.add(self.raw(m));
                }
            }
        }
        Ok(s.value())
    }

    /// Points `c` in `(a, b]` where `x_c` may differ from `x_{c-1}`, for
    /// piecewise-constant rules.
    fn change_points(&self, a: Index, b: Index) -> Option<Vec<Index>> {
        let Rule::Runs(blocks) = &self.rule else {
            return None;
        };
        let (ra, rb) = (a - self.shift, b - self.shift);
        let mut out = Vec::new();
        let start = runs_first_at_or_after(blocks, ra);
        for blk in &blocks[start..] {
            if blk.start > rb {
                break;
            }
            for c in [blk.start, blk.end() + 1] {
                if c > ra && c <= rb {
                    out.push(c + self.shift);
                }
            }
        }
        Some(out)
    }

    /// `(inf, sup)` of `x` on `[a, b]`.
    pub fn extremes(&self, a: Index, b: Index) -> Result<(f64, f64)> {
        self.check_in(a, b)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut see = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        match &self.rule {
            Rule::Runs(_) => {
                see(self.value(a));
                for c in self.change_points(a, b).unwrap() {
                    see(self.value(c));
                }
            }
            Rule::Periodic(p) if b - a + 1 >= p.len() as Index => {
                p.iter().for_each(|&v| see(v));
            }
            Rule::Lazy(r) => {
                see(self.value(a));
                see(self.value(b));
                for c in r.breakpoints(a - self.shift, b - self.shift) {
                    let c = c + self.shift;
                    if c >= a && c <= b {
                        see(self.value(c));
                    }
                    if c - 1 >= a && c - 1 <= b {
                        see(self.value(c - 1));
                    }
                }
            }
            _ => {
                if b - a >= MATERIALIZE_LIMIT {
                    return Err(Error::domain(
                        "extremes over an unstructured window beyond the materialization limit",
                    ));
                }
                for n in a..=b {
                    see(self.value(n));
                }
            }
        }
        Ok((lo, hi))
    }

    /// `(inf, sup)` of the averages `A_p(n)` over starts `n` in `[s, e]`.
    pub fn average_extremes(&self, s: Index, e: Index, p: Index) -> Result<(f64, f64)> {
        if p < 1 {
            return Err(Error::domain("average length must be >= 1"));
        }
        self.check_in(s, e + p - 1)?;
        let pf = p as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match &self.rule {
            Rule::Runs(_) => {
                // A_p is affine between starts where n or n+p crosses a change
                let mut cand = vec![s, e];
                for c in self.change_points(s, e + p).unwrap() {
                    for n in [c - 1, c, c - p, c - p + 1] {
                        if n >= s && n <= e {
                            cand.push(n);
                        }
                    }
                }
                cand.sort_unstable();
                cand.dedup();
                for n in cand {
                    let v = self.block_sum(n, n + p - 1)? / pf;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            Rule::Periodic(pat) => {
                let l = pat.len() as Index;
                let last = if e - s + 1 >= l { s + l - 1 } else { e };
                for n in s..=last {
                    let v = self.block_sum(n, n + p - 1)? / pf;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            _ => {
                if e + p - s >= MATERIALIZE_LIMIT {
                    return Err(Error::domain(
                        "window averages over an unstructured window beyond the materialization limit",
                    ));
                }
                let mut prefix = Vec::with_capacity((e + p - s + 1) as usize);
                let mut acc = CompensatedSum::new();
                prefix.push(0.0);
                for n in s..e + p {
                    acc.add(self.value(n));
                    prefix.push(acc.value());
                }
                for i in 0..=(e - s) as usize {
                    let v = (prefix[i + p as usize] - prefix[i]) / pf;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        Ok((lo, hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Converged,
    Widening,
    Inconclusive,
}

/// Interval estimate of a limit set over a finite window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueEnvelope {
    pub lo: f64,
    pub hi: f64,
    pub window: (Index, Index),
    /// Inner width minus outer width; negative when narrowing.
    pub trend: f64,
    pub status: Status,
}

impl ValueEnvelope {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `self` inside `other` up to `slack` at either end.
    pub fn within(&self, other: &ValueEnvelope, slack: f64) -> bool {
        self.lo >= other.lo - slack && self.hi <= other.hi + slack
    }

    /// Largest endpoint distance.
    pub fn distance(&self, other: &ValueEnvelope) -> f64 {
        (self.lo - other.lo).abs().max((self.hi - other.hi).abs())
    }

    /// Envelope of sampled values; the inner window is the second half.
    pub fn from_samples(
        samples: &[(Index, f64)],
        cfg: &EnvelopeConfig,
    ) -> Result<ValueEnvelope> {
        if samples.is_empty() {
            return Err(Error::domain("no samples"));
        }
        let span = |s: &[(Index, f64)]| {
            s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(_, v)| {
                (l.min(v), h.max(v))
            })
        };
        let (lo, hi) = span(samples);
        let (ilo, ihi) = span(&samples[samples.len() / 2..]);
        let (wo, wi) = (hi - lo, ihi - ilo);
        Ok(ValueEnvelope {
            lo,
            hi,
            window: (samples[0].0, samples[samples.len() - 1].0),
            trend: wi - wo,
            status: cfg.classify(wo, wi),
        })
    }
}

/// Thresholds turning nested-window widths into a [`Status`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeConfig {
    /// Inner width at most `shrink` times the outer width counts as converging.
    pub shrink: f64,
    /// Inner width at least `flat` times the outer width counts as not shrinking.
    pub flat: f64,
    /// Widths below this are treated as zero.
    pub floor: f64,
}

impl Default for EnvelopeConfig {
    fn default() -> Self {
        Self {
            shrink: 0.9,
            flat: 0.999,
            floor: 1e-12,
        }
    }
}

impl EnvelopeConfig {
    pub fn classify(&self, outer: f64, inner: f64) -> Status {
        if inner <= self.floor || inner <= self.shrink * outer {
            Status::Converged
        } else if inner >= self.flat * outer {
            Status::Widening
        } else {
            Status::Inconclusive
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Inconclusive,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Evidence {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<ValueEnvelope>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Evidence {
    pub fn with_envelope(env: ValueEnvelope) -> Self {
        Self {
            envelope: Some(env),
            ..Self::default()
        }
    }

    pub fn metric(mut self, k: &str, v: f64) -> Self {
        self.metrics.insert(k.to_string(), v);
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub answer: Answer,
    pub value: Option<f64>,
    pub evidence: Evidence,
}

impl Verdict {
    pub fn is_yes(&self) -> bool {
        self.answer == Answer::Yes
    }
}

/// `o_n = sup_{n <= k <= hi} |x_k|` for `n` in the window.
///
/// The supremum is taken over the finite horizon `hi`; it is the true ordering
/// number whenever `x` vanishes beyond the sequence window.
pub fn ordering_numbers(x: &DyadicSequence, window: (Index, Index)) -> Result<DyadicSequence> {
    let (a, b) = window;
    x.check_in(a, b)?;
    let top = x.hi;
    if let Some(mut runs) = x.runs_in(a, top) {
        // backward running maximum over runs and the zero gaps between them
        let mut out = Vec::with_capacity(runs.len());
        let mut best = 0.0f64;
        let mut next_start = top + 1;
        runs.reverse();
        for blk in runs {
            if blk.end() + 1 < next_start {
                out.push(Block { start: blk.end() + 1, len: next_start - blk.end() - 1, value: best });
            }
            best = best.max(blk.value.abs());
            out.push(Block { start: blk.start, len: blk.len, value: best });
            next_start = blk.start;
        }
        if next_start > a {
            out.push(Block { start: a, len: next_start - a, value: best });
        }
        return DyadicSequence::runs(x.side, a, b, out);
    }
    if let Rule::Periodic(p) = &x.rule {
        let l = p.len() as Index;
        if top - a + 1 > 2 * l {
            let m = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tail_from = top - l + 1;
            let mut blocks = vec![Block { start: a, len: tail_from - a, value: m }];
            let mut best = 0.0f64;
            let mut tail = Vec::new();
            for n in (tail_from..=top).rev() {
                best = best.max(x.value(n).abs());
                tail.push(Block { start: n, len: 1, value: best });
            }
            blocks.extend(tail);
            return DyadicSequence::runs(x.side, a, b, blocks);
        }
    }
    let v = x.values(a, top)?;
    let mut o = vec![0.0; v.len()];
    let mut best = 0.0f64;
    for i in (0..v.len()).rev() {
        best = best.max(v[i].abs());
        o[i] = best;
    }
    o.truncate((b - a + 1) as usize);
    DyadicSequence::dense(x.side, a, o)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftDir {
    /// `(S_+ x)_n = x_{n-1}`.
    Plus,
    /// `(S_- x)_n = x_{n+1}`.
    Minus,
}

/// Index shift. On `Z_+` the forward shift prepends a zero and the backward
/// shift drops the first entry.
pub fn shift(x: &DyadicSequence, dir: ShiftDir) -> Result<DyadicSequence> {
    let d: Index = match dir {
        ShiftDir::Plus => 1,
        ShiftDir::Minus => -1,
    };
    let mut s = x.clone();
    s.shift += d;
    match (x.side, dir) {
        (Side::ZPlus, ShiftDir::Plus) => {
            s.hi += 1;
            if x.lo > 0 {
                s.lo += 1;
            }
            if x.lo == 0 && x.value(-1) != 0.0 {
                // rule extends below 0: rebuild so index 0 reads zero
                let mut v = vec![0.0];
                v.extend(x.values(x.lo, x.hi)?);
                return DyadicSequence::dense(Side::ZPlus, 0, v);
            }
        }
        (Side::ZPlus, ShiftDir::Minus) => {
            if x.hi == x.lo && x.lo == 0 {
                return Err(Error::domain("shift leaves an empty sequence"));
            }
            s.hi -= 1;
            if x.lo > 0 {
                s.lo -= 1;
            }
        }
        (Side::TwoSided, _) => {
            s.lo += d;
            s.hi += d;
        }
    }
    Ok(s)
}

/// `(1/p) sum_{k=n}^{n+p-1} x_k`.
pub fn window_average(x: &DyadicSequence, n: Index, p: Index) -> Result<f64> {
    if p < 1 {
        return Err(Error::domain("average length must be >= 1"));
    }
    Ok(x.block_sum(n, n + p - 1)? / p as f64)
}

/// `[inf, sup]` of `x` over the window, with a nested-window trend.
pub fn tail_envelope(x: &DyadicSequence, window: (Index, Index)) -> Result<ValueEnvelope> {
    tail_envelope_with(x, window, &EnvelopeConfig::default())
}

pub fn tail_envelope_with(
    x: &DyadicSequence,
    window: (Index, Index),
    cfg: &EnvelopeConfig,
) -> Result<ValueEnvelope> {
    let (a, b) = window;
    x.check_in(a, b)?;
    let (lo, hi) = x.extremes(a, b)?;
    let mid = a + (b - a) / 2;
    let (ilo, ihi) = x.extremes(mid, b)?;
    let (wo, wi) = (hi - lo, ihi - ilo);
    Ok(ValueEnvelope {
        lo,
        hi,
        window,
        trend: wi - wo,
        status: cfg.classify(wo, wi),
    })
}

/// Banach-limit value set estimated by window averages.
///
/// Evaluated at `p_max`; the trend compares `p_max` with `p_max/4`, and the
/// status combines that with a nested-window comparison of the start range.
pub fn banach_envelope(
    x: &DyadicSequence,
    p_max: Index,
    window: (Index, Index),
) -> Result<ValueEnvelope> {
    banach_envelope_with(x, p_max, window, &EnvelopeConfig::default())
}

pub fn banach_envelope_with(
    x: &DyadicSequence,
    p_max: Index,
    window: (Index, Index),
    cfg: &EnvelopeConfig,
) -> Result<ValueEnvelope> {
    let (a, b) = window;
    if p_max < 1 {
        return Err(Error::domain("p_max must be >= 1"));
    }
    if b - a + 1 < 2 * p_max {
        return Err(Error::domain(format!(
            "window [{a}, {b}] too short for p_max = {p_max}: need length >= {}",
            2 * p_max
        )));
    }
    x.check_in(a, b)?;
    let width_at = |p: Index| -> Result<f64> {
        let (l, h) = x.average_extremes(a, b - p + 1, p)?;
        Ok(h - l)
    };
    let last = b - p_max + 1;
    let (lo, hi) = x.average_extremes(a, last, p_max)?;
    let mid = a + (last - a) / 2;
    let (ilo, ihi) = x.average_extremes(mid, last, p_max)?;
    let w = hi - lo;
    let w_coarse = width_at((p_max / 4).max(1))?;
    let nested = cfg.classify(w, ihi - ilo);
    let by_p = cfg.classify(w_coarse, w);
    let status = match (nested, by_p) {
        (Status::Converged, _) | (_, Status::Converged) => Status::Converged,
        (Status::Widening, Status::Widening) => Status::Widening,
        _ => Status::Inconclusive,
    };
    Ok(ValueEnvelope {
        lo,
        hi,
        window,
        trend: w - w_coarse,
        status,
    })
}

/// Almost convergence verdict from the Banach envelope.
pub fn almost_convergent(
    x: &DyadicSequence,
    p_max: Index,
    tol: f64,
    window: (Index, Index),
) -> Result<Verdict> {
    let env = banach_envelope(x, p_max, window)?;
    let w = env.width();
    let answer = if w <= tol && env.status == Status::Converged {
        Answer::Yes
    } else if w > tol && env.status == Status::Widening {
        Answer::No
    } else {
        Answer::Inconclusive
    };
    let value = (answer == Answer::Yes).then(|| env.midpoint());
    let evidence = Evidence::with_envelope(env)
        .metric("width", w)
        .metric("tol", tol)
        .metric("p_max", p_max as f64);
    Ok(Verdict { answer, value, evidence })
}

/// `sup_n |A_p(n)|` over starts in the window; small for `(I - S_+)`-images.
pub fn invariance_residual(x: &DyadicSequence, p: Index, window: (Index, Index)) -> Result<f64> {
    let (a, b) = window;
    if b - a + 1 < p {
        return Err(Error::domain(format!(
            "window [{a}, {b}] shorter than the average length {p}"
        )));
    }
    let (lo, hi) = x.average_extremes(a, b - p + 1, p)?;
    Ok(lo.abs().max(hi.abs()))
}
