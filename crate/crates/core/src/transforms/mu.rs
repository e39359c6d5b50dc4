//! Decreasing rearrangements `mu(t)` on `(0, inf)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::seqcore::Index;
use crate::weights::Weight;

/// Largest number of explicit steps ever built from a structured `mu`.
pub const STEP_LIMIT: usize = 1 << 22;

/// `mu(t) = scale * g(t + shift)` from the last breakpoint up to `until`.
#[derive(Clone, Debug)]
pub struct Tail {
    pub scale: f64,
    pub weight: Weight,
    pub shift: Ext,
    pub until: Option<Ext>,
}

#[derive(Clone, Debug)]
pub(crate) struct StepMu {
    /// `breaks[0]` is the origin; `(0, origin)` is an unspecified dominant head.
    pub breaks: Vec<Ext>,
    pub values: Vec<Ext>,
    pub tail: Option<Tail>,
}

/// One run of the compressed dyadic layout: coefficient `c` on dyadic
/// indices `a..=b`, shifted left by `rho * 2^a`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MuRun {
    pub a: Index,
    pub b: Index,
    pub c: f64,
    pub rho: f64,
}

/// Rearrangement of `D_w x` when the block values `c_j w(2^n)` are already
/// nonincreasing, so that rearranging only closes the zero gaps.
#[derive(Clone, Debug)]
pub(crate) struct RunsMu {
    pub weight: Option<Weight>,
    /// Lowest dyadic index of a two-sided source; `(0, 2^lo)` is the head.
    pub head: Option<Index>,
    pub runs: Vec<MuRun>,
}

impl RunsMu {
    pub fn new(weight: Option<Weight>, head: Option<Index>, runs: &[(Index, Index, f64)]) -> Self {
        let mut out = Vec::with_capacity(runs.len());
        let mut rho = match head {
            Some(lo) => 1.0 - ((lo - runs[0].0) as f64).exp2(),
            None => 1.0,
        };
        for (j, &(a, b, c)) in runs.iter().enumerate() {
            if j > 0 {
                let (pa, pb, _) = runs[j - 1];
                // R_{j} = 2^{a_j} - 2^{b_{j-1}+1} + R_{j-1}
                rho = 1.0 - ((pb + 1 - a) as f64).exp2() + rho * ((pa - a) as f64).exp2();
            }
            out.push(MuRun { a, b, c, rho: rho.clamp(0.0, 1.0) });
        }
        RunsMu { weight, head, runs: out }
    }

    /// `ln(w(2^n))` for the synthesis weight, `0` for the unit weight.
    pub fn ln_w(&self, n: Index) -> f64 {
        match &self.weight {
            Some(w) => w.ln_dyadic_weight(n) - n as f64 * std::f64::consts::LN_2,
            None => 0.0,
        }
    }

    fn block_value(&self, run: &MuRun, n: Index) -> Ext {
        Ext::exp(self.ln_w(n)).scale(run.c)
    }

    fn shift_of(run: &MuRun) -> Ext {
        Ext::pow2_i128(run.a).scale(run.rho)
    }

    /// Blocks `(start, end, value)` meeting `[lo, hi)`, in order.
    fn blocks_between(&self, lo: Ext, hi: Ext) -> Vec<(Ext, Ext, Ext)> {
        let mut out = Vec::new();
        let nlo = if lo > Ext::ZERO { lo.log2().floor() as Index - 1 } else { Index::MIN };
        let nhi = hi.log2().ceil() as Index + 1;
        for run in &self.runs {
            let from = run.a.max(nlo);
            // the first block of a run may start near 0 whatever its index
            let to = run.b.min(nhi.max(run.a));
            let r = Self::shift_of(run);
            let mut n = from;
            while n <= to {
                let s = Ext::pow2_i128(n) - r;
                let e = Ext::pow2_i128(n + 1) - r;
                if e > lo && s <= hi {
                    out.push((s, e, self.block_value(run, n)));
                }
                n += 1;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub(crate) enum MuRepr {
    Steps(Arc<StepMu>),
    Runs(Arc<RunsMu>),
}

/// A nonincreasing right-continuous function on `(origin, inf)`.
#[derive(Clone, Debug)]
pub struct MuFunction {
    pub(crate) repr: MuRepr,
}

impl MuFunction {
    /// Steps `values[i]` on `[breaks[i], breaks[i+1])`, then an optional tail.
    pub fn steps(breaks: Vec<Ext>, values: Vec<Ext>, tail: Option<Tail>) -> Result<Self> {
        if breaks.len() != values.len() + 1 {
            return Err(Error::domain("need one more breakpoint than values"));
        }
        if breaks[0].is_sign_negative() || breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("breakpoints must be nonnegative and increasing"));
        }
        if values.iter().any(|v| v.is_sign_negative() || !v.is_finite()) {
            return Err(Error::domain("mu values must be nonnegative"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::domain("mu must be nonincreasing"));
        }
        if let Some(t) = &tail {
            if t.scale < 0.0 {
                return Err(Error::domain("tail scale must be nonnegative"));
            }
            let start = breaks[breaks.len() - 1];
            let first = t.weight.eval_ext(start + t.shift).scale(t.scale);
            if let Some(v) = values.last() {
                if first > *v * Ext::from_f64(1.0 + 1e-12) {
                    return Err(Error::domain("tail starts above the last step"));
                }
            }
        }
        Ok(MuFunction {
            repr: MuRepr::Steps(Arc::new(StepMu { breaks, values, tail })),
        })
    }

    /// Step function from plain `f64` breakpoints and values.
    pub fn from_steps(breaks: &[f64], values: &[f64]) -> Result<Self> {
        Self::steps(
            breaks.iter().map(|&b| Ext::from_f64(b)).collect(),
            values.iter().map(|&v| Ext::from_f64(v)).collect(),
            None,
        )
    }

    /// `mu(t) = scale * g(t)`.
    pub fn from_weight(g: &Weight, scale: f64) -> Result<Self> {
        Self::steps(
            vec![Ext::ZERO],
            vec![],
            Some(Tail { scale, weight: g.clone(), shift: Ext::ZERO, until: None }),
        )
    }

    /// Singular value function of `diag(values)`.
    pub fn diag(values: &[f64]) -> Result<Self> {
        let mut v: Vec<f64> = values.iter().map(|x| x.abs()).filter(|&x| x > 0.0).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let breaks = (0..=v.len()).map(|i| Ext::from_f64(i as f64)).collect();
        Self::steps(breaks, v.into_iter().map(Ext::from_f64).collect(), None)
    }

    pub(crate) fn from_runs(r: RunsMu) -> Self {
        MuFunction { repr: MuRepr::Runs(Arc::new(r)) }
    }

    pub fn origin(&self) -> Ext {
        match &self.repr {
            MuRepr::Steps(s) => s.breaks[0],
            MuRepr::Runs(r) => match r.head {
                Some(lo) => Ext::pow2_i128(lo),
                None => Ext::ZERO,
            },
        }
    }

    pub fn is_structured(&self) -> bool {
        matches!(self.repr, MuRepr::Runs(_))
    }

    /// End of the support, `None` when unbounded.
    pub fn support_end(&self) -> Option<Ext> {
        match &self.repr {
            MuRepr::Steps(s) => match &s.tail {
                None => Some(s.breaks[s.breaks.len() - 1]),
                Some(t) => t.until,
            },
            MuRepr::Runs(r) => r.runs.last().map(|run| {
                Ext::pow2_i128(run.b + 1) - RunsMu::shift_of(run)
            }),
        }
    }

    /// `mu(t)` for `t >= origin`.
    pub fn value_at(&self, t: Ext) -> Ext {
        match &self.repr {
            MuRepr::Steps(s) => {
                let i = s.breaks.partition_point(|b| *b <= t);
                if i == 0 {
                    return s.values.first().copied().unwrap_or(Ext::ZERO);
                }
                if i < s.breaks.len() {
                    return s.values[i - 1];
                }
                match &s.tail {
                    Some(tail) if tail.until.map_or(true, |u| t < u) => {
                        tail.weight.eval_ext(t + tail.shift).scale(tail.scale)
                    }
                    _ => Ext::ZERO,
                }
            }
            MuRepr::Runs(r) => {
                r.blocks_between(t, t)
                    .into_iter()
                    .find(|(s, e, _)| *s <= t && t < *e)
                    .map(|b| b.2)
                    .unwrap_or(Ext::ZERO)
            }
        }
    }

    /// `int_a^b mu` for `origin <= a <= b`.
    pub fn integral(&self, a: Ext, b: Ext) -> Result<Ext> {
        if a < self.origin() {
            return Err(Error::domain("integral below the origin of mu"));
        }
        if b <= a {
            return Ok(Ext::ZERO);
        }
        let mut acc = Ext::ZERO;
        match &self.repr {
            MuRepr::Steps(s) => {
                let first = s.breaks.partition_point(|x| *x <= a).saturating_sub(1);
                for i in first..s.values.len() {
                    let (l, r) = (s.breaks[i], s.breaks[i + 1]);
                    if l >= b {
                        break;
                    }
                    let (lo, hi) = (l.max(a), r.min(b));
                    if hi > lo {
                        acc = acc + (hi - lo) * s.values[i];
                    }
                }
                if let Some(t) = &s.tail {
                    let start = s.breaks[s.breaks.len() - 1].max(a);
                    let end = t.until.map_or(b, |u| u.min(b));
                    if end > start {
                        let v = t.weight.integral(start + t.shift, end + t.shift)?;
                        acc = acc + v.scale(t.scale);
                    }
                }
            }
            MuRepr::Runs(r) => {
                for (s, e, v) in r.blocks_between(a, b) {
                    let (lo, hi) = (s.max(a), e.min(b));
                    if hi > lo {
                        acc = acc + (hi - lo) * v;
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Explicit steps, building at most [`STEP_LIMIT`] blocks.
    pub fn to_steps(&self) -> Result<MuFunction> {
        match &self.repr {
            MuRepr::Steps(_) => Ok(self.clone()),
            MuRepr::Runs(r) => {
                let total: Index = r.runs.iter().map(|x| x.b - x.a + 1).sum();
                if total > STEP_LIMIT as Index {
                    return Err(Error::domain(format!(
                        "{total} steps exceed the step limit"
                    )));
                }
                let mut breaks = vec![self.origin()];
                let mut values = Vec::with_capacity(total as usize);
                for run in &r.runs {
                    let sh = RunsMu::shift_of(run);
                    for n in run.a..=run.b {
                        values.push(r.block_value(run, n));
                        breaks.push(Ext::pow2_i128(n + 1) - sh);
                    }
                }
                MuFunction::steps(breaks, values, None)
            }
        }
    }

    /// Explicit steps `(start, end, value)` meeting `[origin, upto)` and the
    /// tail descriptor, if any.
    pub fn pieces_until(&self, upto: Ext) -> Result<(Vec<(Ext, Ext, Ext)>, Option<(Ext, Tail)>)> {
        match &self.repr {
            MuRepr::Steps(s) => {
                let mut out = Vec::new();
                for i in 0..s.values.len() {
                    if s.breaks[i] >= upto {
                        break;
                    }
                    out.push((s.breaks[i], s.breaks[i + 1], s.values[i]));
                }
                let tail = s.tail.clone().map(|t| (s.breaks[s.breaks.len() - 1], t));
                Ok((out, tail))
            }
            MuRepr::Runs(r) => Ok((r.blocks_between(self.origin(), upto), None)),
        }
    }

    pub fn scaled(&self, c: f64) -> Result<MuFunction> {
        if c < 0.0 {
            return Err(Error::domain("negative scale"));
        }
        match &self.repr {
            MuRepr::Steps(s) => MuFunction::steps(
                s.breaks.clone(),
                s.values.iter().map(|v| v.scale(c)).collect(),
                s.tail.clone().map(|t| Tail { scale: t.scale * c, ..t }),
            ),
            MuRepr::Runs(r) => {
                let mut r2 = (**r).clone();
                r2.runs.iter_mut().for_each(|x| x.c *= c);
                Ok(MuFunction::from_runs(r2))
            }
        }
    }
}
