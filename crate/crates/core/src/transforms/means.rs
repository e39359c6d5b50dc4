//! Summation methods on one-sided sequences: the weighted Cesaro mean `C_g`,
//! the logarithmic mean `M`, the inverse of the plain Cesaro mean and the
//! weight map `N`.

use std::f64::consts::LN_2;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::num::{harmonic_range, logaddexp, CompensatedSum};
use crate::seqcore::{ordering_numbers, Block, DyadicSequence, Index, LazyRule, Side, MATERIALIZE_LIMIT};
use crate::weights::Weight;

fn check_one_sided(x: &DyadicSequence, window: (Index, Index)) -> Result<()> {
    if x.side() != Side::ZPlus || x.lo() != 0 {
        return Err(Error::domain("mean needs a one-sided sequence starting at index 0"));
    }
    let (a, b) = window;
    if a < 0 || b < a || b > x.hi() {
        return Err(Error::domain(format!(
            "window [{a}, {b}] outside [0, {}]",
            x.hi()
        )));
    }
    Ok(())
}

/// Runs of `x` over `[from, b]` with the zero gaps filled in.
fn segments(x: &DyadicSequence, from: Index, b: Index) -> Option<Vec<Block>> {
    let runs = x.runs_in(from, b)?;
    let mut out = Vec::with_capacity(2 * runs.len() + 1);
    let mut next = from;
    for r in runs {
        if r.start > next {
            out.push(Block { start: next, len: r.start - next, value: 0.0 });
        }
        next = r.end() + 1;
        out.push(r);
    }
    if next <= b {
        out.push(Block { start: next, len: b - next + 1, value: 0.0 });
    }
    Some(out)
}

#[derive(Clone, Copy)]
struct Seg {
    start: Index,
    value: f64,
    /// Weighted case: `ln W_(start-1)`; log case: numerator before `start`.
    acc: f64,
    /// Mean just before `start` (weighted case only).
    mean: f64,
}

enum MeanKind {
    Weighted(Weight),
    Log,
}

/// Mean of a run-length sequence, evaluated per segment in closed form.
struct MeanImage {
    kind: MeanKind,
    x0: f64,
    segs: Vec<Seg>,
}

impl MeanImage {
    fn seg_at(&self, n: Index) -> &Seg {
        let i = self.segs.partition_point(|s| s.start <= n);
        &self.segs[i.max(1) - 1]
    }
}

impl LazyRule for MeanImage {
    fn value(&self, n: Index) -> f64 {
        let s = self.seg_at(n);
        match &self.kind {
            MeanKind::Weighted(g) => {
                let ld = g.ln_dyadic_weight_sum(s.start, n);
                let frac = (ld - logaddexp(s.acc, ld)).exp();
                s.mean + (s.value - s.mean) * frac
            }
            MeanKind::Log => {
                if n == 0 {
                    return self.x0;
                }
                let num = s.acc + s.value * harmonic_range(s.start, n);
                num / ((n + 1) as f64).ln()
            }
        }
    }

    fn breakpoints(&self, a: Index, b: Index) -> Vec<Index> {
        let i = self.segs.partition_point(|s| s.start <= a);
        let mut out = vec![a];
        for s in &self.segs[i..] {
            if s.start > b {
                break;
            }
            out.push(s.start);
        }
        if let MeanKind::Log = self.kind {
            out.push(1);
            out.retain(|&k| k >= a && k <= b);
            out.sort_unstable();
            out.dedup();
        }
        out
    }
}

impl MeanImage {
    /// Values on `[a, b]` by stepping the recurrence from `a`.
    fn fill(&self, a: Index, b: Index) -> Vec<f64> {
        let mut out = Vec::with_capacity((b - a + 1) as usize);
        let mut i = self.segs.partition_point(|s| s.start <= a).max(1) - 1;
        let v = LazyRule::value(self, a);
        out.push(v);
        match &self.kind {
            MeanKind::Weighted(g) => {
                let s = &self.segs[i];
                let mut ln_w = logaddexp(s.acc, g.ln_dyadic_weight_sum(s.start, a));
                let mut mean = v;
                for n in a + 1..=b {
                    if i + 1 < self.segs.len() && self.segs[i + 1].start == n {
                        i += 1;
                    }
                    let lw = g.ln_dyadic_weight(n);
                    ln_w = logaddexp(ln_w, lw);
                    mean += (self.segs[i].value - mean) * (lw - ln_w).exp();
                    out.push(mean);
                }
            }
            MeanKind::Log => {
                let mut num = if a == 0 { 0.0 } else { v * ((a + 1) as f64).ln() };
                for n in a + 1..=b {
                    if i + 1 < self.segs.len() && self.segs[i + 1].start == n {
                        i += 1;
                    }
                    num += self.segs[i].value / n as f64;
                    out.push(num / ((n + 1) as f64).ln());
                }
            }
        }
        out
    }
}

fn image(rule: MeanImage, window: (Index, Index)) -> Result<DyadicSequence> {
    let (a, b) = window;
    if b - a < MATERIALIZE_LIMIT {
        return DyadicSequence::dense(Side::ZPlus, a, rule.fill(a, b));
    }
    DyadicSequence::lazy(Side::ZPlus, a, b, Arc::new(rule))
}

/// `(C_g x)_n = sum_{m<=n} w_m x_m / sum_{m<=n} w_m` with `w_m = 2^m g(2^m)`.
///
/// Weights are accumulated in the log domain. Run-length input stays lazy
/// beyond the materialization limit.
pub fn cesaro_g(x: &DyadicSequence, g: &Weight, window: (Index, Index)) -> Result<DyadicSequence> {
    check_one_sided(x, window)?;
    let (a, b) = window;
    if let Some(blocks) = segments(x, 0, b) {
        let mut segs = Vec::with_capacity(blocks.len());
        let (mut ln_w, mut mean) = (f64::NEG_INFINITY, 0.0);
        for blk in blocks {
            segs.push(Seg { start: blk.start, value: blk.value, acc: ln_w, mean });
            let ld = g.ln_dyadic_weight_sum(blk.start, blk.end());
            let total = logaddexp(ln_w, ld);
            mean += (blk.value - mean) * (ld - total).exp();
            ln_w = total;
        }
        return image(MeanImage { kind: MeanKind::Weighted(g.clone()), x0: x.value(0), segs }, window);
    }
    if b >= MATERIALIZE_LIMIT {
        return Err(Error::domain("weighted mean of an unstructured sequence beyond the materialization limit"));
    }
    let mut out = Vec::with_capacity((b - a + 1) as usize);
    let (mut ln_w, mut mean) = (f64::NEG_INFINITY, 0.0);
    for n in 0..=b {
        let lw = g.ln_dyadic_weight(n);
        if !lw.is_finite() {
            return Err(Error::numeric("dyadic weight underflow", lw, 0.0));
        }
        ln_w = logaddexp(ln_w, lw);
        mean += (x.value(n) - mean) * (lw - ln_w).exp();
        if n >= a {
            out.push(mean);
        }
    }
    DyadicSequence::dense(Side::ZPlus, a, out)
}

/// Plain Cesaro mean `(Cx)_n = (n+1)^-1 sum_{k<=n} x_k`.
pub fn cesaro(x: &DyadicSequence, window: (Index, Index)) -> Result<DyadicSequence> {
    check_one_sided(x, window)?;
    let (a, b) = window;
    if x.is_structured() {
        return cesaro_g(x, &Weight::g_pow(1.0)?, window);
    }
    if b >= MATERIALIZE_LIMIT {
        return Err(Error::domain("Cesaro mean beyond the materialization limit"));
    }
    let mut s = CompensatedSum::new();
    let mut out = Vec::with_capacity((b - a + 1) as usize);
    for n in 0..=b {
        s.add(x.value(n));
        if n >= a {
            out.push(s.value() / (n + 1) as f64);
        }
    }
    DyadicSequence::dense(Side::ZPlus, a, out)
}

/// `(Mx)_0 = x_0`, `(Mx)_n = sum_{k=1}^n (x_k / k) / ln(n+1)`.
pub fn log_mean(x: &DyadicSequence, window: (Index, Index)) -> Result<DyadicSequence> {
    check_one_sided(x, window)?;
    let (a, b) = window;
    let x0 = x.value(0);
    if b == 0 {
        return DyadicSequence::dense(Side::ZPlus, 0, vec![x0]);
    }
    if let Some(blocks) = segments(x, 1, b) {
        let mut segs = vec![Seg { start: 0, value: x0, acc: 0.0, mean: 0.0 }];
        let mut num = 0.0;
        for blk in blocks {
            segs.push(Seg { start: blk.start, value: blk.value, acc: num, mean: 0.0 });
            num += blk.value * harmonic_range(blk.start, blk.end());
        }
        return image(MeanImage { kind: MeanKind::Log, x0, segs }, window);
    }
    if b >= MATERIALIZE_LIMIT {
        return Err(Error::domain("log mean of an unstructured sequence beyond the materialization limit"));
    }
    let mut s = CompensatedSum::new();
    let mut out = Vec::with_capacity((b - a + 1) as usize);
    if a == 0 {
        out.push(x0);
    }
    for n in 1..=b {
        s.add(x.value(n) / n as f64);
        if n >= a {
            out.push(s.value() / ((n + 1) as f64).ln());
        }
    }
    DyadicSequence::dense(Side::ZPlus, a, out)
}

/// `(C^-1 x)_n = (n+1) x_n - n x_(n-1)`, with `x_(-1) = 0`.
pub fn cesaro_inverse(x: &DyadicSequence) -> Result<DyadicSequence> {
    let (lo, hi) = x.window();
    if x.side() != Side::ZPlus {
        return Err(Error::domain("Cesaro inverse needs a one-sided sequence"));
    }
    let prev = |n: Index| if n == 0 { 0.0 } else { x.value(n - 1) };
    let term = |n: Index| (n + 1) as f64 * x.value(n) - n as f64 * prev(n);
    if let Some(blocks) = segments(x, lo, hi) {
        let mut out = Vec::with_capacity(2 * blocks.len());
        for blk in blocks {
            // a run is fixed by C^-1 except at its first index
            out.push(Block { start: blk.start, len: 1, value: term(blk.start) });
            if blk.len > 1 {
                out.push(Block { start: blk.start + 1, len: blk.len - 1, value: blk.value });
            }
        }
        return DyadicSequence::runs(Side::ZPlus, lo, hi, out);
    }
    if hi - lo >= MATERIALIZE_LIMIT {
        return Err(Error::domain("Cesaro inverse beyond the materialization limit"));
    }
    DyadicSequence::dense(Side::ZPlus, lo, (lo..=hi).map(term).collect())
}

fn ln_g_pow2(g: &Weight, n: Index) -> f64 {
    g.ln_dyadic_weight(n) - n as f64 * LN_2
}

struct NMap {
    x: DyadicSequence,
    g: Weight,
}

impl LazyRule for NMap {
    fn value(&self, n: Index) -> f64 {
        let v = self.x.value(n);
        if v == 0.0 {
            0.0
        } else {
            v * ln_g_pow2(&self.g, n).exp()
        }
    }

    fn breakpoints(&self, a: Index, b: Index) -> Vec<Index> {
        let mut out = vec![a];
        for blk in self.x.runs_in(a, b).unwrap_or_default() {
            out.extend([blk.start, blk.end(), blk.end() + 1]);
        }
        out.retain(|&k| k >= a && k <= b);
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// `(Nx)_n = g(2^n) x_n`.
pub fn n_map(x: &DyadicSequence, g: &Weight) -> Result<DyadicSequence> {
    let (lo, hi) = x.window();
    let rule = NMap { x: x.clone(), g: g.clone() };
    if hi - lo < MATERIALIZE_LIMIT {
        let mut v = Vec::with_capacity((hi - lo + 1) as usize);
        for n in lo..=hi {
            let y = rule.value(n);
            if x.value(n) != 0.0 && (y == 0.0 || !y.is_finite()) {
                return Err(Error::numeric(
                    "g(2^n) x_n leaves the f64 range",
                    ln_g_pow2(g, n),
                    0.0,
                ));
            }
            v.push(y);
        }
        return DyadicSequence::dense(x.side(), lo, v);
    }
    if x.runs_in(lo, hi).is_none() {
        return Err(Error::domain("N-map of an unstructured sequence beyond the materialization limit"));
    }
    for n in [lo, hi] {
        let l = ln_g_pow2(g, n);
        if !(l.abs() < 700.0) {
            return Err(Error::numeric("g(2^n) leaves the f64 range", l, 0.0));
        }
    }
    DyadicSequence::lazy(x.side(), lo, hi, Arc::new(rule))
}

/// `sup_n o_n(x) / g(2^n)` over the window of `x`.
///
/// `o` and `g(2^n)` are both nonincreasing, so on each constant piece of `o`
/// the ratio peaks at the piece's right end.
pub fn lg_norm(x: &DyadicSequence, g: &Weight) -> Result<f64> {
    let (lo, hi) = x.window();
    let o = ordering_numbers(x, (lo, hi))?;
    let mut best = f64::NEG_INFINITY;
    let mut see = |n: Index, v: f64| {
        if v > 0.0 {
            best = best.max(v.ln() - ln_g_pow2(g, n));
        }
    };
    match o.runs_in(lo, hi) {
        Some(blocks) => blocks.iter().for_each(|b| see(b.end(), b.value)),
        None => {
            for n in lo..=hi {
                see(n, o.value(n));
            }
        }
    }
    if best == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if best > 709.0 {
        return Err(Error::numeric("L_g norm overflows f64", best, 709.0));
    }
    Ok(best.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(v: Vec<f64>) -> DyadicSequence {
        DyadicSequence::dense(Side::ZPlus, 0, v).unwrap()
    }

    #[test]
    fn weighted_mean_matches_direct_sums() {
        let g = Weight::g_cor();
        let v: Vec<f64> = (0..200).map(|n| ((n * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let c = cesaro_g(&dense(v.clone()), &g, (0, 199)).unwrap();
        for n in [0usize, 1, 7, 50, 199] {
            let (mut s, mut w) = (0.0, 0.0);
            for m in 0..=n {
                let wm = g.dyadic_weight(m as Index).to_f64();
                s += wm * v[m];
                w += wm;
            }
            assert!((c.get(n as Index).unwrap() - s / w).abs() < 1e-12);
        }
    }

    #[test]
    fn runs_and_dense_paths_agree() {
        let y = DyadicSequence::y_dixcor(3000).unwrap();
        let yd = y.to_dense().unwrap();
        for g in [Weight::f_cor(), Weight::g_cor(), Weight::g_nonreg()] {
            let a = cesaro_g(&y, &g, (0, 3000)).unwrap();
            let b = cesaro_g(&yd, &g, (0, 3000)).unwrap();
            for n in (0..=3000).step_by(13) {
                let (p, q) = (a.get(n).unwrap(), b.get(n).unwrap());
                assert!((p - q).abs() < 1e-11, "{} n={n}: {p} vs {q}", g.name());
            }
        }
        let a = log_mean(&y, (0, 3000)).unwrap();
        let b = log_mean(&yd, (0, 3000)).unwrap();
        for n in 0..=3000 {
            assert!((a.get(n).unwrap() - b.get(n).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn f_cor_mean_of_y_oscillates() {
        // w_m = 1 for f_cor: plain Cesaro of y
        let y = DyadicSequence::y_dixcor(1 << 22).unwrap();
        let c = cesaro_g(&y, &Weight::f_cor(), (0, 1 << 22)).unwrap();
        let hi = c.get((1 << 21) - 1).unwrap();
        let lo = c.get((1 << 20) - 1).unwrap();
        assert!((hi - 2.0 / 3.0).abs() < 1e-5, "{hi}");
        assert!((lo - 1.0 / 3.0).abs() < 1e-5, "{lo}");
    }

    #[test]
    fn lazy_mean_over_a_huge_window() {
        let hi: Index = 1 << 80;
        let y = DyadicSequence::y_dixcor(hi).unwrap();
        let c = cesaro_g(&y, &Weight::f_cor(), (1 << 70, hi)).unwrap();
        let (lo, top) = c.extremes(1 << 70, hi).unwrap();
        assert!((top - 2.0 / 3.0).abs() < 1e-9 && (lo - 1.0 / 3.0).abs() < 1e-9, "{lo} {top}");
    }

    #[test]
    fn cesaro_inverse_round_trip() {
        let v: Vec<f64> = (0..300).map(|n| ((n * 7919 % 101) as f64) / 50.0 - 1.0).collect();
        let x = dense(v.clone());
        let back = cesaro(&cesaro_inverse(&x).unwrap(), (0, 299)).unwrap();
        for n in 0..300 {
            assert!((back.get(n).unwrap() - v[n as usize]).abs() < 1e-12);
        }
        let c = DyadicSequence::constant(Side::ZPlus, 0, 50, 2.5).unwrap();
        let inv = cesaro_inverse(&c).unwrap();
        assert_eq!(inv.extremes(0, 50).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn runs_inverse_matches_dense() {
        let y = DyadicSequence::y_dixcor(600).unwrap();
        let a = cesaro_inverse(&y).unwrap();
        let b = cesaro_inverse(&y.to_dense().unwrap()).unwrap();
        assert_eq!(a.values(0, 600).unwrap(), b.values(0, 600).unwrap());
    }

    #[test]
    fn log_mean_inverse_identity_carries_x0() {
        // the telescoping sum leaves -x_0 in the numerator
        let v: Vec<f64> = (0..500).map(|n| ((n * 31 % 17) as f64) / 8.0 - 1.0).collect();
        let x = dense(v.clone());
        let lhs = log_mean(&cesaro_inverse(&x).unwrap(), (0, 499)).unwrap();
        let m = log_mean(&x, (0, 499)).unwrap();
        for n in 1..500usize {
            let l = ((n + 1) as f64).ln();
            let want = m.get(n as Index).unwrap() + (v[n] - v[0]) / l;
            assert!((lhs.get(n as Index).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn n_map_and_norm() {
        let g = Weight::g_cor();
        let chi = DyadicSequence::chi(Side::ZPlus, 0, 40).unwrap();
        let nx = n_map(&chi, &g).unwrap();
        for n in 0..=40 {
            let want = g.eval((n as f64).exp2());
            assert!((nx.get(n).unwrap() - want).abs() < 1e-15 * want.max(1.0));
        }
        let x = dense(vec![0.5, -2.0, 1.0, 0.25]);
        let nrm = lg_norm(&n_map(&x, &g).unwrap(), &g).unwrap();
        assert!((nrm - 2.0).abs() < 1e-12);
    }
}
