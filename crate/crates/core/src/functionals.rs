//! Value sets of singular traces on a fixed element, given by its singular
//! value function `mu`.
//!
//! Dixmier traces on `L_g` act as `gamma o C_g o Phi_g` with `gamma` an
//! extended limit, so their values on `mu` fill the tail envelope of
//! `C_g Phi_g(mu)`. All positive normalized symmetric functionals act through
//! Banach limits of `Phi_g(mu)`, which gives the measurability verdict.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::Ext;
use crate::seqcore::{
    almost_convergent, tail_envelope, Answer, Block, DyadicSequence, EnvelopeConfig, Index, Side,
    ValueEnvelope, Verdict, MATERIALIZE_LIMIT,
};
use crate::transforms::{cesaro_g, phi_g, MuFunction};
use crate::weights::{l1_check, rv_check, Weight};

/// Horizon and tolerance of the regular-variation gate.
pub const RV_HORIZON: f64 = 1.606_938_044_258_990_3e60; // 2^200
pub const RV_TOL: f64 = 0.05;
/// Horizon of the summability gate.
pub const L1_NMAX: Index = 1 << 24;
pub const L1_TOL: f64 = 1e-3;

/// Refuses weights on which the Dixmier form is not available.
pub fn check_dixmier_weight(g: &Weight) -> Result<()> {
    let l1 = l1_check(g, L1_NMAX, L1_TOL)?;
    if l1.answer == Answer::Yes {
        return Err(Error::Refused(format!(
            "{} is integrable, so every Dixmier trace on L_g is a multiple of the usual trace",
            g.name()
        )));
    }
    let rv = rv_check(g, RV_HORIZON, RV_TOL)?;
    if rv.answer == Answer::No {
        return Err(Error::Refused(format!(
            "{} is not regularly varying of index -1",
            g.name()
        )));
    }
    Ok(())
}

fn upper(window: (Index, Index)) -> Result<Index> {
    let (a, b) = window;
    if a < 0 || b < a {
        return Err(Error::domain(format!("bad window [{a}, {b}]")));
    }
    Ok(b)
}

/// Tail envelope of `C_g Phi_g(mu)` over the index window.
pub fn dixmier_envelope(mu: &MuFunction, g: &Weight, window: (Index, Index)) -> Result<ValueEnvelope> {
    check_dixmier_weight(g)?;
    let hi = upper(window)?;
    let phi = phi_g(mu, g, (0, hi))?;
    tail_envelope(&cesaro_g(&phi, g, (0, hi))?, window)
}

/// Tail envelope of `C_g Phi_f(mu_Y)`: the values of the transported
/// functionals `phi o D_g o Phi_f` with `phi` Dixmier on `L_g`.
pub fn transported_envelope(
    mu_y: &MuFunction,
    g: &Weight,
    f: &Weight,
    window: (Index, Index),
) -> Result<ValueEnvelope> {
    check_dixmier_weight(g)?;
    let hi = upper(window)?;
    let phi = phi_g(mu_y, f, (0, hi))?;
    tail_envelope(&cesaro_g(&phi, g, (0, hi))?, window)
}

/// Constant in front of the classical Dixmier means.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Prefactor {
    One,
    InvLog2,
    Log2,
}

impl Prefactor {
    pub fn value(self) -> f64 {
        match self {
            Prefactor::One => 1.0,
            Prefactor::InvLog2 => std::f64::consts::LOG2_E,
            Prefactor::Log2 => std::f64::consts::LN_2,
        }
    }

    pub fn parse(s: &str) -> Result<Prefactor> {
        match s {
            "one" | "1" => Ok(Prefactor::One),
            "invlog2" => Ok(Prefactor::InvLog2),
            "log2" => Ok(Prefactor::Log2),
            _ => Err(Error::Parse(format!("unknown prefactor '{s}'"))),
        }
    }
}

/// Tail terms summed one by one before switching to Euler-Maclaurin.
const DIRECT_TERMS: i128 = 1 << 16;

/// `sum_{k=a}^{b} scale * g(k + shift)` for integers `a <= b`.
fn tail_sample_sum(g: &Weight, scale: f64, shift: Ext, a: Ext, b: Ext) -> Result<Ext> {
    let at = |k: Ext| g.eval_ext(k + shift);
    let count = b - a + Ext::ONE;
    if count <= Ext::from_f64(DIRECT_TERMS as f64) {
        let n = count.to_i128();
        let mut s = Ext::ZERO;
        for i in (0..n).rev() {
            s = s + at(a + Ext::from_i128(i));
        }
        return Ok(s.scale(scale));
    }
    let mut s = Ext::ZERO;
    for i in 0..1024 {
        s = s + at(a + Ext::from_i128(i));
    }
    let a2 = a + Ext::from_f64(1024.0);
    // int + trapezoid ends + first derivative correction
    let int = g.integral(a2 + shift, b + shift)?;
    let ends = (at(a2) + at(b)).scale(0.5);
    let d = |t: Ext| {
        let h = t.max(Ext::ONE).scale(1e-4);
        (at(t + h) - at(t - h)) / h.scale(2.0)
    };
    let corr = (d(b) - d(a2)).scale(1.0 / 12.0);
    Ok((s + int + ends + corr).scale(scale))
}

/// `sum_{k=0}^{N} mu(k)` from the pieces of `mu`.
pub fn sample_sum(mu: &MuFunction, n: Ext) -> Result<Ext> {
    let end = n + Ext::ONE;
    let (pieces, tail) = mu.pieces_until(end)?;
    let mut acc = Ext::ZERO;
    let origin = mu.origin();
    if origin > Ext::ZERO {
        // samples inside the head take the first value
        let cnt = origin.min(end).ceil();
        acc = acc + cnt * mu.value_at(origin);
    }
    let mut last = origin;
    for (s, e, v) in pieces {
        let (lo, hi) = (s.max(origin), e.min(end));
        if hi > lo {
            let cnt = hi.ceil() - lo.ceil();
            if cnt > Ext::ZERO {
                acc = acc + cnt * v;
            }
        }
        last = last.max(e);
    }
    if let Some((start, t)) = tail {
        let from = start.max(last).ceil();
        let to = t.until.map_or(n, |u| u.ceil() - Ext::ONE).min(n);
        if to >= from {
            acc = acc + tail_sample_sum(&t.weight, t.scale, t.shift, from, to)?;
        }
    }
    Ok(acc)
}

/// Classical Dixmier means `c * sum_{k<=N} mu(k) / G(N)` at `N = 2^s`.
pub fn dixmier_classic(
    mu: &MuFunction,
    g: &Weight,
    prefactor: Prefactor,
    log2_grid: &[f64],
) -> Result<ValueEnvelope> {
    check_dixmier_weight(g)?;
    if log2_grid.is_empty() {
        return Err(Error::domain("empty sample grid"));
    }
    let c = prefactor.value();
    let mut samples = Vec::with_capacity(log2_grid.len());
    for &s in log2_grid {
        let n = Ext::exp2(s).floor();
        let num = sample_sum(mu, n)?;
        let den = g.primitive(n)?;
        samples.push((s.floor() as Index, c * num.ratio(den)));
    }
    ValueEnvelope::from_samples(&samples, &EnvelopeConfig::default())
}

/// Which element the functionals are normalized on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Value 1 on `D_g chi`.
    Dyadic,
    /// Value 1 on the operator with singular values `g`.
    Diagonal,
}

/// Whether all positive normalized symmetric functionals agree on `mu`.
///
/// Decided by almost convergence of `Phi_g(mu)` on the window; the Dixmier
/// envelope on the same window is attached for comparison.
pub fn measurability(
    mu: &MuFunction,
    g: &Weight,
    p_max: Index,
    tol: f64,
    window: (Index, Index),
    norm: Normalization,
) -> Result<Verdict> {
    let hi = upper(window)?;
    let phi = phi_g(mu, g, (0, hi))?;
    let scale = match norm {
        Normalization::Dyadic => 1.0,
        Normalization::Diagonal => {
            let unit = MuFunction::from_weight(g, 1.0)?;
            let v = almost_convergent(&phi_g(&unit, g, (0, hi))?, p_max, tol, window)?;
            match v.value {
                Some(c) if c > 0.0 => c,
                _ => {
                    return Err(Error::numeric(
                        "Phi_g(g) is not almost convergent on the window",
                        v.evidence.metrics.get("width").copied().unwrap_or(f64::NAN),
                        tol,
                    ))
                }
            }
        }
    };
    let mut v = almost_convergent(&phi.scale(1.0 / scale)?, p_max, tol, window)?;
    v.evidence = v.evidence.metric("normalization", scale);
    match dixmier_envelope(&mu.scaled(1.0 / scale)?, g, window) {
        Ok(env) => {
            v.evidence = v
                .evidence
                .metric("dixmier_lo", env.lo)
                .metric("dixmier_hi", env.hi);
        }
        Err(Error::Refused(why)) => v.evidence = v.evidence.note(format!("no Dixmier envelope: {why}")),
        Err(e) => return Err(e),
    }
    Ok(v)
}

/// `(x chi_(a, inf), x chi_(-inf, a))`.
pub fn support_split(x: &DyadicSequence, a: Index) -> Result<(DyadicSequence, DyadicSequence)> {
    let (lo, hi) = x.window();
    if x.side() != Side::TwoSided {
        return Err(Error::domain("support split needs a two-sided sequence"));
    }
    let part = |keep: &dyn Fn(Index) -> bool| -> Result<DyadicSequence> {
        if let Some(runs) = x.runs_in(lo, hi) {
            let mut out = Vec::with_capacity(runs.len() + 1);
            for b in runs {
                // cut each run at a
                let pieces = [(b.start, b.end().min(a - 1)), (b.start.max(a), b.start.max(a).min(b.end())), (b.start.max(a + 1), b.end())];
                for (s, e) in pieces {
                    if s <= e && keep(s) && keep(e) {
                        out.push(Block { start: s, len: e - s + 1, value: b.value });
                    }
                }
            }
            out.sort_by_key(|b| b.start);
            out.dedup_by_key(|b| b.start);
            return DyadicSequence::runs(Side::TwoSided, lo, hi, out);
        }
        if hi - lo >= MATERIALIZE_LIMIT {
            return Err(Error::domain("support split beyond the materialization limit"));
        }
        let v = (lo..=hi).map(|n| if keep(n) { x.value(n) } else { 0.0 }).collect();
        DyadicSequence::dense(Side::TwoSided, lo, v)
    };
    Ok((part(&|n| n > a)?, part(&|n| n < a)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{rearrange, synth_d};

    #[test]
    fn summable_weights_are_refused() {
        let g = Weight::g_pow(2.0).unwrap();
        let mu = MuFunction::from_weight(&g, 1.0).unwrap();
        assert!(matches!(dixmier_envelope(&mu, &g, (10, 20)), Err(Error::Refused(_))));
        assert!(matches!(check_dixmier_weight(&Weight::g_nonrv()), Err(Error::Refused(_))));
        for g in [Weight::f_cor(), Weight::g_cor(), Weight::g_schro(), Weight::g_pow(1.0).unwrap()] {
            check_dixmier_weight(&g).unwrap();
        }
    }

    #[test]
    fn fixed_point_envelope_is_one() {
        for g in [Weight::f_cor(), Weight::g_cor(), Weight::g_schro()] {
            let chi = DyadicSequence::chi(Side::TwoSided, -60, 1 << 12).unwrap();
            let mu = rearrange(&synth_d(&chi, Some(&g))).unwrap();
            let env = dixmier_envelope(&mu, &g, (1 << 10, 1 << 12)).unwrap();
            assert!((env.lo - 1.0).abs() < 1e-12 && (env.hi - 1.0).abs() < 1e-12, "{}: {env:?}", g.name());
        }
    }

    #[test]
    fn sample_sums_count_integers() {
        // mu = 3 on [0, 2.5), 1 on [2.5, 4): samples k = 0..=5 -> 3+3+3+1+0+0
        let mu = MuFunction::from_steps(&[0.0, 2.5, 4.0], &[3.0, 1.0]).unwrap();
        assert_eq!(sample_sum(&mu, Ext::from_f64(5.0)).unwrap().to_f64(), 10.0);
        assert_eq!(sample_sum(&mu, Ext::from_f64(2.0)).unwrap().to_f64(), 9.0);
        // tail sums against direct summation, both routes
        let g = Weight::g_cor();
        let mu = MuFunction::from_weight(&g, 2.0).unwrap();
        for n in [100.0, 70000.0, 300000.0] {
            let got = sample_sum(&mu, Ext::from_f64(n)).unwrap().to_f64();
            let want: f64 = (0..=n as i64).rev().map(|k| 2.0 * g.eval(k as f64)).sum();
            assert!((got - want).abs() < 1e-9 * want, "n={n}: {got} vs {want}");
        }
    }

    #[test]
    fn split_parts_reassemble() {
        let x = DyadicSequence::chi(Side::TwoSided, -50, 50).unwrap();
        let (p, q) = support_split(&x, 0).unwrap();
        for n in -50..=50 {
            let s = p.value(n) + q.value(n) + if n == 0 { x.value(0) } else { 0.0 };
            assert_eq!(s, x.value(n));
            assert_eq!(p.value(n), if n > 0 { 1.0 } else { 0.0 });
        }
    }
}
