//! One PASS/FAIL line per acceptance criterion.
//!
//! Criteria listed in `KNOWN_BLOCKED` are implemented as stated and are
//! expected to print FAIL; the run exits nonzero on any other failure, and
//! also when a blocked criterion starts passing.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stw::functionals::check_dixmier_weight;
use stw::seqcore::{almost_convergent, shift, ShiftDir};
use stw::transforms::{cesaro, cesaro_g, cesaro_inverse, log_mean, phi_g, rearrange, synth_d};
use stw::weights::{dyadic_sum_ratio, DYADIC_SUM_LIMIT, DYADIC_SUM_LOG2_CONVENTION};
use stw::{DyadicSequence, Index, Side, Weight};
use stw_cli::commands::{connes_check, reproduce_dixcor, reproduce_schrodinger, ConnesArgs, Settings};
use stw_cli::report::Body;

const KNOWN_BLOCKED: [(u32, &str); 3] = [
    (2, "the log mean of y converges like 1/log n and is still about 0.46 at 4^12"),
    (4, "the stated log-mean identity drops -x_0/log(n+1); exact only when x_0 = 0"),
    (5, "for g_cor the means of (I - S_+)x decay like 1/log n; random x stay above 0.1 on [2^10, 2^12]"),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(common::seed() ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn random_seq(r: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.gen_range(-1.0..=1.0)).collect()
}

fn c1() -> Outcome {
    let t = Instant::now();
    let y = DyadicSequence::y_dixcor(1 << 23).unwrap();
    let mut worst = 0.0f64;
    for m in 8..=11 {
        for (n, want) in [((1 << (2 * m + 1)) - 1, 2.0 / 3.0), ((1 << (2 * m)) - 1, 1.0 / 3.0)] {
            let v = cesaro(&y, (n, n)).unwrap().value(n);
            worst = worst.max((v - want).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst <= 0.02 && secs < 1.0, format!("max |Cy - 2/3 or 1/3| = {worst:.3e} over m = 8..11 (tol 0.02), {secs:.3} s"))
}

fn c2() -> Outcome {
    let y = DyadicSequence::y_dixcor(1 << 24).unwrap();
    let vals: Vec<(Index, f64)> = [1 << 22, 1 << 24]
        .iter()
        .map(|&n| (n, log_mean(&y, (n, n)).unwrap().value(n)))
        .collect();
    let worst = vals.iter().fold(0.0f64, |m, v| m.max((v.1 - 0.5).abs()));
    outcome(
        worst <= 0.02,
        format!("My(4^11) = {:.5}, My(4^12) = {:.5}, max |My - 1/2| = {worst:.4} (tol 0.02)", vals[0].1, vals[1].1),
    )
}

fn c3() -> Outcome {
    let r = reproduce_dixcor(&Settings::default()).unwrap();
    let env = |name: &str| match &r.get(name).unwrap().body {
        Body::Envelope(e) => e.clone(),
        _ => unreachable!(),
    };
    let ok = |name: &str| r.get(name).unwrap().check.as_ref().unwrap().passed;
    let (d, t) = (env("dixmier"), env("transported"));
    outcome(
        ok("dixmier") && ok("transported") && ok("strict_subset"),
        format!(
            "Dixmier [{:.5}, {:.5}] (want [1/3, 2/3] +- 0.02); transported [{:.5}, {:.5}], width {:.4}, midpoint {:.4} (tol 0.02); strict subset {}",
            d.lo, d.hi, t.lo, t.hi, t.width(), t.midpoint(), ok("strict_subset")
        ),
    )
}

fn c4() -> Outcome {
    const N: usize = 1 << 12;
    const TOL: f64 = 1e-12;
    let w = (0, N as Index - 1);
    let mut r = rng(4);
    let (mut inv, mut stated, mut corrected, mut zero_start) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for trial in 0..1000 {
        let mut v = random_seq(&mut r, N);
        if trial % 10 == 0 {
            v[0] = 0.0;
        }
        let x = DyadicSequence::dense(Side::ZPlus, 0, v.clone()).unwrap();
        let ci = cesaro_inverse(&x).unwrap();
        let back = cesaro(&ci, w).unwrap();
        let mci = log_mean(&ci, w).unwrap();
        let mx = log_mean(&x, w).unwrap();
        for n in 0..N {
            inv = inv.max((back.value(n as Index) - v[n]).abs());
        }
        for n in 1..N {
            let l = ((n + 1) as f64).ln();
            let lhs = mci.value(n as Index);
            let m = mx.value(n as Index);
            let e = (lhs - m - v[n] / l).abs();
            stated = stated.max(e);
            if v[0] == 0.0 {
                zero_start = zero_start.max(e);
            }
            corrected = corrected.max((lhs - m - (v[n] - v[0]) / l).abs());
        }
    }
    let mut fixed = 0.0f64;
    let mut phi_fixed = 0.0f64;
    for g in Weight::catalog() {
        let chi = DyadicSequence::chi(Side::ZPlus, 0, N as Index - 1).unwrap();
        let m = cesaro_g(&chi, &g, w).unwrap();
        fixed = fixed.max(m.values(w.0, w.1).unwrap().iter().fold(0.0f64, |a, v| a.max((v - 1.0).abs())));
        let chi2 = DyadicSequence::chi(Side::TwoSided, -60, N as Index - 1).unwrap();
        let mu = rearrange(&synth_d(&chi2, Some(&g))).unwrap();
        let back = phi_g(&mu, &g, chi2.window()).unwrap();
        let (a, b) = chi2.window();
        phi_fixed = phi_fixed.max(back.values(a, b).unwrap().iter().fold(0.0f64, |acc, v| acc.max((v - 1.0).abs())));
    }
    let pass = inv <= TOL && stated <= TOL && fixed <= TOL && phi_fixed <= TOL;
    outcome(
        pass,
        format!(
            "tol {TOL:e}: C(C^-1 x) = x {inv:.1e}; stated log-mean identity {stated:.3e} \
             (x_0 = 0 cases {zero_start:.1e}, with -x_0/log(n+1) restored {corrected:.1e}); \
             C_g chi = chi {fixed:.1e}; Phi_g(D_g chi) = chi {phi_fixed:.1e}"
        ),
    )
}

fn c5() -> Outcome {
    const N: Index = 1 << 12;
    let (a, b) = (1 << 10, N);
    let mut r = rng(5);
    let xs: Vec<Vec<f64>> = (0..100).map(|_| random_seq(&mut r, N as usize + 1)).collect();
    let diff = |v: &[f64]| {
        let x = DyadicSequence::dense(Side::ZPlus, 0, v.to_vec()).unwrap();
        let sx = shift(&x, ShiftDir::Plus).unwrap().restrict(0, N).unwrap();
        x.sub(&sx).unwrap()
    };
    let tail_sup = |g: &Weight, d: &DyadicSequence| {
        let m = cesaro_g(d, g, (0, b)).unwrap();
        m.values(a, b).unwrap().iter().fold(0.0f64, |s, v| s.max(v.abs()))
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for g in [Weight::f_cor(), Weight::g_cor()] {
        let worst = xs.iter().map(|v| tail_sup(&g, &diff(v))).fold(0.0f64, f64::max);
        pass &= worst <= 0.05;
        parts.push(format!("{} sup {:.4} (tol 0.05)", g.name(), worst));
    }
    let g = Weight::g_nonreg();
    let delta = DyadicSequence::delta(Side::ZPlus, 0, N, 0).unwrap();
    let m = cesaro_g(&delta, &g, (0, b)).unwrap();
    let low = m.values(a, b).unwrap().iter().fold(f64::INFINITY, |s, &v| s.min(v));
    pass &= low >= 0.1;
    parts.push(format!("g_nonreg C_g delta_0 >= {low:.4} on the window (want >= 0.1)"));
    let g = Weight::g_nonrv();
    let alt = DyadicSequence::alt(Side::ZPlus, 0, N).unwrap();
    let m = cesaro_g(&diff(&alt.values(0, N).unwrap()), &g, (0, b)).unwrap();
    let vals = m.values(a, b).unwrap();
    let q = vals.len() / 4;
    let hits: Vec<usize> = vals.chunks(q).take(4).map(|c| c.iter().filter(|v| v.abs() >= 0.05).count()).collect();
    pass &= hits.iter().all(|&h| h > 0);
    parts.push(format!("g_nonrv |C_g(I - S_+)alt| >= 0.05 at {hits:?} points per window quarter"));
    outcome(pass, parts.join("; "))
}

fn c6() -> Outcome {
    let g = Weight::g_pow(1.0).unwrap();
    let r = dyadic_sum_ratio(&g, 512).unwrap();
    let closed = 513.0 / (1.0 + 512.0 * std::f64::consts::LN_2);
    let d = (r - DYADIC_SUM_LIMIT).abs();
    outcome(
        d <= 2e-3 && (r - closed).abs() <= 1e-12,
        format!(
            "ratio {r:.6} vs 1/log 2 = {DYADIC_SUM_LIMIT:.6}: {d:.2e} (tol 2e-3); closed form {closed:.6}; \
             stated constant log 2 = {DYADIC_SUM_LOG2_CONVENTION:.6} is off by {:.4}",
            (r - DYADIC_SUM_LOG2_CONVENTION).abs()
        ),
    )
}

fn c7() -> Outcome {
    let p: Index = 1 << 10;
    let alt = DyadicSequence::alt(Side::ZPlus, 0, 1 << 20).unwrap();
    let va = almost_convergent(&alt, p, 1e-2, (0, 1 << 20)).unwrap();
    let v = va.value.unwrap_or(f64::NAN);
    let a_ok = va.is_yes() && v.abs() <= 1.0 / p as f64;
    let w = (1 << 20, 6 << 20);
    let y = DyadicSequence::y_dixcor(w.1).unwrap();
    let vy = almost_convergent(&y, p, 1e-2, w).unwrap();
    let width = vy.evidence.metrics["width"];
    let y_ok = vy.answer == stw::seqcore::Answer::No && width >= 0.9;
    outcome(
        a_ok && y_ok,
        format!("alt {:?} value {v:.2e} (want |v| <= 2^-10); y {:?} width {width:.4} on [4^10, 6*4^10] (want no, >= 0.9)", va.answer, vy.answer),
    )
}

fn c8() -> Outcome {
    let mut fails = Vec::new();
    for (name, prop) in common::PROPERTIES {
        if let Err(e) = prop(common::CASES) {
            fails.push(format!("{name}: {e}"));
        }
    }
    let n = common::PROPERTIES.len();
    if fails.is_empty() {
        outcome(true, format!("{n} suites x {} cases, seed {}", common::CASES, common::seed()))
    } else {
        outcome(false, fails.join("; "))
    }
}

fn c9() -> Outcome {
    let t = Instant::now();
    let r = connes_check(&ConnesArgs::default(), &Settings::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let scalar = |n: &str| match &r.get(n).unwrap().body {
        Body::Scalar(x) => *x,
        _ => unreachable!(),
    };
    let verdict = |n: &str| match &r.get(n).unwrap().body {
        Body::Verdict(v) => v.clone(),
        _ => unreachable!(),
    };
    let hi = match &r.get("diagonal_vs_symbol").unwrap().body {
        Body::Envelope(e) => e.hi,
        _ => unreachable!(),
    };
    let change = scalar("hi_change");
    let (tf, cm) = (verdict("trace_formula"), verdict("measurability"));
    outcome(
        change <= 0.05 && tf.is_yes() && cm.is_yes() && secs <= 60.0,
        format!(
            "diagonal_vs_symbol hi {hi:.4}, change across refinements {change:.4} (tol 0.05); trace formula {:?} \
             (residual {:.2e}, p_eff {}); measurability {:?}; {secs:.2} s",
            tf.answer, tf.evidence.metrics["residual"], tf.evidence.metrics["p_eff"], cm.answer
        ),
    )
}

fn c10() -> Outcome {
    let r = reproduce_schrodinger(1.0, &Settings::default()).unwrap();
    let item = r.get("measurability").unwrap();
    let Body::Verdict(v) = &item.body else { unreachable!() };
    outcome(
        item.check.as_ref().unwrap().passed,
        format!("{:?}, value {} (want yes within 0.03 of 1) on [2^19, 2^20]", v.answer, v.value.map_or("none".to_string(), |x| format!("{x:.6}"))),
    )
}

fn main() {
    // every weight used by the Dixmier criteria must pass the gate
    for g in [Weight::f_cor(), Weight::g_cor(), Weight::g_schro()] {
        check_dixmier_weight(&g).unwrap();
    }
    let criteria: [(u32, fn() -> Outcome); 10] =
        [(1, c1), (2, c2), (3, c3), (4, c4), (5, c5), (6, c6), (7, c7), (8, c8), (9, c9), (10, c10)];
    let mut unexpected = 0;
    for (n, f) in criteria {
        let o = f();
        let blocked = KNOWN_BLOCKED.iter().find(|b| b.0 == n);
        println!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        match (o.pass, blocked) {
            (false, Some(b)) => println!("    known blocker: {}", b.1),
            (false, None) => unexpected += 1,
            (true, Some(_)) => {
                println!("    listed as blocked but passes; update KNOWN_BLOCKED");
                unexpected += 1;
            }
            (true, None) => {}
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}
