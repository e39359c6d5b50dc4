//! Property definitions shared by the proptest suites and the acceptance run.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};
use stw::seqcore::{
    banach_envelope, ordering_numbers, shift, tail_envelope, Block, ShiftDir,
};
use stw::transforms::{
    lg_norm, n_map, rearrange, split_at_level, synth_d, MuFunction, StepBlock, StepFunction, Tail,
};
use stw::{DyadicSequence, Ext, Side, Weight};

pub const CASES: u32 = 500;

/// Seed from `STW_SEED`, default 7.
pub fn seed() -> u64 {
    std::env::var("STW_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(7)
}

fn runner(cases: u32, salt: u64) -> TestRunner {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed().to_le_bytes());
    bytes[8..16].copy_from_slice(&salt.to_le_bytes());
    let cfg = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::from_seed(RngAlgorithm::ChaCha, &bytes))
}

fn run<S, F>(strategy: S, cases: u32, salt: u64, test: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    runner(cases, salt).run(&strategy, test).map_err(|e| match e {
        TestError::Fail(why, v) => format!("{why} (input {v:?})"),
        TestError::Abort(why) => format!("aborted: {why}"),
    })
}

fn coeff() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 4 => -1.0f64..1.0]
}

fn rel_close(a: f64, b: f64, rtol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()).max(1e-300)
}

/// Value just below position `t` of the decreasing rearrangement of
/// `(len, |value|)` cells, read by sorting.
fn sorted_left_value(cells: &[(f64, f64)], t: f64) -> f64 {
    let mut c: Vec<(f64, f64)> = cells.iter().map(|&(l, v)| (l, v.abs())).collect();
    c.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut acc = 0.0;
    for (l, v) in c {
        acc += l;
        if acc >= t {
            return v;
        }
    }
    0.0
}

// o_n read off the sorted dyadic blocks at 2^n from the left.
pub fn ordering_vs_sort(cases: u32) -> Result<(), String> {
    let strat = (prop::collection::vec(coeff(), 1..=12), any::<bool>());
    run(strat, cases, 1, |(x, as_runs)| {
        let hi = x.len() as i128 - 1;
        let seq = if as_runs {
            let blocks = x
                .iter()
                .enumerate()
                .map(|(i, &v)| Block { start: i as i128, len: 1, value: v })
                .collect();
            DyadicSequence::runs(Side::ZPlus, 0, hi, blocks).unwrap()
        } else {
            DyadicSequence::dense(Side::ZPlus, 0, x.clone()).unwrap()
        };
        let o = ordering_numbers(&seq, (0, hi)).unwrap();
        let mut cells = vec![(1.0, 0.0)];
        cells.extend(x.iter().enumerate().map(|(k, &v)| ((1u64 << k) as f64, v)));
        let mu = rearrange(&synth_d(&seq, None)).unwrap();
        for n in 0..=hi {
            let t = (1u64 << n) as f64;
            let want = sorted_left_value(&cells, t - 0.5);
            prop_assert_eq!(o.value(n), want, "o_{} vs sort", n);
            let got = mu.value_at(Ext::from_f64(t - 0.5)).to_f64();
            prop_assert_eq!(got, want, "rearranged D x at 2^{} - 1/2", n);
        }
        Ok(())
    })
}

// Rearrangement of 64 explicit blocks against a plain sort.
pub fn rearrange_vs_sort(cases: u32) -> Result<(), String> {
    let strat = prop::collection::vec((1u32..=8, coeff()), 64);
    run(strat, cases, 2, |cells| {
        let mut blocks = Vec::new();
        let mut at = 0.0;
        for &(l, v) in &cells {
            blocks.push(StepBlock {
                start: Ext::from_f64(at),
                len: Ext::from_f64(l as f64),
                value: Ext::from_f64(v),
            });
            at += l as f64;
        }
        let f = StepFunction::Blocks { head: Ext::ZERO, blocks };
        let mu = rearrange(&f).unwrap();
        let cf: Vec<(f64, f64)> = cells.iter().map(|&(l, v)| (l as f64, v)).collect();
        let total: f64 = cf.iter().map(|c| c.0).sum();
        let mut sorted: Vec<f64> = cf.iter().map(|c| c.1.abs()).collect();
        sorted.sort_by(|a, b| b.total_cmp(a));
        for i in 0..(total as usize) {
            let t = i as f64 + 0.5;
            let want = sorted_left_value(&cf, t);
            prop_assert_eq!(mu.value_at(Ext::from_f64(t)).to_f64(), want, "mu({})", t);
        }
        prop_assert_eq!(mu.value_at(Ext::from_f64(total + 0.5)).to_f64(), 0.0);
        // Hardy-Littlewood: the rearrangement dominates every prefix integral
        let mut acc_f = 0.0;
        let mut at = 0.0;
        for &(l, v) in &cf {
            at += l;
            acc_f += l * v.abs();
            let acc_mu = mu.integral(Ext::ZERO, Ext::from_f64(at)).unwrap().to_f64();
            prop_assert!(acc_mu >= acc_f - 1e-12 * acc_f.max(1.0), "prefix at {}", at);
        }
        prop_assert!(rel_close(acc_f, mu.integral(Ext::ZERO, Ext::from_f64(total)).unwrap().to_f64(), 1e-12));
        Ok(())
    })
}

// ||N x||_{L_g} = ||x||_inf.
pub fn n_map_isometry(cases: u32) -> Result<(), String> {
    let strat = (
        -20i128..20,
        prop::collection::vec(coeff(), 1..40),
        0usize..Weight::catalog().len(),
    );
    run(strat, cases, 3, |(lo, x, gi)| {
        let g = &Weight::catalog()[gi];
        let seq = DyadicSequence::dense(Side::TwoSided, lo, x.clone()).unwrap();
        let norm = lg_norm(&n_map(&seq, g).unwrap(), g).unwrap();
        let want = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(
            rel_close(norm, want, 1e-12) || (want == 0.0 && norm == 0.0),
            "{}: norm {} vs sup {}",
            g.name(),
            norm,
            want
        );
        Ok(())
    })
}

fn mu_strategy() -> impl Strategy<Value = MuFunction> {
    (
        prop::collection::vec((0.01f64..4.0, 0.0f64..1.0), 1..10),
        any::<bool>(),
    )
        .prop_map(|(raw, with_tail)| {
            let mut vals: Vec<f64> = raw.iter().map(|r| r.1).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            let mut breaks = vec![Ext::ZERO];
            let mut at = 0.0;
            for r in &raw {
                at += r.0;
                breaks.push(Ext::from_f64(at));
            }
            let last = *vals.last().unwrap();
            let tail = with_tail.then(|| Tail {
                scale: last * at.max(1.0),
                weight: Weight::g_pow(1.0).unwrap(),
                shift: Ext::ZERO,
                until: None,
            });
            MuFunction::steps(breaks, vals.into_iter().map(Ext::from_f64).collect(), tail).unwrap()
        })
}

// mu = head + tail(. - d) and mu crosses the level at d.
pub fn split_concatenation(cases: u32) -> Result<(), String> {
    let strat = (mu_strategy(), 0.0f64..1.2, prop::collection::vec(0.0f64..60.0, 16));
    run(strat, cases, 4, |(mu, a, ts)| {
        let s = split_at_level(&mu, a).unwrap();
        let d = s.d.to_f64();
        for t in ts {
            let te = Ext::from_f64(t);
            let whole = mu.value_at(te).to_f64();
            let parts = if t < d {
                s.head.value_at(te).to_f64()
            } else {
                s.tail.value_at(Ext::from_f64(t - d)).to_f64()
            };
            prop_assert!(rel_close(whole, parts, 1e-9) || (whole - parts).abs() < 1e-15, "t = {}", t);
        }
        prop_assert!(s.tail.value_at(Ext::ZERO).to_f64() <= a * (1.0 + 1e-9));
        if d.is_finite() && d > 0.0 {
            prop_assert!(mu.value_at(Ext::from_f64(d * (1.0 - 1e-9))).to_f64() > a * (1.0 - 1e-9));
            prop_assert!(mu.value_at(s.d).to_f64() <= a * (1.0 + 1e-9));
        }
        Ok(())
    })
}

fn dense_strategy() -> impl Strategy<Value = Vec<f64>> {
    (6u32..=11).prop_flat_map(|k| prop::collection::vec(-1.0f64..1.0, (1usize << k)..=(1usize << k) + 64))
}

// Envelopes scale with positive constants; Banach averages move by at most
// 2 sup|x| / p under a shift.
pub fn envelope_scaling_shift(cases: u32) -> Result<(), String> {
    let strat = (dense_strategy(), 0.1f64..10.0, 0usize..4);
    run(strat, cases, 5, |(x, c, pk)| {
        let n = x.len() as i128;
        let seq = DyadicSequence::dense(Side::ZPlus, 0, x.clone()).unwrap();
        let scaled = seq.scale(c).unwrap();
        let w = (1, n - 1);
        let t0 = tail_envelope(&seq, w).unwrap();
        let t1 = tail_envelope(&scaled, w).unwrap();
        prop_assert!(rel_close(t1.lo, c * t0.lo, 1e-12) && rel_close(t1.hi, c * t0.hi, 1e-12));
        let p = ((n / 4) >> pk).max(1);
        let b0 = banach_envelope(&seq, p, w).unwrap();
        let b1 = banach_envelope(&scaled, p, w).unwrap();
        prop_assert!(rel_close(b1.lo, c * b0.lo, 1e-9) || (b1.lo - c * b0.lo).abs() < 1e-12);
        prop_assert!(rel_close(b1.hi, c * b0.hi, 1e-9) || (b1.hi - c * b0.hi).abs() < 1e-12);
        let sx = shift(&seq, ShiftDir::Plus).unwrap();
        let bs = banach_envelope(&sx, p, w).unwrap();
        let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(bs.distance(&b0) <= 2.0 * sup / p as f64 + 1e-12, "shift moved {}", bs.distance(&b0));
        Ok(())
    })
}

// Window averages never leave the range of the values.
pub fn banach_within_tail(cases: u32) -> Result<(), String> {
    let strat = (dense_strategy(), 0usize..6, any::<bool>());
    run(strat, cases, 6, |(x, pk, runs)| {
        let n = x.len() as i128;
        let seq = if runs {
            let blocks = x
                .iter()
                .enumerate()
                .map(|(i, &v)| Block { start: i as i128, len: 1, value: v })
                .collect();
            DyadicSequence::runs(Side::ZPlus, 0, n - 1, blocks).unwrap()
        } else {
            DyadicSequence::dense(Side::ZPlus, 0, x).unwrap()
        };
        let w = (n / 8, n - 1);
        let p = (((w.1 - w.0 + 1) / 2) >> pk).max(1);
        let b = banach_envelope(&seq, p, w).unwrap();
        let t = tail_envelope(&seq, w).unwrap();
        prop_assert!(b.within(&t, 1e-12), "banach {:?} tail {:?}", (b.lo, b.hi), (t.lo, t.hi));
        Ok(())
    })
}

pub type Property = (&'static str, fn(u32) -> Result<(), String>);

pub const PROPERTIES: [Property; 6] = [
    ("ordering numbers vs sort", ordering_vs_sort),
    ("rearrange vs sort", rearrange_vs_sort),
    ("N-map isometry", n_map_isometry),
    ("split concatenation", split_concatenation),
    ("envelope scaling and shift", envelope_scaling_shift),
    ("banach within tail", banach_within_tail),
];
