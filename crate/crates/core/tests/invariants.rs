use stw::connes::{shell_integral, shell_sequence, trace_formula_check, ModelOperator, Symbol, SymbolGrid};
use stw::functionals::{dixmier_envelope, measurability, Normalization};
use stw::seqcore::{banach_envelope, shift, tail_envelope, ShiftDir};
use stw::transforms::{phi_g, rearrange, synth_d, MuFunction};
use stw::{DyadicSequence, Index, Weight};

fn ring_radius(n: i32) -> f64 {
    (4f64.powi(n) - 1.0).sqrt()
}

#[test]
fn shells_add_up_to_the_disc_integral() {
    let p = SymbolGrid::new(Symbol::model(), 30.0).unwrap();
    for g in [Weight::g_pow(1.0).unwrap(), Weight::g_cor(), Weight::g_schro()] {
        let mut acc = 0.0;
        for n in 0..25 {
            let w = g.ln_dyadic_weight(n).exp();
            acc += w * shell_integral(&p, &g, n, 1e-12).unwrap();
            // int over 1 <= <xi> <= 2^(n+1) of <xi>^-1, x-integral 1
            let want = 2.0 * ring_radius(n as i32 + 1).asinh();
            assert!((acc - want).abs() <= 1e-9 * want, "{} n={n}: {acc} vs {want}", g.name());
        }
    }
}

#[test]
fn quadrature_error_shrinks_with_refinement() {
    let p = SymbolGrid::new(Symbol::model(), 30.0).unwrap();
    let g = Weight::g_pow(1.0).unwrap();
    for n in [0, 3, 12, 24] {
        let want = 2.0 * (ring_radius(n + 1).asinh() - ring_radius(n).asinh());
        let errs: Vec<f64> = [1e-3, 1e-6, 1e-9, 1e-12]
            .iter()
            .map(|&r| (shell_integral(&p, &g, n as Index, r).unwrap() - want).abs())
            .collect();
        for e in errs.windows(2) {
            assert!(e[1] <= e[0] + 1e-15, "n={n}: {errs:?}");
        }
    }
}

// The Dixmier means of the rearranged eigenvalues carry a Cesaro start-up
// bias of order 1/n on a window ending at log2 k_max, so the distance to the
// shell values is checked at 0.1 and must shrink as k_max grows.
#[test]
fn trace_formula_matches_dixmier_of_eigenvalues() {
    let g = Weight::g_pow(1.0).unwrap();
    let mut last = f64::INFINITY;
    for lk in [16, 18, 20] {
        let op = ModelOperator::bracket_inverse(1 << lk).unwrap();
        let v = trace_formula_check(&op, &g, (0, lk as Index - 1), 1 << 8, 0.05).unwrap();
        assert!(v.is_yes());
        let w = (lk as Index / 2, lk as Index - 1);
        let d = dixmier_envelope(&op.mu().unwrap(), &g, w).unwrap();
        let shells = shell_sequence(&op.symbol, &g, (0, lk as Index - 1), 1e-10).unwrap();
        let t = tail_envelope(&shells, w).unwrap();
        let dist = d.distance(&t);
        eprintln!("k_max 2^{lk}: dixmier [{:.4}, {:.4}] shells [{:.4}, {:.4}] distance {dist:.4}", d.lo, d.hi, t.lo, t.hi);
        assert!(dist < last, "distance grew to {dist} at 2^{lk}");
        last = dist;
    }
    assert!(last <= 0.1, "distance {last}");
}

fn dfy(hi: Index) -> MuFunction {
    rearrange(&synth_d(&DyadicSequence::y_dixcor(hi).unwrap(), Some(&Weight::f_cor()))).unwrap()
}

/// `c D_g chi` with a two-sided `chi`, so `Phi_g` is `c` from the start.
///
/// For `g_cor` the Cesaro weights decay like `1/m` and the start-up bias of a
/// tail like `c g` only fades like `1/log n`, far beyond any window here.
fn fixed_point(g: &Weight, c: f64, hi: Index) -> MuFunction {
    let chi = DyadicSequence::chi(stw::Side::TwoSided, -60, hi).unwrap().scale(c).unwrap();
    rearrange(&synth_d(&chi, Some(g))).unwrap()
}

#[test]
fn dixmier_envelope_inside_banach_envelope() {
    let p: Index = 1 << 10;
    let slack = 2.0 / p as f64;
    let w = (1 << 16, 1 << 18);
    let cases = [
        (dfy(w.1), Weight::f_cor()),
        (MuFunction::from_weight(&Weight::g_schro(), 1.0).unwrap(), Weight::g_schro()),
        (fixed_point(&Weight::g_cor(), 3.0, w.1), Weight::g_cor()),
    ];
    for (mu, g) in cases {
        let d = dixmier_envelope(&mu, &g, w).unwrap();
        let phi = phi_g(&mu, &g, (0, w.1)).unwrap();
        let b = banach_envelope(&phi, p, w).unwrap();
        assert!(d.within(&b, slack), "{}: dixmier {:?} banach {:?}", g.name(), (d.lo, d.hi), (b.lo, b.hi));
        // shifting phi moves the Banach envelope by O(1/p)
        let bs = banach_envelope(&shift(&phi, ShiftDir::Plus).unwrap(), p, w).unwrap();
        assert!(bs.distance(&b) <= slack, "{}: shift moved {}", g.name(), bs.distance(&b));
    }
}

#[test]
fn measurable_means_narrow_dixmier_envelope() {
    let g = Weight::g_schro();
    let tol = 0.01;
    let v = measurability(
        &MuFunction::from_weight(&g, 2.0).unwrap(),
        &g,
        1 << 10,
        tol,
        (1 << 16, 1 << 17),
        Normalization::Dyadic,
    )
    .unwrap();
    assert!(v.is_yes());
    let m = &v.evidence.metrics;
    assert!(m["dixmier_hi"] - m["dixmier_lo"] <= tol);
    let v = measurability(&dfy(1 << 18), &Weight::f_cor(), 1 << 10, tol, (1 << 16, 1 << 18), Normalization::Dyadic)
        .unwrap();
    assert!(!v.is_yes());
}
