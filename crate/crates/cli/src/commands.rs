use std::fmt::Write as _;

use serde::Deserialize;
use stw::connes::{
    bracket, connes_measurability, diagonal_vs_symbol, shell_top, trace_formula_check, ModelOperator,
    SymbolGrid,
};
use stw::functionals::{
    dixmier_classic, dixmier_envelope, measurability, transported_envelope, Normalization, Prefactor,
    L1_NMAX, L1_TOL, RV_HORIZON, RV_TOL,
};
use stw::seqcore::{almost_convergent, banach_envelope, invariance_residual, ordering_numbers, tail_envelope};
use stw::transforms::{
    cesaro, cesaro_g, cesaro_inverse, log_mean, n_map, phi_g, split_at_level, synth_d,
    transport_pushforward, MuFunction,
};
use stw::weights::{
    doubling_envelope, dyadic_sum_ratio, l1_check, log2_grid, rv_check, rv_tail_ratio, DYADIC_SUM_LIMIT,
    DYADIC_SUM_LOG2_CONVENTION,
};
use stw::{DyadicSequence, Ext, Index, Weight};

use crate::report::{fmt_f64, Body, Item, Report};
use crate::spec::{self, parse_index, parse_real, parse_window, SpecCtx};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_ASSERT: i32 = 4;

/// Longest sequence dump.
const DUMP_LIMIT: Index = 1 << 20;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> CliError {
        CliError { code: EXIT_INPUT, msg: msg.into() }
    }
}

impl From<stw::Error> for CliError {
    fn from(e: stw::Error) -> Self {
        let code = match e {
            stw::Error::Numeric { .. } => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        CliError { code, msg: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Global options; flags override the config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub tol: Option<f64>,
    pub window: Option<String>,
    pub pmax: Option<String>,
    pub seed: Option<u64>,
}

impl Settings {
    pub fn from_toml(text: &str) -> CliResult<Settings> {
        toml::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))
    }

    /// `over` wins wherever it is set.
    pub fn merged(self, over: Settings) -> Settings {
        Settings {
            tol: over.tol.or(self.tol),
            window: over.window.or(self.window),
            pmax: over.pmax.or(self.pmax),
            seed: over.seed.or(self.seed),
        }
    }

    pub fn tol(&self, default: f64) -> CliResult<f64> {
        match self.tol {
            Some(t) if !(t > 0.0) => Err(CliError::input("--tol must be positive")),
            Some(t) => Ok(t),
            None => Ok(default),
        }
    }

    pub fn window(&self, default: (Index, Index)) -> CliResult<(Index, Index)> {
        self.window.as_deref().map_or(Ok(default), |w| Ok(parse_window(w)?))
    }

    pub fn pmax(&self, default: Index) -> CliResult<Index> {
        let p = self.pmax.as_deref().map_or(Ok(default), parse_index)?;
        if p < 1 {
            return Err(CliError::input("--pmax must be >= 1"));
        }
        Ok(p)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(7)
    }
}

pub enum Output {
    Report(Report),
    Csv(String),
}

fn weight(id: &str) -> CliResult<Weight> {
    Ok(Weight::by_name(id)?)
}

fn ctx(s: &Settings, hi: Index) -> SpecCtx {
    SpecCtx { hi, seed: s.seed() }
}

pub fn weights_list() -> Report {
    let mut r = Report::new("weights list");
    for g in Weight::catalog() {
        let v = g.eval(1024.0);
        r.push(Item::new(g.name(), Body::Text(format!("g(2^10) = {}", fmt_f64(v)))));
    }
    r
}

pub fn weights_check(name: &str, horizon: Option<&str>, s: &Settings) -> CliResult<Report> {
    let g = weight(name)?;
    let h = horizon.map_or(Ok(RV_HORIZON), parse_real)?;
    let rv_tol = s.tol(RV_TOL)?;
    let grid = log2_grid(0.0, h.log2().min(1000.0), 64);
    let mut r = Report::new("weights check");
    r.input("name", name).input("horizon", h);
    r.tol("rv", rv_tol).tol("l1", L1_TOL);
    r.push(Item::new("doubling", Body::Envelope(doubling_envelope(&g, &grid)?)));
    r.push(Item::new("rv", Body::Verdict(rv_check(&g, h, rv_tol)?)));
    r.push(Item::new("l1", Body::Verdict(l1_check(&g, L1_NMAX, L1_TOL)?)));
    r.push(Item::new("tail_ratio", Body::Envelope(rv_tail_ratio(&g, &grid)?)));
    let ratio = dyadic_sum_ratio(&g, 512)?;
    r.push(Item::new("dyadic_sum_ratio_512", Body::Scalar(ratio)).reference(DYADIC_SUM_LIMIT));
    r.push(Item::new(
        "stated_constant",
        Body::Text(format!(
            "stated limit log 2 = {} differs from the derived 1/log 2 by {}",
            fmt_f64(DYADIC_SUM_LOG2_CONVENTION),
            fmt_f64(DYADIC_SUM_LIMIT - DYADIC_SUM_LOG2_CONVENTION)
        )),
    ));
    Ok(r)
}

fn csv(x: &DyadicSequence, w: (Index, Index)) -> CliResult<String> {
    if w.1 - w.0 + 1 > DUMP_LIMIT {
        return Err(CliError::input(format!("window too long to dump; at most {DUMP_LIMIT} rows")));
    }
    let mut out = String::from("n,value\n");
    for (i, v) in x.values(w.0, w.1)?.into_iter().enumerate() {
        let _ = writeln!(out, "{},{}", w.0 + i as Index, fmt_f64(v));
    }
    Ok(out)
}

pub fn seq_analyze(spec_arg: &str, op: &str, s: &Settings) -> CliResult<Output> {
    let hint = s.window((0, 1 << 20))?;
    let x = spec::seq_spec(spec_arg, ctx(s, hint.1))?;
    let w = s.window(x.window())?;
    let mut r = Report::new("seq analyze");
    r.input("spec", spec_arg).input("op", op).window("analysis", w);
    match op {
        "tail" => {
            r.push(Item::new("tail", Body::Envelope(tail_envelope(&x, w)?)));
        }
        "banach" => {
            let p = s.pmax(1 << 10)?;
            r.input("pmax", p as f64);
            r.push(Item::new("banach", Body::Envelope(banach_envelope(&x, p, w)?)));
        }
        "almost" => {
            let (p, tol) = (s.pmax(1 << 10)?, s.tol(1e-2)?);
            r.input("pmax", p as f64).tol("almost", tol);
            r.push(Item::new("almost_convergent", Body::Verdict(almost_convergent(&x, p, tol, w)?)));
        }
        "invariance" => {
            let p = s.pmax(1 << 10)?;
            r.input("pmax", p as f64);
            r.push(Item::new("invariance_residual", Body::Scalar(invariance_residual(&x, p, w)?)));
        }
        "ordering" => return Ok(Output::Csv(csv(&ordering_numbers(&x, w)?, w)?)),
        _ => return Err(CliError::input(format!("unknown analysis '{op}'"))),
    }
    Ok(Output::Report(r))
}

/// Arguments of `seq transform`.
#[derive(Clone, Debug, Default)]
pub struct TransformArgs {
    pub op: String,
    pub spec: Option<String>,
    pub mu: Option<String>,
    pub weight: Option<String>,
    pub to: Option<String>,
    pub level: Option<f64>,
}

pub fn seq_transform(a: &TransformArgs, s: &Settings, json: bool) -> CliResult<Output> {
    let hint = s.window((0, 1 << 10))?;
    let c = ctx(s, hint.1);
    let need = |o: &Option<String>, what: &str| {
        o.clone().ok_or_else(|| CliError::input(format!("--op {} needs {what}", a.op)))
    };
    let g = a.weight.as_deref().map(weight).transpose()?;
    let need_g = || g.clone().ok_or_else(|| CliError::input(format!("--op {} needs --weight", a.op)));
    let mut r = Report::new("seq transform");
    r.input("op", a.op.as_str());
    let (image, w): (DyadicSequence, (Index, Index)) = match a.op.as_str() {
        "D" => {
            let x = spec::seq_spec(&need(&a.spec, "--spec")?, c)?;
            let (head, blocks) = synth_d(&x, g.as_ref()).blocks()?;
            let mut out = format!("# head {}\nstart,len,value\n", fmt_f64(head.to_f64()));
            for b in blocks {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt_f64(b.start.to_f64()),
                    fmt_f64(b.len.to_f64()),
                    fmt_f64(b.value.to_f64())
                );
            }
            return Ok(Output::Csv(out));
        }
        "cesaro" | "M" | "Cinv" | "N" => {
            let x = spec::seq_spec(&need(&a.spec, "--spec")?, c)?;
            let w = s.window(x.window())?;
            let y = match (a.op.as_str(), &g) {
                ("cesaro", Some(g)) => cesaro_g(&x, g, w)?,
                ("cesaro", None) => cesaro(&x, w)?,
                ("M", _) => log_mean(&x, w)?,
                ("Cinv", _) => cesaro_inverse(&x)?,
                _ => n_map(&x, &need_g()?)?,
            };
            (y, w)
        }
        "phi" => {
            let mu = spec::mu_spec(&need(&a.mu, "--mu")?, c)?;
            (phi_g(&mu, &need_g()?, hint)?, hint)
        }
        "split" => {
            let mu = spec::mu_spec(&need(&a.mu, "--mu")?, c)?;
            let level = a.level.ok_or_else(|| CliError::input("--op split needs --level"))?;
            let sp = split_at_level(&mu, level)?;
            r.input("level", level);
            r.push(Item::new("d", Body::Scalar(sp.d.to_f64())));
            r.push(Item::new("head_mass", Body::Scalar(sp.head.integral(sp.head.origin(), sp.d)?.to_f64())));
            return Ok(Output::Report(r));
        }
        "transport" => {
            let mu = spec::mu_spec(&need(&a.mu, "--mu")?, c)?;
            let to = weight(&need(&a.to, "--to")?)?;
            let pushed = transport_pushforward(&mu, &need_g()?, &to, hint)?;
            return mu_dump(&pushed, hint, json, r);
        }
        _ => return Err(CliError::input(format!("unknown transform '{}'", a.op))),
    };
    if json {
        r.window("image", w);
        r.push(Item::new("image", Body::Envelope(tail_envelope(&image, w)?)));
        r.push(Item::new("first", Body::Scalar(image.get(w.0)?)));
        r.push(Item::new("last", Body::Scalar(image.get(w.1)?)));
        return Ok(Output::Report(r));
    }
    Ok(Output::Csv(csv(&image, w)?))
}

/// `mu(2^n)` for `n` in the window.
fn mu_dump(mu: &MuFunction, w: (Index, Index), json: bool, mut r: Report) -> CliResult<Output> {
    if w.1 - w.0 + 1 > DUMP_LIMIT || w.0 < -1000 || w.1 > 1 << 40 {
        return Err(CliError::input("window too long to dump"));
    }
    let vals: Vec<(Index, Ext)> = (w.0..=w.1).map(|n| (n, mu.value_at(Ext::pow2_i128(n)))).collect();
    if json {
        for (n, v) in vals {
            r.push(Item::new(format!("mu(2^{n})"), Body::Text(format!("{v:?}"))));
        }
        return Ok(Output::Report(r));
    }
    let mut out = String::from("n,log2_mu\n");
    for (n, v) in vals {
        let _ = writeln!(out, "{n},{}", fmt_f64(v.log2()));
    }
    Ok(Output::Csv(out))
}

pub const DIXMIER_WINDOW: (Index, Index) = (1 << 16, 1 << 18);
pub const TRANSPORT_WINDOW: (Index, Index) = (1 << 80, 1 << 82);
pub const MEASURE_WINDOW: (Index, Index) = (1 << 19, 1 << 20);

pub fn dixmier(mu_arg: &str, g_id: &str, classic: Option<&str>, s: &Settings) -> CliResult<Report> {
    let w = s.window(DIXMIER_WINDOW)?;
    let g = weight(g_id)?;
    let mu = spec::mu_spec(mu_arg, ctx(s, w.1))?;
    let mut r = Report::new("dixmier");
    r.input("mu", mu_arg).input("weight", g_id).window("dixmier", w);
    r.push(Item::new("dixmier", Body::Envelope(dixmier_envelope(&mu, &g, w)?)));
    if let Some(p) = classic {
        let pre = Prefactor::parse(p)?;
        r.input("prefactor", p);
        let grid: Vec<f64> = (0..33).map(|j| w.0 as f64 + (w.1 - w.0) as f64 * j as f64 / 32.0).collect();
        r.push(Item::new("classic", Body::Envelope(dixmier_classic(&mu, &g, pre, &grid)?)));
    }
    Ok(r)
}

/// Transport from `L_f` to `L_g`: Cesaro means in `g` of `Phi_f(mu)`.
pub fn transport(from: &str, to: &str, mu_arg: &str, s: &Settings) -> CliResult<Report> {
    let w = s.window(TRANSPORT_WINDOW)?;
    let tol = s.tol(0.02)?;
    let (g, f) = (weight(from)?, weight(to)?);
    let mu = spec::mu_spec(mu_arg, ctx(s, w.1))?;
    let mut r = Report::new("transport");
    r.input("from", from).input("to", to).input("mu", mu_arg).window("transport", w).tol("subset", tol);
    let t = transported_envelope(&mu, &g, &f, w)?;
    let d = dixmier_envelope(&mu, &f, w)?;
    let strict = t.within(&d, 0.0) && d.width() > t.width() + tol;
    r.push(Item::new("transported", Body::Envelope(t)));
    r.push(Item::new("dixmier", Body::Envelope(d)));
    r.push(Item::new("strict_subset", Body::Text(if strict { "yes" } else { "no" }.into())));
    Ok(r)
}

pub fn measure(mu_arg: &str, g_id: &str, norm: Normalization, s: &Settings) -> CliResult<Report> {
    let w = s.window(MEASURE_WINDOW)?;
    let (p, tol) = (s.pmax(1 << 10)?, s.tol(1e-2)?);
    let g = weight(g_id)?;
    let mu = spec::mu_spec(mu_arg, ctx(s, w.1))?;
    let mut r = Report::new("measure");
    r.input("mu", mu_arg).input("weight", g_id).input("pmax", p as f64);
    r.input("normalization", format!("{norm:?}").to_lowercase());
    r.window("measurability", w).tol("measurability", tol);
    r.push(Item::new("measurability", Body::Verdict(measurability(&mu, &g, p, tol, w, norm)?)));
    Ok(r)
}

/// Arguments of `connes check`.
#[derive(Clone, Debug)]
pub struct ConnesArgs {
    pub symbol: String,
    pub weight: String,
    pub xi_max: String,
    pub k_max: String,
}

impl Default for ConnesArgs {
    fn default() -> Self {
        ConnesArgs {
            symbol: "model".into(),
            weight: "g_pow(1)".into(),
            xi_max: "2^20".into(),
            k_max: "2^18".into(),
        }
    }
}

pub fn connes_check(a: &ConnesArgs, s: &Settings) -> CliResult<Report> {
    let g = weight(&a.weight)?;
    let xi_max = parse_real(&a.xi_max)?;
    let k_max = parse_index(&a.k_max)?;
    if !(xi_max >= 4.0) || k_max < 4 || k_max > 1 << 24 {
        return Err(CliError::input("need xi-max >= 4 and 4 <= k-max <= 2^24"));
    }
    let (tol, p) = (s.tol(0.05)?, s.pmax(1 << 8)?);
    let grid = SymbolGrid::new(spec::symbol_spec(&a.symbol)?, xi_max.log2())?;
    let op = ModelOperator::new(k_max as i64, |k| 1.0 / bracket(k as f64), grid.clone())?;
    let top = (k_max as f64).log2();
    let mut r = Report::new("connes check");
    r.input("symbol", a.symbol.as_str()).input("weight", a.weight.as_str());
    r.input("xi_max", xi_max).input("k_max", k_max as f64).input("pmax", p as f64);
    r.tol("trace_formula", tol).tol("measurability", tol);
    let rtol = 1e-8;
    let coarse = diagonal_vs_symbol(&op, &g, &log2_grid(2.0, top, 33), rtol)?;
    let fine = diagonal_vs_symbol(&op, &g, &log2_grid(2.0, top, 65), rtol)?;
    r.push(Item::new("hi_change", Body::Scalar((fine.hi - coarse.hi).abs())));
    r.push(Item::new("diagonal_vs_symbol_coarse", Body::Envelope(coarse)));
    r.push(Item::new("diagonal_vs_symbol", Body::Envelope(fine)));
    let mut nb = 0;
    while shell_top(nb + 1) <= k_max as i64 {
        nb += 1;
    }
    r.window("trace_formula", (0, nb));
    r.push(Item::new("trace_formula", Body::Verdict(trace_formula_check(&op, &g, (0, nb), p, tol)?)));
    let ns = xi_max.log2().floor() as Index - 1;
    r.window("measurability", (0, ns));
    r.push(Item::new("measurability", Body::Verdict(connes_measurability(&grid, &g, (0, ns), p, tol)?)));
    Ok(r)
}

/// Windows of the Dixmier and transported envelopes in `reproduce dixcor`.
pub const DIXCOR_DIXMIER_WINDOW: (Index, Index) = (1 << 16, 1 << 18);
pub const DIXCOR_TRANSPORT_WINDOW: (Index, Index) = (1 << 80, 1 << 82);

pub fn reproduce_dixcor(s: &Settings) -> CliResult<Report> {
    let tol = s.tol(0.02)?;
    let mut r = Report::new("reproduce dixcor");
    r.tol("assertions", tol);
    let y = DyadicSequence::y_dixcor(1 << 23)?;
    for m in 6..=11i128 {
        for (idx, label, want) in [
            ((1 << (2 * m + 1)) - 1, format!("2^{}-1", 2 * m + 1), 2.0 / 3.0),
            ((1 << (2 * m)) - 1, format!("2^{}-1", 2 * m), 1.0 / 3.0),
        ] {
            let cy = cesaro(&y, (idx, idx))?.value(idx);
            r.push(
                Item::new(format!("Cy@{label}"), Body::Scalar(cy))
                    .reference(want)
                    .check((cy - want).abs() <= tol, format!("within {tol} of {}", fmt_f64(want))),
            );
        }
    }
    for m in 6..=11i128 {
        for (idx, label) in [
            ((1 << (2 * m + 1)) - 1, format!("2^{}-1", 2 * m + 1)),
            ((1 << (2 * m)) - 1, format!("2^{}-1", 2 * m)),
        ] {
            let my = log_mean(&y, (idx, idx))?.value(idx);
            r.push(Item::new(format!("My@{label}"), Body::Scalar(my)).reference(0.5));
        }
    }
    let f = Weight::f_cor();
    let wd = DIXCOR_DIXMIER_WINDOW;
    let mu = spec::mu_spec("dfy", SpecCtx { hi: wd.1, seed: 0 })?;
    let d = dixmier_envelope(&mu, &f, wd)?;
    r.window("dixmier", wd);
    let ok = (d.lo - 1.0 / 3.0).abs() <= tol && (d.hi - 2.0 / 3.0).abs() <= tol;
    r.push(Item::new("dixmier", Body::Envelope(d.clone())).check(ok, format!("[1/3, 2/3] within {tol}")));
    let wt = DIXCOR_TRANSPORT_WINDOW;
    let mu = spec::mu_spec("dfy", SpecCtx { hi: wt.1, seed: 0 })?;
    let t = transported_envelope(&mu, &Weight::g_cor(), &f, wt)?;
    r.window("transported", wt);
    let ok = t.width() <= tol && (t.midpoint() - 0.5).abs() <= tol;
    r.push(
        Item::new("transported", Body::Envelope(t.clone()))
            .reference(0.5)
            .check(ok, format!("width <= {tol}, midpoint within {tol} of 1/2")),
    );
    let strict = t.within(&d, 0.0) && d.width() > t.width() + tol;
    r.push(
        Item::new("strict_subset", Body::Text(if strict { "yes" } else { "no" }.into()))
            .check(strict, "transported envelope strictly inside the Dixmier envelope"),
    );
    Ok(r)
}

pub const SCHRODINGER_WINDOW: (Index, Index) = (1 << 19, 1 << 20);

pub fn reproduce_schrodinger(c3: f64, s: &Settings) -> CliResult<Report> {
    if !(c3 > 0.0 && c3.is_finite()) {
        return Err(CliError::input("c3 must be positive"));
    }
    let tol = s.tol(0.03)?;
    let w = s.window(SCHRODINGER_WINDOW)?;
    let p = s.pmax(1 << 10)?;
    let g = Weight::g_schro();
    let mu = MuFunction::from_weight(&g, c3)?;
    let v = measurability(&mu, &g, p, tol, w, Normalization::Diagonal)?;
    let ok = v.is_yes() && v.value.map_or(false, |x| (x - c3).abs() <= tol);
    let mut r = Report::new("reproduce schrodinger");
    r.input("c3", c3).input("pmax", p as f64).input("normalization", "diagonal");
    r.window("measurability", w).tol("measurability", tol);
    r.push(
        Item::new("measurability", Body::Verdict(v))
            .reference(c3)
            .check(ok, format!("yes with value within {tol} of c3")),
    );
    Ok(r)
}
