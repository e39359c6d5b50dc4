//! Sequence, mu and symbol specifications.
//!
//! A spec argument is inline JSON, a path to a JSON file, or a shorthand:
//! sequences `alt`, `y`, `chi`, `delta0`, `random`; mu functions `dfy`, `dgy`,
//! `schro`, `weight:<id>`; symbols `model`.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use stw::connes::{Symbol, Tabulated, XProfile, XiProfile};
use stw::seqcore::Block;
use stw::transforms::{rearrange, synth_d, MuFunction, Tail};
use stw::{DyadicSequence, Error, Ext, Index, Result, Side, Weight};

/// `2^20`, `4^11`, `2^21-1`, `-3` or a plain integer.
pub fn parse_index(s: &str) -> Result<Index> {
    let bad = || Error::Parse(format!("bad index '{s}'"));
    let s = s.trim();
    if s.is_empty() {
        return Err(bad());
    }
    let (body, adj) = match s[1..].find(['+', '-']) {
        Some(i) if s.contains('^') => {
            let (b, a) = s.split_at(i + 1);
            (b, a.parse::<Index>().map_err(|_| bad())?)
        }
        _ => (s, 0),
    };
    let v = match body.split_once('^') {
        Some((b, e)) => {
            let b: Index = b.trim().parse().map_err(|_| bad())?;
            let e: u32 = e.trim().parse().map_err(|_| bad())?;
            b.checked_pow(e).ok_or_else(bad)?
        }
        None => body.parse().map_err(|_| bad())?,
    };
    v.checked_add(adj).ok_or_else(bad)
}

/// `a:b` with [`parse_index`] endpoints.
pub fn parse_window(s: &str) -> Result<(Index, Index)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("window '{s}' is not of the form a:b")))?;
    let w = (parse_index(a)?, parse_index(b)?);
    if w.1 < w.0 {
        return Err(Error::Parse(format!("empty window '{s}'")));
    }
    Ok(w)
}

/// Positive real, with `2^k` accepted.
pub fn parse_real(s: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("bad number '{s}'"));
    match s.trim().split_once('^') {
        Some((b, e)) => {
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            let e: f64 = e.trim().parse().map_err(|_| bad())?;
            Ok(b.powf(e))
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

/// Inline JSON, a file, or `None` for a shorthand.
fn load(arg: &str) -> Result<Option<Value>> {
    let t = arg.trim();
    if t.starts_with('{') || t.starts_with('[') {
        return serde_json::from_str(t).map(Some).map_err(|e| Error::Parse(e.to_string()));
    }
    if Path::new(t).is_file() {
        let s = std::fs::read_to_string(t).map_err(|e| Error::Parse(format!("{t}: {e}")))?;
        return serde_json::from_str(&s).map(Some).map_err(|e| Error::Parse(format!("{t}: {e}")));
    }
    Ok(None)
}

fn index_of(v: &Value) -> Result<Index> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(|x| x as Index)
            .ok_or_else(|| Error::Parse(format!("index {n} is not an integer"))),
        Value::String(s) => parse_index(s),
        _ => Err(Error::Parse(format!("expected an index, got {v}"))),
    }
}

fn field<'a>(v: &'a Value, k: &str) -> Option<&'a Value> {
    v.get(k).filter(|x| !x.is_null())
}

fn num(v: &Value, k: &str) -> Result<Option<f64>> {
    match field(v, k) {
        None => Ok(None),
        Some(x) => x
            .as_f64()
            .map(Some)
            .ok_or_else(|| Error::Parse(format!("'{k}' must be a number"))),
    }
}

fn index_field(v: &Value, k: &str, default: Index) -> Result<Index> {
    field(v, k).map_or(Ok(default), index_of)
}

fn side_of(v: &Value) -> Result<Side> {
    match field(v, "side").and_then(Value::as_str) {
        None | Some("zplus") | Some("z+") => Ok(Side::ZPlus),
        Some("two-sided") | Some("z") => Ok(Side::TwoSided),
        Some(s) => Err(Error::Parse(format!("unknown side '{s}'"))),
    }
}

fn floats(v: &Value, k: &str) -> Result<Vec<f64>> {
    field(v, k)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse(format!("'{k}' must be an array")))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| Error::Parse(format!("'{k}' must hold numbers"))))
        .collect()
}

/// Context for specs that leave the horizon or randomness open.
#[derive(Clone, Copy, Debug)]
pub struct SpecCtx {
    pub hi: Index,
    pub seed: u64,
}

pub fn seq_spec(arg: &str, ctx: SpecCtx) -> Result<DyadicSequence> {
    match load(arg)? {
        Some(v) => seq_from_json(&v, ctx),
        None => formula(arg.trim(), &Value::Null, ctx),
    }
}

pub fn seq_from_json(v: &Value, ctx: SpecCtx) -> Result<DyadicSequence> {
    let kind = field(v, "kind").and_then(Value::as_str).unwrap_or("");
    match kind {
        "runlength" => {
            let side = side_of(v)?;
            let rows = field(v, "blocks")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("runlength spec needs 'blocks'".into()))?;
            let mut blocks = Vec::with_capacity(rows.len());
            for r in rows {
                let r = r
                    .as_array()
                    .filter(|r| r.len() == 3)
                    .ok_or_else(|| Error::Parse("each block is [start, len, value]".into()))?;
                let value = r[2].as_f64().ok_or_else(|| Error::Parse("block value must be a number".into()))?;
                blocks.push(Block { start: index_of(&r[0])?, len: index_of(&r[1])?, value });
            }
            let lo_default = blocks.first().map_or(0, |b| b.start.min(0));
            let hi_default = blocks.last().map_or(0, |b| b.end());
            let lo = index_field(v, "lo", if side == Side::ZPlus { 0 } else { lo_default })?;
            let hi = index_field(v, "hi", hi_default)?;
            DyadicSequence::runs(side, lo, hi, blocks)
        }
        "values" => {
            let side = side_of(v)?;
            let offset = index_field(v, "offset", 0)?;
            DyadicSequence::dense(side, offset, floats(v, "data")?)
        }
        "formula" => {
            let id = field(v, "id")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::Parse("formula spec needs 'id'".into()))?;
            formula(id, field(v, "params").unwrap_or(&Value::Null), ctx)
        }
        other => Err(Error::Parse(format!("unknown sequence kind '{other}'"))),
    }
}

fn formula(id: &str, params: &Value, ctx: SpecCtx) -> Result<DyadicSequence> {
    let side = side_of(params)?;
    let lo = index_field(params, "lo", 0)?;
    let hi = index_field(params, "hi", ctx.hi)?;
    match id {
        "alt" => DyadicSequence::alt(side, lo, hi),
        "y" | "y_dixcor" => DyadicSequence::y_dixcor(hi),
        "chi" => DyadicSequence::chi(side, lo, hi),
        "delta0" => DyadicSequence::delta(side, lo, hi, 0),
        "delta" => DyadicSequence::delta(side, lo, hi, index_field(params, "at", 0)?),
        "const" => DyadicSequence::constant(side, lo, hi, num(params, "c")?.unwrap_or(1.0)),
        "random" => {
            // uniform on [-1, 1], reproducible from the seed
            let seed = field(params, "seed").and_then(Value::as_u64).unwrap_or(ctx.seed);
            let len = hi - lo + 1;
            if !(1..=1 << 24).contains(&len) {
                return Err(Error::domain("random sequences are limited to 2^24 terms"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            DyadicSequence::dense(side, lo, data)
        }
        _ => Err(Error::Parse(format!("unknown sequence '{id}'"))),
    }
}

pub fn mu_spec(arg: &str, ctx: SpecCtx) -> Result<MuFunction> {
    if let Some(v) = load(arg)? {
        return mu_from_json(&v, ctx);
    }
    let t = arg.trim();
    let dyadic = |w: Weight| rearrange(&synth_d(&DyadicSequence::y_dixcor(ctx.hi)?, Some(&w)));
    match t {
        "dfy" => dyadic(Weight::f_cor()),
        "dgy" => dyadic(Weight::g_cor()),
        "schro" => MuFunction::from_weight(&Weight::g_schro(), 1.0),
        _ => match t.strip_prefix("weight:") {
            Some(id) => MuFunction::from_weight(&Weight::by_name(id)?, 1.0),
            None => Err(Error::Parse(format!("unknown mu '{t}'"))),
        },
    }
}

fn weight_field(v: &Value) -> Result<Option<Weight>> {
    match field(v, "weight").and_then(Value::as_str) {
        None | Some("none") => Ok(None),
        Some(id) => Weight::by_name(id).map(Some),
    }
}

pub fn mu_from_json(v: &Value, ctx: SpecCtx) -> Result<MuFunction> {
    match field(v, "kind").and_then(Value::as_str).unwrap_or("") {
        "dyadic-step" => {
            let coeffs = field(v, "coeffs").ok_or_else(|| Error::Parse("dyadic-step needs 'coeffs'".into()))?;
            let x = match coeffs {
                Value::String(s) => seq_spec(s, ctx)?,
                other => seq_from_json(other, ctx)?,
            };
            rearrange(&synth_d(&x, weight_field(v)?.as_ref()))
        }
        "breakpoints" => {
            let t = floats(v, "t")?;
            let vals = floats(v, "v")?;
            let tail = match field(v, "tail") {
                None => None,
                Some(Value::String(s)) if s == "zero" => None,
                Some(tv) => {
                    let w = weight_field(tv)?
                        .ok_or_else(|| Error::Parse("tail needs a 'weight'".into()))?;
                    let start = *t.last().ok_or_else(|| Error::Parse("'t' is empty".into()))?;
                    // default scale continues the last step
                    let scale = match (num(tv, "scale")?, vals.last()) {
                        (Some(s), _) => s,
                        (None, Some(&last)) => last / w.eval(start),
                        (None, None) => 1.0,
                    };
                    Some(Tail { scale, weight: w, shift: Ext::ZERO, until: None })
                }
            };
            MuFunction::steps(
                t.into_iter().map(Ext::from_f64).collect(),
                vals.into_iter().map(Ext::from_f64).collect(),
                tail,
            )
        }
        other => Err(Error::Parse(format!("unknown mu kind '{other}'"))),
    }
}

/// Symbol files:
///
/// * `{"kind":"separable","x":"indicator01"|"sin2","xi":"bracket-inverse"|{"bracket-pow":s}}`
/// * `{"kind":"tabulated","x":[..],"xi":[..],"values":[..]}` with `values`
///   row-major, `x` the slow index: `values[i * len(xi) + j] = p(x[i], xi[j])`.
pub fn symbol_spec(arg: &str) -> Result<Symbol> {
    match load(arg)? {
        Some(v) => symbol_from_json(&v),
        None if arg.trim() == "model" => Ok(Symbol::model()),
        None => Err(Error::Parse(format!("unknown symbol '{}'", arg.trim()))),
    }
}

pub fn symbol_from_json(v: &Value) -> Result<Symbol> {
    match field(v, "kind").and_then(Value::as_str).unwrap_or("") {
        "separable" => {
            let x = match field(v, "x").and_then(Value::as_str).unwrap_or("indicator01") {
                "indicator01" => XProfile::Indicator01,
                "sin2" | "sin-squared" => XProfile::SinSquared,
                s => return Err(Error::Parse(format!("unknown x profile '{s}'"))),
            };
            let xi = match field(v, "xi") {
                None => XiProfile::BracketInverse,
                Some(Value::String(s)) if s == "bracket-inverse" => XiProfile::BracketInverse,
                Some(o) => match num(o, "bracket-pow")? {
                    Some(s) => XiProfile::BracketPow(s),
                    None => return Err(Error::Parse(format!("unknown xi profile {o}"))),
                },
            };
            Ok(Symbol::Separable { x, xi })
        }
        "tabulated" => Ok(Symbol::Tabulated(Arc::new(Tabulated::new(
            floats(v, "x")?,
            floats(v, "xi")?,
            floats(v, "values")?,
        )?))),
        other => Err(Error::Parse(format!("unknown symbol kind '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices() {
        assert_eq!(parse_index("2^20").unwrap(), 1 << 20);
        assert_eq!(parse_index("4^41").unwrap(), 1i128 << 82);
        assert_eq!(parse_index("2^21-1").unwrap(), (1 << 21) - 1);
        assert_eq!(parse_index("-7").unwrap(), -7);
        assert!(parse_index("2^x").is_err());
        assert_eq!(parse_window("2^16:2^18").unwrap(), (1 << 16, 1 << 18));
        assert!(parse_window("5:3").is_err());
    }

    #[test]
    fn sequence_specs() {
        let ctx = SpecCtx { hi: 64, seed: 1 };
        let x = seq_spec(r#"{"kind":"runlength","blocks":[[0,3,1.0],[5,2,-2.0]]}"#, ctx).unwrap();
        assert_eq!(x.window(), (0, 6));
        assert_eq!(x.value(1), 1.0);
        assert_eq!(x.value(3), 0.0);
        assert_eq!(x.value(6), -2.0);
        let y = seq_spec("y", ctx).unwrap();
        assert_eq!(y.value(4), 1.0);
        assert_eq!(y.value(8), 0.0);
        let r1 = seq_spec("random", ctx).unwrap();
        let r2 = seq_spec("random", ctx).unwrap();
        assert_eq!(r1.values(0, 64).unwrap(), r2.values(0, 64).unwrap());
        assert!(seq_spec(r#"{"kind":"nope"}"#, ctx).is_err());
    }

    #[test]
    fn mu_and_symbol_specs() {
        let ctx = SpecCtx { hi: 64, seed: 1 };
        let mu = mu_spec(
            r#"{"kind":"breakpoints","t":[0,1,3],"v":[2,1],"tail":{"weight":"g_pow(1)"}}"#,
            ctx,
        )
        .unwrap();
        assert_eq!(mu.value_at(Ext::from_f64(2.0)).to_f64(), 1.0);
        assert!((mu.value_at(Ext::from_f64(6.0)).to_f64() - 0.5).abs() < 1e-15);
        assert!(mu_spec("dfy", ctx).is_ok());
        assert!(symbol_spec("model").is_ok());
        let s = symbol_spec(r#"{"kind":"tabulated","x":[0,1],"xi":[0,1,2],"values":[1,1,1,1,1,1]}"#).unwrap();
        assert_eq!(s.eval(0.5, 1.5), 1.0);
    }
}
