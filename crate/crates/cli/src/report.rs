use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use stw::num::round_sig;
use stw::seqcore::{Answer, ValueEnvelope, Verdict};
use stw::Index;

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Body {
    Envelope(ValueEnvelope),
    Verdict(Verdict),
    Scalar(f64),
    Text(String),
}

/// An embedded assertion; any failed check makes the command exit with 4.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub passed: bool,
    pub expected: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Item {
    pub name: String,
    #[serde(flatten)]
    pub body: Body,
    /// Value the quantity is compared against in the report, asserted or not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<Check>,
}

impl Item {
    pub fn new(name: impl Into<String>, body: Body) -> Item {
        Item { name: name.into(), body, reference: None, check: None }
    }

    pub fn reference(mut self, r: f64) -> Item {
        self.reference = Some(r);
        self
    }

    pub fn check(mut self, passed: bool, expected: impl Into<String>) -> Item {
        self.check = Some(Check { passed, expected: expected.into() });
        self
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Provenance {
    pub windows: BTreeMap<String, (Index, Index)>,
    pub tolerances: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: BTreeMap<String, Value>,
    pub results: Vec<Item>,
    pub provenance: Provenance,
}

impl Report {
    pub fn new(command: &str) -> Report {
        Report {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            results: Vec::new(),
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION").to_string(),
                ..Provenance::default()
            },
        }
    }

    pub fn input(&mut self, k: &str, v: impl Into<Value>) -> &mut Self {
        self.inputs.insert(k.to_string(), v.into());
        self
    }

    pub fn window(&mut self, k: &str, w: (Index, Index)) -> &mut Self {
        self.provenance.windows.insert(k.to_string(), w);
        self
    }

    pub fn tol(&mut self, k: &str, t: f64) -> &mut Self {
        self.provenance.tolerances.insert(k.to_string(), t);
        self
    }

    pub fn push(&mut self, item: Item) -> &mut Self {
        self.results.push(item);
        self
    }

    pub fn passed(&self) -> bool {
        self.results.iter().all(|i| i.check.as_ref().map_or(true, |c| c.passed))
    }

    pub fn get(&self, name: &str) -> Option<&Item> {
        self.results.iter().find(|i| i.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SigFormatter::default());
        self.serialize(&mut ser).expect("report serializes");
        String::from_utf8(out).expect("utf8 json")
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.command);
        for item in &self.results {
            let _ = write!(s, "  {:<28} {}", item.name, body_text(&item.body));
            if let Some(r) = item.reference {
                let _ = write!(s, "  (ref {})", fmt_f64(r));
            }
            if let Some(c) = &item.check {
                let _ = write!(s, "  {} [{}]", if c.passed { "PASS" } else { "FAIL" }, c.expected);
            }
            s.push('\n');
        }
        s
    }
}

pub fn fmt_f64(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let r = round_sig(x, 12);
    let a = r.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn env_text(e: &ValueEnvelope) -> String {
    format!(
        "[{}, {}] on [{}, {}] ({:?})",
        fmt_f64(e.lo),
        fmt_f64(e.hi),
        e.window.0,
        e.window.1,
        e.status
    )
    .to_lowercase()
}

fn body_text(b: &Body) -> String {
    match b {
        Body::Envelope(e) => env_text(e),
        Body::Scalar(x) => fmt_f64(*x),
        Body::Text(t) => t.clone(),
        Body::Verdict(v) => {
            let mut s = match v.answer {
                Answer::Yes => "yes".to_string(),
                Answer::No => "no".to_string(),
                Answer::Inconclusive => "inconclusive".to_string(),
            };
            if let Some(x) = v.value {
                let _ = write!(s, ", value {}", fmt_f64(x));
            }
            if let Some(e) = &v.evidence.envelope {
                let _ = write!(s, ", envelope {}", env_text(e));
            }
            for (k, x) in &v.evidence.metrics {
                let _ = write!(s, ", {k} {}", fmt_f64(*x));
            }
            for n in &v.evidence.notes {
                let _ = write!(s, "; {n}");
            }
            s
        }
    }
}

/// Pretty JSON with floats at 12 significant digits.
#[derive(Default)]
pub struct SigFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}
