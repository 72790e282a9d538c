//! Deterministic JSON report rendering.
//!
//! Reports must be byte-identical for identical configuration and seed, so
//! nothing here depends on time, paths, or iteration order: objects keep
//! insertion order (`serde_json` with `preserve_order`) and every float is
//! formatted to exactly 15 significant digits by a custom formatter.

use std::io;

use pblab::C64;
use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{Map, Number, Value};

/// Compact JSON formatter that writes floats as `d.dddddddddddddde±x`,
/// 15 significant digits, so report bytes do not depend on shortest-float
/// heuristics.
struct SigFigFormatter;

impl Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.14e}")
    }
}

/// Render a report tree with the deterministic formatter, newline-terminated.
pub fn render(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigFormatter);
    value
        .serialize(&mut ser)
        .expect("in-memory JSON serialization cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("the JSON serializer emits UTF-8")
}

/// A finite float as a JSON number; non-finite values become explicit
/// strings instead of panicking inside the `Number` constructor.
pub fn num(value: f64) -> Value {
    Number::from_f64(value)
        .map(Value::Number)
        .unwrap_or_else(|| Value::String(format!("{value}")))
}

/// A complex value as an ordered `{re, im}` object.
pub fn cnum(value: C64) -> Value {
    let mut map = Map::new();
    map.insert("re".into(), num(value.re));
    map.insert("im".into(), num(value.im));
    Value::Object(map)
}

/// A label pair as a two-element array.
pub fn label(pair: (usize, usize)) -> Value {
    Value::Array(vec![Value::from(pair.0 as u64), Value::from(pair.1 as u64)])
}

/// Incremental builder for one check entry. Field order is insertion order;
/// `status` always lands last so failures are easy to spot at line ends.
pub struct CheckBuilder {
    map: Map<String, Value>,
}

impl CheckBuilder {
    pub fn new(name: &str, equation: &str) -> Self {
        let mut map = Map::new();
        map.insert("name".into(), Value::String(name.into()));
        map.insert("equation".into(), Value::String(equation.into()));
        Self { map }
    }

    pub fn field(mut self, key: &str, value: Value) -> Self {
        self.map.insert(key.into(), value);
        self
    }

    /// Close with a residual-versus-tolerance verdict.
    pub fn finish(self, residual: f64, tolerance: f64) -> Value {
        let pass = residual.is_finite() && residual <= tolerance;
        self.field("residual", num(residual))
            .field("tolerance", num(tolerance))
            .finish_status(pass)
    }

    /// Close a check that could not be evaluated; counts as a failure.
    pub fn finish_error(self, detail: &str) -> Value {
        let mut map = self
            .field("error", Value::String(detail.into()))
            .map;
        map.insert("status".into(), Value::String("error".into()));
        Value::Object(map)
    }

    /// Close with an explicit verdict (for suite-level checks).
    pub fn finish_status(mut self, pass: bool) -> Value {
        let status = if pass { "pass" } else { "fail" };
        self.map
            .insert("status".into(), Value::String(status.into()));
        Value::Object(self.map)
    }
}

fn check_passed(check: &Value) -> bool {
    check.get("status").and_then(Value::as_str) == Some("pass")
}

/// Assemble the common report envelope. Key order is fixed: `report`,
/// `command`, `precision`, `normalization`, `config`, then the
/// command-specific payload entries, then `checks` and `summary`.
pub fn envelope(
    command: &str,
    precision: &str,
    alpha: C64,
    beta: C64,
    config: Value,
    payload: Vec<(&str, Value)>,
    checks: Vec<Value>,
) -> (Value, bool) {
    let failures = checks.iter().filter(|c| !check_passed(c)).count();
    let passed = failures == 0;

    let mut normalization = Map::new();
    normalization.insert("alpha".into(), cnum(alpha));
    normalization.insert("beta".into(), cnum(beta));
    normalization.insert("pair_product".into(), cnum(alpha * beta.conj()));

    let mut summary = Map::new();
    summary.insert("checks".into(), Value::from(checks.len() as u64));
    summary.insert("failures".into(), Value::from(failures as u64));
    summary.insert(
        "status".into(),
        Value::String(if passed { "pass" } else { "fail" }.into()),
    );

    let mut map = Map::new();
    map.insert("report".into(), Value::String("pblab.v1".into()));
    map.insert("command".into(), Value::String(command.into()));
    map.insert("precision".into(), Value::String(precision.into()));
    map.insert("normalization".into(), Value::Object(normalization));
    map.insert("config".into(), config);
    for (key, value) in payload {
        map.insert(key.into(), value);
    }
    map.insert("checks".into(), Value::Array(checks));
    map.insert("summary".into(), Value::Object(summary));
    (Value::Object(map), passed)
}
