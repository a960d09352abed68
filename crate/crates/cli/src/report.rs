use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= threshold`.
    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub data: Value,
    /// Seconds; the only field that differs between identical invocations.
    pub wall_clock_s: f64,
}

impl Report {
    pub fn new(command: &'static str, config: Value) -> Self {
        Report {
            schema: SCHEMA,
            tool: "projconn",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            checks: vec![],
            pass: true,
            data: Value::Null,
            wall_clock_s: 0.0,
        }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn finish(&mut self, secs: f64) {
        self.pass = self.checks.iter().all(|c| c.pass);
        self.wall_clock_s = secs;
    }
}

/// Pretty JSON with every float written to 17 significant digits; non-finite
/// values become `null`.
struct Digits17(PrettyFormatter<'static>);

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        if v.is_finite() {
            write!(w, "{}", fmt17(v))
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// `v` with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    v.serialize(&mut ser).expect("report serializes");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Write to `path`, or stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => io::stdout().write_all(text.as_bytes()),
    }
}

pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: header.join(",") + "\n", columns: header.len() }
    }

    /// A row of numbers; `None` leaves the cell empty.
    pub fn row(&mut self, cells: &[Option<f64>]) {
        assert_eq!(cells.len(), self.columns, "CSV row width");
        let cells: Vec<String> = cells.iter().map(|c| c.map(fmt17).unwrap_or_default()).collect();
        self.text += &cells.join(",");
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, &self.text)
    }
}

/// gnuplot script plotting columns `ys` against column `x` of a CSV file.
pub fn plot_script(csv: &Path, header: &[&str], x: usize, ys: &[usize]) -> String {
    let name = csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset grid\n");
    s += &format!("set xlabel '{}'\n", header[x]);
    let plots: Vec<String> = ys.iter().map(|&c| format!("'{name}' using {}:{} with lines", x + 1, c + 1)).collect();
    s += &format!("plot {}\n", plots.join(", \\\n     "));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_17_digits() {
        let s = to_json(&serde_json::json!({"a": 0.1, "b": f64::NAN, "c": [1.0]}));
        assert!(s.contains("1.0000000000000001e-1") || s.contains("1.0000000000000000e-1"), "{s}");
        assert!(s.contains("null"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["x", "y"]);
        c.row(&[Some(1.0), None]);
        assert_eq!(c.text, "x,y\n1.0000000000000000e0,\n");
    }
}
