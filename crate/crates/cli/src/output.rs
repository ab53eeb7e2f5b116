use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{Map, Value};

pub const VERSION_LINE: &str = concat!("halfres ", env!("CARGO_PKG_VERSION"));

/// Fixed-format float with 17 significant digits.
pub fn f17(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// JSON number in the same fixed format; non-finite values become strings.
pub fn jf(x: f64) -> Value {
    if x.is_finite() {
        // kept verbatim by serde_json's arbitrary-precision numbers
        Value::Number(f17(x).parse().expect("formatted float is a JSON number"))
    } else {
        Value::String(f17(x))
    }
}

/// Single writer for one command's output directory.
pub struct Sink {
    dir: PathBuf,
    hash: String,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, hash: &str) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, body: String) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// CSV with `#` header lines for the version and config hash.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
        let mut s = format!("# {VERSION_LINE}\n# config_sha256 {}\n{}\n", self.hash, header.join(","));
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.put(name, s)
    }

    /// JSON object with `version` and `config_sha256` prepended.
    pub fn json(&mut self, name: &str, body: Map<String, Value>) -> anyhow::Result<()> {
        let mut m = Map::new();
        m.insert("version".into(), Value::String(VERSION_LINE.into()));
        m.insert("config_sha256".into(), Value::String(self.hash.clone()));
        m.extend(body);
        let mut s = serde_json::to_string_pretty(&Value::Object(m))?;
        s.push('\n');
        self.put(name, s)
    }

    pub fn svg(&mut self, name: &str, body: String) -> anyhow::Result<()> {
        let s = format!("<!-- {VERSION_LINE}; config_sha256 {} -->\n{body}", self.hash);
        self.put(name, s)
    }
}

/// Heatmap of `values` (row-major, `rows × cols`, row 0 at the bottom);
/// NaN cells are drawn grey.
pub fn heatmap_svg(values: &[f64], rows: usize, cols: usize, x_range: [f64; 2], y_range: [f64; 2], title: &str) -> String {
    const CELL: usize = 12;
    const PAD: usize = 48;
    let (w, h) = (cols * CELL + 2 * PAD, rows * CELL + 2 * PAD);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="monospace" font-size="10">"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="16">{title}</text>"#);
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            let fill = if v.is_finite() { ramp((v - lo) / span) } else { "#808080".into() };
            let (x, y) = (PAD + c * CELL, PAD + (rows - 1 - r) * CELL);
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"/>"#);
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}">x: [{:.4}, {:.4}]  y: [{:.4}, {:.4}]  range: [{:.4}, {:.4}]</text>"#,
        h - 16,
        x_range[0],
        x_range[1],
        y_range[0],
        y_range[1],
        lo,
        hi
    );
    s.push_str("</svg>\n");
    s
}

/// Blue–white–red colour ramp on `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t / 0.5;
        (u, u, 1.0)
    } else {
        let u = (t - 0.5) / 0.5;
        (1.0, 1.0 - u, 1.0 - u)
    };
    let to = |x: f64| (x * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", to(r), to(g), to(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324] {
            let s = f17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(f17(f64::NAN), "NaN");
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#0000ff");
        assert_eq!(ramp(0.5), "#ffffff");
        assert_eq!(ramp(1.0), "#ff0000");
    }
}
