//! CSV, JSON and SVG emitters. All writes go through a temp file + rename.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// 17 significant digits, dot decimal separator.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".into()
    }
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[derive(Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    /// Seconds since the epoch, only when SOURCE_DATE_EPOCH is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl Meta {
    pub fn new(command: &'static str, config_hash: String) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok());
        Meta { tool: "qghom", version: env!("CARGO_PKG_VERSION"), command, config_hash, timestamp }
    }
}

#[derive(Debug, Serialize)]
pub struct Bundle<T: Serialize> {
    pub meta: Meta,
    pub result: T,
}

pub fn to_json<T: Serialize>(bundle: &Bundle<T>) -> String {
    let mut s = serde_json::to_string_pretty(bundle).expect("report serialises");
    s.push('\n');
    s
}

/// Line figure on a fixed 800×600 canvas.
#[derive(Debug, Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub lines: Vec<Vec<(f64, f64)>>,
    /// Shaded horizontal strips [y0, y1].
    pub y_strips: Vec<[f64; 2]>,
    /// Shaded vertical strips [x0, x1].
    pub x_strips: Vec<[f64; 2]>,
    pub y_clip: Option<[f64; 2]>,
}

const W: f64 = 800.0;
const H: f64 = 600.0;
const PAD: f64 = 60.0;

impl Figure {
    fn range(&self) -> ([f64; 2], [f64; 2]) {
        let pts = self.lines.iter().flatten().filter(|p| p.0.is_finite() && p.1.is_finite());
        let mut xr = [f64::INFINITY, f64::NEG_INFINITY];
        let mut yr = xr;
        for &(x, y) in pts {
            xr = [xr[0].min(x), xr[1].max(x)];
            yr = [yr[0].min(y), yr[1].max(y)];
        }
        if let Some(c) = self.y_clip {
            yr = [yr[0].max(c[0]), yr[1].min(c[1])];
        }
        let widen = |r: [f64; 2]| if r[0] < r[1] { r } else if r[0].is_finite() { [r[0] - 1.0, r[0] + 1.0] } else { [0.0, 1.0] };
        (widen(xr), widen(yr))
    }

    pub fn render(&self) -> String {
        let (xr, yr) = self.range();
        let sx = |x: f64| PAD + (x - xr[0]) / (xr[1] - xr[0]) * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y.clamp(yr[0], yr[1]) - yr[0]) / (yr[1] - yr[0]) * (H - 2.0 * PAD);
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="800" height="600" viewBox="0 0 800 600">"#
        );
        let _ = writeln!(s, r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#);
        for st in &self.y_strips {
            let (top, bot) = (sy(st[1]), sy(st[0]));
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#dddddd"/>"##,
                PAD,
                W - 2.0 * PAD,
                (bot - top).max(0.0)
            );
        }
        for st in &self.x_strips {
            let (l, r) = (sx(st[0]), sx(st[1]));
            let _ = writeln!(
                s,
                r##"<rect x="{l:.2}" y="{PAD:.2}" width="{:.2}" height="{:.2}" fill="#dddddd"/>"##,
                (r - l).max(0.0),
                H - 2.0 * PAD
            );
        }
        let _ = writeln!(
            s,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        for line in &self.lines {
            // break the polyline at non-finite samples
            let mut seg: Vec<String> = Vec::new();
            let flush = |seg: &mut Vec<String>, s: &mut String| {
                if seg.len() > 1 {
                    let _ = writeln!(s, r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#, seg.join(" "));
                }
                seg.clear();
            };
            for &(x, y) in line {
                if x.is_finite() && y.is_finite() {
                    seg.push(format!("{:.2},{:.2}", sx(x), sy(y)));
                } else {
                    flush(&mut seg, &mut s);
                }
            }
            flush(&mut seg, &mut s);
        }
        let _ = writeln!(s, r#"<text x="400" y="30" text-anchor="middle" font-size="16">{}</text>"#, escape(&self.title));
        let _ = writeln!(s, r#"<text x="400" y="585" text-anchor="middle" font-size="14">{}</text>"#, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="20" y="300" text-anchor="middle" font-size="14" transform="rotate(-90 20 300)">{}</text>"#,
            escape(&self.y_label)
        );
        for (v, anchor) in [(xr[0], "start"), (xr[1], "end")] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="{anchor}">{}</text>"#, sx(v), H - PAD + 15.0, short(v));
        }
        for v in yr {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, PAD - 4.0, sy(v) + 4.0, short(v));
        }
        s.push_str("</svg>\n");
        s
    }
}

fn short(v: f64) -> String {
    format!("{v:.4}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        let x = std::f64::consts::PI * 25.0;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn svg_has_fixed_canvas_and_polylines() {
        let fig = Figure {
            lines: vec![vec![(0.0, 0.0), (1.0, 1.0), (2.0, f64::NAN), (3.0, 0.5), (4.0, 1.0)]],
            y_strips: vec![[0.2, 0.4]],
            ..Default::default()
        };
        let svg = fig.render();
        assert!(svg.contains(r#"viewBox="0 0 800 600""#));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
