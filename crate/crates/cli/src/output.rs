//! CSV, SVG and atomic file output.

use std::io::Write;
use std::path::Path;

use strip_radius_core::oracles::ComparisonRow;

use crate::error::CliError;

pub const CSV_HEADER: &str = "t,measured,method,exact,bound,margin,pass";

/// Write through a sibling temporary file and rename it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path.file_name().ok_or_else(|| CliError::Io(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

/// Shortest decimal that parses back to the same value.
fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn rows_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            num(r.t),
            opt(r.measured),
            r.method.as_str(),
            opt(r.exact),
            num(r.bound),
            opt(r.margin),
            r.pass
        ));
    }
    out
}

/// Line chart of measured, exact and bound radii against time.
pub fn rows_svg(title: &str, rows: &[ComparisonRow]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let series: [(&str, &str, Vec<(f64, f64)>); 3] = [
        ("measured", "#1f77b4", rows.iter().filter_map(|r| r.measured.map(|m| (r.t, m))).collect()),
        ("exact", "#2ca02c", rows.iter().filter_map(|r| r.exact.map(|m| (r.t, m))).collect()),
        ("bound", "#d62728", rows.iter().map(|r| (r.t, r.bound)).collect()),
    ];
    let finite = series.iter().flat_map(|s| s.2.iter()).filter(|p| p.1.is_finite());
    let (mut t0, mut t1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for &(t, y) in finite {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y1 = y1.max(y);
    }
    if !t0.is_finite() {
        t0 = 0.0;
        t1 = 1.0;
    }
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    y1 *= 1.1;
    let sx = |t: f64| pad + (t - t0) / (t1 - t0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - y.min(y1) / y1 * (h - 2.0 * pad);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{pad}\" y=\"25\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n\
         <line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">t = {}</text>\n\
         <text x=\"5\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{:.3}</text>\n",
        h - pad,
        w - pad,
        h - pad,
        h - pad,
        w - pad - 60.0,
        h - pad + 20.0,
        num(t1),
        pad + 4.0,
        y1
    );
    for (i, (name, colour, pts)) in series.iter().enumerate() {
        let pts: Vec<String> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(t, y)| format!("{:.2},{:.2}", sx(t), sy(y)))
            .collect();
        if !pts.is_empty() {
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\" points=\"{}\"><title>{name}</title></polyline>\n",
                pts.join(" ")
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{colour}\" font-family=\"sans-serif\" font-size=\"12\">{name}</text>\n",
            w - pad - 60.0,
            pad + 15.0 * i as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
