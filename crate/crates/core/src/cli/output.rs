//! CSV and SVG artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use svg::node::element::{Line, Polyline, Text};
use svg::Document;

use crate::error::{OncoError, Result};
use crate::forward::ControlProfile;
use crate::grid::Grid;
use crate::model::ModelParams;

/// Finite decimal rendering with 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return "0".to_string();
    }
    // The exponent of the rounded value, so 9.9999999999999 counts as 1e1.
    let sci = format!("{v:.11e}");
    let exp: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    let decimals = (11 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Writes a CSV with a fixed header; every row is formatted by [`fmt_num`].
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt_num(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `key: value` lines.
pub fn write_summary(path: &Path, lines: &[(&str, String)]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for (k, v) in lines {
        writeln!(f, "{k}: {v}")?;
    }
    f.flush()?;
    Ok(())
}

/// `control.csv` with header `t,I`.
pub fn write_control(path: &Path, grid: &Grid, control: &ControlProfile) -> Result<()> {
    write_csv(
        path,
        &["t", "I"],
        control
            .samples()
            .iter()
            .enumerate()
            .map(|(n, &i)| vec![grid.time(n), i]),
    )
}

/// Reads a `t,I` file onto the grid's time levels. A file with exactly one
/// row per level is taken verbatim; otherwise values are interpolated
/// linearly in `t` and held constant outside the file's range.
pub fn read_control(path: &Path, grid: &Grid, params: &ModelParams) -> Result<ControlProfile> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let (ti, ii) = match (
        headers.iter().position(|h| h.trim() == "t"),
        headers.iter().position(|h| h.trim() == "I"),
    ) {
        (Some(t), Some(i)) => (t, i),
        _ => {
            return Err(OncoError::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "expected header `t,I`".into(),
            })
        }
    };
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |idx: usize| -> Result<f64> {
            let raw = rec.get(idx).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| OncoError::Parse {
                    path: path.to_path_buf(),
                    line: k + 2,
                    msg: format!("not a finite number: `{raw}`"),
                })
        };
        pts.push((field(ti)?, field(ii)?));
    }
    if pts.is_empty() {
        return Err(OncoError::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "control file has no rows".into(),
        });
    }
    if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(OncoError::Parse {
            path: path.to_path_buf(),
            line: 2,
            msg: "times must be strictly increasing".into(),
        });
    }
    let samples: Vec<f64> = if pts.len() == grid.n_t {
        pts.iter().map(|&(_, i)| i).collect()
    } else {
        (0..grid.n_t)
            .map(|n| interpolate(&pts, grid.time(n)))
            .collect()
    };
    ControlProfile::new(samples, grid, params)
}

fn interpolate(pts: &[(f64, f64)], t: f64) -> f64 {
    let k = pts.partition_point(|&(s, _)| s <= t);
    if k == 0 {
        return pts[0].1;
    }
    if k == pts.len() {
        return pts[k - 1].1;
    }
    let (t0, v0) = pts[k - 1];
    let (t1, v1) = pts[k];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f",
];

/// Minimal line chart. Convenience output only; the CSVs carry the data.
pub fn line_plot(path: &Path, title: &str, series: &[(&str, Vec<(f64, f64)>)]) -> Result<()> {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let all = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0.is_finite() && y0.is_finite()) {
        return Ok(());
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut doc = Document::new()
        .set("viewBox", (0, 0, w, h))
        .set("width", w)
        .set("height", h)
        .add(
            Text::new(title)
                .set("x", w / 2.0)
                .set("y", 24)
                .set("text-anchor", "middle")
                .set("font-size", 14),
        )
        .add(axis(pad, h - pad, w - pad, h - pad))
        .add(axis(pad, pad, pad, h - pad));
    for (label, x, y, anchor) in [
        (fmt_num(x0), pad, h - pad + 16.0, "start"),
        (fmt_num(x1), w - pad, h - pad + 16.0, "end"),
        (fmt_num(y0), pad - 4.0, h - pad, "end"),
        (fmt_num(y1), pad - 4.0, pad + 4.0, "end"),
    ] {
        doc = doc.add(
            Text::new(shorten(&label))
                .set("x", x)
                .set("y", y)
                .set("text-anchor", anchor)
                .set("font-size", 10),
        );
    }
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        // Thin long series; a plot does not need more than ~2000 vertices.
        let every = (pts.len() / 2000).max(1);
        let coords: Vec<String> = pts
            .iter()
            .enumerate()
            .filter(|(i, _)| i % every == 0 || *i + 1 == pts.len())
            .map(|(_, &(x, y))| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        doc = doc
            .add(
                Polyline::new()
                    .set("fill", "none")
                    .set("stroke", color)
                    .set("stroke-width", 1.5)
                    .set("points", coords.join(" ")),
            )
            .add(
                Text::new(*name)
                    .set("x", w - pad - 4.0)
                    .set("y", pad + 14.0 * (k as f64 + 1.0))
                    .set("text-anchor", "end")
                    .set("fill", color)
                    .set("font-size", 11),
            );
    }
    svg::save(path, &doc)?;
    Ok(())
}

fn axis(x1: f64, y1: f64, x2: f64, y2: f64) -> Line {
    Line::new()
        .set("x1", x1)
        .set("y1", y1)
        .set("x2", x2)
        .set("y2", y2)
        .set("stroke", "black")
}

fn shorten(s: &str) -> String {
    match s.parse::<f64>() {
        Ok(v) => format!("{v:.4}"),
        Err(_) => s.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1.00000000000");
        assert_eq!(fmt_num(4.0), "4.00000000000");
        assert_eq!(fmt_num(-2.8), "-2.80000000000");
        assert_eq!(fmt_num(123.456), "123.456000000");
        assert_eq!(fmt_num(0.001234), "0.00123400000000");
        assert_eq!(fmt_num(9.9999999999999), "10.0000000000");
        assert!(!fmt_num(1e-9).contains('e'));
    }

    proptest! {
        #[test]
        fn formatted_values_parse_back_closely(v in -1e6f64..1e6) {
            prop_assume!(v.abs() > 1e-12);
            let back: f64 = fmt_num(v).parse().unwrap();
            prop_assert!((back - v).abs() <= 5e-12 * v.abs());
        }
    }

    #[test]
    fn interpolation_holds_ends() {
        let pts = [(0.0, 1.0), (1.0, 3.0)];
        assert_eq!(interpolate(&pts, -1.0), 1.0);
        assert_eq!(interpolate(&pts, 0.5), 2.0);
        assert_eq!(interpolate(&pts, 2.0), 3.0);
    }
}
