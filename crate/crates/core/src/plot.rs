//! CSV round trip for rate rows and a small log-log SVG renderer.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::experiment::{loglog_slope, RateRow};

pub fn write_rate_csv<W: Write>(rows: &[RateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rate rows, checking that `covered` agrees with `gap ≤ inprob_total`.
pub fn read_rate_csv<R: Read>(input: R) -> Result<Vec<RateRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in rd.deserialize::<RateRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if row.covered != (row.gap <= row.inprob_total) {
            return Err(Error::Parse {
                line,
                message: format!("covered = {} disagrees with gap {} vs bound {}", row.covered, row.gap, row.inprob_total),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, message: "no data rows".into() });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: &'static str,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
    pub slope: Option<f64>,
}

/// Per-n means of the plotted quantities, in ascending n.
pub fn rate_series(rows: &[RateRow]) -> Vec<Series> {
    let mut ns: Vec<u64> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    type Column = (&'static str, &'static str, fn(&RateRow) -> f64);
    let spec: [Column; 5] = [
        ("mean |gap|", "#444444", |r| r.gap.abs()),
        ("fast complexity", "#1f77b4", |r| r.fast_complexity),
        ("in-probability bound", "#2ca02c", |r| r.inprob_total),
        ("baseline PAC-Bayes", "#d62728", |r| r.baseline_pb),
        ("MI baseline", "#ff7f0e", |r| r.baseline_mi_proxy),
    ];
    spec.iter()
        .map(|&(name, color, f)| {
            let points: Vec<(f64, f64)> = ns
                .iter()
                .map(|&n| {
                    let v: Vec<f64> = rows.iter().filter(|r| r.n == n).map(f).collect();
                    (n as f64, v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            Series { name, color, slope: loglog_slope(&points), points }
        })
        .collect()
}

const W: f64 = 720.0;
const H: f64 = 480.0;
const M: f64 = 60.0;

/// Log-log SVG of the series, with fitted slopes in the legend.
pub fn render_svg(title: &str, series: &[Series]) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0 > 0.0 && p.1 > 0.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts() {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let px = |x: f64| M + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * M, H - 2.0 * M);
    for e in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(e));
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{M}" x2="{x:.2}" y2="{}" stroke="#dddddd"/>"##, H - M);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">1e{e}</text>"#, H - M + 16.0);
    }
    for e in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(e));
        let _ = writeln!(s, r##"<line x1="{M}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/>"##, W - M);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">1e{e}</text>"#, M - 4.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">n</text>"#, W / 2.0, H - 16.0);
    for (i, ser) in series.iter().enumerate() {
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|p| p.0 > 0.0 && p.1 > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#, path.join(" "), ser.color);
        let slope = ser.slope.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        let ly = M + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#, W - M - 210.0, W - M - 190.0, ser.color);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{} (slope {slope})</text>"#,
            W - M - 185.0,
            ly + 4.0,
            escape(ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: u64, trial: usize, gap: f64) -> RateRow {
        let nf = n as f64;
        RateRow {
            n,
            trial,
            gap,
            emp_excess: 0.0,
            fast_complexity: 10.0 / nf,
            main_bound_total: 12.0 / nf,
            inprob_total: 1.0 / nf.sqrt(),
            baseline_pb: 2.0 / nf.sqrt(),
            baseline_mi_proxy: 3.0 / nf.sqrt(),
            covered: gap <= 1.0 / nf.sqrt(),
        }
    }

    #[test]
    fn round_trip_and_render() {
        let rows: Vec<RateRow> = [16, 64, 256, 1024].iter().flat_map(|&n| (0..3).map(move |t| row(n, t, 0.01 * t as f64))).collect();
        let mut buf = Vec::new();
        write_rate_csv(&rows, &mut buf).unwrap();
        let header = std::str::from_utf8(&buf).unwrap().lines().next().unwrap().to_string();
        assert!(header.starts_with("n,trial,gap,"));
        let back = read_rate_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), rows.len());
        let series = rate_series(&back);
        assert!((series[1].slope.unwrap() + 1.0).abs() < 1e-9);
        let a = render_svg("rates", &series);
        assert_eq!(a, render_svg("rates", &rate_series(&back)));
        assert!(a.contains("slope -1.000"));
    }

    #[test]
    fn coverage_mismatch_names_line() {
        let mut rows = vec![row(16, 0, 0.0), row(16, 1, 0.0)];
        rows[1].covered = false;
        let mut buf = Vec::new();
        write_rate_csv(&rows, &mut buf).unwrap();
        match read_rate_csv(&buf[..]) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_csv_names_line() {
        let text = "n,trial,gap,emp_excess,fast_complexity,main_bound_total,inprob_total,baseline_pb,baseline_mi_proxy,covered\n\
                    16,0,0,0,1,1,1,1,1,true\n16,1,abc,0,1,1,1,1,1,true\n";
        match read_rate_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
