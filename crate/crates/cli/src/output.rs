//! CSV, JSON and SVG writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use capsim::RunRecord;

use crate::run::PointResult;

pub fn write_csv<W: Write>(out: W, rows: &[PointResult]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(RunRecord::COLUMNS)?;
    }
    for r in rows {
        w.serialize(&r.record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[PointResult]) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf)?)
}

pub fn read_csv(text: &str) -> anyhow::Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn json_string(rows: &[PointResult]) -> String {
    serde_json::to_string_pretty(rows).expect("results serialize")
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Effective GFLOPS against `P` on a log axis, one polyline per (algorithm, n).
pub fn svg_plot(rows: &[PointResult]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 170.0, 20.0, 50.0);
    let mut series: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        let rec = &r.record;
        series
            .entry((rec.algorithm.clone(), rec.n))
            .or_default()
            .push((rec.p as f64, rec.effective_gflops));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.record.p as f64).log10()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.record.effective_gflops).collect();
    let (mut x0, mut x1) = (
        xs.iter().copied().fold(f64::INFINITY, f64::min),
        xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let ymax = ys.iter().copied().fold(0.0, f64::max).max(1e-12) * 1.1;
    let px = |p: f64| left + (p.log10() - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - y / ymax * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (ax0, ax1, ay) = (left, w - right, h - bottom);
    let _ = writeln!(
        s,
        r#"<path d="M{ax0} {top} L{ax0} {ay} L{ax1} {ay}" stroke="black" fill="none"/>"#
    );
    let mut ticks: Vec<usize> = rows.iter().map(|r| r.record.p).collect();
    ticks.sort_unstable();
    ticks.dedup();
    for p in ticks {
        let x = px(p as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{ay}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{p}</text>"#,
            ay + 5.0,
            ay + 18.0
        );
    }
    for i in 0..=4 {
        let v = ymax * i as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{ax0}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            ax0 - 5.0,
            ax0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">processors P (log scale)</text>"#,
        (ax0 + ax1) / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">effective GFLOPS</text>"#,
        (top + ay) / 2.0
    );
    for (i, ((alg, n), pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = pts
            .iter()
            .map(|&(p, y)| format!("{:.2},{:.2}", px(p), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
            coords.join(" ")
        );
        for c in &coords {
            let (cx, cy) = c.split_once(',').unwrap();
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>"#);
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{alg} n={n}</text>"#,
            ax1 + 10.0,
            ax1 + 30.0,
            ax1 + 35.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: &str, p: usize, g: f64) -> PointResult {
        PointResult {
            record: RunRecord {
                algorithm: alg.into(),
                n: 56,
                p,
                m: None,
                ell: None,
                schedule: String::new(),
                flops_crit: 1,
                words_crit: 2,
                msgs_crit: 3,
                peak_mem: 4,
                modeled_time: 0.5,
                effective_gflops: g,
            },
            report: None,
            relative_error: None,
        }
    }

    #[test]
    fn csv_header_is_stable() {
        let text = csv_string(&[row("caps", 7, 1.0)]).unwrap();
        assert_eq!(text.lines().next().unwrap(), RunRecord::COLUMNS.join(","));
        assert_eq!(read_csv(&text).unwrap()[0], row("caps", 7, 1.0).record);
        let empty = csv_string(&[]).unwrap();
        assert_eq!(empty.trim_end(), RunRecord::COLUMNS.join(","));
    }

    #[test]
    fn svg_has_one_line_per_series() {
        let rows = [row("caps", 7, 1.0), row("caps", 49, 2.0), row("cannon", 49, 0.5)];
        let svg = svg_plot(&rows);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("log scale"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
