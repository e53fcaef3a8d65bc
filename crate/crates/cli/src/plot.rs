//! Static SVG charts from a results CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use mtlso::evaluator::RESULTS_HEADER;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone)]
struct Row {
    variant: String,
    layers: usize,
    alpha: f64,
    test_mape: f64,
    metrics: [f64; 4],
}

fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<&str> = RESULTS_HEADER.split(',').collect();
    if header != expected {
        bail!(
            "{}: unexpected columns `{}`, expected `{RESULTS_HEADER}`",
            path.display(),
            header.join(",")
        );
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        let num = |col: usize| -> Result<f64> {
            let v: f64 = rec[col]
                .parse()
                .with_context(|| format!("row {}: column `{}` is not a number", i + 2, expected[col]))?;
            if !v.is_finite() {
                bail!("row {}: column `{}` is not finite", i + 2, expected[col]);
            }
            Ok(v)
        };
        rows.push(Row {
            variant: rec[2].to_string(),
            layers: rec[3].parse().with_context(|| format!("row {}: bad L", i + 2))?,
            alpha: num(4)?,
            test_mape: num(6)?,
            metrics: [num(7)?, num(8)?, num(9)?, num(10)?],
        });
    }
    if rows.is_empty() {
        bail!("{}: no result rows", path.display());
    }
    Ok(rows)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Canvas {
    svg: String,
    y_max: f64,
}

impl Canvas {
    fn new(title: &str, y_label: &str, y_max: f64) -> Self {
        let y_max = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(y_label)
        );
        let mut c = Canvas { svg, y_max };
        c.axes();
        c
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v / self.y_max) * (HEIGHT - 2.0 * MARGIN)
    }

    fn axes(&mut self) {
        let (x0, y0, y1) = (MARGIN, HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(self.svg, r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#, WIDTH - MARGIN);
        let _ = writeln!(self.svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
        for i in 0..=4 {
            let v = self.y_max * i as f64 / 4.0;
            let y = self.y(v);
            let _ = writeln!(self.svg, r##"<line x1="{x0}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/>"##, WIDTH - MARGIN);
            let _ = writeln!(self.svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, x0 - 6.0, y + 4.0);
        }
    }

    fn x_label(&mut self, x: f64, text: &str) {
        let _ = writeln!(self.svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{}</text>"#, HEIGHT - MARGIN + 18.0, escape(text));
    }

    fn legend(&mut self, names: &[String]) {
        for (i, name) in names.iter().enumerate() {
            let y = MARGIN + 16.0 * i as f64;
            let x = WIDTH - MARGIN - 110.0;
            let _ = writeln!(self.svg, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{}"/>"#, y - 9.0, PALETTE[i % PALETTE.len()]);
            let _ = writeln!(self.svg, r#"<text x="{}" y="{y}">{}</text>"#, x + 14.0, escape(name));
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped bars: one group per category, one bar per series.
fn bar_chart(title: &str, y_label: &str, groups: &[String], series: &[String], values: &[Vec<f64>]) -> String {
    let y_max = values.iter().flatten().copied().fold(0.0, f64::max);
    let mut c = Canvas::new(title, y_label, y_max);
    let slot = (WIDTH - 2.0 * MARGIN) / groups.len() as f64;
    let bar = slot * 0.8 / series.len() as f64;
    for (g, name) in groups.iter().enumerate() {
        let left = MARGIN + slot * g as f64 + slot * 0.1;
        for (s, v) in values[g].iter().enumerate() {
            let y = c.y(*v);
            let _ = writeln!(
                c.svg,
                r#"<rect x="{:.1}" y="{y:.1}" width="{bar:.1}" height="{:.1}" fill="{}"><title>{v}</title></rect>"#,
                left + bar * s as f64,
                HEIGHT - MARGIN - y,
                PALETTE[s % PALETTE.len()]
            );
        }
        c.x_label(MARGIN + slot * (g as f64 + 0.5), name);
    }
    if series.len() > 1 {
        c.legend(series);
    }
    c.finish()
}

/// One polyline per series over shared, evenly spaced x categories.
fn line_chart(title: &str, y_label: &str, xs: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let y_max = series.iter().flat_map(|s| s.1.iter().flatten()).copied().fold(0.0, f64::max);
    let mut c = Canvas::new(title, y_label, y_max);
    let step = (WIDTH - 2.0 * MARGIN) / xs.len() as f64;
    let px = |i: usize| MARGIN + step * (i as f64 + 0.5);
    for (i, x) in xs.iter().enumerate() {
        c.x_label(px(i), x);
    }
    for (s, (_, ys)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let points: Vec<String> = ys
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.map(|y| format!("{:.1},{:.1}", px(i), c.y(y))))
            .collect();
        let _ = writeln!(c.svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, points.join(" "));
        for (i, y) in ys.iter().enumerate() {
            if let Some(y) = y {
                let _ = writeln!(c.svg, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(i), c.y(*y));
            }
        }
    }
    let names: Vec<String> = series.iter().map(|s| s.0.clone()).collect();
    c.legend(&names);
    c.finish()
}

fn variants(rows: &[Row]) -> Vec<String> {
    let mut v: Vec<String> = Vec::new();
    for r in rows {
        if !v.contains(&r.variant) {
            v.push(r.variant.clone());
        }
    }
    v
}

fn sweep_chart<K: Ord + Copy>(rows: &[Row], title: &str, key: impl Fn(&Row) -> K, show: impl Fn(K) -> String) -> String {
    let mut keys: Vec<K> = rows.iter().map(&key).collect();
    keys.sort();
    keys.dedup();
    let series = variants(rows)
        .into_iter()
        .map(|v| {
            let ys = keys
                .iter()
                .map(|k| {
                    let vals: Vec<f64> = rows.iter().filter(|r| r.variant == v && key(r) == *k).map(|r| r.test_mape).collect();
                    (!vals.is_empty()).then(|| mean(&vals))
                })
                .collect();
            (v, ys)
        })
        .collect::<Vec<_>>();
    let xs: Vec<String> = keys.into_iter().map(show).collect();
    line_chart(title, "test MAPE (%)", &xs, &series)
}

/// Writes `variants.svg`, `classification.svg`, `layers.svg` and `alpha.svg`.
pub fn render(results: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_rows(results)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let names = variants(&rows);
    let of = |v: &str| rows.iter().filter(|r| r.variant == v).collect::<Vec<_>>();

    let mape: Vec<Vec<f64>> = names
        .iter()
        .map(|v| vec![mean(&of(v).iter().map(|r| r.test_mape).collect::<Vec<_>>())])
        .collect();
    let metric_names: Vec<String> = ["precision", "recall", "f1", "accuracy"].iter().map(|s| s.to_string()).collect();
    let cls: Vec<Vec<f64>> = names
        .iter()
        .map(|v| (0..4).map(|m| mean(&of(v).iter().map(|r| r.metrics[m]).collect::<Vec<_>>())).collect())
        .collect();

    let charts = [
        ("variants.svg", bar_chart("Test MAPE by variant", "test MAPE (%)", &names, &["mean".to_string()], &mape)),
        ("classification.svg", bar_chart("Classification metrics by variant", "rate", &names, &metric_names, &cls)),
        ("layers.svg", sweep_chart(&rows, "Test MAPE vs encoding blocks L", |r| r.layers, |l| l.to_string())),
        (
            "alpha.svg",
            sweep_chart(&rows, "Test MAPE vs retention ratio alpha", |r| (r.alpha * 1e6).round() as i64, |a| format!("{}", a as f64 / 1e6)),
        ),
    ];
    let mut written = Vec::new();
    for (name, svg) in charts {
        let path = out_dir.join(name);
        std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
