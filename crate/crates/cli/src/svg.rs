//! Self-contained SVG line plots of mean relative error against k.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::output::{write, CsvRow};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
/// Zero errors (exact estimates) are drawn at this floor.
const LOG_FLOOR: f64 = 1e-17;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Series<'a> {
    label: String,
    points: Vec<&'a CsvRow>,
}

fn series(rows: &[CsvRow]) -> Vec<Series<'_>> {
    let mut out: Vec<Series> = Vec::new();
    for r in rows {
        let label = format!("{} ({})", r.estimator, r.function);
        match out.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(r),
            None => out.push(Series { label, points: vec![r] }),
        }
    }
    for s in &mut out {
        s.points.sort_by_key(|r| r.k);
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render(rows: &[CsvRow], title: &str) -> String {
    let all = series(rows);
    let ys = rows
        .iter()
        .flat_map(|r| [r.mean_rel_err, r.p05, r.p95])
        .filter(|v| v.is_finite())
        .map(|v| v.max(LOG_FLOOR));
    let (mut lo, mut hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (1e-3, 1.0);
    }
    let (dlo, mut dhi) = (lo.log10().floor(), hi.log10().ceil());
    if dhi <= dlo {
        dhi = dlo + 1.0;
    }
    let (kmin, mut kmax) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.k as f64), b.max(r.k as f64)));
    let kmin = if kmin.is_finite() { kmin } else { 0.0 };
    if !(kmax > kmin) {
        kmax = kmin + 1.0;
    }

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let x = |k: f64| LEFT + (k - kmin) / (kmax - kmin) * pw;
    let y = |v: f64| TOP + (dhi - v.max(LOG_FLOOR).log10()) / (dhi - dlo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));

    // Axes, decade ticks on y, five ticks on x.
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} V{} H{}" fill="none" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    let mut d = dlo;
    while d <= dhi {
        let ty = y(10f64.powf(d));
        let _ = writeln!(
            s,
            r##"<path d="M{} {ty:.2} H{LEFT}" stroke="black"/><path d="M{LEFT} {ty:.2} H{}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{}</text>"##,
            LEFT - 5.0,
            LEFT + pw,
            LEFT - 8.0,
            ty + 4.0,
            d as i64
        );
        d += 1.0;
    }
    for i in 0..=4 {
        let k = kmin + (kmax - kmin) * i as f64 / 4.0;
        let tx = x(k);
        let _ = writeln!(
            s,
            r#"<path d="M{tx:.2} {} V{}" stroke="black"/><text x="{tx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            (k * 10.0).round() / 10.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">k</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">mean relative error</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, ser) in all.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = ser.points.iter().map(|r| format!("{:.2},{:.2}", x(r.k as f64), y(r.p95)));
        let lower = ser.points.iter().rev().map(|r| format!("{:.2},{:.2}", x(r.k as f64), y(r.p05)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> =
            ser.points.iter().map(|r| format!("{:.2},{:.2}", x(r.k as f64), y(r.mean_rel_err))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));

        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="20" height="4" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            ly - 2.0,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_svg(rows: &[CsvRow], title: &str, path: &Path) -> Result<()> {
    write(path, &render(rows, title))
}
