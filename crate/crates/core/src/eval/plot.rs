//! Data-profile plots as standalone SVG.

use std::fmt::Write;

use super::DataProfile;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Step curves of several methods' profiles on a log-scaled e axis.
pub fn profile_svg(title: &str, curves: &[(&str, &DataProfile)]) -> String {
    let (lo, hi) = curves
        .iter()
        .flat_map(|(_, p)| p.grid.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e), b.max(e)));
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo.ln(), hi.ln()) } else { (0.0, 1.0) };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |e: f64| LEFT + (e.ln() - lo) / (hi - lo) * pw;
    let sy = |v: f64| TOP + (1.0 - v) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = sy(v);
        let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##, LEFT + pw);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, LEFT - 6.0, y + 4.0);
    }
    let mut decade = (lo / std::f64::consts::LN_10).ceil() as i32;
    while (decade as f64) * std::f64::consts::LN_10 <= hi + 1e-9 {
        let e = 10f64.powi(decade);
        let x = sx(e);
        let _ = writeln!(s, r##"<line x1="{x}" y1="{TOP}" x2="{x}" y2="{}" stroke="#ddd"/>"##, TOP + ph);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">1e{decade}</text>"#, TOP + ph + 16.0);
        decade += 1;
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">function evaluations e</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">d(e)</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, (name, p)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        let mut prev: Option<f64> = None;
        for (e, v) in p.grid.iter().zip(&p.values) {
            if let Some(pv) = prev {
                let _ = write!(pts, "{:.2},{:.2} ", sx(*e), sy(pv));
            }
            let _ = write!(pts, "{:.2},{:.2} ", sx(*e), sy(*v));
            prev = Some(*v);
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.trim_end());
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{data_profile, log_grid};

    #[test]
    fn one_polyline_per_method() {
        let g = log_grid(5.0, 2e4, 200);
        let a = data_profile(&[Some(10), None], &g).unwrap();
        let b = data_profile(&[Some(100), Some(9000)], &g).unwrap();
        let svg = profile_svg("min <0>", &[("manso", &a), ("random", &b)]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("min &lt;0&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
