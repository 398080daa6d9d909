//! Training-curve figure as a self-contained SVG: episode return against
//! environment step for one or more runs, with the expert mean as a dashed
//! reference line.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 50.0); // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// (step, episode return)
    pub points: Vec<(f64, f64)>,
}

/// Trailing moving average over `window` points.
pub fn smooth(points: &[(f64, f64)], window: usize) -> Vec<(f64, f64)> {
    let w = window.max(1);
    let mut sum = 0.0;
    points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            sum += y;
            if i >= w {
                sum -= points[i - w].1;
            }
            (x, sum / (i + 1).min(w) as f64)
        })
        .collect()
}

fn nice_step(range: f64) -> f64 {
    let raw = range / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(series: &[Series], expert_mean: Option<f64>, title: &str) -> String {
    let all = series.iter().flat_map(|s| s.points.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in all {
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if let Some(e) = expert_mean {
        y0 = y0.min(e);
        y1 = y1.max(e);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    (y0, y1) = (y0 - pad, y1 + pad);
    x0 = x0.min(0.0);

    let (ml, mr, mt, mb) = MARGIN;
    let pw = WIDTH - ml - mr;
    let ph = HEIGHT - mt - mb;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));

    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let ys = nice_step(y1 - y0);
    let mut t = (y0 / ys).ceil() * ys;
    while t <= y1 {
        let y = sy(t);
        let _ = writeln!(svg, r##"<line x1="{ml}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, ml + pw);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{t}</text>"#, ml - 6.0, y + 4.0);
        t += ys;
    }
    let xs = nice_step(x1 - x0);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 {
        let x = sx(t);
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#, mt + ph + 18.0);
        t += xs;
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">environment step</text>"#, ml + pw / 2.0, HEIGHT - 8.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">episode return</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0
    );

    if let Some(e) = expert_mean {
        let y = sy(e);
        let _ = writeln!(
            svg,
            r##"<line class="expert" x1="{ml}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#777" stroke-width="2" stroke-dasharray="6 4"/>"##,
            ml + pw
        );
    }
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
    }

    // legend
    let mut entries: Vec<(String, &str, bool)> = series
        .iter()
        .enumerate()
        .map(|(k, s)| (s.label.clone(), COLORS[k % COLORS.len()], false))
        .collect();
    if expert_mean.is_some() {
        entries.push(("expert mean".into(), "#777", true));
    }
    for (k, (label, color, dashed)) in entries.iter().enumerate() {
        let y = mt + 14.0 + 16.0 * k as f64;
        let x = ml + 10.0;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            x + 24.0
        );
        let _ = writeln!(svg, r#"<text class="label" x="{:.1}" y="{:.1}">{}</text>"#, x + 30.0, y + 4.0, escape(label));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_is_a_trailing_mean() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, i as f64)).collect();
        let s = smooth(&pts, 2);
        assert_eq!(s.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0.0, 0.5, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn two_runs_give_two_curves_and_expert_line() {
        let a = Series {
            label: "sac-fd".into(),
            points: vec![(0.0, 1.0), (10.0, 5.0)],
        };
        let b = Series {
            label: "sac <no demos>".into(),
            points: vec![(0.0, 0.0), (10.0, 2.0)],
        };
        let svg = render_svg(&[a, b], Some(4.0), "returns");
        assert_eq!(svg.matches(r#"class="series""#).count(), 2);
        assert_eq!(svg.matches(r#"class="expert""#).count(), 1);
        assert!(svg.contains("sac-fd") && svg.contains("sac &lt;no demos&gt;") && svg.contains("expert mean"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
