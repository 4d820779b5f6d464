//! Line charts of mean posterior on the truth against intervention step.

use std::fmt::Write;

use ptree_learn::simharness::ExperimentResult;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Round tick spacing giving at most `max_ticks` intervals over `span`.
pub fn tick_step(span: f64, max_ticks: usize) -> f64 {
    if span <= 0.0 {
        return 1.0;
    }
    let raw = span / max_ticks as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

pub fn ticks(lo: f64, hi: f64, max_ticks: usize) -> Vec<f64> {
    let step = tick_step(hi - lo, max_ticks);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn polyline(points: &[(f64, f64)], color: &str, width: f64, dashed: bool) -> String {
    let pts: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    let dash = if dashed {
        r#" stroke-dasharray="4 3""#
    } else {
        ""
    };
    format!(
        r#"<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash} points="{}"/>"#,
        pts.join(" ")
    )
}

/// One solid polyline per strategy for the mean, and a dashed pair for
/// mean ± one standard error.
pub fn render_curves(results: &[ExperimentResult], title: &str) -> String {
    let steps = results
        .iter()
        .map(|r| r.mean_curve.len())
        .max()
        .unwrap_or(1)
        .max(2)
        - 1;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |step: f64| MARGIN_LEFT + step / steps as f64 * plot_w;
    let sy = |p: f64| MARGIN_TOP + (1.0 - p.clamp(0.0, 1.0)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );

    for t in ticks(0.0, 1.0, 5) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            y + 4.0,
            trim(t)
        );
    }
    for t in ticks(0.0, steps as f64, 10) {
        let x = sx(t);
        let y0 = MARGIN_TOP + plot_h;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 20.0,
            trim(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">interventions</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">posterior of true hypothesis</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    for (i, r) in results.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let at = |f: &dyn Fn(usize) -> f64| -> Vec<(f64, f64)> {
            (0..r.mean_curve.len())
                .map(|t| (sx(t as f64), sy(f(t))))
                .collect()
        };
        let _ = writeln!(
            s,
            "{}",
            polyline(
                &at(&|t| r.mean_curve[t] + r.stderr_curve[t]),
                color,
                1.0,
                true
            )
        );
        let _ = writeln!(
            s,
            "{}",
            polyline(
                &at(&|t| r.mean_curve[t] - r.stderr_curve[t]),
                color,
                1.0,
                true
            )
        );
        let _ = writeln!(
            s,
            "{}",
            polyline(&at(&|t| r.mean_curve[t]), color, 2.0, false)
        );
        let ly = MARGIN_TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 25.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            r.strategy.name()
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_ticks() {
        assert_eq!(
            ticks(0.0, 1.0, 5),
            vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]
        );
        assert_eq!(
            ticks(0.0, 40.0, 10),
            (0..=8).map(|i| 5.0 * i as f64).collect::<Vec<_>>()
        );
        assert_eq!(tick_step(7.0, 10), 1.0);
        assert_eq!(trim(0.6000000000000001), "0.6");
    }
}
