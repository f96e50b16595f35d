//! Minimal deterministic SVG rendering for the multi-curve report figure.
//!
//! Hand-written markup: no fonts are measured and no state leaks in, so the
//! same input always produces the same bytes.

use std::fmt::Write;

/// One curve: a label and (x, y) points in data coordinates.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    /// y values already normalized to [0, 1]; x is the channel index.
    pub points: Vec<(f64, f64)>,
}

/// One panel of the figure.
#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub curves: Vec<Curve>,
}

const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#ad494a",
];

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 200.0;
const MARGIN_L: f64 = 50.0;
const MARGIN_T: f64 = 30.0;
const GAP: f64 = 30.0;
const LEGEND_W: f64 = 150.0;

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Render stacked panels with a shared legend. `x_count` is the number of
/// channel positions on the x axis.
pub fn render_multicurve_svg(panels: &[Panel], x_count: usize, provenance: &str) -> String {
    let width = MARGIN_L + PANEL_W + LEGEND_W + 20.0;
    let height = MARGIN_T + panels.len() as f64 * (PANEL_H + GAP) + 20.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(svg, "<!-- {provenance} -->");
    let _ = writeln!(
        svg,
        "<rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>"
    );

    let x_of = |x: f64| {
        if x_count > 1 {
            MARGIN_L + x / (x_count as f64 - 1.0) * PANEL_W
        } else {
            MARGIN_L + PANEL_W / 2.0
        }
    };

    for (pi, panel) in panels.iter().enumerate() {
        let top = MARGIN_T + pi as f64 * (PANEL_H + GAP);
        let bottom = top + PANEL_H;
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
            MARGIN_L,
            top - 8.0,
            xml_escape(&panel.title)
        );
        let _ = writeln!(
            svg,
            "<rect x=\"{MARGIN_L:.1}\" y=\"{top:.1}\" width=\"{PANEL_W:.1}\" height=\"{PANEL_H:.1}\" fill=\"none\" stroke=\"#cccccc\"/>"
        );
        // x tick labels: one per channel
        for xi in 0..x_count {
            let px = x_of(xi as f64);
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">Ch{}</text>",
                px,
                bottom + 14.0,
                xi + 1
            );
        }
        for (ci, curve) in panel.curves.iter().enumerate() {
            let color = PALETTE[ci % PALETTE.len()];
            if curve.points.len() == 1 {
                let (x, y) = curve.points[0];
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>",
                    fmt_coord(x_of(x)),
                    fmt_coord(bottom - y.clamp(0.0, 1.0) * PANEL_H)
                );
                continue;
            }
            let pts: Vec<String> = curve
                .points
                .iter()
                .map(|&(x, y)| {
                    format!(
                        "{},{}",
                        fmt_coord(x_of(x)),
                        fmt_coord(bottom - y.clamp(0.0, 1.0) * PANEL_H)
                    )
                })
                .collect();
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                pts.join(" ")
            );
        }
    }

    // legend from the first panel's curve labels
    if let Some(panel) = panels.first() {
        let lx = MARGIN_L + PANEL_W + 15.0;
        for (ci, curve) in panel.curves.iter().enumerate() {
            let color = PALETTE[ci % PALETTE.len()];
            let ly = MARGIN_T + 10.0 + ci as f64 * 16.0;
            let _ = writeln!(
                svg,
                "<line x1=\"{lx:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
                lx + 18.0
            );
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
                lx + 24.0,
                ly + 4.0,
                xml_escape(&curve.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(title: &str, n_curves: usize, n_points: usize) -> Panel {
        Panel {
            title: title.into(),
            curves: (0..n_curves)
                .map(|c| Curve {
                    label: format!("metric{c}"),
                    points: (0..n_points)
                        .map(|x| (x as f64, (c + x) as f64 / (n_curves + n_points) as f64))
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn renders_one_polyline_per_curve() {
        let svg = render_multicurve_svg(&[panel("pre", 12, 7), panel("post", 12, 7)], 7, "p");
        assert_eq!(svg.matches("<polyline").count(), 24);
        assert!(svg.contains("pre"));
        assert!(svg.contains("Ch7"));
    }

    #[test]
    fn single_point_curves_fall_back_to_markers() {
        let svg = render_multicurve_svg(&[panel("solo", 3, 1)], 1, "p");
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 0);
    }

    #[test]
    fn output_is_deterministic() {
        let a = render_multicurve_svg(&[panel("a", 4, 5)], 5, "prov");
        let b = render_multicurve_svg(&[panel("a", 4, 5)], 5, "prov");
        assert_eq!(a, b);
    }
}
