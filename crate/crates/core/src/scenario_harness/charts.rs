//! Small static SVG line charts rendered straight from the metrics rows.

use super::metrics::MetricsRow;

struct Series<'a> {
    name: &'a str,
    points: Vec<(f64, f64)>,
}

const W: f64 = 760.0;
const H: f64 = 380.0;
const MARGIN: f64 = 55.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn line_chart(title: &str, y_label: &str, x_max: f64, series: &[Series]) -> String {
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let plot_w = W - 2.0 * MARGIN;
    let plot_h = H - 2.0 * MARGIN;
    let x_px = |x: f64| MARGIN + x / x_max.max(1e-9) * plot_w;
    let y_px = |y: f64| H - MARGIN - y / y_max * plot_h;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{tx}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" \
         font-family=\"sans-serif\">{title}</text>\n",
        tx = W / 2.0
    );
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        r = W - MARGIN,
        t = MARGIN,
        b = H - MARGIN
    ));
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let xv = x_max * frac;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\" \
             font-family=\"sans-serif\">{:.0}</text>\n",
            x_px(xv),
            H - MARGIN + 18.0,
            xv
        ));
        let yv = y_max * frac;
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\" \
             font-family=\"sans-serif\">{:.3}</text>\n",
            MARGIN - 6.0,
            y_px(yv) + 4.0,
            yv
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{tx}\" y=\"{ty}\" text-anchor=\"middle\" font-size=\"12\" \
         font-family=\"sans-serif\">user time (s)</text>\n\
         <text x=\"16\" y=\"{my}\" text-anchor=\"middle\" font-size=\"12\" \
         font-family=\"sans-serif\" transform=\"rotate(-90 16 {my})\">{y_label}</text>\n",
        tx = W / 2.0,
        ty = H - 14.0,
        my = H / 2.0
    ));
    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", x_px(x), y_px(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" font-family=\"sans-serif\" \
             fill=\"{color}\">{}</text>\n",
            W - MARGIN + 4.0,
            MARGIN + 14.0 * i as f64,
            s.name
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Render occupancy, selected-bandwidth and per-object utility charts.
/// Returns (filename, svg) pairs; panels without data are omitted.
pub fn render_charts(rows: &[MetricsRow], duration_s: f64) -> Vec<(String, String)> {
    if rows.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let occupancy = Series {
        name: "occupancy",
        points: rows.iter().map(|r| (r.t, r.occupancy_s)).collect(),
    };
    out.push((
        "occupancy.svg".to_string(),
        line_chart("Buffer occupancy", "seconds", duration_s, &[occupancy]),
    ));
    let bw = Series {
        name: "selected",
        points: rows
            .iter()
            .filter(|r| r.selected_bandwidth_avg_bps > 0.0)
            .map(|r| (r.t, r.selected_bandwidth_avg_bps / 1e6))
            .collect(),
    };
    let est = Series {
        name: "estimate",
        points: rows.iter().map(|r| (r.t, r.est_throughput_bps / 1e6)).collect(),
    };
    out.push((
        "selected_bandwidth.svg".to_string(),
        line_chart("Bandwidth selection", "Mbps", duration_s, &[bw, est]),
    ));
    let objects = rows.iter().map(|r| r.per_object_utility.len()).max().unwrap_or(0);
    if objects > 0 && rows.iter().any(|r| r.per_object_utility.iter().any(|&u| u > 0.0)) {
        let names: Vec<String> = (0..objects).map(|o| format!("object {o}")).collect();
        let series: Vec<Series> = (0..objects)
            .map(|o| Series {
                name: &names[o],
                points: rows
                    .iter()
                    .filter(|r| o < r.per_object_utility.len())
                    .map(|r| (r.t, r.per_object_utility[o]))
                    .collect(),
            })
            .collect();
        out.push((
            "utility_per_object.svg".to_string(),
            line_chart("Utility per object", "utility", duration_s, &series),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, occ: f64, per_obj: Vec<f64>) -> MetricsRow {
        MetricsRow {
            t,
            est_throughput_bps: 18e6,
            selected_bandwidth_avg_bps: 12e6,
            occupancy_s: occ,
            stall_flag: false,
            total_utility_visible: per_obj.iter().sum(),
            per_object_utility: per_obj,
            response_latency_s: None,
        }
    }

    #[test]
    fn charts_cover_the_run_and_split_objects() {
        let rows = vec![
            row(0.0, 1.0, vec![5.0, 2.0]),
            row(5.0, 3.0, vec![6.0, 2.5]),
            row(10.0, 5.0, vec![7.0, 3.0]),
        ];
        let charts = render_charts(&rows, 10.0);
        assert_eq!(charts.len(), 3);
        let per_obj = &charts[2].1;
        assert_eq!(per_obj.matches("<polyline").count(), 2);
        assert!(per_obj.contains("object 1"));
        // X axis label reaches the run duration.
        assert!(charts[0].1.contains(">10<"));
    }

    #[test]
    fn empty_metrics_render_nothing() {
        assert!(render_charts(&[], 10.0).is_empty());
    }

    #[test]
    fn utility_panel_omitted_when_all_zero() {
        let rows = vec![row(0.0, 1.0, vec![0.0]), row(1.0, 2.0, vec![0.0])];
        let charts = render_charts(&rows, 1.0);
        assert_eq!(charts.len(), 2);
    }
}
