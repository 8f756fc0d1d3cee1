// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Minimal self-contained SVG chart for simulation traces: state and
//! control polylines over time, with axes and tick labels. No external
//! renderer; fixed-precision coordinates keep the output byte-stable.

use handsoff::SimTrace;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;

const STATE_COLORS: [&str; 6] = [
    "#1f77b4", "#2ca02c", "#9467bd", "#17becf", "#8c564b", "#7f7f7f",
];
const CONTROL_COLORS: [&str; 4] = ["#d62728", "#ff7f0e", "#e377c2", "#bcbd22"];

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

pub fn render_trace(trace: &SimTrace, title: &str) -> String {
    let samples = &trace.samples;
    let n = samples.first().map_or(0, |s| s.state.len());
    let m = samples.first().map_or(0, |s| s.control.len());
    let t_max = samples.last().map_or(1.0, |s| s.t).max(1e-12);

    let mut y_min = -1.0f64;
    let mut y_max = 1.0f64;
    for s in samples {
        for v in s.state.iter().chain(s.control.iter()) {
            y_min = y_min.min(*v);
            y_max = y_max.max(*v);
        }
    }
    let pad = 0.05 * (y_max - y_min).max(1e-9);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_of = |t: f64| MARGIN_L + t / t_max * plot_w;
    let y_of = |v: f64| MARGIN_T + (y_max - v) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n",
        MARGIN_L
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(MARGIN_L),
        fmt(HEIGHT - MARGIN_B)
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(HEIGHT - MARGIN_B),
        fmt(WIDTH - MARGIN_R),
        fmt(HEIGHT - MARGIN_B)
    ));

    // Ticks: five on each axis.
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let t = frac * t_max;
        let x = x_of(t);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            fmt(x),
            fmt(HEIGHT - MARGIN_B),
            fmt(x),
            fmt(HEIGHT - MARGIN_B + 5.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{}</text>\n",
            fmt(x),
            fmt(HEIGHT - MARGIN_B + 18.0),
            fmt(t)
        ));
        let v = y_min + frac * (y_max - y_min);
        let y = y_of(v);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            fmt(MARGIN_L - 5.0),
            fmt(y),
            fmt(MARGIN_L),
            fmt(y)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_L - 8.0),
            fmt(y + 4.0),
            fmt(v)
        ));
    }

    // Zero line when visible.
    if y_min < 0.0 && y_max > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#cccccc\" \
             stroke-dasharray=\"4 3\"/>\n",
            fmt(MARGIN_L),
            fmt(y_of(0.0)),
            fmt(WIDTH - MARGIN_R),
            fmt(y_of(0.0))
        ));
    }

    let polyline = |points: &str, color: &str, dashed: bool| -> String {
        let dash = if dashed {
            " stroke-dasharray=\"6 3\""
        } else {
            ""
        };
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} \
             points=\"{points}\"/>\n"
        )
    };

    for si in 0..n {
        let pts: Vec<String> = samples
            .iter()
            .map(|s| format!("{},{}", fmt(x_of(s.t)), fmt(y_of(s.state[si]))))
            .collect();
        svg.push_str(&polyline(
            &pts.join(" "),
            STATE_COLORS[si % STATE_COLORS.len()],
            false,
        ));
    }
    for ci in 0..m {
        let pts: Vec<String> = samples
            .iter()
            .map(|s| format!("{},{}", fmt(x_of(s.t)), fmt(y_of(s.control[ci]))))
            .collect();
        svg.push_str(&polyline(
            &pts.join(" "),
            CONTROL_COLORS[ci % CONTROL_COLORS.len()],
            true,
        ));
    }

    // Legend.
    let mut lx = MARGIN_L + 10.0;
    for si in 0..n {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{}\">x{}</text>\n",
            fmt(lx),
            fmt(MARGIN_T + 14.0),
            STATE_COLORS[si % STATE_COLORS.len()],
            si + 1
        ));
        lx += 30.0;
    }
    for ci in 0..m {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{}\">u{}</text>\n",
            fmt(lx),
            fmt(MARGIN_T + 14.0),
            CONTROL_COLORS[ci % CONTROL_COLORS.len()],
            ci + 1
        ));
        lx += 30.0;
    }

    svg.push_str("</svg>\n");
    svg
}
