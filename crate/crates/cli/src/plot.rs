//! Minimal SVG time-series plots and gnuplot-friendly data files.

use std::fmt::Write;

use mosquito_release::dynamics::{fmt_f64, Trajectory};
use mosquito_release::ControlGrid;

const WIDTH: f64 = 820.0;
const PANEL_HEIGHT: f64 = 190.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 32.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Bars,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub series: Vec<Series>,
}

fn range(panel: &Panel) -> (f64, f64, f64, f64) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (0.0f64, f64::NEG_INFINITY);
    for s in &panel.series {
        for &(a, b) in &s.points {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
    }
    if x.1.is_nan() || x.1 <= x.0 {
        x.1 = x.0 + 1.0;
    }
    if y.1.is_nan() || y.1 <= y.0 {
        y.1 = y.0 + 1.0;
    }
    (x.0, x.1, y.0, y.1)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Stacked panels sharing the horizontal axis.
pub fn svg(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, panel) in panels.iter().enumerate() {
        let y0 = PANEL_HEIGHT * i as f64;
        let (xmin, xmax, ymin, ymax) = range(panel);
        let pw = WIDTH - LEFT - RIGHT;
        let ph = PANEL_HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - xmin) / (xmax - xmin) * pw;
        let sy = |y: f64| y0 + TOP + ph - (y - ymin) / (ymax - ymin) * ph;
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="gray"/>"#,
            y0 + TOP
        );
        let _ = writeln!(
            out,
            r#"<text x="{LEFT}" y="{:.2}" font-weight="bold">{}</text>"#,
            y0 + TOP - 8.0,
            escape(&panel.title)
        );
        for j in 0..=4 {
            let fy = ymin + (ymax - ymin) * j as f64 / 4.0;
            let fx = xmin + (xmax - xmin) * j as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                sy(fy) + 4.0,
                tick(fy)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                sx(fx),
                y0 + PANEL_HEIGHT - BOTTOM + 14.0,
                tick(fx)
            );
        }
        for (s_idx, s) in panel.series.iter().enumerate() {
            let color = COLORS[s_idx % COLORS.len()];
            match s.style {
                Style::Line => {
                    let mut d = String::new();
                    for (k, &(x, y)) in s.points.iter().enumerate() {
                        let _ = write!(
                            d,
                            "{}{:.2},{:.2}",
                            if k == 0 { "M" } else { " L" },
                            sx(x),
                            sy(y)
                        );
                    }
                    let _ = writeln!(
                        out,
                        r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
                    );
                }
                Style::Bars => {
                    for w in s.points.windows(2) {
                        let (xa, ya) = w[0];
                        let xb = w[1].0;
                        if ya <= 0.0 {
                            continue;
                        }
                        let _ = writeln!(
                            out,
                            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.6"/>"#,
                            sx(xa),
                            sy(ya),
                            (sx(xb) - sx(xa)).max(0.5),
                            sy(ymin) - sy(ya)
                        );
                    }
                }
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" fill="{color}" text-anchor="end">{}</text>"#,
                WIDTH - RIGHT - 4.0,
                y0 + TOP + 14.0 + 13.0 * s_idx as f64,
                escape(&s.name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 100.0).round() / 100.0)
    }
}

fn state_series(traj: &Trajectory, names: &[&str], i: usize) -> Series {
    let grid = traj.grid();
    Series {
        name: names[i].to_string(),
        points: traj
            .states
            .iter()
            .enumerate()
            .map(|(n, x)| (grid.node(n), x[i]))
            .collect(),
        style: Style::Line,
    }
}

fn control_series(control: &ControlGrid) -> Series {
    let grid = control.grid();
    let values = control.values();
    let mut points: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .map(|(k, &u)| (grid.node(k), u))
        .collect();
    points.push((grid.horizon(), 0.0));
    Series {
        name: "u".into(),
        points,
        style: Style::Bars,
    }
}

/// One panel per compartment and a final panel for the release rate.
pub fn trajectory_panels(traj: &Trajectory, names: &[&str]) -> Vec<Panel> {
    let mut panels: Vec<Panel> = (0..names.len())
        .map(|i| Panel {
            title: names[i].to_string(),
            series: vec![state_series(traj, names, i)],
        })
        .collect();
    panels.push(Panel {
        title: "release rate u".into(),
        series: vec![control_series(&traj.control)],
    });
    panels
}

/// Release bars above all compartments on a shared axis.
pub fn optimum_panels(traj: &Trajectory, names: &[&str]) -> Vec<Panel> {
    vec![
        Panel {
            title: "optimal release rate u".into(),
            series: vec![control_series(&traj.control)],
        },
        Panel {
            title: "states".into(),
            series: (0..names.len())
                .map(|i| state_series(traj, names, i))
                .collect(),
        },
    ]
}

/// Whitespace-separated columns with a `#` header line.
pub fn gnuplot_data(traj: &Trajectory, names: &[&str]) -> String {
    let grid = traj.grid();
    let values = traj.control.values();
    let mut out = String::from("# t");
    for n in names {
        out.push(' ');
        out.push_str(n);
    }
    out.push_str(" u\n");
    for (n, x) in traj.states.iter().enumerate() {
        out.push_str(&fmt_f64(grid.node(n)));
        for v in x.iter() {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        let _ = writeln!(out, " {}", fmt_f64(values[n.min(values.len() - 1)]));
    }
    out
}
