//! Minimal static SVG line plots of trace columns.

use std::fmt::Write as _;

use crate::sim::{Scenario, Trace};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 300.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            xs,
            ys,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let finite = |v: &&f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.xs.iter()).filter(finite);
    let ys = series.iter().flat_map(|s| s.ys.iter()).filter(finite);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    let pad = if y1 - y0 > 0.0 { 0.05 * (y1 - y0) } else { 0.5 * y0.abs().max(1.0) };
    (x0, x1, y0 - pad, y1 + pad)
}

/// Renders one panel with autoscaled axes, a legend and light grid.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (x0, x1, y0, y1) = bounds(series);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="18" font-size="13">{}</text>"#, MARGIN_L, escape(title));
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (gx, gy) = (MARGIN_L + f * pw, MARGIN_T + f * ph);
        let _ = writeln!(
            out,
            r##"<line x1="{gx:.1}" y1="{MARGIN_T}" x2="{gx:.1}" y2="{:.1}" stroke="#eee"/><text x="{gx:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            MARGIN_T + ph,
            MARGIN_T + ph + 14.0,
            tick(x0 + f * (x1 - x0))
        );
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_L}" y1="{gy:.1}" x2="{:.1}" y2="{gy:.1}" stroke="#eee"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            MARGIN_L + pw,
            MARGIN_L - 4.0,
            gy + 4.0,
            tick(y1 - f * (y1 - y0))
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 6.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate(14 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        MARGIN_T + ph / 2.0,
        escape(ylabel)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = String::new();
        for (x, y) in s.xs.iter().zip(&s.ys).filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(pts, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2"{dash} points="{}"/>"#,
            pts.trim_end()
        );
        let ly = MARGIN_T + 12.0 + 16.0 * i as f64;
        let lx = MARGIN_L + pw + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn tick(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn column(trace: &Trace, f: impl Fn(&crate::sim::TraceRow) -> f64) -> Vec<f64> {
    trace.rows.iter().map(f).collect()
}

/// Position, force and torque panels as `(file name, svg)`. Several traces
/// are overlaid with their labels as prefixes.
pub fn trace_panels(runs: &[(&str, &Trace)], sc: &Scenario) -> Vec<(String, String)> {
    let prefix = |label: &str, what: String| {
        if runs.len() > 1 {
            format!("{label} {what}")
        } else {
            what
        }
    };
    let mut pos = Vec::new();
    let mut force = Vec::new();
    let mut torque = Vec::new();
    for (label, tr) in runs {
        let t = column(tr, |r| r.t);
        for j in 0..tr.dof {
            pos.push(Series::new(prefix(label, format!("q{}", j + 1)), t.clone(), column(tr, |r| r.q[j])));
            pos.push(Series::new(prefix(label, format!("qx{}", j + 1)), t.clone(), column(tr, |r| r.qx[j])).dashed());
            torque.push(Series::new(prefix(label, format!("tau{}", j + 1)), t.clone(), column(tr, |r| r.tau[j])));
        }
        force.push(Series::new(prefix(label, "fc_y".into()), t.clone(), column(tr, |r| r.fc_cart[1])));
        force.push(Series::new(prefix(label, "fc_x".into()), t.clone(), column(tr, |r| r.fc_cart[0])));
    }
    if let Some((_, tr)) = runs.first() {
        let t = column(tr, |r| r.t);
        force.push(Series::new("-fd_y", t.clone(), column(tr, |r| -r.fd_cart[1])).dashed());
        if let Ok(plant) = sc.plant.build() {
            for (j, f) in plant.torque_limits().limits().iter().enumerate() {
                let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
                torque.push(Series::new(format!("+F{}", j + 1), vec![t0, t1], vec![*f, *f]).dashed());
                torque.push(Series::new(format!("-F{}", j + 1), vec![t0, t1], vec![-f, -f]).dashed());
            }
        }
    }
    vec![
        ("position.svg".into(), line_plot(&format!("{}: position", sc.name), "t [s]", "q, q_x", &pos)),
        ("force.svg".into(), line_plot(&format!("{}: contact force", sc.name), "t [s]", "force [N]", &force)),
        ("torque.svg".into(), line_plot(&format!("{}: actuation", sc.name), "t [s]", "tau", &torque)),
    ]
}
