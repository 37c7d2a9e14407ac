//! Minimal SVG writer plus scatter and curve plots.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::space::Embedding3D;
use crate::stats::{logistic_eval, LogisticParams, Series};

/// Group colors: first the left series (red), then the right (green), as in
/// the scatter convention; further groups cycle through the rest.
pub const PALETTE: [&str; 6] = [
    "#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b",
];

pub(crate) struct Svg {
    pub(crate) body: String,
    width: f64,
    height: f64,
}

pub(crate) fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Svg {
    pub(crate) fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    pub(crate) fn raw(&mut self, s: &str) {
        self.body.push_str(s);
        self.body.push('\n');
    }

    pub(crate) fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        );
    }

    pub(crate) fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    pub(crate) fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size:.1}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            esc(s)
        );
    }

    pub(crate) fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

struct Axes {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Axes {
    fn new(x0: f64, y0: f64, w: f64, h: f64, xs: (f64, f64), ys: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| {
            let span = if b > a { b - a } else { 1.0 };
            (a - 0.05 * span, b + 0.05 * span)
        };
        let (xmin, xmax) = pad(xs);
        let (ymin, ymax) = pad(ys);
        Self {
            x0,
            y0,
            w,
            h,
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xmin) / (self.xmax - self.xmin) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ymin) / (self.ymax - self.ymin) * self.h
    }

    fn draw(&self, svg: &mut Svg, xlabel: &str, ylabel: &str) {
        svg.line(
            self.x0,
            self.y0 + self.h,
            self.x0 + self.w,
            self.y0 + self.h,
            "black",
        );
        svg.line(self.x0, self.y0, self.x0, self.y0 + self.h, "black");
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.xmin + f * (self.xmax - self.xmin);
            let yv = self.ymin + f * (self.ymax - self.ymin);
            let (px, py) = (self.px(xv), self.py(yv));
            svg.line(px, self.y0 + self.h, px, self.y0 + self.h + 4.0, "black");
            svg.text(
                px,
                self.y0 + self.h + 16.0,
                10.0,
                "middle",
                &format!("{xv:.3}"),
            );
            svg.line(self.x0 - 4.0, py, self.x0, py, "black");
            svg.text(self.x0 - 6.0, py + 3.0, 10.0, "end", &format!("{yv:.3}"));
        }
        svg.text(
            self.x0 + self.w / 2.0,
            self.y0 + self.h + 32.0,
            12.0,
            "middle",
            xlabel,
        );
        svg.text(
            self.x0 - 48.0,
            self.y0 + self.h / 2.0,
            12.0,
            "middle",
            ylabel,
        );
    }
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    })
}

/// 2-D projection of an embedding onto components `axes`, one marker per
/// sample colored by `groups[i]` (an index into `names`), with a legend.
pub fn render_scatter(
    e: &Embedding3D,
    groups: &[usize],
    names: &[&str],
    axes: (usize, usize),
) -> Result<String> {
    let n = e.coords.len();
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if groups.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: groups.len(),
        });
    }
    if axes.0 > 2 || axes.1 > 2 {
        return Err(Error::InvalidParameter(
            "axes must be component indices 0..=2".into(),
        ));
    }
    if let Some(&g) = groups.iter().find(|&&g| g >= names.len()) {
        return Err(Error::InvalidParameter(format!("group {g} has no name")));
    }
    let xs = range(e.coords.iter().map(|c| c[axes.0]));
    let ys = range(e.coords.iter().map(|c| c[axes.1]));
    let mut svg = Svg::new(640.0, 520.0);
    let ax = Axes::new(80.0, 30.0, 420.0, 420.0, xs, ys);
    ax.draw(
        &mut svg,
        &format!("PC{}", axes.0 + 1),
        &format!("PC{}", axes.1 + 1),
    );
    for (i, (c, &g)) in e.coords.iter().zip(groups).enumerate() {
        let label = &e.labels[i];
        let _ = writeln!(
            svg.body,
            r#"<circle class="point" data-label="{label}" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
            ax.px(c[axes.0]),
            ax.py(c[axes.1]),
            PALETTE[g % PALETTE.len()]
        );
    }
    let used: std::collections::BTreeSet<usize> = groups.iter().copied().collect();
    for (row, g) in used.into_iter().enumerate() {
        let y = 40.0 + 18.0 * row as f64;
        let _ = writeln!(
            svg.body,
            r#"<circle class="legend" cx="520" cy="{y:.2}" r="5" fill="{}"/>"#,
            PALETTE[g % PALETTE.len()]
        );
        svg.text(530.0, y + 4.0, 12.0, "start", names[g]);
    }
    Ok(svg.finish())
}

/// Line plot of one or more column series, optionally with a fitted
/// logistic curve drawn over the same column range.
pub fn render_series(
    title: &str,
    series: &[(&str, &Series)],
    fit: Option<&LogisticParams>,
) -> Result<String> {
    if series.is_empty() || series.iter().any(|(_, s)| s.len() == 0) {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let xs = range(series.iter().flat_map(|(_, s)| s.xs()));
    let mut ys = range(series.iter().flat_map(|(_, s)| s.values.iter().copied()));
    let fit_pts: Vec<(f64, f64)> = fit
        .map(|p| {
            (0..=200)
                .map(|i| {
                    let x = xs.0 + (xs.1 - xs.0) * i as f64 / 200.0;
                    (x, logistic_eval(p, x))
                })
                .collect()
        })
        .unwrap_or_default();
    for &(_, y) in &fit_pts {
        ys = (ys.0.min(y), ys.1.max(y));
    }
    let mut svg = Svg::new(720.0, 460.0);
    svg.text(360.0, 20.0, 14.0, "middle", title);
    let ax = Axes::new(80.0, 36.0, 500.0, 360.0, xs, ys);
    ax.draw(&mut svg, "column", "value");
    for (k, (name, s)) in series.iter().enumerate() {
        let color = PALETTE[(k + 2) % PALETTE.len()];
        let pts: Vec<String> = s
            .xs()
            .iter()
            .zip(&s.values)
            .map(|(&x, &y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y)))
            .collect();
        let _ = writeln!(
            svg.body,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let y = 50.0 + 18.0 * k as f64;
        svg.line(600.0, y, 620.0, y, color);
        svg.text(626.0, y + 4.0, 11.0, "start", name);
    }
    if !fit_pts.is_empty() {
        let pts: Vec<String> = fit_pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y)))
            .collect();
        let _ = writeln!(
            svg.body,
            r#"<polyline class="fit" fill="none" stroke="black" stroke-dasharray="4 3" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }
    Ok(svg.finish())
}
