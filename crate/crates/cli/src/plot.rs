//! Minimal SVG rendering of line plots, trajectories and grid heatmaps.
//!
//! Every public renderer returns the SVG text together with the CSV of the
//! exact values drawn, so a figure can always be regenerated from its data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Result};
use swarmevo_core::coverage::GridData;
use swarmevo_core::scenario::{MetricSeries, TrajectoryRow};
use swarmevo_core::{GeoFence, Vec2};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub const RED: &str = "#d62728";
pub const GREY: &str = "#9a9a9a";
pub const BLUE: &str = "#1f77b4";
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A rendered figure and the data behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub svg: String,
    pub csv: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl IntoIterator<Item = f64>) -> Range {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.into_iter().filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            return Range { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 1e-12 { lo.abs() * 0.1 } else { 1.0 };
            return Range {
                lo: lo - pad,
                hi: hi + pad,
            };
        }
        Range { lo, hi }
    }

    fn span(&self) -> f64 {
        self.hi - self.lo
    }

    fn grow(self, frac: f64) -> Range {
        let p = self.span() * frac;
        Range {
            lo: self.lo - p,
            hi: self.hi + p,
        }
    }

    /// Round tick positions, about `n` of them.
    fn ticks(&self, n: usize) -> Vec<f64> {
        let raw = self.span() / n.max(1) as f64;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let first = (self.lo / step).ceil() as i64;
        let last = (self.hi / step).floor() as i64;
        (first..=last).map(|k| k as f64 * step).collect()
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plot frame mapping data coordinates to pixels.
struct Canvas {
    x: Range,
    y: Range,
    /// Plot area in pixels: left, top, width, height.
    area: (f64, f64, f64, f64),
    body: String,
}

impl Canvas {
    fn new(x: Range, y: Range) -> Canvas {
        Canvas {
            x,
            y,
            area: (LEFT, TOP, WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM),
            body: String::new(),
        }
    }

    /// Same scale on both axes, centred in the plot area.
    fn equal(x: Range, y: Range) -> Canvas {
        let (w, h) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let scale = (w / x.span()).min(h / y.span());
        let (pw, ph) = (x.span() * scale, y.span() * scale);
        Canvas {
            x,
            y,
            area: (LEFT + (w - pw) / 2.0, TOP + (h - ph) / 2.0, pw, ph),
            body: String::new(),
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.area.0 + (x - self.x.lo) / self.x.span() * self.area.2
    }

    fn py(&self, y: f64) -> f64 {
        self.area.1 + self.area.3 - (y - self.y.lo) / self.y.span() * self.area.3
    }

    fn points(&self, pts: impl IntoIterator<Item = (f64, f64)>) -> String {
        pts.into_iter()
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Polyline broken at non-finite values.
    fn line(&mut self, xs: &[f64], ys: &[f64], colour: &str, width: f64) {
        let mut run = Vec::new();
        let flush = |run: &mut Vec<(f64, f64)>, body: &mut String, this: &Canvas| {
            if run.len() > 1 {
                let _ = writeln!(
                    body,
                    r#"<polyline fill="none" stroke="{colour}" stroke-width="{width}" points="{}"/>"#,
                    this.points(run.iter().copied())
                );
            }
            run.clear();
        };
        let mut body = std::mem::take(&mut self.body);
        for (&x, &y) in xs.iter().zip(ys) {
            if x.is_finite() && y.is_finite() {
                run.push((x, y));
            } else {
                flush(&mut run, &mut body, self);
            }
        }
        flush(&mut run, &mut body, self);
        self.body = body;
    }

    fn band(&mut self, xs: &[f64], lo: &[f64], hi: &[f64], colour: &str) {
        let upper = xs.iter().zip(hi).map(|(&x, &y)| (x, y));
        let lower = xs.iter().zip(lo).rev().map(|(&x, &y)| (x, y));
        let pts: Vec<(f64, f64)> = upper.chain(lower).filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        if pts.len() > 2 {
            let _ = writeln!(
                self.body,
                r#"<polygon fill="{colour}" fill-opacity="0.25" stroke="none" points="{}"/>"#,
                self.points(pts)
            );
        }
    }

    fn polygon(&mut self, pts: &[Vec2], colour: &str) {
        let _ = writeln!(
            self.body,
            r#"<polygon fill="none" stroke="{colour}" stroke-width="1.5" stroke-dasharray="6,3" points="{}"/>"#,
            self.points(pts.iter().map(|p| (p.x, p.y)))
        );
    }

    fn finish(self, title: &str, xlabel: &str, ylabel: &str, legend: &[(&str, &str)]) -> String {
        let (l, t, w, h) = self.area;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            esc(title)
        );
        for v in self.x.ticks(6) {
            let x = self.px(v);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                t + h,
                t + h + 5.0,
                t + h + 18.0,
                fmt_tick(v)
            );
        }
        for v in self.y.ticks(5) {
            let y = self.py(v);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="#000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                l - 5.0,
                l - 8.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#000"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            l + w / 2.0,
            HEIGHT - 12.0,
            esc(xlabel)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            t + h / 2.0,
            t + h / 2.0,
            esc(ylabel)
        );
        s.push_str(&self.body);
        for (i, (label, colour)) in legend.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * i as f64;
            let x = WIDTH - RIGHT - 150.0;
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                x + 20.0,
                x + 25.0,
                y + 4.0,
                esc(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// One curve of a line plot.
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub colour: String,
}

/// Shaded region between two curves sharing `xs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub xs: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

pub fn line_svg(title: &str, xlabel: &str, ylabel: &str, lines: &[Line], band: Option<&Band>) -> String {
    let xs = lines.iter().flat_map(|l| l.xs.iter().copied());
    let ys = lines.iter().flat_map(|l| l.ys.iter().copied());
    let (bx, by): (Vec<f64>, Vec<f64>) = match band {
        Some(b) => (b.xs.clone(), b.lo.iter().chain(&b.hi).copied().collect()),
        None => (Vec::new(), Vec::new()),
    };
    let mut c = Canvas::new(Range::of(xs.chain(bx)), Range::of(ys.chain(by)).grow(0.05));
    if let Some(b) = band {
        c.band(&b.xs, &b.lo, &b.hi, BLUE);
    }
    for l in lines {
        c.line(&l.xs, &l.ys, &l.colour, 1.5);
    }
    let legend: Vec<(&str, &str)> = lines
        .iter()
        .filter(|l| !l.label.is_empty())
        .map(|l| (l.label.as_str(), l.colour.as_str()))
        .collect();
    c.finish(title, xlabel, ylabel, if legend.len() <= 10 { &legend } else { &[] })
}

/// One metric column over time.
pub fn metric_plot(series: &MetricSeries, column: &str) -> Result<Plot> {
    let ys = match series.column(column) {
        Ok(ys) => ys,
        Err(_) => bail!("metric log has no column `{column}` (columns: {})", series.names.join(", ")),
    };
    let mut csv = format!("t,{column}\n");
    for (t, y) in series.times.iter().zip(&ys) {
        let _ = writeln!(csv, "{t},{y}");
    }
    let line = Line {
        label: String::new(),
        xs: series.times.clone(),
        ys,
        colour: BLUE.into(),
    };
    Ok(Plot {
        svg: line_svg(column, "time (s)", column, &[line], None),
        csv,
    })
}

/// Several runs of the same metric: each run grey, their mean with a ±1 std
/// band in blue.
pub fn metric_runs_plot(runs: &[(String, MetricSeries)], column: &str) -> Result<Plot> {
    let mut cols = Vec::new();
    for (name, s) in runs {
        match s.column(column) {
            Ok(c) => cols.push((name, &s.times, c)),
            Err(_) => bail!("run {name} has no column `{column}`"),
        }
    }
    let times = cols.iter().map(|c| c.1).max_by_key(|t| t.len()).cloned().unwrap_or_default();
    let (mean, std) = pointwise_stats(&times, cols.iter().map(|c| (c.1.as_slice(), c.2.as_slice())));
    let mut csv = String::from("t");
    for (name, _, _) in &cols {
        let _ = write!(csv, ",{name}");
    }
    csv.push_str(",mean,std\n");
    for (i, t) in times.iter().enumerate() {
        let _ = write!(csv, "{t}");
        for (_, _, c) in &cols {
            match c.get(i) {
                Some(v) => {
                    let _ = write!(csv, ",{v}");
                }
                None => csv.push(','),
            }
        }
        let _ = writeln!(csv, ",{},{}", mean[i], std[i]);
    }
    let mut lines: Vec<Line> = cols
        .iter()
        .map(|(_, t, c)| Line {
            label: String::new(),
            xs: t.to_vec(),
            ys: c.clone(),
            colour: GREY.into(),
        })
        .collect();
    lines.push(Line {
        label: "mean".into(),
        xs: times.clone(),
        ys: mean.clone(),
        colour: BLUE.into(),
    });
    let band = band_of(&times, &mean, &std);
    Ok(Plot {
        svg: line_svg(column, "time (s)", column, &lines, Some(&band)),
        csv,
    })
}

fn band_of(xs: &[f64], mean: &[f64], std: &[f64]) -> Band {
    Band {
        xs: xs.to_vec(),
        lo: mean.iter().zip(std).map(|(m, s)| m - s).collect(),
        hi: mean.iter().zip(std).map(|(m, s)| m + s).collect(),
    }
}

/// Mean and population std at each index across curves; curves may be
/// shorter than `xs`. NaN values are skipped.
fn pointwise_stats<'a>(xs: &[f64], curves: impl Iterator<Item = (&'a [f64], &'a [f64])>) -> (Vec<f64>, Vec<f64>) {
    let curves: Vec<_> = curves.collect();
    let mut mean = Vec::with_capacity(xs.len());
    let mut std = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        let vals: Vec<f64> = curves
            .iter()
            .filter_map(|(_, ys)| ys.get(i).copied())
            .filter(|v| !v.is_nan())
            .collect();
        if vals.is_empty() {
            mean.push(f64::NAN);
            std.push(f64::NAN);
            continue;
        }
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
        mean.push(m);
        std.push(v.sqrt());
    }
    (mean, std)
}

/// Per-generation fitness of several runs. The three runs with the highest
/// final value are drawn in red, the rest in grey, with the across-run mean
/// and a ±1 std band.
pub fn fitness_plot(runs: &[(u64, Vec<f64>)], ylabel: &str) -> Plot {
    let gens = runs.iter().map(|r| r.1.len()).max().unwrap_or(0);
    let xs: Vec<f64> = (0..gens).map(|g| g as f64).collect();
    let (mean, std) = pointwise_stats(&xs, runs.iter().map(|r| (xs.as_slice(), r.1.as_slice())));

    let mut order: Vec<usize> = (0..runs.len()).collect();
    let last = |i: usize| runs[i].1.last().copied().filter(|v| !v.is_nan()).unwrap_or(f64::NEG_INFINITY);
    order.sort_by(|&a, &b| last(b).total_cmp(&last(a)).then(runs[a].0.cmp(&runs[b].0)));
    let top: Vec<usize> = order.iter().copied().take(3).collect();

    let mut csv = String::from("generation");
    for (seed, _) in runs {
        let _ = write!(csv, ",seed_{seed}");
    }
    csv.push_str(",mean,std\n");
    for g in 0..gens {
        let _ = write!(csv, "{g}");
        for (_, ys) in runs {
            match ys.get(g) {
                Some(v) if !v.is_nan() => {
                    let _ = write!(csv, ",{v}");
                }
                _ => csv.push(','),
            }
        }
        let _ = writeln!(csv, ",{},{}", mean[g], std[g]);
    }

    let mut lines = Vec::new();
    for (i, (_, ys)) in runs.iter().enumerate() {
        if !top.contains(&i) {
            lines.push(Line {
                label: String::new(),
                xs: xs[..ys.len()].to_vec(),
                ys: ys.clone(),
                colour: GREY.into(),
            });
        }
    }
    for &i in &top {
        let (seed, ys) = &runs[i];
        lines.push(Line {
            label: format!("seed {seed}"),
            xs: xs[..ys.len()].to_vec(),
            ys: ys.clone(),
            colour: RED.into(),
        });
    }
    lines.push(Line {
        label: "mean".into(),
        xs: xs.clone(),
        ys: mean.clone(),
        colour: "#000".into(),
    });
    let band = band_of(&xs, &mean, &std);
    Plot {
        svg: line_svg("Fitness per generation", "generation", ylabel, &lines, Some(&band)),
        csv,
    }
}

/// Robot paths with a square at each start and a circle at each end.
pub fn trajectory_svg(rows: &[TrajectoryRow], fence: Option<&GeoFence>, title: &str) -> String {
    let mut paths: BTreeMap<u32, Vec<Vec2>> = BTreeMap::new();
    for r in rows {
        paths.entry(r.id).or_default().push(r.position);
    }
    let fence_pts: &[Vec2] = fence.map_or(&[], |f| f.vertices());
    let all = || paths.values().flatten().chain(fence_pts);
    let x = Range::of(all().map(|p| p.x));
    let y = Range::of(all().map(|p| p.y));
    let span = x.span().max(y.span());
    let centre = |r: Range| (r.lo + r.hi) / 2.0;
    let square = |c: f64| Range {
        lo: c - span / 2.0,
        hi: c + span / 2.0,
    };
    let mut c = Canvas::equal(square(centre(x)).grow(0.05), square(centre(y)).grow(0.05));
    if let Some(f) = fence {
        c.polygon(f.vertices(), "#555");
    }
    for (k, (_, path)) in paths.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let xs: Vec<f64> = path.iter().map(|p| p.x).collect();
        let ys: Vec<f64> = path.iter().map(|p| p.y).collect();
        c.line(&xs, &ys, colour, 1.2);
        let (s, e) = (path[0], path[path.len() - 1]);
        let _ = writeln!(
            c.body,
            r#"<rect x="{:.2}" y="{:.2}" width="8" height="8" fill="{colour}"/>"#,
            c.px(s.x) - 4.0,
            c.py(s.y) - 4.0
        );
        let _ = writeln!(
            c.body,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4.5" fill="{colour}" stroke="#000"/>"##,
            c.px(e.x),
            c.py(e.y)
        );
    }
    c.finish(title, "x (m)", "y (m)", &[])
}

/// Colour for a value in [0, 1]: dark blue through green to yellow.
fn colour_map(v: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let v = v.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (v.floor() as usize).min(STOPS.len() - 2);
    let f = v - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Dense grid as coloured cells. NaN cells are left blank. Each cell carries
/// its exact value in a `data-v` attribute. `range` defaults to the finite
/// min and max of the grid.
pub fn heatmap(grid: &GridData, title: &str, range: Option<(f64, f64)>) -> Plot {
    let cs = grid.cell_size;
    let x = Range {
        lo: grid.origin.x,
        hi: grid.origin.x + cs * grid.cols.max(1) as f64,
    };
    let y = Range {
        lo: grid.origin.y,
        hi: grid.origin.y + cs * grid.rows.max(1) as f64,
    };
    let (vlo, vhi) = range.unwrap_or_else(|| {
        let r = Range::of(grid.values.iter().copied());
        (r.lo, r.hi)
    });
    let scale = if vhi > vlo { vhi - vlo } else { 1.0 };
    let mut c = Canvas::equal(x, y);
    let mut csv = String::from("col,row,x,y,value\n");
    let (wpx, hpx) = (c.px(x.lo + cs) - c.px(x.lo), c.py(y.lo) - c.py(y.lo + cs));
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let v = grid.values[row * grid.cols + col];
            let cx = grid.origin.x + (col as f64 + 0.5) * cs;
            let cy = grid.origin.y + (row as f64 + 0.5) * cs;
            let _ = writeln!(csv, "{col},{row},{cx},{cy},{v}");
            if v.is_nan() {
                continue;
            }
            let _ = writeln!(
                c.body,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}" shape-rendering="crispEdges" data-v="{v}"/>"#,
                c.px(cx - cs / 2.0),
                c.py(cy + cs / 2.0),
                wpx + 0.4,
                hpx + 0.4,
                colour_map((v - vlo) / scale)
            );
        }
    }
    let legend = [
        (format!("{} ", fmt_tick(vlo)), colour_map(0.0)),
        (format!("{} ", fmt_tick(vhi)), colour_map(1.0)),
    ];
    let legend: Vec<(&str, &str)> = legend.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    Plot {
        svg: c.finish(title, "x (m)", "y (m)", &legend),
        csv,
    }
}

/// Values stored in the `data-v` attributes of a heatmap, in drawing order.
pub fn heatmap_values(svg: &str) -> Vec<f64> {
    svg.split("data-v=\"")
        .skip(1)
        .filter_map(|s| s.split('"').next()?.parse().ok())
        .collect()
}
