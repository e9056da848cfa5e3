//! Static SVG charts written with plain string formatting.

use std::fmt::Write as _;

use featrank::stats::quantile_sorted;
use featrank::AggregatedRanking;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 35.0, 45.0); // left, right, top, bottom

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn document(w: f64, h: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Lay panels out on a grid, `cols` per row.
pub fn grid(panels: &[String], cols: usize) -> String {
    let cols = cols.max(1);
    let rows = panels.len().div_ceil(cols).max(1);
    let mut body = String::new();
    for (k, p) in panels.iter().enumerate() {
        let (x, y) = ((k % cols) as f64 * PANEL_W, (k / cols) as f64 * PANEL_H);
        let _ = writeln!(body, "<g transform=\"translate({x:.0},{y:.0})\">\n{p}</g>");
    }
    document(cols.min(panels.len().max(1)) as f64 * PANEL_W, rows as f64 * PANEL_H, &body)
}

pub fn single(panel: String) -> String {
    grid(&[panel], 1)
}

/// Linear map from data ranges onto the plotting area of one panel.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if !(lo.is_finite() && hi.is_finite()) {
                (0.0, 1.0)
            } else if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Frame { x: widen(x), y: widen(y) }
    }

    fn px(&self, v: f64) -> f64 {
        let (l, r) = (MARGIN.0, PANEL_W - MARGIN.1);
        l + (v - self.x.0) / (self.x.1 - self.x.0) * (r - l)
    }

    fn py(&self, v: f64) -> f64 {
        let (t, b) = (MARGIN.2, PANEL_H - MARGIN.3);
        b - (v - self.y.0) / (self.y.1 - self.y.0) * (b - t)
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str, x_ticks: bool) {
        let (l, r, t, b) = (MARGIN.0, PANEL_W - MARGIN.1, MARGIN.2, PANEL_H - MARGIN.3);
        let _ = writeln!(
            out,
            "<rect x=\"{l}\" y=\"{t}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\"/>",
            r - l,
            b - t
        );
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>", (l + r) / 2.0, escape(title));
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", (l + r) / 2.0, PANEL_H - 8.0, escape(xlabel));
        let _ = writeln!(
            out,
            "<text transform=\"translate(14,{:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            (t + b) / 2.0,
            escape(ylabel)
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", l - 4.0, self.py(yv) + 4.0, tick(yv));
            if x_ticks {
                let xv = self.x.0 + f * (self.x.1 - self.x.0);
                let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", self.px(xv), b + 14.0, tick(xv));
            }
        }
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Median rank per feature with an interquartile whisker, best feature on top.
pub fn ranked_bars(agg: &AggregatedRanking, title: &str) -> String {
    let order = agg.order();
    let p = order.len();
    let row_h = 16.0;
    let (l, top) = (130.0, 40.0);
    let w = 480.0;
    let h = top + row_h * p as f64 + 40.0;
    let scale = |r: f64| l + (r - 0.5) / p as f64 * (w - l - 20.0);
    let mut body = format!("<text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n", w / 2.0, escape(title));
    for (row, &j) in order.iter().enumerate() {
        let mut r: Vec<f64> = agg.rank_sets[j].iter().map(|&v| v as f64).collect();
        r.sort_by(f64::total_cmp);
        let (q1, q3) = (quantile_sorted(&r, 0.25), quantile_sorted(&r, 0.75));
        let y = top + row_h * row as f64 + row_h / 2.0;
        let _ = writeln!(body, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", l - 6.0, y + 4.0, escape(&agg.feature_names[j]));
        let _ = writeln!(
            body,
            "<rect x=\"{l}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\" opacity=\"0.7\"/>",
            y - row_h * 0.35,
            scale(agg.median[j]) - l,
            row_h * 0.7,
            PALETTE[0]
        );
        let _ = writeln!(
            body,
            "<line x1=\"{:.1}\" x2=\"{:.1}\" y1=\"{y:.1}\" y2=\"{y:.1}\" stroke=\"black\" stroke-width=\"1.5\"/>",
            scale(q1),
            scale(q3)
        );
    }
    let base = top + row_h * p as f64 + 4.0;
    let _ = writeln!(body, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">median rank (bars) and IQR (whiskers)</text>", (l + w) / 2.0, base + 28.0);
    for r in [1, p.div_ceil(2), p] {
        let _ = writeln!(body, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{r}</text>", scale(r as f64), base + 12.0);
    }
    document(w, h, &body)
}

/// Hexagonal binning of a point cloud; darker cells hold more points.
pub fn hexbin(x: &[f64], y: &[f64], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::new(range(x.iter().copied()), range(y.iter().copied()));
    let mut out = String::new();
    f.axes(&mut out, title, xlabel, ylabel, true);
    let r = 9.0;
    let dx = r * 3f64.sqrt();
    let dy = 1.5 * r;
    let mut cells: std::collections::BTreeMap<(i64, i64), usize> = Default::default();
    for (&a, &b) in x.iter().zip(y) {
        if !(a.is_finite() && b.is_finite()) {
            continue;
        }
        let (px, py) = (f.px(a), f.py(b));
        // nearest centre among the two candidate lattice rows
        let row = (py / dy).floor() as i64;
        let best = [row, row + 1]
            .iter()
            .map(|&rw| {
                let shift = if rw.rem_euclid(2) == 1 { dx / 2.0 } else { 0.0 };
                let col = ((px - shift) / dx).round() as i64;
                let (cx, cy) = (col as f64 * dx + shift, rw as f64 * dy);
                ((px - cx).powi(2) + (py - cy).powi(2), (rw, col))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|v| v.1)
            .expect("two candidates");
        *cells.entry(best).or_default() += 1;
    }
    let max = cells.values().copied().max().unwrap_or(1) as f64;
    for (&(rw, col), &n) in &cells {
        let shift = if rw.rem_euclid(2) == 1 { dx / 2.0 } else { 0.0 };
        let (cx, cy) = (col as f64 * dx + shift, rw as f64 * dy);
        let pts: Vec<String> = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64 + std::f64::consts::PI / 6.0;
                format!("{:.1},{:.1}", cx + r * a.cos(), cy + r * a.sin())
            })
            .collect();
        let shade = 0.15 + 0.85 * (n as f64).ln_1p() / max.ln_1p();
        let _ = writeln!(out, "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"{shade:.3}\"/>", pts.join(" "), PALETTE[0]);
    }
    out
}

/// One polyline per series, with a legend in the upper left.
pub fn lines(series: &[(String, Vec<(f64, f64)>)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::new(
        range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0))),
        range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1))),
    );
    let mut out = String::new();
    f.axes(&mut out, title, xlabel, ylabel, true);
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(a, b)| format!("{:.1},{:.1}", f.px(a), f.py(b)))
            .collect();
        let _ = writeln!(out, "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>", path.join(" "));
        let ly = MARGIN.2 + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{0:.1}\" x2=\"{1:.1}\" y1=\"{ly:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{2:.1}\" y=\"{3:.1}\">{4}</text>",
            MARGIN.0 + 8.0,
            MARGIN.0 + 24.0,
            MARGIN.0 + 28.0,
            ly + 4.0,
            escape(name)
        );
    }
    out
}

/// Vertical bars with optional interval whiskers.
pub fn bars(labels: &[String], values: &[f64], ci: Option<&[(f64, f64)]>, title: &str, ylabel: &str) -> String {
    let mut lo_hi: Vec<f64> = values.to_vec();
    if let Some(c) = ci {
        lo_hi.extend(c.iter().flat_map(|&(a, b)| [a, b]));
    }
    lo_hi.push(0.0);
    let (lo, hi) = range(lo_hi.into_iter());
    let f = Frame::new((0.0, labels.len().max(1) as f64), (lo, hi + 0.05 * (hi - lo).abs()));
    let mut out = String::new();
    f.axes(&mut out, title, "", ylabel, false);
    let zero = f.py(0.0);
    let _ = writeln!(out, "<line x1=\"{:.1}\" x2=\"{:.1}\" y1=\"{zero:.1}\" y2=\"{zero:.1}\" stroke=\"#333\"/>", MARGIN.0, PANEL_W - MARGIN.1);
    for (k, (label, &v)) in labels.iter().zip(values).enumerate() {
        let (x0, x1) = (f.px(k as f64 + 0.15), f.px(k as f64 + 0.85));
        let top = f.py(v).min(zero);
        let _ = writeln!(
            out,
            "<rect x=\"{x0:.1}\" y=\"{top:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\"/>",
            x1 - x0,
            (f.py(v) - zero).abs(),
            PALETTE[k % PALETTE.len()]
        );
        let cx = (x0 + x1) / 2.0;
        if let Some(&(a, b)) = ci.and_then(|c| c.get(k)) {
            let _ = writeln!(out, "<line x1=\"{cx:.1}\" x2=\"{cx:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\" stroke-width=\"1.5\"/>", f.py(a), f.py(b));
        }
        let _ = writeln!(
            out,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            PANEL_H - MARGIN.3 + 14.0,
            escape(label)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documents_are_well_formed() {
        let s = single(lines(&[("a".into(), vec![(0.0, 1.0), (1.0, 2.0)])], "t", "x", "y"));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        let h = single(hexbin(&[0.0, 0.5, 1.0, 1.0], &[1.0, 0.2, 0.0, 0.0], "h", "x", "y"));
        assert_eq!(h.matches("<polygon").count(), 3);
        let b = single(bars(&["a".into(), "b<".into()], &[1.0, -0.5], Some(&[(0.5, 1.5), (-1.0, 0.0)]), "b", "v"));
        assert!(b.contains("b&lt;"));
        assert_eq!(grid(&[String::new(), String::new(), String::new()], 2).matches("<g ").count(), 3);
    }
}
