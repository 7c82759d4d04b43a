//! Static SVG plots of closed-loop traces.

use std::fmt::Write as _;

use switchsynth::{BoxF64, Trace};

const W: f64 = 720.0;
const PANEL_H: f64 = 180.0;
const PHASE: f64 = 480.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A labelled rectangle drawn on the phase plot.
pub struct Region<'a> {
    pub label: &'a str,
    pub area: &'a BoxF64,
    pub stroke: &'a str,
    pub fill: &'a str,
}

struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            px_lo,
            px_hi,
        }
    }

    fn at(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn polyline(out: &mut String, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    out.push_str("<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"");
    out.push_str(color);
    out.push_str("\" points=\"");
    for (x, y) in pts {
        let _ = write!(out, "{x:.2},{y:.2} ");
    }
    out.push_str("\"/>\n");
}

fn axes(out: &mut String, x0: f64, y0: f64, w: f64, h: f64, xl: &str, yl: &str, sx: &Scale, sy: &Scale) {
    let _ = writeln!(
        out,
        "<rect x=\"{x0}\" y=\"{y0}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#444\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{xl} [{:.3}, {:.3}]</text>",
        x0 + w / 2.0,
        y0 + h + 18.0,
        sx.lo,
        sx.hi
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 {:.1} {:.1})\">{yl} [{:.3}, {:.3}]</text>",
        x0 - 12.0,
        y0 + h / 2.0,
        x0 - 12.0,
        y0 + h / 2.0,
        sy.lo,
        sy.hi
    );
}

/// One time-series panel per state variable, then a phase plot with the
/// regions when the system is two-dimensional.
pub fn trace_svg(trace: &Trace, regions: &[Region<'_>]) -> String {
    let n = trace.points.first().map_or(0, |p| p.x.len());
    let phase = n == 2;
    let height = MARGIN + n as f64 * (PANEL_H + MARGIN) + if phase { PHASE + MARGIN } else { 0.0 };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let (t_lo, t_hi) = bounds(trace.points.iter().map(|p| p.t));
    let pw = W - 2.0 * MARGIN;
    for i in 0..n {
        let y0 = MARGIN + i as f64 * (PANEL_H + MARGIN);
        let sx = Scale::new(t_lo, t_hi, MARGIN, MARGIN + pw);
        let (lo, hi) = bounds(trace.points.iter().map(|p| p.x[i]));
        let sy = Scale::new(lo, hi, y0 + PANEL_H, y0);
        axes(&mut out, MARGIN, y0, pw, PANEL_H, "t", &format!("x{}", i + 1), &sx, &sy);
        polyline(
            &mut out,
            trace.points.iter().map(|p| (sx.at(p.t), sy.at(p.x[i]))),
            COLORS[i % COLORS.len()],
        );
    }
    if phase {
        let y0 = MARGIN + n as f64 * (PANEL_H + MARGIN);
        let x0 = (W - PHASE) / 2.0;
        let pts = trace.points.iter().map(|p| (p.x[0], p.x[1]));
        let corners = regions
            .iter()
            .flat_map(|r| [(r.area[0].lo(), r.area[1].lo()), (r.area[0].hi(), r.area[1].hi())]);
        let all: Vec<(f64, f64)> = pts.chain(corners).collect();
        let (xlo, xhi) = bounds(all.iter().map(|p| p.0));
        let (ylo, yhi) = bounds(all.iter().map(|p| p.1));
        let sx = Scale::new(xlo, xhi, x0, x0 + PHASE);
        let sy = Scale::new(ylo, yhi, y0 + PHASE, y0);
        for r in regions {
            let (a, b) = (sx.at(r.area[0].lo()), sx.at(r.area[0].hi()));
            let (c, d) = (sy.at(r.area[1].hi()), sy.at(r.area[1].lo()));
            let _ = writeln!(
                out,
                "<rect x=\"{a:.2}\" y=\"{c:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" fill-opacity=\"0.25\" stroke=\"{}\"/>",
                b - a,
                d - c,
                r.fill,
                r.stroke
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"{}\">{}</text>",
                a + 3.0,
                c + 12.0,
                r.stroke,
                r.label
            );
        }
        axes(&mut out, x0, y0, PHASE, PHASE, "x1", "x2", &sx, &sy);
        polyline(
            &mut out,
            trace.points.iter().map(|p| (sx.at(p.x[0]), sy.at(p.x[1]))),
            "#000",
        );
        for e in &trace.endpoints {
            let _ = writeln!(
                out,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#d62728\"/>",
                sx.at(e[0]),
                sy.at(e[1])
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
