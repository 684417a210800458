//! Deterministic SVG rendering of planar instances and their partitions.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::OrientedHyperplane;
use crate::masses::Instance;
use crate::regions::{DoubleWedge, Region};

const CANVAS: f64 = 1000.0;
const PADDING: f64 = 0.1;
const STROKE: f64 = 2.0;
const SHADE_OPACITY: f64 = 0.2;
pub const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];
const BOUNDARY: &str = "#222222";

/// World-to-canvas map keeping the aspect ratio.
struct View {
    cx: f64,
    cy: f64,
    scale: f64,
}

impl View {
    fn fit(inst: &Instance) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for a in inst.all_atoms() {
            for i in 0..2 {
                lo[i] = lo[i].min(a.as_slice()[i]);
                hi[i] = hi[i].max(a.as_slice()[i]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
        Self { cx: 0.5 * (lo[0] + hi[0]), cy: 0.5 * (lo[1] + hi[1]), scale: CANVAS / (span * (1.0 + 2.0 * PADDING)) }
    }

    fn to_canvas(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.cx) * self.scale + 0.5 * CANVAS, 0.5 * CANVAS - (p[1] - self.cy) * self.scale]
    }

    /// Visible world rectangle `[xmin, xmax] × [ymin, ymax]`.
    fn bounds(&self) -> [f64; 4] {
        let h = 0.5 * CANVAS / self.scale;
        [self.cx - h, self.cx + h, self.cy - h, self.cy + h]
    }

    fn corners(&self) -> Vec<[f64; 2]> {
        let [x0, x1, y0, y1] = self.bounds();
        vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }
}

/// Part of `p + t·v`, `t ∈ [t0, t1]`, inside the visible rectangle.
fn clip(view: &View, p: [f64; 2], v: [f64; 2], mut t0: f64, mut t1: f64) -> Option<([f64; 2], [f64; 2])> {
    let [x0, x1, y0, y1] = view.bounds();
    for (q, r) in [(-v[0], p[0] - x0), (v[0], x1 - p[0]), (-v[1], p[1] - y0), (v[1], y1 - p[1])] {
        if q == 0.0 {
            if r < 0.0 {
                return None;
            }
        } else {
            let t = r / q;
            if q < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t0 < t1).then(|| ([p[0] + t0 * v[0], p[1] + t0 * v[1]], [p[0] + t1 * v[0], p[1] + t1 * v[1]]))
}

/// Sutherland–Hodgman clip of a convex polygon to `n·p ≥ o`.
fn clip_halfplane(poly: &[[f64; 2]], n: [f64; 2], o: f64) -> Vec<[f64; 2]> {
    let f = |p: &[f64; 2]| n[0] * p[0] + n[1] * p[1] - o;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (fa, fb) = (f(&a), f(&b));
        if fa >= 0.0 {
            out.push(a);
        }
        if (fa >= 0.0) != (fb >= 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

fn plane2(h: &OrientedHyperplane) -> ([f64; 2], f64) {
    let n = h.normal.as_slice();
    ([n[0], n[1]], h.offset)
}

struct Svg<'a> {
    out: String,
    view: &'a View,
}

impl Svg<'_> {
    fn segment(&mut self, a: [f64; 2], b: [f64; 2]) {
        let (a, b) = (self.view.to_canvas(a), self.view.to_canvas(b));
        let _ = writeln!(
            self.out,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{BOUNDARY}" stroke-width="{STROKE}"/>"#,
            a[0], a[1], b[0], b[1]
        );
    }

    fn line(&mut self, n: [f64; 2], o: f64) {
        let p = [n[0] * o, n[1] * o];
        if let Some((a, b)) = clip(self.view, p, [-n[1], n[0]], f64::NEG_INFINITY, f64::INFINITY) {
            self.segment(a, b);
        }
    }

    fn ray(&mut self, apex: [f64; 2], dir: [f64; 2]) {
        if let Some((a, b)) = clip(self.view, apex, dir, 0.0, f64::INFINITY) {
            self.segment(a, b);
        }
    }

    fn label(&mut self, at: [f64; 2], text: &str) {
        let c = self.view.to_canvas(at);
        let _ = writeln!(
            self.out,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="24" text-anchor="middle" fill="{BOUNDARY}">{text}</text>"#,
            c[0], c[1]
        );
    }

    fn polygon(&mut self, poly: &[[f64; 2]], fill: &str) {
        if poly.len() < 3 {
            return;
        }
        let pts: Vec<String> = poly
            .iter()
            .map(|p| {
                let c = self.view.to_canvas(*p);
                format!("{:.3},{:.3}", c[0], c[1])
            })
            .collect();
        let _ = writeln!(self.out, r#"<polygon points="{}" fill="{fill}" fill-opacity="{SHADE_OPACITY}" stroke="none"/>"#, pts.join(" "));
    }

    /// Labels sectors between consecutive ray angles, in order.
    fn sector_labels(&mut self, apex: [f64; 2], dirs: &dyn Fn(f64) -> [f64; 2], cuts: &[f64], period: f64) {
        let radius = 0.25 * CANVAS / self.view.scale;
        let k = cuts.len();
        for j in 0..k {
            let next = if j + 1 < k { cuts[j + 1] } else { cuts[0] + period };
            let d = dirs(0.5 * (cuts[j] + next));
            self.label([apex[0] + radius * d[0], apex[1] + radius * d[1]], &format!("W{}", j + 1));
        }
    }

    fn double_wedge(&mut self, dw: &DoubleWedge) {
        let (n1, o1) = plane2(&dw.h1);
        let (n2, o2) = plane2(&dw.h2);
        let box_ = self.view.corners();
        let pos = clip_halfplane(&clip_halfplane(&box_, n1, o1), n2, o2);
        let neg = clip_halfplane(&clip_halfplane(&box_, [-n1[0], -n1[1]], -o1), [-n2[0], -n2[1]], -o2);
        self.polygon(&pos, PALETTE[0]);
        self.polygon(&neg, PALETTE[0]);
        self.line(n1, o1);
        self.line(n2, o2);
    }

    fn region(&mut self, region: &Region) {
        match region {
            Region::Halfspace { plane } => {
                let (n, o) = plane2(plane);
                self.line(n, o);
            }
            Region::DoubleWedge(dw) => self.double_wedge(dw),
            Region::Fan(f) => {
                let apex = [f.apex.as_slice()[0], f.apex.as_slice()[1]];
                let dir = |a: f64| {
                    let v = f.frame.direction(a);
                    [v[0], v[1]]
                };
                for &c in &f.cuts {
                    self.ray(apex, dir(c));
                }
                self.sector_labels(apex, &dir, &f.cuts, std::f64::consts::TAU);
            }
            Region::DwFan(f) => {
                let apex = [f.apex.as_slice()[0], f.apex.as_slice()[1]];
                let dir = |a: f64| {
                    let v = f.frame.direction(a);
                    [v[0], v[1]]
                };
                for &l in &f.lines {
                    let d = dir(l);
                    if let Some((a, b)) = clip(self.view, apex, d, f64::NEG_INFINITY, f64::INFINITY) {
                        self.segment(a, b);
                    }
                }
                self.sector_labels(apex, &dir, &f.lines, std::f64::consts::PI);
            }
            Region::Cone(c) if c.k() == 2 && c.ambient_dim() == 2 => {
                // boundary rays at angle ±α from the axis in the cone's plane
                let b0 = c.basis[0].as_slice();
                let b1 = c.basis[1].as_slice();
                let ax = c.axis.as_slice();
                let apex = [c.apex[0] * b0[0] + c.apex[1] * b1[0], c.apex[0] * b0[1] + c.apex[1] * b1[1]];
                let axis_angle = ax[1].atan2(ax[0]);
                for s in [-1.0, 1.0] {
                    let (sn, cs) = (axis_angle + s * c.alpha).sin_cos();
                    let d = [cs * b0[0] + sn * b1[0], cs * b0[1] + sn * b1[1]];
                    self.ray(apex, d);
                }
            }
            Region::Slabs(s) => {
                let n = s.normal.as_slice();
                for &o in &s.offsets {
                    self.line([n[0], n[1]], o);
                }
            }
            Region::Cone(_) | Region::Lifted { .. } => {}
        }
    }
}

/// SVG document for a planar instance and the planar regions in `solution`.
/// Regions with no planar form (lifted or higher-dimensional cones) are
/// skipped.
pub fn render_svg(inst: &Instance, solution: &[Region]) -> Result<String> {
    if inst.dimension != 2 {
        return Err(Error::UnsupportedDimension { d: inst.dimension, reason: "plots need planar instances".into() });
    }
    let view = View::fit(inst);
    let mut svg = Svg { out: String::new(), view: &view };
    let _ = writeln!(svg.out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg.out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(svg.out, r#"<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>"#);
    for r in solution {
        if r.dim() == 2 {
            svg.region(r);
        }
    }
    let wmax = inst.masses.iter().flat_map(|m| m.weights.iter().copied()).fold(0.0, f64::max);
    for (i, mu) in inst.masses.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for (a, &w) in mu.atoms.iter().zip(&mu.weights) {
            let c = view.to_canvas([a.as_slice()[0], a.as_slice()[1]]);
            let r = 2.0 + 4.0 * (w / wmax).sqrt();
            let _ = writeln!(svg.out, r#"<circle cx="{:.3}" cy="{:.3}" r="{r:.3}" fill="{color}"/>"#, c[0], c[1]);
        }
    }
    svg.out.push_str("</svg>\n");
    Ok(svg.out)
}

/// Writes [`render_svg`] to `path`.
pub fn plot_svg(inst: &Instance, solution: &[Region], path: impl AsRef<Path>) -> Result<()> {
    let svg = render_svg(inst, solution)?;
    std::fs::write(path, svg)?;
    Ok(())
}
