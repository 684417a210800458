//! Partition-defining regions, their (smoothed) membership, and the
//! constructive builders for equipartitioning fans and bisecting cones.
//!
//! Angles in a [`Frame2`] are measured from `x` towards `y`. A fan's cut
//! angles are stored unwrapped and increasing, starting with the first cut of
//! `W_1`, so `W_j = [cuts[j-1], cuts[j])` and `W_k` closes the circle.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::cdf::{Cdf, Ramp};
use crate::error::{Error, Result};
use crate::geometry::{self, Frame2, OrientedFlag, OrientedHyperplane, UnitVector, Vector};
use crate::masses::{BoundaryRule, MassDistribution};

/// Distance below which an atom counts as lying on a boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Arc length used by the concentration check of the fan builders.
pub const DEGENERATE_ARC: f64 = 1e-9;
/// Largest supported subspace dimension.
pub const MAX_DIM: usize = 16;

/// `k` half-hyperplanes sharing the apex flat `apex + span(x, y)^⊥`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFan {
    pub frame: Frame2,
    pub apex: Vector,
    pub cuts: Vec<f64>,
}

impl KFan {
    pub fn new(frame: Frame2, apex: Vector, cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(Error::InvalidInput("a fan needs at least two cuts".into()));
        }
        if apex.dim() != frame.dim() {
            return Err(Error::DimensionMismatch { expected: frame.dim(), found: apex.dim() });
        }
        if cuts.windows(2).any(|w| !(w[1] > w[0])) || !(cuts[cuts.len() - 1] - cuts[0] < TAU) {
            return Err(Error::InvalidInput("fan cuts must increase within one turn".into()));
        }
        Ok(Self { frame, apex, cuts })
    }

    pub fn k(&self) -> usize {
        self.cuts.len()
    }

    /// Sector arcs `[a, b)` in fan order.
    pub fn arcs(&self) -> Vec<(f64, f64)> {
        cyclic_arcs(&self.cuts, TAU)
    }
}

/// `π_H^{-1}` of a spherical cone in the subspace `H` spanned by `basis`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KCone {
    pub basis: Vec<UnitVector>,
    /// Apex in `H` coordinates.
    pub apex: Vec<f64>,
    /// Axis in `H` coordinates.
    pub axis: UnitVector,
    pub alpha: f64,
}

impl KCone {
    pub fn new(basis: Vec<UnitVector>, apex: Vec<f64>, axis: UnitVector, alpha: f64) -> Result<Self> {
        let k = basis.len();
        if k == 0 || k > MAX_DIM || apex.len() != k || axis.dim() != k {
            return Err(Error::InvalidInput("cone apex and axis must live in the k-dimensional subspace".into()));
        }
        if !(0.0..=PI).contains(&alpha) {
            return Err(Error::InvalidInput(format!("cone half-angle {alpha} outside [0, π]")));
        }
        let raw: Vec<Vec<f64>> = basis.iter().map(|b| b.as_slice().to_vec()).collect();
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                if (geometry::dot(&raw[i], &raw[j]) - target).abs() > 1e-12 {
                    return Err(Error::InvalidInput("cone basis is not orthonormal".into()));
                }
            }
        }
        Ok(Self { basis, apex, axis, alpha })
    }

    /// Cone with apex at the origin of `R^n` whose subspace is the flag's and
    /// whose axis is the flag's line.
    pub fn from_flag(flag: &OrientedFlag, alpha: f64) -> Self {
        let k = flag.k();
        Self { basis: flag.basis.clone(), apex: vec![0.0; k], axis: UnitVector::axis(k, 0), alpha }
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis[0].dim()
    }

    /// `(‖w‖, β)` for `w = π_H(p) − apex` and `β` its angle to the axis.
    fn polar(&self, p: &[f64]) -> (f64, f64) {
        let k = self.k();
        let mut buf = [0.0; MAX_DIM];
        let w = &mut buf[..k];
        for (i, b) in self.basis.iter().enumerate() {
            w[i] = geometry::dot(b.as_slice(), p) - self.apex[i];
        }
        let r = geometry::norm(w);
        let c = geometry::dot(w, self.axis.as_slice());
        let s = (r * r - c * c).max(0.0).sqrt();
        (r, s.atan2(c))
    }
}

/// `(h1⁺ ∩ h2⁺) ∪ (h1⁻ ∩ h2⁻)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleWedge {
    pub h1: OrientedHyperplane,
    pub h2: OrientedHyperplane,
}

/// `k` full lines through the apex flat; double wedge `j` is the union of the
/// opposite sectors `[lines[j-1], lines[j])` and its antipode. For `k = 1` the
/// pieces are the two sides of the single line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwFan {
    pub frame: Frame2,
    pub apex: Vector,
    pub lines: Vec<f64>,
}

impl DwFan {
    pub fn k(&self) -> usize {
        self.lines.len()
    }

    /// Period and arcs describing the pieces on the (possibly halved) circle.
    fn arcs(&self) -> (f64, Vec<(f64, f64)>) {
        if self.lines.len() == 1 {
            let l = self.lines[0];
            (TAU, vec![(l, l + PI), (l + PI, l + TAU)])
        } else {
            (PI, cyclic_arcs(&self.lines, PI))
        }
    }
}

/// `k` slabs cut by parallel hyperplanes `normal·p = offsets[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabPartition {
    pub normal: UnitVector,
    pub offsets: Vec<f64>,
}

impl SlabPartition {
    pub fn new(normal: UnitVector, offsets: Vec<f64>) -> Result<Self> {
        if offsets.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("slab offsets must increase strictly".into()));
        }
        Ok(Self { normal, offsets })
    }

    pub fn k(&self) -> usize {
        self.offsets.len() + 1
    }
}

/// Any partition-defining region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Region {
    Halfspace { plane: OrientedHyperplane },
    Fan(KFan),
    Cone(KCone),
    DoubleWedge(DoubleWedge),
    DwFan(DwFan),
    Slabs(SlabPartition),
    /// A region of `R^{d+1}` applied to atoms lifted to the upper hemisphere.
    Lifted { inner: Box<Region> },
}

impl Region {
    /// Number of pieces reported by [`piece_measures`].
    pub fn pieces(&self) -> usize {
        match self {
            Region::Halfspace { .. } | Region::Cone(_) | Region::DoubleWedge(_) => 2,
            Region::Fan(f) => f.k(),
            Region::DwFan(f) => f.k().max(2),
            Region::Slabs(s) => s.k(),
            Region::Lifted { inner } => inner.pieces(),
        }
    }

    /// Dimension of the points the region accepts.
    pub fn dim(&self) -> usize {
        match self {
            Region::Halfspace { plane } => plane.dim(),
            Region::Fan(f) => f.frame.dim(),
            Region::Cone(c) => c.ambient_dim(),
            Region::DoubleWedge(d) => d.h1.dim(),
            Region::DwFan(f) => f.frame.dim(),
            Region::Slabs(s) => s.normal.dim(),
            Region::Lifted { inner } => inner.dim() - 1,
        }
    }
}

fn cyclic_arcs(cuts: &[f64], period: f64) -> Vec<(f64, f64)> {
    let k = cuts.len();
    (0..k)
        .map(|j| (cuts[j], if j + 1 < k { cuts[j + 1] } else { cuts[0] + period }))
        .collect()
}

/// Sector of a fan containing `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectorIndex {
    /// 1-based sector index.
    Sector(usize),
    Boundary,
}

/// Three-valued membership of a point in a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
    Boundary,
}

impl Membership {
    fn from_sign(s: f64, dist: f64) -> Self {
        if dist <= BOUNDARY_TOL {
            Membership::Boundary
        } else if s > 0.0 {
            Membership::Inside
        } else {
            Membership::Outside
        }
    }
}

fn planar_polar(frame: &Frame2, apex: &[f64], p: &[f64]) -> (f64, f64) {
    let v = geometry::sub(p, apex);
    let (x, y) = frame.coords_of(&v);
    (x.hypot(y), y.atan2(x))
}

/// `x − a` reduced to `[0, period)`.
#[inline]
fn wrap(x: f64, a: f64, period: f64) -> f64 {
    let t = (x - a).rem_euclid(period);
    if t >= period {
        0.0
    } else {
        t
    }
}

pub fn fan_sector_index(f: &KFan, p: &[f64]) -> SectorIndex {
    let (r, theta) = planar_polar(&f.frame, f.apex.as_slice(), p);
    if r <= BOUNDARY_TOL {
        return SectorIndex::Boundary;
    }
    let x = wrap(theta, f.cuts[0], TAU);
    for (j, &c) in f.cuts.iter().enumerate() {
        let d = (x - (c - f.cuts[0])).abs();
        let d = d.min(TAU - d);
        if r * d.min(PI / 2.0).sin() <= BOUNDARY_TOL {
            return SectorIndex::Boundary;
        }
        let _ = j;
    }
    let j = f.cuts.partition_point(|&c| c - f.cuts[0] <= x);
    SectorIndex::Sector(j.max(1))
}

pub fn cone_contains(c: &KCone, p: &[f64]) -> Membership {
    let (r, beta) = c.polar(p);
    if r <= BOUNDARY_TOL {
        return Membership::Boundary;
    }
    let gap = c.alpha - beta;
    let dist = r * gap.abs().min(PI / 2.0).sin();
    Membership::from_sign(gap, dist)
}

pub fn halfspace_contains(h: &OrientedHyperplane, p: &[f64]) -> Membership {
    let s = h.signed_distance(p);
    Membership::from_sign(s, s.abs())
}

pub fn double_wedge_contains(d: &DoubleWedge, p: &[f64]) -> Membership {
    let s1 = d.h1.signed_distance(p);
    let s2 = d.h2.signed_distance(p);
    if s1.abs() <= BOUNDARY_TOL || s2.abs() <= BOUNDARY_TOL {
        return Membership::Boundary;
    }
    if s1 * s2 > 0.0 {
        Membership::Inside
    } else {
        Membership::Outside
    }
}

/// `KCone → (−axis, π − α)`, `DoubleWedge → h2 reoriented`, halfspace →
/// opposite halfspace.
pub fn complement(r: &Region) -> Result<Region> {
    Ok(match r {
        Region::Cone(c) => Region::Cone(complement_cone(c)),
        Region::DoubleWedge(d) => Region::DoubleWedge(complement_double_wedge(d)),
        Region::Halfspace { plane } => Region::Halfspace { plane: plane.reoriented() },
        Region::Lifted { inner } => Region::Lifted { inner: Box::new(complement(inner)?) },
        _ => return Err(Error::InvalidInput("only cones, double wedges and halfspaces have complements".into())),
    })
}

pub fn complement_cone(c: &KCone) -> KCone {
    KCone { basis: c.basis.clone(), apex: c.apex.clone(), axis: c.axis.neg(), alpha: PI - c.alpha }
}

pub fn complement_double_wedge(d: &DoubleWedge) -> DoubleWedge {
    DoubleWedge { h1: d.h1.clone(), h2: d.h2.reoriented() }
}

// ---------------------------------------------------------------------------
// soft membership

/// Soft sign in `[-1, 1]` of an angular margin `gap` with smoothing `eps`;
/// with `eps = 0`, a point within `BOUNDARY_TOL` of the boundary scores 0.
#[inline]
fn soft_sign(gap: f64, eps: f64, dist: f64) -> f64 {
    if eps > 0.0 {
        (2.0 * gap / eps).clamp(-1.0, 1.0)
    } else if dist <= BOUNDARY_TOL {
        0.0
    } else if gap > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Signed angular margin of `p` relative to a hyperplane through the origin,
/// as seen from the origin, and the Euclidean distance.
#[inline]
fn plane_margin(normal: &[f64], p: &[f64]) -> (f64, f64) {
    let s = geometry::dot(normal, p);
    let r = geometry::norm(p);
    if r == 0.0 {
        return (0.0, 0.0);
    }
    ((s / r).clamp(-1.0, 1.0).asin(), s.abs())
}

/// Soft sign of `p` with respect to an oriented hyperplane. Hyperplanes
/// through the origin are smoothed angularly; others use the half rule.
#[inline]
fn plane_sign(h: &OrientedHyperplane, p: &[f64], eps: f64) -> f64 {
    if h.offset == 0.0 {
        let (gap, dist) = plane_margin(h.normal.as_slice(), p);
        soft_sign(gap, eps, dist)
    } else {
        let s = h.signed_distance(p);
        soft_sign(s, 0.0, s.abs())
    }
}

/// Soft sign of cone membership (`+1` inside, `−1` outside).
#[inline]
pub(crate) fn cone_sign(c: &KCone, p: &[f64], eps: f64) -> f64 {
    let (r, beta) = c.polar(p);
    if r <= BOUNDARY_TOL {
        return 0.0;
    }
    let gap = c.alpha - beta;
    soft_sign(gap, eps, r * gap.abs().min(PI / 2.0).sin())
}

#[inline]
pub(crate) fn double_wedge_sign(d: &DoubleWedge, p: &[f64], eps: f64) -> f64 {
    plane_sign(&d.h1, p, eps) * plane_sign(&d.h2, p, eps)
}

/// Adds `w` times the share of the arc `[θ − h, θ + h]` falling into each of
/// `arcs` on a circle of the given period. With `h = 0` the point is tested
/// directly and a point within `ang_tol` of a cut is split evenly.
fn add_arc_shares(theta: f64, h: f64, ang_tol: f64, arcs: &[(f64, f64)], period: f64, w: f64, out: &mut [f64]) {
    let a0 = arcs[0].0;
    if h > 0.0 {
        let x = wrap(theta, a0, period);
        let inv = w / (2.0 * h);
        for (j, &(a, b)) in arcs.iter().enumerate() {
            let (lo, hi) = (a - a0, b - a0);
            let mut s = 0.0;
            for n in [-1.0, 0.0, 1.0] {
                let l = (x - h).max(lo + n * period);
                let u = (x + h).min(hi + n * period);
                if u > l {
                    s += u - l;
                }
            }
            out[j] += s * inv;
        }
        return;
    }
    let x = wrap(theta, a0, period);
    let k = arcs.len();
    for j in 0..k {
        let c = arcs[j].0 - a0;
        let d = (x - c).abs();
        if d.min(period - d) <= ang_tol {
            out[j] += 0.5 * w;
            out[(j + k - 1) % k] += 0.5 * w;
            return;
        }
    }
    let j = arcs.partition_point(|&(a, _)| a - a0 <= x).max(1) - 1;
    out[j] += w;
}

/// Adds the uniform spread of an apex atom.
fn add_uniform(arcs: &[(f64, f64)], period: f64, w: f64, out: &mut [f64]) {
    for (j, &(a, b)) in arcs.iter().enumerate() {
        out[j] += w * (b - a) / period;
    }
}

fn strict_check(mu: &MassDistribution, region: &Region) -> Result<()> {
    for (i, a) in mu.atoms.iter().enumerate() {
        if on_boundary(region, a.as_slice()) {
            return Err(Error::AtomOnBoundary { mass: mu.name.clone(), atom: i });
        }
    }
    Ok(())
}

fn on_boundary(region: &Region, p: &[f64]) -> bool {
    match region {
        Region::Halfspace { plane } => halfspace_contains(plane, p) == Membership::Boundary,
        Region::Cone(c) => cone_contains(c, p) == Membership::Boundary,
        Region::DoubleWedge(d) => double_wedge_contains(d, p) == Membership::Boundary,
        Region::Fan(f) => fan_sector_index(f, p) == SectorIndex::Boundary,
        Region::DwFan(f) => {
            let (_, arcs) = f.arcs();
            let (r, th) = planar_polar(&f.frame, f.apex.as_slice(), p);
            r <= BOUNDARY_TOL
                || arcs.iter().any(|&(a, _)| {
                    let d = wrap(th, a, PI);
                    r * d.min(PI - d).sin().abs() <= BOUNDARY_TOL
                })
        }
        Region::Slabs(s) => {
            let t = geometry::dot(s.normal.as_slice(), p);
            s.offsets.iter().any(|o| (t - o).abs() <= BOUNDARY_TOL)
        }
        Region::Lifted { inner } => on_boundary(inner, geometry::gnomonic_lift(p).as_slice()),
    }
}

/// Measures of every piece of `region` with smoothing radius `eps` (angular
/// regions only; `eps = 0` is the half rule). Two-piece regions report
/// `[inside, complement]`.
pub fn piece_measures_eps(mu: &MassDistribution, region: &Region, eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; region.pieces()];
    accumulate(&mu.atoms, &mu.weights, region, eps, &mut out);
    out
}

/// Accumulates piece measures of weighted points into `out`.
pub(crate) fn accumulate<P: AsRef<[f64]>>(
    points: &[P],
    weights: &[f64],
    region: &Region,
    eps: f64,
    out: &mut [f64],
) {
    let h = 0.5 * eps;
    let points = points.iter().map(|p| p.as_ref());
    match region {
        Region::Lifted { inner } => {
            let lifted: Vec<Vec<f64>> = points.map(|p| geometry::gnomonic_lift(p).into()).collect();
            accumulate(&lifted, weights, inner, eps, out);
        }
        Region::Halfspace { plane } => {
            for (p, &w) in points.zip(weights) {
                let s = plane_sign(plane, p, eps);
                out[0] += 0.5 * w * (1.0 + s);
                out[1] += 0.5 * w * (1.0 - s);
            }
        }
        Region::Cone(c) => {
            for (p, &w) in points.zip(weights) {
                let s = cone_sign(c, p, eps);
                out[0] += 0.5 * w * (1.0 + s);
                out[1] += 0.5 * w * (1.0 - s);
            }
        }
        Region::DoubleWedge(d) => {
            for (p, &w) in points.zip(weights) {
                let s = double_wedge_sign(d, p, eps);
                out[0] += 0.5 * w * (1.0 + s);
                out[1] += 0.5 * w * (1.0 - s);
            }
        }
        Region::Fan(f) => {
            let arcs = f.arcs();
            for (p, &w) in points.zip(weights) {
                let (r, th) = planar_polar(&f.frame, f.apex.as_slice(), p);
                if r <= BOUNDARY_TOL {
                    add_uniform(&arcs, TAU, w, out);
                } else {
                    add_arc_shares(th, h, BOUNDARY_TOL / r, &arcs, TAU, w, out);
                }
            }
        }
        Region::DwFan(f) => {
            let (period, arcs) = f.arcs();
            for (p, &w) in points.zip(weights) {
                let (r, th) = planar_polar(&f.frame, f.apex.as_slice(), p);
                if r <= BOUNDARY_TOL {
                    add_uniform(&arcs, period, w, out);
                } else {
                    add_arc_shares(th, h, BOUNDARY_TOL / r, &arcs, period, w, out);
                }
            }
        }
        Region::Slabs(s) => {
            for (p, &w) in points.zip(weights) {
                let t = geometry::dot(s.normal.as_slice(), p);
                let j = s.offsets.partition_point(|&o| o < t);
                let on_lo = j > 0 && (t - s.offsets[j - 1]).abs() <= BOUNDARY_TOL;
                let on_hi = j < s.offsets.len() && (s.offsets[j] - t).abs() <= BOUNDARY_TOL;
                if on_hi {
                    out[j] += 0.5 * w;
                    out[j + 1] += 0.5 * w;
                } else if on_lo {
                    out[j - 1] += 0.5 * w;
                    out[j] += 0.5 * w;
                } else {
                    out[j] += w;
                }
            }
        }
    }
}

/// Measures of every piece of `region` under the mass's own smoothing.
pub fn piece_measures(mu: &MassDistribution, region: &Region, rule: BoundaryRule) -> Result<Vec<f64>> {
    check_dim(mu, region)?;
    match rule {
        BoundaryRule::Half => Ok(piece_measures_eps(mu, region, mu.smoothing)),
        BoundaryRule::Strict => {
            strict_check(mu, region)?;
            Ok(piece_measures_eps(mu, region, 0.0))
        }
    }
}

/// `μ(R)`: the measure of the first piece (the region itself for cones,
/// double wedges and halfspaces; `W_1` for fans).
pub fn region_measure(mu: &MassDistribution, region: &Region, rule: BoundaryRule) -> Result<f64> {
    Ok(piece_measures(mu, region, rule)?[0])
}

fn check_dim(mu: &MassDistribution, region: &Region) -> Result<()> {
    if mu.dim() != region.dim() {
        return Err(Error::DimensionMismatch { expected: region.dim(), found: mu.dim() });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// builders

/// Circular quantile cuts of the projected angles of `parts` in a frame:
/// returns `k` increasing cuts in `[c0, c0 + period)`, where `c0` is the
/// plateau midpoint of the cumulative around `start` and cut `j` sits at level
/// `total·(t_1 + … + t_j)`.
pub(crate) fn circular_quantiles(
    parts: &[&MassDistribution],
    frame: &Frame2,
    apex: &[f64],
    targets: &[f64],
    start: f64,
    period: f64,
) -> Result<Vec<f64>> {
    let mut ramps = Vec::new();
    let mut raw: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0;
    for mu in parts {
        let h = 0.5 * mu.smoothing.min(period);
        for (a, &w) in mu.atoms.iter().zip(&mu.weights) {
            total += w;
            let (r, th) = planar_polar(frame, apex, a.as_slice());
            if r <= BOUNDARY_TOL {
                ramps.push(Ramp { lo: 0.0, hi: period, w });
                continue;
            }
            let x = wrap(th, start, period);
            raw.push((x, w));
            push_wrapped(&mut ramps, x, h, w, period);
        }
    }
    if !(total > 0.0) {
        return Err(Error::InvalidInput("reference mass is empty".into()));
    }
    let min_target = targets.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(frac) = concentration(&mut raw, total, period) {
        if frac >= 1.0 - min_target {
            return Err(Error::DegenerateProjection { fraction: frac });
        }
    }
    let cdf = Cdf::new(&ramps, 0.0, period, 0.0);
    let tol = 1e-12 * total;
    let a0 = cdf.upper(tol);
    let b0 = cdf.lower(cdf.total - tol);
    let c0 = start + 0.5 * (b0 - period + a0);
    let mut cuts = Vec::with_capacity(targets.len());
    cuts.push(c0);
    let mut acc = 0.0;
    for t in &targets[..targets.len() - 1] {
        acc += t;
        let x = start + cdf.quantile(acc * cdf.total, tol);
        let prev = *cuts.last().unwrap();
        cuts.push(x.max(prev));
    }
    Ok(cuts)
}

/// Largest weight fraction inside an arc of [`DEGENERATE_ARC`], when the
/// maximum exceeds one half (below that the check cannot trigger).
fn concentration(raw: &mut [(f64, f64)], total: f64, period: f64) -> Option<f64> {
    if raw.is_empty() {
        return None;
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = raw.len();
    let mut best = 0.0;
    let mut j = 0;
    let mut s = 0.0;
    // window over the doubled sequence
    for i in 0..n {
        if j < i {
            j = i;
            s = 0.0;
        }
        while j < i + n {
            let (xj, wj) = raw[j % n];
            let xj = if j >= n { xj + period } else { xj };
            if xj - raw[i].0 <= DEGENERATE_ARC {
                s += wj;
                j += 1;
            } else {
                break;
            }
        }
        if s > best {
            best = s;
        }
        s -= raw[i].1;
    }
    let f = best / total;
    (f > 0.5).then_some(f)
}

fn push_wrapped(ramps: &mut Vec<Ramp>, x: f64, h: f64, w: f64, period: f64) {
    if h <= 0.0 {
        ramps.push(Ramp { lo: x, hi: x, w });
        return;
    }
    let (lo, hi) = (x - h, x + h);
    if lo < 0.0 {
        let f = -lo / (2.0 * h);
        ramps.push(Ramp { lo: lo + period, hi: period, w: w * f });
        ramps.push(Ramp { lo: 0.0, hi, w: w * (1.0 - f) });
    } else if hi > period {
        let f = (hi - period) / (2.0 * h);
        ramps.push(Ramp { lo, hi: period, w: w * (1.0 - f) });
        ramps.push(Ramp { lo: 0.0, hi: hi - period, w: w * f });
    } else {
        ramps.push(Ramp { lo, hi, w });
    }
}

/// Fan whose sectors hold `targets · μ_ref(R^d)` of the reference mass, with
/// the first cut at the plateau midpoint around `start`.
pub fn build_equipartition_fan(
    frame: &Frame2,
    apex: &Vector,
    mu_ref: &MassDistribution,
    targets: &[f64],
    start: f64,
) -> Result<KFan> {
    build_fan_from(&[mu_ref], frame, apex, targets, start)
}

pub(crate) fn build_fan_from(
    parts: &[&MassDistribution],
    frame: &Frame2,
    apex: &Vector,
    targets: &[f64],
    start: f64,
) -> Result<KFan> {
    validate_targets(targets)?;
    let cuts = circular_quantiles(parts, frame, apex.as_slice(), targets, start, TAU)?;
    Ok(KFan { frame: frame.clone(), apex: apex.clone(), cuts })
}

pub(crate) fn validate_targets(targets: &[f64]) -> Result<()> {
    if targets.len() < 2 || targets.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidInput("targets must be at least two positive fractions".into()));
    }
    let s: f64 = targets.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("targets sum to {s}, not 1")));
    }
    Ok(())
}

/// `k` lines through the apex whose double wedges each hold `1/k` of the
/// reference mass; for `k = 1` a single line halving it.
pub fn build_dw_fan(frame: &Frame2, apex: &Vector, mu_ref: &MassDistribution, k: usize, start: f64) -> Result<DwFan> {
    build_dw_fan_from(&[mu_ref], frame, apex, k, start)
}

pub(crate) fn build_dw_fan_from(
    parts: &[&MassDistribution],
    frame: &Frame2,
    apex: &Vector,
    k: usize,
    start: f64,
) -> Result<DwFan> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if k == 1 {
        let l = halving_line(parts, frame, apex.as_slice(), start)?;
        return Ok(DwFan { frame: frame.clone(), apex: apex.clone(), lines: vec![l] });
    }
    let targets = vec![1.0 / k as f64; k];
    let lines = circular_quantiles(parts, frame, apex.as_slice(), &targets, start, PI)?;
    Ok(DwFan { frame: frame.clone(), apex: apex.clone(), lines })
}

/// Angle `l` in `[start, start + π]` whose half-plane `[l, l + π)` holds half
/// of the projected mass.
fn halving_line(parts: &[&MassDistribution], frame: &Frame2, apex: &[f64], start: f64) -> Result<f64> {
    let mut ramps = Vec::new();
    let mut total = 0.0;
    for mu in parts {
        let h = 0.5 * mu.smoothing;
        for (a, &w) in mu.atoms.iter().zip(&mu.weights) {
            total += w;
            let (r, th) = planar_polar(frame, apex, a.as_slice());
            if r <= BOUNDARY_TOL {
                ramps.push(Ramp { lo: 0.0, hi: TAU, w });
            } else {
                push_wrapped(&mut ramps, wrap(th, start, TAU), h, w, TAU);
            }
        }
    }
    let cdf = Cdf::new(&ramps, 0.0, TAU, 0.0);
    let g = |l: f64| cdf.eval(l + PI) - cdf.eval(l) - 0.5 * total;
    let (mut lo, mut hi) = (0.0, PI);
    let g0 = g(lo);
    if g0.abs() <= 1e-12 * total {
        return Ok(start);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (g0 > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(start + 0.5 * (lo + hi))
}

/// Apex coordinates in the basis of [`OrientedFlag::flipped`].
pub(crate) fn flipped_apex(apex: &[f64]) -> Vec<f64> {
    let mut a = apex.to_vec();
    a[0] = -a[0];
    a
}

/// `true` if the first nonzero coordinate is positive.
pub(crate) fn is_canonical(v: &[f64]) -> bool {
    v.iter().find(|x| **x != 0.0).map_or(true, |x| *x > 0.0)
}

/// The cone with the flag's subspace and axis whose half-angle bisects the
/// total (smoothed) mass of `parts`; `apex` is in subspace coordinates.
///
/// The half-angle is computed for the canonically oriented line and the
/// flipped line gets the complement, so the construction is antipodal.
pub fn build_bisecting_cone(flag: &OrientedFlag, apex: &[f64], mu_total: &MassDistribution) -> Result<KCone> {
    build_cone_from(&[mu_total], flag, apex)
}

pub(crate) fn build_cone_from(parts: &[&MassDistribution], flag: &OrientedFlag, apex: &[f64]) -> Result<KCone> {
    if apex.len() != flag.k() {
        return Err(Error::DimensionMismatch { expected: flag.k(), found: apex.len() });
    }
    if !is_canonical(flag.line().as_slice()) {
        let c = build_cone_from(parts, &flag.flipped(), &flipped_apex(apex))?;
        return Ok(complement_cone(&c));
    }
    let mut cone = KCone {
        basis: flag.basis.clone(),
        apex: apex.to_vec(),
        axis: UnitVector::axis(flag.k(), 0),
        alpha: 0.0,
    };
    let mut ramps = Vec::new();
    let mut base = 0.0;
    let mut total = 0.0;
    for mu in parts {
        let h = 0.5 * mu.smoothing;
        for (a, &w) in mu.atoms.iter().zip(&mu.weights) {
            total += w;
            let (r, beta) = cone.polar(a.as_slice());
            if r <= BOUNDARY_TOL {
                base += 0.5 * w;
            } else {
                ramps.push(Ramp { lo: beta - h, hi: beta + h, w });
            }
        }
    }
    let lo_dom = ramps.iter().map(|r| r.lo).fold(0.0, f64::min);
    let hi_dom = ramps.iter().map(|r| r.hi).fold(PI, f64::max);
    let cdf = Cdf::new(&ramps, lo_dom, hi_dom, base);
    let half = 0.5 * total;
    let alpha = cdf.quantile(half, 1e-12 * total).clamp(0.0, PI);
    cone.alpha = alpha;
    let achieved = cdf.eval(alpha);
    if (achieved - half).abs() > 1e-10 * total {
        // only atomic jumps (no smoothing) can leave the level unattained
        return Err(Error::NoBisection);
    }
    Ok(cone)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masses::MassDistribution;

    fn mass(points: &[[f64; 2]], eps: f64) -> MassDistribution {
        MassDistribution::new(
            "m",
            points.iter().map(|p| Vector::from(p.to_vec())).collect(),
            vec![1.0; points.len()],
            eps,
        )
        .unwrap()
    }

    fn polar(deg: f64) -> [f64; 2] {
        let a = deg.to_radians();
        [a.cos(), a.sin()]
    }

    #[test]
    fn halfplane_measures() {
        let m = MassDistribution::new(
            "m",
            vec![Vector::from(vec![1.0, 0.0]), Vector::from(vec![-1.0, 0.0])],
            vec![2.0, 1.0],
            0.0,
        )
        .unwrap();
        let h = Region::Halfspace { plane: OrientedHyperplane::through_origin(UnitVector::axis(2, 0)) };
        assert_eq!(region_measure(&m, &h, BoundaryRule::Half).unwrap(), 2.0);
        let on = mass(&[[0.0, 5.0]], 0.0);
        assert_eq!(region_measure(&on, &h, BoundaryRule::Half).unwrap(), 0.5);
        assert!(matches!(region_measure(&on, &h, BoundaryRule::Strict), Err(Error::AtomOnBoundary { .. })));
    }

    #[test]
    fn quantile_fan_three_atoms() {
        let m = mass(&[polar(30.0), polar(150.0), polar(270.0)], 1e-3);
        let f = build_equipartition_fan(&Frame2::standard(2), &Vector::zeros(2), &m, &[1.0 / 3.0; 3], 0.0).unwrap();
        let deg: Vec<f64> = f.cuts.iter().map(|c| c.to_degrees()).collect();
        assert!((deg[0] + 30.0).abs() < 1e-9, "{deg:?}");
        assert!((deg[1] - 90.0).abs() < 1e-9);
        assert!((deg[2] - 210.0).abs() < 1e-9);
        let m0 = mass(&[polar(30.0), polar(150.0), polar(270.0)], 0.0);
        let f0 = build_equipartition_fan(&Frame2::standard(2), &Vector::zeros(2), &m0, &[1.0 / 3.0; 3], 0.0).unwrap();
        assert_eq!(f0.cuts.len(), 3);
        assert!((f0.cuts[1].to_degrees() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn sector_index_convention() {
        let f = KFan::new(Frame2::standard(2), Vector::zeros(2), vec![0.0, PI]).unwrap();
        assert_eq!(fan_sector_index(&f, &[0.0, 1.0]), SectorIndex::Sector(1));
        assert_eq!(fan_sector_index(&f, &[0.0, -1.0]), SectorIndex::Sector(2));
        assert_eq!(fan_sector_index(&f, &[0.0, 0.0]), SectorIndex::Boundary);
        assert_eq!(fan_sector_index(&f, &[1.0, 0.0]), SectorIndex::Boundary);
    }

    #[test]
    fn cone_quarter_turn() {
        let c = KCone::new(vec![UnitVector::axis(2, 0), UnitVector::axis(2, 1)], vec![0.0, 0.0], UnitVector::axis(2, 0), PI / 2.0)
            .unwrap();
        assert_eq!(cone_contains(&c, &[1.0, 1.0]), Membership::Inside);
        assert_eq!(cone_contains(&c, &[-1.0, 1.0]), Membership::Outside);
        let m = mass(&[polar(0.0), polar(90.0), polar(180.0), polar(270.0)], 0.0);
        assert!((region_measure(&m, &Region::Cone(c), BoundaryRule::Half).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisecting_cone_of_symmetric_mass() {
        let m = mass(&[polar(0.0), polar(90.0), polar(180.0), polar(270.0)], 1e-3);
        let flag = OrientedFlag::orthonormalized(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = build_bisecting_cone(&flag, &[0.0, 0.0], &m).unwrap();
        assert!((c.alpha - PI / 2.0).abs() < 1e-9);
        let flipped = build_bisecting_cone(&flag.flipped(), &[0.0, 0.0], &m).unwrap();
        assert_eq!(flipped.axis.as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn dw_fan_single_line_bisects() {
        let m = mass(&[[1.0, 0.2], [2.0, 1.0], [-1.0, 0.5], [0.3, -2.0], [-0.5, -0.7], [1.5, -0.1]], 1e-3);
        let f = build_dw_fan(&Frame2::standard(2), &Vector::zeros(2), &m, 1, 0.3).unwrap();
        let p = piece_measures_eps(&m, &Region::DwFan(f), m.smoothing);
        assert!((p[0] - 3.0).abs() < 1e-9 && (p[1] - 3.0).abs() < 1e-9, "{p:?}");
    }
}
