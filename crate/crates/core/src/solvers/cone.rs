//! Cone bisections: apex anywhere (through the lifting) and apex on a line.

use std::f64::consts::PI;
use std::time::Instant;

use super::manifold::Manifold;
use super::search::{self, Problem};
use super::{
    feasibility_certificate, instance_smoothing, lifted, stage_instances, two_piece_residual, unit_chunks,
    Certificate, SolveReport, SolverConfig, Status, DESK_SCALE_DIM,
};
use super::certificates::degree_certificate;
use crate::error::{Error, Result};
use crate::geometry::{self, OrientedFlag, OrientedHyperplane, UnitVector};
use crate::masses::Instance;
use crate::regions::{KCone, Region};
use crate::testmaps::{cone_residual_with_cone, ConfigPoint, Variant};

struct ConeProblem {
    manifold: Manifold,
    stages: Vec<f64>,
    insts: Vec<Instance>,
    n: usize,
    k: usize,
}

impl ConeProblem {
    fn flag(&self, x: &[f64]) -> OrientedFlag {
        OrientedFlag { basis: unit_chunks(x, self.n) }
    }
}

impl Problem for ConeProblem {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn stages(&self) -> &[f64] {
        &self.stages
    }

    fn residual(&self, x: &[f64], stage: usize) -> Option<Vec<f64>> {
        let inst = &self.insts[stage];
        let count = inst.masses.len() - 1;
        cone_residual_with_cone(inst, &self.flag(x), &vec![0.0; self.k], count).ok().map(|r| r.0.components)
    }

    fn verify(&self, x: &[f64]) -> Option<f64> {
        let inst = self.insts.last().unwrap();
        cone_residual_with_cone(inst, &self.flag(x), &vec![0.0; self.k], inst.masses.len())
            .ok()
            .map(|r| r.0.norm_inf())
    }
}

/// Searches for a `k`-cone simultaneously bisecting every mass.
///
/// The instance is lifted to the upper hemisphere and the search runs over
/// oriented flags through the origin. Instances with more than `d + 1`
/// masses are searched anyway (no guarantee; typically `NotFound`).
pub fn solve_cone(inst: &Instance, k: usize, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let d = inst.dimension;
    let m = inst.num_masses();
    let (feasible, cert) = feasibility_certificate(d, k, m, Variant::Cone);
    let n = d + 1;
    let manifold = Manifold::Flag { n, k: k.clamp(1, n) };
    let dim = manifold.dim();
    if k < 2 || k > d {
        let msg = format!("k = {k} outside 2 ≤ k ≤ d = {d}");
        return Ok(SolveReport::refused("cone", Status::Infeasible, msg, vec![cert], dim));
    }
    if dim > DESK_SCALE_DIM {
        let msg = format!("flag manifold dimension {dim} exceeds {DESK_SCALE_DIM}");
        return Ok(SolveReport::refused("cone", Status::ExceedsDeskScale, msg, vec![cert], dim));
    }
    let mut message = String::new();
    if !feasible {
        message = format!("{m} masses exceed the d+1 = {} covered by the guarantee; searching anyway", d + 1);
    }
    let up = inst.lifted();
    let stages = search::ladder(instance_smoothing(inst));
    let problem = ConeProblem { manifold, insts: stage_instances(&up, &stages), stages, n, k };
    let out = search::search(&problem, cfg, Vec::new());

    let mut report = SolveReport::refused("cone", Status::NotFound, message, vec![cert], dim);
    report.lifted = true;
    report.evaluations = out.evaluations;
    report.residual_smoothed = out.value;
    if !out.x.is_empty() {
        let flag = problem.flag(&out.x);
        let top = problem.insts.last().unwrap();
        if let Ok((r, cone)) = cone_residual_with_cone(top, &flag, &vec![0.0; k], m) {
            let (r_flip, _) = cone_residual_with_cone(top, &flag.flipped(), &vec![0.0; k], m)?;
            let anti = r.components.iter().zip(&r_flip.components).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            report.certificates.push(Certificate::Antipodality { max_deviation: anti });
            let lifted_region = lifted(Region::Cone(cone.clone()));
            report.residual_raw = two_piece_residual(&inst.masses, &lifted_region, Some(0.0));
            if k == 2 {
                if let Some(planar) = decode_lifted_wedge(&cone) {
                    report.solution.push(planar);
                }
            }
            if report.solution.is_empty() {
                report.message = join(&report.message, "no planar form (apex at infinity or k ≥ 3); reported lifted");
            }
            report.lifted_solution.push(lifted_region);
            report.config_point = Some(ConfigPoint::Flag { flag });
        }
    }
    if out.found {
        report.status = Status::Found;
    }
    report.wall_clock = started.elapsed().as_secs_f64();
    Ok(report)
}

fn join(a: &str, b: &str) -> String {
    if a.is_empty() {
        b.to_string()
    } else {
        format!("{a}; {b}")
    }
}

/// Planar form of a lifted 2-cone with apex flat through the origin: a cone
/// in `R^d` (intersection or union of two halfspaces), or a halfspace when
/// one boundary is the hyperplane at infinity. `None` when the apex is at
/// infinity or farther than `1e6`.
pub fn decode_lifted_wedge(cone: &KCone) -> Option<Region> {
    if cone.k() != 2 {
        return None;
    }
    let (u1, u2) = (cone.basis[0].as_slice(), cone.basis[1].as_slice());
    let a = cone.axis.as_slice();
    let axis: Vec<f64> = u1.iter().zip(u2).map(|(x, y)| a[0] * x + a[1] * y).collect();
    let perp: Vec<f64> = u1.iter().zip(u2).map(|(x, y)| -a[1] * x + a[0] * y).collect();
    let (s, c) = cone.alpha.sin_cos();
    let n1: Vec<f64> = axis.iter().zip(&perp).map(|(x, y)| s * x + c * y).collect();
    let n2: Vec<f64> = axis.iter().zip(&perp).map(|(x, y)| s * x - c * y).collect();
    let union = cone.alpha > PI / 2.0;
    let d = n1.len() - 1;
    let h1 = OrientedHyperplane::from_lifted_normal(&n1);
    let h2 = OrientedHyperplane::from_lifted_normal(&n2);
    match (h1, h2) {
        (Some(h1), Some(h2)) => planar_wedge(&h1, &h2, union),
        (None, Some(h)) | (Some(h), None) => {
            let z = if n1[d].abs() > n2[d].abs() { n1[d] } else { n2[d] };
            // the boundary at infinity is all-in (z > 0) or all-out
            if (z > 0.0) != union {
                Some(Region::Halfspace { plane: h })
            } else {
                None
            }
        }
        (None, None) => None,
    }
}

/// `h1⁺ ∩ h2⁺` (or `h1⁺ ∪ h2⁺`) as a 2-cone in `R^d`.
fn planar_wedge(h1: &OrientedHyperplane, h2: &OrientedHyperplane, union: bool) -> Option<Region> {
    let (n1, n2) = (h1.normal.as_slice(), h2.normal.as_slice());
    let c = geometry::dot(n1, n2);
    if c.abs() > 1.0 - 1e-12 {
        return None;
    }
    let b = geometry::gram_schmidt(&[n1.to_vec(), n2.to_vec()])?;
    // apex: n_i·p = offset_i with p in span(n1, n2)
    let m = nalgebra::Matrix2::new(
        geometry::dot(n1, &b[0]),
        geometry::dot(n1, &b[1]),
        geometry::dot(n2, &b[0]),
        geometry::dot(n2, &b[1]),
    );
    let apex = m.try_inverse()? * nalgebra::Vector2::new(h1.offset, h2.offset);
    if apex.norm() > 1e6 {
        return None;
    }
    let sum: Vec<f64> = n1.iter().zip(n2).map(|(a, b)| a + b).collect();
    let axis = UnitVector::normalized(vec![geometry::dot(&sum, &b[0]), geometry::dot(&sum, &b[1])]).ok()?;
    let beta = 0.5 * (PI - c.clamp(-1.0, 1.0).acos());
    let alpha = if union { PI - beta } else { beta };
    let basis = b.into_iter().map(UnitVector::from_unit_unchecked).collect();
    KCone::new(basis, vec![apex[0], apex[1]], axis, alpha).ok().map(Region::Cone)
}

struct ApexLineProblem {
    manifold: Manifold,
    stages: Vec<f64>,
    insts: Vec<Instance>,
    origin: Vec<f64>,
    direction: Vec<f64>,
}

impl ApexLineProblem {
    fn cone_at(&self, t: f64, line: &[f64], stage: usize, count: usize) -> Result<(Vec<f64>, KCone)> {
        let n = line.len();
        let mut vs = vec![line.to_vec()];
        vs.extend(geometry::orthonormal_complement(&[line.to_vec()], n));
        let flag = OrientedFlag { basis: unit_chunks(&vs.concat(), n) };
        let apex: Vec<f64> = self.origin.iter().zip(&self.direction).map(|(g, v)| g + t * v).collect();
        let coords: Vec<f64> = flag.basis.iter().map(|b| geometry::dot(b.as_slice(), &apex)).collect();
        let (r, c) = cone_residual_with_cone(&self.insts[stage], &flag, &coords, count)?;
        Ok((r.components, c))
    }

    fn tested(&self) -> usize {
        self.insts[0].masses.len() - 1
    }
}

impl Problem for ApexLineProblem {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn stages(&self) -> &[f64] {
        &self.stages
    }

    fn residual(&self, x: &[f64], stage: usize) -> Option<Vec<f64>> {
        self.cone_at(x[0], &x[1..], stage, self.tested()).ok().map(|r| r.0)
    }

    fn verify(&self, x: &[f64]) -> Option<f64> {
        let last = self.stages.len() - 1;
        let all = self.insts[last].masses.len();
        self.cone_at(x[0], &x[1..], last, all).ok().map(|r| r.0.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

/// Subdivision level of the degree certificates.
const DEGREE_LEVEL: usize = 3;
/// Bisection steps on the apex parameter between differing end degrees.
const DEGREE_BISECTIONS: usize = 10;
/// Apex search range, in units of the instance radius about the line origin.
const SEARCH_RANGE: f64 = 10.0;
/// Candidate certificate ends in the same unit. The end maps of atomic
/// masses can keep zeros out to a hundred radii or more, so the ends are
/// taken at the first rung whose degrees agree with those of the next.
const END_LADDER: [f64; 3] = [100.0, 300.0, 1000.0];

/// Searches for a `d`-cone bisecting `d + 1` masses in `R^d` whose apex lies
/// on the line `origin + t·direction`. Supported for `d = 3`.
pub fn solve_cone_apex_on_line(
    inst: &Instance,
    origin: &[f64],
    direction: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let d = inst.dimension;
    let m = inst.num_masses();
    let name = "cone_on_line";
    if origin.len() != d || direction.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: origin.len().min(direction.len()) });
    }
    let dir = UnitVector::normalized(direction.to_vec())?;
    let (_, cert) = feasibility_certificate(d, d, m, Variant::Cone);
    if d % 2 == 0 {
        let msg = format!("d = {d} is even; the apex-on-line statement needs odd d");
        return Ok(SolveReport::refused(name, Status::Infeasible, msg, vec![cert], d));
    }
    if d != 3 {
        let msg = format!("only d = 3 is supported (got d = {d})");
        return Ok(SolveReport::refused(name, Status::ExceedsDeskScale, msg, vec![cert], d));
    }
    if m != d + 1 {
        let msg = format!("needs exactly d+1 = {} masses, got {m}", d + 1);
        return Ok(SolveReport::refused(name, Status::Infeasible, msg, vec![cert], d));
    }
    let radius = inst.radius_about(origin).max(1e-9);
    let big_t = SEARCH_RANGE * radius;
    let stages = search::ladder(instance_smoothing(inst));
    let problem = ApexLineProblem {
        manifold: Manifold::Product(vec![Manifold::Real { scale: big_t }, Manifold::Sphere(d)]),
        insts: stage_instances(inst, &stages),
        stages,
        origin: origin.to_vec(),
        direction: dir.as_slice().to_vec(),
    };
    let last = problem.stages.len() - 1;
    let f_at = |t: f64| {
        let p = &problem;
        move |l: &[f64; 3]| -> [f64; 3] {
            match p.cone_at(t, l, last, p.tested()) {
                Ok((r, _)) => [r[0], r[1], r[2]],
                Err(_) => [0.0; 3],
            }
        }
    };
    let mut certs = vec![cert];
    let ends = |r: f64| {
        let t = r * radius;
        let lo = degree_certificate("t=-T", -t, f_at(-t), DEGREE_LEVEL);
        let hi = degree_certificate("t=+T", t, f_at(t), DEGREE_LEVEL);
        (t, lo, hi)
    };
    let mut rung = ends(END_LADDER[0]);
    for &r in &END_LADDER[1..] {
        let next = ends(r);
        let stable = rung.1 .1.is_some() && rung.1 .1 == next.1 .1 && rung.2 .1 == next.2 .1;
        rung = if stable { break } else { next };
    }
    let (end_t, (c_lo, deg_lo), (c_hi, deg_hi)) = rung;
    certs.push(c_lo);
    certs.push(c_hi);

    let mut seeds = Vec::new();
    if let (Some(a), Some(b)) = (deg_lo, deg_hi) {
        if a != b {
            let (mut lo, mut hi) = (-end_t, end_t);
            for _ in 0..DEGREE_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                match super::sphere_map_degree(f_at(mid), DEGREE_LEVEL) {
                    Ok(g) if g == a => lo = mid,
                    Ok(_) => hi = mid,
                    Err(_) => {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                }
            }
            let t = 0.5 * (lo + hi);
            let f = f_at(t);
            let mesh = super::icosphere(DEGREE_LEVEL);
            let best = mesh
                .vertices
                .iter()
                .min_by(|a, b| {
                    let (fa, fb) = (f(a), f(b));
                    let na = fa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let nb = fb.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    na.total_cmp(&nb)
                })
                .copied()
                .unwrap();
            seeds.push(vec![t, best[0], best[1], best[2]]);
        }
    }
    let out = search::search(&problem, cfg, seeds);
    let mut report = SolveReport::refused(name, Status::NotFound, String::new(), certs, 3);
    report.evaluations = out.evaluations;
    report.residual_smoothed = out.value;
    if !out.x.is_empty() {
        let (_, cone) = problem.cone_at(out.x[0], &out.x[1..], last, m)?;
        let region = Region::Cone(cone);
        report.residual_raw = two_piece_residual(&inst.masses, &region, Some(0.0));
        report.solution.push(region);
        report.config_point =
            Some(ConfigPoint::ApexParam { t: out.x[0], direction: UnitVector::from_unit_unchecked(out.x[1..].to_vec()) });
    }
    if out.found {
        report.status = Status::Found;
    } else if deg_lo.is_some() && deg_lo == deg_hi {
        report.message = "end degrees agree; no crossing certified".into();
    }
    report.wall_clock = started.elapsed().as_secs_f64();
    Ok(report)
}
