//! Fan equipartitions and fans of double wedges.

use std::f64::consts::TAU;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::manifold::Manifold;
use super::search::{self, Problem};
use super::{
    feasibility_certificate, instance_smoothing, lifted, piece_residual, stage_instances, Certificate, SolveReport,
    SolverConfig, Status, DESK_SCALE_DIM,
};
use crate::error::{Error, Result};
use crate::geometry::{self, Frame2, UnitVector, Vector};
use crate::masses::{total_mass, Instance, MassDistribution};
use crate::regions::{self, DwFan, KFan, Region};
use crate::testmaps::{check_equivariance, fan_blocks, ConfigPoint, Reference, Variant};

/// Whether the fan search runs on the lifted instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMode {
    /// Lift only when the through-the-origin hypothesis fails and the
    /// general one holds.
    #[default]
    Auto,
    Always,
    Never,
}

fn frame_of(x: &[f64], n: usize) -> Frame2 {
    Frame2 {
        x: UnitVector::from_unit_unchecked(x[..n].to_vec()),
        y: UnitVector::from_unit_unchecked(x[n..].to_vec()),
    }
}

struct FanProblem {
    manifold: Manifold,
    stages: Vec<f64>,
    insts: Vec<Instance>,
    n: usize,
    targets: Vec<f64>,
}

impl FanProblem {
    fn fan(&self, x: &[f64], stage: usize) -> Result<KFan> {
        let inst = &self.insts[stage];
        let all: Vec<&MassDistribution> = inst.masses.iter().collect();
        regions::build_fan_from(&all, &frame_of(x, self.n), &Vector::zeros(self.n), &self.targets, 0.0)
    }
}

impl Problem for FanProblem {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn stages(&self) -> &[f64] {
        &self.stages
    }

    fn residual(&self, x: &[f64], stage: usize) -> Option<Vec<f64>> {
        let fan = self.fan(x, stage).ok()?;
        let inst = &self.insts[stage];
        let tested: Vec<&MassDistribution> = inst.masses[..inst.masses.len() - 1].iter().collect();
        Some(fan_blocks(&tested, &fan, &self.targets).components)
    }

    fn verify(&self, x: &[f64]) -> Option<f64> {
        let last = self.stages.len() - 1;
        let fan = self.fan(x, last).ok()?;
        let all: Vec<&MassDistribution> = self.insts[last].masses.iter().collect();
        Some(fan_blocks(&all, &fan, &self.targets).norm_inf())
    }
}

/// Scan steps per orientation of the planar frame.
const CIRCLE_SCAN: usize = 8192;

/// On `V_2(R^2)` the residual is a single scalar of the rotation angle:
/// brackets its sign changes on a uniform grid and bisects each one.
fn circle_root(p: &FanProblem, cfg: &SolverConfig) -> Option<search::Outcome> {
    if p.n != 2 || p.targets.len() != 2 || p.insts[0].masses.len() != 2 {
        return None;
    }
    let last = p.stages.len() - 1;
    let mut evaluations = 0u64;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in [1.0, -1.0] {
        let point = |t: f64| {
            let (sn, c) = t.sin_cos();
            vec![c, sn, -s * sn, s * c]
        };
        let mut f = |t: f64| {
            evaluations += 1;
            p.residual(&point(t), last).map(|r| r[0])
        };
        let step = TAU / CIRCLE_SCAN as f64;
        let mut prev = (0.0, f(0.0));
        for i in 1..=CIRCLE_SCAN {
            let t = i as f64 * step;
            let cur = (t, f(t));
            let (Some(a), Some(b)) = (prev.1, cur.1) else {
                prev = cur;
                continue;
            };
            if a == 0.0 || a.signum() != b.signum() {
                let (mut lo, mut hi, fa) = (prev.0, cur.0, a);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    match f(mid) {
                        Some(v) if v == 0.0 => {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        Some(v) if v.signum() == fa.signum() => lo = mid,
                        Some(_) => hi = mid,
                        None => break,
                    }
                }
                let x = point(0.5 * (lo + hi));
                if let Some(v) = p.verify(&x) {
                    if best.as_ref().map_or(true, |b| v < b.1) {
                        best = Some((x, v));
                    }
                    if v <= cfg.tolerance {
                        break;
                    }
                }
            }
            prev = cur;
        }
        if best.as_ref().is_some_and(|b| b.1 <= cfg.tolerance) {
            break;
        }
    }
    let (x, value) = best?;
    (value <= cfg.tolerance).then_some(search::Outcome { x, value, found: true, evaluations })
}

fn is_prime(p: usize) -> bool {
    p >= 2 && (2..).take_while(|i| i * i <= p).all(|i| p % i != 0)
}

/// Smallest odd prime `p < 1000` with every target a multiple of `1/p`.
fn common_odd_prime(targets: &[f64]) -> Option<usize> {
    (3..1000).step_by(2).filter(|&p| is_prime(p)).find(|&p| {
        targets.iter().all(|t| {
            let a = t * p as f64;
            (a - a.round()).abs() <= 1e-9 && a.round() >= 1.0
        })
    })
}

/// Searches for a fan with sector fractions `targets` of every mass.
///
/// Equal targets use the k-fan hypotheses (k a product of distinct odd
/// primes); other targets must be multiples of `1/p` for an odd prime `p`
/// and use the q-fan hypotheses. With [`LiftMode::Auto`] the search runs
/// through the origin when that hypothesis holds and on the lifted instance
/// otherwise.
pub fn solve_fan(inst: &Instance, targets: &[f64], lift: LiftMode, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    regions::validate_targets(targets)?;
    let started = Instant::now();
    let name = "fan";
    let d = inst.dimension;
    let k = targets.len();
    let m = inst.num_masses().saturating_sub(1);
    if m == 0 {
        return Err(Error::InvalidInput("a fan search needs at least two masses".into()));
    }
    let uniform = targets.iter().all(|t| (t - 1.0 / k as f64).abs() <= 1e-12);
    let (kp, origin_variant, general_variant) = if uniform {
        (k, Variant::FanOrigin, Variant::FanGeneral)
    } else {
        match common_odd_prime(targets) {
            Some(p) => (p, Variant::QFanOrigin, Variant::QFanGeneral),
            None => {
                let msg = "targets are not multiples of 1/p for an odd prime p".to_string();
                return Ok(SolveReport::refused(name, Status::Infeasible, msg, Vec::new(), 0));
            }
        }
    };
    let (origin_ok, origin_cert) = feasibility_certificate(d, kp, m, origin_variant);
    let (general_ok, general_cert) = feasibility_certificate(d, kp, m, general_variant);
    let use_lift = match lift {
        LiftMode::Never => false,
        LiftMode::Always => true,
        LiftMode::Auto => !origin_ok,
    };
    let (ok, explanation) = if use_lift { (general_ok, &general_cert) } else { (origin_ok, &origin_cert) };
    let certs = vec![origin_cert.clone(), general_cert.clone()];
    let n = if use_lift { d + 1 } else { d };
    let manifold = Manifold::Stiefel2(n.max(2));
    let dim = manifold.dim();
    if !ok {
        let Certificate::Feasibility { explanation, variant, .. } = explanation else { unreachable!() };
        let msg = format!("{variant} hypothesis fails: {explanation}");
        return Ok(SolveReport::refused(name, Status::Infeasible, msg, certs, dim));
    }
    if n < 2 {
        let msg = "fans need a 2-plane; lift the instance".to_string();
        return Ok(SolveReport::refused(name, Status::Infeasible, msg, certs, dim));
    }
    if dim > DESK_SCALE_DIM {
        let msg = format!("Stiefel manifold dimension {dim} exceeds {DESK_SCALE_DIM}");
        return Ok(SolveReport::refused(name, Status::ExceedsDeskScale, msg, certs, dim));
    }
    let work = if use_lift { inst.lifted() } else { inst.clone() };
    let stages = search::ladder(instance_smoothing(inst));
    let problem = FanProblem { manifold, insts: stage_instances(&work, &stages), stages, n, targets: targets.to_vec() };
    let out = match circle_root(&problem, cfg) {
        Some(o) => o,
        None => search::search(&problem, cfg, Vec::new()),
    };

    let mut report = SolveReport::refused(name, Status::NotFound, String::new(), certs, dim);
    report.lifted = use_lift;
    report.evaluations = out.evaluations;
    report.residual_smoothed = out.value;
    if !out.x.is_empty() {
        let last = problem.stages.len() - 1;
        let frame = frame_of(&out.x, n);
        let fan = problem.fan(&out.x, last)?;
        let eq = check_equivariance(&problem.insts[last], &frame, targets, Reference::Sum, 1e-8)?;
        report.certificates.push(Certificate::Equivariance { max_deviation: eq.max_deviation, pass: eq.pass });
        if use_lift {
            let region = lifted(Region::Fan(fan.clone()));
            report.residual_raw = piece_residual(&inst.masses, &region, targets, Some(0.0));
            match decode_lifted_fan(&fan) {
                Some(planar) => report.solution.push(Region::Fan(planar)),
                None => report.message = "apex at infinity; reported in lifted form".into(),
            }
            report.lifted_solution.push(region);
        } else {
            let region = Region::Fan(fan);
            report.residual_raw = piece_residual(&inst.masses, &region, targets, Some(0.0));
            report.solution.push(region);
        }
        report.config_point = Some(ConfigPoint::StiefelPair { frame });
    }
    if out.found {
        report.status = Status::Found;
    }
    report.wall_clock = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Trace on `x_{d+1} = 1` of a fan in `R^{d+1}` whose apex flat passes
/// through the origin, as a fan in `R^d` with the same sectors in the same
/// cyclic order. `None` when the apex is at infinity or beyond `1e6`.
pub fn decode_lifted_fan(fan: &KFan) -> Option<KFan> {
    let n = fan.frame.dim();
    let d = n - 1;
    let (x, y) = (fan.frame.x.as_slice(), fan.frame.y.as_slice());
    // planar angle of a lifted point (p, 1) is the angle of M p + b
    let (m1, m2) = (&x[..d], &y[..d]);
    let b = [x[d], y[d]];
    let r11 = geometry::norm(m1);
    if r11 < 1e-12 {
        return None;
    }
    let q1 = geometry::scaled(m1, 1.0 / r11);
    let r21 = geometry::dot(m2, &q1);
    let mut q2 = m2.to_vec();
    geometry::axpy(&mut q2, -r21, &q1);
    let r22 = geometry::norm(&q2);
    if r22 < 1e-12 * r11.max(geometry::norm(m2)) || d < 2 {
        return None;
    }
    let q2 = geometry::scaled(&q2, 1.0 / r22);
    // L = [[r11, 0], [r21, r22]], M = L Q; apex solves M a = −b in span(q1, q2)
    let s1 = -b[0] / r11;
    let s2 = (-b[1] - r21 * s1) / r22;
    let mut apex = geometry::scaled(&q1, s1);
    geometry::axpy(&mut apex, s2, &q2);
    if geometry::norm(&apex) > 1e6 {
        return None;
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(fan.k());
    for &c in &fan.cuts {
        let (s, co) = c.sin_cos();
        // u = L⁻¹ (cos c, sin c)
        let u1 = co / r11;
        let u2 = (s - r21 * u1) / r22;
        let raw = u2.atan2(u1);
        let a = match cuts.last() {
            None => raw,
            Some(&prev) => prev + (raw - prev).rem_euclid(TAU),
        };
        cuts.push(a);
    }
    let frame = Frame2 { x: UnitVector::from_unit_unchecked(q1), y: UnitVector::from_unit_unchecked(q2) };
    KFan::new(frame, Vector::from(apex), cuts).ok()
}

struct DwFanProblem {
    manifold: Manifold,
    stages: Vec<f64>,
    insts: Vec<Instance>,
    n: usize,
    k: usize,
}

impl DwFanProblem {
    fn fan(&self, x: &[f64], stage: usize) -> Result<DwFan> {
        let all: Vec<&MassDistribution> = self.insts[stage].masses.iter().collect();
        regions::build_dw_fan_from(&all, &frame_of(x, self.n), &Vector::zeros(self.n), self.k, 0.0)
    }

    fn blocks(&self, masses: &[MassDistribution], fan: &DwFan) -> Vec<f64> {
        let region = Region::DwFan(fan.clone());
        let t = 1.0 / self.k as f64;
        let mut out = Vec::with_capacity(masses.len() * self.k);
        for mu in masses {
            let tot = total_mass(mu);
            out.extend(regions::piece_measures_eps(mu, &region, mu.smoothing).iter().map(|p| p / tot - t));
        }
        out
    }
}

impl Problem for DwFanProblem {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn stages(&self) -> &[f64] {
        &self.stages
    }

    fn residual(&self, x: &[f64], stage: usize) -> Option<Vec<f64>> {
        let fan = self.fan(x, stage).ok()?;
        let ms = &self.insts[stage].masses;
        Some(self.blocks(&ms[..ms.len() - 1], &fan))
    }

    fn verify(&self, x: &[f64]) -> Option<f64> {
        let last = self.stages.len() - 1;
        let fan = self.fan(x, last).ok()?;
        Some(self.blocks(&self.insts[last].masses, &fan).iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

/// Searches, on the lifted instance, for `k` lines through a common apex
/// flat whose `k` double wedges each hold `1/k` of every mass.
pub fn solve_dw_fan(inst: &Instance, k: usize, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let name = "dw_fan";
    let d = inst.dimension;
    let m = inst.num_masses().saturating_sub(1);
    let (ok, cert) = feasibility_certificate(d, k, m.max(1), Variant::Stripes);
    let n = d + 1;
    let manifold = Manifold::Stiefel2(n);
    let dim = manifold.dim();
    if !ok || m == 0 {
        let msg = match &cert {
            Certificate::Feasibility { explanation, .. } if m > 0 => format!("stripes hypothesis fails: {explanation}"),
            _ => "needs at least two masses".into(),
        };
        return Ok(SolveReport::refused(name, Status::Infeasible, msg, vec![cert], dim));
    }
    if dim > DESK_SCALE_DIM {
        let msg = format!("Stiefel manifold dimension {dim} exceeds {DESK_SCALE_DIM}");
        return Ok(SolveReport::refused(name, Status::ExceedsDeskScale, msg, vec![cert], dim));
    }
    let up = inst.lifted();
    let stages = search::ladder(instance_smoothing(inst));
    let problem = DwFanProblem { manifold, insts: stage_instances(&up, &stages), stages, n, k };
    let out = search::search(&problem, cfg, Vec::new());
    let mut report = SolveReport::refused(name, Status::NotFound, String::new(), vec![cert], dim);
    report.lifted = true;
    report.evaluations = out.evaluations;
    report.residual_smoothed = out.value;
    if !out.x.is_empty() {
        let last = problem.stages.len() - 1;
        let fan = problem.fan(&out.x, last)?;
        let region = lifted(Region::DwFan(fan));
        report.residual_raw = piece_residual(&inst.masses, &region, &vec![1.0 / k as f64; k], Some(0.0));
        report.lifted_solution.push(region);
        report.config_point = Some(ConfigPoint::StiefelPair { frame: frame_of(&out.x, n) });
    }
    if out.found {
        report.status = Status::Found;
    }
    report.wall_clock = started.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_denominators() {
        assert_eq!(common_odd_prime(&[1.0 / 3.0, 2.0 / 3.0]), Some(3));
        assert_eq!(common_odd_prime(&[0.2, 0.8]), Some(5));
        assert_eq!(common_odd_prime(&[0.5, 0.5]), None);
    }

    #[test]
    fn decoded_fan_matches_lifted_sectors() {
        let frame = Frame2::orthonormalized(vec![0.3, -0.2, 0.9], vec![0.5, 0.8, 0.1]).unwrap();
        let fan = KFan::new(frame, Vector::zeros(3), vec![0.2, 2.0, 4.1]).unwrap();
        let planar = decode_lifted_fan(&fan).unwrap();
        for i in 0..200 {
            let a = i as f64 * 0.37;
            let p = [3.0 * a.cos() * (1.0 + (i % 7) as f64), 2.0 * a.sin()];
            let up = geometry::gnomonic_lift(&p);
            assert_eq!(regions::fan_sector_index(&fan, up.as_slice()), regions::fan_sector_index(&planar, &p));
        }
    }
}
