//! Double-wedge bisections, alone and with one hyperplane shared across
//! families.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifold::Manifold;
use super::search::{self, Problem};
use super::{
    feasibility_certificate, instance_smoothing, lifted, stage_instances, two_piece_residual, unit_chunks,
    Certificate, SolveReport, SolverConfig, Status, DESK_SCALE_DIM,
};
use crate::error::Result;
use crate::geometry::{self, OrientedHyperplane, UnitVector};
use crate::masses::{total_mass, Instance, MassDistribution};
use crate::regions::{DoubleWedge, Region};
use crate::testmaps::{dw_residual, ConfigPoint, Variant};

/// Planar form of the double wedge of two planes through the origin of
/// `R^{d+1}`; a halfspace when one plane is the equator.
pub(crate) fn decode_double_wedge(n1: &[f64], n2: &[f64]) -> Option<Region> {
    let d = n1.len() - 1;
    match (OrientedHyperplane::from_lifted_normal(n1), OrientedHyperplane::from_lifted_normal(n2)) {
        (Some(h1), Some(h2)) => Some(Region::DoubleWedge(DoubleWedge { h1, h2 })),
        (None, Some(h)) => Some(Region::Halfspace { plane: if n1[d] > 0.0 { h } else { h.reoriented() } }),
        (Some(h), None) => Some(Region::Halfspace { plane: if n2[d] > 0.0 { h } else { h.reoriented() } }),
        (None, None) => None,
    }
}

pub(crate) fn origin_dw(n1: &[f64], n2: &[f64]) -> Region {
    Region::DoubleWedge(DoubleWedge {
        h1: OrientedHyperplane::through_origin(UnitVector::from_unit_unchecked(n1.to_vec())),
        h2: OrientedHyperplane::through_origin(UnitVector::from_unit_unchecked(n2.to_vec())),
    })
}

/// Hyperplanes through the origin with normals given by consecutive unit
/// blocks: `h1` first, then one `h2` per family.
struct SharedProblem {
    manifold: Manifold,
    stages: Vec<f64>,
    insts: Vec<Instance>,
    families: Vec<Vec<usize>>,
    n: usize,
}

impl SharedProblem {
    fn residual_at(&self, x: &[f64], stage: usize) -> Vec<f64> {
        let hs = unit_chunks(x, self.n);
        let inst = &self.insts[stage];
        let mut out = Vec::new();
        for (f, fam) in self.families.iter().enumerate() {
            let ms: Vec<&MassDistribution> = fam.iter().map(|&i| &inst.masses[i]).collect();
            out.extend(dw_residual(&ms, &hs[0], &hs[1 + f]).components);
        }
        out
    }

    fn family_residuals(&self, x: &[f64], stage: usize) -> Vec<f64> {
        let r = self.residual_at(x, stage);
        let mut o = 0;
        self.families
            .iter()
            .map(|fam| {
                let v = r[o..o + fam.len()].iter().fold(0.0f64, |m, x| m.max(x.abs()));
                o += fam.len();
                v
            })
            .collect()
    }
}

impl Problem for SharedProblem {
    fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    fn stages(&self) -> &[f64] {
        &self.stages
    }

    fn residual(&self, x: &[f64], stage: usize) -> Option<Vec<f64>> {
        Some(self.residual_at(x, stage))
    }

    fn verify(&self, x: &[f64]) -> Option<f64> {
        let last = self.stages.len() - 1;
        Some(self.residual_at(x, last).iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

/// Searches for a double wedge simultaneously bisecting every mass, over
/// pairs of planes through the origin of the lifted space.
pub fn solve_double_wedge(inst: &Instance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let d = inst.dimension;
    let m = inst.num_masses();
    let n = d + 1;
    let manifold = Manifold::Product(vec![Manifold::Sphere(n), Manifold::Sphere(n)]);
    let dim = manifold.dim();
    let mut message = String::new();
    if m > d + 1 {
        message = format!("{m} masses exceed the d+1 = {} covered by the guarantee; searching anyway", d + 1);
    }
    if dim > DESK_SCALE_DIM {
        let msg = format!("search dimension {dim} exceeds {DESK_SCALE_DIM}");
        return Ok(SolveReport::refused("double_wedge", Status::ExceedsDeskScale, msg, Vec::new(), dim));
    }
    let up = inst.lifted();
    let stages = search::ladder(instance_smoothing(inst));
    let problem = SharedProblem {
        manifold,
        insts: stage_instances(&up, &stages),
        stages,
        families: vec![(0..m).collect()],
        n,
    };
    let out = search::search(&problem, cfg, Vec::new());
    let mut report = SolveReport::refused("double_wedge", Status::NotFound, message, Vec::new(), dim);
    report.lifted = true;
    report.evaluations = out.evaluations;
    report.residual_smoothed = out.value;
    if !out.x.is_empty() {
        let (n1, n2) = out.x.split_at(n);
        let region = lifted(origin_dw(n1, n2));
        report.residual_raw = two_piece_residual(&inst.masses, &region, Some(0.0));
        let neg: Vec<f64> = n1.iter().map(|v| -v).collect();
        let a = problem.residual_at(&out.x, problem.stages.len() - 1);
        let b = problem.residual_at(&[neg, n2.to_vec()].concat(), problem.stages.len() - 1);
        let anti = a.iter().zip(&b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        report.certificates.push(Certificate::Antipodality { max_deviation: anti });
        if let Some(p) = decode_double_wedge(n1, n2) {
            report.solution.push(p);
        }
        report.lifted_solution.push(region);
        report.config_point = Some(ConfigPoint::HyperplanePair {
            h1: UnitVector::from_unit_unchecked(n1.to_vec()),
            h2: UnitVector::from_unit_unchecked(n2.to_vec()),
        });
    }
    if out.found {
        report.status = Status::Found;
    }
    report.wall_clock = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Points of a Fibonacci lattice on `S^2`.
fn fibonacci_sphere(count: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            vec![r * c, r * s, z]
        })
        .collect()
}

/// Outer grid points per sphere dimension.
const OUTER_PER_DIM: usize = 64;
/// Candidate partners sampled per family in the inner scan.
const INNER_SAMPLES: usize = 512;
/// Nested seeds handed to the joint refinement.
const NESTED_SEEDS: usize = 32;

/// Soft signs `σ(h·p)` of every atom of `mu` for each normal in `hs`,
/// weighted by the atom's weight when `weighted`.
fn sign_matrix(hs: &[Vec<f64>], mu: &MassDistribution, eps: f64, weighted: bool) -> DMatrix<f64> {
    let h = 0.5 * eps;
    DMatrix::from_fn(hs.len(), mu.len(), |r, c| {
        let p = mu.atoms[c].as_slice();
        let s = geometry::dot(&hs[r], p) / geometry::norm(p);
        let g = s.clamp(-1.0, 1.0).asin();
        let v = if h > 0.0 { (g / h).clamp(-1.0, 1.0) } else { g.signum() };
        if weighted {
            v * mu.weights[c]
        } else {
            v
        }
    })
}

/// Searches for one hyperplane `h1` and, for each family, a partner `h2`
/// such that each family's double wedge bisects all its masses within
/// `max(tolerance, eps)`.
///
/// For even `d` the search runs on the lifted instance (apex flats through
/// the origin of `R^{d+1}`); for odd `d` the double wedges have apexes
/// through the origin of `R^d`. An outer scan over `h1` with an inner scan
/// over partners seeds a joint refinement of all hyperplanes.
pub fn solve_shared_h1(inst: &Instance, cfg: &SolverConfig, eps: f64) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let name = "shared_h1";
    let d = inst.dimension;
    let families: Vec<Vec<usize>> = inst.families.clone().unwrap_or_else(|| vec![(0..inst.num_masses()).collect()]);
    let fmax = families.iter().map(Vec::len).max().unwrap_or(0);
    let (_, cert) = feasibility_certificate(d, families.len(), fmax, Variant::DwShared);
    let (_, cert_eps) = feasibility_certificate(d, families.len(), fmax, Variant::DwSharedEps);
    let lift = d % 2 == 0;
    let n = if lift { d + 1 } else { d };
    let manifold = Manifold::Product(vec![Manifold::Sphere(n); families.len() + 1]);
    let dim = manifold.dim();
    let certs = vec![cert, cert_eps];
    if dim > DESK_SCALE_DIM {
        let msg = format!("search dimension {dim} exceeds {DESK_SCALE_DIM}");
        return Ok(SolveReport::refused(name, Status::ExceedsDeskScale, msg, certs, dim));
    }
    let work = if lift { inst.lifted() } else { inst.clone() };
    let stages = search::ladder(instance_smoothing(inst));
    let problem = SharedProblem { manifold, insts: stage_instances(&work, &stages), stages, families, n };
    let goal = cfg.tolerance.max(eps);

    // nested scan at a coarse radius
    let coarse = problem.stages.iter().position(|&e| e <= 0.1).unwrap_or(problem.stages.len() - 1);
    let scan = &problem.insts[coarse];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let sphere = Manifold::Sphere(n);
    let outer: Vec<Vec<f64>> = if n == 3 {
        fibonacci_sphere(OUTER_PER_DIM * OUTER_PER_DIM)
    } else {
        (0..OUTER_PER_DIM.pow((n - 1).min(2) as u32)).map(|_| sphere.random(&mut rng)).collect()
    };
    let inner: Vec<Vec<f64>> = (0..INNER_SAMPLES).map(|_| sphere.random(&mut rng)).collect();
    let eps_scan = problem.stages[coarse];
    let mut score = vec![0.0f64; outer.len()];
    let mut best_partner = vec![vec![0usize; problem.families.len()]; outer.len()];
    for (f, fam) in problem.families.iter().enumerate() {
        // worst imbalance over the family's masses for each (h1, h2) pair
        let mut worst = DMatrix::<f64>::zeros(outer.len(), inner.len());
        for &i in fam {
            let mu = &scan.masses[i];
            let s1 = sign_matrix(&outer, mu, eps_scan, true);
            let s2 = sign_matrix(&inner, mu, eps_scan, false);
            let g = (s1 * s2.transpose()) / total_mass(mu);
            worst.zip_apply(&g, |w, v| *w = w.max(v.abs()));
        }
        for r in 0..outer.len() {
            let (j, v) = worst.row(r).iter().enumerate().fold((0, f64::INFINITY), |b, (j, &v)| if v < b.1 { (j, v) } else { b });
            score[r] = score[r].max(v);
            best_partner[r][f] = j;
        }
    }
    let mut order: Vec<usize> = (0..outer.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let seeds: Vec<Vec<f64>> = order
        .iter()
        .take(NESTED_SEEDS)
        .map(|&r| {
            let mut x = outer[r].clone();
            for &j in &best_partner[r] {
                x.extend_from_slice(&inner[j]);
            }
            x
        })
        .collect();
    let mut evaluations = (outer.len() * inner.len()) as u64;

    let inner_cfg = SolverConfig { tolerance: goal, ..cfg.clone() };
    let out = search::search(&problem, &inner_cfg, seeds);
    evaluations += out.evaluations;
    let mut report = SolveReport::refused(name, Status::NotFound, String::new(), certs, dim);
    report.lifted = lift;
    report.evaluations = evaluations;
    report.residual_smoothed = out.value;
    if !out.x.is_empty() {
        let last = problem.stages.len() - 1;
        report.family_residuals = problem.family_residuals(&out.x, last);
        let hs: Vec<&[f64]> = out.x.chunks(n).collect();
        let mut raw: f64 = 0.0;
        for (f, fam) in problem.families.iter().enumerate() {
            let region = origin_dw(hs[0], hs[1 + f]);
            let outer_region = if lift { lifted(region.clone()) } else { region.clone() };
            raw = raw.max(two_piece_residual(fam.iter().map(|&i| &inst.masses[i]), &outer_region, Some(0.0)));
            if lift {
                if let Some(p) = decode_double_wedge(hs[0], hs[1 + f]) {
                    report.solution.push(p);
                }
                report.lifted_solution.push(outer_region);
            } else {
                report.solution.push(region);
            }
        }
        report.residual_raw = raw;
        report.config_point = Some(ConfigPoint::SharedPair {
            h1: UnitVector::from_unit_unchecked(hs[0].to_vec()),
            h2: hs[1..].iter().map(|h| UnitVector::from_unit_unchecked(h.to_vec())).collect(),
        });
    }
    if out.found {
        report.status = Status::Found;
    } else {
        report.message = format!("best h1 landscape value {:.3e}", score[order[0]]);
    }
    report.wall_clock = started.elapsed().as_secs_f64();
    Ok(report)
}
