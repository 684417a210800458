use std::f64::consts::TAU;

use masspart::geometry::Vector;
use masspart::masses::{make_simplex_counterexample, random_instance, Instance, MassDistribution};
use masspart::projective::verify_partition;
use masspart::regions::Region;
use masspart::solvers::{
    solve_cone, solve_cone_apex_on_line, solve_double_wedge, solve_fan, solve_shared_h1, sphere_map_degree,
    winding_number, Certificate, LiftMode, SolveReport, SolverConfig, Status,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` random atoms and their reflections through `center`.
fn symmetric_mass(rng: &mut ChaCha8Rng, name: &str, center: &[f64], n: usize) -> MassDistribution {
    let mut atoms = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let v: Vec<f64> = center.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        atoms.push(Vector::from(center.iter().zip(&v).map(|(c, x)| c + x).collect::<Vec<_>>()));
        atoms.push(Vector::from(center.iter().zip(&v).map(|(c, x)| c - x).collect::<Vec<_>>()));
    }
    MassDistribution::unit_weights(name, atoms).unwrap()
}

fn symmetric_instance(seed: u64, d: usize, m: usize, center: &[f64]) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses = (0..m).map(|i| symmetric_mass(&mut rng, &format!("s{i}"), center, 15)).collect();
    Instance::new(d, masses, None).unwrap()
}

/// Re-measures every region of a report against equal shares.
fn reverify(inst: &Instance, r: &SolveReport, tol: f64) {
    let regions = if r.lifted_solution.is_empty() { &r.solution } else { &r.lifted_solution };
    assert!(!regions.is_empty());
    for region in regions {
        let k = region.pieces();
        let check = verify_partition(&inst.masses, region, &vec![1.0 / k as f64; k], tol).unwrap();
        assert!(check.pass, "{}: deviation {}", r.problem, check.max_deviation);
    }
}

#[test]
fn centrally_symmetric_masses_are_bisected_by_a_wedge() {
    let inst = symmetric_instance(1, 2, 3, &[0.4, -0.2]);
    let r = solve_cone(&inst, 2, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Found);
    assert!(r.residual_smoothed <= 1e-6);
    reverify(&inst, &r, 2e-6);
}

#[test]
fn random_wedge_reverifies() {
    let inst = random_instance(2, 3, 50, 7).unwrap();
    let cfg = SolverConfig::default();
    let r = solve_cone(&inst, 2, &cfg).unwrap();
    assert_eq!(r.status, Status::Found);
    reverify(&inst, &r, 2.0 * cfg.tolerance);
}

#[test]
fn simplex_counterexample_fails_only_with_all_masses() {
    let inst = make_simplex_counterexample(2).unwrap();
    let cfg = SolverConfig::default();
    let r = solve_cone(&inst, 2, &cfg).unwrap();
    assert_eq!(r.status, Status::NotFound);
    assert!(r.residual_smoothed >= 0.1);
    let dropped = Instance::new(2, inst.masses[..3].to_vec(), None).unwrap();
    let r = solve_cone(&dropped, 2, &cfg).unwrap();
    assert_eq!(r.status, Status::Found);
}

#[test]
fn identical_masses_are_fanned_immediately() {
    let base = random_instance(2, 1, 40, 5).unwrap();
    let inst = Instance::new(2, vec![base.masses[0].clone(), base.masses[0].clone()], None).unwrap();
    let r = solve_fan(&inst, &[1.0 / 3.0; 3], LiftMode::Always, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Found);
    assert!(r.residual_smoothed <= 1e-10);
}

#[test]
fn lifted_fans_and_q_fans_reverify() {
    let cfg = SolverConfig::default();
    let inst = random_instance(2, 2, 50, 12).unwrap();
    let r = solve_fan(&inst, &[1.0 / 3.0; 3], LiftMode::Always, &cfg).unwrap();
    assert_eq!(r.status, Status::Found);
    reverify(&inst, &r, 2.0 * cfg.tolerance);
    let r = solve_fan(&inst, &[1.0 / 3.0, 2.0 / 3.0], LiftMode::Auto, &cfg).unwrap();
    assert_eq!(r.status, Status::Found);
    let region = r.lifted_solution.first().or(r.solution.first()).unwrap();
    let check = verify_partition(&inst.masses, region, &[1.0 / 3.0, 2.0 / 3.0], 2.0 * cfg.tolerance).unwrap();
    assert!(check.pass, "{}", check.max_deviation);
}

#[test]
fn origin_fans_beyond_the_bound_are_refused() {
    let inst = random_instance(2, 2, 20, 1).unwrap();
    let r = solve_fan(&inst, &[1.0 / 3.0; 3], LiftMode::Never, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Infeasible);
    assert!(r.message.contains("2d−3 = 1 < m(k−1) = 2"), "{}", r.message);
}

#[test]
fn double_wedges_reverify_and_reflection_symmetry_is_easy() {
    let cfg = SolverConfig::default();
    let inst = random_instance(2, 3, 50, 9).unwrap();
    let r = solve_double_wedge(&inst, &cfg).unwrap();
    assert_eq!(r.status, Status::Found);
    reverify(&inst, &r, 2.0 * cfg.tolerance);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let masses = (0..3)
        .map(|i| {
            let mut atoms = Vec::new();
            for _ in 0..15 {
                let (x, y) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.05..1.0));
                atoms.push(Vector::from(vec![x, y]));
                atoms.push(Vector::from(vec![x, -y]));
            }
            MassDistribution::unit_weights(format!("r{i}"), atoms).unwrap()
        })
        .collect();
    let mirrored = Instance::new(2, masses, None).unwrap();
    let r = solve_double_wedge(&mirrored, &cfg).unwrap();
    assert_eq!(r.status, Status::Found);
}

#[test]
fn symmetric_families_share_any_h1() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let masses = (0..6).map(|i| symmetric_mass(&mut rng, &format!("f{i}"), &[0.0, 0.0], 10)).collect();
    let inst = Instance::new(2, masses, Some(vec![vec![0, 1, 2], vec![3, 4, 5]])).unwrap();
    let r = solve_shared_h1(&inst, &SolverConfig::default(), 1e-3).unwrap();
    assert_eq!(r.status, Status::Found);
    assert_eq!(r.solution.len().max(r.lifted_solution.len()), 2);
}

#[test]
fn apex_on_line_finds_the_common_center() {
    let center = [0.0, 0.0, 0.7];
    let inst = symmetric_instance(3, 3, 4, &center);
    let r = solve_cone_apex_on_line(&inst, &[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Found, "{}", r.message);
    assert!(r.residual_smoothed <= 1e-5);
}

#[test]
fn apex_on_line_rejects_even_dimensions() {
    let inst = random_instance(2, 3, 20, 0).unwrap();
    let r = solve_cone_apex_on_line(&inst, &[0.0, 0.0], &[1.0, 0.0], &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Infeasible);
}

fn end_degrees(r: &SolveReport) -> Vec<Option<i64>> {
    r.certificates
        .iter()
        .filter_map(|c| match c {
            Certificate::Degree { label, degree, .. } if label.starts_with("t=") => Some(*degree),
            _ => None,
        })
        .collect()
}

#[test]
fn apex_on_line_end_degrees_flip() {
    // Odd atom counts: even ones admit whole regions of exact bisectors, so the end maps can vanish.
    for seed in [2, 3, 5] {
        let inst = random_instance(3, 4, 21, seed).unwrap();
        let r = solve_cone_apex_on_line(&inst, &[0.0, 0.0, 0.0], &[0.3, -0.2, 1.0], &SolverConfig::default()).unwrap();
        let degrees = end_degrees(&r);
        assert_eq!(degrees.len(), 2);
        let (a, b) = (degrees[0].unwrap(), degrees[1].unwrap());
        assert_ne!(a, b, "seed {seed}");
        assert_eq!((a - b).rem_euclid(2), 0, "seed {seed}");
    }
}

#[test]
fn reports_are_reproducible() {
    let inst = random_instance(2, 3, 40, 3).unwrap();
    let cfg = SolverConfig { seed: 17, ..SolverConfig::default() };
    let a = masspart::json::to_string(&solve_double_wedge(&inst, &cfg).unwrap()).unwrap();
    let b = masspart::json::to_string(&solve_double_wedge(&inst, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

fn circle(n: usize, f: impl Fn(f64) -> [f64; 2]) -> Vec<[f64; 2]> {
    (0..n).map(|i| f(TAU * i as f64 / n as f64)).collect()
}

#[test]
fn winding_number_rotation_and_reversal() {
    let loop_ = circle(300, |t| [t.cos() + 0.4 * (2.0 * t).cos(), t.sin() + 0.3 * (3.0 * t).sin()]);
    let w = winding_number(&loop_).unwrap();
    assert_eq!(w, 1);
    let mut rotated = loop_.clone();
    rotated.rotate_left(77);
    assert_eq!(winding_number(&rotated).unwrap(), w);
    let mut reversed = loop_.clone();
    reversed.reverse();
    assert_eq!(winding_number(&reversed).unwrap(), -w);
    assert_eq!(winding_number(&circle(50, |_| [2.0, -1.0])).unwrap(), 0);
    assert!(winding_number(&circle(6, |t| [t.cos(), t.sin()])).is_err());
}

#[test]
fn antipodal_loops_have_odd_winding() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        // Odd harmonics only, dominated by the chosen one, so f(t+π) = −f(t) and f ≠ 0.
        let lead = [1.0, 3.0, 5.0][rng.gen_range(0..3)];
        let c: Vec<(f64, f64, f64)> =
            (0..3).map(|j| (2.0 * j as f64 + 1.0, rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))).collect();
        let l = circle(2000, |t| {
            let mut p = [(lead * t).cos(), (lead * t).sin()];
            for &(h, a, b) in &c {
                p[0] += a * (h * t).cos();
                p[1] += b * (h * t).sin();
            }
            p
        });
        let w = winding_number(&l).unwrap();
        assert_eq!(w.rem_euclid(2), 1, "winding {w}");
    }
}

#[test]
fn squaring_on_the_riemann_sphere_has_degree_two() {
    let square = |p: &[f64; 3]| -> [f64; 3] {
        if p[2] > 1.0 - 1e-15 {
            return [0.0, 0.0, 1.0];
        }
        let (x, y) = (p[0] / (1.0 - p[2]), p[1] / (1.0 - p[2]));
        let (u, v) = (x * x - y * y, 2.0 * x * y);
        let r2 = u * u + v * v;
        [2.0 * u / (1.0 + r2), 2.0 * v / (1.0 + r2), (r2 - 1.0) / (1.0 + r2)]
    };
    assert_eq!(sphere_map_degree(square, 4).unwrap(), 2);
    assert_eq!(sphere_map_degree(|p: &[f64; 3]| *p, 4).unwrap(), 1);
    assert_eq!(sphere_map_degree(|p: &[f64; 3]| [-p[0], -p[1], -p[2]], 4).unwrap(), -1);
}

#[test]
fn solution_regions_round_trip_through_json() {
    let inst = random_instance(2, 3, 30, 1).unwrap();
    let r = solve_cone(&inst, 2, &SolverConfig::default()).unwrap();
    let text = masspart::json::to_string(&r.lifted_solution).unwrap();
    let back: Vec<Region> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r.lifted_solution);
}
