use std::f64::consts::{FRAC_PI_2, PI, TAU};

use masspart::geometry::{self, Frame2, OrientedFlag, OrientedHyperplane, UnitVector, Vector};
use masspart::masses::{random_instance, total_mass, BoundaryRule, Instance, MassDistribution};
use masspart::regions::{
    self, complement, cone_contains, double_wedge_contains, fan_sector_index, halfspace_contains, DoubleWedge, KCone,
    KFan, Membership, Region, SectorIndex,
};
use masspart::testmaps::{self, cone_residual, dw_residual, fan_residual, zk_shift, Reference};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(rng: &mut ChaCha8Rng, n: usize) -> UnitVector {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if geometry::norm(&v) > 0.1 {
            return UnitVector::normalized(v).unwrap();
        }
    }
}

/// Gaussian atoms without the general-position check of the generator.
fn quick_instance(d: usize, m: usize, atoms: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masses = (0..m)
        .map(|i| {
            let pts = (0..atoms)
                .map(|_| Vector::new((0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()).unwrap())
                .collect();
            MassDistribution::unit_weights(format!("m{i}"), pts).unwrap()
        })
        .collect();
    Instance::new(d, masses, None).unwrap()
}

fn raw(inst: &Instance) -> Instance {
    inst.with_smoothing(0.0)
}

fn random_region(rng: &mut ChaCha8Rng, d: usize) -> Region {
    match rng.gen_range(0..3) {
        0 => Region::Halfspace { plane: OrientedHyperplane::new(unit(rng, d), rng.gen_range(-0.5..0.5)) },
        1 => Region::DoubleWedge(DoubleWedge {
            h1: OrientedHyperplane::new(unit(rng, d), rng.gen_range(-0.5..0.5)),
            h2: OrientedHyperplane::new(unit(rng, d), rng.gen_range(-0.5..0.5)),
        }),
        _ => {
            let basis: Vec<UnitVector> = (0..d).map(|j| UnitVector::axis(d, j)).collect();
            let apex: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
            Region::Cone(KCone::new(basis, apex, unit(rng, d), rng.gen_range(0.1..3.0)).unwrap())
        }
    }
}

/// `+w` inside, `−w` outside, `0` on the boundary, normalized by total mass.
fn signed_share(mu: &MassDistribution, inside: impl Fn(&[f64]) -> Membership) -> f64 {
    let s: f64 = mu
        .atoms
        .iter()
        .zip(&mu.weights)
        .map(|(a, w)| match inside(a.as_slice()) {
            Membership::Inside => *w,
            Membership::Outside => -*w,
            Membership::Boundary => 0.0,
        })
        .sum();
    s / total_mass(mu)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gnomonic_round_trip(q in prop::collection::vec(-1e6f64..1e6, 1..6), scale in -6i32..=0) {
        let q: Vec<f64> = q.iter().map(|x| x * 10f64.powi(scale)).collect();
        let back = geometry::gnomonic_project(geometry::gnomonic_lift(&q).as_slice()).unwrap();
        let tol = 1e-12 * geometry::norm(&q).max(1.0);
        for (a, b) in q.iter().zip(back.as_slice()) {
            prop_assert!((a - b).abs() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn rotations_are_special_orthogonal(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = unit(&mut rng, n);
        let v = unit(&mut rng, n);
        let r = geometry::rotation_taking(u.as_slice(), v.as_slice());
        let ru = &r * nalgebra::DVector::from_column_slice(u.as_slice());
        for i in 0..n {
            prop_assert!((ru[i] - v.as_slice()[i]).abs() <= 1e-12);
        }
        let e = r.transpose() * &r - nalgebra::DMatrix::<f64>::identity(n, n);
        prop_assert!(e.amax() <= 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn reorientation_swaps_sides(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = OrientedHyperplane::new(unit(&mut rng, 3), rng.gen_range(-1.0..1.0));
        let g = h.reoriented();
        for _ in 0..50 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (a, b) = (halfspace_contains(&h, &p), halfspace_contains(&g, &p));
            match a {
                Membership::Inside => prop_assert_eq!(b, Membership::Outside),
                Membership::Outside => prop_assert_eq!(b, Membership::Inside),
                Membership::Boundary => prop_assert_eq!(b, Membership::Boundary),
            }
        }
    }

    #[test]
    fn projective_maps_keep_collinear_points_collinear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = OrientedHyperplane::new(unit(&mut rng, 2), rng.gen_range(2.0..4.0));
        let phi = geometry::projective_from_hyperplane(&h);
        let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dir: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pts: Vec<Vec<f64>> = [0.0, 0.4, 1.0]
            .iter()
            .map(|t| a.iter().zip(&dir).map(|(x, v)| x + t * v).collect())
            .collect();
        let img: Vec<Vector> = pts.iter().map(|p| geometry::apply_projective(&phi, p).unwrap()).collect();
        let (p, q, r) = (img[0].as_slice(), img[1].as_slice(), img[2].as_slice());
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        let cross = (u[0] * v[1] - u[1] * v[0]) / (geometry::norm(&u) * geometry::norm(&v)).max(1e-300);
        prop_assert!(cross.abs() <= 1e-9, "cross {cross}");
    }

    #[test]
    fn measure_additivity(seed in any::<u64>(), d in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = raw(&quick_instance(d, 1, 40, seed));
        let mu = &inst.masses[0];
        let r = random_region(&mut rng, d);
        let a = regions::region_measure(mu, &r, BoundaryRule::Half).unwrap();
        let b = regions::region_measure(mu, &complement(&r).unwrap(), BoundaryRule::Half).unwrap();
        prop_assert!((a + b - total_mass(mu)).abs() <= 1e-12, "{a} + {b}");
    }

    #[test]
    fn measure_additivity_with_smoothing(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(2, 1, 40, seed).unwrap();
        let mu = &inst.masses[0];
        let r = random_region(&mut rng, 2);
        let a = regions::region_measure(mu, &r, BoundaryRule::Half).unwrap();
        let b = regions::region_measure(mu, &complement(&r).unwrap(), BoundaryRule::Half).unwrap();
        prop_assert!((a + b - total_mass(mu)).abs() <= 1e-12);
    }

    #[test]
    fn fan_blocks_sum_to_zero(seed in any::<u64>(), k in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = quick_instance(3, 3, 30, seed);
        let frame = Frame2::orthonormalized(unit(&mut rng, 3).into(), unit(&mut rng, 3).into()).unwrap();
        let targets = vec![1.0 / k as f64; k];
        let r = fan_residual(&inst, &frame, &targets, Reference::Sum).unwrap();
        for b in 0..r.blocks.len() {
            let s: f64 = r.block(b).iter().sum();
            prop_assert!(s.abs() <= 1e-12, "block {b} sums to {s}");
        }
    }

    #[test]
    fn cone_residual_is_exactly_antipodal(seed in any::<u64>(), k in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = raw(&quick_instance(3, 4, 25, seed));
        let vecs: Vec<Vec<f64>> = (0..k).map(|_| unit(&mut rng, 3).into()).collect();
        let flag = OrientedFlag::orthonormalized(vecs).unwrap();
        let apex: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let f = cone_residual(&inst, &flag, &apex).unwrap();
        let flipped_apex: Vec<f64> = std::iter::once(-apex[0]).chain(apex[1..].iter().copied()).collect();
        let g = cone_residual(&inst, &flag.flipped(), &flipped_apex).unwrap();
        for (a, b) in f.components.iter().zip(&g.components) {
            prop_assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn dw_residual_sign_flips_are_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = raw(&quick_instance(3, 3, 30, seed));
        let fam: Vec<&MassDistribution> = inst.masses.iter().collect();
        let (h1, h2) = (unit(&mut rng, 3), unit(&mut rng, 3));
        let f = dw_residual(&fam, &h1, &h2);
        let a = dw_residual(&fam, &h1.neg(), &h2);
        let b = dw_residual(&fam, &h1, &h2.neg());
        for i in 0..f.len() {
            prop_assert_eq!(a.components[i], -f.components[i]);
            prop_assert_eq!(b.components[i], -f.components[i]);
        }
    }

    #[test]
    fn zk_shift_composes(v in prop::collection::vec(-1.0f64..1.0, 12), a in 0usize..4, b in 0usize..4) {
        let r = testmaps::ResidualVector::new(v, vec![4, 4, 4]).unwrap();
        let ab = zk_shift(&zk_shift(&r, a).unwrap(), b).unwrap();
        prop_assert_eq!(ab, zk_shift(&r, (a + b) % 4).unwrap());
        prop_assert_eq!(zk_shift(&r, 4).unwrap(), r);
    }

    #[test]
    fn complement_is_an_involution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_region(&mut rng, 3);
        let back = complement(&complement(&r).unwrap()).unwrap();
        match (&back, &r) {
            (Region::Cone(a), Region::Cone(b)) => {
                prop_assert_eq!(&a.axis, &b.axis);
                prop_assert!((a.alpha - b.alpha).abs() <= 1e-15);
            }
            _ => prop_assert_eq!(back, r),
        }
    }
}

#[test]
fn equivariance_over_a_hundred_configurations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for c in 0..100u64 {
        let inst = quick_instance(3, 3, 30, 1000 + c);
        let frame = Frame2::orthonormalized(unit(&mut rng, 3).into(), unit(&mut rng, 3).into()).unwrap();
        let k = 3 + (c as usize % 3);
        let targets = vec![1.0 / k as f64; k];
        let rep = testmaps::check_equivariance(&inst, &frame, &targets, Reference::Sum, 1e-8).unwrap();
        worst = worst.max(rep.max_deviation);
        assert!(rep.pass, "config {c}: deviation {}", rep.max_deviation);
    }
    assert!(worst <= 1e-8);
}

#[test]
fn fan_sectors_match_an_angle_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cuts = vec![0.3, 1.9, 2.2, 4.0];
    let fan = KFan::new(Frame2::standard(2), Vector::zeros(2), cuts.clone()).unwrap();
    let mut counts = [0usize; 4];
    let mut oracle = [0usize; 4];
    for _ in 0..1000 {
        let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let SectorIndex::Sector(j) = fan_sector_index(&fan, &p) else { panic!("random point on a cut") };
        counts[j - 1] += 1;
        let t = f64::atan2(p[1], p[0]).rem_euclid(TAU);
        let j = if t >= 0.3 && t < 1.9 {
            0
        } else if t >= 1.9 && t < 2.2 {
            1
        } else if t >= 2.2 && t < 4.0 {
            2
        } else {
            3
        };
        oracle[j] += 1;
    }
    assert_eq!(counts, oracle);
    assert_eq!(counts.iter().sum::<usize>(), 1000);
}

#[test]
fn right_angle_cone_is_a_halfplane() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let axis = unit(&mut rng, 2);
        let apex = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let cone = KCone::new(vec![UnitVector::axis(2, 0), UnitVector::axis(2, 1)], apex.clone(), axis.clone(), FRAC_PI_2)
            .unwrap();
        let h = OrientedHyperplane::new(axis.clone(), geometry::dot(axis.as_slice(), &apex));
        let comp = regions::complement_cone(&cone);
        for _ in 0..1000 {
            let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let a = cone_contains(&cone, &p);
            assert_eq!(a, halfspace_contains(&h, &p));
            if a != Membership::Boundary {
                assert_ne!(a, cone_contains(&comp, &p));
            }
        }
    }
}

#[test]
fn flipping_h2_negates_double_wedge_membership() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dw = DoubleWedge {
        h1: OrientedHyperplane::new(unit(&mut rng, 2), 0.2),
        h2: OrientedHyperplane::new(unit(&mut rng, 2), -0.1),
    };
    let comp = regions::complement_double_wedge(&dw);
    for _ in 0..1000 {
        let p = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let a = double_wedge_contains(&dw, &p);
        assert_ne!(a, Membership::Boundary);
        assert_ne!(a, double_wedge_contains(&comp, &p));
    }
}

#[test]
fn cone_and_dw_residuals_match_pointwise_counts() {
    let inst = raw(&quick_instance(3, 4, 40, 21));
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let flag = OrientedFlag::orthonormalized(vec![unit(&mut rng, 3).into(), unit(&mut rng, 3).into()]).unwrap();
        let apex = vec![rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
        let (r, cone) = testmaps::cone_residual_with_cone(&inst, &flag, &apex, 3).unwrap();
        for i in 0..3 {
            let oracle = signed_share(&inst.masses[i], |p| cone_contains(&cone, p));
            assert!((r.components[i] - oracle).abs() <= 1e-12);
        }
        let (h1, h2) = (unit(&mut rng, 3), unit(&mut rng, 3));
        let fam: Vec<&MassDistribution> = inst.masses.iter().collect();
        let dw = DoubleWedge {
            h1: OrientedHyperplane::through_origin(h1.clone()),
            h2: OrientedHyperplane::through_origin(h2.clone()),
        };
        let r = dw_residual(&fam, &h1, &h2);
        for (i, mu) in inst.masses.iter().enumerate() {
            let oracle = signed_share(mu, |p| double_wedge_contains(&dw, p));
            assert!((r.components[i] - oracle).abs() <= 1e-12);
        }
    }
}

#[test]
fn fan_residual_matches_direct_sector_measurement() {
    let inst = raw(&random_instance(2, 3, 60, 4).unwrap());
    let frame = Frame2::standard(2);
    let targets = [0.25, 0.25, 0.5];
    let (r, fan) = testmaps::fan_residual_at(&inst, &frame, &targets, Reference::Mass(0), 0.4).unwrap();
    for (b, mu) in inst.masses[1..].iter().enumerate() {
        let mut share = [0.0; 3];
        for (a, w) in mu.atoms.iter().zip(&mu.weights) {
            match fan_sector_index(&fan, a.as_slice()) {
                SectorIndex::Sector(j) => share[j - 1] += w,
                SectorIndex::Boundary => panic!("atom on a cut"),
            }
        }
        let tot = total_mass(mu);
        for j in 0..3 {
            assert!((r.block(b)[j] - (share[j] / tot - targets[j])).abs() <= 1e-12);
        }
    }
}

#[test]
fn identical_masses_give_a_zero_fan_residual() {
    let base = random_instance(2, 1, 30, 8).unwrap();
    let mut twin = base.masses[0].clone();
    twin.name = "twin".into();
    let inst = Instance::new(2, vec![base.masses[0].clone(), twin], None).unwrap();
    let r = fan_residual(&inst, &Frame2::standard(2), &[1.0 / 3.0; 3], Reference::Mass(0)).unwrap();
    assert!(r.norm_inf() <= 1e-10, "{}", r.norm_inf());
}

#[test]
fn bisecting_cone_matches_a_dense_alpha_grid() {
    let inst = random_instance(2, 1, 50, 31).unwrap();
    let mu = &inst.masses[0];
    let flag = OrientedFlag::orthonormalized(vec![vec![0.6, 0.8], vec![-0.8, 0.6]]).unwrap();
    let apex = [0.1, -0.05];
    let cone = regions::build_bisecting_cone(&flag, &apex, mu).unwrap();
    let tot = total_mass(mu);
    let measure = |alpha: f64| {
        let c = KCone { alpha, ..cone.clone() };
        regions::region_measure(mu, &Region::Cone(c), BoundaryRule::Half).unwrap() / tot
    };
    // Plateau of bisecting half-angles, located on a coarse grid and refined
    // by a fine grid inside the bracketing cells.
    let tol = 1e-10;
    let n = 20_000;
    let step = PI / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| measure(i as f64 * step)).collect();
    let first = grid.iter().position(|&m| m >= 0.5 - tol).unwrap();
    let last = grid.iter().rposition(|&m| m <= 0.5 + tol).unwrap();
    let refine = |cell_start: f64, pred: &dyn Fn(f64) -> bool| {
        (0..=n).map(|i| cell_start + step * i as f64 / n as f64).find(|&a| pred(a)).unwrap()
    };
    let lo = refine((first.max(1) - 1) as f64 * step, &|a| measure(a) >= 0.5 - tol);
    let hi = refine(last as f64 * step, &|a| measure(a) > 0.5 + tol);
    let mid = 0.5 * (lo + hi);
    assert!((cone.alpha - mid).abs() <= 1e-6, "{} vs plateau [{lo}, {hi}]", cone.alpha);
    assert!((measure(cone.alpha) - 0.5).abs() <= 1e-10);
}

#[test]
fn nested_cones_have_monotone_measure() {
    let inst = random_instance(2, 1, 80, 2).unwrap();
    let mu = &inst.masses[0];
    let basis = vec![UnitVector::axis(2, 0), UnitVector::axis(2, 1)];
    let mut last = -1.0;
    for i in 0..=60 {
        let alpha = PI * i as f64 / 60.0;
        let c = KCone::new(basis.clone(), vec![0.0, 0.0], UnitVector::axis(2, 0), alpha).unwrap();
        let m = regions::region_measure(mu, &Region::Cone(c), BoundaryRule::Half).unwrap();
        assert!(m >= last);
        last = m;
    }
}

#[test]
fn smoothing_error_is_bounded_by_nearby_atoms() {
    let inst = random_instance(2, 1, 60, 17).unwrap();
    let mu = &inst.masses[0];
    let fan = KFan::new(Frame2::standard(2), Vector::zeros(2), vec![0.2, 2.0, 4.1]).unwrap();
    for eps in [1e-1, 1e-2, 1e-3] {
        let smooth = regions::piece_measures_eps(mu, &Region::Fan(fan.clone()), eps);
        let exact = regions::piece_measures_eps(mu, &Region::Fan(fan.clone()), 0.0);
        let near: f64 = mu
            .atoms
            .iter()
            .zip(&mu.weights)
            .filter(|(a, _)| {
                let t = f64::atan2(a.as_slice()[1], a.as_slice()[0]);
                fan.cuts.iter().any(|c| {
                    let d = (t - c).rem_euclid(TAU);
                    d.min(TAU - d) <= eps
                })
            })
            .map(|(_, w)| w)
            .sum();
        for (s, e) in smooth.iter().zip(&exact) {
            assert!((s - e).abs() <= near + 1e-9, "eps {eps}: {s} vs {e}, near weight {near}");
        }
    }
}

#[test]
fn lifted_segment_lies_on_a_great_circle() {
    let a = [0.3, -1.2];
    let b = [2.5, 0.7];
    let (pa, pb) = (geometry::gnomonic_lift(&a), geometry::gnomonic_lift(&b));
    let n = {
        let (u, v) = (pa.as_slice(), pb.as_slice());
        let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        geometry::scaled(&c, 1.0 / geometry::norm(&c))
    };
    for i in 0..=100 {
        let t = i as f64 / 100.0;
        let q = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let p = geometry::gnomonic_lift(&q);
        assert!(geometry::dot(&n, p.as_slice()).abs() <= 1e-12);
    }
}

#[test]
fn far_hyperplanes_move_nearby_points_little() {
    let h = OrientedHyperplane::new(UnitVector::axis(2, 0), 1e6);
    let phi = geometry::projective_from_hyperplane(&h);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let p = [rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0)];
        let q = geometry::apply_projective(&phi, &p).unwrap();
        let disp = geometry::norm(&geometry::sub(q.as_slice(), &p)) / geometry::norm(&p);
        assert!(disp <= 1e-4, "displacement {disp}");
    }
}

#[test]
fn dw_fan_rotation_reproduces_its_lines() {
    let inst = random_instance(2, 1, 60, 13).unwrap();
    let mu = &inst.masses[0];
    let frame = Frame2::standard(2);
    let fan = regions::build_dw_fan(&frame, &Vector::zeros(2), mu, 3, 0.25).unwrap();
    let again = regions::build_dw_fan(&frame, &Vector::zeros(2), mu, 3, fan.lines[1]).unwrap();
    let norm = |x: f64| x.rem_euclid(PI);
    let mut a: Vec<f64> = fan.lines.iter().map(|&x| norm(x)).collect();
    let mut b: Vec<f64> = again.lines.iter().map(|&x| norm(x)).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    for (x, y) in a.iter().zip(&b) {
        let d = (x - y).abs();
        assert!(d.min(PI - d) <= 1e-9, "{a:?} vs {b:?}");
    }
    let pm = regions::piece_measures_eps(mu, &Region::DwFan(fan), mu.smoothing);
    for m in pm {
        assert!((m / total_mass(mu) - 1.0 / 3.0).abs() <= 1e-10);
    }
}
