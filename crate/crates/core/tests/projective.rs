use masspart::geometry::{self, OrientedHyperplane, UnitVector, Vector};
use masspart::masses::{make_projective_tight_instance, random_instance, Instance, MassDistribution};
use masspart::projective::{hs_after_transform, planted_hs_instance, side_counts, stripes, verify_partition};
use masspart::regions::Region;
use masspart::solvers::{SolverConfig, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn symmetric_masses(seed: u64, m: usize, n: usize) -> Vec<MassDistribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|i| {
            let mut atoms = Vec::new();
            for _ in 0..n {
                let p = [rng.gen_range(0.05..1.0), rng.gen_range(-1.0..1.0)];
                atoms.push(Vector::from(vec![p[0], p[1]]));
                atoms.push(Vector::from(vec![-p[0], -p[1]]));
            }
            MassDistribution::unit_weights(format!("s{i}"), atoms).unwrap()
        })
        .collect()
}

#[test]
fn verify_partition_accepts_exact_bisections_and_rejects_shifted_ones() {
    let masses = symmetric_masses(3, 3, 15);
    let plane = OrientedHyperplane::through_origin(UnitVector::axis(2, 0));
    let check = verify_partition(&masses, &Region::Halfspace { plane: plane.clone() }, &[0.5, 0.5], 1e-12).unwrap();
    assert!(check.pass, "{}", check.max_deviation);
    for c in &check.side_counts {
        assert!(c.is_bisection(), "{c:?}");
    }
    let shifted = OrientedHyperplane::new(UnitVector::axis(2, 0), 0.1);
    let check = verify_partition(&masses, &Region::Halfspace { plane: shifted }, &[0.5, 0.5], 1e-12).unwrap();
    assert!(!check.pass);
    assert!(verify_partition(&masses, &Region::Halfspace { plane }, &[1.0], 1e-12).is_err());
}

#[test]
fn reorienting_a_cut_swaps_its_side_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let plane = OrientedHyperplane::new(UnitVector::normalized(vec![0.3, -0.8]).unwrap(), 0.1);
    let a = side_counts(&pts, &plane);
    let b = side_counts(&pts, &plane.reoriented());
    assert_eq!((a.positive, a.negative, a.on), (b.negative, b.positive, b.on));
    assert_eq!(a.positive + a.negative + a.on, pts.len());
}

#[test]
fn planted_instances_are_cut_exactly() {
    let cfg = SolverConfig::default();
    for seed in 0..3 {
        let inst = planted_hs_instance(2, seed).unwrap();
        let r = hs_after_transform(&inst, &cfg).unwrap();
        assert_eq!(r.status, Status::Found, "seed {seed}: {}", r.message);
        assert!(r.exact_flags.iter().all(|&f| f), "seed {seed}");
        let t = r.transform.as_ref().unwrap();
        let families = inst.families.as_ref().unwrap();
        for (f, (cut, members)) in r.cuts.iter().zip(families).enumerate() {
            for (s, &i) in members.iter().enumerate() {
                let moved: Vec<Vec<f64>> = inst.masses[i]
                    .atoms
                    .iter()
                    .map(|a| geometry::apply_projective(t, a.as_slice()).unwrap().as_slice().to_vec())
                    .collect();
                let c = side_counts(&moved, cut);
                assert!(c.is_bisection(), "seed {seed} family {f} set {s}: {c:?}");
                assert_eq!(c, r.side_counts[f][s]);
            }
        }
    }
}

#[test]
fn tight_instances_have_no_projective_bisection() {
    let inst = make_projective_tight_instance(2, 3).unwrap();
    let r = hs_after_transform(&inst, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::NotFound, "{}", r.message);
}

#[test]
fn stripes_agree_with_a_direct_count_of_transformed_atoms() {
    let inst: Instance = random_instance(2, 2, 31, 4).unwrap();
    let k = 3;
    let r = stripes(&inst, k, &SolverConfig::default()).unwrap();
    assert_eq!(r.status, Status::Found, "{}", r.message);
    assert!(r.max_normal_deviation <= 1e-9);
    let slabs = r.slabs.as_ref().unwrap();
    let t = r.transform.as_ref().unwrap();
    for (i, mu) in inst.masses.iter().enumerate() {
        let mut counts = vec![0.0; k];
        for a in &mu.atoms {
            let p = geometry::apply_projective(t, a.as_slice()).unwrap();
            let s = geometry::dot(slabs.normal.as_slice(), p.as_slice());
            match slabs.offsets.iter().position(|&o| (s - o).abs() <= 1e-12) {
                Some(j) => {
                    counts[j] += 0.5;
                    counts[j + 1] += 0.5;
                }
                None => counts[slabs.offsets.partition_point(|&o| o < s)] += 1.0,
            }
        }
        for j in 0..k {
            let direct = counts[j] / mu.len() as f64;
            assert!((direct - r.fractions_raw[i][j]).abs() <= 1e-9, "mass {i} slab {j}");
            assert!((r.fractions[i][j] - 1.0 / k as f64).abs() <= 1e-5, "mass {i} slab {j}: {}", r.fractions[i][j]);
        }
    }
}
