//! Ham-Sandwich cuts and parallel-hyperplane partitions after a projective
//! transformation, built from double-wedge solutions.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, OrientedHyperplane, ProjectiveMap, Side, UnitVector, Vector};
use crate::masses::{self, breaks_general_position, total_mass, Instance, MassDistribution};
use crate::regions::{self, DwFan, Region, SlabPartition};
use crate::solvers::{self, SolveReport, SolverConfig, Status};
use crate::testmaps::{dw_residual, ConfigPoint};

/// Largest ε-residual accepted when no exact bisection exists.
pub const HS_EPS_RESIDUAL: f64 = 1e-4;
/// Points handled by the exact arrangement search.
const MAX_EXACT_POINTS: usize = 128;
/// Tolerance of the general-position check on the union of point sets.
const GENERAL_POSITION_TOL: f64 = 1e-12;
/// Points per set in the generated instances.
pub const POINTS_PER_SET: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCount {
    pub positive: usize,
    pub negative: usize,
    pub on: usize,
}

impl SideCount {
    pub fn is_bisection(&self) -> bool {
        self.on == 0 && self.positive == self.negative
    }
}

/// Side counts of `points` relative to `plane`.
pub fn side_counts<P: AsRef<[f64]>>(points: &[P], plane: &OrientedHyperplane) -> SideCount {
    let mut c = SideCount::default();
    for p in points {
        match plane.side(p.as_ref()) {
            Side::Positive => c.positive += 1,
            Side::Negative => c.negative += 1,
            Side::On => c.on += 1,
        }
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsAfterTransformResult {
    pub status: Status,
    pub message: String,
    /// Sends the shared hyperplane `h1` to infinity.
    pub transform: Option<ProjectiveMap>,
    /// One cut per family, in the transformed coordinates.
    pub cuts: Vec<OrientedHyperplane>,
    /// Smoothed double-wedge residual of each family at the reported pair.
    pub per_family_residuals: Vec<f64>,
    pub exact_flags: Vec<bool>,
    /// Per family, per point set: transformed points on each side of the cut.
    pub side_counts: Vec<Vec<SideCount>>,
    pub lifted_h1: Option<UnitVector>,
    pub lifted_h2: Vec<UnitVector>,
    pub evaluations: u64,
}

/// Sign pattern of a cell of the arrangement cut out on the sphere by the
/// lifted points, with the sum of its (unit) vertices.
struct Cell {
    mask: u128,
    vertex_sum: Vec<f64>,
    witness: Vec<f64>,
}

impl Cell {
    fn center(&self, lifted: &[Vec<f64>]) -> Vec<f64> {
        let mut c = self.vertex_sum.clone();
        if geometry::normalize_in_place(&mut c) > 0.0 && sign_mask(&c, lifted) == Some(self.mask) {
            c
        } else {
            self.witness.clone()
        }
    }
}

/// Bit `i` set iff `n·p_i > 0`; `None` if some point lies on the plane.
fn sign_mask(n: &[f64], lifted: &[Vec<f64>]) -> Option<u128> {
    let mut m = 0u128;
    for (i, p) in lifted.iter().enumerate() {
        let s = geometry::dot(n, p);
        if s.abs() <= 1e-14 {
            return None;
        }
        if s > 0.0 {
            m |= 1 << i;
        }
    }
    Some(m)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Unit normal of the hyperplane through the origin spanned by the rows.
fn null_vector(rows: &[&[f64]]) -> Option<Vec<f64>> {
    let d = rows.len();
    let n = d + 1;
    let mut v = vec![0.0; n];
    for (i, vi) in v.iter_mut().enumerate() {
        let minor = DMatrix::from_fn(d, d, |r, c| rows[r][if c < i { c } else { c + 1 }]);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        *vi = sign * minor.determinant();
    }
    (geometry::normalize_in_place(&mut v) > 1e-14).then_some(v)
}

/// Every cell of the arrangement of the planes `p^⊥`, up to antipodes
/// (canonical masks have bit 0 set). Each vertex of the arrangement lies on
/// `d` of the planes; offsetting it along the dual basis of those points
/// reaches every cell around it.
fn arrangement_cells(lifted: &[Vec<f64>]) -> Vec<Cell> {
    let n = lifted.len();
    let d = lifted[0].len() - 1;
    let full: u128 = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let mut cells: BTreeMap<u128, Cell> = BTreeMap::new();
    for s in subsets(n, d) {
        let rows: Vec<&[f64]> = s.iter().map(|&i| lifted[i].as_slice()).collect();
        let Some(nv) = null_vector(&rows) else { continue };
        let p = DMatrix::from_fn(d, d + 1, |r, c| rows[r][c]);
        let Some(gram_inv) = (&p * p.transpose()).try_inverse() else { continue };
        let dual = p.transpose() * gram_inv;
        let mut base = 0u128;
        let mut clearance = f64::INFINITY;
        let mut degenerate = false;
        for (j, q) in lifted.iter().enumerate() {
            if s.contains(&j) {
                continue;
            }
            let v = geometry::dot(&nv, q);
            if v.abs() <= 1e-12 {
                degenerate = true;
                break;
            }
            clearance = clearance.min(v.abs());
            if v > 0.0 {
                base |= 1 << j;
            }
        }
        if degenerate {
            continue;
        }
        for signs in 0..(1usize << d) {
            let mut off = vec![0.0; d + 1];
            let mut mask = base;
            for (i, &si) in s.iter().enumerate() {
                let sigma = if signs >> i & 1 == 1 { 1.0 } else { -1.0 };
                if sigma > 0.0 {
                    mask |= 1 << si;
                }
                for (r, o) in off.iter_mut().enumerate() {
                    *o += sigma * dual[(r, i)];
                }
            }
            let reach = lifted
                .iter()
                .enumerate()
                .filter(|(j, _)| !s.contains(j))
                .map(|(_, q)| geometry::dot(&off, q).abs())
                .fold(1e-300, f64::max);
            let t = 0.5 * clearance / reach;
            let (mask, orient) = if mask & 1 == 1 { (mask, 1.0) } else { (!mask & full, -1.0) };
            let mut w: Vec<f64> = nv.iter().zip(&off).map(|(a, b)| orient * (a + t * b)).collect();
            geometry::normalize_in_place(&mut w);
            let cell = cells.entry(mask).or_insert_with(|| Cell { mask, vertex_sum: vec![0.0; d + 1], witness: w });
            geometry::axpy(&mut cell.vertex_sum, orient, &nv);
        }
    }
    cells.into_values().collect()
}

/// Bitmask and half-size of every point set, grouped by family.
struct SetMasks {
    families: Vec<Vec<(u128, u32)>>,
}

impl SetMasks {
    fn bisects(&self, f: usize, a: u128, b: u128, full: u128) -> bool {
        let d = !(a ^ b) & full;
        self.families[f].iter().all(|&(m, half)| (d & m).count_ones() == half)
    }
}

/// Canonical pair `(h1, h2 per family)` of arrangement cells whose double
/// wedges bisect every set exactly, preferring the pair nearest `reference`
/// (or, without one, the pair with the largest clearance from the points).
fn exact_pair(
    lifted: &[Vec<f64>],
    sets: &SetMasks,
    reference: Option<(&[f64], &[Vec<f64>])>,
) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = lifted.len();
    let full: u128 = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
    let cells = arrangement_cells(lifted);
    let centers: Vec<Vec<f64>> = cells.iter().map(|c| c.center(lifted)).collect();
    let unit: Vec<Vec<f64>> = lifted.iter().map(|p| geometry::scaled(p, 1.0 / geometry::norm(p))).collect();
    let margin = |c: &[f64]| unit.iter().map(|p| geometry::dot(c, p).abs()).fold(f64::INFINITY, f64::min);
    let margins: Vec<f64> = centers.iter().map(|c| margin(c)).collect();
    let closeness = |c: &[f64], r: &[f64]| geometry::dot(c, r).abs();

    let nf = sets.families.len();
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for (i, a) in cells.iter().enumerate() {
        let mut total = match reference {
            Some((r1, _)) => closeness(&centers[i], r1),
            None => margins[i],
        };
        let mut picks = Vec::with_capacity(nf);
        for f in 0..nf {
            let mut pick: Option<(f64, usize)> = None;
            for (j, b) in cells.iter().enumerate() {
                if !sets.bisects(f, a.mask, b.mask, full) {
                    continue;
                }
                let s = match reference {
                    Some((_, r2)) => closeness(&centers[j], &r2[f]),
                    None => margins[j],
                };
                if pick.map_or(true, |(v, _)| s > v) {
                    pick = Some((s, j));
                }
            }
            match pick {
                Some((s, j)) => {
                    total += s;
                    picks.push(j);
                }
                None => break,
            }
        }
        if picks.len() == nf && best.as_ref().map_or(true, |(v, _, _)| total > *v) {
            best = Some((total, i, picks));
        }
    }
    best.map(|(_, i, picks)| (centers[i].clone(), picks.into_iter().map(|j| centers[j].clone()).collect()))
}

fn family_indices(inst: &Instance) -> Vec<Vec<usize>> {
    inst.families.clone().unwrap_or_else(|| vec![(0..inst.num_masses()).collect()])
}

/// Projective Ham-Sandwich cuts: a transformation `φ` and one hyperplane per
/// family that simultaneously bisects every point set of that family after
/// `φ` is applied.
///
/// A shared-`h1` double-wedge search on the lifted points gives an
/// ε-bisection; an exhaustive search over the cells of the point arrangement
/// then looks for an exact combinatorial bisection near it, which exists
/// whenever the sets have even sizes and a solution exists at all.
pub fn hs_after_transform(inst: &Instance, cfg: &SolverConfig) -> Result<HsAfterTransformResult> {
    cfg.validate()?;
    let d = inst.dimension;
    let families = family_indices(inst);
    let points: Vec<Vec<f64>> = inst.all_atoms().map(|a| a.as_slice().to_vec()).collect();
    masses::check_general_position(&points, GENERAL_POSITION_TOL)?;
    if points.len() > MAX_EXACT_POINTS {
        return Err(Error::InvalidInput(format!(
            "{} points exceed the {MAX_EXACT_POINTS} handled by the exact search",
            points.len()
        )));
    }
    let lifted: Vec<Vec<f64>> = points.iter().map(|p| geometry::gnomonic_lift(p).into()).collect();

    let mut offsets = Vec::with_capacity(inst.num_masses());
    let mut o = 0usize;
    for mu in &inst.masses {
        offsets.push(o);
        o += mu.len();
    }
    let set_mask = |i: usize| -> u128 { (offsets[i]..offsets[i] + inst.masses[i].len()).fold(0u128, |m, b| m | 1 << b) };
    let even = inst.masses.iter().all(|mu| mu.len() % 2 == 0);
    let sets = SetMasks {
        families: families
            .iter()
            .map(|fam| fam.iter().map(|&i| (set_mask(i), (inst.masses[i].len() / 2) as u32)).collect())
            .collect(),
    };

    let shared = solvers::solve_shared_h1(inst, cfg, HS_EPS_RESIDUAL)?;
    let mut message = String::new();
    let smooth: Option<(Vec<f64>, Vec<Vec<f64>>)> = match (&shared.config_point, d % 2 == 0) {
        (Some(ConfigPoint::SharedPair { h1, h2 }), true) => {
            Some((h1.as_slice().to_vec(), h2.iter().map(|h| h.as_slice().to_vec()).collect()))
        }
        _ => None,
    };
    if shared.status == Status::ExceedsDeskScale {
        message = format!("{}; exact search only", shared.message);
    }
    let reference = smooth.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()));
    let exact = if even { exact_pair(&lifted, &sets, reference) } else { None };

    let (n1, n2s, status) = match (exact, smooth) {
        (Some((a, b)), _) => (a, b, Status::Found),
        (None, Some((a, b))) if shared.is_found() => {
            message = "no exact bisection found; reporting the ε-bisection".into();
            (a, b, Status::Found)
        }
        (None, smooth) => {
            let msg = if even { "no exact bisection exists for these point sets" } else { "odd set sizes" };
            let mut r = HsAfterTransformResult {
                status: Status::NotFound,
                message: msg.into(),
                transform: None,
                cuts: Vec::new(),
                per_family_residuals: shared.family_residuals.clone(),
                exact_flags: vec![false; families.len()],
                side_counts: Vec::new(),
                lifted_h1: None,
                lifted_h2: Vec::new(),
                evaluations: shared.evaluations,
            };
            if let Some((a, b)) = smooth {
                r.lifted_h1 = Some(UnitVector::from_unit_unchecked(a));
                r.lifted_h2 = b.into_iter().map(UnitVector::from_unit_unchecked).collect();
            }
            return Ok(r);
        }
    };

    let transform = geometry::projective_from_lifted_normal(&n1);
    let pole_up = n1[d] >= 0.0;
    let h1 = UnitVector::from_unit_unchecked(n1.clone());
    let mut cuts = Vec::with_capacity(families.len());
    let mut counts = Vec::with_capacity(families.len());
    let mut flags = Vec::with_capacity(families.len());
    let mut residuals = Vec::with_capacity(families.len());
    let lifted_masses: Vec<MassDistribution> = inst.masses.iter().map(MassDistribution::lifted).collect();
    for (f, fam) in families.iter().enumerate() {
        let image = transform.apply_to_lifted_normal(&n2s[f]);
        let Some(cut) = OrientedHyperplane::from_lifted_normal(&image) else {
            return Err(Error::InvalidInput("cut coincides with the hyperplane sent to infinity".into()));
        };
        let cut = if pole_up { cut } else { cut.reoriented() };
        let mut fam_counts = Vec::with_capacity(fam.len());
        for &i in fam {
            let moved: Vec<Vector> = inst.masses[i]
                .atoms
                .iter()
                .map(|a| geometry::apply_projective(&transform, a.as_slice()))
                .collect::<Result<_>>()?;
            fam_counts.push(side_counts(&moved, &cut));
        }
        flags.push(fam_counts.iter().all(SideCount::is_bisection));
        let ms: Vec<&MassDistribution> = fam.iter().map(|&i| &lifted_masses[i]).collect();
        let h2 = UnitVector::from_unit_unchecked(n2s[f].clone());
        residuals.push(dw_residual(&ms, &h1, &h2).norm_inf());
        counts.push(fam_counts);
        cuts.push(cut);
    }
    Ok(HsAfterTransformResult {
        status,
        message,
        transform: Some(transform),
        cuts,
        per_family_residuals: residuals,
        exact_flags: flags,
        side_counts: counts,
        lifted_h1: Some(h1),
        lifted_h2: n2s.into_iter().map(UnitVector::from_unit_unchecked).collect(),
        evaluations: shared.evaluations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripesResult {
    pub status: Status,
    pub message: String,
    /// Sends the chosen line of the double-wedge fan to infinity.
    pub transform: Option<ProjectiveMap>,
    pub slabs: Option<SlabPartition>,
    /// `fractions[i][j]`: smoothed share of mass `i` in slab `j`.
    pub fractions: Vec<Vec<f64>>,
    /// The same shares from the transformed atoms under the half rule.
    pub fractions_raw: Vec<Vec<f64>>,
    /// Largest distance between aligned unit normals of the output hyperplanes.
    pub max_normal_deviation: f64,
    /// Index of the fan line sent to infinity.
    pub line_at_infinity: Option<usize>,
    /// Slab holding each double wedge of the fan.
    pub slab_of_wedge: Vec<usize>,
    pub search: SolveReport,
}

fn dw_fan_of(region: &Region) -> Option<&DwFan> {
    match region {
        Region::Lifted { inner } => match inner.as_ref() {
            Region::DwFan(f) => Some(f),
            _ => None,
        },
        _ => None,
    }
}

/// Lifted normal of line `l` of a fan through the origin.
fn line_normal(fan: &DwFan, l: f64) -> Vec<f64> {
    let (s, c) = l.sin_cos();
    let mut n = geometry::scaled(fan.frame.x.as_slice(), -s);
    geometry::axpy(&mut n, c, fan.frame.y.as_slice());
    n
}

/// Equipartition of every mass into `k` parallel slabs after a projective
/// transformation: a fan of `k` double wedges equipartitioning all masses is
/// found on the lifted instance, and its line with the largest clearance
/// from the atoms is sent to infinity, which makes the other lines parallel.
pub fn stripes(inst: &Instance, k: usize, cfg: &SolverConfig) -> Result<StripesResult> {
    let search = solvers::solve_dw_fan(inst, k, cfg)?;
    let mut out = StripesResult {
        status: search.status,
        message: search.message.clone(),
        transform: None,
        slabs: None,
        fractions: Vec::new(),
        fractions_raw: Vec::new(),
        max_normal_deviation: 0.0,
        line_at_infinity: None,
        slab_of_wedge: Vec::new(),
        search: search.clone(),
    };
    let Some(region) = search.lifted_solution.first() else {
        return Ok(out);
    };
    let Some(fan) = dw_fan_of(region) else {
        return Err(Error::InvalidInput("search did not return a double-wedge fan".into()));
    };
    if k < 2 {
        return Err(Error::InvalidInput("stripes need k ≥ 2".into()));
    }
    let d = inst.dimension;
    let lifted_atoms: Vec<Vec<f64>> = inst.all_atoms().map(|a| geometry::gnomonic_lift(a.as_slice()).into()).collect();
    let normals: Vec<Vec<f64>> = fan.lines.iter().map(|&l| line_normal(fan, l)).collect();
    let clearance: Vec<f64> = normals
        .iter()
        .map(|n| lifted_atoms.iter().map(|p| geometry::dot(n, p).abs()).fold(f64::INFINITY, f64::min))
        .collect();
    let i = (0..k).fold(0, |b, j| if clearance[j] > clearance[b] { j } else { b });
    if !(clearance[i] > 1e-12) {
        out.status = Status::NotFound;
        out.message = "every line of the fan carries an atom".into();
        return Ok(out);
    }
    let transform = geometry::projective_from_lifted_normal(&normals[i]);
    let r = transform.matrix();

    let mut planes: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k - 1);
    for j in (1..k).map(|s| (i + s) % k) {
        let m: Vec<f64> = (r * nalgebra::DVector::from_column_slice(&normals[j])).iter().copied().collect();
        let h = geometry::norm(&m[..d]);
        planes.push((geometry::scaled(&m[..d], 1.0 / h), -m[d] / h));
    }
    let reference = planes[0].0.clone();
    let mut deviation: f64 = 0.0;
    for (n, o) in planes.iter_mut() {
        if geometry::dot(n, &reference) < 0.0 {
            *n = geometry::scaled(n, -1.0);
            *o = -*o;
        }
        deviation = deviation.max(geometry::norm(&geometry::sub(n, &reference)));
    }
    let mut offsets: Vec<f64> = planes.iter().map(|p| p.1).collect();
    offsets.sort_by(f64::total_cmp);
    let slabs = SlabPartition::new(UnitVector::normalized(reference.clone())?, offsets.clone())?;

    let mut slab_of_wedge = Vec::with_capacity(k);
    for j in 0..k {
        let next = if j + 1 < k { fan.lines[j + 1] } else { fan.lines[0] + std::f64::consts::PI };
        let u = fan.frame.direction(0.5 * (fan.lines[j] + next));
        let v: Vec<f64> = (r * nalgebra::DVector::from_column_slice(&u)).iter().copied().collect();
        let t = geometry::dot(&reference, &v[..d]) / v[d];
        slab_of_wedge.push(offsets.partition_point(|&o| o < t));
    }
    let mut seen = slab_of_wedge.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != k {
        return Err(Error::InvalidInput("double wedges do not map onto distinct slabs".into()));
    }

    let slab_region = Region::Slabs(slabs.clone());
    for mu in &inst.masses {
        let tot = total_mass(mu);
        let pm = regions::piece_measures_eps(mu, region, mu.smoothing);
        let mut row = vec![0.0; k];
        for (j, &s) in slab_of_wedge.iter().enumerate() {
            row[s] = pm[j] / tot;
        }
        out.fractions.push(row);
        let moved: Vec<Vector> =
            mu.atoms.iter().map(|a| geometry::apply_projective(&transform, a.as_slice())).collect::<Result<_>>()?;
        let image = MassDistribution::new(mu.name.clone(), moved, mu.weights.clone(), 0.0)?;
        out.fractions_raw.push(regions::piece_measures_eps(&image, &slab_region, 0.0).iter().map(|m| m / tot).collect());
    }
    out.transform = Some(transform);
    out.slabs = Some(slabs);
    out.max_normal_deviation = deviation;
    out.line_at_infinity = Some(i);
    out.slab_of_wedge = slab_of_wedge;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionCheck {
    /// `fractions[i][j]`: share of mass `i` in piece `j`, under each mass's
    /// own smoothing.
    pub fractions: Vec<Vec<f64>>,
    pub max_deviation: f64,
    pub pass: bool,
    /// Exact side counts per mass when the region is a halfspace.
    pub side_counts: Vec<SideCount>,
}

/// Re-measures `region` against `targets` for every mass.
pub fn verify_partition(masses: &[MassDistribution], region: &Region, targets: &[f64], tol: f64) -> Result<PartitionCheck> {
    if targets.len() != region.pieces() {
        return Err(Error::InvalidInput(format!("{} targets for {} pieces", targets.len(), region.pieces())));
    }
    let mut fractions = Vec::with_capacity(masses.len());
    let mut max_deviation: f64 = 0.0;
    let mut counts = Vec::new();
    for mu in masses {
        if mu.dim() != region.dim() {
            return Err(Error::DimensionMismatch { expected: region.dim(), found: mu.dim() });
        }
        let tot = total_mass(mu);
        let row: Vec<f64> = regions::piece_measures_eps(mu, region, mu.smoothing).iter().map(|m| m / tot).collect();
        for (a, t) in row.iter().zip(targets) {
            max_deviation = max_deviation.max((a - t).abs());
        }
        fractions.push(row);
        if let Region::Halfspace { plane } = region {
            counts.push(side_counts(&mu.atoms, plane));
        }
    }
    Ok(PartitionCheck { fractions, max_deviation, pass: max_deviation <= tol, side_counts: counts })
}

fn random_plane<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let n: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let len = geometry::norm(&n);
        if len < 0.1 || len > 1.0 {
            continue;
        }
        let c: Vec<f64> = (0..d).map(|_| 0.2 + 0.6 * rng.gen::<f64>()).collect();
        let mut lifted = geometry::scaled(&n, 1.0 / len);
        let off = geometry::dot(&lifted, &c);
        lifted.push(-off);
        geometry::normalize_in_place(&mut lifted);
        return lifted;
    }
}

fn hs_families(d: usize) -> Vec<Vec<usize>> {
    (0..d).map(|f| (f * (d + 1)..(f + 1) * (d + 1)).collect()).collect()
}

/// `d` families of `d+1` sets of [`POINTS_PER_SET`] points drawn uniformly
/// from the unit cube, in general position.
pub fn random_hs_instance(d: usize, seed: u64) -> Result<Instance> {
    hs_instance(d, seed, None)
}

/// Like [`random_hs_instance`], but every set has half its points inside a
/// hidden double wedge `(h1, h2^f)` of its family, so an exact projective
/// bisection is known to exist. Points keep a clearance of `1e-3` from the
/// hidden planes.
pub fn planted_hs_instance(d: usize, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let h1 = random_plane(&mut rng, d);
    let h2: Vec<Vec<f64>> = (0..d).map(|_| random_plane(&mut rng, d)).collect();
    hs_instance(d, seed, Some((h1, h2)))
}

fn hs_instance(d: usize, seed: u64, hidden: Option<(Vec<f64>, Vec<Vec<f64>>)>) -> Result<Instance> {
    if d == 0 {
        return Err(Error::InvalidInput("d must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<Vec<f64>> = Vec::new();
    let mut sets = Vec::with_capacity(d * (d + 1));
    for f in 0..d {
        for s in 0..=d {
            let mut atoms = Vec::with_capacity(POINTS_PER_SET);
            let (mut inside, mut outside) = (0, 0);
            let mut attempts = 0usize;
            while atoms.len() < POINTS_PER_SET {
                attempts += 1;
                if attempts > 1_000_000 {
                    return Err(Error::InvalidInput("could not sample a planted point set".into()));
                }
                let p: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
                if let Some((h1, h2)) = &hidden {
                    let up: Vec<f64> = geometry::gnomonic_lift(&p).into();
                    let (a, b) = (geometry::dot(h1, &up), geometry::dot(&h2[f], &up));
                    if a.abs() < 1e-3 || b.abs() < 1e-3 {
                        continue;
                    }
                    let half = POINTS_PER_SET / 2;
                    if a * b > 0.0 && inside == half || a * b < 0.0 && outside == half {
                        continue;
                    }
                    if breaks_general_position(&all, &p, 1e-9) {
                        continue;
                    }
                    if a * b > 0.0 {
                        inside += 1;
                    } else {
                        outside += 1;
                    }
                } else if breaks_general_position(&all, &p, 1e-9) {
                    continue;
                }
                all.push(p.clone());
                atoms.push(Vector::from(p));
            }
            sets.push(MassDistribution::unit_weights(format!("F{}S{}", f + 1, s + 1), atoms)?);
        }
    }
    Instance::new(d, sets, Some(hs_families(d)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrangement_of_three_points_has_seven_cell_pairs() {
        // three great circles in general position cut S^2 into 8 cells
        let pts = [[0.1, 0.2], [0.9, 0.3], [0.4, 0.8]];
        let lifted: Vec<Vec<f64>> = pts.iter().map(|p| geometry::gnomonic_lift(p).into()).collect();
        let cells = arrangement_cells(&lifted);
        assert_eq!(cells.len(), 4);
        for c in &cells {
            assert_eq!(sign_mask(&c.center(&lifted), &lifted), Some(c.mask));
        }
    }

    #[test]
    fn side_counts_of_a_line() {
        let plane = OrientedHyperplane::new(UnitVector::axis(2, 0), 0.5);
        let c = side_counts(&[[0.0, 0.0], [1.0, 3.0], [0.5, 2.0], [2.0, -1.0]], &plane);
        assert_eq!(c, SideCount { positive: 2, negative: 1, on: 1 });
    }
}
