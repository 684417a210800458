//! Weighted-atom mass distributions, instance generators and instance files.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Vector};

/// Default angular smoothing radius (radians).
pub const DEFAULT_SMOOTHING: f64 = 1e-3;
/// Radius of the "point-like" atom clusters in the constructed instances.
pub const CLUSTER_RADIUS: f64 = 1e-3;

/// How atoms lying on a region boundary are counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryRule {
    /// Boundary atoms contribute half their weight.
    #[default]
    Half,
    /// Boundary atoms are an error.
    Strict,
}

/// A finite weighted point measure with an angular smoothing radius.
#[derive(Clone, Debug, PartialEq)]
pub struct MassDistribution {
    pub name: String,
    pub atoms: Vec<Vector>,
    pub weights: Vec<f64>,
    /// Angular smoothing radius `ε` in radians; zero disables smoothing.
    pub smoothing: f64,
}

impl MassDistribution {
    pub fn new(name: impl Into<String>, atoms: Vec<Vector>, weights: Vec<f64>, smoothing: f64) -> Result<Self> {
        let m = Self { name: name.into(), atoms, weights, smoothing };
        m.validate()?;
        Ok(m)
    }

    /// Unit-weight atoms with the default smoothing.
    pub fn unit_weights(name: impl Into<String>, atoms: Vec<Vector>) -> Result<Self> {
        let w = vec![1.0; atoms.len()];
        Self::new(name, atoms, w, DEFAULT_SMOOTHING)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::InvalidInput(format!("mass {:?} has no atoms", self.name)));
        }
        if self.atoms.len() != self.weights.len() {
            return Err(Error::InvalidInput(format!(
                "mass {:?} has {} atoms but {} weights",
                self.name,
                self.atoms.len(),
                self.weights.len()
            )));
        }
        let d = self.atoms[0].dim();
        for a in &self.atoms {
            if a.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: a.dim() });
            }
            if a.coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput(format!("mass {:?} has a non-finite atom", self.name)));
            }
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!("mass {:?} has a non-positive weight", self.name)));
        }
        if !(self.smoothing >= 0.0 && self.smoothing < std::f64::consts::PI) {
            return Err(Error::InvalidInput(format!("mass {:?} has smoothing outside [0, π)", self.name)));
        }
        if !total_mass(self).is_finite() {
            return Err(Error::InvalidInput(format!("mass {:?} has infinite total", self.name)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Same atoms, smoothing replaced.
    pub fn with_smoothing(&self, smoothing: f64) -> Self {
        Self { smoothing, ..self.clone() }
    }

    /// Atoms mapped to the upper hemisphere of `S^d` by the inverse gnomonic
    /// projection.
    pub fn lifted(&self) -> MassDistribution {
        Self {
            name: self.name.clone(),
            atoms: self.atoms.iter().map(|a| geometry::gnomonic_lift(a.as_slice()).to_vector()).collect(),
            weights: self.weights.clone(),
            smoothing: self.smoothing,
        }
    }

    /// Sum of several masses (atoms concatenated, each keeping its smoothing
    /// through [`SmoothedAtom`] views).
    pub fn concat(name: impl Into<String>, parts: &[&MassDistribution]) -> MassDistribution {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        let mut smoothing: f64 = 0.0;
        for p in parts {
            atoms.extend(p.atoms.iter().cloned());
            weights.extend(p.weights.iter().copied());
            smoothing = smoothing.max(p.smoothing);
        }
        MassDistribution { name: name.into(), atoms, weights, smoothing }
    }
}

/// `μ(R^d)`: the sum of the weights.
pub fn total_mass(mu: &MassDistribution) -> f64 {
    mu.weights.iter().sum()
}

/// An ordered collection of named masses in a common dimension, optionally
/// grouped into families.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub dimension: usize,
    pub masses: Vec<MassDistribution>,
    pub families: Option<Vec<Vec<usize>>>,
}

impl Instance {
    pub fn new(dimension: usize, masses: Vec<MassDistribution>, families: Option<Vec<Vec<usize>>>) -> Result<Self> {
        let inst = Self { dimension, masses, families };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if self.masses.is_empty() {
            return Err(Error::InvalidInput("instance has no masses".into()));
        }
        for m in &self.masses {
            m.validate()?;
            if m.dim() != self.dimension {
                return Err(Error::DimensionMismatch { expected: self.dimension, found: m.dim() });
            }
        }
        if let Some(fams) = &self.families {
            let mut seen = vec![false; self.masses.len()];
            for f in fams {
                for &i in f {
                    if i >= self.masses.len() || seen[i] {
                        return Err(Error::InvalidInput(format!(
                            "families must partition the masses disjointly (index {i})"
                        )));
                    }
                    seen[i] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::InvalidInput("families must cover every mass".into()));
            }
        }
        Ok(())
    }

    pub fn num_masses(&self) -> usize {
        self.masses.len()
    }

    /// Each family as a list of masses; one family per mass when unset.
    pub fn family_masses(&self) -> Vec<Vec<&MassDistribution>> {
        match &self.families {
            Some(f) => f.iter().map(|ix| ix.iter().map(|&i| &self.masses[i]).collect()).collect(),
            None => vec![self.masses.iter().collect()],
        }
    }

    /// All atoms of all masses.
    pub fn all_atoms(&self) -> impl Iterator<Item = &Vector> {
        self.masses.iter().flat_map(|m| m.atoms.iter())
    }

    /// Largest distance of an atom from `center`.
    pub fn radius_about(&self, center: &[f64]) -> f64 {
        self.all_atoms().map(|a| geometry::norm(&geometry::sub(a.as_slice(), center))).fold(0.0, f64::max)
    }

    /// Every mass lifted to the upper hemisphere.
    pub fn lifted(&self) -> Instance {
        Instance {
            dimension: self.dimension + 1,
            masses: self.masses.iter().map(MassDistribution::lifted).collect(),
            families: self.families.clone(),
        }
    }

    pub fn with_smoothing(&self, smoothing: f64) -> Instance {
        Instance {
            dimension: self.dimension,
            masses: self.masses.iter().map(|m| m.with_smoothing(smoothing)).collect(),
            families: self.families.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// generators

/// Absolute orientation determinant of `d+1` points in `R^d`.
fn orientation_det(points: &[&[f64]]) -> f64 {
    let d = points.len() - 1;
    let base = points[d];
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| points[i][j] - base[j]);
    m.determinant().abs()
}

/// Distance from `p` to the affine hull of `others` (`d` points in `R^d`).
fn distance_to_hull(p: &[f64], others: &[&[f64]]) -> f64 {
    let d = p.len();
    let base = others[0];
    let dirs: Vec<Vec<f64>> = others[1..].iter().map(|o| geometry::sub(o, base)).collect();
    let mut r = geometry::sub(p, base);
    if let Some(b) = geometry::gram_schmidt(&dirs) {
        for v in &b {
            let c = geometry::dot(&r, v);
            geometry::axpy(&mut r, -c, v);
        }
        geometry::norm(&r)
    } else {
        // degenerate hull: treat as lying on it
        let _ = d;
        0.0
    }
}

/// Calls `f` on every `size`-subset of `0..n` (as index slices).
fn for_each_subset(n: usize, size: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == size {
            return f(cur);
        }
        for i in start..n {
            if n - i < size - cur.len() {
                break;
            }
            cur.push(i);
            if !rec(i + 1, n, size, cur, f) {
                return false;
            }
            cur.pop();
        }
        true
    }
    let mut cur = Vec::with_capacity(size);
    rec(0, n, size, &mut cur, f)
}

/// `true` if `candidate` together with some `d` of `existing` lies on a common
/// hyperplane (orientation determinant at most `tol`).
pub(crate) fn breaks_general_position(existing: &[Vec<f64>], candidate: &[f64], tol: f64) -> bool {
    let d = candidate.len();
    if existing.len() < d {
        return false;
    }
    let mut bad = false;
    for_each_subset(existing.len(), d, &mut |ix| {
        let mut pts: Vec<&[f64]> = ix.iter().map(|&i| existing[i].as_slice()).collect();
        pts.push(candidate);
        if orientation_det(&pts) <= tol {
            bad = true;
            return false;
        }
        true
    });
    bad
}

/// `m` masses of `atoms_per_mass` unit-weight atoms drawn uniformly from the
/// unit cube; the union is in general position (no `d+1` atoms with
/// orientation determinant below `1e-9`).
pub fn random_instance(d: usize, m: usize, atoms_per_mass: usize, seed: u64) -> Result<Instance> {
    if d == 0 || m == 0 || atoms_per_mass == 0 {
        return Err(Error::InvalidInput("d, m and atoms per mass must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<Vec<f64>> = Vec::with_capacity(m * atoms_per_mass);
    let mut masses = Vec::with_capacity(m);
    for i in 0..m {
        let mut atoms = Vec::with_capacity(atoms_per_mass);
        while atoms.len() < atoms_per_mass {
            let p: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            if breaks_general_position(&all, &p, 1e-9) {
                continue;
            }
            all.push(p.clone());
            atoms.push(Vector::from(p));
        }
        masses.push(MassDistribution::unit_weights(format!("mu{}", i + 1), atoms)?);
    }
    Instance::new(d, masses, None)
}

/// Three atoms of total weight 1 within [`CLUSTER_RADIUS`] of `center`.
fn cluster3(center: &[f64]) -> (Vec<Vector>, Vec<f64>) {
    let d = center.len();
    let r = 0.5 * CLUSTER_RADIUS;
    let atoms = (0..3)
        .map(|j| {
            let mut p = center.to_vec();
            if d == 1 {
                p[0] += r * (j as f64 - 1.0);
            } else {
                let a = std::f64::consts::FRAC_PI_2 + j as f64 * 2.0 * std::f64::consts::PI / 3.0;
                p[0] += r * a.cos();
                p[1] += r * a.sin();
            }
            Vector::from(p)
        })
        .collect();
    (atoms, vec![1.0 / 3.0; 3])
}

/// `d+2` point-like masses: one at each vertex of the standard simplex
/// `{0, e_1, …, e_d}` and one at its barycenter. No cone bisects all of them.
pub fn make_simplex_counterexample(d: usize) -> Result<Instance> {
    if d == 0 {
        return Err(Error::InvalidInput("d must be at least 1".into()));
    }
    let mut centers: Vec<(String, Vec<f64>)> = vec![("vertex0".into(), vec![0.0; d])];
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        centers.push((format!("vertex{}", j + 1), e));
    }
    centers.push(("interior".into(), vec![1.0 / (d as f64 + 1.0); d]));
    let masses = centers
        .into_iter()
        .map(|(name, c)| {
            let (atoms, w) = cluster3(&c);
            MassDistribution::new(name, atoms, w, DEFAULT_SMOOTHING)
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(d, masses, None)
}

/// `d+1` families of `d+1` point clusters each (`n` points per cluster, radius
/// [`CLUSTER_RADIUS`]); no hyperplane passes within `1e-2` of `d+1` cluster
/// centers.
pub fn make_projective_tight_instance(d: usize, n: usize) -> Result<Instance> {
    make_projective_tight_instance_seeded(d, n, 0x5eed_0001)
}

pub fn make_projective_tight_instance_seeded(d: usize, n: usize, seed: u64) -> Result<Instance> {
    if d == 0 || n < 2 {
        return Err(Error::InvalidInput("need d ≥ 1 and n ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = (d + 1) * (d + 1);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while centers.len() < count {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::InvalidInput("could not place clusters in general position".into()));
        }
        let c: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        if clusters_too_flat(&centers, &c, 1e-2) {
            continue;
        }
        centers.push(c);
    }
    let mut all: Vec<Vec<f64>> = Vec::new();
    let mut masses = Vec::with_capacity(count);
    for (ci, c) in centers.iter().enumerate() {
        let mut atoms = Vec::with_capacity(n);
        while atoms.len() < n {
            let off = random_in_ball(&mut rng, d, CLUSTER_RADIUS);
            let p: Vec<f64> = c.iter().zip(&off).map(|(a, b)| a + b).collect();
            if breaks_general_position(&all, &p, 1e-12) {
                continue;
            }
            all.push(p.clone());
            atoms.push(Vector::from(p));
        }
        let (fam, set) = (ci / (d + 1), ci % (d + 1));
        masses.push(MassDistribution::unit_weights(format!("F{}S{}", fam + 1, set + 1), atoms)?);
    }
    let families = (0..=d).map(|f| ((f * (d + 1))..((f + 1) * (d + 1))).collect()).collect();
    Instance::new(d, masses, Some(families))
}

/// `true` if `c` and some `d` of `existing` have a point within `tol` of the
/// hyperplane through the other `d`.
fn clusters_too_flat(existing: &[Vec<f64>], c: &[f64], tol: f64) -> bool {
    let d = c.len();
    if existing.len() < d {
        return false;
    }
    let mut bad = false;
    for_each_subset(existing.len(), d, &mut |ix| {
        let mut pts: Vec<&[f64]> = ix.iter().map(|&i| existing[i].as_slice()).collect();
        pts.push(c);
        for j in 0..pts.len() {
            let others: Vec<&[f64]> = pts.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, p)| *p).collect();
            if distance_to_hull(pts[j], &others) <= tol {
                bad = true;
                return false;
            }
        }
        true
    });
    bad
}

fn random_in_ball(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        if geometry::norm(&v) <= 1.0 {
            return v.into_iter().map(|x| x * r).collect();
        }
    }
}

/// Checks that no `d+1` points of the union are within `tol` (orientation
/// determinant) of a common hyperplane.
pub fn check_general_position(points: &[Vec<f64>], tol: f64) -> Result<()> {
    let mut seen: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if breaks_general_position(&seen, p, tol) {
            return Err(Error::GeneralPositionViolation(format!(
                "point {i} lies on a hyperplane through {} earlier points",
                p.len()
            )));
        }
        seen.push(p.clone());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// instance files

#[derive(Serialize, Deserialize)]
struct MassFile {
    name: String,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smoothing: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    dimension: usize,
    masses: Vec<MassFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    families: Option<Vec<Vec<usize>>>,
}

/// Serializes an instance to the JSON instance schema.
pub fn instance_to_json(inst: &Instance) -> Result<String> {
    let file = InstanceFile {
        dimension: inst.dimension,
        masses: inst
            .masses
            .iter()
            .map(|m| MassFile {
                name: m.name.clone(),
                atoms: m.atoms.iter().map(|a| a.coords.clone()).collect(),
                weights: m.weights.clone(),
                smoothing: (m.smoothing != DEFAULT_SMOOTHING).then_some(m.smoothing),
            })
            .collect(),
        families: inst.families.clone(),
    };
    crate::json::to_string(&file)
}

/// Parses the JSON instance schema.
pub fn instance_from_json(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        field: String::new(),
        message: e.to_string(),
    })?;
    let d = file.dimension;
    let mut masses = Vec::with_capacity(file.masses.len());
    for (i, m) in file.masses.into_iter().enumerate() {
        for (j, a) in m.atoms.iter().enumerate() {
            if a.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: a.len() }).map_err(|e| {
                    let _ = (i, j);
                    e
                });
            }
        }
        if m.atoms.len() != m.weights.len() {
            return Err(Error::Parse {
                line: 0,
                field: format!("masses[{i}].weights"),
                message: format!("{} atoms but {} weights", m.atoms.len(), m.weights.len()),
            });
        }
        let mass = MassDistribution::new(
            m.name,
            m.atoms.into_iter().map(Vector::from).collect(),
            m.weights,
            m.smoothing.unwrap_or(DEFAULT_SMOOTHING),
        )
        .map_err(|e| match e {
            Error::InvalidInput(msg) => Error::Parse { line: 0, field: format!("masses[{i}]"), message: msg },
            other => other,
        })?;
        masses.push(mass);
    }
    Instance::new(d, masses, file.families)
}

pub fn save_instance(path: impl AsRef<Path>, inst: &Instance) -> Result<()> {
    std::fs::write(path, instance_to_json(inst)?)?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    instance_from_json(&std::fs::read_to_string(path)?)
}
