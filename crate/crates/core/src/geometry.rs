//! Linear, spherical and projective geometry on small dense vectors.
//!
//! Points of `R^d` and of the sphere `S^d ⊂ R^{d+1}` share the [`Vector`]
//! type. Homogeneous coordinates always put the homogenizer last.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for unit-norm and orthogonality checks.
pub const UNIT_TOL: f64 = 1e-12;
/// Last-coordinate cutoff of the open upper hemisphere.
pub const EQUATOR_CUTOFF: f64 = 1e-9;
/// Homogeneous coordinates smaller than this are points at infinity.
pub const INFINITY_CUTOFF: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += s * x`
#[inline]
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Normalizes in place; returns the original norm.
pub fn normalize_in_place(a: &mut [f64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Orthonormalizes `vectors` in order (modified Gram-Schmidt with one
/// re-orthogonalization pass). Returns `None` if they are linearly dependent.
pub fn gram_schmidt(vectors: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        let scale = norm(&w);
        for _ in 0..2 {
            for b in &out {
                let c = dot(&w, b);
                axpy(&mut w, -c, b);
            }
        }
        let n = normalize_in_place(&mut w);
        if !(n > 1e-10 * scale.max(1e-300)) {
            return None;
        }
        out.push(w);
    }
    Some(out)
}

/// Orthonormal basis of the orthogonal complement of the span of the given
/// orthonormal vectors in `R^n`, built from coordinate axes in index order.
pub fn orthonormal_complement(basis: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::with_capacity(n.saturating_sub(basis.len()));
    // Pick axes by largest residual first so the result is well conditioned.
    while all.len() < n {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            for _ in 0..2 {
                for b in &all {
                    let c = dot(&e, b);
                    axpy(&mut e, -c, b);
                }
            }
            let r = norm(&e);
            if best.as_ref().map_or(true, |(br, _)| r > *br + 1e-12) {
                best = Some((r, e));
            }
        }
        let (_, mut e) = best.expect("n > 0");
        normalize_in_place(&mut e);
        all.push(e.clone());
        out.push(e);
    }
    out
}

/// A point of `R^d` (or of `S^d` when embedded in `R^{d+1}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector {
    pub coords: Vec<f64>,
}

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("vector must have at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("vector coordinates must be finite".into()));
        }
        Ok(Self { coords })
    }

    pub fn zeros(d: usize) -> Self {
        Self { coords: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.coords, &other.coords)
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector { coords: sub(&self.coords, &other.coords) }
    }

    /// `(p, 1)`
    pub fn homogeneous(&self) -> Vec<f64> {
        let mut h = self.coords.clone();
        h.push(1.0);
        h
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Vec<f64>> for Vector {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// A direction: Euclidean norm 1 within [`UNIT_TOL`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Normalizes `coords`; fails on the zero vector.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("direction must be finite".into()));
        }
        let n = normalize_in_place(&mut coords);
        if !(n > 1e-300) {
            return Err(Error::InvalidInput("cannot normalize the zero vector".into()));
        }
        Ok(Self { coords })
    }

    /// Accepts `coords` only if already unit within tolerance.
    pub fn checked(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if (n - 1.0).abs() > UNIT_TOL || coords.is_empty() {
            return Err(Error::InvalidInput(format!("expected a unit vector, norm is {n}")));
        }
        Ok(Self { coords })
    }

    pub(crate) fn from_unit_unchecked(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn axis(d: usize, j: usize) -> Self {
        let mut coords = vec![0.0; d];
        coords[j] = 1.0;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn neg(&self) -> Self {
        Self { coords: self.coords.iter().map(|c| -c).collect() }
    }

    pub fn to_vector(&self) -> Vector {
        Vector { coords: self.coords.clone() }
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        // Tolerate serialization round-off by renormalizing near-unit input.
        let n = norm(&v);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("expected a unit vector, norm is {n}")));
        }
        UnitVector::normalized(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Vec<f64> {
        u.coords
    }
}

/// Sign of `value` with a zero band, used by all half-rule predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
    On,
}

/// `{p : normal·p − offset = 0}` with positive side `normal·p − offset > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedHyperplane {
    pub normal: UnitVector,
    pub offset: f64,
}

impl OrientedHyperplane {
    pub fn new(normal: UnitVector, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Hyperplane through the origin.
    pub fn through_origin(normal: UnitVector) -> Self {
        Self { normal, offset: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        dot(self.normal.as_slice(), p) - self.offset
    }

    pub fn side(&self, p: &[f64]) -> Side {
        let s = self.signed_distance(p);
        if s > UNIT_TOL {
            Side::Positive
        } else if s < -UNIT_TOL {
            Side::Negative
        } else {
            Side::On
        }
    }

    /// Same point set, opposite orientation.
    pub fn reoriented(&self) -> Self {
        Self { normal: self.normal.neg(), offset: -self.offset }
    }

    /// Lifted normal `(n, −c)/‖(n, −c)‖` of the plane through the origin of
    /// `R^{d+1}` whose trace on `x_{d+1} = 1` is this hyperplane.
    pub fn lifted_normal(&self) -> UnitVector {
        let mut n = self.normal.as_slice().to_vec();
        n.push(-self.offset);
        UnitVector::normalized(n).expect("normal is nonzero")
    }

    /// Trace on `x_{d+1} = 1` of the plane through the origin with normal
    /// `lifted`. `None` when that plane is the equator (hyperplane at infinity).
    pub fn from_lifted_normal(lifted: &[f64]) -> Option<Self> {
        let d = lifted.len() - 1;
        let horiz = &lifted[..d];
        let h = norm(horiz);
        if h <= 1e-12 * norm(lifted) {
            return None;
        }
        let normal = UnitVector::from_unit_unchecked(scaled(horiz, 1.0 / h));
        Some(Self { normal, offset: -lifted[d] / h })
    }
}

/// An orthonormal pair spanning an oriented 2-plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame2 {
    pub x: UnitVector,
    pub y: UnitVector,
}

impl Frame2 {
    /// Orthonormalizes `(x, y)` by Gram-Schmidt.
    pub fn orthonormalized(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidInput("frame vectors must share a dimension ≥ 2".into()));
        }
        let b = gram_schmidt(&[x, y])
            .ok_or_else(|| Error::InvalidInput("frame vectors are dependent".into()))?;
        let mut it = b.into_iter();
        let x = UnitVector::from_unit_unchecked(it.next().unwrap());
        let y = UnitVector::from_unit_unchecked(it.next().unwrap());
        Ok(Self { x, y })
    }

    /// The standard frame `(e_1, e_2)` of `R^d`.
    pub fn standard(d: usize) -> Self {
        Self { x: UnitVector::axis(d, 0), y: UnitVector::axis(d, 1) }
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// Planar coordinates of the projection of `v` onto the frame plane.
    #[inline]
    pub fn coords_of(&self, v: &[f64]) -> (f64, f64) {
        (dot(self.x.as_slice(), v), dot(self.y.as_slice(), v))
    }

    /// `cos(a)·x + sin(a)·y`
    pub fn direction(&self, angle: f64) -> Vec<f64> {
        let (s, c) = angle.sin_cos();
        self.x.as_slice().iter().zip(self.y.as_slice()).map(|(a, b)| c * a + s * b).collect()
    }
}

/// An oriented line inside a `k`-dimensional subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedFlag {
    /// Orthonormal basis of the subspace; the first vector is the oriented line.
    pub basis: Vec<UnitVector>,
}

impl OrientedFlag {
    pub fn orthonormalized(vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidInput("flag needs at least the line".into()));
        }
        let n = vectors[0].len();
        if vectors.iter().any(|v| v.len() != n) || vectors.len() > n {
            return Err(Error::InvalidInput("flag vectors must share the ambient dimension".into()));
        }
        let b = gram_schmidt(&vectors)
            .ok_or_else(|| Error::InvalidInput("flag vectors are dependent".into()))?;
        Ok(Self { basis: b.into_iter().map(UnitVector::from_unit_unchecked).collect() })
    }

    pub fn line(&self) -> &UnitVector {
        &self.basis[0]
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis[0].dim()
    }

    /// Same subspace, reversed line.
    pub fn flipped(&self) -> Self {
        let mut basis = self.basis.clone();
        basis[0] = basis[0].neg();
        Self { basis }
    }
}

/// Invertible homogeneous map of `R^d`, stored as a `(d+1)×(d+1)` matrix with
/// unit absolute determinant.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveMap {
    matrix: DMatrix<f64>,
}

impl ProjectiveMap {
    /// Normalizes `matrix` to `|det| = 1` (and `det = +1` when the size is odd).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n < 2 || matrix.ncols() != n {
            return Err(Error::InvalidInput("projective matrix must be square of size ≥ 2".into()));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("projective matrix must be finite".into()));
        }
        let det = matrix.determinant();
        let row_scale: f64 = matrix.row_iter().map(|r| r.norm()).product();
        if !(det.abs() >= 1e-9 * row_scale) {
            return Err(Error::InvalidInput(format!("projective matrix is singular (det {det:e})")));
        }
        let mut s = det.abs().powf(-1.0 / n as f64);
        if det < 0.0 && n % 2 == 1 {
            s = -s;
        }
        Ok(Self { matrix: matrix * s })
    }

    pub fn identity(d: usize) -> Self {
        Self { matrix: DMatrix::identity(d + 1, d + 1) }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("projective matrix rows must be square".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Dimension `d` of the affine space acted on.
    pub fn dim(&self) -> usize {
        self.matrix.nrows() - 1
    }

    /// Image of the homogeneous vector `h` (no dehomogenization).
    pub fn apply_homogeneous(&self, h: &[f64]) -> Vec<f64> {
        let v = &self.matrix * DVector::from_column_slice(h);
        v.iter().copied().collect()
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.determinant()
    }

    /// Image of an oriented hyperplane, given by its lifted normal. Covectors
    /// transform by the inverse transpose.
    pub fn apply_to_lifted_normal(&self, lifted: &[f64]) -> Vec<f64> {
        let inv = self.matrix.clone().try_inverse().expect("projective map is invertible");
        let v = inv.transpose() * DVector::from_column_slice(lifted);
        let mut out: Vec<f64> = v.iter().copied().collect();
        normalize_in_place(&mut out);
        out
    }
}

impl Serialize for ProjectiveMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProjectiveMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        ProjectiveMap::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Central projection of the open upper hemisphere of `S^d` onto the tangent
/// space at the north pole.
pub fn gnomonic_project(p: &[f64]) -> Result<Vector> {
    let n = p.len();
    if n < 2 {
        return Err(Error::InvalidInput("sphere point needs at least two coordinates".into()));
    }
    let last = p[n - 1];
    if !(last > EQUATOR_CUTOFF) {
        return Err(Error::NearEquator { last });
    }
    Ok(Vector { coords: p[..n - 1].iter().map(|x| x / last).collect() })
}

/// Inverse of [`gnomonic_project`]: `(q, 1)/‖(q, 1)‖`.
pub fn gnomonic_lift(q: &[f64]) -> UnitVector {
    let mut h = q.to_vec();
    h.push(1.0);
    normalize_in_place(&mut h);
    UnitVector::from_unit_unchecked(h)
}

/// Rotation `R` with `R·u = v`, acting in the plane spanned by `u` and `v`.
///
/// When `v = −u` to machine precision the plane is spanned by `u` and the
/// lowest-index coordinate axis not parallel to `u`.
pub fn rotation_taking(u: &[f64], v: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    assert_eq!(n, v.len(), "rotation_taking: dimension mismatch");
    let c = dot(u, v);
    let mut w = v.to_vec();
    axpy(&mut w, -c, u);
    let s = norm(&w);
    let mut r = DMatrix::identity(n, n);
    if s > 1e-15 {
        for x in w.iter_mut() {
            *x /= s;
        }
        // Re-derive cos from the orthogonal split so that c² + s² = 1.
        let angle = s.atan2(c);
        let (sn, cs) = angle.sin_cos();
        for i in 0..n {
            for j in 0..n {
                r[(i, j)] += sn * (w[i] * u[j] - u[i] * w[j])
                    + (cs - 1.0) * (u[i] * u[j] + w[i] * w[j]);
            }
        }
    } else if c < 0.0 {
        let j = (0..n).find(|&j| u[j].abs() < 1.0 - 1e-6).unwrap_or(0);
        let mut w = vec![0.0; n];
        w[j] = 1.0;
        axpy(&mut w, -u[j], u);
        normalize_in_place(&mut w);
        for i in 0..n {
            for k in 0..n {
                r[(i, k)] -= 2.0 * (u[i] * u[k] + w[i] * w[k]);
            }
        }
    }
    r
}

/// The projective map that sends `h` to the hyperplane at infinity: lift to
/// `S^d`, rotate the great sphere of `h` onto the equator, project back.
///
/// The rotation targets whichever pole is nearer the lifted normal, so
/// hyperplanes far from the origin give maps close to the identity.
pub fn projective_from_hyperplane(h: &OrientedHyperplane) -> ProjectiveMap {
    projective_from_lifted_normal(h.lifted_normal().as_slice())
}

/// [`projective_from_hyperplane`] for a plane through the origin of `R^{d+1}`
/// given by its unit normal.
pub fn projective_from_lifted_normal(lifted: &[f64]) -> ProjectiveMap {
    let n = lifted.len();
    let mut pole = vec![0.0; n];
    pole[n - 1] = if lifted[n - 1] < 0.0 { -1.0 } else { 1.0 };
    ProjectiveMap { matrix: rotation_taking(lifted, &pole) }
}

/// Dehomogenized image of `p`.
pub fn apply_projective(t: &ProjectiveMap, p: &[f64]) -> Result<Vector> {
    if p.len() != t.dim() {
        return Err(Error::DimensionMismatch { expected: t.dim(), found: p.len() });
    }
    let mut h = p.to_vec();
    h.push(1.0);
    let img = t.apply_homogeneous(&h);
    let last = img[p.len()];
    if last.abs() <= INFINITY_CUTOFF {
        return Err(Error::AtInfinity);
    }
    Ok(Vector { coords: img[..p.len()].iter().map(|x| x / last).collect() })
}
