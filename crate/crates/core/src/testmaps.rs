//! Residual (test) maps, the cyclic sector action, and the feasibility
//! predicates of the partition theorems.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Frame2, OrientedFlag, UnitVector, Vector};
use crate::masses::{total_mass, Instance, MassDistribution};
use crate::regions::{self, DoubleWedge, KCone, KFan, Region};

/// Value of a test map: one block per tested mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualVector {
    pub components: Vec<f64>,
    pub blocks: Vec<usize>,
}

impl ResidualVector {
    pub fn new(components: Vec<f64>, blocks: Vec<usize>) -> Result<Self> {
        if blocks.iter().sum::<usize>() != components.len() {
            return Err(Error::BlockMismatch(format!(
                "blocks cover {} components, vector has {}",
                blocks.iter().sum::<usize>(),
                components.len()
            )));
        }
        Ok(Self { components, blocks })
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> f64 {
        self.components.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let start: usize = self.blocks[..i].iter().sum();
        &self.components[start..start + self.blocks[i]]
    }
}

/// A point of one of the configuration manifolds searched by the solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConfigPoint {
    Angle { angle: f64 },
    Direction { direction: UnitVector },
    StiefelPair { frame: Frame2 },
    Flag { flag: OrientedFlag },
    HyperplanePair { h1: UnitVector, h2: UnitVector },
    ApexParam { t: f64, direction: UnitVector },
    /// One shared hyperplane and one partner per family.
    SharedPair { h1: UnitVector, h2: Vec<UnitVector> },
}

/// Which mass the fan construction equipartitions exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reference {
    /// The sum of all masses; the last mass is then implied and not tested.
    #[default]
    Sum,
    Mass(usize),
}

impl Reference {
    fn split<'a>(&self, inst: &'a Instance) -> Result<(Vec<&'a MassDistribution>, Vec<&'a MassDistribution>)> {
        let all: Vec<&MassDistribution> = inst.masses.iter().collect();
        match *self {
            Reference::Sum => {
                let n = all.len();
                Ok((all.clone(), all[..n.saturating_sub(1)].to_vec()))
            }
            Reference::Mass(r) => {
                if r >= all.len() {
                    return Err(Error::InvalidInput(format!("reference index {r} out of range")));
                }
                let tested = all.iter().enumerate().filter(|(i, _)| *i != r).map(|(_, m)| *m).collect();
                Ok((vec![all[r]], tested))
            }
        }
    }
}

/// Per-mass blocks `μ_i(W_j)/μ_i(R^d) − t_j` of the fan through the origin
/// built from the reference mass, starting at the frame's `x` direction.
pub fn fan_residual(inst: &Instance, frame: &Frame2, targets: &[f64], reference: Reference) -> Result<ResidualVector> {
    Ok(fan_residual_at(inst, frame, targets, reference, 0.0)?.0)
}

/// [`fan_residual`] with an explicit start angle; also returns the fan.
pub fn fan_residual_at(
    inst: &Instance,
    frame: &Frame2,
    targets: &[f64],
    reference: Reference,
    start: f64,
) -> Result<(ResidualVector, KFan)> {
    if frame.dim() != inst.dimension {
        return Err(Error::DimensionMismatch { expected: inst.dimension, found: frame.dim() });
    }
    let (refs, tested) = reference.split(inst)?;
    let fan = regions::build_fan_from(&refs, frame, &Vector::zeros(inst.dimension), targets, start)?;
    Ok((fan_blocks(&tested, &fan, targets), fan))
}

pub(crate) fn fan_blocks(tested: &[&MassDistribution], fan: &KFan, targets: &[f64]) -> ResidualVector {
    let region = Region::Fan(fan.clone());
    let k = targets.len();
    let mut comps = Vec::with_capacity(tested.len() * k);
    for mu in tested {
        let p = regions::piece_measures_eps(mu, &region, mu.smoothing);
        let tot = total_mass(mu);
        comps.extend(p.iter().zip(targets).map(|(m, t)| m / tot - t));
    }
    ResidualVector { components: comps, blocks: vec![k; tested.len()] }
}

/// Normalized imbalances `(μ_i(C) − μ_i(C̄))/μ_i(R^d)` of the total-mass
/// bisecting cone for every mass but the last.
///
/// Computed for the canonically oriented line; the flipped line returns the
/// exact negation.
pub fn cone_residual(inst: &Instance, flag: &OrientedFlag, apex: &[f64]) -> Result<ResidualVector> {
    Ok(cone_residual_with_cone(inst, flag, apex, inst.masses.len().saturating_sub(1))?.0)
}

/// Cone residual for the first `count` masses, with the cone itself.
pub fn cone_residual_with_cone(
    inst: &Instance,
    flag: &OrientedFlag,
    apex: &[f64],
    count: usize,
) -> Result<(ResidualVector, KCone)> {
    if flag.ambient_dim() != inst.dimension {
        return Err(Error::DimensionMismatch { expected: inst.dimension, found: flag.ambient_dim() });
    }
    if !regions::is_canonical(flag.line().as_slice()) {
        let (r, c) = cone_residual_with_cone(inst, &flag.flipped(), &regions::flipped_apex(apex), count)?;
        let comps = r.components.iter().map(|x| -x).collect();
        return Ok((ResidualVector { components: comps, blocks: r.blocks }, regions::complement_cone(&c)));
    }
    let parts: Vec<&MassDistribution> = inst.masses.iter().collect();
    let cone = regions::build_cone_from(&parts, flag, apex)?;
    let comps = inst.masses[..count].iter().map(|mu| cone_imbalance(mu, &cone)).collect();
    Ok((ResidualVector { components: comps, blocks: vec![1; count] }, cone))
}

/// `(μ(C) − μ(C̄))/μ(R^d)` under the mass's smoothing.
pub fn cone_imbalance(mu: &MassDistribution, cone: &KCone) -> f64 {
    let s: f64 = mu
        .atoms
        .iter()
        .zip(&mu.weights)
        .map(|(a, w)| w * regions::cone_sign(cone, a.as_slice(), mu.smoothing))
        .sum();
    s / total_mass(mu)
}

/// Normalized double-wedge imbalances `(μ(D) − μ(D̄))/μ(R^d)` for
/// hyperplanes through the origin with unit normals `h1`, `h2`.
pub fn dw_residual(family: &[&MassDistribution], h1: &UnitVector, h2: &UnitVector) -> ResidualVector {
    let dw = DoubleWedge {
        h1: crate::geometry::OrientedHyperplane::through_origin(h1.clone()),
        h2: crate::geometry::OrientedHyperplane::through_origin(h2.clone()),
    };
    let comps = family.iter().map(|mu| dw_imbalance(mu, &dw)).collect();
    ResidualVector { components: comps, blocks: vec![1; family.len()] }
}

pub fn dw_imbalance(mu: &MassDistribution, dw: &DoubleWedge) -> f64 {
    let s: f64 = mu
        .atoms
        .iter()
        .zip(&mu.weights)
        .map(|(a, w)| w * regions::double_wedge_sign(dw, a.as_slice(), mu.smoothing))
        .sum();
    s / total_mass(mu)
}

/// Cyclic rotation of every block by `shift`: `(a, b, c)` shifted by 1 is
/// `(c, a, b)`. All blocks must have the same size.
pub fn zk_shift(v: &ResidualVector, shift: usize) -> Result<ResidualVector> {
    let Some(&k) = v.blocks.first() else {
        return Ok(v.clone());
    };
    if v.blocks.iter().any(|&b| b != k) || k == 0 {
        return Err(Error::BlockMismatch(format!("unequal block sizes {:?}", v.blocks)));
    }
    let s = shift % k;
    let mut out = v.components.clone();
    for chunk in out.chunks_mut(k) {
        chunk.rotate_right(s);
    }
    Ok(ResidualVector { components: out, blocks: v.blocks.clone() })
}

/// The fan whose sectors are those of `fan` shifted by `shift`: the new `W_1`
/// is the old `W_{k−shift+1}`.
pub fn zk_shift_fan(fan: &KFan, shift: usize) -> KFan {
    let k = fan.k();
    let s = shift % k;
    let mut cuts = Vec::with_capacity(k);
    for j in 0..k {
        let idx = (j + k - s) % k;
        let turn = if s > 0 && j >= s { std::f64::consts::TAU } else { 0.0 };
        cuts.push(fan.cuts[idx] + turn);
    }
    KFan { frame: fan.frame.clone(), apex: fan.apex.clone(), cuts }
}

/// Result of comparing the residual at the shifted configuration with the
/// shifted residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub max_deviation: f64,
    pub pass: bool,
}

/// Realizes the group action at configuration level by restarting the fan
/// construction at cut `c_{k−s}` of the constructed fan, for every shift `s`.
pub fn check_equivariance(
    inst: &Instance,
    frame: &Frame2,
    targets: &[f64],
    reference: Reference,
    tol: f64,
) -> Result<EquivarianceReport> {
    let (r0, fan) = fan_residual_at(inst, frame, targets, reference, 0.0)?;
    let k = targets.len();
    let mut worst: f64 = 0.0;
    for s in 1..k {
        let start = fan.cuts[k - s];
        let rotated: Vec<f64> = (0..k).map(|j| targets[(j + k - s) % k]).collect();
        let (r1, _) = fan_residual_at(inst, frame, &rotated, reference, start)?;
        let expect = zk_shift(&r0, s)?;
        for (a, b) in r1.components.iter().zip(&expect.components) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(EquivarianceReport { max_deviation: worst, pass: worst <= tol })
}

/// Which theorem hypothesis to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// k-fan through the origin, `m + 1` masses: `2d − 3 ≥ m(k − 1)`.
    FanOrigin,
    /// k-fan anywhere, `m + 1` masses: `2d − 1 ≥ m(k − 1)`.
    FanGeneral,
    /// q-fan with fractions `a_j/p` through the origin: `2d − 2 ≥ m(p − 1)`.
    QFanOrigin,
    /// q-fan with fractions `a_j/p`: `2d ≥ m(p − 1)`.
    QFanGeneral,
    /// `m` masses bisected by a k-cone: `m ≤ d + 1`, `2 ≤ k ≤ d`.
    Cone,
    /// `k` families of `m` masses bisected by double wedges sharing `h1`.
    DwShared,
    /// As [`Variant::DwShared`] but only ε-bisection is claimed.
    DwSharedEps,
    /// `m + 1` masses cut into `k` slabs after a projective map.
    Stripes,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::FanOrigin => "fan_origin",
            Variant::FanGeneral => "fan_general",
            Variant::QFanOrigin => "qfan_origin",
            Variant::QFanGeneral => "qfan_general",
            Variant::Cone => "cone",
            Variant::DwShared => "dw_shared",
            Variant::DwSharedEps => "dw_shared_eps",
            Variant::Stripes => "stripes",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub explanation: String,
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n % p == 0 {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// `None` if `k` is a product of pairwise distinct odd primes, else the reason.
pub fn distinct_odd_prime_product(k: usize) -> Option<String> {
    if k < 3 {
        return Some(format!("k = {k} is not a product of odd primes"));
    }
    let f = prime_factors(k);
    if f.contains(&2) {
        return Some(format!("k = {k} is even"));
    }
    if f.windows(2).any(|w| w[0] == w[1]) {
        let s: Vec<String> = f.iter().map(|p| p.to_string()).collect();
        return Some(format!("k = {k} = {} repeats a prime factor", s.join("·")));
    }
    None
}

fn is_odd_prime(p: usize) -> bool {
    p >= 3 && prime_factors(p) == vec![p]
}

/// Checks the hypothesis of the theorem behind `variant`.
///
/// `k` is the number of sectors (or `p` for the q-fan variants, the number
/// of families for the double-wedge variants); `m` counts masses as in the
/// variant's description.
pub fn feasibility(d: usize, k: usize, m: usize, variant: Variant) -> Feasibility {
    let yes = |s: String| Feasibility { feasible: true, explanation: s };
    let no = |s: String| Feasibility { feasible: false, explanation: s };
    if d == 0 || k == 0 || m == 0 {
        return no("d, k and m must be positive".into());
    }
    let (d, k, m) = (d as i64, k as i64, m as i64);
    let fan_like = |lhs: i64, lhs_text: &str| {
        if let Some(reason) = distinct_odd_prime_product(k as usize) {
            return no(format!("{reason}; needs a product of pairwise distinct odd primes"));
        }
        let rhs = m * (k - 1);
        if lhs >= rhs {
            yes(format!("{lhs_text} = {lhs} ≥ m(k−1) = {rhs}"))
        } else {
            no(format!("{lhs_text} = {lhs} < m(k−1) = {rhs}"))
        }
    };
    let qfan = |lhs: i64, lhs_text: &str| {
        if !is_odd_prime(k as usize) {
            return no(format!("p = {k} is not an odd prime"));
        }
        let rhs = m * (k - 1);
        if lhs >= rhs {
            yes(format!("{lhs_text} = {lhs} ≥ m(p−1) = {rhs}"))
        } else {
            no(format!("{lhs_text} = {lhs} < m(p−1) = {rhs}"))
        }
    };
    match variant {
        Variant::FanOrigin => fan_like(2 * d - 3, "2d−3"),
        Variant::FanGeneral | Variant::Stripes => fan_like(2 * d - 1, "2d−1"),
        Variant::QFanOrigin => qfan(2 * d - 2, "2d−2"),
        Variant::QFanGeneral => qfan(2 * d, "2d"),
        Variant::Cone => {
            if k < 2 {
                no(format!("k = {k}: a 1-cone is a halfspace, which cannot bisect d+1 masses; need 2 ≤ k ≤ d"))
            } else if k > d {
                no(format!("k = {k} > d = {d}"))
            } else if m > d + 1 {
                no(format!("m = {m} masses > d+1 = {}", d + 1))
            } else {
                yes(format!("m = {m} ≤ d+1 = {} and 2 ≤ k = {k} ≤ d", d + 1))
            }
        }
        Variant::DwShared => {
            let (kmax, mmax, route) =
                if d % 2 == 0 { (d, d + 1, "d even") } else { (d - 1, d, "d odd, apexes through the origin") };
            if k <= kmax && m <= mmax {
                yes(format!("{route}: {k} ≤ {kmax} families of {m} ≤ {mmax} masses"))
            } else {
                no(format!("{route}: need at most {kmax} families of at most {mmax} masses, got {k} of {m}"))
            }
        }
        Variant::DwSharedEps => {
            if k <= d && m <= d + 1 {
                yes(format!("{k} ≤ d = {d} families of {m} ≤ d+1 masses (ε-bisection)"))
            } else {
                no(format!("need at most d = {d} families of at most d+1 = {} masses, got {k} of {m}", d + 1))
            }
        }
    }
}
