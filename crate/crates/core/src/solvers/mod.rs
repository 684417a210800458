//! Zero search over configuration manifolds for the partition test maps,
//! plus numerical degree certificates.

mod certificates;
mod cone;
mod fan;
pub(crate) mod manifold;
pub(crate) mod search;
mod wedge;

pub use certificates::{icosphere, sphere_map_degree, sphere_map_degree_raw, winding_number, Icosphere, NEAR_ZERO};
pub use cone::{decode_lifted_wedge, solve_cone, solve_cone_apex_on_line};
pub use fan::{decode_lifted_fan, solve_dw_fan, solve_fan, LiftMode};
pub use wedge::{solve_double_wedge, solve_shared_h1};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masses::{total_mass, Instance, MassDistribution};
use crate::regions::{self, Region};
use crate::testmaps::{ConfigPoint, Variant};

/// Largest configuration-space dimension searched.
pub const DESK_SCALE_DIM: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Samples per manifold dimension for the initial scan (capped in total).
    pub grid_resolution: usize,
    pub multistarts: usize,
    pub max_refine_iters: usize,
    /// Normalized residual accepted as a zero.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { grid_resolution: 8, multistarts: 64, max_refine_iters: 500, tolerance: 1e-6, seed: 0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.grid_resolution < 4 {
            return Err(Error::InvalidInput(format!("grid resolution {} below 4", self.grid_resolution)));
        }
        if self.multistarts == 0 {
            return Err(Error::InvalidInput("multistarts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Found,
    NotFound,
    Infeasible,
    ExceedsDeskScale,
    GeneralPositionViolation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    Feasibility { variant: Variant, feasible: bool, explanation: String },
    /// Deviation between the residual at the shifted configuration and the
    /// shifted residual.
    Equivariance { max_deviation: f64, pass: bool },
    /// `max |f(−x) + f(x)|` at the reported configuration.
    Antipodality { max_deviation: f64 },
    /// Degree of a normalized residual map on a sphere; `degree` is absent
    /// when the map came within [`NEAR_ZERO`] of zero on the mesh.
    Degree { label: String, t: f64, degree: Option<i64>, covering: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: String,
    pub status: Status,
    pub message: String,
    /// Whether the search ran on the lifted instance.
    pub lifted: bool,
    /// Regions in the instance's own space (one per family for shared
    /// searches). Empty when no planar form exists.
    pub solution: Vec<Region>,
    /// The same regions in lifted form (applied to atoms lifted to the
    /// upper hemisphere).
    pub lifted_solution: Vec<Region>,
    pub residual_smoothed: f64,
    pub residual_raw: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub family_residuals: Vec<f64>,
    pub config_point: Option<ConfigPoint>,
    pub certificates: Vec<Certificate>,
    pub evaluations: u64,
    pub search_dim: usize,
    /// Seconds; not serialized so that reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock: f64,
}

impl SolveReport {
    pub(crate) fn refused(problem: &str, status: Status, message: String, certificates: Vec<Certificate>, search_dim: usize) -> Self {
        Self {
            problem: problem.into(),
            status,
            message,
            lifted: false,
            solution: Vec::new(),
            lifted_solution: Vec::new(),
            residual_smoothed: f64::INFINITY,
            residual_raw: f64::INFINITY,
            family_residuals: Vec::new(),
            config_point: None,
            certificates,
            evaluations: 0,
            search_dim,
            wall_clock: 0.0,
        }
    }

    pub fn is_found(&self) -> bool {
        self.status == Status::Found
    }
}

pub(crate) fn feasibility_certificate(d: usize, k: usize, m: usize, variant: Variant) -> (bool, Certificate) {
    let f = crate::testmaps::feasibility(d, k, m, variant);
    (f.feasible, Certificate::Feasibility { variant, feasible: f.feasible, explanation: f.explanation })
}

/// Largest smoothing radius among the masses.
pub(crate) fn instance_smoothing(inst: &Instance) -> f64 {
    inst.masses.iter().map(|m| m.smoothing).fold(0.0, f64::max)
}

/// Copies of `inst` at every stage radius; the last stage keeps each
/// mass's own smoothing.
pub(crate) fn stage_instances(inst: &Instance, stages: &[f64]) -> Vec<Instance> {
    let last = stages.len() - 1;
    stages.iter().enumerate().map(|(i, &e)| if i == last { inst.clone() } else { inst.with_smoothing(e) }).collect()
}

/// `max_i |μ_i(R) − μ_i(R̄)| / μ_i(R^d)` for a two-piece region, with the
/// given smoothing (`None` keeps each mass's own).
pub(crate) fn two_piece_residual<'a>(
    masses: impl IntoIterator<Item = &'a MassDistribution>,
    region: &Region,
    eps: Option<f64>,
) -> f64 {
    masses
        .into_iter()
        .map(|mu| {
            let p = regions::piece_measures_eps(mu, region, eps.unwrap_or(mu.smoothing));
            (p[0] - p[1]).abs() / total_mass(mu)
        })
        .fold(0.0, f64::max)
}

/// `max_{i,j} |μ_i(piece_j)/μ_i(R^d) − t_j|`.
pub(crate) fn piece_residual<'a>(
    masses: impl IntoIterator<Item = &'a MassDistribution>,
    region: &Region,
    targets: &[f64],
    eps: Option<f64>,
) -> f64 {
    masses
        .into_iter()
        .map(|mu| {
            let p = regions::piece_measures_eps(mu, region, eps.unwrap_or(mu.smoothing));
            let tot = total_mass(mu);
            p.iter().zip(targets).map(|(m, t)| (m / tot - t).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

pub(crate) fn lifted(region: Region) -> Region {
    Region::Lifted { inner: Box::new(region) }
}

pub(crate) fn unit_chunks(x: &[f64], n: usize) -> Vec<crate::geometry::UnitVector> {
    x.chunks(n).map(|c| crate::geometry::UnitVector::from_unit_unchecked(c.to_vec())).collect()
}
