use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use masspart::geometry::{self, OrientedHyperplane, ProjectiveMap};
use masspart::masses::{self, Instance, MassDistribution};
use masspart::projective::{self, HsAfterTransformResult, StripesResult};
use masspart::regions::Region;
use masspart::solvers::{self, LiftMode, SolveReport, SolverConfig, Status};
use masspart::{json, plot};

#[derive(Parser)]
#[command(name = "masspart", version, about = "Mass partitions by cones, fans and double wedges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Fan with prescribed sector fractions.
    Fan(FanArgs),
    /// Cone bisecting every mass.
    Cone(ConeArgs),
    /// Cone bisecting every mass with its apex on a given line (d = 3).
    ConeOnLine(ConeOnLineArgs),
    /// Double wedge bisecting every mass.
    DoubleWedge(SolveArgs),
    /// One hyperplane shared by a double wedge per family.
    SharedH1(SharedArgs),
    /// Ham-Sandwich cuts after a projective transformation.
    ProjectiveHs(SolveArgs),
    /// Parallel-hyperplane equipartition after a projective transformation.
    Stripes(StripesArgs),
    /// Re-measure the regions of a result file.
    Verify(VerifyArgs),
    /// Winding number of a planar loop.
    Certify(CertifyArgs),
    /// Render a planar instance and optional result as SVG.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Random,
    Simplex,
    Tight,
    HsRandom,
    HsPlanted,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 50)]
    atoms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "random")]
    kind: Kind,
    /// Output path; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SolverFlags {
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    multistarts: usize,
    #[arg(long, default_value_t = 8)]
    grid: usize,
    #[arg(long, default_value_t = 500)]
    max_refine: usize,
}

impl SolverFlags {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            grid_resolution: self.grid,
            multistarts: self.multistarts,
            max_refine_iters: self.max_refine,
            tolerance: self.tolerance,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(short, long)]
    instance: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write an SVG of the planar solution.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct FanArgs {
    #[command(flatten)]
    common: SolveArgs,
    /// Number of equal sectors.
    #[arg(long, conflicts_with = "targets")]
    k: Option<usize>,
    /// Sector fractions, e.g. `1/3,2/3`.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "auto")]
    lift: Lift,
}

#[derive(Clone, Copy, ValueEnum)]
enum Lift {
    Auto,
    Always,
    Never,
}

#[derive(Args)]
struct ConeArgs {
    #[command(flatten)]
    common: SolveArgs,
    #[arg(long, default_value_t = 2)]
    k: usize,
}

#[derive(Args)]
struct ConeOnLineArgs {
    #[command(flatten)]
    common: SolveArgs,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    origin: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    direction: Vec<f64>,
}

#[derive(Args)]
struct SharedArgs {
    #[command(flatten)]
    common: SolveArgs,
    /// Accepted bisection error.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
}

#[derive(Args)]
struct StripesArgs {
    #[command(flatten)]
    common: SolveArgs,
    #[arg(long, default_value_t = 3)]
    k: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(short, long)]
    instance: PathBuf,
    #[arg(short, long)]
    result: PathBuf,
    /// Piece fractions; equal shares when absent.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    #[arg(long, default_value_t = 2e-6)]
    tol: f64,
}

#[derive(Args)]
struct CertifyArgs {
    /// JSON array of `[x, y]` samples of a closed loop.
    #[arg(long)]
    winding: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(short, long)]
    instance: PathBuf,
    #[arg(short, long)]
    result: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Found => 0,
        Status::NotFound => 2,
        Status::Infeasible | Status::GeneralPositionViolation | Status::ExceedsDeskScale => 3,
    }
}

fn parse_fraction(s: &str) -> anyhow::Result<f64> {
    let s = s.trim();
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
            if b == 0.0 {
                bail!("zero denominator in `{s}`");
            }
            Ok(a / b)
        }
        None => Ok(s.parse()?),
    }
}

fn parse_targets(raw: &[String]) -> anyhow::Result<Vec<f64>> {
    raw.iter().map(|s| parse_fraction(s).with_context(|| format!("bad target `{s}`"))).collect()
}

fn emit(text: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

fn load(path: &Path) -> anyhow::Result<Instance> {
    masses::load_instance(path).with_context(|| format!("reading {}", path.display()))
}

fn finish_report(args: &SolveArgs, inst: &Instance, report: &SolveReport) -> anyhow::Result<u8> {
    emit(&json::to_string(report)?, args.output.as_deref())?;
    if let Some(svg) = &args.svg {
        plot::plot_svg(inst, &report.solution, svg)?;
    }
    eprintln!("{}: {:?} in {:.3} s", report.problem, report.status, report.wall_clock);
    if !report.message.is_empty() {
        eprintln!("{}", report.message);
    }
    Ok(status_code(report.status))
}

fn gen(a: &GenArgs) -> anyhow::Result<u8> {
    let inst = match a.kind {
        Kind::Random => masses::random_instance(a.d, a.m, a.atoms, a.seed)?,
        Kind::Simplex => masses::make_simplex_counterexample(a.d)?,
        Kind::Tight => masses::make_projective_tight_instance_seeded(a.d, a.atoms, a.seed)?,
        Kind::HsRandom => projective::random_hs_instance(a.d, a.seed)?,
        Kind::HsPlanted => projective::planted_hs_instance(a.d, a.seed)?,
    };
    emit(&masses::instance_to_json(&inst)?, a.output.as_deref())?;
    Ok(0)
}

/// Atoms pushed through the result's projective map, measured without smoothing.
fn transformed(inst: &Instance, map: &ProjectiveMap) -> anyhow::Result<Instance> {
    let mut masses = Vec::with_capacity(inst.masses.len());
    for mu in &inst.masses {
        let atoms = mu.atoms.iter().map(|a| geometry::apply_projective(map, a.as_slice())).collect::<Result<Vec<_>, _>>()?;
        masses.push(MassDistribution::new(mu.name.clone(), atoms, mu.weights.clone(), 0.0)?);
    }
    Ok(Instance::new(inst.dimension, masses, inst.families.clone())?)
}

/// Regions of a result file paired with the (possibly transformed) instance
/// and the masses each region partitions.
fn result_regions(inst: &Instance, value: &serde_json::Value) -> anyhow::Result<(Instance, Vec<(Region, Vec<usize>)>)> {
    if let (Some(map), Some(cuts)) = (value.get("transform"), value.get("cuts")) {
        let map: Option<ProjectiveMap> = serde_json::from_value(map.clone())?;
        let cuts: Vec<OrientedHyperplane> = serde_json::from_value(cuts.clone())?;
        if let (Some(map), false) = (map, cuts.is_empty()) {
            let moved = transformed(inst, &map)?;
            let fams = inst.families.clone().unwrap_or_else(|| vec![(0..inst.num_masses()).collect()]);
            if fams.len() != cuts.len() {
                bail!("{} cuts for {} families", cuts.len(), fams.len());
            }
            let pairs = cuts.into_iter().map(|plane| Region::Halfspace { plane }).zip(fams).collect();
            return Ok((moved, pairs));
        }
    }
    Ok((inst.clone(), untransformed_regions(inst, value)?))
}

fn untransformed_regions(inst: &Instance, value: &serde_json::Value) -> anyhow::Result<Vec<(Region, Vec<usize>)>> {
    let pick = |key: &str| -> anyhow::Result<Vec<Region>> {
        match value.get(key) {
            Some(v) => Ok(serde_json::from_value(v.clone())?),
            None => Ok(Vec::new()),
        }
    };
    let mut regions = pick("lifted_solution")?;
    if regions.is_empty() {
        regions = pick("solution")?;
    }
    if regions.is_empty() {
        if let Some(search) = value.get("search") {
            return untransformed_regions(inst, search);
        }
        bail!("result has no regions to verify");
    }
    let all: Vec<usize> = (0..inst.num_masses()).collect();
    match &inst.families {
        Some(f) if f.len() == regions.len() && regions.len() > 1 => Ok(regions.into_iter().zip(f.iter().cloned()).collect()),
        _ => Ok(regions.into_iter().map(|r| (r, all.clone())).collect()),
    }
}

fn verify(a: &VerifyArgs) -> anyhow::Result<u8> {
    let inst = load(&a.instance)?;
    let text = std::fs::read_to_string(&a.result).with_context(|| format!("reading {}", a.result.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let mut pass = true;
    let mut checks = Vec::new();
    let (inst, pairs) = result_regions(&inst, &value)?;
    for (region, idx) in pairs {
        let targets = match &a.targets {
            Some(t) => parse_targets(t)?,
            None => vec![1.0 / region.pieces() as f64; region.pieces()],
        };
        let ms: Vec<_> = idx.iter().map(|&i| inst.masses[i].clone()).collect();
        let check = projective::verify_partition(&ms, &region, &targets, a.tol)?;
        pass &= check.pass;
        checks.push(check);
    }
    emit(&json::to_string(&checks)?, None)?;
    Ok(if pass { 0 } else { 2 })
}

fn certify(a: &CertifyArgs) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(&a.winding).with_context(|| format!("reading {}", a.winding.display()))?;
    let samples: Vec<[f64; 2]> = serde_json::from_str(&text).context("loop file must be a JSON array of [x, y]")?;
    let w = solvers::winding_number(&samples)?;
    emit(&w.to_string(), None)?;
    Ok(0)
}

fn plot_cmd(a: &PlotArgs) -> anyhow::Result<u8> {
    let inst = load(&a.instance)?;
    let regions: Vec<Region> = match &a.result {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            match value.get("solution") {
                Some(v) => serde_json::from_value(v.clone())?,
                None => Vec::new(),
            }
        }
        None => Vec::new(),
    };
    plot::plot_svg(&inst, &regions, &a.output)?;
    Ok(0)
}

fn hs_summary(r: &HsAfterTransformResult, started: Instant) {
    eprintln!("projective_hs: {:?} in {:.3} s; exact {:?}", r.status, started.elapsed().as_secs_f64(), r.exact_flags);
    if !r.message.is_empty() {
        eprintln!("{}", r.message);
    }
}

fn stripes_summary(r: &StripesResult, started: Instant) {
    eprintln!("stripes: {:?} in {:.3} s", r.status, started.elapsed().as_secs_f64());
    if !r.message.is_empty() {
        eprintln!("{}", r.message);
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Gen(a) => gen(&a),
        Command::Fan(a) => {
            let inst = load(&a.common.instance)?;
            let targets = match (&a.k, &a.targets) {
                (_, Some(t)) => parse_targets(t)?,
                (Some(k), None) if *k >= 2 => vec![1.0 / *k as f64; *k],
                _ => bail!("give --k ≥ 2 or --targets"),
            };
            let lift = match a.lift {
                Lift::Auto => LiftMode::Auto,
                Lift::Always => LiftMode::Always,
                Lift::Never => LiftMode::Never,
            };
            let r = solvers::solve_fan(&inst, &targets, lift, &a.common.solver.config())?;
            finish_report(&a.common, &inst, &r)
        }
        Command::Cone(a) => {
            let inst = load(&a.common.instance)?;
            let r = solvers::solve_cone(&inst, a.k, &a.common.solver.config())?;
            finish_report(&a.common, &inst, &r)
        }
        Command::ConeOnLine(a) => {
            let inst = load(&a.common.instance)?;
            let r = solvers::solve_cone_apex_on_line(&inst, &a.origin, &a.direction, &a.common.solver.config())?;
            finish_report(&a.common, &inst, &r)
        }
        Command::DoubleWedge(a) => {
            let inst = load(&a.instance)?;
            let r = solvers::solve_double_wedge(&inst, &a.solver.config())?;
            finish_report(&a, &inst, &r)
        }
        Command::SharedH1(a) => {
            let inst = load(&a.common.instance)?;
            let r = solvers::solve_shared_h1(&inst, &a.common.solver.config(), a.eps)?;
            finish_report(&a.common, &inst, &r)
        }
        Command::ProjectiveHs(a) => {
            let inst = load(&a.instance)?;
            let started = Instant::now();
            let r = projective::hs_after_transform(&inst, &a.solver.config())?;
            emit(&json::to_string(&r)?, a.output.as_deref())?;
            hs_summary(&r, started);
            Ok(status_code(r.status))
        }
        Command::Stripes(a) => {
            let inst = load(&a.common.instance)?;
            let started = Instant::now();
            let r = projective::stripes(&inst, a.k, &a.common.solver.config())?;
            emit(&json::to_string(&r)?, a.common.output.as_deref())?;
            if let Some(svg) = &a.common.svg {
                plot::plot_svg(&inst, &r.search.solution, svg)?;
            }
            stripes_summary(&r, started);
            Ok(status_code(r.status))
        }
        Command::Verify(a) => verify(&a),
        Command::Certify(a) => certify(&a),
        Command::Plot(a) => plot_cmd(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<masspart::Error>() {
                Some(masspart::Error::GeneralPositionViolation(_)) => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_parse() {
        assert_eq!(parse_fraction("1/4").unwrap(), 0.25);
        assert_eq!(parse_fraction(" 0.5 ").unwrap(), 0.5);
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("x").is_err());
    }

    #[test]
    fn exit_codes_follow_status() {
        assert_eq!(status_code(Status::Found), 0);
        assert_eq!(status_code(Status::NotFound), 2);
        assert_eq!(status_code(Status::Infeasible), 3);
        assert_eq!(status_code(Status::GeneralPositionViolation), 3);
    }
}
