//! Multistart zero search: seeded sampling, ε-continuation, and local
//! refinement by Levenberg–Marquardt with a Nelder–Mead fallback.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::manifold::Manifold;
use super::SolverConfig;

/// Smoothing radii of the continuation ladder above the instance's own.
const LADDER: [f64; 5] = [0.3, 0.1, 0.03, 0.01, 0.003];
/// Upper bound on the number of sampled starting points.
const SAMPLE_CAP: usize = 4096;
/// LM iterations per intermediate continuation stage.
const STAGE_ITERS: usize = 25;
/// Residuals are driven this far below the tolerance.
const OVERSHOOT: f64 = 1e-3;

/// A zero-finding problem on a configuration manifold.
pub(crate) trait Problem: Sync {
    fn manifold(&self) -> &Manifold;
    /// Smoothing radius of each stage; the last is the instance's.
    fn stages(&self) -> &[f64];
    /// Residual at a stage, `None` where the construction is undefined.
    fn residual(&self, x: &[f64], stage: usize) -> Option<Vec<f64>>;
    /// Full residual (all masses, all pieces) at the final stage.
    fn verify(&self, x: &[f64]) -> Option<f64>;
}

/// `LADDER` entries above `eps`, then `eps`.
pub(crate) fn ladder(eps: f64) -> Vec<f64> {
    let mut v: Vec<f64> = LADDER.iter().copied().filter(|&e| e > 1.5 * eps).collect();
    v.push(eps);
    v
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub found: bool,
    pub evaluations: u64,
}

struct Counter<'a, P: Problem + ?Sized> {
    p: &'a P,
    evals: u64,
}

impl<P: Problem + ?Sized> Counter<'_, P> {
    fn eval(&mut self, x: &[f64], stage: usize) -> Option<Vec<f64>> {
        self.evals += 1;
        self.p.residual(x, stage)
    }
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq_norm(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Runs the full search. `seeds` are tried before the sampled starts.
pub(crate) fn search<P: Problem + ?Sized>(p: &P, cfg: &SolverConfig, seeds: Vec<Vec<f64>>) -> Outcome {
    let m = p.manifold();
    let dim = m.dim();
    let stages = p.stages();
    let coarse = stages.iter().position(|&e| e <= 0.1).unwrap_or(stages.len() - 1);

    let n_samples = (cfg.grid_resolution as f64)
        .powi(dim as i32)
        .min(SAMPLE_CAP as f64)
        .max(cfg.multistarts as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples: Vec<Vec<f64>> = (0..n_samples).map(|_| m.random(&mut rng)).collect();
    let scores: Vec<f64> = samples
        .par_iter()
        .map(|x| p.residual(x, coarse).map_or(f64::INFINITY, |r| inf_norm(&r)))
        .collect();
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut starts = seeds;
    starts.extend(order.iter().take(cfg.multistarts).map(|&i| samples[i].clone()));
    let mut evaluations = n_samples as u64;

    let batch = rayon::current_num_threads().max(1);
    let mut best: Option<Outcome> = None;
    for chunk in starts.chunks(batch) {
        let results: Vec<Outcome> = chunk.par_iter().map(|x0| refine(p, cfg, x0.clone())).collect();
        for r in results {
            evaluations += r.evaluations;
            let better = best.as_ref().map_or(true, |b| r.value < b.value);
            if r.found {
                return Outcome { evaluations, ..r };
            }
            if better {
                best = Some(r);
            }
        }
    }
    let b = best.unwrap_or(Outcome { x: Vec::new(), value: f64::INFINITY, found: false, evaluations: 0 });
    Outcome { evaluations, ..b }
}

/// Continuation from the coarsest stage down to the instance smoothing.
pub(crate) fn refine<P: Problem + ?Sized>(p: &P, cfg: &SolverConfig, x0: Vec<f64>) -> Outcome {
    let stages = p.stages();
    let last = stages.len() - 1;
    let target = OVERSHOOT * cfg.tolerance;
    let mut c = Counter { p, evals: 0 };
    let mut budget = cfg.max_refine_iters;
    let mut x = x0;
    for s in 0..last {
        let iters = STAGE_ITERS.min(budget);
        let (y, used) = lm(&mut c, x, s, iters, target, stages[s]);
        x = y;
        budget -= used;
    }
    let mut rounds = 0;
    while budget > 0 && rounds < 4 {
        let (y, used) = lm(&mut c, x, last, budget, target, stages[last]);
        x = y;
        budget -= used;
        let done = c.eval(&x, last).map_or(false, |r| inf_norm(&r) <= target);
        if done || budget == 0 {
            break;
        }
        let (y, used) = nelder_mead(&mut c, x, last, budget.min(150), stages[last]);
        x = y;
        budget -= used;
        rounds += 1;
    }
    let value = p.verify(&x).unwrap_or(f64::INFINITY);
    Outcome { found: value <= cfg.tolerance, x, value, evaluations: c.evals }
}

/// Finite-difference step for a smoothing radius.
fn fd_step(eps: f64) -> f64 {
    if eps > 0.0 {
        (1e-3 * eps).max(1e-8)
    } else {
        1e-7
    }
}

fn lm<P: Problem + ?Sized>(
    c: &mut Counter<'_, P>,
    x0: Vec<f64>,
    stage: usize,
    max_iter: usize,
    target: f64,
    eps: f64,
) -> (Vec<f64>, usize) {
    let m = c.p.manifold();
    let n = m.dim();
    let Some(mut r) = c.eval(&x0, stage) else {
        return (x0, 0);
    };
    let mut x = x0;
    let mut lambda = 1e-4;
    let h = fd_step(eps);
    let max_step = 0.5;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        if inf_norm(&r) <= target {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(r.len(), n);
        let mut ok = true;
        for i in 0..n {
            let mut v = vec![0.0; n];
            v[i] = h;
            match c.eval(&m.retract(&x, &v), stage) {
                Some(ri) if ri.len() == r.len() => {
                    for (row, (a, b)) in ri.iter().zip(&r).enumerate() {
                        jac[(row, i)] = (a - b) / h;
                    }
                }
                _ => ok = false,
            }
        }
        if !ok {
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        if g.norm() == 0.0 {
            break;
        }
        let scale = jtj.diagonal().max().max(1e-12);
        let f0 = sq_norm(&r);
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * scale;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let mut delta = -chol.solve(&g);
            let dn = delta.norm();
            if dn > max_step {
                delta *= max_step / dn;
            }
            let y = m.retract(&x, delta.as_slice());
            match c.eval(&y, stage) {
                Some(ry) if sq_norm(&ry) < f0 => {
                    x = y;
                    r = ry;
                    lambda = (lambda / 3.0).max(1e-15);
                    improved = true;
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !improved {
            break;
        }
    }
    (x, it)
}

/// Nelder–Mead on `‖r‖²` in the tangent chart at `x0`.
fn nelder_mead<P: Problem + ?Sized>(
    c: &mut Counter<'_, P>,
    x0: Vec<f64>,
    stage: usize,
    max_iter: usize,
    eps: f64,
) -> (Vec<f64>, usize) {
    let m = c.p.manifold();
    let n = m.dim();
    let step = (2.0 * eps).clamp(1e-4, 0.2);
    let f = |v: &[f64], c: &mut Counter<'_, P>| c.eval(&m.retract(&x0, v), stage).map_or(f64::INFINITY, |r| sq_norm(&r));
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let z = vec![0.0; n];
    let fz = f(&z, c);
    simplex.push((z, fz));
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = step;
        let fv = f(&v, c);
        simplex.push((v, fv));
    }
    let mut it = 0;
    while it < max_iter {
        it += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 == 0.0 || (simplex[n].1 - simplex[0].1).abs() <= 1e-30 {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|s| s.0[j]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (worst.0[j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr, c);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe, c);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < worst.1 { along(-0.5) } else { along(0.5) };
            let fc = f(&xc, c);
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let v: Vec<f64> = (0..n).map(|j| best[j] + 0.5 * (s.0[j] - best[j])).collect();
                    let fv = f(&v, c);
                    *s = (v, fv);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    if simplex[0].1.is_finite() {
        (m.retract(&x0, &simplex[0].0), it)
    } else {
        (x0, it)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Zero of `x ↦ (x_1 − 0.6, x_2 − 0.0)` restricted to `S^2`.
    struct Toy {
        m: Manifold,
        stages: Vec<f64>,
    }

    impl Problem for Toy {
        fn manifold(&self) -> &Manifold {
            &self.m
        }
        fn stages(&self) -> &[f64] {
            &self.stages
        }
        fn residual(&self, x: &[f64], _stage: usize) -> Option<Vec<f64>> {
            Some(vec![x[0] - 0.6, x[1]])
        }
        fn verify(&self, x: &[f64]) -> Option<f64> {
            Some((x[0] - 0.6).abs().max(x[1].abs()))
        }
    }

    #[test]
    fn finds_toy_zero_deterministically() {
        let p = Toy { m: Manifold::Sphere(3), stages: ladder(1e-3) };
        let cfg = SolverConfig::default();
        let a = search(&p, &cfg, Vec::new());
        let b = search(&p, &cfg, Vec::new());
        assert!(a.found && a.value <= 1e-9);
        assert_eq!(a.x, b.x);
        assert_eq!(a.evaluations, b.evaluations);
        assert!((a.x[2].abs() - 0.8).abs() < 1e-8);
    }

    #[test]
    fn ladder_ends_at_instance_smoothing() {
        assert_eq!(ladder(1e-3), vec![0.3, 0.1, 0.03, 0.01, 0.003, 1e-3]);
        assert_eq!(ladder(0.05), vec![0.3, 0.1, 0.05]);
        assert_eq!(*ladder(0.0).last().unwrap(), 0.0);
    }
}
