//! Configuration manifolds as flat coordinate vectors with local charts.
//!
//! Every chart is centered at the current point: a tangent vector `v` is
//! mapped through an orthonormal tangent basis and the result is
//! re-orthonormalized, so there are no chart seams to stall on.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{axpy, gram_schmidt, normalize_in_place, orthonormal_complement};

#[derive(Clone, Debug)]
pub(crate) enum Manifold {
    /// `S^{n-1} ⊂ R^n`.
    Sphere(usize),
    /// Orthonormal pairs `(x, y)` in `R^n`, stored `[x, y]`.
    Stiefel2(usize),
    /// Oriented line inside a `k`-subspace of `R^n`, stored as `k` basis
    /// vectors with the line first.
    Flag { n: usize, k: usize },
    /// A real interval parameter; `scale` sets both the sampling range
    /// `[-scale, scale]` and the unit of tangent steps.
    Real { scale: f64 },
    Product(Vec<Manifold>),
}

fn gaussian<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_orthonormal<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<f64> {
    loop {
        let vs: Vec<Vec<f64>> = (0..k).map(|_| gaussian(rng, n)).collect();
        if let Some(b) = gram_schmidt(&vs) {
            return b.concat();
        }
    }
}

impl Manifold {
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Sphere(n) => n - 1,
            Manifold::Stiefel2(n) => 2 * n - 3,
            Manifold::Flag { n, k } => (n - 1) + (k - 1) * (n - k),
            Manifold::Real { .. } => 1,
            Manifold::Product(ms) => ms.iter().map(Manifold::dim).sum(),
        }
    }

    /// Length of the coordinate vector.
    pub fn len(&self) -> usize {
        match self {
            Manifold::Sphere(n) => *n,
            Manifold::Stiefel2(n) => 2 * n,
            Manifold::Flag { n, k } => n * k,
            Manifold::Real { .. } => 1,
            Manifold::Product(ms) => ms.iter().map(Manifold::len).sum(),
        }
    }

    pub fn random<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Manifold::Sphere(n) => random_orthonormal(rng, *n, 1),
            Manifold::Stiefel2(n) => random_orthonormal(rng, *n, 2),
            Manifold::Flag { n, k } => random_orthonormal(rng, *n, *k),
            Manifold::Real { scale } => vec![rng.gen_range(-*scale..=*scale)],
            Manifold::Product(ms) => ms.iter().flat_map(|m| m.random(rng)).collect(),
        }
    }

    /// The point reached from `x` along tangent coordinates `v`.
    pub fn retract(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Manifold::Sphere(n) => {
                let basis = orthonormal_complement(&[x.to_vec()], *n);
                let mut y = x.to_vec();
                for (b, &t) in basis.iter().zip(v) {
                    axpy(&mut y, t, b);
                }
                normalize_in_place(&mut y);
                y
            }
            Manifold::Stiefel2(n) => {
                let (a, b) = x.split_at(*n);
                let comp = orthonormal_complement(&[a.to_vec(), b.to_vec()], *n);
                let m = n - 2;
                let mut x1 = a.to_vec();
                let mut y1 = b.to_vec();
                axpy(&mut x1, -v[0], b);
                axpy(&mut y1, v[0], a);
                for (i, c) in comp.iter().enumerate() {
                    axpy(&mut x1, v[1 + i], c);
                    axpy(&mut y1, v[1 + m + i], c);
                }
                reorthonormalize(vec![x1, y1], x)
            }
            Manifold::Flag { n, k } => {
                let vs: Vec<Vec<f64>> = x.chunks(*n).map(<[f64]>::to_vec).collect();
                let comp = orthonormal_complement(&vs, *n);
                let mut out = vs.clone();
                let mut idx = 0;
                // line within the subspace
                for j in 1..*k {
                    axpy(&mut out[0], v[idx], &vs[j]);
                    axpy(&mut out[j], -v[idx], &vs[0]);
                    idx += 1;
                }
                // line and the rest of the subspace toward the complement
                for j in 0..*k {
                    for c in &comp {
                        axpy(&mut out[j], v[idx], c);
                        idx += 1;
                    }
                }
                reorthonormalize(out, x)
            }
            Manifold::Real { scale } => vec![x[0] + scale * v[0]],
            Manifold::Product(ms) => {
                let mut out = Vec::with_capacity(x.len());
                let (mut xo, mut vo) = (0, 0);
                for m in ms {
                    let (l, d) = (m.len(), m.dim());
                    out.extend(m.retract(&x[xo..xo + l], &v[vo..vo + d]));
                    xo += l;
                    vo += d;
                }
                out
            }
        }
    }
}

fn reorthonormalize(vs: Vec<Vec<f64>>, fallback: &[f64]) -> Vec<f64> {
    match gram_schmidt(&vs) {
        Some(b) => b.concat(),
        None => fallback.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::dot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn orthonormal(x: &[f64], n: usize) -> bool {
        let vs: Vec<&[f64]> = x.chunks(n).collect();
        vs.iter().enumerate().all(|(i, a)| {
            vs.iter().enumerate().all(|(j, b)| {
                let t = if i == j { 1.0 } else { 0.0 };
                (dot(a, b) - t).abs() < 1e-12
            })
        })
    }

    #[test]
    fn dimensions() {
        assert_eq!(Manifold::Stiefel2(3).dim(), 3);
        assert_eq!(Manifold::Flag { n: 3, k: 2 }.dim(), 3);
        assert_eq!(Manifold::Flag { n: 4, k: 3 }.dim(), 5);
        assert_eq!(Manifold::Flag { n: 3, k: 3 }.dim(), 2);
        let p = Manifold::Product(vec![Manifold::Sphere(3), Manifold::Sphere(3)]);
        assert_eq!((p.dim(), p.len()), (4, 6));
    }

    #[test]
    fn retractions_stay_on_manifold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [Manifold::Sphere(4), Manifold::Stiefel2(3), Manifold::Stiefel2(4), Manifold::Flag { n: 4, k: 2 }] {
            let n = match m {
                Manifold::Sphere(n) | Manifold::Stiefel2(n) | Manifold::Flag { n, .. } => n,
                _ => unreachable!(),
            };
            let x = m.random(&mut rng);
            assert!(orthonormal(&x, n));
            let v: Vec<f64> = (0..m.dim()).map(|i| 0.1 * (i as f64 + 1.0)).collect();
            let y = m.retract(&x, &v);
            assert!(orthonormal(&y, n));
            let zero = m.retract(&x, &vec![0.0; m.dim()]);
            assert!(zero.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn tangent_directions_are_independent() {
        // every tangent coordinate moves the point in a distinct direction
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Manifold::Flag { n: 4, k: 2 };
        let x = m.random(&mut rng);
        let d = m.dim();
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1e-6;
                m.retract(&x, &v).iter().zip(&x).map(|(a, b)| (a - b) / 1e-6).collect()
            })
            .collect();
        let g = gram_schmidt(&cols);
        assert!(g.is_some());
    }
}
