//! Winding numbers of planar loops and degrees of sphere self-maps.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

/// Winding number about the origin of the closed loop through `samples`.
///
/// Needs at least 8 samples, each of norm at least `1e-12`, and consecutive
/// angular steps below `π/2`.
pub fn winding_number(samples: &[[f64; 2]]) -> Result<i64> {
    if samples.len() < 8 {
        return Err(Error::InvalidInput(format!("winding number needs at least 8 samples, got {}", samples.len())));
    }
    if let Some(i) = samples.iter().position(|p| p[0].hypot(p[1]) < 1e-12) {
        return Err(Error::ZeroVector { index: i });
    }
    let n = samples.len();
    let mut total = 0.0;
    for i in 0..n {
        let (a, b) = (samples[i], samples[(i + 1) % n]);
        let step = (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]);
        if step.abs() >= FRAC_PI_2 {
            return Err(Error::Aliasing { index: i, next: (i + 1) % n, step });
        }
        total += step;
    }
    Ok((total / TAU).round() as i64)
}

/// Triangulated unit sphere with outward-oriented faces.
#[derive(Clone, Debug)]
pub struct Icosphere {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn midpoint(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    unit([a[0] + b[0], a[1] + b[1], a[2] + b[2]])
}

/// Icosahedron subdivided `level` times (`10·4^level + 2` vertices).
pub fn icosphere(level: usize) -> Icosphere {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut vertices: Vec<[f64; 3]> = raw.iter().map(|v| unit(*v)).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache = std::collections::HashMap::new();
        let mut mid = |a: usize, b: usize, vs: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                vs.push(midpoint(&vs[a], &vs[b]));
                vs.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    for f in faces.iter_mut() {
        if det3(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]) < 0.0 {
            f.swap(1, 2);
        }
    }
    Icosphere { vertices, faces }
}

/// Signed solid angle of the spherical triangle `(a, b, c)`.
fn solid_angle(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    2.0 * det3(a, b, c).atan2(1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a))
}

/// Minimum norm of `f` accepted before reporting a possible zero.
pub const NEAR_ZERO: f64 = 1e-9;
/// Shortest mesh edge (radians) that is still split during refinement.
const MIN_EDGE: f64 = 1e-4;
/// Evaluations allowed while refining a single mesh triangle.
const MAX_EVALUATIONS: usize = 200_000;

fn eval_unit<F: Fn(&[f64; 3]) -> [f64; 3]>(f: &F, p: &[f64; 3]) -> Result<[f64; 3]> {
    let v = f(p);
    let n = dot3(&v, &v).sqrt();
    if !(n >= NEAR_ZERO) {
        return Err(Error::NearZero { norm: n });
    }
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// An edge is split when its image spans more than a quarter turn. The rule
/// only looks at the edge itself, so both triangles sharing an edge subdivide
/// it identically and the refined map stays continuous.
fn splits(dom: &[[f64; 3]; 3], img: &[[f64; 3]; 3], i: usize) -> bool {
    let j = (i + 1) % 3;
    dot3(&img[i], &img[j]) < 0.0 && dot3(&dom[i], &dom[j]) < MIN_EDGE.cos()
}

/// Signed area of the refined image of one mesh triangle.
///
/// A triangle with a cut edge is split into four. Cut edges get their
/// midpoint evaluated; the others get the geodesic midpoint of their end
/// images, which keeps them identical to the unsplit edge seen from the
/// neighbouring triangle.
fn triangle_area<F: Fn(&[f64; 3]) -> [f64; 3]>(f: &F, dom: [[f64; 3]; 3], img: [[f64; 3]; 3]) -> Result<f64> {
    let mut stack = vec![(dom, img)];
    let mut s = 0.0;
    let mut evaluations = 0usize;
    while let Some((d, g)) = stack.pop() {
        let cut = [splits(&d, &g, 0), splits(&d, &g, 1), splits(&d, &g, 2)];
        if !cut.iter().any(|c| *c) {
            s += solid_angle(&g[0], &g[1], &g[2]);
            continue;
        }
        let mut m = [[0.0; 3]; 3];
        let mut fm = [[0.0; 3]; 3];
        for i in 0..3 {
            let j = (i + 1) % 3;
            m[i] = midpoint(&d[i], &d[j]);
            fm[i] = if cut[i] {
                evaluations += 1;
                eval_unit(f, &m[i])?
            } else {
                midpoint(&g[i], &g[j])
            };
        }
        if evaluations > MAX_EVALUATIONS {
            return Err(Error::InvalidInput("degree refinement budget exhausted".into()));
        }
        stack.push(([d[0], m[0], m[2]], [g[0], fm[0], fm[2]]));
        stack.push(([d[1], m[1], m[0]], [g[1], fm[1], fm[0]]));
        stack.push(([d[2], m[2], m[1]], [g[2], fm[2], fm[1]]));
        stack.push(([m[0], m[1], m[2]], [fm[0], fm[1], fm[2]]));
    }
    Ok(s)
}

/// Degree of `x ↦ f(x)/‖f(x)‖` on `S^2`, from the signed area swept by the
/// images of an icosphere's triangles. Edges whose images lie more than a
/// quarter turn apart are split recursively.
pub fn sphere_map_degree<F: Fn(&[f64; 3]) -> [f64; 3]>(f: F, level: usize) -> Result<i64> {
    Ok(sphere_map_degree_raw(&f, level)?.round() as i64)
}

/// Unrounded covering number computed by [`sphere_map_degree`].
pub fn sphere_map_degree_raw<F: Fn(&[f64; 3]) -> [f64; 3]>(f: &F, level: usize) -> Result<f64> {
    if level < 3 {
        return Err(Error::InvalidInput(format!("subdivision level {level} below 3")));
    }
    let mesh = icosphere(level);
    let images: Vec<[f64; 3]> = mesh.vertices.iter().map(|v| eval_unit(f, v)).collect::<Result<_>>()?;
    let mut total = 0.0;
    for &[a, b, c] in &mesh.faces {
        let dom = [mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]];
        total += triangle_area(f, dom, [images[a], images[b], images[c]])?;
    }
    Ok(total / (4.0 * PI))
}

/// Degree certificate of `f` labelled with an apex parameter; the degree is
/// also returned for bracketing.
pub(crate) fn degree_certificate<F: Fn(&[f64; 3]) -> [f64; 3]>(
    label: &str,
    t: f64,
    f: F,
    level: usize,
) -> (super::Certificate, Option<i64>) {
    let (degree, covering) = match sphere_map_degree_raw(&f, level) {
        Ok(c) => (Some(c.round() as i64), Some(c)),
        Err(_) => (None, None),
    };
    (super::Certificate::Degree { label: label.into(), t, degree, covering }, degree)
}
