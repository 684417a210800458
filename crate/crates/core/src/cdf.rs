//! Nondecreasing piecewise-linear cumulative functions built from weighted
//! ramps, with plateau-aware inversion.

/// One unit of mass spread uniformly over `[lo, hi]`; `lo == hi` is a jump
/// that counts half at the jump point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Ramp {
    pub lo: f64,
    pub hi: f64,
    pub w: f64,
}

/// Nodes `(x, y)` in increasing `x`; two nodes with equal `x` form a jump.
#[derive(Clone, Debug)]
pub(crate) struct Cdf {
    xs: Vec<f64>,
    ys: Vec<f64>,
    pub total: f64,
}

impl Cdf {
    /// Cumulative of `base + Σ ramps` on `[start, end]`. Ramps must lie inside
    /// the domain.
    pub fn new(ramps: &[Ramp], start: f64, end: f64, base: f64) -> Self {
        // events: (x, kind, slope, weight); kind 0 = ramp start, 1 = jump, 2 = ramp end
        let mut ev: Vec<(f64, u8, f64, f64)> = Vec::with_capacity(2 * ramps.len());
        for r in ramps.iter() {
            if r.hi > r.lo {
                let s = r.w / (r.hi - r.lo);
                ev.push((r.lo, 0, s, r.w));
                ev.push((r.hi, 2, s, r.w));
            } else {
                ev.push((r.lo, 1, 0.0, r.w));
            }
        }
        ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut xs = Vec::with_capacity(ev.len() + 2);
        let mut ys = Vec::with_capacity(ev.len() + 2);
        // `done`: weight of finished ramps and jumps; `open`: weight of active ramps
        let mut done = base;
        let mut open = 0.0;
        let mut y = base;
        let mut slope = 0.0;
        let mut active = 0usize;
        let mut x_prev = start;
        xs.push(start);
        ys.push(base);
        let mut i = 0;
        while i < ev.len() {
            let x = ev[i].0;
            y = (y + slope * (x - x_prev)).clamp(done, done + open);
            x_prev = x;
            let mut jump = 0.0;
            let mut j = i;
            while j < ev.len() && ev[j].0 == x {
                let (_, kind, s, w) = ev[j];
                match kind {
                    0 => {
                        slope += s;
                        open += w;
                        active += 1;
                    }
                    1 => jump += w,
                    _ => {
                        slope -= s;
                        open -= w;
                        done += w;
                        active -= 1;
                    }
                }
                j += 1;
            }
            if active == 0 {
                slope = 0.0;
                open = 0.0;
                y = done;
            }
            let y_left = y.max(*ys.last().unwrap());
            xs.push(x);
            ys.push(y_left);
            if jump > 0.0 {
                done += jump;
                y = y_left + jump;
                xs.push(x);
                ys.push(y);
            } else {
                y = y_left;
            }
            i = j;
        }
        let y_end = if active == 0 { done } else { (y + slope * (end - x_prev)).clamp(done, done + open) };
        xs.push(end);
        ys.push(y_end.max(*ys.last().unwrap()));
        let total = *ys.last().unwrap();
        Cdf { xs, ys, total }
    }

    /// `inf {x : F(x) ≥ level}`, clamped to the domain.
    pub fn lower(&self, level: f64) -> f64 {
        let n = self.xs.len();
        let i = self.ys.partition_point(|&y| y < level);
        if i == 0 {
            return self.xs[0];
        }
        if i == n {
            return self.xs[n - 1];
        }
        let (x0, x1, y0, y1) = (self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]);
        if x1 == x0 || y1 == y0 {
            return x1;
        }
        (x0 + (level - y0) / (y1 - y0) * (x1 - x0)).clamp(x0, x1)
    }

    /// `sup {x : F(x) ≤ level}`, clamped to the domain.
    pub fn upper(&self, level: f64) -> f64 {
        let n = self.xs.len();
        let i = self.ys.partition_point(|&y| y <= level);
        if i == 0 {
            return self.xs[0];
        }
        if i == n {
            return self.xs[n - 1];
        }
        let (x0, x1, y0, y1) = (self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]);
        if x1 == x0 || y1 == y0 {
            return x0;
        }
        (x0 + (level - y0) / (y1 - y0) * (x1 - x0)).clamp(x0, x1)
    }

    /// Midpoint of the set where `F` is within `tol` of `level`.
    pub fn quantile(&self, level: f64, tol: f64) -> f64 {
        0.5 * (self.lower(level - tol) + self.upper(level + tol))
    }

    /// `F(x)` with the half rule at jumps.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = self.xs.partition_point(|&xi| xi < x);
        if i == n {
            return self.ys[n - 1];
        }
        if self.xs[i] == x {
            let mut j = i;
            while j + 1 < n && self.xs[j + 1] == x {
                j += 1;
            }
            return 0.5 * (self.ys[i] + self.ys[j]);
        }
        if i == 0 {
            return self.ys[0];
        }
        let (x0, x1, y0, y1) = (self.xs[i - 1], self.xs[i], self.ys[i - 1], self.ys[i]);
        y0 + (x - x0) / (x1 - x0) * (y1 - y0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_and_ramps() {
        let r = vec![
            Ramp { lo: 1.0, hi: 1.0, w: 1.0 },
            Ramp { lo: 2.0, hi: 4.0, w: 2.0 },
            Ramp { lo: 3.0, hi: 3.0, w: 1.0 },
        ];
        let f = Cdf::new(&r, 0.0, 10.0, 0.0);
        assert_eq!(f.total, 4.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(2.5), 1.5);
        assert_eq!(f.eval(3.0), 2.5);
        assert_eq!(f.eval(5.0), 4.0);
        // plateau [1, 2] at level 1
        assert!((f.quantile(1.0, 1e-12) - 1.5).abs() < 1e-11);
        // jump at 1 spans level 0.5
        assert_eq!(f.quantile(0.5, 1e-12), 1.0);
        assert!((f.quantile(1.5, 1e-12) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn overlapping_ramps_invert() {
        let r = vec![Ramp { lo: 0.0, hi: 2.0, w: 1.0 }, Ramp { lo: 1.0, hi: 3.0, w: 1.0 }];
        let f = Cdf::new(&r, 0.0, 3.0, 0.0);
        for (x, y) in [(0.5, 0.25), (1.5, 1.0), (2.0, 1.5), (2.5, 1.75), (3.0, 2.0)] {
            assert!((f.eval(x) - y).abs() < 1e-12, "{x}");
        }
        for x in [0.25, 0.9, 1.3, 2.0, 2.7] {
            let y = f.eval(x);
            assert!((f.quantile(y, 1e-14) - x).abs() < 1e-12, "{x}");
        }
    }
}
