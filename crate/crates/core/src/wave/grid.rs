use crate::error::{Error, Result};

/// Periodic box `[-L/2, L/2)^d` with `n` points per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Torus {
    dim: usize,
    n: usize,
    length: f64,
    dx: f64,
}

impl Torus {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidMetric(format!("spatial dimension {dim} not in {{1, 2}}")));
        }
        if n < 4 {
            return Err(Error::InvalidMetric(format!("need at least 4 points per axis, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidMetric(format!("box length {length} must be positive")));
        }
        Ok(Self {
            dim,
            n,
            length,
            dx: length / n as f64,
        })
    }

    /// The unit box in one dimension.
    pub fn unit_line(n: usize) -> Self {
        Self::new(1, n, 1.0).expect("valid torus")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    fn index(&self, p: usize) -> [usize; 2] {
        [p % self.n, p / self.n]
    }

    pub fn coord(&self, p: usize) -> [f64; 2] {
        let [i, j] = self.index(p);
        let c = |i: usize| -0.5 * self.length + i as f64 * self.dx;
        if self.dim == 1 {
            [c(i), 0.0]
        } else {
            [c(i), c(j)]
        }
    }

    /// Neighbour of `p` shifted by `offset` cells along `axis`, wrapping around.
    pub fn shift(&self, p: usize, axis: usize, offset: isize) -> usize {
        let mut idx = self.index(p);
        let n = self.n as isize;
        idx[axis] = (idx[axis] as isize + offset).rem_euclid(n) as usize;
        idx[0] + self.n * idx[1]
    }

    /// Point nearest to `x`, wrapping periodically.
    pub fn nearest(&self, x: [f64; 2]) -> usize {
        let snap = |v: f64| {
            let i = ((v + 0.5 * self.length) / self.dx).round() as isize;
            i.rem_euclid(self.n as isize) as usize
        };
        if self.dim == 1 {
            snap(x[0])
        } else {
            snap(x[0]) + self.n * snap(x[1])
        }
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|p| f(self.coord(p))).collect()
    }

    /// Centered first difference along `axis`.
    pub fn d1(&self, u: &[f64], p: usize, axis: usize) -> f64 {
        (u[self.shift(p, axis, 1)] - u[self.shift(p, axis, -1)]) / (2.0 * self.dx)
    }

    /// Centered second difference `d_a d_b u`.
    pub fn d2(&self, u: &[f64], p: usize, a: usize, b: usize) -> f64 {
        if a == b {
            (u[self.shift(p, a, 1)] - 2.0 * u[p] + u[self.shift(p, a, -1)]) / (self.dx * self.dx)
        } else {
            let pp = self.shift(self.shift(p, a, 1), b, 1);
            let pm = self.shift(self.shift(p, a, 1), b, -1);
            let mp = self.shift(self.shift(p, a, -1), b, 1);
            let mm = self.shift(self.shift(p, a, -1), b, -1);
            (u[pp] - u[pm] - u[mp] + u[mm]) / (4.0 * self.dx * self.dx)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinates_and_wrapping() {
        let t = Torus::new(2, 8, 2.0).unwrap();
        assert_eq!(t.len(), 64);
        assert_eq!(t.coord(0), [-1.0, -1.0]);
        assert_eq!(t.coord(9), [-0.75, -0.75]);
        assert_eq!(t.shift(0, 0, -1), 7);
        assert_eq!(t.shift(0, 1, -1), 56);
        assert_eq!(t.nearest([0.98, -1.0]), 0);
        assert_eq!(t.nearest(t.coord(27)), 27);
    }

    #[test]
    fn differences_of_trig_functions() {
        let t = Torus::unit_line(256);
        let pi2 = 2.0 * std::f64::consts::PI;
        let u = t.sample(|x| (pi2 * x[0]).sin());
        let p = 100;
        let x = t.coord(p)[0];
        assert!((t.d1(&u, p, 0) - pi2 * (pi2 * x).cos()).abs() < 1e-3);
        assert!((t.d2(&u, p, 0, 0) + pi2 * pi2 * (pi2 * x).sin()).abs() < 1e-2);

        let t = Torus::new(2, 64, 1.0).unwrap();
        let u = t.sample(|x| (pi2 * x[0]).sin() * (pi2 * x[1]).sin());
        let p = 64 * 20 + 7;
        let [x, y] = t.coord(p);
        let want = pi2 * pi2 * (pi2 * x).cos() * (pi2 * y).cos();
        assert!((t.d2(&u, p, 0, 1) - want).abs() < 0.05 * pi2 * pi2);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Torus::new(3, 8, 1.0).is_err());
        assert!(Torus::new(1, 2, 1.0).is_err());
        assert!(Torus::new(1, 8, 0.0).is_err());
    }
}
