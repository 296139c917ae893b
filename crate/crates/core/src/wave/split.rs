//! Pairs `(a, d)` standing for a value `a` and a perturbed value `a + d`, with
//! the difference `d` propagated exactly enough to survive when it is far
//! below the rounding unit of `a`.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub base: f64,
    pub delta: f64,
}

impl Split {
    pub const fn new(base: f64, delta: f64) -> Self {
        Self { base, delta }
    }

    pub const fn exact(base: f64) -> Self {
        Self { base, delta: 0.0 }
    }

    pub fn perturbed(self) -> f64 {
        self.base + self.delta
    }

    pub fn sqrt(self) -> Self {
        let root = self.base.sqrt();
        let hat = self.perturbed().sqrt();
        let sum = root + hat;
        Self::new(root, if sum > 0.0 { self.delta / sum } else { 0.0 })
    }

    pub fn recip(self) -> Self {
        Self::exact(1.0) / self
    }
}

impl Add for Split {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.base + o.base, self.delta + o.delta)
    }
}

impl Sub for Split {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.base - o.base, self.delta - o.delta)
    }
}

impl Neg for Split {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.base, -self.delta)
    }
}

impl Mul for Split {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.base * o.base,
            self.base * o.delta + self.delta * o.base + self.delta * o.delta,
        )
    }
}

impl std::ops::Div for Split {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let base = self.base / o.base;
        let delta = (self.delta * o.base - self.base * o.delta) / (o.base * o.perturbed());
        Self::new(base, delta)
    }
}
