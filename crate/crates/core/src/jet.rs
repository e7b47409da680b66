//! Truncated Taylor series ("jets") for forward-mode derivatives of arbitrary order.
//!
//! A jet of order `k` at a point `x` stores `c_j = f^(j)(x) / j!` for `j = 0..=k`.
//! Arithmetic on jets is arithmetic on truncated power series, so derivatives of
//! compositions come out exact up to rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest supported order.
pub const MAX_ORDER: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    coeffs: [f64; MAX_ORDER + 1],
    order: usize,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut coeffs = [0.0; MAX_ORDER + 1];
        coeffs[0] = value;
        Self { coeffs, order }
    }

    /// The independent variable at `x`.
    pub fn variable(x: f64, order: usize) -> Self {
        let mut j = Self::constant(x, order);
        if order >= 1 {
            j.coeffs[1] = 1.0;
        }
        j
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(0.0, order)
    }

    pub fn from_coeffs(coeffs: &[f64], order: usize) -> Self {
        let mut j = Self::zero(order);
        for (dst, src) in j.coeffs.iter_mut().zip(coeffs).take(order + 1) {
            *dst = *src;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient `f^(k)(x) / k!`.
    pub fn coeff(&self, k: usize) -> f64 {
        if k <= self.order {
            self.coeffs[k]
        } else {
            0.0
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..=self.order]
    }

    /// `f^(k)(x)`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    pub fn scale(mut self, s: f64) -> Self {
        for c in &mut self.coeffs[..=self.order] {
            *c *= s;
        }
        self
    }

    pub fn add_scalar(mut self, s: f64) -> Self {
        self.coeffs[0] += s;
        self
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0, self.order) / self
    }

    pub fn exp(self) -> Self {
        // e' = e * a'  =>  k e_k = sum_{j=1..k} j a_j e_{k-j}
        let n = self.order;
        let mut out = Self::zero(n);
        out.coeffs[0] = self.coeffs[0].exp();
        for k in 1..=n {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.coeffs[j] * out.coeffs[k - j];
            }
            out.coeffs[k] = s / k as f64;
        }
        out
    }

    /// Returns `(sin a, cos a)`.
    pub fn sin_cos(self) -> (Self, Self) {
        let n = self.order;
        let mut s = Self::zero(n);
        let mut c = Self::zero(n);
        s.coeffs[0] = self.coeffs[0].sin();
        c.coeffs[0] = self.coeffs[0].cos();
        for k in 1..=n {
            let mut ds = 0.0;
            let mut dc = 0.0;
            for j in 1..=k {
                let w = j as f64 * self.coeffs[j];
                ds += w * c.coeffs[k - j];
                dc -= w * s.coeffs[k - j];
            }
            s.coeffs[k] = ds / k as f64;
            c.coeffs[k] = dc / k as f64;
        }
        (s, c)
    }

    pub fn powi(self, p: u32) -> Self {
        let mut out = Jet::constant(1.0, self.order);
        for _ in 0..p {
            out = out * self;
        }
        out
    }

    /// Evaluates the polynomial `sum_k coeffs[k] t^k` on a jet by Horner's rule.
    pub fn polynomial(coeffs: &[f64], t: Jet) -> Jet {
        let mut acc = Jet::zero(t.order);
        for &c in coeffs.iter().rev() {
            acc = (acc * t).add_scalar(c);
        }
        acc
    }

    fn common_order(&self, other: &Self) -> usize {
        self.order.min(other.order)
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let n = self.common_order(&rhs);
        let mut out = Jet::zero(n);
        for k in 0..=n {
            out.coeffs[k] = self.coeffs[k] + rhs.coeffs[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let n = self.common_order(&rhs);
        let mut out = Jet::zero(n);
        for k in 0..=n {
            let mut s = 0.0;
            for j in 0..=k {
                s += self.coeffs[j] * rhs.coeffs[k - j];
            }
            out.coeffs[k] = s;
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        let n = self.common_order(&rhs);
        let b0 = rhs.coeffs[0];
        let mut out = Jet::zero(n);
        for k in 0..=n {
            let mut s = self.coeffs[k];
            for j in 1..=k {
                s -= rhs.coeffs[j] * out.coeffs[k - j];
            }
            out.coeffs[k] = s / b0;
        }
        out
    }
}
