//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] of order `m` stores the normalized Taylor coefficients
//! `c[k] = f^(k)(x0) / k!` for `k = 0..=m`. Arithmetic on jets propagates
//! derivatives exactly (up to rounding), which is what the series recursions
//! need: each `d/dx` in the recursion consumes one order.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = value;
        Jet { c }
    }

    /// The independent variable `x0 + t`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        c[0] = x0;
        if order >= 1 {
            c[1] = 1.0;
        }
        Jet { c }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        assert!(!c.is_empty(), "a jet needs at least the value coefficient");
        Jet { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.c.get(k).copied().unwrap_or(0.0)
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for j in 2..=k {
            fact *= j as f64;
        }
        self.coeff(k) * fact
    }

    /// Jet of f'. Loses one order; an order-0 jet differentiates to zero.
    pub fn differentiate(&self) -> Jet {
        if self.c.len() == 1 {
            return Jet::constant(0.0, 0);
        }
        let c = (1..self.c.len()).map(|k| k as f64 * self.c[k]).collect();
        Jet { c }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let mut c = self.c.clone();
        c.resize(order + 1, 0.0);
        Jet { c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Quotient; `None` when the divisor's value is zero.
    pub fn checked_div(&self, rhs: &Jet) -> Option<Jet> {
        let b0 = rhs.c[0];
        if b0 == 0.0 {
            return None;
        }
        let m = self.order().min(rhs.order());
        let mut q = vec![0.0; m + 1];
        for k in 0..=m {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= rhs.c[j] * q[k - j];
            }
            q[k] = acc / b0;
        }
        Some(Jet { c: q })
    }

    pub fn recip(&self) -> Option<Jet> {
        Jet::constant(1.0, self.order()).checked_div(self)
    }

    pub fn exp(&self) -> Jet {
        let m = self.order();
        let mut b = vec![0.0; m + 1];
        b[0] = self.c[0].exp();
        for k in 1..=m {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * b[k - j];
            }
            b[k] = acc / k as f64;
        }
        Jet { c: b }
    }

    /// Natural log; `None` for a nonpositive value.
    pub fn ln(&self) -> Option<Jet> {
        let a0 = self.c[0];
        if a0 <= 0.0 {
            return None;
        }
        let m = self.order();
        let mut b = vec![0.0; m + 1];
        b[0] = a0.ln();
        for k in 1..=m {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= j as f64 * b[j] * self.c[k - j] / k as f64;
            }
            b[k] = acc / a0;
        }
        Some(Jet { c: b })
    }

    /// Real power `a^r`; `None` for a nonpositive base.
    pub fn powf(&self, r: f64) -> Option<Jet> {
        let a0 = self.c[0];
        if a0 <= 0.0 {
            return None;
        }
        let m = self.order();
        let mut b = vec![0.0; m + 1];
        b[0] = a0.powf(r);
        for k in 1..=m {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((r + 1.0) * j as f64 - k as f64) * self.c[j] * b[k - j];
            }
            b[k] = acc / (k as f64 * a0);
        }
        Some(Jet { c: b })
    }

    /// Integer power by repeated multiplication; works for any sign of the base.
    pub fn powi(&self, n: u32) -> Jet {
        let mut out = Jet::constant(1.0, self.order());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn sin_cos(&self) -> (Jet, Jet) {
        let m = self.order();
        let mut s = vec![0.0; m + 1];
        let mut c = vec![0.0; m + 1];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..=m {
            let mut acc_s = 0.0;
            let mut acc_c = 0.0;
            for j in 1..=k {
                let w = j as f64 * self.c[j];
                acc_s += w * c[k - j];
                acc_c -= w * s[k - j];
            }
            s[k] = acc_s / k as f64;
            c[k] = acc_c / k as f64;
        }
        (Jet { c: s }, Jet { c })
    }

    /// Treat `self` as the Taylor expansion of some f around `inner.value()`
    /// and return the jet of `f(inner)`.
    pub fn compose(&self, inner: &Jet) -> Jet {
        let m = inner.order();
        let mut dt = inner.clone();
        dt.c[0] = 0.0;
        // Horner: f = c0 + dt (c1 + dt (c2 + ...)); powers of dt beyond m vanish.
        let top = self.order().min(m);
        let mut acc = Jet::constant(self.c[top], m);
        for k in (0..top).rev() {
            acc = (&acc * &dt).add_scalar(self.c[k]);
        }
        acc
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let m = self.order().min(rhs.order());
        Jet {
            c: (0..=m).map(|k| self.c[k] + rhs.c[k]).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let m = self.order().min(rhs.order());
        Jet {
            c: (0..=m).map(|k| self.c[k] - rhs.c[k]).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let m = self.order().min(rhs.order());
        let mut c = vec![0.0; m + 1];
        for (i, a) in self.c.iter().enumerate().take(m + 1) {
            if *a == 0.0 {
                continue;
            }
            for j in 0..=(m - i) {
                c[i + j] += a * rhs.c[j];
            }
        }
        Jet { c }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_derivatives_match_closed_form() {
        let x = Jet::variable(0.3, 6);
        let e = x.scale(2.0).exp();
        for k in 0..=6 {
            assert_relative_eq!(
                e.derivative(k),
                2f64.powi(k as i32) * 0.6f64.exp(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn ln_inverts_exp() {
        let x = Jet::variable(-0.7, 8);
        let back = x.exp().ln().unwrap();
        for k in 0..=8 {
            assert!((back.coeff(k) - x.coeff(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn powf_matches_repeated_product() {
        let x = Jet::variable(1.3, 5).add_scalar(0.2);
        let a = x.powf(3.0).unwrap();
        let b = x.powi(3);
        for k in 0..=5 {
            assert_relative_eq!(a.coeff(k), b.coeff(k), max_relative = 1e-12, epsilon = 1e-14);
        }
        let inv = x.powf(-2.0).unwrap();
        let inv2 = x.powi(2).recip().unwrap();
        for k in 0..=5 {
            assert_relative_eq!(inv.coeff(k), inv2.coeff(k), max_relative = 1e-12);
        }
    }

    #[test]
    fn division_by_zero_value_is_refused() {
        let z = Jet::constant(0.0, 3);
        assert!(Jet::variable(1.0, 3).checked_div(&z).is_none());
        assert!(z.ln().is_none());
    }

    #[test]
    fn compose_reproduces_chain_rule() {
        // sin(x^2) at x = 0.4
        let x = Jet::variable(0.4, 4);
        let inner = &x * &x;
        let direct = inner.sin_cos().0;
        let outer = Jet::variable(inner.value(), 4).sin_cos().0;
        let composed = outer.compose(&inner);
        for k in 0..=4 {
            assert_relative_eq!(direct.coeff(k), composed.coeff(k), epsilon = 1e-14);
        }
    }
}
