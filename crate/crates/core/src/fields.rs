//! Real functions of position with derivatives, and uniform grids to sample them on.
//!
//! A [`ScalarField`] is an evaluation procedure over [`Jet`]s: evaluating it on
//! `Jet::variable(x, m)` yields the value and the first `m` derivatives at `x`.
//! Analytic fields (built from jet arithmetic) support any order. Numeric
//! fields wrap a plain `f64 -> f64` closure and fall back to centered finite
//! differences, so they support orders up to 2.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet;

type JetFn = dyn Fn(&Jet) -> Result<Jet> + Send + Sync;

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub const REAL_LINE: Domain = Domain {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Domain { lo, hi }
    }

    pub fn below(hi: f64) -> Self {
        Domain {
            lo: f64::NEG_INFINITY,
            hi,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn intersect(&self, other: &Domain) -> Domain {
        Domain {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }
}

#[derive(Clone)]
pub struct ScalarField {
    label: Arc<str>,
    domain: Domain,
    max_order: Option<usize>,
    eval: Arc<JetFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("max_order", &self.max_order)
            .finish()
    }
}

/// Default finite-difference step for numeric derivatives at `x`.
pub fn default_fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

impl ScalarField {
    /// Field given by jet arithmetic; derivatives of every order are exact.
    pub fn analytic<F>(label: impl Into<String>, domain: Domain, f: F) -> Self
    where
        F: Fn(&Jet) -> Result<Jet> + Send + Sync + 'static,
    {
        ScalarField {
            label: label.into().into(),
            domain,
            max_order: None,
            eval: Arc::new(f),
        }
    }

    /// Field known only through point values; derivatives come from centered
    /// differences with step `h_d` (or [`default_fd_step`]).
    pub fn numeric<F>(label: impl Into<String>, domain: Domain, f: F, h_d: Option<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let label: Arc<str> = label.into().into();
        let name = label.clone();
        let f = Arc::new(f);
        let eval = move |x: &Jet| -> Result<Jet> {
            let m = x.order();
            if m > 2 {
                return Err(Error::UnsupportedOrder(m));
            }
            let x0 = x.value();
            let h = h_d.unwrap_or_else(|| default_fd_step(x0));
            let mut c = vec![f(x0)];
            if m >= 1 {
                c.push((f(x0 + h) - f(x0 - h)) / (2.0 * h));
            }
            if m >= 2 {
                c.push((f(x0 + h) - 2.0 * c[0] + f(x0 - h)) / (h * h) / 2.0);
            }
            let taylor = Jet::from_coeffs(c);
            if !taylor.is_finite() {
                return Err(Error::Domain {
                    field: name.to_string(),
                    x: x0,
                    lo: domain.lo,
                    hi: domain.hi,
                    node: None,
                });
            }
            Ok(taylor.compose(x))
        };
        ScalarField {
            label,
            domain,
            max_order: Some(2),
            eval: Arc::new(eval),
        }
    }

    pub fn constant(value: f64) -> Self {
        ScalarField::analytic(format!("{value}"), Domain::REAL_LINE, move |x| {
            Ok(Jet::constant(value, x.order()))
        })
    }

    pub fn identity() -> Self {
        ScalarField::analytic("x", Domain::REAL_LINE, |x| Ok(x.clone()))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Highest derivative order available; `None` means unbounded (analytic).
    pub fn deriv_order_supported(&self) -> Option<usize> {
        self.max_order
    }

    pub fn is_analytic(&self) -> bool {
        self.max_order.is_none()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into().into();
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    fn domain_error(&self, x: f64) -> Error {
        Error::Domain {
            field: self.label.to_string(),
            x,
            lo: self.domain.lo,
            hi: self.domain.hi,
            node: None,
        }
    }

    pub fn eval_jet(&self, x: &Jet) -> Result<Jet> {
        let x0 = x.value();
        if !self.domain.contains(x0) {
            return Err(self.domain_error(x0));
        }
        let out = (self.eval)(x)?;
        if !out.value().is_finite() {
            return Err(self.domain_error(x0));
        }
        Ok(out)
    }

    /// Taylor coefficients of order `order` at `x`.
    pub fn taylor(&self, x: f64, order: usize) -> Result<Jet> {
        self.eval_jet(&Jet::variable(x, order))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(self.taylor(x, 0)?.value())
    }

    /// `d^order/dx^order` at `x`.
    pub fn deriv_at(&self, x: f64, order: usize) -> Result<f64> {
        if let Some(max) = self.max_order {
            if order > max {
                return Err(Error::UnsupportedOrder(order));
            }
        }
        Ok(self.taylor(x, order)?.derivative(order))
    }

    /// Derivative field of order 1 or 2.
    pub fn derivative(&self, order: usize) -> Result<ScalarField> {
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let base = self.clone();
        let label = format!("d{order}[{}]", self.label);
        match self.max_order {
            None => Ok(ScalarField::analytic(label, self.domain, move |x| {
                let mut t = base.taylor(x.value(), x.order() + order)?;
                for _ in 0..order {
                    t = t.differentiate();
                }
                Ok(t.compose(x))
            })),
            Some(_) => {
                let h_d = None;
                Ok(ScalarField::numeric(
                    label,
                    self.domain,
                    move |x| {
                        let h = default_fd_step(x);
                        let v = |y: f64| base.eval(y).unwrap_or(f64::NAN);
                        if order == 1 {
                            (v(x + h) - v(x - h)) / (2.0 * h)
                        } else {
                            (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h)
                        }
                    },
                    h_d,
                ))
            }
        }
    }

    /// Centered finite-difference derivative at `x` with step `h_d`,
    /// regardless of whether an analytic path exists.
    pub fn numeric_derivative_at(&self, x: f64, order: usize, h_d: f64) -> Result<f64> {
        match order {
            1 => Ok((self.eval(x + h_d)? - self.eval(x - h_d)?) / (2.0 * h_d)),
            2 => Ok((self.eval(x + h_d)? - 2.0 * self.eval(x)? + self.eval(x - h_d)?) / (h_d * h_d)),
            k => Err(Error::UnsupportedOrder(k)),
        }
    }

    fn combine<F>(&self, other: &ScalarField, label: String, op: F) -> ScalarField
    where
        F: Fn(&Jet, &Jet) -> Result<Jet> + Send + Sync + 'static,
    {
        let (a, b) = (self.clone(), other.clone());
        let max_order = match (self.max_order, other.max_order) {
            (None, None) => None,
            (p, q) => Some(p.unwrap_or(usize::MAX).min(q.unwrap_or(usize::MAX))),
        };
        ScalarField {
            label: label.into(),
            domain: self.domain.intersect(&other.domain),
            max_order,
            eval: Arc::new(move |x| op(&a.eval_jet(x)?, &b.eval_jet(x)?)),
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let label = format!("({} + {})", self.label, other.label);
        self.combine(other, label, |a, b| Ok(a + b))
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let label = format!("({} - {})", self.label, other.label);
        self.combine(other, label, |a, b| Ok(a - b))
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let label = format!("({} * {})", self.label, other.label);
        self.combine(other, label, |a, b| Ok(a * b))
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        let base = self.clone();
        ScalarField {
            label: format!("{s} * {}", self.label).into(),
            domain: self.domain,
            max_order: self.max_order,
            eval: Arc::new(move |x| Ok(base.eval_jet(x)?.scale(s))),
        }
    }

    /// `self(inner(x))`. The result lives on `inner`'s domain; points whose
    /// image leaves `self`'s domain report a domain error.
    pub fn compose(&self, inner: &ScalarField) -> ScalarField {
        let (outer, inner_f) = (self.clone(), inner.clone());
        let max_order = match (self.max_order, inner.max_order) {
            (None, None) => None,
            (p, q) => Some(p.unwrap_or(usize::MAX).min(q.unwrap_or(usize::MAX))),
        };
        ScalarField {
            label: format!("{}∘{}", self.label, inner.label).into(),
            domain: inner.domain,
            max_order,
            eval: Arc::new(move |x| {
                let y = inner_f.eval_jet(x)?;
                outer.eval_jet(&y)
            }),
        }
    }
}

/// Uniform grid of `n` interior nodes; the endpoints carry Dirichlet walls.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need n >= 3 nodes, got {n}")));
        }
        Ok(GridSpec { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n + 1) as f64
    }

    /// Position of interior node `i` (0-based; node 0 sits one step inside the wall).
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + (i + 1) as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Same interval with the spacing halved exactly (`n -> 2n + 1`).
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            n: 2 * self.n + 1,
            ..*self
        }
    }

    /// Discrete L2 norm with weight `h`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        (self.h() * v.iter().map(|a| a * a).sum::<f64>()).sqrt()
    }
}

/// Values of `field` at the interior nodes of `grid`.
pub fn sample(field: &ScalarField, grid: &GridSpec) -> Result<Vec<f64>> {
    grid.nodes()
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            field.eval(x).map_err(|e| match e {
                Error::Domain {
                    field, x, lo, hi, ..
                } => Error::Domain {
                    field,
                    x,
                    lo,
                    hi,
                    node: Some(i),
                },
                other => other,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp_field() -> ScalarField {
        ScalarField::analytic("exp", Domain::REAL_LINE, |x| Ok(x.exp()))
    }

    fn sin_field() -> ScalarField {
        ScalarField::analytic("sin", Domain::REAL_LINE, |x| Ok(x.sin_cos().0))
    }

    #[test]
    fn constant_samples_to_ones() {
        let g = GridSpec::new(-3.0, 7.0, 11).unwrap();
        assert!(sample(&ScalarField::constant(1.0), &g)
            .unwrap()
            .iter()
            .all(|&v| v == 1.0));
    }

    #[test]
    fn linear_field_sits_on_nodes() {
        let g = GridSpec::new(0.0, 1.0, 3).unwrap();
        assert_eq!(sample(&ScalarField::identity(), &g).unwrap(), vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn sample_names_offending_node() {
        let f = ScalarField::identity().with_domain(Domain::below(0.6));
        let g = GridSpec::new(0.0, 1.0, 3).unwrap();
        match sample(&f, &g) {
            Err(Error::Domain { node: Some(2), .. }) => {}
            other => panic!("expected domain error at node 2, got {other:?}"),
        }
    }

    #[test]
    fn grid_rejects_bad_specs() {
        assert!(GridSpec::new(1.0, 1.0, 10).is_err());
        assert!(GridSpec::new(0.0, 1.0, 2).is_err());
        let g = GridSpec::new(-1.0, 1.0, 9).unwrap();
        assert_relative_eq!(g.h(), 0.2);
        assert_relative_eq!(g.refined().h(), 0.1);
    }

    #[test]
    fn exp_derivative_at_zero() {
        let d = exp_field().derivative(1).unwrap();
        assert_relative_eq!(d.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn constant_derivative_vanishes() {
        let d = ScalarField::constant(3.5).derivative(1).unwrap();
        for x in [-10.0, 0.0, 2.5] {
            assert_eq!(d.eval(x).unwrap(), 0.0);
        }
        let d2 = ScalarField::constant(3.5).derivative(2).unwrap();
        assert_eq!(d2.eval(1.0).unwrap(), 0.0);
    }

    #[test]
    fn unsupported_orders_are_rejected() {
        assert_eq!(exp_field().derivative(3).unwrap_err(), Error::UnsupportedOrder(3));
        assert_eq!(exp_field().derivative(0).unwrap_err(), Error::UnsupportedOrder(0));
        let num = ScalarField::numeric("sq", Domain::REAL_LINE, |x| x * x, None);
        assert_eq!(num.deriv_at(1.0, 3).unwrap_err(), Error::UnsupportedOrder(3));
    }

    #[test]
    fn numeric_derivative_is_second_order() {
        // Richardson check: the central-difference error drops ~4x per halving.
        let s = sin_field();
        let exact = 1.0;
        let errs: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| (s.numeric_derivative_at(0.0, 1, h).unwrap() - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn numeric_and_analytic_paths_agree() {
        let analytic = exp_field();
        let numeric = ScalarField::numeric("exp", Domain::REAL_LINE, f64::exp, Some(1e-3));
        for x in [-1.0, 0.0, 0.7] {
            let a1 = analytic.deriv_at(x, 1).unwrap();
            let n1 = numeric.deriv_at(x, 1).unwrap();
            let a2 = analytic.deriv_at(x, 2).unwrap();
            let n2 = numeric.deriv_at(x, 2).unwrap();
            // C h^2 with C ~ |f'''|/6 and |f''''|/12
            assert!((a1 - n1).abs() < 1e-6 * x.exp().max(1.0));
            assert!((a2 - n2).abs() < 1e-6 * x.exp().max(1.0));
        }
    }

    #[test]
    fn numeric_derivative_field_uses_default_step() {
        let num = ScalarField::numeric("cube", Domain::REAL_LINE, |x| x * x * x, None);
        let d = num.derivative(1).unwrap();
        assert_relative_eq!(d.eval(2.0).unwrap(), 12.0, max_relative = 1e-8);
    }

    #[test]
    fn compose_respects_inner_domain() {
        let inner = ScalarField::identity().with_domain(Domain::below(1.0));
        let outer = exp_field();
        let c = outer.compose(&inner);
        assert_relative_eq!(c.eval(0.5).unwrap(), 0.5f64.exp());
        assert!(c.eval(1.5).is_err());
    }

    proptest! {
        #[test]
        fn derivative_is_linear(x in -3.0f64..3.0, a in -2.0f64..2.0) {
            let f = exp_field();
            let g = sin_field();
            let sum = f.add(&g.scale(a));
            let lhs = sum.deriv_at(x, 1).unwrap();
            let rhs = f.deriv_at(x, 1).unwrap() + a * g.deriv_at(x, 1).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn sampling_commutes_with_linear_combination(lo in -5.0f64..0.0, width in 0.5f64..5.0, a in -3.0f64..3.0) {
            let grid = GridSpec::new(lo, lo + width, 17).unwrap();
            let f = exp_field();
            let g = sin_field();
            let combined = sample(&f.add(&g.scale(a)), &grid).unwrap();
            let fs = sample(&f, &grid).unwrap();
            let gs = sample(&g, &grid).unwrap();
            for i in 0..grid.n() {
                prop_assert!((combined[i] - (fs[i] + a * gs[i])).abs() < 1e-12 * (1.0 + combined[i].abs()));
            }
        }
    }
}
