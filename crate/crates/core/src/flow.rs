//! Characteristic-flow oracle for `f` and `F`.
//!
//! Conjugation by `T = exp(-i(pg + gp)/2)` acts on position as the unit-time
//! flow of `dx/ds = σ g(x)`. Integrating that ODE gives `f` and `F` without
//! touching the series, which makes it a useful cross-check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::ScalarField;

const ESCAPE: f64 = 1e12;
pub const DEFAULT_STEPS: usize = 256;

/// Which displacement the flow reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlowDirection {
    /// `x ↦ x + f(x)`, σ = +1.
    #[serde(rename = "FOR_f")]
    ForSmallF,
    /// `x ↦ x + F(x)`, σ = −1.
    #[serde(rename = "FOR_F")]
    ForBigF,
}

impl FlowDirection {
    // Calibrated against the closed-form f for g = αe^{βx}; see the regression test.
    pub fn sigma(self) -> f64 {
        match self {
            FlowDirection::ForSmallF => 1.0,
            FlowDirection::ForBigF => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            FlowDirection::ForSmallF => FlowDirection::ForBigF,
            FlowDirection::ForBigF => FlowDirection::ForSmallF,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowResult {
    pub x0: f64,
    pub x1: f64,
    /// `dx1/dx0` from the variational equation.
    pub jacobian: f64,
    pub steps_used: usize,
    pub est_error: f64,
}

impl FlowResult {
    pub fn displacement(&self) -> f64 {
        self.x1 - self.x0
    }
}

fn rhs(g: &ScalarField, sigma: f64, x0: f64, s: f64, x: f64, j: f64) -> Result<(f64, f64)> {
    if !x.is_finite() || x.abs() > ESCAPE {
        return Err(Error::FlowEscape { x0, time: s, x });
    }
    let t = g
        .taylor(x, 1)
        .map_err(|_| Error::FlowEscape { x0, time: s, x })?;
    Ok((sigma * t.value(), sigma * t.derivative(1) * j))
}

/// Classical RK4 on `(x, J)` over `s ∈ [0, 1]` with `steps` equal steps.
pub fn integrate(g: &ScalarField, x0: f64, sigma: f64, steps: usize) -> Result<(f64, f64)> {
    let h = 1.0 / steps as f64;
    let (mut x, mut j) = (x0, 1.0);
    for i in 0..steps {
        let s = i as f64 * h;
        let (k1x, k1j) = rhs(g, sigma, x0, s, x, j)?;
        let (k2x, k2j) = rhs(g, sigma, x0, s + h / 2.0, x + h / 2.0 * k1x, j + h / 2.0 * k1j)?;
        let (k3x, k3j) = rhs(g, sigma, x0, s + h / 2.0, x + h / 2.0 * k2x, j + h / 2.0 * k2j)?;
        let (k4x, k4j) = rhs(g, sigma, x0, s + h, x + h * k3x, j + h * k3j)?;
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        j += h / 6.0 * (k1j + 2.0 * k2j + 2.0 * k3j + k4j);
        if !x.is_finite() || x.abs() > ESCAPE {
            return Err(Error::FlowEscape {
                x0,
                time: s + h,
                x,
            });
        }
    }
    Ok((x, j))
}

/// Unit-time flow with `steps` base steps plus one halving. The returned
/// endpoint is the Richardson combination of the two runs.
pub fn flow_map_with(
    g: &ScalarField,
    x0: f64,
    direction: FlowDirection,
    steps: usize,
) -> Result<FlowResult> {
    let sigma = direction.sigma();
    let (xc, jc) = integrate(g, x0, sigma, steps)?;
    let (xf, jf) = integrate(g, x0, sigma, 2 * steps)?;
    let corr = (xf - xc) / 15.0;
    Ok(FlowResult {
        x0,
        x1: xf + corr,
        jacobian: jf + (jf - jc) / 15.0,
        steps_used: 2 * steps,
        est_error: corr.abs(),
    })
}

pub fn flow_map(g: &ScalarField, x0: f64, direction: FlowDirection) -> Result<FlowResult> {
    flow_map_with(g, x0, direction, DEFAULT_STEPS)
}

pub fn f_oracle(g: &ScalarField, x: f64) -> Result<f64> {
    Ok(flow_map(g, x, FlowDirection::ForSmallF)?.displacement())
}

#[allow(non_snake_case)]
pub fn F_oracle(g: &ScalarField, x: f64) -> Result<f64> {
    Ok(flow_map(g, x, FlowDirection::ForBigF)?.displacement())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Domain;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn exp_g(alpha: f64, beta: f64) -> ScalarField {
        ScalarField::analytic("g", Domain::REAL_LINE, move |x| {
            Ok(x.scale(beta).exp().scale(alpha))
        })
    }

    fn linear_g(c: f64) -> ScalarField {
        ScalarField::analytic("cx", Domain::REAL_LINE, move |x| Ok(x.scale(c)))
    }

    // Exact solution of dx/ds = σ α e^{βx}: e^{-βx(s)} = e^{-βx0} − σαβs.
    fn exact_exp_flow(alpha: f64, beta: f64, sigma: f64, x0: f64) -> f64 {
        -((-beta * x0).exp() - sigma * alpha * beta).ln() / beta
    }

    #[test]
    fn constant_generator_translates() {
        let r = flow_map(&ScalarField::constant(0.75), 1.0, FlowDirection::ForSmallF).unwrap();
        assert_relative_eq!(r.x1, 1.75, epsilon = 1e-14);
        assert_relative_eq!(r.jacobian, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn direction_calibration_is_locked() {
        // FOR_f must land on x0 + 2 ln 2 for α = 1, β = 1/2, x0 = 0.
        let r = flow_map(&exp_g(1.0, 0.5), 0.0, FlowDirection::ForSmallF).unwrap();
        assert_relative_eq!(r.displacement(), 2.0 * 2f64.ln(), epsilon = 1e-10);
        assert_eq!(FlowDirection::ForSmallF.sigma(), 1.0);
        assert_eq!(FlowDirection::ForBigF.sigma(), -1.0);
    }

    #[test]
    fn reverse_exponential_flow() {
        let d = F_oracle(&exp_g(1.0, 0.5), 0.0).unwrap();
        assert_relative_eq!(d, -2.0 * 1.5f64.ln(), epsilon = 1e-10);
        assert_relative_eq!(d, -0.810930, epsilon = 1e-6);
    }

    #[test]
    fn linear_flow_scales() {
        let m0: f64 = 4.0;
        let r = flow_map(&linear_g(m0.ln() / 2.0), 1.0, FlowDirection::ForSmallF).unwrap();
        assert_relative_eq!(r.x1, 2.0, epsilon = 1e-12);
        assert_relative_eq!(r.jacobian, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn null_generator_is_still() {
        assert_eq!(f_oracle(&ScalarField::constant(0.0), 3.0).unwrap(), 0.0);
        assert_eq!(F_oracle(&ScalarField::constant(0.0), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        // Starting at x_star the exact solution reaches infinity at s = 1.
        let x_star = 2.0 * 2f64.ln();
        match flow_map(&exp_g(1.0, 0.5), x_star + 0.1, FlowDirection::ForSmallF) {
            Err(Error::FlowEscape { time, .. }) => assert!(time < 1.0),
            other => panic!("expected escape, got {other:?}"),
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let (alpha, beta) = (1.0, 0.5);
        let exact = exact_exp_flow(alpha, beta, 1.0, 0.0);
        let g = exp_g(alpha, beta);
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| (integrate(&g, 0.0, 1.0, n).unwrap().0 - exact).abs())
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
        }
    }

    #[test]
    fn jacobian_matches_closed_form() {
        // d x1 / d x0 = e^{-βx0} / (e^{-βx0} − αβ) for the forward flow
        let (alpha, beta) = (1.0, 0.5);
        let x0 = -0.3;
        let r = flow_map(&exp_g(alpha, beta), x0, FlowDirection::ForSmallF).unwrap();
        let e = (-beta * x0).exp();
        assert_relative_eq!(r.jacobian, e / (e - alpha * beta), max_relative = 1e-10);
        assert!(r.jacobian > 0.0);
    }

    proptest! {
        #[test]
        fn round_trip_returns_home(x0 in -6.0f64..0.9) {
            let g = exp_g(1.0, 0.5);
            let fwd = flow_map(&g, x0, FlowDirection::ForSmallF).unwrap();
            let back = flow_map(&g, fwd.x1, FlowDirection::ForBigF).unwrap();
            prop_assert!((back.x1 - x0).abs() <= 1e-10);
        }

        #[test]
        fn oracles_are_mutual_inverses(x in -5.0f64..0.8) {
            let g = exp_g(1.0, 0.5);
            let y = x + f_oracle(&g, x).unwrap();
            let back = y + F_oracle(&g, y).unwrap();
            prop_assert!((back - x).abs() <= 1e-9);
        }

        #[test]
        fn exponential_flow_matches_exact(x0 in -6.0f64..0.9, sigma in prop::sample::select(vec![1.0, -1.0])) {
            let dir = if sigma > 0.0 { FlowDirection::ForSmallF } else { FlowDirection::ForBigF };
            let r = flow_map(&exp_g(1.0, 0.5), x0, dir).unwrap();
            prop_assert!((r.x1 - exact_exp_flow(1.0, 0.5, sigma, x0)).abs() <= 1e-9);
        }
    }
}
