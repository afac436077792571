//! The worked example: exponentially decaying mass, the five-term potential
//! that maps onto a Morse well, and the constant-mass squeeze baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Domain, ScalarField};
use crate::jet::Jet;

/// Sign `s` in `a3 = s·αβ³/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum A3Sign {
    Plus,
    Minus,
}

impl A3Sign {
    pub const ALL: [A3Sign; 2] = [A3Sign::Plus, A3Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            A3Sign::Plus => 1.0,
            A3Sign::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            A3Sign::Plus => "plus",
            A3Sign::Minus => "minus",
        }
    }
}

impl Default for A3Sign {
    /// The sign for which the transformed potential is exactly Morse.
    fn default() -> Self {
        A3Sign::Minus
    }
}

impl std::fmt::Display for A3Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters of the exponential-mass example. `a2`, `a3`, `a4` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExampleConfig {
    pub alpha: f64,
    pub beta: f64,
    pub a0: f64,
    pub a1: f64,
    pub a3_sign: A3Sign,
}

impl ExampleConfig {
    pub fn new(alpha: f64, beta: f64, a0: f64, a1: f64, a3_sign: A3Sign) -> Result<Self> {
        check_positive(alpha, beta)?;
        if a0 == 0.0 || !a0.is_finite() {
            return Err(Error::Param("a0 must be nonzero (a2 = a1²/4a0)".into()));
        }
        if !a1.is_finite() {
            return Err(Error::Param("a1 must be finite".into()));
        }
        Ok(ExampleConfig {
            alpha,
            beta,
            a0,
            a1,
            a3_sign,
        })
    }

    /// Morse well with `D_e = 81`, `β = 1/2` and its minimum well inside the
    /// admissible domain; supports 25 bound states.
    pub fn acceptance() -> Self {
        ExampleConfig {
            alpha: 0.1,
            beta: 0.5,
            a0: 64.0,
            a1: -320.0,
            a3_sign: A3Sign::Minus,
        }
    }

    /// Plot parameters `α = 1`, `a0 = a1 = 1`.
    pub fn figure(beta: f64, a3_sign: A3Sign) -> Self {
        ExampleConfig {
            alpha: 1.0,
            beta,
            a0: 1.0,
            a1: 1.0,
            a3_sign,
        }
    }

    pub fn with_sign(self, a3_sign: A3Sign) -> Self {
        ExampleConfig { a3_sign, ..self }
    }

    pub fn a2(&self) -> f64 {
        self.a1 * self.a1 / (4.0 * self.a0)
    }

    pub fn a3(&self) -> f64 {
        self.a3_sign.value() * self.alpha * self.beta.powi(3) / 4.0
    }

    pub fn a4(&self) -> f64 {
        -0.375 * self.alpha.powi(2) * self.beta.powi(4)
    }

    /// Singular point of `f`: `αβ e^{βx} = 1`.
    pub fn x_star(&self) -> f64 {
        x_star(self.alpha, self.beta)
    }
}

pub fn x_star(alpha: f64, beta: f64) -> f64 {
    -(alpha * beta).ln() / beta
}

fn check_positive(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::Param(format!(
            "alpha and beta must be positive, got alpha = {alpha}, beta = {beta}"
        )));
    }
    Ok(())
}

/// `u(x) = αβ e^{βx}` as a jet.
fn u_jet(alpha: f64, beta: f64, x: &Jet) -> Jet {
    x.scale(beta).exp().scale(alpha * beta)
}

/// `m(x) = (1 + αβ e^{βx})⁻²`
pub fn mass_family(alpha: f64, beta: f64) -> Result<ScalarField> {
    check_positive(alpha, beta)?;
    Ok(ScalarField::analytic(
        format!("m(a={alpha},b={beta})"),
        Domain::REAL_LINE,
        move |x| {
            let g = u_jet(alpha, beta, x).add_scalar(1.0);
            Ok(g.powi(2).recip().expect("1 + u > 0"))
        },
    ))
}

/// `g(x) = α e^{βx}`
pub fn generator_for_mass(alpha: f64, beta: f64) -> ScalarField {
    ScalarField::analytic(
        format!("g(a={alpha},b={beta})"),
        Domain::REAL_LINE,
        move |x| Ok(x.scale(beta).exp().scale(alpha)),
    )
}

/// `V(x) = a0 + a1 e^{−βx} + a2 e^{−2βx} + a3 e^{βx} + a4 e^{2βx}`
pub fn potential_family(cfg: &ExampleConfig) -> Result<ScalarField> {
    let cfg = ExampleConfig::new(cfg.alpha, cfg.beta, cfg.a0, cfg.a1, cfg.a3_sign)?;
    let (b, a0, a1, a2, a3, a4) = (cfg.beta, cfg.a0, cfg.a1, cfg.a2(), cfg.a3(), cfg.a4());
    Ok(ScalarField::analytic(
        format!("V(a0={a0},a1={a1},b={b},s={})", cfg.a3_sign),
        Domain::REAL_LINE,
        move |x| {
            let e = x.scale(b).exp();
            let em = x.scale(-b).exp();
            let mut v = em.scale(a1);
            v = &v + &(&em * &em).scale(a2);
            v = &v + &e.scale(a3);
            v = &v + &(&e * &e).scale(a4);
            Ok(v.add_scalar(a0))
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MorseParams {
    pub d_e: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MorseParams {
    /// `E_n = β√(2D)(n + 1/2) − β²(n + 1/2)²/2` for unit mass.
    pub fn level(&self, n: usize) -> f64 {
        let v = n as f64 + 0.5;
        self.beta * (2.0 * self.d_e).sqrt() * v - 0.5 * self.beta * self.beta * v * v
    }

    /// Number of bound levels below `D_e`.
    pub fn bound_state_count(&self) -> usize {
        let lam = (2.0 * self.d_e).sqrt() / self.beta;
        (lam - 0.5).ceil().max(0.0) as usize
    }
}

pub fn morse_from_config(cfg: &ExampleConfig) -> Result<MorseParams> {
    let ab = cfg.alpha * cfg.beta;
    let d_e = (2.0 * cfg.a0 - ab * cfg.a1).powi(2) / (4.0 * cfg.a0);
    let arg = cfg.a1 / (ab * cfg.a1 - 2.0 * cfg.a0);
    if !(arg > 0.0 && arg.is_finite()) {
        return Err(Error::GammaUndefined { arg });
    }
    Ok(MorseParams {
        d_e,
        beta: cfg.beta,
        gamma: arg.ln() / cfg.beta,
    })
}

/// `W(x) = D_e (1 − e^{−β(x−γ)})²`
pub fn morse_potential(p: &MorseParams) -> ScalarField {
    let p = *p;
    ScalarField::analytic(
        format!("Morse(D={},b={},g={})", p.d_e, p.beta, p.gamma),
        Domain::REAL_LINE,
        move |x| {
            let e = x.add_scalar(-p.gamma).scale(-p.beta).exp();
            let one_minus = e.scale(-1.0).add_scalar(1.0);
            Ok((&one_minus * &one_minus).scale(p.d_e))
        },
    )
}

/// `f(x) = −(1/β) ln(1 − αβ e^{βx})` on `x < x_star`.
pub fn f_closed(alpha: f64, beta: f64) -> Result<ScalarField> {
    check_positive(alpha, beta)?;
    let xs = x_star(alpha, beta);
    Ok(ScalarField::analytic(
        format!("f_closed(a={alpha},b={beta})"),
        Domain::below(xs),
        move |x| {
            let arg = u_jet(alpha, beta, x).scale(-1.0).add_scalar(1.0);
            let ln = arg.ln().ok_or_else(|| Error::Domain {
                field: "f_closed".into(),
                x: x.value(),
                lo: f64::NEG_INFINITY,
                hi: xs,
                node: None,
            })?;
            Ok(ln.scale(-1.0 / beta))
        },
    ))
}

/// `F(x) = −(1/β) ln(1 + αβ e^{βx})`
#[allow(non_snake_case)]
pub fn F_closed(alpha: f64, beta: f64) -> Result<ScalarField> {
    check_positive(alpha, beta)?;
    Ok(ScalarField::analytic(
        format!("F_closed(a={alpha},b={beta})"),
        Domain::REAL_LINE,
        move |x| {
            let arg = u_jet(alpha, beta, x).add_scalar(1.0);
            Ok(arg.ln().expect("1 + u > 0").scale(-1.0 / beta))
        },
    ))
}

/// `G(x) = 1 + αβ e^{βx}`
#[allow(non_snake_case)]
pub fn G_closed(alpha: f64, beta: f64) -> Result<ScalarField> {
    check_positive(alpha, beta)?;
    Ok(ScalarField::analytic(
        format!("G_closed(a={alpha},b={beta})"),
        Domain::REAL_LINE,
        move |x| Ok(u_jet(alpha, beta, x).add_scalar(1.0)),
    ))
}

/// Constant mass `m0` in a harmonic well `x²/2`, removed by a linear generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezeBaseline {
    pub m0: f64,
}

impl SqueezeBaseline {
    pub fn new(m0: f64) -> Result<Self> {
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(Error::Param(format!("m0 must be positive, got {m0}")));
        }
        Ok(SqueezeBaseline { m0 })
    }

    pub fn mass(&self) -> ScalarField {
        ScalarField::constant(self.m0).with_label(format!("m0={}", self.m0))
    }

    pub fn potential(&self) -> ScalarField {
        ScalarField::analytic("x^2/2", Domain::REAL_LINE, |x| Ok(x.powi(2).scale(0.5)))
    }

    /// `g = (ln m0 / 2) x`: the flow scales positions by `√m0`.
    pub fn scaling_generator(&self) -> ScalarField {
        ScalarField::identity()
            .scale(self.m0.ln() / 2.0)
            .with_label(format!("(ln {}/2) x", self.m0))
    }

    /// `g = −(ln m0 / 2) x`: `G² = 1/m0`, and conjugation by its `T` gives
    /// `p²/2 + V(x/√m0)`.
    pub fn conjugating_generator(&self) -> ScalarField {
        ScalarField::identity()
            .scale(-self.m0.ln() / 2.0)
            .with_label(format!("-(ln {}/2) x", self.m0))
    }

    /// `V(x/√m0)`
    pub fn target_potential(&self) -> ScalarField {
        let s = 1.0 / self.m0.sqrt();
        ScalarField::analytic(format!("V(x/sqrt({}))", self.m0), Domain::REAL_LINE, move |x| {
            Ok(x.scale(s).powi(2).scale(0.5))
        })
    }

    /// `(n + 1/2)/√m0`
    pub fn level(&self, n: usize) -> f64 {
        (n as f64 + 0.5) / self.m0.sqrt()
    }
}

/// Plot data for one figure: shared x column and one y column per β.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureTable {
    pub x: Vec<f64>,
    pub betas: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

pub const FIGURE_BETAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const FIGURE_POINTS: usize = 500;
pub const FIGURE_X_MIN: f64 = -6.0;
pub const FIGURE_X_MAX: f64 = 4.0;

/// 500 points from −6 at spacing 0.02, so `x = 0` is a sample point.
pub fn figure_x() -> Vec<f64> {
    let dx = (FIGURE_X_MAX - FIGURE_X_MIN) / FIGURE_POINTS as f64;
    (0..FIGURE_POINTS)
        .map(|i| {
            // integer arithmetic keeps x = 0 exact
            (FIGURE_X_MIN / dx + i as f64).round() * dx
        })
        .collect()
}

fn figure_table(col: impl Fn(f64) -> Result<ScalarField>) -> Result<FigureTable> {
    let x = figure_x();
    let mut columns = Vec::new();
    for &b in &FIGURE_BETAS {
        let field = col(b)?;
        columns.push(x.iter().map(|&xi| field.eval(xi)).collect::<Result<Vec<_>>>()?);
    }
    Ok(FigureTable {
        x,
        betas: FIGURE_BETAS.to_vec(),
        columns,
    })
}

/// Mass `m(x)` for `α = 1` and each β.
pub fn figure1_table() -> Result<FigureTable> {
    figure_table(|b| mass_family(1.0, b))
}

/// Potential `V(x)` for `α = 1`, `a0 = a1 = 1` and each β.
pub fn figure2_table(a3_sign: A3Sign) -> Result<FigureTable> {
    figure_table(|b| potential_family(&ExampleConfig::figure(b, a3_sign)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample, GridSpec};
    use crate::transform::{series_g, transformed_potential, verify_mass_consistency, Convention, SeriesOptions};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn mass_at_origin() {
        assert_relative_eq!(mass_family(1.0, 1.0).unwrap().eval(0.0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn mass_tends_to_one_on_the_left() {
        let m = mass_family(1.0, 1.0).unwrap();
        assert!((m.eval(-40.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mass_rejects_bad_parameters() {
        assert!(matches!(mass_family(0.0, 1.0), Err(Error::Param(_))));
        assert!(matches!(mass_family(1.0, -1.0), Err(Error::Param(_))));
    }

    #[test]
    fn figure_one_curves_are_ordered() {
        let t = figure1_table().unwrap();
        for col in &t.columns {
            assert!(col.windows(2).all(|w| w[1] < w[0]));
            assert!(col.iter().all(|m| *m > 0.0 && *m < 1.0));
        }
        for (i, x) in t.x.iter().enumerate() {
            if *x > 0.0 {
                assert!(t.columns[0][i] > t.columns[1][i] && t.columns[1][i] > t.columns[2][i]);
            }
        }
        let zero = t.x.iter().position(|x| *x == 0.0).unwrap();
        assert_eq!(t.columns[1][zero], 0.25);
        assert_eq!(t.x.len(), FIGURE_POINTS);
        assert_eq!(t.x[0], -6.0);
    }

    #[test]
    fn generator_value_at_origin() {
        assert_eq!(generator_for_mass(1.0, 1.0).eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn generator_matches_mass() {
        let grid = GridSpec::new(-6.0, 4.0, 300).unwrap();
        for b in FIGURE_BETAS {
            let r = verify_mass_consistency(
                &mass_family(1.0, b).unwrap(),
                &generator_for_mass(1.0, b),
                &grid,
                &SeriesOptions::default(),
            )
            .unwrap();
            assert!(r <= 1e-12);
        }
    }

    #[test]
    fn series_g_equals_closed_form() {
        let g = series_g(&generator_for_mass(0.3, 1.4), &SeriesOptions::default());
        let gc = G_closed(0.3, 1.4).unwrap();
        for x in [-3.0, 0.0, 1.0, 2.5] {
            assert_relative_eq!(g.eval(x).unwrap(), gc.eval(x).unwrap(), max_relative = 1e-14);
        }
    }

    #[test]
    fn potential_at_origin() {
        let cfg = ExampleConfig::new(1.0, 1.0, 1.0, 1.0, A3Sign::Plus).unwrap();
        assert_relative_eq!(potential_family(&cfg).unwrap().eval(0.0).unwrap(), 2.125, epsilon = 1e-14);
    }

    #[test]
    fn potential_rejects_zero_a0() {
        let cfg = ExampleConfig {
            a0: 0.0,
            ..ExampleConfig::acceptance()
        };
        assert!(matches!(potential_family(&cfg), Err(Error::Param(_))));
    }

    #[test]
    fn potential_left_asymptotics() {
        let cfg = ExampleConfig::figure(1.0, A3Sign::Plus);
        let v = potential_family(&cfg).unwrap();
        let x = -12.0;
        let lead = cfg.a0 + cfg.a1 * (-x as f64).exp() + cfg.a2() * (-2.0 * x as f64).exp();
        assert_relative_eq!(v.eval(x).unwrap(), lead, max_relative = 1e-14);
    }

    #[test]
    fn morse_parameters() {
        let cfg = ExampleConfig::new(1.0, 3.0, 1.0, 1.0, A3Sign::Minus).unwrap();
        let p = morse_from_config(&cfg).unwrap();
        assert_relative_eq!(p.d_e, 0.25, epsilon = 1e-15);
        assert_relative_eq!(p.gamma, 0.0, epsilon = 1e-15);

        let cfg = ExampleConfig::new(1.0, 1.0, 1.0, 1.0, A3Sign::Minus).unwrap();
        match morse_from_config(&cfg) {
            Err(Error::GammaUndefined { arg }) => assert_relative_eq!(arg, -1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn large_a1_config_puts_the_minimum_past_the_singular_point() {
        let cfg = ExampleConfig::new(0.1, 0.5, 1.0, 400.0, A3Sign::Minus).unwrap();
        let p = morse_from_config(&cfg).unwrap();
        assert_relative_eq!(p.d_e, 81.0, max_relative = 1e-14);
        assert_relative_eq!(p.gamma, 2.0 * (400.0f64 / 18.0).ln(), max_relative = 1e-14);
        assert!(p.gamma > cfg.x_star());
    }

    #[test]
    fn acceptance_config_well_is_admissible() {
        let cfg = ExampleConfig::acceptance();
        let p = morse_from_config(&cfg).unwrap();
        assert_relative_eq!(p.d_e, 81.0, max_relative = 1e-14);
        assert_relative_eq!(p.gamma, 2.0 * (20.0f64 / 9.0).ln(), max_relative = 1e-14);
        assert!(p.gamma < cfg.x_star() - 4.0);
        assert_eq!(p.bound_state_count(), 25);
    }

    #[test]
    fn morse_values() {
        let p = MorseParams {
            d_e: 0.25,
            beta: 3.0,
            gamma: 0.0,
        };
        let w = morse_potential(&p);
        assert_eq!(w.eval(0.0).unwrap(), 0.0);
        // 0.25 (1 - e^{-3})^2
        assert_relative_eq!(w.eval(1.0).unwrap(), 0.2257261538602346, epsilon = 1e-15);
        assert_relative_eq!(w.eval(30.0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn closed_forms_at_origin() {
        assert_relative_eq!(f_closed(1.0, 0.5).unwrap().eval(0.0).unwrap(), 2.0 * 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(G_closed(1.0, 0.5).unwrap().eval(0.0).unwrap(), 1.5, epsilon = 1e-15);
        let f = f_closed(1.0, 0.5).unwrap();
        let xs = x_star(1.0, 0.5);
        assert!(f.eval(xs - 1e-9).unwrap() > 30.0);
        assert!(matches!(f.eval(xs), Err(Error::Domain { .. })));
        assert!(matches!(f.eval(xs + 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn g_closed_times_mass_is_one() {
        let grid = GridSpec::new(-8.0, 6.0, 400).unwrap();
        for b in FIGURE_BETAS {
            let gs = sample(&G_closed(1.0, b).unwrap(), &grid).unwrap();
            let ms = sample(&mass_family(1.0, b).unwrap(), &grid).unwrap();
            for (g, m) in gs.iter().zip(&ms) {
                assert!((g * g * m - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shifted_coordinate_is_increasing_and_unbounded() {
        let (a, b) = (1.0, 0.5);
        let f = f_closed(a, b).unwrap();
        let xs = x_star(a, b);
        let pts: Vec<f64> = (0..400).map(|i| -40.0 + (xs + 40.0) * i as f64 / 400.0).collect();
        let y: Vec<f64> = pts.iter().map(|x| x + f.eval(*x).unwrap()).collect();
        assert!(y.windows(2).all(|w| w[1] > w[0]));
        assert!(y[0] < -39.0);
        assert!(xs - 1e-12 + f.eval(xs - 1e-12).unwrap() > 50.0);
    }

    #[test]
    fn transformed_potential_is_morse_for_minus_sign() {
        let cfg = ExampleConfig::acceptance();
        let morse = morse_potential(&morse_from_config(&cfg).unwrap());
        let grid = GridSpec::new(-2.0, cfg.x_star() - 0.5, 120).unwrap();
        let opts = SeriesOptions::new(256, 1e-12).unwrap();
        let spec = transformed_potential(
            &potential_family(&cfg).unwrap(),
            &generator_for_mass(cfg.alpha, cfg.beta),
            &opts,
            Convention::AsPrinted19b,
            &grid,
        )
        .unwrap();
        for x in grid.nodes() {
            let d = (spec.w.eval(x).unwrap() - morse.eval(x).unwrap()).abs();
            assert!(d <= 1e-8, "x = {x}: {d}");
        }

        // The plus sign leaves (αβ³/2) e^{βy} behind.
        let plus = cfg.with_sign(A3Sign::Plus);
        let spec = transformed_potential(
            &potential_family(&plus).unwrap(),
            &generator_for_mass(cfg.alpha, cfg.beta),
            &opts,
            Convention::AsPrinted19b,
            &grid,
        )
        .unwrap();
        let f = f_closed(cfg.alpha, cfg.beta).unwrap();
        for x in [0.0, 2.0, 4.0] {
            let y = x + f.eval(x).unwrap();
            let leftover = cfg.alpha * cfg.beta.powi(3) / 2.0 * (cfg.beta * y).exp();
            let d = spec.w.eval(x).unwrap() - morse.eval(x).unwrap();
            assert_relative_eq!(d, leftover, max_relative = 1e-8);
        }
    }

    #[test]
    fn squeeze_baseline_levels() {
        let s = SqueezeBaseline::new(2.0).unwrap();
        assert_relative_eq!(s.level(0), 0.35355339059327373, epsilon = 1e-15);
        assert_relative_eq!(s.target_potential().eval(2.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(SqueezeBaseline::new(0.0).is_err());
    }

    proptest! {
        #[test]
        fn morse_minimum_is_zero(d in 0.1f64..100.0, b in 0.1f64..3.0, g in -5.0f64..5.0) {
            let p = MorseParams { d_e: d, beta: b, gamma: g };
            prop_assert_eq!(morse_potential(&p).eval(g).unwrap(), 0.0);
        }

        #[test]
        fn de_formula_holds(a0 in 0.5f64..100.0, a1 in -500.0f64..-1.0, alpha in 0.05f64..2.0, beta in 0.1f64..2.0) {
            let cfg = ExampleConfig::new(alpha, beta, a0, a1, A3Sign::Minus).unwrap();
            let p = morse_from_config(&cfg).unwrap();
            let expect = (2.0 * a0 - alpha * beta * a1).powi(2) / (4.0 * a0);
            prop_assert!((p.d_e - expect).abs() <= 1e-12 * expect);
        }
    }
}
