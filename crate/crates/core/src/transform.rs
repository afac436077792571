//! Series for the auxiliary functions of the transformation and the
//! transformed potential.
//!
//! With generator `g`:
//! - `G = Σ (-1)^k G_k / k!`, `G_0 = 1`, `G_{k+1} = g² (G_k / g)'`
//! - `f = Σ f_k / k!`, `F = Σ (-1)^k f_k / k!`, `f_1 = g`, `f_{k+1} = g f_k'`
//!
//! Terms are produced with truncated Taylor arithmetic at each evaluation
//! point, so every `d/dx` in the recursion is exact. Convergence is tracked
//! per point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{GridSpec, ScalarField};
use crate::jet::Jet;

/// Series truncation settings. `k_max` caps the number of terms; evaluation
/// starts at 16 terms and doubles up to the cap until the stop rule fires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesOptions {
    pub k_max: usize,
    pub tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            k_max: 24,
            tol: 1e-12,
        }
    }
}

impl SeriesOptions {
    pub fn new(k_max: usize, tol: f64) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::Param("series truncation K must be at least 1".into()));
        }
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Param(format!("tolerance must be positive, got {tol}")));
        }
        Ok(SeriesOptions { k_max, tol })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesKind {
    G,
    #[serde(rename = "f")]
    SmallF,
    #[serde(rename = "F")]
    BigF,
}

/// Outcome of summing one series at one point.
#[derive(Debug, Clone)]
pub struct SeriesPoint {
    /// Partial sum as a jet (value plus requested derivatives).
    pub sum: Jet,
    /// Index of the first term meeting the stop rule, if any did.
    pub converged_at: Option<usize>,
    pub diverged: bool,
    pub terms_used: usize,
}

impl SeriesPoint {
    pub fn value(&self) -> f64 {
        self.sum.value()
    }

    pub fn admissible(&self) -> bool {
        self.converged_at.is_some() && !self.diverged
    }
}

/// Sum the `kind` series at `x0`, returning `deriv` derivatives alongside the value.
pub fn sum_series(
    kind: SeriesKind,
    g: &ScalarField,
    x0: f64,
    deriv: usize,
    opts: &SeriesOptions,
) -> Result<SeriesPoint> {
    let mut kk = opts.k_max.min(16);
    loop {
        let pt = sum_series_fixed(kind, g, x0, deriv, kk, opts.tol)?;
        if pt.converged_at.is_some() || pt.diverged || kk >= opts.k_max {
            return Ok(pt);
        }
        kk = (2 * kk).min(opts.k_max);
    }
}

fn term_size(t: &Jet, s: &Jet, deriv: usize) -> f64 {
    (0..=deriv)
        .map(|j| t.coeff(j).abs() / (1.0 + s.coeff(j).abs()))
        .fold(0.0, f64::max)
}

fn sum_series_fixed(
    kind: SeriesKind,
    g: &ScalarField,
    x0: f64,
    deriv: usize,
    kk: usize,
    tol: f64,
) -> Result<SeriesPoint> {
    let order = kk + deriv;
    let gj = g.taylor(x0, order)?;
    let mut converged_at = None;
    let mut diverged = false;
    let mut growth = 0usize;
    let mut prev = f64::INFINITY;
    let mut terms_used = 0usize;

    let mut sum;
    match kind {
        SeriesKind::SmallF | SeriesKind::BigF => {
            let sign = |k: usize| if kind == SeriesKind::BigF && k % 2 == 1 { -1.0 } else { 1.0 };
            // t_k = f_k / k!, so t_{k+1} = g t_k' / (k + 1)
            let mut t = gj.clone();
            sum = t.scale(sign(1));
            terms_used = 1;
            prev = t.value().abs();
            if term_size(&t, &sum, deriv) < tol {
                converged_at = Some(1);
            }
            for k in 2..=kk {
                if converged_at.is_some() {
                    break;
                }
                t = (&gj * &t.differentiate()).scale(1.0 / k as f64);
                sum = &sum + &t.scale(sign(k));
                terms_used = k;
                let mag = t.value().abs();
                if k > 5 && mag > prev {
                    growth += 1;
                } else {
                    growth = 0;
                }
                prev = mag;
                if growth >= 3 {
                    diverged = true;
                    break;
                }
                if term_size(&t, &sum, deriv) < tol {
                    converged_at = Some(k);
                }
            }
        }
        SeriesKind::G => {
            if gj.coeffs().iter().all(|c| *c == 0.0) {
                // Null generator: T is the identity and G = 1 exactly.
                return Ok(SeriesPoint {
                    sum: Jet::constant(1.0, deriv),
                    converged_at: Some(0),
                    diverged: false,
                    terms_used: 0,
                });
            }
            if gj.value() == 0.0 {
                return Err(Error::DivisionByGenerator { x: x0 });
            }
            // H_k = (-1)^k G_k / k!, so H_{k+1} = -g² (H_k / g)' / (k + 1)
            let g2 = &gj * &gj;
            let mut h = Jet::constant(1.0, order);
            sum = h.clone();
            for k in 1..=kk {
                let q = h
                    .checked_div(&gj)
                    .ok_or(Error::DivisionByGenerator { x: x0 })?;
                h = (&g2 * &q.differentiate()).scale(-1.0 / k as f64);
                sum = &sum + &h;
                terms_used = k;
                let mag = h.value().abs();
                if k > 5 && mag > prev {
                    growth += 1;
                } else {
                    growth = 0;
                }
                prev = mag;
                if growth >= 3 {
                    diverged = true;
                    break;
                }
                if term_size(&h, &sum, deriv) < tol {
                    converged_at = Some(k);
                    break;
                }
            }
        }
    }
    if !sum.is_finite() {
        diverged = true;
    }
    Ok(SeriesPoint {
        sum: sum.truncate(deriv),
        converged_at,
        diverged,
        terms_used,
    })
}

/// The three series of one generator, with per-term access and diagnostics.
#[derive(Debug, Clone)]
pub struct TransformSeries {
    pub g: ScalarField,
    pub opts: SeriesOptions,
}

impl TransformSeries {
    pub fn new(g: ScalarField, opts: SeriesOptions) -> Self {
        TransformSeries { g, opts }
    }

    pub fn point(&self, kind: SeriesKind, x: f64) -> Result<SeriesPoint> {
        sum_series(kind, &self.g, x, 0, &self.opts)
    }

    /// Smallest k meeting the stop rule at `x`, `None` if the cap was hit first.
    pub fn converged_at(&self, kind: SeriesKind, x: f64) -> Result<Option<usize>> {
        Ok(self.point(kind, x)?.converged_at)
    }

    fn field(&self, kind: SeriesKind, name: &str) -> ScalarField {
        let g = self.g.clone();
        let opts = self.opts;
        let label = format!("{name}[{}]", g.label());
        let domain = g.domain();
        let fname = label.clone();
        ScalarField::analytic(label, domain, move |x| {
            let pt = sum_series(kind, &g, x.value(), x.order(), &opts)?;
            // f and F are undefined where the series diverges; G only flags it.
            if pt.diverged && kind != SeriesKind::G {
                return Err(Error::Domain {
                    field: fname.clone(),
                    x: x.value(),
                    lo: domain.lo,
                    hi: domain.hi,
                    node: None,
                });
            }
            Ok(pt.sum.compose(x))
        })
    }

    pub fn big_g(&self) -> ScalarField {
        self.field(SeriesKind::G, "G")
    }

    pub fn f(&self) -> ScalarField {
        self.field(SeriesKind::SmallF, "f")
    }

    pub fn big_f(&self) -> ScalarField {
        self.field(SeriesKind::BigF, "F")
    }

    /// The unnormalized recursion term `G_k` (without sign or factorial).
    pub fn term_g(&self, k: usize) -> ScalarField {
        let g = self.g.clone();
        ScalarField::analytic(format!("G_{k}[{}]", g.label()), g.domain(), move |x| {
            let m = x.order();
            let gj = g.taylor(x.value(), k + m)?;
            let g2 = &gj * &gj;
            let mut t = Jet::constant(1.0, k + m);
            for _ in 0..k {
                let q = t
                    .checked_div(&gj)
                    .ok_or(Error::DivisionByGenerator { x: x.value() })?;
                t = &g2 * &q.differentiate();
            }
            Ok(t.truncate(m).compose(x))
        })
    }

    /// The unnormalized recursion term `f_k`, `k >= 1`.
    pub fn term_f(&self, k: usize) -> ScalarField {
        assert!(k >= 1, "f terms start at k = 1");
        let g = self.g.clone();
        ScalarField::analytic(format!("f_{k}[{}]", g.label()), g.domain(), move |x| {
            let m = x.order();
            let gj = g.taylor(x.value(), k + m)?;
            let mut t = gj.clone();
            for _ in 1..k {
                t = &gj * &t.differentiate();
            }
            Ok(t.truncate(m).compose(x))
        })
    }
}

pub fn series_g(g: &ScalarField, opts: &SeriesOptions) -> ScalarField {
    TransformSeries::new(g.clone(), *opts).big_g()
}

pub fn series_f(g: &ScalarField, opts: &SeriesOptions) -> ScalarField {
    TransformSeries::new(g.clone(), *opts).f()
}

#[allow(non_snake_case)]
pub fn series_F(g: &ScalarField, opts: &SeriesOptions) -> ScalarField {
    TransformSeries::new(g.clone(), *opts).big_f()
}

/// Which form of the quantum correction `Ṽ - V` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    /// `(1/8)(G²)'' - (1/8)G'²`
    #[serde(rename = "AS_PRINTED_19B")]
    AsPrinted19b,
    /// `(1/8)(G²)'' - (1/2)G'²`.
    #[serde(rename = "ALTERNATE_17")]
    Alternate17,
}

impl Convention {
    pub const ALL: [Convention; 2] = [Convention::AsPrinted19b, Convention::Alternate17];

    pub fn name(&self) -> &'static str {
        match self {
            Convention::AsPrinted19b => "AS_PRINTED_19B",
            Convention::Alternate17 => "ALTERNATE_17",
        }
    }

    fn gp2_coeff(&self) -> f64 {
        match self {
            Convention::AsPrinted19b => 0.125,
            Convention::Alternate17 => 0.5,
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `Ṽ = V + (1/8)(G²)'' - c G'²`, with `c` set by `convention`.
pub fn v_tilde(v: &ScalarField, big_g: &ScalarField, convention: Convention) -> ScalarField {
    let (v, gg) = (v.clone(), big_g.clone());
    let c = convention.gp2_coeff();
    let label = format!("Vt[{}; {}]", v.label(), convention.name());
    let domain = v.domain().intersect(&big_g.domain());
    ScalarField::analytic(label, domain, move |x| {
        let m = x.order();
        let gj = gg.taylor(x.value(), m + 2)?;
        let sq = &gj * &gj;
        let sq2 = sq.differentiate().differentiate();
        let gp = gj.differentiate();
        let corr = &sq2.scale(0.125) - &(&gp * &gp).scale(c);
        let corr = corr.truncate(m).compose(x);
        Ok(&v.eval_jet(x)? + &corr)
    })
}

/// All intermediate fields of one transformed-potential computation.
#[derive(Debug, Clone)]
pub struct TransformedPotentialSpec {
    pub v: ScalarField,
    pub g: ScalarField,
    pub series: TransformSeries,
    pub big_g: ScalarField,
    pub f: ScalarField,
    pub v_tilde: ScalarField,
    /// `W(x) = Ṽ(x + f(x))`
    pub w: ScalarField,
    pub convention: Convention,
}

/// Build `W = Ṽ ∘ (id + f)` and check that the `f` series converges at every
/// node of `grid`.
pub fn transformed_potential(
    v: &ScalarField,
    g: &ScalarField,
    opts: &SeriesOptions,
    convention: Convention,
    grid: &GridSpec,
) -> Result<TransformedPotentialSpec> {
    let series = TransformSeries::new(g.clone(), *opts);
    let big_g = series.big_g();
    let f = series.f();
    let vt = v_tilde(v, &big_g, convention);
    let shift = ScalarField::identity().add(&f).with_domain(g.domain());
    let w = vt.compose(&shift).with_label(format!("W[{}]", v.label()));

    let nodes = grid.nodes();
    let mut ok = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        let admissible = match series.point(SeriesKind::SmallF, x) {
            Ok(pt) => pt.admissible(),
            Err(Error::Domain { .. }) => false,
            Err(e) => return Err(e),
        };
        ok.push(admissible);
    }
    if ok.iter().any(|a| !a) {
        let adm: Vec<f64> = nodes
            .iter()
            .zip(&ok)
            .filter(|(_, a)| **a)
            .map(|(x, _)| *x)
            .collect();
        let (lo, hi) = match (adm.first(), adm.last()) {
            (Some(lo), Some(hi)) => (*lo, *hi),
            _ => (f64::NAN, f64::NAN),
        };
        return Err(Error::NarrowDomain {
            field: f.label().to_string(),
            requested_lo: grid.x_min(),
            requested_hi: grid.x_max(),
            admissible_lo: lo,
            admissible_hi: hi,
        });
    }

    Ok(TransformedPotentialSpec {
        v: v.clone(),
        g: g.clone(),
        series,
        big_g,
        f,
        v_tilde: vt,
        w,
        convention,
    })
}

/// `sup |G(x)² m(x) - 1|` over the nodes of `grid`.
pub fn verify_mass_consistency(
    m: &ScalarField,
    g: &ScalarField,
    grid: &GridSpec,
    opts: &SeriesOptions,
) -> Result<f64> {
    let big_g = series_g(g, opts);
    let mut worst: f64 = 0.0;
    for x in grid.nodes() {
        let gv = big_g.eval(x)?;
        worst = worst.max((gv * gv * m.eval(x)? - 1.0).abs());
    }
    Ok(worst)
}
