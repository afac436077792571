//! Finite-difference Hamiltonians and the discrete transformation `T`.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{sample, GridSpec, ScalarField};

/// Real symmetric tridiagonal matrix on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub grid: GridSpec,
    pub label: String,
}

impl TridiagonalOperator {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>, grid: GridSpec, label: impl Into<String>) -> Result<Self> {
        if diag.len() != grid.n() || offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidGrid(format!(
                "tridiagonal sizes {}/{} do not match n = {}",
                diag.len(),
                offdiag.len(),
                grid.n()
            )));
        }
        Ok(TridiagonalOperator {
            diag,
            offdiag,
            grid,
            label: label.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.offdiag[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.offdiag[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.n();
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            a[[i, i]] = self.diag[i];
            if i + 1 < n {
                a[[i, i + 1]] = self.offdiag[i];
                a[[i + 1, i]] = self.offdiag[i];
            }
        }
        a
    }

    /// `max|diag| + 2 max|offdiag|`, the scale for relative tolerances.
    pub fn scale(&self) -> f64 {
        let d = self.diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let o = self.offdiag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        d + 2.0 * o
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.offdiag[i - 1].abs();
            }
            if i + 1 < n {
                r += self.offdiag[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }
}

/// Exponents of the symmetrized kinetic family `(mᵃ p mᵇ p mᶜ + mᶜ p mᵇ p mᵃ)/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingParams {
    pub a_ord: f64,
    pub b_ord: f64,
    pub c_ord: f64,
}

impl OrderingParams {
    /// `p (1/2m) p`
    pub const BEN_DANIEL_DUKE: OrderingParams = OrderingParams {
        a_ord: 0.0,
        b_ord: -1.0,
        c_ord: 0.0,
    };
    /// `(m⁻¹p² + p²m⁻¹)/4`
    pub const INVERSE_MASS_OUTSIDE: OrderingParams = OrderingParams {
        a_ord: -1.0,
        b_ord: 0.0,
        c_ord: 0.0,
    };

    pub fn new(a_ord: f64, b_ord: f64, c_ord: f64) -> Result<Self> {
        let p = OrderingParams { a_ord, b_ord, c_ord };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let sum = self.a_ord + self.b_ord + self.c_ord;
        if (sum + 1.0).abs() > 1e-12 {
            return Err(Error::OrderingConstraint { sum });
        }
        Ok(())
    }
}

/// Where the BenDaniel–Duke stencil samples the mass between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MassSampling {
    /// `x_{i+1/2}`
    HalfNode,
    /// `x_{i+1}`: off by half a cell, only first-order accurate. Negative control.
    NextNode,
}

/// Masses at the `n + 1` half nodes `x_min + (j + 1/2) h`, `j = 0..=n`.
fn half_node_masses(m: &ScalarField, grid: &GridSpec, sampling: MassSampling) -> Result<Vec<f64>> {
    let h = grid.h();
    let offset = match sampling {
        MassSampling::HalfNode => 0.5,
        MassSampling::NextNode => 1.0,
    };
    (0..=grid.n())
        .map(|j| {
            let x = grid.x_min() + (j as f64 + offset) * h;
            let mass = m.eval(x)?;
            if mass <= 0.0 || !mass.is_finite() {
                return Err(Error::MassSign { x, mass });
            }
            Ok(mass)
        })
        .collect()
}

/// `p (1/2m) p + V` with half-node masses and Dirichlet walls.
pub fn hamiltonian_bdd(m: &ScalarField, v: &ScalarField, grid: &GridSpec) -> Result<TridiagonalOperator> {
    hamiltonian_bdd_with(m, v, grid, MassSampling::HalfNode)
}

pub fn hamiltonian_bdd_with(
    m: &ScalarField,
    v: &ScalarField,
    grid: &GridSpec,
    sampling: MassSampling,
) -> Result<TridiagonalOperator> {
    let h2 = grid.h() * grid.h();
    let mh = half_node_masses(m, grid, sampling)?;
    let vs = sample(v, grid)?;
    let n = grid.n();
    let diag = (0..n)
        .map(|i| (1.0 / mh[i] + 1.0 / mh[i + 1]) / (2.0 * h2) + vs[i])
        .collect();
    let offdiag = (0..n - 1).map(|i| -1.0 / (2.0 * h2 * mh[i + 1])).collect();
    let label = match sampling {
        MassSampling::HalfNode => format!("BDD[{}; {}]", m.label(), v.label()),
        MassSampling::NextNode => format!("BDD-corrupted[{}; {}]", m.label(), v.label()),
    };
    TridiagonalOperator::new(diag, offdiag, *grid, label)
}

/// General symmetrized ordering. With `L = -(d/dx) mᵇ (d/dx)` discretized on
/// half nodes and `Mᵃ` diagonal at nodes, the kinetic part is
/// `(Mᵃ L Mᶜ + Mᶜ L Mᵃ)/4`.
pub fn hamiltonian_vonroos(
    m: &ScalarField,
    v: &ScalarField,
    ord: &OrderingParams,
    grid: &GridSpec,
) -> Result<TridiagonalOperator> {
    ord.check()?;
    let h2 = grid.h() * grid.h();
    let mh = half_node_masses(m, grid, MassSampling::HalfNode)?;
    let mn = sample(m, grid)?;
    for (i, &mass) in mn.iter().enumerate() {
        if mass <= 0.0 {
            return Err(Error::MassSign { x: grid.node(i), mass });
        }
    }
    let vs = sample(v, grid)?;
    let n = grid.n();
    let ma: Vec<f64> = mn.iter().map(|x| x.powf(ord.a_ord)).collect();
    let mc: Vec<f64> = mn.iter().map(|x| x.powf(ord.c_ord)).collect();
    let mb: Vec<f64> = mh.iter().map(|x| x.powf(ord.b_ord)).collect();
    let diag = (0..n)
        .map(|i| {
            let l_ii = (mb[i] + mb[i + 1]) / h2;
            0.5 * ma[i] * mc[i] * l_ii + vs[i]
        })
        .collect();
    let offdiag = (0..n - 1)
        .map(|i| {
            let l = -mb[i + 1] / h2;
            0.25 * l * (ma[i] * mc[i + 1] + mc[i] * ma[i + 1])
        })
        .collect();
    TridiagonalOperator::new(
        diag,
        offdiag,
        *grid,
        format!(
            "vonRoos({},{},{})[{}; {}]",
            ord.a_ord,
            ord.b_ord,
            ord.c_ord,
            m.label(),
            v.label()
        ),
    )
}

/// `p²/2 + V`.
pub fn hamiltonian_constant(v: &ScalarField, grid: &GridSpec) -> Result<TridiagonalOperator> {
    let h2 = grid.h() * grid.h();
    let vs = sample(v, grid)?;
    let n = grid.n();
    let diag = vs.iter().map(|vi| 1.0 / h2 + vi).collect();
    let offdiag = vec![-0.5 / h2; n - 1];
    TridiagonalOperator::new(diag, offdiag, *grid, format!("p^2/2 + {}", v.label()))
}

/// Dense real matrix on a grid. The discrete `T` is real orthogonal because
/// its generator is real antisymmetric.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub entries: Array2<f64>,
    pub grid: GridSpec,
    pub label: String,
}

impl DenseOperator {
    pub fn identity(grid: &GridSpec) -> Self {
        DenseOperator {
            entries: Array2::eye(grid.n()),
            grid: *grid,
            label: "I".into(),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.entries.dot(&Array1::from(v.to_vec())).to_vec()
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        self.entries.t().dot(&Array1::from(v.to_vec())).to_vec()
    }

    /// `‖UᵀU − I‖_max`
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.entries.t().dot(&self.entries);
        let mut worst: f64 = 0.0;
        for ((i, j), v) in p.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
        worst
    }

    pub fn compose(&self, other: &DenseOperator) -> DenseOperator {
        DenseOperator {
            entries: self.entries.dot(&other.entries),
            grid: self.grid,
            label: format!("{} {}", self.label, other.label),
        }
    }

    /// `Tᵀ H T` as a dense matrix.
    pub fn conjugate(&self, h: &TridiagonalOperator) -> Array2<f64> {
        let ht = h.to_dense().dot(&self.entries);
        self.entries.t().dot(&ht)
    }
}

/// Centered first-derivative stencils. Both are antisymmetric, which keeps
/// the discrete `T` exactly orthogonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum MomentumStencil {
    Second,
    #[default]
    Fourth,
}

impl MomentumStencil {
    /// Weights `w_k` with `(Dψ)_i = Σ_k w_k (ψ_{i+k} − ψ_{i−k}) / h`.
    fn weights(self) -> &'static [f64] {
        match self {
            MomentumStencil::Second => &[0.5],
            MomentumStencil::Fourth => &[2.0 / 3.0, -1.0 / 12.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteTOptions {
    /// Cayley steps over unit time; `None` means `2n`.
    pub n_steps: Option<usize>,
    pub stencil: MomentumStencil,
}

impl Default for DiscreteTOptions {
    fn default() -> Self {
        DiscreteTOptions {
            n_steps: None,
            stencil: MomentumStencil::Fourth,
        }
    }
}

/// Square banded matrix with half-bandwidth `w`, row-major band storage.
#[derive(Debug, Clone)]
struct Banded {
    n: usize,
    w: usize,
    a: Vec<f64>,
}

impl Banded {
    fn zeros(n: usize, w: usize) -> Self {
        Banded {
            n,
            w,
            a: vec![0.0; n * (2 * w + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.w + 1) + (j + self.w - i)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.w {
            0.0
        } else {
            self.a[self.idx(i, j)]
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.a[k] = v;
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.w);
                let hi = (i + self.w).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// In-place LU without pivoting. Safe here: the step matrix `I + S/2N`
    /// has identity symmetric part, so every leading minor is nonsingular.
    fn factor(mut self) -> Result<Banded> {
        let (n, w) = (self.n, self.w);
        for k in 0..n {
            let piv = self.get(k, k);
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::StepSingular { step: k });
            }
            for i in k + 1..=(k + w).min(n - 1) {
                let l = self.get(i, k) / piv;
                self.set(i, k, l);
                for j in k + 1..=(k + w).min(n - 1) {
                    let v = self.get(i, j) - l * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(self)
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, w) = (self.n, self.w);
        for i in 0..n {
            let lo = i.saturating_sub(w);
            let s: f64 = (lo..i).map(|j| self.get(i, j) * b[j]).sum();
            b[i] -= s;
        }
        for i in (0..n).rev() {
            let hi = (i + w).min(n - 1);
            let s: f64 = (i + 1..=hi).map(|j| self.get(i, j) * b[j]).sum();
            b[i] = (b[i] - s) / self.get(i, i);
        }
    }
}

/// One Cayley step `(I + S/2N)⁻¹ (I − S/2N)` for the real antisymmetric
/// generator `S = (D g + g D)/2`, where `p = −iD`.
#[derive(Debug, Clone)]
pub struct CayleyStep {
    lu: Banded,
    rhs: Banded,
}

impl CayleyStep {
    pub fn new(g: &ScalarField, grid: &GridSpec, n_steps: usize, stencil: MomentumStencil) -> Result<Self> {
        let gs = sample(g, grid)?;
        let n = grid.n();
        let h = grid.h();
        let wts = stencil.weights();
        let w = wts.len();
        let dt = 1.0 / n_steps as f64;
        let mut plus = Banded::zeros(n, w);
        let mut minus = Banded::zeros(n, w);
        for i in 0..n {
            plus.set(i, i, 1.0);
            minus.set(i, i, 1.0);
            for (k, wk) in wts.iter().enumerate() {
                let off = k + 1;
                if i + off < n {
                    let j = i + off;
                    // D_ij = w/h for j > i, D_ji = −w/h
                    let s = wk / h * 0.5 * (gs[i] + gs[j]);
                    plus.set(i, j, 0.5 * dt * s);
                    plus.set(j, i, -0.5 * dt * s);
                    minus.set(i, j, -0.5 * dt * s);
                    minus.set(j, i, 0.5 * dt * s);
                }
            }
        }
        Ok(CayleyStep {
            lu: plus.factor()?,
            rhs: minus,
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut b = self.rhs.matvec(v);
        self.lu.solve(&mut b);
        b
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.lu.n;
        let mut c = Array2::zeros((n, n));
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.apply(&e);
            for (i, v) in col.into_iter().enumerate() {
                c[[i, j]] = v;
            }
        }
        c
    }
}

/// Discrete `T = exp(−i(pg + gp)/2)` as the `N`-fold product of one Cayley
/// step, built by binary powering. Applied to a packet near `x0` it moves
/// the packet to `x0 + f(x0)`.
pub fn discrete_t(g: &ScalarField, grid: &GridSpec, opts: &DiscreteTOptions) -> Result<DenseOperator> {
    let n_steps = opts.n_steps.unwrap_or(2 * grid.n()).max(1);
    let step = CayleyStep::new(g, grid, n_steps, opts.stencil)?;
    let mut base = step.to_dense();
    let mut acc: Option<Array2<f64>> = None;
    let mut k = n_steps;
    while k > 0 {
        if k & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => a.dot(&base),
            });
        }
        k >>= 1;
        if k > 0 {
            base = base.dot(&base);
        }
    }
    Ok(DenseOperator {
        entries: acc.expect("n_steps >= 1"),
        grid: *grid,
        label: format!("T[{}; N={n_steps}]", g.label()),
    })
}

/// Normalized Gaussian (h-weighted norm) centered at `center`.
pub fn gaussian_probe(grid: &GridSpec, center: f64, width: f64) -> Vec<f64> {
    let mut v: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| (-0.5 * ((x - center) / width).powi(2)).exp())
        .collect();
    let norm = grid.norm(&v);
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

/// Nodes next to each wall that a probe (and its image) must leave empty.
pub const PROBE_MARGIN: usize = 10;
/// Largest allowed magnitude in the margin, relative to the peak.
pub const PROBE_EDGE_TOL: f64 = 1e-8;

fn touches_edge(v: &[f64]) -> bool {
    let peak = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let n = v.len();
    let k = PROBE_MARGIN.min(n / 2);
    v[..k].iter().chain(&v[n - k..]).any(|a| a.abs() > PROBE_EDGE_TOL * peak)
}

/// `max_probe ‖(TᵀHT)ψ − H_target ψ‖ / ‖H_target ψ‖` over the middle 60% of nodes.
pub fn conjugation_residual(
    h: &TridiagonalOperator,
    t: &DenseOperator,
    h_target: &TridiagonalOperator,
    probes: &[Vec<f64>],
) -> Result<f64> {
    let n = h.n();
    if t.grid != h.grid || h_target.grid != h.grid {
        return Err(Error::InvalidGrid("conjugation operands live on different grids".into()));
    }
    let lo = (0.2 * n as f64).floor() as usize;
    let hi = (0.8 * n as f64).ceil() as usize;
    let mut worst: f64 = 0.0;
    for (k, psi) in probes.iter().enumerate() {
        if touches_edge(psi) {
            return Err(Error::ProbeEscape { probe: k, what: "probe" });
        }
        let image = t.apply(psi);
        if touches_edge(&image) {
            return Err(Error::ProbeEscape { probe: k, what: "image under T" });
        }
        let lhs = t.apply_transpose(&h.apply(&image));
        let rhs = h_target.apply(psi);
        let num: f64 = (lo..hi).map(|i| (lhs[i] - rhs[i]).powi(2)).sum::<f64>().sqrt();
        let den: f64 = (lo..hi).map(|i| rhs[i].powi(2)).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Domain;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp_mass(alpha: f64, beta: f64) -> ScalarField {
        ScalarField::analytic("m", Domain::REAL_LINE, move |x| {
            Ok(x.scale(beta).exp().scale(alpha * beta).add_scalar(1.0).powi(2).recip().unwrap())
        })
    }

    fn exp_g(alpha: f64, beta: f64) -> ScalarField {
        ScalarField::analytic("g", Domain::REAL_LINE, move |x| Ok(x.scale(beta).exp().scale(alpha)))
    }

    fn quadratic(c: f64) -> ScalarField {
        ScalarField::analytic("cx^2", Domain::REAL_LINE, move |x| Ok(x.powi(2).scale(c)))
    }

    #[test]
    fn free_particle_stencil() {
        let grid = GridSpec::new(0.0, 1.0, 9).unwrap();
        let h2 = grid.h() * grid.h();
        let op = hamiltonian_bdd(&ScalarField::constant(1.0), &ScalarField::constant(0.0), &grid).unwrap();
        for d in &op.diag {
            assert_relative_eq!(*d, 1.0 / h2, max_relative = 1e-15);
        }
        for o in &op.offdiag {
            assert_relative_eq!(*o, -0.5 / h2, max_relative = 1e-15);
        }
    }

    #[test]
    fn nonpositive_mass_is_rejected() {
        let grid = GridSpec::new(-1.0, 1.0, 9).unwrap();
        let m = ScalarField::identity();
        assert!(matches!(
            hamiltonian_bdd(&m, &ScalarField::constant(0.0), &grid),
            Err(Error::MassSign { .. })
        ));
    }

    #[test]
    fn exponential_mass_operator_structure() {
        let grid = GridSpec::new(-6.0, 4.0, 200).unwrap();
        let op = hamiltonian_bdd(&exp_mass(1.0, 1.0), &ScalarField::constant(0.0), &grid).unwrap();
        for i in 0..op.n() {
            let mut r = 0.0;
            if i > 0 {
                r += op.offdiag[i - 1].abs();
            }
            if i + 1 < op.n() {
                r += op.offdiag[i].abs();
            }
            assert!(op.diag[i] >= r * (1.0 - 1e-14));
        }
        assert_eq!(op.to_dense(), op.to_dense().t());
    }

    #[test]
    fn vonroos_bdd_ordering_matches() {
        let grid = GridSpec::new(-6.0, 4.0, 100).unwrap();
        let m = exp_mass(1.0, 1.0);
        let v = quadratic(0.5);
        let a = hamiltonian_bdd(&m, &v, &grid).unwrap();
        let b = hamiltonian_vonroos(&m, &v, &OrderingParams::BEN_DANIEL_DUKE, &grid).unwrap();
        for (x, y) in a.diag.iter().zip(&b.diag) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
        for (x, y) in a.offdiag.iter().zip(&b.offdiag) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn orderings_coincide_for_constant_mass() {
        let grid = GridSpec::new(-3.0, 3.0, 50).unwrap();
        let m = ScalarField::constant(2.0);
        let v = quadratic(0.5);
        let a = hamiltonian_vonroos(&m, &v, &OrderingParams::BEN_DANIEL_DUKE, &grid).unwrap();
        let b = hamiltonian_vonroos(&m, &v, &OrderingParams::INVERSE_MASS_OUTSIDE, &grid).unwrap();
        let c = hamiltonian_vonroos(&m, &v, &OrderingParams::new(-0.25, -0.5, -0.25).unwrap(), &grid).unwrap();
        for i in 0..a.n() {
            assert_relative_eq!(a.diag[i], b.diag[i], max_relative = 1e-13);
            assert_relative_eq!(a.diag[i], c.diag[i], max_relative = 1e-13);
        }
    }

    #[test]
    fn ordering_constraint_is_enforced() {
        assert_eq!(
            OrderingParams::new(0.0, 0.0, 0.0).unwrap_err(),
            Error::OrderingConstraint { sum: 0.0 }
        );
        let grid = GridSpec::new(-1.0, 1.0, 5).unwrap();
        let bad = OrderingParams {
            a_ord: 1.0,
            b_ord: 0.0,
            c_ord: 0.0,
        };
        assert!(hamiltonian_vonroos(&ScalarField::constant(1.0), &ScalarField::constant(0.0), &bad, &grid).is_err());
    }

    #[test]
    fn constant_hamiltonian_matches_unit_mass_bdd() {
        let grid = GridSpec::new(-2.0, 2.0, 31).unwrap();
        let v = quadratic(0.5);
        let a = hamiltonian_constant(&v, &grid).unwrap();
        let b = hamiltonian_bdd(&ScalarField::constant(1.0), &v, &grid).unwrap();
        assert_eq!(a.diag, b.diag);
        assert_eq!(a.offdiag, b.offdiag);
    }

    #[test]
    fn null_generator_gives_identity() {
        let grid = GridSpec::new(-1.0, 1.0, 20).unwrap();
        let t = discrete_t(&ScalarField::constant(0.0), &grid, &DiscreteTOptions::default()).unwrap();
        assert_eq!(t.entries, Array2::<f64>::eye(20));
    }

    fn centroid(grid: &GridSpec, v: &[f64]) -> f64 {
        let xs = grid.nodes();
        let w: f64 = v.iter().map(|a| a * a).sum();
        xs.iter().zip(v).map(|(x, a)| x * a * a).sum::<f64>() / w
    }

    #[test]
    fn constant_generator_moves_packets_forward() {
        // Regression lock: exp(−i(pg+gp)/2) with g = c moves a packet by +c.
        let grid = GridSpec::new(-10.0, 10.0, 400).unwrap();
        let c = 1.5;
        let t = discrete_t(&ScalarField::constant(c), &grid, &DiscreteTOptions::default()).unwrap();
        let psi = gaussian_probe(&grid, -1.0, 1.0);
        let out = t.apply(&psi);
        assert_relative_eq!(centroid(&grid, &out), -1.0 + c, epsilon = 1e-3);
    }

    #[test]
    fn exponential_generator_is_orthogonal() {
        let grid = GridSpec::new(-6.0, 2.0, 256).unwrap();
        let opts = DiscreteTOptions {
            n_steps: Some(512),
            ..Default::default()
        };
        let t = discrete_t(&exp_g(1.0, 0.5), &grid, &opts).unwrap();
        let d = t.unitarity_defect();
        assert!(d <= 1e-9, "{d}");
    }

    #[test]
    fn reverse_generator_undoes_t() {
        let grid = GridSpec::new(-6.0, 2.0, 128).unwrap();
        let g = exp_g(1.0, 0.5);
        let opts = DiscreteTOptions::default();
        let t = discrete_t(&g, &grid, &opts).unwrap();
        let back = discrete_t(&g.scale(-1.0), &grid, &opts).unwrap();
        let p = back.compose(&t);
        let defect = (&p.entries - &Array2::<f64>::eye(128)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(defect <= 1e-8, "{defect}");
    }

    #[test]
    fn cayley_step_preserves_norm() {
        let grid = GridSpec::new(-6.0, 2.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for stencil in [MomentumStencil::Second, MomentumStencil::Fourth] {
            let step = CayleyStep::new(&exp_g(1.0, 0.5), &grid, 512, stencil).unwrap();
            for _ in 0..10 {
                let v: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
                let w = step.apply(&v);
                let (a, b) = (grid.norm(&v), grid.norm(&w));
                assert!((a - b).abs() <= 1e-12 * a);
            }
        }
    }

    #[test]
    fn identity_conjugation_has_zero_residual() {
        let grid = GridSpec::new(-8.0, 8.0, 200).unwrap();
        let h = hamiltonian_constant(&quadratic(0.5), &grid).unwrap();
        let t = DenseOperator::identity(&grid);
        let probes = vec![gaussian_probe(&grid, 0.0, 1.0), gaussian_probe(&grid, 1.0, 0.7)];
        assert_eq!(conjugation_residual(&h, &t, &h, &probes).unwrap(), 0.0);
    }

    #[test]
    fn probe_at_wall_escapes() {
        let grid = GridSpec::new(-8.0, 8.0, 200).unwrap();
        let h = hamiltonian_constant(&quadratic(0.5), &grid).unwrap();
        let t = DenseOperator::identity(&grid);
        let probes = vec![gaussian_probe(&grid, 7.5, 1.0)];
        assert!(matches!(
            conjugation_residual(&h, &t, &h, &probes),
            Err(Error::ProbeEscape { probe: 0, .. })
        ));
    }

    #[test]
    fn squeeze_conjugation_residual() {
        // T from g = −(ln m0 / 2) x conjugates p²/2m0 + x²/2 into p²/2 + x²/(2 m0).
        let m0: f64 = 2.0;
        let grid = GridSpec::new(-12.0, 12.0, 512).unwrap();
        let h = hamiltonian_bdd(&ScalarField::constant(m0), &quadratic(0.5), &grid).unwrap();
        let target = hamiltonian_constant(&quadratic(0.5 / m0), &grid).unwrap();
        let g = ScalarField::identity().scale(-m0.ln() / 2.0);
        let t = discrete_t(&g, &grid, &DiscreteTOptions::default()).unwrap();
        let probes: Vec<Vec<f64>> = [-1.0, -0.5, 0.0, 0.5, 1.0]
            .iter()
            .map(|&c| gaussian_probe(&grid, c, 1.0))
            .collect();
        let r = conjugation_residual(&h, &t, &target, &probes).unwrap();
        assert!(r <= 1e-3, "{r}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn constructors_are_symmetric(alpha in 0.1f64..2.0, beta in 0.2f64..2.0, n in 5usize..60) {
            let grid = GridSpec::new(-4.0, 1.0, n).unwrap();
            let op = hamiltonian_bdd(&exp_mass(alpha, beta), &quadratic(0.5), &grid).unwrap();
            let d = op.to_dense();
            prop_assert_eq!(&d, &d.t().to_owned());
            prop_assert!(op.diag.iter().chain(&op.offdiag).all(|v| v.is_finite()));
            let vr = hamiltonian_vonroos(&exp_mass(alpha, beta), &quadratic(0.5), &OrderingParams::INVERSE_MASS_OUTSIDE, &grid).unwrap();
            let d = vr.to_dense();
            prop_assert_eq!(&d, &d.t().to_owned());
        }
    }
}
