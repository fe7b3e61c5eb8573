//! Exact fiber eigenvalues and eigenvectors, band sweeps, and a
//! finite-difference oracle.

use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph_model::{CheckedCell, End, FiberParams};
use crate::m_matrix::assemble_full;
use crate::numerics::{hermitian_eigenvalues, integrate, null_vector, sinc, x_cot_x, x_over_sin, C};

mod fd_oracle;
pub use fd_oracle::fd_oracle_eigenvalues;

/// Cauchy data of one edge in the gauge f = e^{itx}v, where −a²f'' = zf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSolution {
    /// f(0) = v(0).
    pub value: C,
    /// a²f'(0).
    pub flux: C,
    /// k / a^ε.
    pub q: C,
    /// (a^ε)².
    pub a2: f64,
    /// Physical length ε·l.
    pub length: f64,
}

impl EdgeSolution {
    pub fn from_endpoints(f0: C, fl: C, q: C, a2: f64, length: f64) -> Self {
        let th = q * length;
        let flux = (fl * x_over_sin(th) - f0 * x_cot_x(th)) * (a2 / length);
        EdgeSolution { value: f0, flux, q, a2, length }
    }

    pub fn f(&self, x: f64) -> C {
        let qx = self.q * x;
        self.value * qx.cos() + self.flux / self.a2 * x * sinc(qx)
    }

    pub fn df(&self, x: f64) -> C {
        let qx = self.q * x;
        -self.value * self.q * self.q * x * sinc(qx) + self.flux / self.a2 * qx.cos()
    }

    /// Coefficients (A, B) of v = e^{−ixt}(A e^{−ikx/a} + B e^{ikx/a}).
    pub fn coefficients(&self) -> Option<(C, C)> {
        if self.q.norm() == 0.0 {
            return None;
        }
        let r = self.flux / (C::i() * self.q * self.a2);
        Some(((self.value - r) * 0.5, (self.value + r) * 0.5))
    }

    fn panels(&self) -> usize {
        ((self.q.norm() * self.length / 2.0).ceil() as usize).max(1)
    }

    pub fn norm_sq(&self) -> f64 {
        integrate(|x| C::new(self.f(x).norm_sqr(), 0.0), self.length, self.panels(), 20).re
    }

    pub fn inner(&self, other: &EdgeSolution) -> C {
        let p = self.panels().max(other.panels());
        integrate(|x| self.f(x) * other.f(x).conj(), self.length, p, 20)
    }

    fn scale(&mut self, s: C) {
        self.value *= s;
        self.flux *= s;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairKind {
    Exact,
    Effective,
}

/// Eigenvalue with interface data and edgewise solution.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenpairApprox {
    pub z: f64,
    pub epsilon: f64,
    pub t: f64,
    /// Γ0 data on all vertices, unit norm (zero if the function vanishes there).
    pub gamma0: DVector<C>,
    pub edges: Vec<EdgeSolution>,
    pub kind: PairKind,
}

impl EigenpairApprox {
    pub fn inner(&self, other: &EigenpairApprox) -> C {
        self.edges.iter().zip(&other.edges).map(|(a, b)| a.inner(b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.edges.iter().map(EdgeSolution::norm_sq).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for e in &mut self.edges {
                e.scale(C::new(1.0 / n, 0.0));
            }
        }
    }

    /// min over phases of ‖u − e^{iφ}v‖ for unit-norm u, v.
    pub fn l2_distance(&self, other: &EigenpairApprox) -> f64 {
        let ip = self.inner(other).norm() / (self.norm() * other.norm());
        (2.0 - 2.0 * ip).max(0.0).sqrt()
    }

    pub fn edge_coeffs(&self) -> Vec<Option<(C, C)>> {
        self.edges.iter().map(EdgeSolution::coefficients).collect()
    }

    /// v_e(x) in the original (twisted) variable.
    pub fn value(&self, edge: usize, x: f64) -> C {
        C::from_polar(1.0, -self.t * x) * self.edges[edge].f(x)
    }

    /// Relative residual of −a²(d/dx + it)²v = zv, with derivatives taken
    /// from the plane-wave coefficients, at `points` interior points per edge.
    pub fn ode_residual(&self, points: usize) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for e in &self.edges {
            let Some((a, b)) = e.coefficients() else { continue };
            let waves = [(a, C::i() * (-self.t - e.q)), (b, C::i() * (-self.t + e.q))];
            let it = C::new(0.0, self.t);
            for j in 1..=points {
                let x = e.length * j as f64 / (points + 1) as f64;
                let (mut v, mut d1, mut d2) = (C::default(), C::default(), C::default());
                for &(c, s) in &waves {
                    let w = c * (s * x).exp();
                    v += w;
                    d1 += s * w;
                    d2 += s * s * w;
                }
                let lhs = -(d2 + it * 2.0 * d1 + it * it * v) * e.a2;
                worst = worst.max((lhs - v * self.z).norm());
                scale = scale.max(v.norm() * self.z.abs().max(1.0));
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Largest mismatch of w_V(e)v_e(V) across ends meeting at a vertex.
    pub fn continuity_residual(&self, cell: &CheckedCell) -> f64 {
        let tau = self.epsilon * self.t;
        let mut vals: Vec<Vec<C>> = vec![Vec::new(); cell.vertex_count()];
        for (i, e) in cell.edges.iter().enumerate() {
            let s = &self.edges[i];
            vals[e.tail].push(cell.weight(i, End::Tail, tau) * self.value(i, 0.0));
            vals[e.head].push(cell.weight(i, End::Head, tau) * self.value(i, s.length));
        }
        vals.iter()
            .flat_map(|v| v.iter().map(move |x| (x - v[0]).norm()))
            .fold(0.0, f64::max)
    }

    /// Γ1 data: Σ_e w_V(e)·(outward a²(v' + itv)).
    pub fn gamma1(&self, cell: &CheckedCell) -> DVector<C> {
        let tau = self.epsilon * self.t;
        let mut g = DVector::zeros(cell.vertex_count());
        for (i, e) in cell.edges.iter().enumerate() {
            let s = &self.edges[i];
            let l = s.length;
            g[e.tail] += cell.weight(i, End::Tail, tau) * s.flux;
            g[e.head] -= cell.weight(i, End::Head, tau) * C::from_polar(1.0, -self.t * l) * s.df(l) * s.a2;
        }
        g
    }
}

/// Pole-free secular sample S(k) = det M(k)·Π_e sin(kεl_e/a^ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecularSample {
    pub k: f64,
    pub s: f64,
    /// |Im S| / (|S| + tiny).
    pub imag_ratio: f64,
}

/// Linear system for vertex values U and tail fluxes F, entire in k.
/// Its determinant times Π(k·a^ε) equals det M·Π sin.
fn cauchy_system(cell: &CheckedCell, eps: f64, tau: f64, k: C) -> DMatrix<C> {
    let m = cell.vertex_count();
    let n = cell.edge_count();
    let mut big = DMatrix::zeros(m + n, m + n);
    for (i, e) in cell.edges.iter().enumerate() {
        let a = e.coefficient(eps);
        let len = eps * e.length;
        let th = k * len / a;
        let ct = cell.weight(i, End::Tail, tau).conj();
        let wh = cell.weight(i, End::Head, tau);
        let ph = C::from_polar(1.0, tau * e.length);
        let (cos, row) = (th.cos(), m + i);
        big[(row, e.tail)] += cos * ct;
        big[(row, m + i)] += sinc(th) * (len / (a * a));
        big[(row, e.head)] -= ph * wh.conj();
        big[(e.tail, m + i)] += cell.weight(i, End::Tail, tau);
        big[(e.head, e.tail)] += wh * ph.conj() * th * th.sin() * (a * a / len) * ct;
        big[(e.head, m + i)] -= wh * ph.conj() * cos;
    }
    big
}

fn secular_value(cell: &CheckedCell, eps: f64, tau: f64, k: C) -> C {
    let det = cauchy_system(cell, eps, tau, k).determinant();
    cell.edges.iter().fold(det, |acc, e| acc * k * e.coefficient(eps))
}

pub fn secular(cell: &CheckedCell, eps: f64, t: f64, k: f64) -> SecularSample {
    let s = secular_value(cell, eps, eps * t, C::new(k, 0.0));
    SecularSample { k, s: s.re, imag_ratio: s.im.abs() / (s.norm() + 1e-300) }
}

/// Single-edge Dirichlet points k = πj·a^ε/(εl_e) in (0, k_max].
pub fn dirichlet_points(cell: &CheckedCell, eps: f64, k_max: f64) -> Vec<f64> {
    let mut pts: Vec<f64> = Vec::new();
    for e in &cell.edges {
        let step = PI * e.coefficient(eps) / (eps * e.length);
        let mut j = 1.0;
        while j * step <= k_max {
            pts.push(j * step);
            j += 1.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    pts
}

fn dirichlet_count(cell: &CheckedCell, eps: f64, z: f64) -> usize {
    if z <= 0.0 {
        return 0;
    }
    let k = z.sqrt();
    cell.edges
        .iter()
        .map(|e| {
            let x = k * eps * e.length / (PI * e.coefficient(eps));
            (x.ceil() as usize).saturating_sub(1)
        })
        .sum()
}

/// Number of fiber eigenvalues strictly below z: Dirichlet count plus the
/// number of positive eigenvalues of M(z).
pub fn eigenvalue_count(cell: &CheckedCell, eps: f64, t: f64, z: f64) -> Result<usize> {
    let mut zz = z;
    for _ in 0..4 {
        match assemble_full(cell, &FiberParams::new(eps, t, C::new(zz, 0.0))) {
            Ok(m) => {
                let pos = hermitian_eigenvalues(&m.matrix).iter().filter(|&&l| l > 0.0).count();
                return Ok(dirichlet_count(cell, eps, zz) + pos);
            }
            Err(Error::DirichletPole { .. }) => {
                zz += 1e-9 * zz.abs().max(1.0);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::RefineGrid(format!("cannot step off Dirichlet point near z = {z}")))
}

struct Locator<'a> {
    cell: &'a CheckedCell,
    eps: f64,
    t: f64,
    roots: Vec<f64>,
    n_max: usize,
}

impl Locator<'_> {
    fn count_k(&self, k: f64) -> Result<usize> {
        eigenvalue_count(self.cell, self.eps, self.t, k * k)
    }

    fn s(&self, k: f64) -> f64 {
        secular_value(self.cell, self.eps, self.eps * self.t, C::new(k, 0.0)).re
    }

    /// Interval (ka, kb] in k; ka = 0 stands for z slightly below 0.
    fn locate(&mut self, ka: f64, kb: f64, ca: usize, cb: usize) -> Result<()> {
        if self.roots.len() >= self.n_max || cb <= ca {
            return Ok(());
        }
        if cb - ca == 1 {
            let k = self.refine_simple(ka, kb, ca)?;
            self.roots.push(k);
            return Ok(());
        }
        if kb - ka <= 1e-12 * kb.max(1.0) {
            let k = 0.5 * (ka + kb);
            for _ in ca..cb {
                self.roots.push(k);
            }
            return Ok(());
        }
        let km = 0.5 * (ka + kb);
        let cm = self.count_k(km)?;
        if cm < ca || cm > cb {
            return Err(Error::RefineGrid(format!("non-monotone count near k = {km}")));
        }
        self.locate(ka, km, ca, cm)?;
        self.locate(km, kb, cm, cb)
    }

    fn refine_simple(&self, mut ka: f64, mut kb: f64, ca: usize) -> Result<f64> {
        if ka > 0.0 {
            let (sa, sb) = (self.s(ka), self.s(kb));
            if sa * sb < 0.0 {
                return Ok(crate::numerics::bisect_secant(|k| self.s(k), ka, kb, 1e-10));
            }
        }
        while kb - ka > 1e-13 * kb.max(1e-6) {
            let km = 0.5 * (ka + kb);
            if self.count_k(km)? > ca {
                kb = km;
            } else {
                ka = km;
            }
        }
        Ok(0.5 * (ka + kb))
    }
}

fn grid_step(cell: &CheckedCell, eps: f64) -> f64 {
    let m = cell
        .edges
        .iter()
        .map(|e| e.coefficient(eps) / (eps * e.length))
        .fold(f64::INFINITY, f64::min);
    PI / 8.0 * m
}

/// Fiber eigenvalues in (−δ, z_max], at most n_max of them, ascending.
pub fn fiber_eigenvalues(cell: &CheckedCell, eps: f64, t: f64, z_max: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside (0, 1)")));
    }
    if eigenvalue_count(cell, eps, t, -1.0)? != 0 {
        warn!("eigenvalue count below z = -1 is nonzero at t = {t}");
    }
    let c0 = eigenvalue_count(cell, eps, t, -1e-9)?;
    if c0 != 0 {
        warn!("negative eigenvalue detected at t = {t}");
    }
    let dk = grid_step(cell, eps);
    let k_max = z_max.max(0.0).sqrt();
    let steps = ((k_max / dk).ceil() as usize).max(1);
    let mut loc = Locator { cell, eps, t, roots: Vec::new(), n_max };
    let mut prev = (0.0, c0);
    for i in 1..=steps {
        let k = (i as f64 * dk).min(k_max);
        let c = loc.count_k(k)?;
        if c < prev.1 {
            return Err(Error::RefineGrid(format!("eigenvalue count decreased at k = {k}")));
        }
        loc.locate(prev.0, k, prev.1, c)?;
        if loc.roots.len() >= n_max {
            break;
        }
        prev = (k, c);
    }
    let mut z: Vec<f64> = loc.roots.iter().map(|k| if k * k < 1e-11 { 0.0 } else { k * k }).collect();
    z.sort_by(f64::total_cmp);
    z.truncate(n_max);
    Ok(z)
}

/// Eigenfunction at an eigenvalue z, from the null vector of the Cauchy
/// system; L²-normalised.
pub fn fiber_eigenvector(cell: &CheckedCell, eps: f64, t: f64, z: f64) -> Result<EigenpairApprox> {
    let tau = eps * t;
    let k = C::new(z.max(0.0).sqrt(), 0.0);
    let mut big = cauchy_system(cell, eps, tau, k);
    for mut row in big.row_iter_mut() {
        let s = row.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if s > 0.0 {
            row /= C::new(s, 0.0);
        }
    }
    let (x, rel) = null_vector(&big);
    if rel > 1e-6 {
        return Err(Error::NotAnEigenvalue { z, sigma: rel });
    }
    let m = cell.vertex_count();
    let u = x.rows(0, m).into_owned();
    let edges = cell
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let a = e.coefficient(eps);
            EdgeSolution {
                value: cell.weight(i, End::Tail, tau).conj() * u[e.tail],
                flux: x[m + i],
                q: k / a,
                a2: a * a,
                length: eps * e.length,
            }
        })
        .collect();
    let un = u.norm();
    let mut gamma0 = if un > 1e-12 { u / C::new(un, 0.0) } else { DVector::zeros(m) };
    crate::numerics::fix_phase(&mut gamma0);
    let mut pair = EigenpairApprox { z, epsilon: eps, t, gamma0, edges, kind: PairKind::Exact };
    pair.normalize();
    Ok(pair)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandData {
    pub epsilon: f64,
    pub tau_grid: Vec<f64>,
    /// bands[n][i] is the n-th eigenvalue at tau_grid[i].
    pub bands: Vec<Vec<f64>>,
}

/// Smallest power-of-two multiple of 64 holding at least n eigenvalues.
pub fn z_bound_for(cell: &CheckedCell, eps: f64, t: f64, n: usize) -> Result<f64> {
    let mut z_max = 64.0;
    while eigenvalue_count(cell, eps, t, z_max)? < n {
        z_max *= 2.0;
        if z_max > 1e12 {
            return Err(Error::RefineGrid(format!("fewer than {n} eigenvalues below 1e12")));
        }
    }
    Ok(z_max)
}

pub fn band_sweep(cell: &CheckedCell, eps: f64, tau_grid: &[f64], n_bands: usize) -> Result<BandData> {
    let per_tau: Vec<Vec<f64>> = tau_grid
        .par_iter()
        .map(|&tau| {
            let t = tau / eps;
            let z_max = z_bound_for(cell, eps, t, n_bands)?;
            fiber_eigenvalues(cell, eps, t, z_max, n_bands)
        })
        .collect::<Result<_>>()?;
    let bands = (0..n_bands).map(|n| per_tau.iter().map(|v| v[n]).collect()).collect();
    Ok(BandData { epsilon: eps, tau_grid: tau_grid.to_vec(), bands })
}

/// `n` points from −π to π inclusive.
pub fn tau_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -PI + 2.0 * PI * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::{example_cell, validate_cell, CellGraph, EdgeKind};
    use crate::m_matrix::assemble_full;
    use proptest::prelude::*;

    fn ex1() -> CheckedCell {
        example_cell(0.4, 0.2, 0.4, 1.0, 1.0).unwrap()
    }

    #[test]
    fn secular_equals_pole_multiplied_determinant() {
        let cell = example_cell(0.3, 0.2, 0.5, 1.0, 2.0).unwrap();
        let (eps, t) = (0.1, 3.0);
        for &k in &[0.7, 3.1, 9.4, 15.2] {
            let m = assemble_full(&cell, &FiberParams::new(eps, t, C::new(k * k, 0.0))).unwrap();
            let prod: f64 = cell.edges.iter().map(|e| (k * eps * e.length / e.coefficient(eps)).sin()).product();
            let direct = m.matrix.determinant() * prod;
            let s = secular(&cell, eps, t, k);
            assert!((direct.re - s.s).abs() <= 1e-9 * direct.norm(), "{k}: {direct} vs {}", s.s);
            assert!(s.imag_ratio < 1e-10);
        }
    }

    #[test]
    fn secular_bounded_at_dirichlet_points() {
        let cell = ex1();
        for k in dirichlet_points(&cell, 0.1, 40.0) {
            let s = secular(&cell, 0.1, 0.0, k);
            assert!(s.s.is_finite() && s.s.abs() < 1e6);
        }
    }

    #[test]
    fn zero_is_an_eigenvalue_at_zero_quasimomentum() {
        let z = fiber_eigenvalues(&ex1(), 0.1, 0.0, 400.0, 6).unwrap();
        assert_eq!(z[0], 0.0);
        let v = fiber_eigenvector(&ex1(), 0.1, 0.0, 0.0).unwrap();
        let r = v.gamma0[1] / v.gamma0[0];
        assert!((r - C::new(1.0, 0.0)).norm() < 1e-8);
        let c = v.value(0, 0.01);
        assert!((v.value(1, 0.013) - c).norm() < 1e-8);
    }

    #[test]
    fn secular_changes_sign_across_simple_roots() {
        let cell = ex1();
        let (eps, t) = (0.1, 4.0);
        let z = fiber_eigenvalues(&cell, eps, t, 600.0, 6).unwrap();
        for &zz in &z {
            let k = zz.sqrt();
            let (a, b) = (secular(&cell, eps, t, k * (1.0 - 1e-6)), secular(&cell, eps, t, k * (1.0 + 1e-6)));
            assert!(a.s * b.s < 0.0, "no sign change at {zz}");
        }
    }

    #[test]
    fn eigenvalues_even_in_quasimomentum() {
        let cell = ex1();
        for &t in &[1.3, 7.7, 22.0] {
            let a = fiber_eigenvalues(&cell, 0.1, t, 800.0, 8).unwrap();
            let b = fiber_eigenvalues(&cell, 0.1, -t, 800.0, 8).unwrap();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-9 * x.max(1.0));
            }
        }
    }

    #[test]
    fn eigenvectors_have_small_residuals() {
        let cell = example_cell(0.3, 0.2, 0.5, 1.0, 2.0).unwrap();
        let (eps, t) = (0.1, 5.0);
        for z in fiber_eigenvalues(&cell, eps, t, 900.0, 5).unwrap() {
            let v = fiber_eigenvector(&cell, eps, t, z).unwrap();
            let m = assemble_full(&cell, &FiberParams::new(eps, t, C::new(z, 0.0))).unwrap();
            let res = (&m.matrix * &v.gamma0).norm() / (1.0 + m.matrix.norm());
            assert!(res < 1e-8, "M gamma0 residual {res} at z = {z}");
            assert!(v.ode_residual(100) < 1e-7);
            assert!(v.continuity_residual(&cell) < 1e-8);
            let g1 = v.gamma1(&cell);
            assert!(g1.norm() < 1e-6 * (1.0 + v.edges.iter().map(|e| e.flux.norm()).fold(0.0, f64::max)));
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_eigenvalue() {
        let err = fiber_eigenvector(&ex1(), 0.1, 4.0, 37.0).unwrap_err();
        assert!(matches!(err, Error::NotAnEigenvalue { .. }));
    }

    #[test]
    fn count_matches_located_roots() {
        let cell = ex1();
        let z = fiber_eigenvalues(&cell, 0.05, 9.0, 3000.0, 100).unwrap();
        assert_eq!(z.len(), eigenvalue_count(&cell, 0.05, 9.0, 3000.0).unwrap());
    }

    #[test]
    fn degenerate_band_touching_reported_twice() {
        // two identical disjoint soft loops attached to a stiff edge give
        // eigenvalues of multiplicity two
        let mut g = CellGraph::new(["A", "B"]);
        g.add_edge("k", "A", "B", 0.5, EdgeKind::Stiff { a: 1.0 }).unwrap();
        g.add_edge("s1", "A", "A", 0.25, EdgeKind::Soft).unwrap();
        g.add_edge("s2", "A", "A", 0.25, EdgeKind::Soft).unwrap();
        g.add_edge("s3", "B", "A", 0.25, EdgeKind::Soft).unwrap();
        let cell = validate_cell(g).unwrap();
        let z = fiber_eigenvalues(&cell, 0.1, 0.0, 2000.0, 30).unwrap();
        let n = eigenvalue_count(&cell, 0.1, 0.0, 2000.0).unwrap();
        assert_eq!(z.len(), n.min(30));
        let doubles = z.windows(2).filter(|w| (w[1] - w[0]).abs() < 1e-8 * w[0].max(1.0)).count();
        assert!(doubles >= 1, "{z:?}");
    }

    #[test]
    fn lowest_band_is_acoustic() {
        let cell = ex1();
        let z = fiber_eigenvalues(&cell, 0.01, 1.0, 50.0, 1).unwrap();
        assert!((z[0] / 1.25 - 1.0).abs() < 0.05, "{}", z[0]);
    }

    #[test]
    fn band_sweep_orders_and_starts_at_zero() {
        let grid = tau_grid(11);
        let b = band_sweep(&ex1(), 0.05, &grid, 4).unwrap();
        assert_eq!(b.bands.len(), 4);
        assert_eq!(b.bands[0][5], 0.0);
        for i in 0..grid.len() {
            for n in 1..4 {
                assert!(b.bands[n][i] >= b.bands[n - 1][i]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn eigenvalues_are_roots_of_the_secular_function(t in -30.0f64..30.0) {
            let cell = example_cell(0.3, 0.2, 0.5, 1.0, 2.0).unwrap();
            let z = fiber_eigenvalues(&cell, 0.1, t, 500.0, 4).unwrap();
            for zz in z.into_iter().filter(|&z| z > 1e-6) {
                let k = zz.sqrt();
                let h = 1e-7 * k;
                let (a, b) = (secular(&cell, 0.1, t, k - h).s, secular(&cell, 0.1, t, k + h).s);
                prop_assert!(a * b <= 0.0);
            }
        }
    }
}
