//! Verification harness: Green identity, M-function checks and
//! ε-convergence studies.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective_model::{
    effective_eigenfunction, effective_fiber_roots, limit_spectrum, projected_roots, EffectiveParams, ThetaMode,
};
use crate::error::{Error, Result};
use crate::graph_model::{CheckedCell, End, FiberParams};
use crate::m_matrix::assemble_full;
use crate::numerics::{gauss_legendre, hermitian_eigenvalues, loglog_fit, SlopeFit, C};
use crate::spectral_solver::{
    band_sweep, eigenvalue_count, fiber_eigenvalues, fiber_eigenvector, tau_grid, EigenpairApprox,
};

/// Complex polynomial in x, ascending powers.
#[derive(Debug, Clone)]
struct Poly(Vec<C>);

impl Poly {
    fn eval(&self, x: f64) -> C {
        self.0.iter().rev().fold(C::default(), |acc, c| acc * x + c)
    }

    fn deriv(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(n, c)| c * n as f64).collect())
    }
}

/// Trial function in dom(A_max): cubic on each edge, weighted-continuous.
struct Trial {
    polys: Vec<Poly>,
    gamma0: DVector<C>,
}

fn random_c(rng: &mut ChaCha8Rng) -> C {
    C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_trial(cell: &CheckedCell, eps: f64, tau: f64, rng: &mut ChaCha8Rng) -> Trial {
    let gamma0 = DVector::from_fn(cell.vertex_count(), |_, _| random_c(rng));
    let polys = cell
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let l = eps * e.length;
            let v0 = cell.weight(i, End::Tail, tau).conj() * gamma0[e.tail];
            let vl = cell.weight(i, End::Head, tau).conj() * gamma0[e.head];
            let (c0, c1) = (random_c(rng), random_c(rng));
            // v0(1 − s) + vl s + s(1 − s)(c0 + c1 s), s = x/l
            let a0 = v0;
            let a1 = (vl - v0 + c0) / l;
            let a2 = (c1 - c0) / (l * l);
            let a3 = -c1 / (l * l * l);
            Poly(vec![a0, a1, a2, a3])
        })
        .collect();
    Trial { polys, gamma0 }
}

struct Operator<'a> {
    cell: &'a CheckedCell,
    eps: f64,
    t: f64,
}

impl Operator<'_> {
    fn a2(&self, e: usize) -> f64 {
        self.cell.edges[e].coefficient(self.eps).powi(2)
    }

    fn len(&self, e: usize) -> f64 {
        self.eps * self.cell.edges[e].length
    }

    /// −a²(v'' + 2itv' − t²v).
    fn apply(&self, e: usize, p: &Poly) -> Poly {
        let d1 = p.deriv();
        let d2 = d1.deriv();
        let it = C::new(0.0, self.t);
        let n = p.0.len();
        Poly(
            (0..n)
                .map(|i| {
                    let v2 = d2.0.get(i).copied().unwrap_or_default();
                    let v1 = d1.0.get(i).copied().unwrap_or_default();
                    -(v2 + it * 2.0 * v1 + it * it * p.0[i]) * self.a2(e)
                })
                .collect(),
        )
    }

    fn gamma1(&self, polys: &[Poly]) -> DVector<C> {
        let tau = self.eps * self.t;
        let it = C::new(0.0, self.t);
        let mut g = DVector::zeros(self.cell.vertex_count());
        for (i, e) in self.cell.edges.iter().enumerate() {
            let p = &polys[i];
            let d = p.deriv();
            let l = self.len(i);
            g[e.tail] += self.cell.weight(i, End::Tail, tau) * (d.eval(0.0) + it * p.eval(0.0)) * self.a2(i);
            g[e.head] -= self.cell.weight(i, End::Head, tau) * (d.eval(l) + it * p.eval(l)) * self.a2(i);
        }
        g
    }

    fn inner(&self, u: &[Poly], v: &[Poly]) -> C {
        let (x, w) = gauss_legendre(64);
        let mut acc = C::default();
        for i in 0..u.len() {
            let l = self.len(i);
            for (xi, wi) in x.iter().zip(&w) {
                let s = 0.5 * l * (xi + 1.0);
                acc += u[i].eval(s) * v[i].eval(s).conj() * (0.5 * l * wi);
            }
        }
        acc
    }
}

fn dot(a: &DVector<C>, b: &DVector<C>) -> C {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Largest |⟨Au, v⟩ − ⟨u, Av⟩ − ⟨Γ1u, Γ0v⟩ + ⟨Γ0u, Γ1v⟩| over `trials`
/// random pairs of weighted-continuous cubic trial functions.
pub fn greens_residual(cell: &CheckedCell, eps: f64, t: f64, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let op = Operator { cell, eps, t };
    let tau = eps * t;
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u = random_trial(cell, eps, tau, &mut rng);
        let v = random_trial(cell, eps, tau, &mut rng);
        let au: Vec<Poly> = u.polys.iter().enumerate().map(|(i, p)| op.apply(i, p)).collect();
        let av: Vec<Poly> = v.polys.iter().enumerate().map(|(i, p)| op.apply(i, p)).collect();
        let lhs = op.inner(&au, &v.polys) - op.inner(&u.polys, &av);
        let rhs = dot(&op.gamma1(&u.polys), &v.gamma0) - dot(&u.gamma0, &op.gamma1(&v.polys));
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

/// Same residual for two computed eigenfunctions (both sides vanish).
pub fn pair_symmetry_residual(cell: &CheckedCell, u: &EigenpairApprox, v: &EigenpairApprox) -> f64 {
    let tau = u.epsilon * u.t;
    let g0 = |p: &EigenpairApprox| {
        let mut g = DVector::zeros(cell.vertex_count());
        for (i, e) in cell.edges.iter().enumerate() {
            g[e.tail] = cell.weight(i, End::Tail, tau) * p.value(i, 0.0);
        }
        for (i, e) in cell.edges.iter().enumerate() {
            g[e.head] = cell.weight(i, End::Head, tau) * p.value(i, p.edges[i].length);
        }
        g
    };
    let lhs = u.inner(v) * C::new(u.z - v.z, 0.0);
    let rhs = dot(&u.gamma1(cell), &g0(v)) - dot(&g0(u), &v.gamma1(cell));
    (lhs - rhs).norm()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylReport {
    /// max ‖M g − Γ1 u_g‖ / (1 + ‖M‖), u_g solving the edge problems with Γ0 u_g = g.
    pub defining_residual: f64,
    /// Smallest eigenvalue of Im M(z) over samples with Im z > 0.
    pub min_imaginary_eigenvalue: f64,
    /// max ‖M(z̄) − M(z)*‖.
    pub conjugate_symmetry: f64,
    /// ‖M(−1) − M(−1)*‖.
    pub hermitian_below_spectrum: f64,
    pub samples: usize,
}

/// Γ1 of the edgewise solution with Γ0 data g, from plane waves
/// v = e^{−itx}(A e^{−ikx/a} + B e^{ikx/a}).
fn plane_wave_gamma1(cell: &CheckedCell, eps: f64, t: f64, z: C, g: &DVector<C>) -> Result<DVector<C>> {
    let tau = eps * t;
    let k = crate::numerics::csqrt(z);
    let mut out = DVector::zeros(cell.vertex_count());
    for (i, e) in cell.edges.iter().enumerate() {
        let a = e.coefficient(eps);
        let l = eps * e.length;
        let q = k / a;
        let v0 = cell.weight(i, End::Tail, tau).conj() * g[e.tail];
        let vl = cell.weight(i, End::Head, tau).conj() * g[e.head];
        let ph = C::from_polar(1.0, -t * l);
        let (em, ep) = ((-C::i() * q * l).exp(), (C::i() * q * l).exp());
        let m = Matrix2::new(C::new(1.0, 0.0), C::new(1.0, 0.0), ph * em, ph * ep);
        let ab = m
            .lu()
            .solve(&Vector2::new(v0, vl))
            .ok_or_else(|| Error::DirichletPole { edge: e.id.clone(), arg: k.re })?;
        let twisted = |x: f64| -> C {
            C::from_polar(1.0, -t * x)
                * (ab[0] * (-C::i() * q) * (-C::i() * q * x).exp() + ab[1] * (C::i() * q) * (C::i() * q * x).exp())
        };
        out[e.tail] += cell.weight(i, End::Tail, tau) * twisted(0.0) * (a * a);
        out[e.head] -= cell.weight(i, End::Head, tau) * twisted(l) * (a * a);
    }
    Ok(out)
}

pub fn weyl_checks(cell: &CheckedCell, eps: f64, t: f64, z_samples: &[C], seed: u64) -> Result<WeylReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = WeylReport {
        defining_residual: 0.0,
        min_imaginary_eigenvalue: f64::INFINITY,
        conjugate_symmetry: 0.0,
        hermitian_below_spectrum: 0.0,
        samples: z_samples.len(),
    };
    for &z in z_samples {
        let m = assemble_full(cell, &FiberParams::new(eps, t, z))?.matrix;
        let g = DVector::from_fn(cell.vertex_count(), |_, _| random_c(&mut rng));
        let direct = plane_wave_gamma1(cell, eps, t, z, &g)?;
        let res = (&m * &g - direct).norm() / ((1.0 + m.norm()) * g.norm());
        rep.defining_residual = rep.defining_residual.max(res);
        if z.im > 0.0 {
            let im = (&m - m.adjoint()) * C::new(0.0, -0.5);
            rep.min_imaginary_eigenvalue = rep.min_imaginary_eigenvalue.min(hermitian_eigenvalues(&im)[0]);
        }
        let mc = assemble_full(cell, &FiberParams::new(eps, t, z.conj()))?.matrix;
        rep.conjugate_symmetry = rep.conjugate_symmetry.max((mc - m.adjoint()).norm());
    }
    let below = assemble_full(cell, &FiberParams::new(eps, t, C::new(-1.0, 0.0)))?.matrix;
    rep.hermitian_below_spectrum = (&below - below.adjoint()).norm();
    Ok(rep)
}

/// Which effective description supplies z_eff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectiveModel {
    /// ψ-projection of the rescaled M-matrix (any cell).
    Projected,
    /// Closed dispersion function of the two-vertex example.
    Closed,
    /// Closed form with Re θ replaced by 1.
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub epsilon: f64,
    pub tau: f64,
    /// 1-based.
    pub band: usize,
    pub z_exact: f64,
    pub z_eff: f64,
    pub abs_err: f64,
    /// |1/z_exact − 1/z_eff|.
    pub resolvent_err: f64,
    pub l2_distance: f64,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub tau: f64,
    pub band: usize,
    pub eigenvalue: Option<SlopeFit>,
    pub eigenfunction: Option<SlopeFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub model: EffectiveModel,
    pub epsilons: Vec<f64>,
    pub taus: Vec<f64>,
    pub points: Vec<ConvergencePoint>,
    pub fits: Vec<ConvergenceFit>,
}

fn effective_list(cell: &CheckedCell, model: EffectiveModel, tau: f64, eps: f64, n: usize) -> Result<Vec<f64>> {
    let mut z_max = 400.0;
    loop {
        let roots = match model {
            EffectiveModel::Projected => projected_roots(cell, tau, eps, z_max)?,
            EffectiveModel::Closed | EffectiveModel::Limit => {
                let mode = if model == EffectiveModel::Closed { ThetaMode::Fiber } else { ThetaMode::Limit };
                effective_fiber_roots(&EffectiveParams::from_cell(cell)?, tau, eps, z_max, mode)?
            }
        };
        if roots.len() > n || z_max > 1e7 {
            return Ok(roots);
        }
        z_max *= 4.0;
    }
}

fn study_point(cell: &CheckedCell, model: EffectiveModel, eps: f64, tau: f64, bands: usize) -> Result<Vec<ConvergencePoint>> {
    let eff = effective_list(cell, model, tau, eps, bands)?;
    let z_top = eff.get(bands).copied().unwrap_or_else(|| eff.last().copied().unwrap_or(100.0) * 2.0);
    let t = tau / eps;
    let exact = fiber_eigenvalues(cell, eps, t, z_top * 1.5 + 10.0, bands + 4)?;
    let mut out = Vec::new();
    for b in 1..=bands.min(eff.len()) {
        let ze = eff[b - 1];
        let spacing = |i: usize| -> f64 {
            let lo = if i > 0 { ze - eff[i - 1] } else { f64::INFINITY };
            let hi = eff.get(i + 1).map_or(f64::INFINITY, |z| z - ze);
            lo.min(hi)
        };
        let (zx, err) = exact
            .iter()
            .map(|&z| (z, (z - ze).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((f64::NAN, f64::INFINITY));
        let matched = err <= 0.5 * spacing(b - 1);
        // an effective root on a soft Dirichlet point has no eigenfunction
        // of this form; leave the distance undefined there
        let l2 = if matched {
            let ex = fiber_eigenvector(cell, eps, t, zx)?;
            effective_eigenfunction(cell, tau, eps, ze).map_or(f64::NAN, |ef| ex.l2_distance(&ef))
        } else {
            f64::NAN
        };
        out.push(ConvergencePoint { epsilon: eps, tau, band: b, z_exact: zx, z_eff: ze, abs_err: err, resolvent_err: (1.0 / zx - 1.0 / ze).abs(), l2_distance: l2, matched });
    }
    Ok(out)
}

/// Exact versus effective eigenvalues and eigenfunctions over an ε ladder.
pub fn convergence_study(
    cell: &CheckedCell,
    eps_list: &[f64],
    tau_list: &[f64],
    bands: usize,
    model: EffectiveModel,
) -> Result<ConvergenceReport> {
    let jobs: Vec<(f64, f64)> = tau_list.iter().flat_map(|&t| eps_list.iter().map(move |&e| (e, t))).collect();
    let points: Vec<ConvergencePoint> = jobs
        .par_iter()
        .map(|&(e, t)| study_point(cell, model, e, t, bands))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut fits = Vec::new();
    for &tau in tau_list {
        for b in 1..=bands {
            let sel: Vec<&ConvergencePoint> = points.iter().filter(|p| p.tau == tau && p.band == b && p.matched).collect();
            let eps: Vec<f64> = sel.iter().map(|p| p.epsilon).collect();
            let ev: Vec<f64> = sel.iter().map(|p| p.abs_err).collect();
            let ef: Vec<f64> = sel.iter().map(|p| p.l2_distance).collect();
            fits.push(ConvergenceFit { tau, band: b, eigenvalue: loglog_fit(&eps, &ev), eigenfunction: loglog_fit(&eps, &ef) });
        }
    }
    Ok(ConvergenceReport { model, epsilons: eps_list.to_vec(), taus: tau_list.to_vec(), points, fits })
}

/// Union of closed intervals, merged and sorted.
pub fn merge_intervals(mut v: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    v.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut out: Vec<[f64; 2]> = Vec::new();
    for iv in v {
        match out.last_mut() {
            Some(last) if iv[0] <= last[1] => last[1] = last[1].max(iv[1]),
            _ => out.push(iv),
        }
    }
    out
}

fn dist_to(set: &[[f64; 2]], x: f64) -> f64 {
    set.iter()
        .map(|iv| if x < iv[0] { iv[0] - x } else if x > iv[1] { x - iv[1] } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
}

fn one_sided(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    // sup over a of the distance to b is attained at an endpoint of a or at
    // a gap midpoint of b lying inside a
    let mut cands: Vec<f64> = a.iter().flat_map(|iv| [iv[0], iv[1]]).collect();
    for w in b.windows(2) {
        let m = 0.5 * (w[0][1] + w[1][0]);
        if dist_to(a, m) == 0.0 {
            cands.push(m);
        }
    }
    cands.into_iter().map(|x| dist_to(b, x)).fold(0.0, f64::max)
}

pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    one_sided(a, b).max(one_sided(b, a))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapPoint {
    pub epsilon: f64,
    pub spectrum: Vec<[f64; 2]>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub z_max: f64,
    pub limit_bands: Vec<[f64; 2]>,
    pub points: Vec<GapPoint>,
    pub fit: Option<SlopeFit>,
}

/// [0, z_max] ∩ spec(A^ε) from a band sweep over `n_tau` quasimomenta.
pub fn spectrum_intervals(cell: &CheckedCell, eps: f64, z_max: f64, n_tau: usize) -> Result<Vec<[f64; 2]>> {
    let grid = tau_grid(n_tau);
    let mut n = 1;
    for &tau in &grid {
        n = n.max(eigenvalue_count(cell, eps, tau / eps, z_max)? + 1);
    }
    let bd = band_sweep(cell, eps, &grid, n)?;
    let iv = bd
        .bands
        .iter()
        .map(|b| {
            let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            [lo, hi]
        })
        .filter(|iv| iv[0] <= z_max)
        .map(|iv| [if iv[0] < 1e-9 { 0.0 } else { iv[0] }, iv[1].min(z_max)])
        .collect();
    Ok(merge_intervals(iv))
}

/// Hausdorff distance between [0, z_max] ∩ spec(A^ε) and the limit bands.
pub fn gap_convergence(cell: &CheckedCell, eps_list: &[f64], z_max: f64, n_tau: usize) -> Result<GapReport> {
    let params = EffectiveParams::from_cell(cell)?;
    let limit = limit_spectrum(&params, z_max)?.bands;
    let points = eps_list
        .iter()
        .map(|&eps| {
            let spectrum = spectrum_intervals(cell, eps, z_max, n_tau)?;
            let distance = hausdorff(&spectrum, &limit);
            Ok(GapPoint { epsilon: eps, spectrum, distance })
        })
        .collect::<Result<Vec<_>>>()?;
    let e: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let d: Vec<f64> = points.iter().map(|p| p.distance).collect();
    Ok(GapReport { z_max, limit_bands: limit, fit: loglog_fit(&e, &d), points })
}

/// Default witness set for uniformity in τ.
pub fn default_taus() -> Vec<f64> {
    vec![0.1, PI / 3.0, PI - 0.1]
}

/// Samples in the upper half plane with Im z > 0.1, reproducible.
pub fn upper_half_plane_samples(n: usize, seed: u64) -> Vec<C> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C::new(rng.gen_range(-50.0..400.0), rng.gen_range(0.1..50.0))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::{example_cell, validate_cell, CellGraph, EdgeKind};

    fn ex1() -> CheckedCell {
        example_cell(0.4, 0.2, 0.4, 1.0, 1.0).unwrap()
    }

    #[test]
    fn green_identity_on_random_cubics() {
        assert!(greens_residual(&ex1(), 0.1, 2.0, 100, 7) <= 1e-8);
        let mut g = CellGraph::new(["A", "B", "C"]);
        g.add_edge("s", "A", "B", 0.3, EdgeKind::Soft).unwrap();
        g.add_edge("k1", "B", "C", 0.4, EdgeKind::Stiff { a: 1.5 }).unwrap();
        g.add_edge("k2", "C", "A", 0.3, EdgeKind::Stiff { a: 0.7 }).unwrap();
        g.add_edge("k3", "C", "C", 0.2, EdgeKind::Stiff { a: 1.0 }).unwrap();
        let cell = validate_cell(g).unwrap();
        assert!(greens_residual(&cell, 0.2, -3.0, 50, 11) <= 1e-8);
    }

    #[test]
    fn green_identity_antisymmetric_for_equal_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cell = ex1();
        let op = Operator { cell: &cell, eps: 0.1, t: 2.0 };
        let u = random_trial(&cell, 0.1, 0.2, &mut rng);
        let au: Vec<Poly> = u.polys.iter().enumerate().map(|(i, p)| op.apply(i, p)).collect();
        let lhs = op.inner(&au, &u.polys) - op.inner(&u.polys, &au);
        let rhs = dot(&op.gamma1(&u.polys), &u.gamma0) - dot(&u.gamma0, &op.gamma1(&u.polys));
        // both sides are purely imaginary and equal
        assert!(lhs.re.abs() < 1e-12 && rhs.re.abs() < 1e-12);
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn trial_functions_are_weighted_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = ex1();
        let (eps, tau) = (0.1, 0.7);
        let u = random_trial(&cell, eps, tau, &mut rng);
        for (i, e) in cell.edges.iter().enumerate() {
            let l = eps * e.length;
            assert!((cell.weight(i, End::Tail, tau) * u.polys[i].eval(0.0) - u.gamma0[e.tail]).norm() < 1e-12);
            assert!((cell.weight(i, End::Head, tau) * u.polys[i].eval(l) - u.gamma0[e.head]).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenpairs_satisfy_green_symmetry() {
        let cell = ex1();
        let z = fiber_eigenvalues(&cell, 0.1, 3.0, 900.0, 3).unwrap();
        let v: Vec<EigenpairApprox> = z.iter().map(|&z| fiber_eigenvector(&cell, 0.1, 3.0, z).unwrap()).collect();
        for a in &v {
            for b in &v {
                assert!(pair_symmetry_residual(&cell, a, b) <= 1e-7);
            }
        }
    }

    #[test]
    fn weyl_function_properties() {
        let mut zs = upper_half_plane_samples(50, 5);
        zs.push(C::new(0.0, 1.0));
        zs.push(C::new(30.0, -2.0));
        let rep = weyl_checks(&ex1(), 0.1, 2.0, &zs, 9).unwrap();
        assert!(rep.defining_residual <= 1e-9, "{rep:?}");
        assert!(rep.min_imaginary_eigenvalue >= -1e-10);
        assert!(rep.conjugate_symmetry <= 1e-12 * 1e3);
        assert!(rep.hermitian_below_spectrum <= 1e-12);
    }

    #[test]
    fn hausdorff_distance_of_intervals() {
        let a = [[0.0, 1.0], [2.0, 3.0]];
        let b = [[0.0, 3.0]];
        assert!((hausdorff(&a, &b) - 0.5).abs() < 1e-15);
        assert_eq!(hausdorff(&a, &a), 0.0);
        let c = [[0.0, 1.2], [2.1, 3.0]];
        assert!((hausdorff(&a, &c) - 0.2).abs() < 1e-12);
        assert_eq!(merge_intervals(vec![[2.0, 3.0], [0.0, 1.0], [0.5, 2.5]]), vec![[0.0, 3.0]]);
    }

    #[test]
    fn small_convergence_ladder() {
        let rep = convergence_study(&ex1(), &[0.1, 0.05, 0.025], &[PI / 3.0], 1, EffectiveModel::Projected).unwrap();
        assert!(rep.points.iter().all(|p| p.matched));
        let fit = rep.fits[0].eigenvalue.unwrap();
        assert!(fit.slope >= 1.8, "{rep:?}");
    }
}
