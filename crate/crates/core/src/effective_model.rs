//! Homogenised objects: the interface Steklov branch, the effective fiber
//! problem, the dispersion kernel, the out-of-space extension and the
//! limit spectrum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::{CheckedCell, End};
use crate::m_matrix::{assemble_soft, soft_component, stiff_coefficients, stiff_factor, taylor_stiff, POLE_TOL};
use crate::numerics::{bisect_secant, fix_phase, hermitian_eigen, null_vector, pole_distance, sinc, C};
use crate::spectral_solver::{EdgeSolution, EigenpairApprox, PairKind};

/// Lowest branch of B0(τ) and its spectral projection.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceEigen {
    pub tau: f64,
    pub mu: f64,
    /// Smallest of the remaining eigenvalues (∞ for a single coordinate).
    pub mu_perp: f64,
    pub psi: DVector<C>,
    pub vertices: Vec<usize>,
    /// μ_⊥ − μ < 1e-10.
    pub degenerate: bool,
}

impl InterfaceEigen {
    pub fn projector(&self) -> DMatrix<C> {
        &self.psi * self.psi.adjoint()
    }

    pub fn perp_projector(&self) -> DMatrix<C> {
        DMatrix::identity(self.psi.len(), self.psi.len()) - self.projector()
    }
}

pub fn interface_diagonalise(b0: &DMatrix<C>, tau: f64, vertices: Vec<usize>) -> InterfaceEigen {
    let pairs = hermitian_eigen(b0);
    let (mu, mut psi) = pairs[0].clone();
    fix_phase(&mut psi);
    let mu_perp = pairs.get(1).map_or(f64::INFINITY, |p| p.0);
    InterfaceEigen { tau, mu, mu_perp, psi, vertices, degenerate: mu_perp - mu < 1e-10 }
}

/// Smallest Steklov value of the stiff part; from singular values of the
/// edge factor when available.
pub fn lowest_steklov(cell: &CheckedCell, tau: f64) -> Result<f64> {
    match stiff_factor(cell, tau) {
        Some(g) if g.nrows() < g.ncols() => Ok(0.0),
        Some(g) => {
            let s = g.singular_values();
            Ok(s.iter().fold(f64::INFINITY, |a, &b| a.min(b)).powi(2))
        }
        None => Ok(interface_diagonalise(&taylor_stiff(cell, tau)?.b0, tau, Vec::new()).mu),
    }
}

/// Interface branch with ψ continued from below in |τ| at degeneracies.
pub fn interface_eigen(cell: &CheckedCell, tau: f64) -> Result<InterfaceEigen> {
    let tp = taylor_stiff(cell, tau)?;
    let mut ie = interface_diagonalise(&tp.b0, tau, tp.vertices);
    ie.mu = lowest_steklov(cell, tau)?;
    if ie.degenerate {
        let step = if tau >= 0.0 { -1e-6 } else { 1e-6 };
        let near = interface_diagonalise(&taylor_stiff(cell, tau + step)?.b0, tau + step, Vec::new());
        ie.psi = near.psi;
    }
    Ok(ie)
}

/// Minimum eigenvalue of P_⊥B0P_⊥ restricted to the range of P_⊥.
pub fn compressed_min(ie: &InterfaceEigen, b0: &DMatrix<C>) -> f64 {
    let pairs = hermitian_eigen(b0);
    if pairs.len() < 2 {
        return f64::INFINITY;
    }
    // the range of P_⊥ is spanned by eigenvectors orthogonal to ψ
    let basis = DMatrix::from_columns(&pairs[1..].iter().map(|p| p.1.clone()).collect::<Vec<_>>());
    let q = basis.clone() - &ie.psi * (ie.psi.adjoint() * &basis);
    let qr = q.qr();
    let orth = qr.q().columns(0, pairs.len() - 1).into_owned();
    let comp = orth.adjoint() * b0 * &orth;
    hermitian_eigen(&comp)[0].0
}

/// τ² coefficient of μ(τ) by Richardson extrapolation of μ(τ)/τ² at
/// τ = 2⁻ʲ, j = 4..10; exactly zero when the branch vanishes identically.
pub fn gamma(cell: &CheckedCell) -> Result<f64> {
    let taus: Vec<f64> = (4..=10).map(|j| 2f64.powi(-j)).collect();
    let mus = taus.iter().map(|&t| lowest_steklov(cell, t)).collect::<Result<Vec<_>>>()?;
    if mus.iter().all(|m| m.abs() <= 1e-14) {
        return Ok(0.0);
    }
    let mut table: Vec<f64> = mus.iter().zip(&taus).map(|(m, t)| m / (t * t)).collect();
    for k in 1..=3 {
        let f = 4f64.powi(k);
        table = table.windows(2).map(|w| (f * w[1] - w[0]) / (f - 1.0)).collect();
    }
    Ok(*table.last().expect("nonempty"))
}

/// Geometry of the two-vertex example: stiff (l1, a1), soft l2, stiff (l3, a3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveParams {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub a1: f64,
    pub a3: f64,
    /// (l1/a1² + l3/a3²)⁻¹.
    pub sigma2: f64,
    /// l1 + l3.
    pub l_stiff: f64,
    pub gamma: f64,
}

impl EffectiveParams {
    pub fn new(l1: f64, l2: f64, l3: f64, a1: f64, a3: f64) -> Result<Self> {
        let cell = crate::graph_model::example_cell(l1, l2, l3, a1, a3)?;
        Self::from_cell(&cell)
    }

    /// Requires two vertices, one soft edge and two stiff edges; the stiff
    /// edges are taken in cell order as (l1, a1) and (l3, a3).
    pub fn from_cell(cell: &CheckedCell) -> Result<Self> {
        if cell.vertex_count() != 2 || cell.soft_edges().len() != 1 || cell.stiff_edges().len() != 2 {
            return Err(Error::InvalidArgument(
                "closed-form effective model needs two vertices, one soft and two stiff edges".into(),
            ));
        }
        let s = &cell.edges[cell.soft_edges()[0]];
        let e1 = &cell.edges[cell.stiff_edges()[0]];
        let e3 = &cell.edges[cell.stiff_edges()[1]];
        let (l1, a1, l3, a3) = (e1.length, e1.stiffness(), e3.length, e3.stiffness());
        Ok(EffectiveParams {
            l1,
            l2: s.length,
            l3,
            a1,
            a3,
            sigma2: 1.0 / (l1 / (a1 * a1) + l3 / (a3 * a3)),
            l_stiff: l1 + l3,
            gamma: gamma(cell)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.a1 * self.a1 / self.l1
    }

    pub fn q(&self) -> f64 {
        self.a3 * self.a3 / self.l3
    }

    pub fn period(&self) -> f64 {
        self.l1 + self.l2 + self.l3
    }

    pub fn xi(&self, tau: f64) -> C {
        -C::from_polar(self.p(), tau * self.l_stiff) - C::from_polar(self.q(), -tau * self.l2)
    }

    /// (σ τ/ε)².
    pub fn detuning(&self, tau: f64, eps: f64) -> f64 {
        self.sigma2 * (tau / eps).powi(2)
    }
}

fn unit_or_limit(f: impl Fn(f64) -> C, tau: f64, scale: f64) -> C {
    let w = f(tau);
    if w.norm() > 1e-12 * scale {
        return w / w.norm();
    }
    let step = if tau >= 0.0 { -1e-7 } else { 1e-7 };
    let w = f(tau + step);
    w / w.norm()
}

/// θ(τ) = (p e^{−iτΣl} + q)/|·|, continued from below in |τ| where it
/// is 0/0.
pub fn theta(params: &EffectiveParams, tau: f64) -> C {
    let (p, q, per) = (params.p(), params.q(), params.period());
    unit_or_limit(|t| C::from_polar(p, -t * per) + q, tau, p + q)
}

/// w_τ = −ξ/|ξ|.
pub fn w_tau(params: &EffectiveParams, tau: f64) -> C {
    unit_or_limit(|t| -params.xi(t), tau, params.p() + params.q())
}

/// Fourier coefficients c_n = (2π)^{−1/2}∫ Re θ(τ) e^{−inτ} dτ for
/// |n| ≤ n_max, by the 2048-point periodic trapezoid rule.
pub fn fourier_theta(params: &EffectiveParams, n_max: usize) -> Vec<(i64, C)> {
    const N: usize = 2048;
    let h = 2.0 * PI / N as f64;
    let samples: Vec<(f64, f64)> = (0..N)
        .map(|i| {
            let t = -PI + i as f64 * h;
            (t, theta(params, t).re)
        })
        .collect();
    let n = n_max as i64;
    (-n..=n)
        .map(|m| {
            let c: C = samples.iter().map(|&(t, r)| C::from_polar(r, -(m as f64) * t)).sum();
            (m, c * h / (2.0 * PI).sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaMode {
    /// Re θ(τ).
    Fiber,
    /// Re θ(0) = 1.
    Limit,
}

fn re_theta(params: &EffectiveParams, tau: f64, mode: ThetaMode) -> f64 {
    match mode {
        ThetaMode::Fiber => theta(params, tau).re,
        ThetaMode::Limit => 1.0,
    }
}

/// K(τ, z) in closed form.
pub fn kernel_closed(params: &EffectiveParams, tau: f64, z: C, eps: f64) -> Result<C> {
    let k = crate::numerics::csqrt(z);
    let x = k * params.l2;
    if let Some(d) = pole_distance(x) {
        if d < POLE_TOL {
            return Err(Error::SoftDirichletPole(z.re));
        }
    }
    let (s, c) = (x.sin(), x.cos());
    let rt = theta(params, tau).re;
    Ok((k * 2.0 * c / s - k * 2.0 * rt / s + params.detuning(tau, eps)) / params.l_stiff)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    Terms(usize),
    /// Stop once |term| drops below the tolerance.
    Tolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSeries {
    /// Partial sum plus asymptotic tail estimate.
    pub value: f64,
    /// Bare partial sum.
    pub raw: f64,
    pub terms: usize,
}

/// j-th term of the eigenfunction series for z·Γ_τ((A_D − z)⁻¹v).
pub fn kernel_term(params: &EffectiveParams, re_theta: f64, z: f64, j: usize) -> f64 {
    let mu = (PI * j as f64 / params.l2).powi(2);
    let s = if j % 2 == 1 { 1.0 } else { -1.0 };
    -(2.0 * z / params.l2) * (2.0 + 2.0 * s * re_theta) / (mu - z)
}

pub fn kernel_terms(params: &EffectiveParams, tau: f64, z: f64, range: std::ops::RangeInclusive<usize>) -> Vec<f64> {
    let rt = theta(params, tau).re;
    range.map(|j| kernel_term(params, rt, z, j)).collect()
}

/// K(τ, z) from the eigenfunction series.
pub fn kernel_series(params: &EffectiveParams, tau: f64, z: f64, eps: f64, trunc: Truncation) -> Result<KernelSeries> {
    let l2 = params.l2;
    let b2 = z * l2 * l2 / (PI * PI);
    if b2 > 0.0 {
        let b = b2.sqrt();
        if (b - b.round()).abs() < POLE_TOL && b.round() >= 1.0 {
            return Err(Error::SoftDirichletPole(z));
        }
    }
    let rt = theta(params, tau).re;
    let mut raw = 0.0;
    let mut j = 0;
    loop {
        j += 1;
        let term = kernel_term(params, rt, z, j);
        raw += term;
        let done = match trunc {
            Truncation::Terms(n) => j >= n,
            Truncation::Tolerance(tol) => (term.abs() < tol && (j as f64) > b2.sqrt() + 1.0) || j >= 100_000_000,
        };
        if done {
            break;
        }
    }
    // Σ_{i>j} 1/(i² − b²) by the midpoint integral, and an alternating tail
    let c = j as f64 + 0.5;
    let mut plain = 0.0;
    let mut pw = 1.0 / c;
    let r = b2 / (c * c);
    for n in 0..60 {
        let t = pw / (2 * n + 1) as f64;
        plain += t;
        if t.abs() < 1e-18 * plain.abs() {
            break;
        }
        pw *= r;
    }
    let plain_tail = -(4.0 * z / l2) * (l2 * l2 / (PI * PI)) * plain;
    let next = j + 1;
    let mu = (PI * next as f64 / l2).powi(2);
    let sign = if next % 2 == 1 { 1.0 } else { -1.0 };
    let alt_tail = -(4.0 * z / l2) * rt * sign / (mu - z) / 2.0;
    let head = 2.0 / l2 * (1.0 - rt) + params.detuning(tau, eps);
    Ok(KernelSeries {
        value: (raw + plain_tail + alt_tail + head) / params.l_stiff,
        raw: (raw + head) / params.l_stiff,
        terms: j,
    })
}

/// Pole-free form of F(z) − (στ/ε)², multiplied by sin(l2√z)/√z.
fn dispersion_entire(params: &EffectiveParams, rt: f64, det: f64, k: f64) -> f64 {
    let x = params.l2 * k;
    2.0 * rt - 2.0 * x.cos() - params.l2 * sinc(C::new(x, 0.0)).re * (det - params.l_stiff * k * k)
}

/// F(z) = (l1+l3)z + 2√z(Re θ − cos(l2√z))/sin(l2√z).
pub fn dispersion_function(params: &EffectiveParams, tau: f64, z: f64, mode: ThetaMode) -> Result<f64> {
    let k = z.sqrt();
    let x = params.l2 * k;
    if let Some(d) = pole_distance(C::new(x, 0.0)) {
        if d < POLE_TOL {
            return Err(Error::SoftDirichletPole(z));
        }
    }
    Ok(params.l_stiff * z + 2.0 * k * (re_theta(params, tau, mode) - x.cos()) / x.sin())
}

fn scan_roots(f: impl Fn(f64) -> f64, k_max: f64, dk: f64, include_zero: bool) -> Vec<f64> {
    let mut roots = Vec::new();
    if include_zero {
        roots.push(0.0);
    }
    let start = if include_zero { 1e-9 } else { 0.0 };
    let n = ((k_max - start) / dk).ceil().max(1.0) as usize;
    let mut a = start;
    let mut fa = f(a);
    for i in 1..=n {
        let b = (start + i as f64 * dk).min(k_max);
        let fb = f(b);
        if fa == 0.0 && a > start {
            roots.push(a);
        } else if fa * fb < 0.0 {
            roots.push(bisect_secant(&f, a, b, 1e-13 * b.max(1.0)));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Effective eigenvalues in [0, z_max]: roots of F(z) = (στ/ε)².
pub fn effective_fiber_roots(params: &EffectiveParams, tau: f64, eps: f64, z_max: f64, mode: ThetaMode) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside (0, 1)")));
    }
    let rt = re_theta(params, tau, mode);
    let det = params.detuning(tau, eps);
    let at_zero = dispersion_entire(params, rt, det, 0.0).abs() < 1e-14;
    let dk = (PI / (16.0 * params.l2)).min(z_max.sqrt() / 64.0).max(1e-6);
    let ks = scan_roots(|k| dispersion_entire(params, rt, det, k), z_max.sqrt(), dk, at_zero);
    Ok(ks.into_iter().map(|k| k * k).collect())
}

/// Coefficient ω in u(0) = ω u(l2) after removing the e^{−iτx} factor.
fn res_omega(params: &EffectiveParams, tau: f64, mode: ThetaMode) -> C {
    match mode {
        ThetaMode::Limit => C::new(1.0, 0.0),
        ThetaMode::Fiber => w_tau(params, tau).conj() * C::from_polar(1.0, -tau * params.l2),
    }
}

/// Matrix of the two boundary rows acting on (A, B) in
/// u = e^{−iτx}(A cos(kx) + B x sinc(kx)).
fn res_matrix(params: &EffectiveParams, tau: f64, eps: f64, z: f64, mode: ThetaMode) -> Matrix2<C> {
    let om = res_omega(params, tau, mode);
    let k = C::new(z.max(0.0).sqrt(), 0.0);
    let l2 = params.l2;
    let (c, s) = ((k * l2).cos(), sinc(k * l2) * l2);
    let rhs = params.detuning(tau, eps) - params.l_stiff * z;
    let one = C::new(1.0, 0.0);
    Matrix2::new(one - om * c, -om * s, om * k * k * s - rhs, one - om * c)
}

/// Determinant of the boundary-value problem on the soft interval.
pub fn res_determinant(params: &EffectiveParams, tau: f64, eps: f64, z: f64, mode: ThetaMode) -> C {
    res_matrix(params, tau, eps, z, mode).determinant()
}

/// Solution u on (0, l2) of the effective problem at a root z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftSolution {
    pub a: C,
    pub b: C,
    pub k: f64,
    pub tau: f64,
    pub l2: f64,
}

impl SoftSolution {
    pub fn u(&self, x: f64) -> C {
        let kx = C::new(self.k * x, 0.0);
        C::from_polar(1.0, -self.tau * x) * (self.a * kx.cos() + self.b * x * sinc(kx))
    }

    /// u' + iτu.
    pub fn twisted_derivative(&self, x: f64) -> C {
        let kx = C::new(self.k * x, 0.0);
        C::from_polar(1.0, -self.tau * x) * (-self.a * self.k * self.k * x * sinc(kx) + self.b * kx.cos())
    }
}

pub fn effective_soft_solution(params: &EffectiveParams, tau: f64, eps: f64, z: f64) -> Result<SoftSolution> {
    let m = res_matrix(params, tau, eps, z, ThetaMode::Fiber);
    let dm = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
    let (v, rel) = null_vector(&dm);
    if rel > 1e-7 {
        return Err(Error::NotAnEigenvalue { z, sigma: rel });
    }
    Ok(SoftSolution { a: v[0], b: v[1], k: z.max(0.0).sqrt(), tau, l2: params.l2 })
}

/// Data of the self-adjoint extension on L²(0, l2) ⊕ ℂ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomExtension {
    pub tau: f64,
    pub epsilon: f64,
    pub w_tau: C,
    pub sigma2: f64,
    pub l_stiff: f64,
    pub l2: f64,
}

impl HomExtension {
    /// Γ_τ(u, β).
    pub fn gamma_tau(&self, u: &SoftSolution, beta: C) -> C {
        let t = self.tau / self.epsilon;
        -u.twisted_derivative(0.0)
            + self.w_tau.conj() * u.twisted_derivative(self.l2)
            + beta * (self.sigma2 * t * t / self.l_stiff.sqrt())
    }
}

pub fn homogenised_extension(params: &EffectiveParams, tau: f64, eps: f64) -> HomExtension {
    HomExtension {
        tau,
        epsilon: eps,
        w_tau: w_tau(params, tau),
        sigma2: params.sigma2,
        l_stiff: params.l_stiff,
        l2: params.l2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionCheck {
    pub z: f64,
    pub beta: C,
    /// |u(0) − conj(w_τ)u(l2)|.
    pub quasi: f64,
    /// |(l1+l3)^{−1/2}Γ_τ(u, β) − zβ|.
    pub boundary: f64,
    /// |K(τ, z) − z| / max(1, z).
    pub kernel: f64,
}

pub fn extension_residuals(params: &EffectiveParams, tau: f64, eps: f64, z: f64) -> Result<ExtensionCheck> {
    let ext = homogenised_extension(params, tau, eps);
    let mut u = effective_soft_solution(params, tau, eps, z)?;
    let n = u.u(0.0).norm().max(u.u(params.l2).norm());
    if n > 0.0 {
        u.a /= n;
        u.b /= n;
    }
    let beta = u.u(0.0) * params.l_stiff.sqrt();
    let quasi = (u.u(0.0) - ext.w_tau.conj() * u.u(params.l2)).norm();
    let boundary = (ext.gamma_tau(&u, beta) / params.l_stiff.sqrt() - beta * z).norm();
    let kernel = match kernel_closed(params, tau, C::new(z, 0.0), eps) {
        Ok(k) => (k.re - z).abs() / z.max(1.0),
        Err(_) => f64::NAN,
    };
    Ok(ExtensionCheck { z, beta, quasi, boundary, kernel })
}

/// D(z) = (l1+l3)z + 2√z tan(l2√z/2).
pub fn limit_dispersion(params: &EffectiveParams, z: f64) -> Result<f64> {
    let k = z.max(0.0).sqrt();
    let x = params.l2 * k / 2.0;
    if x.cos().abs() < POLE_TOL {
        return Err(Error::TanPole(z));
    }
    Ok(params.l_stiff * z + 2.0 * k * x.tan())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitSpectrum {
    pub bands: Vec<[f64; 2]>,
    pub gaps: Vec<[f64; 2]>,
    pub poles: Vec<f64>,
    /// (z, D(z)) on a uniform grid, poles skipped.
    pub samples: Vec<[f64; 2]>,
}

/// Bands {D ≥ 0} ∩ [0, z_max]; each pole opens a gap that closes at the
/// next zero of D.
pub fn limit_spectrum(params: &EffectiveParams, z_max: f64) -> Result<LimitSpectrum> {
    if !(z_max > 0.0) {
        return Err(Error::InvalidArgument("z_max must be positive".into()));
    }
    let l2 = params.l2;
    let pole = |n: usize| ((2 * n + 1) as f64 * PI / l2).powi(2);
    let poles: Vec<f64> = (0..).map(pole).take_while(|&p| p < z_max).collect();
    let d = |z: f64| params.l_stiff * z + 2.0 * z.sqrt() * (l2 * z.sqrt() / 2.0).tan();
    let mut bands = Vec::new();
    let mut gaps = Vec::new();
    let mut lo = 0.0;
    for (n, &p) in poles.iter().enumerate() {
        bands.push([lo, p]);
        // D rises from −∞ to +∞ on (p, next pole), in √z
        let kp = p.sqrt();
        let kn = pole(n + 1).sqrt();
        let g = |k: f64| d(k * k);
        let (mut a, mut b) = (kp * (1.0 + 1e-12), kn * (1.0 - 1e-12));
        while g(a) >= 0.0 {
            a = 0.5 * (a + kp);
        }
        while g(b) <= 0.0 {
            b = 0.5 * (b + kn);
        }
        let root = bisect_secant(g, a, b, 1e-13 * kn);
        let zr = root * root;
        if zr >= z_max {
            gaps.push([p, z_max]);
            lo = f64::NAN;
            break;
        }
        gaps.push([p, zr]);
        lo = zr;
    }
    if lo.is_finite() {
        bands.push([lo, z_max]);
    }
    let samples = (0..=1000)
        .map(|i| z_max * i as f64 / 1000.0)
        .filter_map(|z| limit_dispersion(params, z).ok().map(|v| [z, v]))
        .collect();
    Ok(LimitSpectrum { bands, gaps, poles, samples })
}

/// Interface projection of the rescaled M-matrix,
/// G(z) = ⟨(zM1 + M̃soft(√z))ψ, ψ⟩ − μ/ε², times Π_soft sinc(√z l_e).
pub struct ProjectedModel<'a> {
    cell: &'a CheckedCell,
    tau: f64,
    eps: f64,
    ie: InterfaceEigen,
    m1: DMatrix<C>,
}

impl<'a> ProjectedModel<'a> {
    pub fn new(cell: &'a CheckedCell, tau: f64, eps: f64) -> Result<Self> {
        let ie = interface_eigen(cell, tau)?;
        let m1 = taylor_stiff(cell, tau)?.m1;
        Ok(ProjectedModel { cell, tau, eps, ie, m1 })
    }

    pub fn interface(&self) -> &InterfaceEigen {
        &self.ie
    }

    fn g(&self, k: f64) -> Result<f64> {
        let soft = assemble_soft(self.cell, C::new(k, 0.0), self.tau)?;
        let m = &self.m1 * C::new(k * k, 0.0) + soft.matrix;
        let v = (self.ie.psi.adjoint() * m * &self.ie.psi)[(0, 0)];
        Ok(v.re - self.ie.mu / (self.eps * self.eps))
    }

    pub fn entire(&self, k: f64) -> f64 {
        let weight = |k: f64| -> f64 {
            self.cell
                .soft_edges()
                .iter()
                .map(|&e| sinc(C::new(k * self.cell.edges[e].length, 0.0)).re)
                .product()
        };
        let mut kk = k;
        for _ in 0..4 {
            if let Ok(g) = self.g(kk) {
                return g * weight(kk);
            }
            kk += 1e-9 * kk.max(1.0);
        }
        f64::NAN
    }

    pub fn roots(&self, z_max: f64) -> Vec<f64> {
        let lmax = self
            .cell
            .soft_edges()
            .iter()
            .map(|&e| self.cell.edges[e].length)
            .fold(0.0, f64::max);
        let dk = (PI / (16.0 * lmax)).min(z_max.sqrt() / 64.0).max(1e-6);
        let f = |k: f64| self.entire(k);
        let at_zero = self.ie.mu.abs() < 1e-14 && f(0.0).abs() < 1e-12;
        scan_roots(f, z_max.sqrt(), dk, at_zero)
            .into_iter()
            .filter(|&k| {
                // discard sign changes through interior soft resonances
                let h = 1e-6 * k.max(1e-3);
                let (a, b, c) = (f(k - h), f(k), f(k + h));
                b.abs() <= 1e-3 * (a.abs() + c.abs()).max(1e-300) || k == 0.0
            })
            .map(|k| k * k)
            .collect()
    }
}

pub fn projected_roots(cell: &CheckedCell, tau: f64, eps: f64, z_max: f64) -> Result<Vec<f64>> {
    Ok(ProjectedModel::new(cell, tau, eps)?.roots(z_max))
}

/// Effective eigenfunction at z: interface values ∝ ψ, soft edges solved at
/// z, stiff edges harmonic, interior vertices fixed by Kirchhoff.
pub fn effective_eigenfunction(cell: &CheckedCell, tau: f64, eps: f64, z: f64) -> Result<EigenpairApprox> {
    let ie = interface_eigen(cell, tau)?;
    let nv = cell.vertex_count();
    let k = C::new(z.max(0.0).sqrt(), 0.0);
    let mut a = DMatrix::<C>::zeros(nv, nv);
    let soft = soft_component(cell, k, tau)?;
    for (i, &vi) in soft.vertices.iter().enumerate() {
        for (j, &vj) in soft.vertices.iter().enumerate() {
            a[(vi, vj)] += soft.matrix[(i, j)];
        }
    }
    let (m0, _, sv) = stiff_coefficients(cell, tau);
    for (i, &vi) in sv.iter().enumerate() {
        for (j, &vj) in sv.iter().enumerate() {
            a[(vi, vj)] += m0[(i, j)];
        }
    }
    let iface = cell.interface();
    let inner: Vec<usize> = (0..nv).filter(|v| !iface.contains(v)).collect();
    let mut u = DVector::<C>::zeros(nv);
    for (i, &v) in ie.vertices.iter().enumerate() {
        u[v] = ie.psi[i];
    }
    if !inner.is_empty() {
        let aii = DMatrix::from_fn(inner.len(), inner.len(), |i, j| a[(inner[i], inner[j])]);
        let rhs = DVector::from_fn(inner.len(), |i, _| {
            -iface.iter().map(|&b| a[(inner[i], b)] * u[b]).sum::<C>()
        });
        let x = aii.lu().solve(&rhs).ok_or_else(|| Error::SingularSystem("interior Kirchhoff system".into()))?;
        for (i, &v) in inner.iter().enumerate() {
            u[v] = x[i];
        }
    }
    let edges = cell
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let f0 = cell.weight(i, End::Tail, tau).conj() * u[e.tail];
            let fl = C::from_polar(1.0, tau * e.length) * cell.weight(i, End::Head, tau).conj() * u[e.head];
            let len = eps * e.length;
            if e.is_soft() {
                EdgeSolution::from_endpoints(f0, fl, k / eps, eps * eps, len)
            } else {
                let a = e.stiffness();
                EdgeSolution::from_endpoints(f0, fl, C::new(0.0, 0.0), a * a, len)
            }
        })
        .collect();
    let n = u.norm();
    let mut gamma0 = u / C::new(n, 0.0);
    fix_phase(&mut gamma0);
    let mut pair = EigenpairApprox { z, epsilon: eps, t: tau / eps, gamma0, edges, kind: PairKind::Effective };
    pair.normalize();
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_model::{example_cell, example_cell_with, validate_cell, CellGraph, EdgeKind, Gauge};
    use crate::numerics::{integrate, loglog_fit};
    use proptest::prelude::*;

    fn ex1() -> CheckedCell {
        example_cell(0.4, 0.2, 0.4, 1.0, 1.0).unwrap()
    }

    fn ex2() -> CheckedCell {
        example_cell(0.3, 0.2, 0.5, 1.0, 2.0).unwrap()
    }

    fn p1() -> EffectiveParams {
        EffectiveParams::new(0.4, 0.2, 0.4, 1.0, 1.0).unwrap()
    }

    fn p2() -> EffectiveParams {
        EffectiveParams::new(0.3, 0.2, 0.5, 1.0, 2.0).unwrap()
    }

    #[test]
    fn interface_branch_at_zero() {
        let ie = interface_eigen(&ex1(), 0.0).unwrap();
        assert!(ie.mu.abs() < 1e-14);
        assert!((ie.mu_perp - 10.0).abs() < 1e-12);
        let s = 0.5f64.sqrt();
        assert!((ie.psi[0] - C::new(s, 0.0)).norm() < 1e-12);
        assert!((ie.psi[1] - C::new(s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn interface_branch_matches_two_by_two_formula() {
        for &tau in &[PI / 2.0, 0.3, -2.0] {
            let ie = interface_eigen(&ex1(), tau).unwrap();
            let xi = 5.0 * (tau / 2.0).cos().abs();
            assert!((ie.mu - (5.0 - xi)).abs() < 1e-12, "{tau}");
            assert!((ie.mu_perp - (5.0 + xi)).abs() < 1e-12);
        }
        let ie = interface_eigen(&ex1(), PI / 2.0).unwrap();
        assert!((ie.mu - 5.0 * (1.0 - (PI / 4.0).cos())).abs() < 1e-12);
        assert!((ie.mu - 1.4644661).abs() < 1e-7);
    }

    #[test]
    fn degeneracy_flagged_and_continued() {
        let ie = interface_eigen(&ex1(), PI).unwrap();
        assert!(ie.degenerate);
        assert!((ie.mu - 5.0).abs() < 1e-12 && (ie.mu_perp - 5.0).abs() < 1e-12);
        let near = interface_eigen(&ex1(), PI - 1e-4).unwrap();
        assert!((ie.psi.adjoint() * &near.psi)[(0, 0)].norm() > 1.0 - 1e-6);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(&ex1()).unwrap() - 0.625).abs() < 1e-8);
        let (p, q) = (1.0 / 0.3, 4.0 / 0.5);
        assert!((gamma(&ex2()).unwrap() - p * q / (2.0 * (p + q))).abs() < 1e-8);
        let mut g = CellGraph::new(["A", "B"]);
        g.add_edge("k", "A", "B", 0.4, EdgeKind::Stiff { a: 1.0 }).unwrap();
        g.add_edge("s", "B", "A", 0.6, EdgeKind::Soft).unwrap();
        let tree = validate_cell(g).unwrap();
        assert_eq!(gamma(&tree).unwrap(), 0.0);
    }

    #[test]
    fn mu_minus_quadratic_is_quartic() {
        for cell in [ex1(), ex2()] {
            let g = gamma(&cell).unwrap();
            let taus: Vec<f64> = (3..=8).map(|j| 2f64.powi(-j)).collect();
            let r: Vec<f64> = taus.iter().map(|&t| (lowest_steklov(&cell, t).unwrap() - g * t * t).abs()).collect();
            let fit = loglog_fit(&taus, &r).unwrap();
            assert!(fit.slope >= 3.8, "{}", fit.slope);
        }
    }

    #[test]
    fn mu_is_even() {
        for &t in &[0.2, 1.1, 2.9] {
            for cell in [ex1(), ex2()] {
                assert!((lowest_steklov(&cell, t).unwrap() - lowest_steklov(&cell, -t).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn theta_properties() {
        let p = p1();
        assert!((theta(&p, 0.0) - C::new(1.0, 0.0)).norm() < 1e-15);
        for i in 0..1000 {
            let t = -PI + 2.0 * PI * (i as f64 + 0.5) / 1000.0;
            let th = theta(&p, t);
            assert!((th.norm() - 1.0).abs() < 1e-14);
            let sym = C::from_polar(1.0, -t / 2.0) * (t / 2.0).cos().signum();
            assert!((th - sym).norm() < 1e-12);
        }
        // against the off-diagonal entry of B0 assembled from the cell
        let q = p2();
        for &t in &[0.4, -1.7, 3.0] {
            let b0 = taylor_stiff(&ex2(), t).unwrap().b0;
            let xi = b0[(1, 0)];
            let expect = -xi.conj() * C::from_polar(1.0, -t * q.l2) / xi.norm();
            assert!((theta(&q, t) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn fourier_inversion_at_zero() {
        let c = fourier_theta(&p2(), 512);
        let s: C = c.iter().map(|x| x.1).sum();
        assert!((s / (2.0 * PI).sqrt() - C::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn kernel_series_agrees_with_closed_form() {
        let p = p1();
        let closed = kernel_closed(&p, 0.3, C::new(1.5, 0.0), 0.05).unwrap();
        let s = kernel_series(&p, 0.3, 1.5, 0.05, Truncation::Terms(10_000)).unwrap();
        assert!((s.value - closed.re).abs() <= 1e-6, "{} vs {}", s.value, closed.re);
        assert!(closed.im.abs() < 1e-12);
        let t = kernel_series(&p, 0.3, 1.5, 0.05, Truncation::Tolerance(1e-12)).unwrap();
        assert!((t.value - closed.re).abs() <= 1e-9);
    }

    #[test]
    fn raw_truncation_error_is_first_order() {
        let p = p2();
        let closed = kernel_closed(&p, 1.0, C::new(30.0, 0.0), 0.1).unwrap().re;
        let js = [250.0, 500.0, 1000.0, 2000.0];
        let e: Vec<f64> = js
            .iter()
            .map(|&j| (kernel_series(&p, 1.0, 30.0, 0.1, Truncation::Terms(j as usize)).unwrap().raw - closed).abs())
            .collect();
        let fit = loglog_fit(&js, &e).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn kernel_terms_decay_like_inverse_square() {
        let p = p2();
        let terms = kernel_terms(&p, 0.7, 2.0, 100..=200);
        for (i, t) in terms.iter().enumerate() {
            let j = (100 + i) as f64;
            let s = if (100 + i) % 2 == 1 { 1.0 } else { -1.0 };
            let law = 4.0 * 2.0 * p.l2 * (1.0 + s * theta(&p, 0.7).re) / (PI * PI * j * j);
            let r = t.abs() / law;
            assert!((0.8..=1.2).contains(&r), "{j}: {r}");
        }
    }

    #[test]
    fn series_coefficients_match_direct_quadrature() {
        let p = p2();
        let tau = 0.9;
        let th = theta(&p, tau);
        let w = w_tau(&p, tau);
        let l2 = p.l2;
        let v = |x: f64| (C::new(1.0, 0.0) + (w * C::from_polar(1.0, tau * l2) - 1.0) * (x / l2)) * C::from_polar(1.0, -tau * x);
        for j in 1..6 {
            let jf = j as f64;
            let phi = |x: f64| C::from_polar((2.0 / l2).sqrt(), -tau * x) * (PI * jf * x / l2).sin();
            // inner product antilinear in the first slot
            let ip = integrate(|x| v(x).conj() * phi(x), l2, 4, 20);
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            let closed = (2.0 * l2).sqrt() / (PI * jf) * (th * sign + 1.0);
            assert!((ip - closed).norm() < 1e-12, "{j}");
        }
    }

    #[test]
    fn kernel_even_and_zero_at_double_dirichlet_point() {
        let p = p1();
        for &z in &[0.7, 13.0, 400.0] {
            let a = kernel_closed(&p, 0.8, C::new(z, 0.0), 0.1).unwrap();
            let b = kernel_closed(&p, -0.8, C::new(z, 0.0), 0.1).unwrap();
            assert!((a - b).norm() < 1e-12);
        }
        let z = (2.0 * PI / 0.2f64).powi(2) * (1.0 + 1e-8);
        assert!(kernel_closed(&p, 0.0, C::new(z, 0.0), 0.1).unwrap().norm() < 1e-4);
    }

    #[test]
    fn limit_dispersion_matches_kernel_at_zero() {
        let p = p1();
        assert_eq!(limit_dispersion(&p, 0.0).unwrap(), 0.0);
        let small = 1e-8;
        assert!((limit_dispersion(&p, small).unwrap() / small - 1.0).abs() < 1e-6);
        for i in 1..=1000 {
            let z = 2000.0 * i as f64 / 1000.0 - 0.37;
            let (Ok(d), Ok(k)) = (limit_dispersion(&p, z), kernel_closed(&p, 0.0, C::new(z, 0.0), 0.1)) else { continue };
            let other = p.l_stiff * (z - k.re);
            assert!((d - other).abs() <= 1e-10 * d.abs().max(1.0), "{z}: {d} {other}");
        }
    }

    #[test]
    fn limit_spectrum_of_example() {
        let ls = limit_spectrum(&p1(), 2000.0).unwrap();
        assert_eq!(ls.bands[0][0], 0.0);
        assert!((ls.bands[0][1] - 25.0 * PI * PI).abs() < 1e-9);
        assert!((ls.poles[0] - 246.74011002723395).abs() < 1e-9);
        for (w, g) in ls.bands.windows(2).zip(&ls.gaps) {
            let (b0, b1) = (w[0], w[1]);
            assert_eq!(b0[1], g[0]);
            assert_eq!(g[1], b1[0]);
            assert!(g[1] > g[0]);
        }
        let upper = ls.gaps[0][1];
        assert!(upper > 246.74 && upper < 350.0);
        let d = limit_dispersion(&p1(), upper).unwrap();
        assert!(d.abs() < 1e-6, "{d}");
    }

    #[test]
    fn effective_roots_at_zero_momentum() {
        let r = effective_fiber_roots(&p1(), 0.0, 0.05, 400.0, ThetaMode::Fiber).unwrap();
        assert_eq!(r[0], 0.0);
    }

    #[test]
    fn effective_roots_satisfy_kernel_fixed_point_and_ode_determinant() {
        for p in [p1(), p2()] {
            for &(tau, eps) in &[(0.5, 0.05), (PI / 3.0, 0.1), (3.0, 0.0125)] {
                let roots = effective_fiber_roots(&p, tau, eps, 3000.0, ThetaMode::Fiber).unwrap();
                assert!(!roots.is_empty());
                for &z in &roots {
                    let sin = (p.l2 * z.sqrt()).sin();
                    let k = kernel_closed(&p, tau, C::new(z, 0.0), eps).unwrap();
                    // near a soft Dirichlet point compare the pole-cleared residual
                    let scale = (z + p.detuning(tau, eps)).max(1.0);
                    assert!((k.re - z).abs() * sin.abs().min(1e-3) * 1e3 <= 1e-10 * scale, "{z}");
                    let d = res_determinant(&p, tau, eps, z, ThetaMode::Fiber);
                    let scale = res_determinant(&p, tau, eps, z * 1.01, ThetaMode::Fiber).norm();
                    assert!(d.norm() <= 1e-9 * scale.max(1.0), "{z}: {d}");
                }
            }
        }
    }

    #[test]
    fn ode_determinant_roots_match() {
        // independent root search on the 2×2 determinant
        let p = p1();
        let (tau, eps) = (0.5, 0.05);
        let roots = effective_fiber_roots(&p, tau, eps, 400.0, ThetaMode::Fiber).unwrap();
        let om = res_omega(&p, tau, ThetaMode::Fiber);
        let f = |z: f64| (res_determinant(&p, tau, eps, z, ThetaMode::Fiber) / om).re;
        let z0 = roots[0];
        let r = bisect_secant(f, z0 * 0.9, z0 * 1.1, 1e-14);
        assert!((r - z0).abs() <= 1e-10 * z0.max(1.0));
    }

    #[test]
    fn extension_rows_vanish_at_roots() {
        for p in [p1(), p2()] {
            let (tau, eps) = (1.1, 0.05);
            for z in effective_fiber_roots(&p, tau, eps, 2000.0, ThetaMode::Fiber).unwrap() {
                let c = extension_residuals(&p, tau, eps, z).unwrap();
                assert!(c.quasi < 1e-9, "{c:?}");
                assert!(c.boundary < 1e-9 * (1.0 + p.detuning(tau, eps) + z), "{c:?}");
                assert!((c.beta.norm() - p.l_stiff.sqrt() * 1.0).abs() < 1e-12 || c.beta.norm() < p.l_stiff.sqrt());
            }
        }
        let c = extension_residuals(&p1(), 0.0, 0.05, 0.0).unwrap();
        assert!(c.quasi < 1e-14 && c.boundary < 1e-14);
    }

    #[test]
    fn projected_model_zero_at_origin_and_close_to_closed_form() {
        let r = projected_roots(&ex1(), 0.0, 0.05, 100.0).unwrap();
        assert_eq!(r[0], 0.0);
        let a = projected_roots(&ex2(), PI / 3.0, 0.0125, 400.0).unwrap();
        let b = effective_fiber_roots(&p2(), PI / 3.0, 0.0125, 400.0, ThetaMode::Fiber).unwrap();
        assert!((a[0] / b[0] - 1.0).abs() < 0.05, "{} {}", a[0], b[0]);
    }

    #[test]
    fn effective_eigenfunction_constant_at_origin() {
        let v = effective_eigenfunction(&ex1(), 0.0, 0.1, 0.0).unwrap();
        let c = v.value(0, 0.01);
        for e in 0..3 {
            for &x in &[0.0, 0.3, 0.9] {
                assert!((v.value(e, x * v.edges[e].length) - c).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn effective_interface_data_near_psi() {
        let epss = [0.1, 0.05, 0.025];
        let mut dev = Vec::new();
        for &eps in &epss {
            let tau = 2.0 * eps;
            let z = crate::spectral_solver::fiber_eigenvalues(&ex2(), eps, tau / eps, 400.0, 1).unwrap()[0];
            let v = crate::spectral_solver::fiber_eigenvector(&ex2(), eps, tau / eps, z).unwrap();
            let ie = interface_eigen(&ex2(), tau).unwrap();
            dev.push((ie.perp_projector() * &v.gamma0).norm());
        }
        let fit = loglog_fit(&epss, &dev).unwrap();
        assert!(fit.slope >= 1.8, "{dev:?}");
    }

    #[test]
    fn trivial_gauge_changes_gamma() {
        let c = example_cell_with(0.4, 0.2, 0.4, 1.0, 1.0, Gauge::Trivial).unwrap();
        assert!((gamma(&c).unwrap() - 0.4).abs() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn theta_unimodular_and_kernel_real(l1 in 0.1f64..1.0, l2 in 0.1f64..1.0, l3 in 0.1f64..1.0,
                                           a1 in 0.3f64..3.0, a3 in 0.3f64..3.0, tau in -3.1f64..3.1, z in 0.1f64..50.0) {
            let p = EffectiveParams::new(l1, l2, l3, a1, a3).unwrap();
            prop_assert!((theta(&p, tau).norm() - 1.0).abs() < 1e-14);
            if let Ok(k) = kernel_closed(&p, tau, C::new(z, 0.0), 0.1) {
                prop_assert!(k.im.abs() <= 1e-12 * k.norm().max(1.0));
            }
            prop_assert!(p.gamma >= -1e-12);
        }
    }
}
