//! Small numerical helpers shared by the solvers.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

pub type C = Complex64;

/// θ·cot θ, regular at θ = 0.
pub fn x_cot_x(x: C) -> C {
    if x.norm() < 1e-3 {
        let x2 = x * x;
        C::new(1.0, 0.0) - x2 / 3.0 - x2 * x2 / 45.0 - 2.0 * x2 * x2 * x2 / 945.0
    } else {
        x * x.cos() / x.sin()
    }
}

/// θ / sin θ, regular at θ = 0.
pub fn x_over_sin(x: C) -> C {
    if x.norm() < 1e-3 {
        let x2 = x * x;
        C::new(1.0, 0.0) + x2 / 6.0 + 7.0 * x2 * x2 / 360.0 + 31.0 * x2 * x2 * x2 / 15120.0
    } else {
        x / x.sin()
    }
}

/// sin θ / θ.
pub fn sinc(x: C) -> C {
    if x.norm() < 1e-3 {
        let x2 = x * x;
        C::new(1.0, 0.0) - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
    } else {
        x.sin() / x
    }
}

/// Distance of θ to the nearest nonzero multiple of π, or `None` when θ is
/// closest to zero.
pub fn pole_distance(x: C) -> Option<f64> {
    let n = (x.re / std::f64::consts::PI).round();
    if n == 0.0 {
        None
    } else {
        Some((x - C::new(n * std::f64::consts::PI, 0.0)).norm())
    }
}

/// Principal square root (branch cut on the negative real axis).
pub fn csqrt(z: C) -> C {
    if z.im == 0.0 && z.re < 0.0 {
        C::new(0.0, (-z.re).sqrt())
    } else {
        z.sqrt()
    }
}

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static G20: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static G64: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        20 => G20.get_or_init(|| legendre_rule(20)).clone(),
        64 => G64.get_or_init(|| legendre_rule(64)).clone(),
        _ => legendre_rule(n),
    }
}

/// Composite Gauss-Legendre integral of `f` over [0, len] with `panels`
/// panels of `order` points each.
pub fn integrate<F: Fn(f64) -> C>(f: F, len: f64, panels: usize, order: usize) -> C {
    let (x, w) = gauss_legendre(order);
    let h = len / panels as f64;
    let mut acc = C::new(0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc += f(a + 0.5 * h * (xi + 1.0)) * (0.5 * h * wi);
        }
    }
    acc
}

/// Least-squares line through (ln x, ln y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    /// R² ≥ 0.98.
    pub reliable: bool,
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: pts.len(),
        reliable: r_squared >= 0.98,
    })
}

/// Bracketed refinement: bisection down to `width`, then three secant
/// steps kept inside the bracket. Requires `f(a)·f(b) ≤ 0`.
pub fn bisect_secant<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, width: f64) -> f64 {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut it = 0;
    while (b - a).abs() > width && it < 200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
        it += 1;
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..3 {
        if fb == fa {
            break;
        }
        let s = b - fb * (b - a) / (fb - fa);
        if !(s > a.min(b) && s < a.max(b)) {
            break;
        }
        let fs = f(s);
        x = s;
        if fs == 0.0 {
            break;
        }
        if (fs < 0.0) == (fa < 0.0) {
            a = s;
            fa = fs;
        } else {
            b = s;
            fb = fs;
        }
    }
    x
}

/// Eigenvalues (ascending) of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<C>) -> Vec<f64> {
    let h = (m + m.adjoint()) * C::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenpairs (ascending) of a Hermitian matrix.
pub fn hermitian_eigen(m: &DMatrix<C>) -> Vec<(f64, DVector<C>)> {
    let h = (m + m.adjoint()) * C::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut pairs: Vec<(f64, DVector<C>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Rotate so the first component with modulus above 1e-12 is positive real.
pub fn fix_phase(v: &mut DVector<C>) {
    if let Some(c) = v.iter().find(|c| c.norm() > 1e-12).copied() {
        let ph = c.conj() / c.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

/// Right singular vector of the smallest singular value, with σ_min/σ_max.
pub fn null_vector(m: &DMatrix<C>) -> (DVector<C>, f64) {
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let s = &svd.singular_values;
    let (mut imin, mut smax) = (0, 0.0_f64);
    for i in 0..s.len() {
        if s[i] < s[imin] {
            imin = i;
        }
        smax = smax.max(s[i]);
    }
    let v = vt.row(imin).adjoint();
    let rel = if smax > 0.0 { s[imin] / smax } else { 0.0 };
    (v, rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let v = integrate(|x| C::new(x.powi(9) + 3.0 * x * x, 0.0), 2.0, 1, 20);
        assert!((v.re - (1024.0 / 10.0 + 8.0)).abs() < 1e-11);
        let (x, w) = gauss_legendre(64);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn stable_trig_matches_direct_form() {
        for &x in &[1e-5, 5e-4, 2e-3, 0.3, 2.0] {
            let z = C::new(x, 0.1 * x);
            assert!((x_cot_x(z) - z * z.cos() / z.sin()).norm() < 1e-12);
            assert!((x_over_sin(z) - z / z.sin()).norm() < 1e-12);
            assert!((sinc(z) - z.sin() / z).norm() < 1e-12);
        }
        assert_eq!(x_cot_x(C::new(0.0, 0.0)), C::new(1.0, 0.0));
    }

    #[test]
    fn bisect_secant_finds_cosine_root() {
        let r = bisect_secant(f64::cos, 1.0, 2.0, 1e-10);
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn loglog_fit_recovers_power() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|e: &f64| 3.0 * e.powi(2)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(f.reliable);
    }

    #[test]
    fn csqrt_branch() {
        let k = csqrt(C::new(-4.0, 0.0));
        assert_eq!(k, C::new(0.0, 2.0));
        assert!(csqrt(C::new(1.0, 1e-3)).im > 0.0);
    }
}
