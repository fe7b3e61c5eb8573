//! Small-τ expansion of the Steklov problem on the stiff component in the
//! gauge w ≡ 1: u = Σ (iτ)ʲ u_j, μ = Σ α_j (iτ)ʲ.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::effective_model::{compressed_min, interface_eigen, lowest_steklov};
use crate::error::{Error, Result};
use crate::graph_model::{CheckedCell, Component};
use crate::m_matrix::{stiff_coefficients, taylor_stiff};
use crate::numerics::{integrate, loglog_fit, SlopeFit, C};

/// Polynomial on each stiff edge, coefficients in ascending powers of x.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgewisePoly {
    /// Cell edge index of each entry.
    pub edges: Vec<usize>,
    pub coeffs: Vec<Vec<f64>>,
    pub zero_mean: bool,
}

fn peval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn pderiv(p: &[f64]) -> Vec<f64> {
    p.iter().enumerate().skip(1).map(|(n, c)| n as f64 * c).collect()
}

fn pintegral(p: &[f64], x: f64) -> f64 {
    p.iter().enumerate().map(|(n, c)| c * x.powi(n as i32 + 1) / (n + 1) as f64).sum()
}

fn padd(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n).map(|i| a.get(i).copied().unwrap_or(0.0) + s * b.get(i).copied().unwrap_or(0.0)).collect()
}

impl EdgewisePoly {
    pub fn eval(&self, slot: usize, x: f64) -> f64 {
        peval(&self.coeffs[slot], x)
    }

    pub fn derivative(&self, slot: usize, x: f64) -> f64 {
        peval(&pderiv(&self.coeffs[slot]), x)
    }

    pub fn integral(&self, cell: &CheckedCell) -> f64 {
        self.edges
            .iter()
            .zip(&self.coeffs)
            .map(|(&e, p)| pintegral(p, cell.edges[e].length))
            .sum()
    }

    /// Largest mismatch of end values at shared vertices.
    pub fn continuity_defect(&self, cell: &CheckedCell) -> f64 {
        let mut vals: Vec<Vec<f64>> = vec![Vec::new(); cell.vertex_count()];
        for (slot, &e) in self.edges.iter().enumerate() {
            let s = &cell.edges[e];
            vals[s.tail].push(self.eval(slot, 0.0));
            vals[s.head].push(self.eval(slot, s.length));
        }
        vals.iter()
            .flat_map(|v| v.iter().map(move |x| (x - v[0]).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationResult {
    /// α_0..α_3.
    pub alpha: [f64; 4],
    /// τ² coefficient of μ, −α2.
    pub gamma_b: f64,
    /// u0..u3.
    pub orders: Vec<EdgewisePoly>,
    /// |α2 + |∂G|⁻¹Σ a²∫(u1' + 1)|.
    pub solvability_residual: f64,
    pub gauge: &'static str,
}

struct Chain<'a> {
    cell: &'a CheckedCell,
    edges: Vec<usize>,
    vertices: Vec<usize>,
    boundary: Vec<usize>,
}

impl Chain<'_> {
    fn a2(&self, slot: usize) -> f64 {
        self.cell.edges[self.edges[slot]].stiffness().powi(2)
    }

    fn len(&self, slot: usize) -> f64 {
        self.cell.edges[self.edges[slot]].length
    }

    /// Ends (slot, sign, at_head) meeting at a vertex; sign +1 for tails.
    fn ends(&self, v: usize) -> Vec<(usize, f64, bool)> {
        let mut out = Vec::new();
        for (slot, &e) in self.edges.iter().enumerate() {
            let s = &self.cell.edges[e];
            if s.tail == v {
                out.push((slot, 1.0, false));
            }
            if s.head == v {
                out.push((slot, -1.0, true));
            }
        }
        out
    }

    /// Order j from u_0..u_{j−1} and α_1..α_{j−1}.
    fn solve_order(&self, orders: &[EdgewisePoly], j: usize, alpha: &[f64]) -> Result<(EdgewisePoly, f64)> {
        let ne = self.edges.len();
        let prev = &orders[j - 1];
        let prev2 = if j >= 2 { Some(&orders[j - 2]) } else { None };
        // particular part P with P'' = −2u'_{j−1} − u_{j−2}, P(0) = P'(0) = 0
        let part: Vec<Vec<f64>> = (0..ne)
            .map(|s| {
                let mut rhs: Vec<f64> = pderiv(&prev.coeffs[s]).iter().map(|c| -2.0 * c).collect();
                if let Some(p2) = prev2 {
                    rhs = padd(&rhs, &p2.coeffs[s], -1.0);
                }
                let mut p = vec![0.0, 0.0];
                p.extend(rhs.iter().enumerate().map(|(n, c)| c / ((n + 1) * (n + 2)) as f64));
                p
            })
            .collect();
        let n = 2 * ne + 1;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        let mut row = 0;
        let value = |slot: usize, at_head: bool, a: &mut DMatrix<f64>, row: usize, s: f64| -> f64 {
            let x = if at_head { self.len(slot) } else { 0.0 };
            a[(row, 2 * slot)] += s;
            a[(row, 2 * slot + 1)] += s * x;
            s * peval(&part[slot], x)
        };
        for &v in &self.vertices {
            let ends = self.ends(v);
            for &(slot, _, h) in &ends[1..] {
                let k0 = value(slot, h, &mut a, row, 1.0);
                let k1 = value(ends[0].0, ends[0].2, &mut a, row, -1.0);
                b[row] = -(k0 + k1);
                row += 1;
            }
            // flux Σσa²(u_j' + u_{j−1})
            let mut known = 0.0;
            for &(slot, sg, h) in &ends {
                let x = if h { self.len(slot) } else { 0.0 };
                let w = sg * self.a2(slot);
                a[(row, 2 * slot + 1)] += w;
                known += w * (peval(&pderiv(&part[slot]), x) + prev.eval(slot, x));
            }
            if self.boundary.contains(&v) {
                // −flux = α_j + Σ_{0<i<j} α_i u_{j−i}(V)
                for c in a.row_mut(row).iter_mut() {
                    *c = -*c;
                }
                a[(row, n - 1)] = -1.0;
                let (slot, _, h) = ends[0];
                let x = if h { self.len(slot) } else { 0.0 };
                b[row] = known + (1..j).map(|i| alpha[i] * orders[j - i].eval(slot, x)).sum::<f64>();
            } else {
                b[row] = -known;
            }
            row += 1;
        }
        for slot in 0..ne {
            let l = self.len(slot);
            a[(row, 2 * slot)] = l;
            a[(row, 2 * slot + 1)] = l * l / 2.0;
            b[row] -= pintegral(&part[slot], l);
        }
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::SingularSystem("perturbation order".into()))?;
        let coeffs = (0..ne)
            .map(|s| padd(&part[s], &[x[2 * s], x[2 * s + 1]], 1.0))
            .collect();
        Ok((EdgewisePoly { edges: self.edges.clone(), coeffs, zero_mean: true }, x[n - 1]))
    }
}

/// Literal hierarchy in the gauge w ≡ 1, stiff fluxes weighted by a_e².
pub fn solve_chain(cell: &CheckedCell) -> Result<PerturbationResult> {
    let sub = cell.subgraph(Component::Stiff);
    if !sub.is_connected(cell) {
        return Err(Error::SingularSystem("stiff component is disconnected".into()));
    }
    let chain = Chain {
        cell,
        edges: sub.edges.clone(),
        vertices: sub.vertices.clone(),
        boundary: cell.interface().to_vec(),
    };
    let ne = chain.edges.len();
    let u0 = EdgewisePoly { edges: chain.edges.clone(), coeffs: vec![vec![1.0]; ne], zero_mean: false };
    let mut orders = vec![u0];
    let mut alpha = vec![0.0];
    for j in 1..=3 {
        let (u, a) = chain.solve_order(&orders, j, &alpha)?;
        orders.push(u);
        alpha.push(a);
    }
    let a2: f64 = (0..ne)
        .map(|s| chain.a2(s) * (pintegral(&pderiv(&orders[1].coeffs[s]), chain.len(s)) + chain.len(s)))
        .sum();
    let identity = -a2 / chain.boundary.len() as f64;
    Ok(PerturbationResult {
        alpha: [alpha[0], alpha[1], alpha[2], alpha[3]],
        gamma_b: -alpha[2],
        orders,
        solvability_residual: (alpha[2] - identity).abs(),
        gauge: "trivial",
    })
}

/// Second eigenvalue of B0(0) on the interface.
pub fn c_perp(cell: &CheckedCell) -> Result<f64> {
    let ie = interface_eigen(cell, 0.0)?;
    if ie.psi.len() < 2 {
        return Err(Error::TooFewInterfaceVertices);
    }
    Ok(ie.mu_perp)
}

/// min eig of P_⊥B0(τ)P_⊥ on the range of P_⊥, per τ.
pub fn compressed_positivity(cell: &CheckedCell, taus: &[f64]) -> Result<Vec<(f64, f64)>> {
    taus.iter()
        .map(|&t| {
            let ie = interface_eigen(cell, t)?;
            let b0 = taylor_stiff(cell, t)?.b0;
            Ok((t, compressed_min(&ie, &b0)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainderReport {
    pub taus: Vec<f64>,
    pub eigenvalue_remainder: Vec<f64>,
    pub eigenvector_remainder: Vec<f64>,
    /// None when the eigenvalue remainder sits at rounding level.
    pub slope_r: Option<SlopeFit>,
    pub slope_big_r: Option<SlopeFit>,
    pub note: Option<String>,
}

/// Exact Steklov eigenfunction on the stiff edges at τ (edge functions
/// e^{−iτx}(c + dx)), scaled so that its integral equals |G_stiff|.
fn steklov_function(cell: &CheckedCell, tau: f64) -> Result<Vec<(usize, C, C)>> {
    let ie = interface_eigen(cell, tau)?;
    let (m0, _, sv) = stiff_coefficients(cell, tau);
    let mut u = DVector::<C>::zeros(sv.len());
    let pos = |v: usize| sv.iter().position(|&x| x == v).expect("stiff vertex");
    for (i, &v) in ie.vertices.iter().enumerate() {
        u[pos(v)] = ie.psi[i];
    }
    let inner: Vec<usize> = (0..sv.len()).filter(|&i| !ie.vertices.contains(&sv[i])).collect();
    if !inner.is_empty() {
        let outer: Vec<usize> = ie.vertices.iter().map(|&v| pos(v)).collect();
        let aii = DMatrix::from_fn(inner.len(), inner.len(), |i, j| m0[(inner[i], inner[j])]);
        let rhs = DVector::from_fn(inner.len(), |i, _| -outer.iter().map(|&o| m0[(inner[i], o)] * u[o]).sum::<C>());
        let x = aii.lu().solve(&rhs).ok_or_else(|| Error::SingularSystem("interior stiff vertices".into()))?;
        for (i, &p) in inner.iter().enumerate() {
            u[p] = x[i];
        }
    }
    let sub = cell.subgraph(Component::Stiff);
    let mut lines: Vec<(usize, C, C)> = sub
        .edges
        .iter()
        .map(|&e| {
            let s = &cell.edges[e];
            let g0 = cell.weight(e, crate::graph_model::End::Tail, tau).conj() * u[pos(s.tail)];
            let gl = C::from_polar(1.0, tau * s.length) * cell.weight(e, crate::graph_model::End::Head, tau).conj() * u[pos(s.head)];
            (e, g0, (gl - g0) / s.length)
        })
        .collect();
    let total: f64 = sub.edges.iter().map(|&e| cell.edges[e].length).sum();
    let mass: C = lines
        .iter()
        .map(|&(e, c, d)| {
            let l = cell.edges[e].length;
            integrate(|x| C::from_polar(1.0, -tau * x) * (c + d * x), l, 4, 20)
        })
        .sum();
    let s = C::new(total, 0.0) / mass;
    for l in &mut lines {
        l.1 *= s;
        l.2 *= s;
    }
    Ok(lines)
}

/// Log-log slopes of |μ − γ_Bτ²| and ‖u_τ − Σ_{j≤3}(iτ)ʲu_j‖ at
/// τ = 2⁻ʲ, j = 3..8, in the gauge w ≡ 1.
pub fn remainder_slopes(cell: &CheckedCell) -> Result<RemainderReport> {
    let triv = cell.with_trivial_weights();
    let chain = solve_chain(&triv)?;
    let taus: Vec<f64> = (3..=8).map(|j| 2f64.powi(-j)).collect();
    let mut er = Vec::new();
    let mut vr = Vec::new();
    for &t in &taus {
        er.push((lowest_steklov(&triv, t)? - chain.gamma_b * t * t).abs());
        let exact = steklov_function(&triv, t)?;
        let it = C::new(0.0, t);
        let mut sq = 0.0;
        for (slot, &(e, c, d)) in exact.iter().enumerate() {
            let l = triv.edges[e].length;
            sq += integrate(
                |x| {
                    let v = C::from_polar(1.0, -t * x) * (c + d * x);
                    let series: C = (0..=3).map(|j| it.powi(j as i32) * chain.orders[j].eval(slot, x)).sum();
                    C::new((v - series).norm_sqr(), 0.0)
                },
                l,
                4,
                20,
            )
            .re;
        }
        vr.push(sq.sqrt());
    }
    let tiny = er.iter().all(|&x| x < 1e-13);
    let (slope_r, note) = if tiny {
        (None, Some("eigenvalue remainder at rounding level (stiff tree); fit skipped".to_string()))
    } else {
        (loglog_fit(&taus, &er), None)
    };
    let slope_big_r = loglog_fit(&taus, &vr);
    Ok(RemainderReport { taus, eigenvalue_remainder: er, eigenvector_remainder: vr, slope_r, slope_big_r, note })
}

/// Least-squares coefficients of τ, τ³, τ⁵ in a degree-6 fit of μ(τ) on a
/// symmetric grid.
pub fn odd_coefficients(cell: &CheckedCell) -> Result<[f64; 3]> {
    let taus: Vec<f64> = (1..=10).flat_map(|k| [0.05 * k as f64, -0.05 * k as f64]).collect();
    let mus = taus.iter().map(|&t| lowest_steklov(cell, t)).collect::<Result<Vec<_>>>()?;
    let a = DMatrix::from_fn(taus.len(), 7, |i, j| taus[i].powi(j as i32));
    let b = DVector::from_vec(mus);
    let x = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::SingularSystem(e.to_string()))?;
    Ok([x[1], x[3], x[5]])
}
