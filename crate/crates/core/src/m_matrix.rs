//! Weyl-Titchmarsh M-matrix of a fiber, its soft/stiff summands, interface
//! reduction and the small-ϰ expansion of the stiff part.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph_model::{CheckedCell, Component, EdgeSpec, FiberParams};
use crate::numerics::{pole_distance, x_cot_x, x_over_sin, C};

pub const POLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Part {
    Full,
    Soft,
    Stiff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixEval {
    pub matrix: DMatrix<C>,
    pub part: Part,
    /// Cell vertex index of each coordinate.
    pub vertices: Vec<usize>,
    /// k for full and soft parts, ϰ for the stiff part.
    pub arg: C,
    pub tau: f64,
}

/// Adds one edge: diagonal −s·θcotθ at both ends, off-diagonal s·(θ/sinθ)·w̃.
fn add_edge(
    m: &mut DMatrix<C>,
    coords: &[usize],
    spec: &EdgeSpec,
    scale: C,
    theta: C,
    wt: C,
) -> Result<()> {
    if let Some(d) = pole_distance(theta) {
        if d < POLE_TOL {
            return Err(Error::DirichletPole { edge: spec.id.clone(), arg: theta.re });
        }
    }
    let pos = |v: usize| coords.iter().position(|&c| c == v).expect("vertex in coordinate list");
    let (it, ih) = (pos(spec.tail), pos(spec.head));
    let diag = scale * x_cot_x(theta);
    let off = scale * x_over_sin(theta);
    m[(it, it)] -= diag;
    m[(ih, ih)] -= diag;
    m[(it, ih)] += off * wt;
    m[(ih, it)] += off * wt.conj();
    Ok(())
}

fn assemble_edges<F>(cell: &CheckedCell, edges: &[usize], coords: &[usize], tau: f64, f: F) -> Result<DMatrix<C>>
where
    F: Fn(&EdgeSpec) -> (C, C),
{
    let n = coords.len();
    let mut m = DMatrix::zeros(n, n);
    for &e in edges {
        let spec = &cell.edges[e];
        let (scale, theta) = f(spec);
        add_edge(&mut m, coords, spec, scale, theta, cell.flux_weight(e, tau))?;
    }
    Ok(m)
}

/// Full M(z) over all vertices.
pub fn assemble_full(cell: &CheckedCell, fp: &FiberParams) -> Result<MMatrixEval> {
    let eps = fp.epsilon;
    let k = fp.k();
    let coords: Vec<usize> = (0..cell.vertex_count()).collect();
    let all: Vec<usize> = (0..cell.edge_count()).collect();
    let matrix = assemble_edges(cell, &all, &coords, fp.tau(), |e| {
        let a = e.coefficient(eps);
        let len = eps * e.length;
        (C::new(a * a / len, 0.0), k * len / a)
    })?;
    Ok(MMatrixEval { matrix, part: Part::Full, vertices: coords, arg: k, tau: fp.tau() })
}

/// M̃soft(k, τ) over the vertices of the soft component, before reduction.
pub fn soft_component(cell: &CheckedCell, k: C, tau: f64) -> Result<MMatrixEval> {
    let sub = cell.subgraph(Component::Soft);
    let matrix = assemble_edges(cell, &sub.edges, &sub.vertices, tau, |e| {
        (C::new(1.0 / e.length, 0.0), k * e.length)
    })?;
    Ok(MMatrixEval { matrix, part: Part::Soft, vertices: sub.vertices, arg: k, tau })
}

/// M̃stiff(ϰ, τ) over the vertices of the stiff component, before reduction.
pub fn stiff_component(cell: &CheckedCell, kappa: C, tau: f64) -> Result<MMatrixEval> {
    let sub = cell.subgraph(Component::Stiff);
    let matrix = assemble_edges(cell, &sub.edges, &sub.vertices, tau, |e| {
        let a = e.stiffness();
        (a * a / (kappa * e.length), kappa * e.length / a)
    })?;
    Ok(MMatrixEval { matrix, part: Part::Stiff, vertices: sub.vertices, arg: kappa, tau })
}

/// M̃soft(k, τ) on the interface.
pub fn assemble_soft(cell: &CheckedCell, k: C, tau: f64) -> Result<MMatrixEval> {
    reduce_to_interface(&soft_component(cell, k, tau)?, cell.interface())
}

/// M̃stiff(ϰ, τ) on the interface.
pub fn assemble_stiff(cell: &CheckedCell, kappa: C, tau: f64) -> Result<MMatrixEval> {
    reduce_to_interface(&stiff_component(cell, kappa, tau)?, cell.interface())
}

/// Schur complement onto the interface coordinates (in the order given).
pub fn reduce_to_interface(m: &MMatrixEval, interface: &[usize]) -> Result<MMatrixEval> {
    let outer: Vec<usize> = interface
        .iter()
        .map(|v| {
            m.vertices
                .iter()
                .position(|x| x == v)
                .ok_or_else(|| Error::InvalidArgument(format!("vertex {v} missing from matrix")))
        })
        .collect::<Result<_>>()?;
    let inner: Vec<usize> = (0..m.vertices.len()).filter(|i| !outer.contains(i)).collect();
    let block = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| m.matrix[(rows[i], cols[j])])
    };
    let mut reduced = block(&outer, &outer);
    if !inner.is_empty() {
        let mcc = block(&inner, &inner);
        let sv = mcc.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smin > smax * 1e-12) {
            return Err(Error::InteriorResonance((m.arg * m.arg).re));
        }
        let solved = mcc
            .lu()
            .solve(&block(&inner, &outer))
            .ok_or_else(|| Error::InteriorResonance((m.arg * m.arg).re))?;
        reduced -= block(&outer, &inner) * solved;
    }
    Ok(MMatrixEval {
        matrix: reduced,
        part: m.part,
        vertices: interface.to_vec(),
        arg: m.arg,
        tau: m.tau,
    })
}

/// Leading coefficients of M̃stiff(ϰ, τ) = ϰ⁻¹M0 + ϰM1 + O(ϰ³) on the
/// interface, with B0 = −M0 and B1 = +M1.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorPair {
    pub tau: f64,
    pub m0: DMatrix<C>,
    pub m1: DMatrix<C>,
    pub b0: DMatrix<C>,
    pub b1: DMatrix<C>,
    pub vertices: Vec<usize>,
}

pub(crate) fn stiff_coefficients(cell: &CheckedCell, tau: f64) -> (DMatrix<C>, DMatrix<C>, Vec<usize>) {
    let sub = cell.subgraph(Component::Stiff);
    let n = sub.vertices.len();
    let pos = |v: usize| sub.vertices.iter().position(|&c| c == v).unwrap();
    let mut m0 = DMatrix::zeros(n, n);
    let mut m1 = DMatrix::zeros(n, n);
    for &e in &sub.edges {
        let spec = &cell.edges[e];
        let a = spec.stiffness();
        let l = spec.length;
        let s = a * a / l;
        let w = cell.flux_weight(e, tau);
        let (it, ih) = (pos(spec.tail), pos(spec.head));
        m0[(it, it)] -= C::new(s, 0.0);
        m0[(ih, ih)] -= C::new(s, 0.0);
        m0[(it, ih)] += w * s;
        m0[(ih, it)] += w.conj() * s;
        m1[(it, it)] += C::new(l / 3.0, 0.0);
        m1[(ih, ih)] += C::new(l / 3.0, 0.0);
        m1[(it, ih)] += w * (l / 6.0);
        m1[(ih, it)] += w.conj() * (l / 6.0);
    }
    (m0, m1, sub.vertices)
}

pub fn taylor_stiff(cell: &CheckedCell, tau: f64) -> Result<TaylorPair> {
    let (m0, m1, coords) = stiff_coefficients(cell, tau);
    let outer: Vec<usize> = cell
        .interface()
        .iter()
        .map(|v| coords.iter().position(|c| c == v).expect("interface lies on the stiff part"))
        .collect();
    let inner: Vec<usize> = (0..coords.len()).filter(|i| !outer.contains(i)).collect();
    let block = |m: &DMatrix<C>, r: &[usize], c: &[usize]| {
        DMatrix::from_fn(r.len(), c.len(), |i, j| m[(r[i], c[j])])
    };
    let (mut r0, mut r1) = (block(&m0, &outer, &outer), block(&m1, &outer, &outer));
    if !inner.is_empty() {
        // (P + ϰ²Q) − (L + ϰ²L1)(C + ϰ²C1)⁻¹(R + ϰ²R1), expanded to O(ϰ²)
        let lu = block(&m0, &inner, &inner).lu();
        let solve = |b: DMatrix<C>| {
            lu.solve(&b).ok_or_else(|| Error::InteriorResonance(0.0))
        };
        let l0 = block(&m0, &outer, &inner);
        let l1 = block(&m1, &outer, &inner);
        let x = solve(block(&m0, &inner, &outer))?;
        let x1 = solve(block(&m1, &inner, &outer))?;
        let c1 = block(&m1, &inner, &inner);
        r0 -= &l0 * &x;
        r1 -= &l1 * &x + &l0 * &x1 - &l0 * solve(&c1 * &x)?;
    }
    Ok(TaylorPair {
        tau,
        b0: -r0.clone(),
        b1: r1.clone(),
        m0: r0,
        m1: r1,
        vertices: cell.interface().to_vec(),
    })
}

/// Factor G with B0 = G*G, one row per stiff edge, when every stiff
/// vertex lies on the interface. Singular values of G give the Steklov
/// branch with high relative accuracy near τ = 0.
pub fn stiff_factor(cell: &CheckedCell, tau: f64) -> Option<DMatrix<C>> {
    let sub = cell.subgraph(Component::Stiff);
    let iface = cell.interface();
    if sub.vertices.iter().any(|v| !iface.contains(v)) {
        return None;
    }
    let pos = |v: usize| iface.iter().position(|&c| c == v).unwrap();
    let mut g = DMatrix::zeros(sub.edges.len(), iface.len());
    for (r, &e) in sub.edges.iter().enumerate() {
        let spec = &cell.edges[e];
        let s = (spec.stiffness().powi(2) / spec.length).sqrt();
        let w = cell.flux_weight(e, tau);
        g[(r, pos(spec.tail))] += C::new(s, 0.0);
        g[(r, pos(spec.head))] -= w * s;
    }
    Some(g)
}

/// Γ1 data produced by Γ0 data `g` through M, convenience for residual checks.
pub fn apply(m: &MMatrixEval, g: &DVector<C>) -> DVector<C> {
    &m.matrix * g
}
