//! Periodicity cell: vertices, oriented soft/stiff edges and unimodular
//! vertex weights.

use std::collections::BTreeSet;
use std::ops::Deref;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EdgeKind {
    /// Coefficient a², order one.
    Stiff { a: f64 },
    /// Coefficient ε².
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeSpec {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    /// Length fraction; the physical length is ε·length.
    pub length: f64,
    pub kind: EdgeKind,
}

impl EdgeSpec {
    pub fn is_soft(&self) -> bool {
        matches!(self.kind, EdgeKind::Soft)
    }

    /// a^ε: a_e on stiff edges, ε on soft ones.
    pub fn coefficient(&self, epsilon: f64) -> f64 {
        match self.kind {
            EdgeKind::Stiff { a } => a,
            EdgeKind::Soft => epsilon,
        }
    }

    /// a_e for stiff edges, 1 for soft ones (the ε-free coefficient).
    pub fn stiffness(&self) -> f64 {
        match self.kind {
            EdgeKind::Stiff { a } => a,
            EdgeKind::Soft => 1.0,
        }
    }
}

/// w(τ) = coeff·e^{i·rate·τ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseWeight {
    pub coeff: Complex64,
    pub rate: f64,
}

impl PhaseWeight {
    pub const UNIT: PhaseWeight = PhaseWeight { coeff: Complex64::new(1.0, 0.0), rate: 0.0 };

    pub fn phase(rate: f64) -> Self {
        PhaseWeight { coeff: Complex64::new(1.0, 0.0), rate }
    }

    pub fn at(&self, tau: f64) -> Complex64 {
        self.coeff * Complex64::from_polar(1.0, self.rate * tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Tail,
    Head,
}

/// Unvalidated cell. Weights are stored per edge end.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellGraph {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    pub tail_weights: Vec<PhaseWeight>,
    pub head_weights: Vec<PhaseWeight>,
}

impl CellGraph {
    pub fn new<S: Into<String>>(vertices: impl IntoIterator<Item = S>) -> Self {
        CellGraph {
            vertices: vertices.into_iter().map(Into::into).collect(),
            edges: Vec::new(),
            tail_weights: Vec::new(),
            head_weights: Vec::new(),
        }
    }

    pub fn vertex_index(&self, name: &str) -> Result<usize> {
        self.vertices
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn edge_index(&self, id: &str) -> Result<usize> {
        self.edges
            .iter()
            .position(|e| e.id == id)
            .ok_or_else(|| Error::UnknownEdge(id.to_string()))
    }

    /// Adds an edge with unit weights at both ends.
    pub fn add_edge(
        &mut self,
        id: &str,
        tail: &str,
        head: &str,
        length: f64,
        kind: EdgeKind,
    ) -> Result<usize> {
        if self.edges.iter().any(|e| e.id == id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let tail = self.vertex_index(tail)?;
        let head = self.vertex_index(head)?;
        self.edges.push(EdgeSpec { id: id.to_string(), tail, head, length, kind });
        self.tail_weights.push(PhaseWeight::UNIT);
        self.head_weights.push(PhaseWeight::UNIT);
        Ok(self.edges.len() - 1)
    }

    /// Sets w_V(e). For a loop both ends share the value.
    pub fn set_weight(&mut self, vertex: &str, edge: &str, w: PhaseWeight) -> Result<()> {
        let v = self.vertex_index(vertex)?;
        let e = self.edge_index(edge)?;
        let spec = &self.edges[e];
        if spec.tail != v && spec.head != v {
            return Err(Error::NotIncident { vertex: vertex.into(), edge: edge.into() });
        }
        if spec.tail == v {
            self.tail_weights[e] = w;
        }
        if spec.head == v {
            self.head_weights[e] = w;
        }
        Ok(())
    }

    pub fn with_trivial_weights(&self) -> CellGraph {
        let mut g = self.clone();
        g.tail_weights.iter_mut().for_each(|w| *w = PhaseWeight::UNIT);
        g.head_weights.iter_mut().for_each(|w| *w = PhaseWeight::UNIT);
        g
    }
}

/// Validated cell with derived interface and incidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckedCell {
    graph: CellGraph,
    interface: Vec<usize>,
    soft_edges: Vec<usize>,
    stiff_edges: Vec<usize>,
}

impl Deref for CheckedCell {
    type Target = CellGraph;
    fn deref(&self) -> &CellGraph {
        &self.graph
    }
}

fn connected(n: usize, edges: &[(usize, usize)], start: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        if !seen.insert(v) {
            continue;
        }
        for &(a, b) in edges {
            if a == v && !seen.contains(&b) {
                stack.push(b);
            }
            if b == v && !seen.contains(&a) {
                stack.push(a);
            }
        }
    }
    debug_assert!(seen.iter().all(|&v| v < n));
    seen
}

pub fn validate_cell(cell: CellGraph) -> Result<CheckedCell> {
    let mut ids = BTreeSet::new();
    for v in &cell.vertices {
        if !ids.insert(v.clone()) {
            return Err(Error::DuplicateId(v.clone()));
        }
    }
    for e in &cell.edges {
        if !(e.length > 0.0) || !e.length.is_finite() {
            return Err(Error::NonpositiveLength(e.id.clone()));
        }
        if let EdgeKind::Stiff { a } = e.kind {
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::NonpositiveStiffness(e.id.clone()));
            }
        }
    }
    for (i, e) in cell.edges.iter().enumerate() {
        for (w, v) in [(cell.tail_weights[i], e.tail), (cell.head_weights[i], e.head)] {
            if (w.coeff.norm() - 1.0).abs() > 1e-14 || !w.rate.is_finite() {
                return Err(Error::NonUnimodularWeight {
                    vertex: cell.vertices[v].clone(),
                    edge: e.id.clone(),
                });
            }
        }
    }
    if cell.vertices.is_empty() {
        return Err(Error::Disconnected);
    }
    let pairs: Vec<(usize, usize)> = cell.edges.iter().map(|e| (e.tail, e.head)).collect();
    if connected(cell.vertices.len(), &pairs, 0).len() != cell.vertices.len() {
        return Err(Error::Disconnected);
    }
    let soft_edges: Vec<usize> = (0..cell.edges.len()).filter(|&i| cell.edges[i].is_soft()).collect();
    let stiff_edges: Vec<usize> = (0..cell.edges.len()).filter(|&i| !cell.edges[i].is_soft()).collect();
    if soft_edges.is_empty() {
        return Err(Error::MissingSoftEdge);
    }
    if stiff_edges.is_empty() {
        return Err(Error::MissingStiffEdge);
    }
    let touches = |v: usize, set: &[usize]| {
        set.iter().any(|&i| cell.edges[i].tail == v || cell.edges[i].head == v)
    };
    let interface: Vec<usize> = (0..cell.vertices.len())
        .filter(|&v| touches(v, &soft_edges) && touches(v, &stiff_edges))
        .collect();
    if interface.is_empty() {
        return Err(Error::EmptyInterface);
    }
    Ok(CheckedCell { graph: cell, interface, soft_edges, stiff_edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Component {
    Soft,
    Stiff,
}

/// Edge-disjoint sub-cell with its vertex set (indices into the full cell).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubGraph {
    pub component: Component,
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
}

impl SubGraph {
    /// Every connected piece is a tree.
    pub fn is_forest(&self, cell: &CellGraph) -> bool {
        let pairs: Vec<(usize, usize)> =
            self.edges.iter().map(|&e| (cell.edges[e].tail, cell.edges[e].head)).collect();
        let mut remaining: BTreeSet<usize> = self.vertices.iter().copied().collect();
        let mut pieces = 0;
        while let Some(&v) = remaining.iter().next() {
            let comp = connected(cell.vertices.len(), &pairs, v);
            remaining.retain(|x| !comp.contains(x));
            pieces += 1;
        }
        self.edges.len() + pieces == self.vertices.len()
    }

    pub fn is_connected(&self, cell: &CellGraph) -> bool {
        let pairs: Vec<(usize, usize)> =
            self.edges.iter().map(|&e| (cell.edges[e].tail, cell.edges[e].head)).collect();
        match self.vertices.first() {
            Some(&v) => connected(cell.vertices.len(), &pairs, v).len() == self.vertices.len(),
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub soft: SubGraph,
    pub stiff: SubGraph,
    pub interface: Vec<usize>,
    /// 0/1 diagonal selector of interface coordinates in ℂ^|V|.
    pub projector: DMatrix<f64>,
}

impl CheckedCell {
    pub fn graph(&self) -> &CellGraph {
        &self.graph
    }

    pub fn into_graph(self) -> CellGraph {
        self.graph
    }

    pub fn interface(&self) -> &[usize] {
        &self.interface
    }

    pub fn soft_edges(&self) -> &[usize] {
        &self.soft_edges
    }

    pub fn stiff_edges(&self) -> &[usize] {
        &self.stiff_edges
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edges.len()
    }

    /// Continuity weight w_V(e) at the given end.
    pub fn weight(&self, edge: usize, end: End, tau: f64) -> Complex64 {
        match end {
            End::Tail => self.graph.tail_weights[edge].at(tau),
            End::Head => self.graph.head_weights[edge].at(tau),
        }
    }

    /// Flux weight w̃ at the tail end; the head end carries its conjugate.
    pub fn flux_weight(&self, edge: usize, tau: f64) -> Complex64 {
        let l = self.graph.edges[edge].length;
        self.weight(edge, End::Tail, tau)
            * self.weight(edge, End::Head, tau).conj()
            * Complex64::from_polar(1.0, tau * l)
    }

    pub fn subgraph(&self, component: Component) -> SubGraph {
        let edges = match component {
            Component::Soft => self.soft_edges.clone(),
            Component::Stiff => self.stiff_edges.clone(),
        };
        let vertices: BTreeSet<usize> =
            edges.iter().flat_map(|&e| [self.graph.edges[e].tail, self.graph.edges[e].head]).collect();
        SubGraph { component, edges, vertices: vertices.into_iter().collect() }
    }

    pub fn with_trivial_weights(&self) -> CheckedCell {
        CheckedCell { graph: self.graph.with_trivial_weights(), ..self.clone() }
    }
}

pub fn decompose(cell: &CheckedCell) -> Decomposition {
    let n = cell.vertex_count();
    let mut projector = DMatrix::zeros(n, n);
    for &v in cell.interface() {
        projector[(v, v)] = 1.0;
    }
    Decomposition {
        soft: cell.subgraph(Component::Soft),
        stiff: cell.subgraph(Component::Stiff),
        interface: cell.interface().to_vec(),
        projector,
    }
}

/// Gauge for the three-edge example cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gauge {
    /// Phase-carrying lists of the example.
    Example,
    /// w ≡ 1.
    Trivial,
}

/// Two vertices joined by stiff e1 (V2→V1), soft e2 (V1→V2) and stiff
/// e3 (V1→V2).
pub fn example_cell(l1: f64, l2: f64, l3: f64, a1: f64, a3: f64) -> Result<CheckedCell> {
    example_cell_with(l1, l2, l3, a1, a3, Gauge::Example)
}

pub fn example_cell_with(
    l1: f64,
    l2: f64,
    l3: f64,
    a1: f64,
    a3: f64,
    gauge: Gauge,
) -> Result<CheckedCell> {
    for (name, x) in [("l1", l1), ("l2", l2), ("l3", l3), ("a1", a1), ("a3", a3)] {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be positive")));
        }
    }
    let mut g = CellGraph::new(["V1", "V2"]);
    g.add_edge("e1", "V2", "V1", l1, EdgeKind::Stiff { a: a1 })?;
    g.add_edge("e2", "V1", "V2", l2, EdgeKind::Soft)?;
    g.add_edge("e3", "V1", "V2", l3, EdgeKind::Stiff { a: a3 })?;
    if gauge == Gauge::Example {
        g.set_weight("V1", "e3", PhaseWeight::phase(l2 - l3))?;
        g.set_weight("V2", "e1", PhaseWeight::phase(l3))?;
    }
    validate_cell(g)
}

/// Fiber parameters: ε, quasimomentum t and spectral parameter z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberParams {
    pub epsilon: f64,
    pub t: f64,
    pub z: Complex64,
}

impl FiberParams {
    pub fn new(epsilon: f64, t: f64, z: Complex64) -> Self {
        FiberParams { epsilon, t, z }
    }

    pub fn from_tau(epsilon: f64, tau: f64, z: Complex64) -> Self {
        FiberParams { epsilon, t: tau / epsilon, z }
    }

    pub fn tau(&self) -> f64 {
        self.epsilon * self.t
    }

    /// √z with the cut on the negative real axis.
    pub fn k(&self) -> Complex64 {
        crate::numerics::csqrt(self.z)
    }

    pub fn kappa(&self) -> Complex64 {
        self.k() * self.epsilon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex1() -> CheckedCell {
        example_cell(0.4, 0.2, 0.4, 1.0, 1.0).unwrap()
    }

    #[test]
    fn example_interface_is_both_vertices() {
        let c = ex1();
        assert_eq!(c.interface(), &[0, 1]);
        let d = decompose(&c);
        assert_eq!(d.soft.edges, vec![1]);
        assert_eq!(d.stiff.edges, vec![0, 2]);
        assert_eq!(d.projector, DMatrix::identity(2, 2));
    }

    #[test]
    fn example_flux_weights_match_closed_form_lists() {
        let c = ex1();
        let tau = 0.77_f64;
        let e = |x: f64| Complex64::from_polar(1.0, x * tau);
        // tail of e1 is V2, tails of e2 and e3 are V1
        assert!((c.flux_weight(0, tau) - e(0.8)).norm() < 1e-15);
        assert!((c.flux_weight(1, tau) - e(0.2)).norm() < 1e-15);
        assert!((c.flux_weight(2, tau) - e(0.2)).norm() < 1e-15);
    }

    #[test]
    fn weights_are_one_at_zero_quasimomentum() {
        let c = ex1();
        for e in 0..3 {
            assert_eq!(c.weight(e, End::Tail, 0.0), Complex64::new(1.0, 0.0));
            assert_eq!(c.weight(e, End::Head, 0.0), Complex64::new(1.0, 0.0));
            assert_eq!(c.flux_weight(e, 0.0), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn zero_length_rejected() {
        let mut g = CellGraph::new(["A", "B"]);
        g.add_edge("s", "A", "B", 0.0, EdgeKind::Soft).unwrap();
        g.add_edge("t", "B", "A", 1.0, EdgeKind::Stiff { a: 1.0 }).unwrap();
        assert_eq!(validate_cell(g), Err(Error::NonpositiveLength("s".into())));
    }

    #[test]
    fn non_unimodular_rejected() {
        let mut g = CellGraph::new(["A", "B"]);
        g.add_edge("s", "A", "B", 0.5, EdgeKind::Soft).unwrap();
        g.add_edge("t", "B", "A", 0.5, EdgeKind::Stiff { a: 1.0 }).unwrap();
        g.set_weight("A", "s", PhaseWeight { coeff: Complex64::new(0.5, 0.0), rate: 0.0 }).unwrap();
        assert!(matches!(validate_cell(g), Err(Error::NonUnimodularWeight { .. })));
    }

    #[test]
    fn disconnected_and_missing_parts_rejected() {
        let mut g = CellGraph::new(["A", "B", "C"]);
        g.add_edge("s", "A", "B", 0.5, EdgeKind::Soft).unwrap();
        g.add_edge("t", "B", "A", 0.5, EdgeKind::Stiff { a: 1.0 }).unwrap();
        assert_eq!(validate_cell(g), Err(Error::Disconnected));
        let mut g = CellGraph::new(["A", "B"]);
        g.add_edge("s", "A", "B", 0.5, EdgeKind::Soft).unwrap();
        assert_eq!(validate_cell(g), Err(Error::MissingStiffEdge));
        let mut g = CellGraph::new(["A", "B"]);
        g.add_edge("t", "A", "B", 0.5, EdgeKind::Stiff { a: 1.0 }).unwrap();
        assert_eq!(validate_cell(g), Err(Error::MissingSoftEdge));
    }

    #[test]
    fn path_cell_interface_is_the_middle_pair() {
        let mut g = CellGraph::new(["A", "B", "C", "D"]);
        g.add_edge("a", "A", "B", 0.3, EdgeKind::Stiff { a: 1.0 }).unwrap();
        g.add_edge("b", "B", "C", 0.4, EdgeKind::Soft).unwrap();
        g.add_edge("c", "C", "D", 0.3, EdgeKind::Stiff { a: 1.0 }).unwrap();
        let c = validate_cell(g).unwrap();
        assert_eq!(c.interface(), &[1, 2]);
        let d = decompose(&c);
        assert_eq!(d.projector.trace(), 2.0);
        assert!(d.stiff.is_forest(&c));
        assert!(!d.stiff.is_connected(&c));
    }

    #[test]
    fn interior_stiff_vertex_not_on_interface() {
        let mut g = CellGraph::new(["A", "B", "C"]);
        g.add_edge("s", "A", "B", 0.4, EdgeKind::Soft).unwrap();
        g.add_edge("x", "B", "C", 0.3, EdgeKind::Stiff { a: 1.0 }).unwrap();
        g.add_edge("y", "C", "A", 0.3, EdgeKind::Stiff { a: 1.0 }).unwrap();
        let c = validate_cell(g).unwrap();
        assert_eq!(c.interface(), &[0, 1]);
        assert!(c.subgraph(Component::Stiff).vertices.contains(&2));
    }

    #[test]
    fn decomposition_is_an_edge_partition() {
        let c = ex1();
        let d = decompose(&c);
        let mut all: Vec<usize> = d.soft.edges.iter().chain(&d.stiff.edges).copied().collect();
        all.sort();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn fiber_params_relations() {
        let fp = FiberParams::new(0.05, 4.0, Complex64::new(2.25, 0.0));
        assert!((fp.tau() - 0.2).abs() < 1e-15);
        assert!((fp.k() - Complex64::new(1.5, 0.0)).norm() < 1e-15);
        assert!((fp.kappa() - Complex64::new(0.075, 0.0)).norm() < 1e-15);
        let neg = FiberParams::new(0.1, 0.0, Complex64::new(-1.0, 0.0));
        assert!(neg.k().im > 0.0);
    }

    proptest! {
        #[test]
        fn weights_stay_unimodular(tau in -std::f64::consts::PI..std::f64::consts::PI) {
            let c = example_cell(0.3, 0.2, 0.5, 1.0, 2.0).unwrap();
            for e in 0..3 {
                prop_assert!((c.weight(e, End::Tail, tau).norm() - 1.0).abs() < 1e-14);
                prop_assert!((c.weight(e, End::Head, tau).norm() - 1.0).abs() < 1e-14);
                prop_assert!((c.flux_weight(e, tau).norm() - 1.0).abs() < 1e-14);
            }
        }
    }
}
