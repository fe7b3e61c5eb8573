//! Second-order finite differences with Peierls phases, solved by Sturm
//! counting and bisection.

use crate::error::{Error, Result};
use crate::graph_model::{CheckedCell, End};
use crate::numerics::C;

struct Chain {
    tail: usize,
    head: usize,
    /// a²/h.
    stiff: f64,
    h: f64,
    /// Nodes strictly inside the edge.
    inner: usize,
    /// K[i, i+1].
    off: C,
    /// K[first, tail vertex] and K[last, head vertex].
    to_tail: C,
    to_head: C,
}

impl Chain {
    /// Negative pivots of T − σh and corners of (T − σh)⁻¹.
    fn factor(&self, sigma: f64) -> (usize, [C; 4]) {
        let n = self.inner;
        let d0 = 2.0 * self.stiff - sigma * self.h;
        let o2 = self.off.norm_sqr();
        let mut d = Vec::with_capacity(n);
        let mut neg = 0;
        for i in 0..n {
            let mut di = if i == 0 { d0 } else { d0 - o2 / d[i - 1] };
            if di == 0.0 {
                di = 1e-300;
            }
            if di < 0.0 {
                neg += 1;
            }
            d.push(di);
        }
        // l_i = conj(off)/d_i is the unit-lower factor
        let solve = |rhs: usize| -> Vec<C> {
            let mut y = vec![C::default(); n];
            y[rhs] = C::new(1.0, 0.0);
            for i in (rhs + 1)..n {
                y[i] = -(self.off.conj() / d[i - 1]) * y[i - 1];
            }
            let mut x: Vec<C> = y.iter().zip(&d).map(|(a, b)| a / b).collect();
            for i in (0..n - 1).rev() {
                let upd = (self.off / d[i]) * x[i + 1];
                x[i] -= upd;
            }
            x
        };
        let x1 = solve(0);
        let xn = solve(n - 1);
        (neg, [x1[0], xn[0], x1[n - 1], xn[n - 1]])
    }
}

struct FdSystem {
    chains: Vec<Chain>,
    vertex_diag: Vec<f64>,
    vertex_mass: Vec<f64>,
}

impl FdSystem {
    fn new(cell: &CheckedCell, eps: f64, t: f64, n: usize) -> Self {
        let tau = eps * t;
        let m = cell.vertex_count();
        let mut vertex_diag = vec![0.0; m];
        let mut vertex_mass = vec![0.0; m];
        let chains = cell
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let a = e.coefficient(eps);
                let h = eps * e.length / n as f64;
                let stiff = a * a / h;
                for v in [e.tail, e.head] {
                    vertex_diag[v] += stiff;
                    vertex_mass[v] += 0.5 * h;
                }
                let ph = C::from_polar(1.0, t * h);
                Chain {
                    tail: e.tail,
                    head: e.head,
                    stiff,
                    h,
                    inner: n - 1,
                    off: -ph * stiff,
                    to_tail: -ph.conj() * stiff * cell.weight(i, End::Tail, tau).conj(),
                    to_head: -ph * stiff * cell.weight(i, End::Head, tau).conj(),
                }
            })
            .collect();
        FdSystem { chains, vertex_diag, vertex_mass }
    }

    /// Eigenvalues of the pencil (K, Mass) strictly below σ.
    fn count(&self, sigma: f64) -> usize {
        let m = self.vertex_diag.len();
        let mut s = nalgebra::DMatrix::<C>::zeros(m, m);
        for v in 0..m {
            s[(v, v)] = C::new(self.vertex_diag[v] - sigma * self.vertex_mass[v], 0.0);
        }
        let mut neg = 0;
        for c in &self.chains {
            let (k, [g11, g1n, gn1, gnn]) = c.factor(sigma);
            neg += k;
            // S −= C^H T⁻¹ C with C nonzero only in rows first/last
            let (ct, ch) = (c.to_tail, c.to_head);
            s[(c.tail, c.tail)] -= ct.conj() * g11 * ct;
            s[(c.tail, c.head)] -= ct.conj() * g1n * ch;
            s[(c.head, c.tail)] -= ch.conj() * gn1 * ct;
            s[(c.head, c.head)] -= ch.conj() * gnn * ch;
        }
        neg + crate::numerics::hermitian_eigenvalues(&s).iter().filter(|&&l| l < 0.0).count()
    }
}

/// Lowest `n_max` eigenvalues of the discretised fiber operator with `n`
/// intervals per edge.
pub fn fd_oracle_eigenvalues(cell: &CheckedCell, eps: f64, t: f64, n: usize, n_max: usize) -> Result<Vec<f64>> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 intervals per edge, got {n}")));
    }
    let sys = FdSystem::new(cell, eps, t, n);
    let mut out = Vec::with_capacity(n_max);
    let mut lo = -1.0;
    if sys.count(lo) != 0 {
        return Err(Error::SingularSystem("negative discrete eigenvalues".into()));
    }
    for j in 0..n_max {
        let mut hi = lo.max(1.0) * 2.0;
        while sys.count(hi) <= j {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::SingularSystem("discrete spectrum exhausted".into()));
            }
        }
        let mut a = lo;
        while hi - a > 1e-13 * hi.abs().max(1.0) {
            let mid = 0.5 * (a + hi);
            if sys.count(mid) > j {
                hi = mid;
            } else {
                a = mid;
            }
        }
        let z = 0.5 * (a + hi);
        out.push(z);
        lo = a;
    }
    Ok(out)
}
