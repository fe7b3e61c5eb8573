use std::f64::consts::PI;

use proptest::prelude::*;
use qghom_core::graph_model::{example_cell, validate_cell, CellGraph, CheckedCell, EdgeKind, PhaseWeight};
use qghom_core::numerics::C;
use qghom_core::spectral_solver::{eigenvalue_count, fiber_eigenvalues, fiber_eigenvector, z_bound_for};
use qghom_core::verify::{gap_convergence, greens_residual, pair_symmetry_residual, weyl_checks};

fn triangle(l: [f64; 3], a: [f64; 2], rate: f64) -> CheckedCell {
    let mut g = CellGraph::new(["A", "B", "C"]);
    g.add_edge("s", "A", "B", l[0], EdgeKind::Soft).unwrap();
    g.add_edge("k1", "B", "C", l[1], EdgeKind::Stiff { a: a[0] }).unwrap();
    g.add_edge("k2", "C", "A", l[2], EdgeKind::Stiff { a: a[1] }).unwrap();
    g.set_weight("A", "k2", PhaseWeight::phase(rate)).unwrap();
    validate_cell(g).unwrap()
}

#[test]
fn gap_edges_converge_to_limit_bands() {
    let rep = gap_convergence(&example_cell(0.4, 0.2, 0.4, 1.0, 1.0).unwrap(), &[0.04, 0.02, 0.01], 400.0, 101).unwrap();
    let limit_gap = [rep.limit_bands[0][1], rep.limit_bands[1][0]];
    let at = |eps: f64| rep.points.iter().find(|p| p.epsilon == eps).unwrap();
    let s = &at(0.02).spectrum;
    for (x, y) in [s[0][1], s[1][0]].iter().zip(&limit_gap) {
        assert!((x - y).abs() <= 0.05 * y, "{x} vs {y}");
    }
    let s = &at(0.01).spectrum;
    assert_eq!(s[0][0], 0.0);
    assert!((s[0][1] - 25.0 * PI * PI).abs() <= 2.0);
    for w in rep.points.windows(2) {
        assert!(w[0].distance / w[1].distance >= 1.8, "{} / {}", w[0].distance, w[1].distance);
    }
    assert!(rep.fit.unwrap().slope >= 0.9);
}

#[test]
fn eigenvectors_are_orthogonal_and_symmetric() {
    let cell = triangle([0.3, 0.4, 0.3], [1.5, 0.7], 1.0);
    let (eps, t) = (0.2, 2.5);
    let zs = fiber_eigenvalues(&cell, eps, t, z_bound_for(&cell, eps, t, 4).unwrap(), 4).unwrap();
    let mut v: Vec<_> = zs.iter().map(|&z| fiber_eigenvector(&cell, eps, t, z).unwrap()).collect();
    v.iter_mut().for_each(|p| p.normalize());
    for i in 0..v.len() {
        for j in 0..v.len() {
            let ip = v[i].inner(&v[j]).norm();
            if i == j {
                assert!((ip - 1.0).abs() < 1e-10);
            } else {
                assert!(ip < 1e-7, "<v{i}, v{j}> = {ip}");
            }
            assert!(pair_symmetry_residual(&cell, &v[i], &v[j]) <= 1e-7);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn boundary_triple_on_random_triangles(
        l0 in 0.1f64..0.5, l1 in 0.1f64..0.5, l2 in 0.1f64..0.5,
        a0 in 0.5f64..2.0, a1 in 0.5f64..2.0,
        rate in -1.0f64..1.0,
        eps in 0.05f64..0.3, tau in -PI..PI,
        seed in 0u64..1000,
    ) {
        let cell = triangle([l0, l1, l2], [a0, a1], rate);
        let t = tau / eps;
        prop_assert!(greens_residual(&cell, eps, t, 5, seed) <= 1e-8);
        let zs = [C::new(3.0, 1.0), C::new(-20.0, 0.5), C::new(150.0, 7.0)];
        let w = weyl_checks(&cell, eps, t, &zs, seed).unwrap();
        prop_assert!(w.defining_residual <= 1e-9);
        prop_assert!(w.min_imaginary_eigenvalue >= -1e-10);
        prop_assert!(w.hermitian_below_spectrum <= 1e-10);
    }

    #[test]
    fn counting_function_matches_eigenvalue_list(eps in 0.05f64..0.3, tau in -PI..PI) {
        let cell = triangle([0.3, 0.4, 0.3], [1.5, 0.7], 1.0);
        let t = tau / eps;
        let zs = fiber_eigenvalues(&cell, eps, t, 800.0, 50).unwrap();
        for w in zs.windows(2) {
            if w[1] - w[0] > 1e-6 {
                let mid = 0.5 * (w[0] + w[1]);
                let below = zs.iter().filter(|&&z| z < mid).count();
                prop_assert_eq!(eigenvalue_count(&cell, eps, t, mid).unwrap(), below);
            }
        }
    }
}
