mod common;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

use conres::graph::direct_sum;
use conres::linalg::{
    complete_orthonormal, default_rank_tol, numerical_nullity, orthogonality_deviation,
    pseudoinverse, schur_complement, IndexSet,
};
use conres::{BlockVector, ConnectionGraph, Error, Signature, WeightedGraph};

#[test]
fn laplacian_matches_entrywise_assembly() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let n = 3 + seed as usize % 6;
        let d = 1 + seed as usize % 3;
        let topo = random_topology(&mut r, n, 0.4);
        let edges = random_edges(&mut r, &topo, d);
        let cg = build(n, d, &edges);
        assert!(max_abs_diff(&cg.laplacian(), &dense_laplacian(n, d, &edges)) < 1e-14);
    }
}

#[test]
fn unit_triangle_reduces_to_classical_laplacian() {
    let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    assert_eq!(g.degrees(), &[2.0, 2.0, 2.0]);
    let cg = ConnectionGraph::new(g.clone(), Signature::identity(&g, 1).unwrap()).unwrap();
    let want = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
    assert_eq!(cg.laplacian(), want);
}

#[test]
fn single_rotated_edge() {
    let theta = 0.7_f64;
    let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
    let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
    let cg = ConnectionGraph::new(g, Signature::new(2, [(0, 1, rot.clone())]).unwrap()).unwrap();
    let mut want = DMatrix::identity(4, 4);
    want.view_mut((0, 2), (2, 2)).copy_from(&(-&rot));
    want.view_mut((2, 0), (2, 2)).copy_from(&(-rot.transpose()));
    assert!(max_abs_diff(&cg.laplacian(), &want) < 1e-15);
}

#[test]
fn construction_errors() {
    assert_eq!(
        WeightedGraph::new(2, [(0, 1, 1.0), (0, 1, 2.0)]).unwrap_err(),
        Error::DuplicateEdge(0, 1)
    );
    assert_eq!(
        WeightedGraph::new(4, [(0, 1, 1.0), (2, 3, 1.0)]).unwrap_err(),
        Error::DisconnectedGraph { components: 2 }
    );
    assert!(matches!(
        WeightedGraph::new(3, [(0, 1, 0.0), (1, 2, 1.0)]),
        Err(Error::NonpositiveWeight { .. })
    ));
    let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
    let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
    assert!(matches!(
        Signature::new(2, [(0, 1, skew)]),
        Err(Error::NonOrthogonalSignature { .. })
    ));
    let other = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
    assert_eq!(
        ConnectionGraph::new(other, Signature::identity(&g, 2).unwrap()).unwrap_err(),
        Error::EdgeSetMismatch
    );
}

#[test]
fn consistent_spectrum_repeats_classical_spectrum() {
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let n = 4 + seed as usize % 4;
        let d = 2 + seed as usize % 2;
        let topo = random_topology(&mut r, n, 0.4);
        let cg = build(n, d, &consistent_edges(&mut r, n, &topo, d));
        let classical = sorted_eigenvalues(&cg.graph().laplacian());
        let mut repeated: Vec<f64> = classical
            .iter()
            .flat_map(|&x| std::iter::repeat_n(x, d))
            .collect();
        repeated.sort_by(f64::total_cmp);
        assert!(spectra_close(
            &sorted_eigenvalues(&cg.laplacian()),
            &repeated,
            1e-10
        ));
    }
}

#[test]
fn quadratic_form_matches_dense_product() {
    for seed in 0..10 {
        let cg = random_instance(200 + seed, 6, 2);
        let mut r = rng(seed);
        let f = DMatrix::from_fn(12, 2, |_, _| rand::Rng::gen_range(&mut r, -1.0..1.0));
        let q = cg
            .quadratic_form(&BlockVector::new(6, 2, f.clone()).unwrap())
            .unwrap();
        let want = f.transpose() * dense_laplacian(6, 2, &edges_of(&cg)) * &f;
        assert!(max_abs_diff(&q, &want) < 1e-12);
        assert!(
            cg.quadratic_form(&BlockVector::zeros(6, 2, 2))
                .unwrap()
                .abs()
                .max()
                == 0.0
        );
    }
}

#[test]
fn transported_constant_has_zero_energy() {
    let mut r = rng(7);
    let topo = random_topology(&mut r, 6, 0.5);
    let cg = build(6, 3, &consistent_edges(&mut r, 6, &topo, 3));
    // sigma_ij = g_i^T g_j, so f(i) = g_i^T satisfies f(i) = sigma_ij f(j)
    let t: Vec<DMatrix<f64>> = conres::decompose::tree_transport(&cg, None)
        .iter()
        .map(|g| g.transpose())
        .collect();
    let f = BlockVector::from_blocks(&t).unwrap();
    assert!(cg.quadratic_form(&f).unwrap().abs().max() < 1e-12);
}

#[test]
fn switching_preserves_spectrum_and_inverts() {
    for seed in 0..10 {
        let cg = random_instance(300 + seed, 5, 3);
        let mut r = rng(seed);
        let f: Vec<DMatrix<f64>> = (0..5).map(|_| random_orthogonal(&mut r, 3)).collect();
        let sw = cg.apply_switching(&f).unwrap();
        assert!(spectra_close(
            &sorted_eigenvalues(&sw.laplacian()),
            &sorted_eigenvalues(&cg.laplacian()),
            1e-10
        ));
        let inv: Vec<DMatrix<f64>> = f.iter().map(|m| m.transpose()).collect();
        let back = sw.apply_switching(&inv).unwrap();
        assert!(max_abs_diff(&back.laplacian(), &cg.laplacian()) < 1e-12);
        let ident: Vec<DMatrix<f64>> = (0..5).map(|_| DMatrix::identity(3, 3)).collect();
        assert_eq!(
            cg.apply_switching(&ident).unwrap().laplacian(),
            cg.laplacian()
        );
    }
}

#[test]
fn direct_sum_spectrum_is_union() {
    let a = random_instance(400, 5, 2);
    let mut r = rng(401);
    let b_edges = random_edges(&mut r, &topology_of(&a), 1);
    let b = build(5, 1, &b_edges);
    let sum = a.direct_sum(&b).unwrap();
    assert_eq!(sum.d(), 3);
    let mut union = sorted_eigenvalues(&a.laplacian());
    union.extend(sorted_eigenvalues(&b.laplacian()));
    union.sort_by(f64::total_cmp);
    assert!(spectra_close(
        &sorted_eigenvalues(&sum.laplacian()),
        &union,
        1e-10
    ));
    for e in sum.graph().edges() {
        assert_eq!(
            sum.sigma(e.v, e.u).unwrap(),
            &sum.sigma(e.u, e.v).unwrap().transpose()
        );
    }
    let g = a.graph();
    let id = direct_sum(
        &Signature::identity(g, 1).unwrap(),
        &Signature::identity(g, 1).unwrap(),
    )
    .unwrap();
    assert_eq!(id, Signature::identity(g, 2).unwrap());
}

#[test]
fn pseudoinverse_matches_jacobi_and_penrose() {
    for seed in 0..10 {
        let cg = random_instance(500 + seed, 5, 2);
        let mut r = rng(seed);
        let topo = topology_of(&cg);
        // singular input: consistent signature
        let cons = build(5, 2, &consistent_edges(&mut r, 5, &topo, 2));
        for l in [cg.laplacian(), cons.laplacian()] {
            let p = pseudoinverse(&l, default_rank_tol(10));
            assert!(max_abs_diff(&p, &pinv_sym(&l, 1e-10)) < 1e-9);
            assert!(max_abs_diff(&(&l * &p * &l), &l) < 1e-8);
            assert!(max_abs_diff(&(&p * &l * &p), &p) < 1e-8);
            assert!(max_abs_diff(&(&l * &p), &(&l * &p).transpose()) < 1e-8);
            assert!(max_abs_diff(&(&p * &l), &(&p * &l).transpose()) < 1e-8);
        }
    }
    let m = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    assert!(max_abs_diff(&pseudoinverse(&m, 1e-12), &(m.clone() * 0.25)) < 1e-15);
}

#[test]
fn schur_complement_matches_lu_elimination() {
    for seed in 0..10 {
        let n = 6;
        let cg = random_instance(600 + seed, n, 2);
        let l = cg.laplacian();
        let keep = [1usize, 4];
        let s = schur_complement(&l, &IndexSet::new([0, 2, 3, 5], n).unwrap(), 2, false).unwrap();
        assert!(max_abs_diff(&s, &schur_lu(&l, 2, &keep)) < 1e-10);
    }
}

#[test]
fn quotient_identity_holds_on_nested_sets() {
    let cg = random_instance(700, 7, 2);
    let l = cg.laplacian();
    let h = IndexSet::new([2, 5], 7).unwrap();
    let d_set = IndexSet::new([0, 2, 3, 5], 7).unwrap();
    let one_shot = schur_complement(&l, &d_set, 2, false).unwrap();
    let partial = schur_complement(&l, &h, 2, false).unwrap();
    // after removing {2,5} the survivors 0,1,3,4,6 sit at 0..5; 0 and 3 sit at 0 and 2
    let second = schur_complement(&partial, &IndexSet::new([0, 2], 5).unwrap(), 2, false).unwrap();
    assert!(max_abs_diff(&one_shot, &second) < 1e-10);
}

#[test]
fn triangle_schur_example() {
    let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
    let s = schur_complement(&g.laplacian(), &IndexSet::new([2], 3).unwrap(), 1, false).unwrap();
    assert!(max_abs_diff(&s, &DMatrix::from_row_slice(2, 2, &[1.5, -1.5, -1.5, 1.5])) < 1e-15);
}

#[test]
fn engineered_instances_have_planted_nullity() {
    for seed in 0..12 {
        let mut r = rng(800 + seed);
        let d = 3;
        let rho = seed as usize % 3;
        let topo = random_topology(&mut r, 6, 0.3);
        let l = dense_laplacian(6, d, &engineered_edges(&mut r, 6, &topo, d, rho));
        assert_eq!(
            numerical_nullity(&l, default_rank_tol(18)),
            rho,
            "seed {seed}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completion_is_orthogonal(seed in 0u64..10_000, d in 2usize..6, k in 0usize..6) {
        let k = k.min(d);
        let mut r = rng(seed);
        let q = random_orthogonal(&mut r, d);
        let partial = q.columns(0, k).into_owned();
        let full = complete_orthonormal(&partial).unwrap();
        prop_assert!(orthogonality_deviation(&full) < 1e-10);
        prop_assert!(max_abs_diff(&full.columns(0, k).into_owned(), &partial) < 1e-12);
    }

    #[test]
    fn pseudoinverse_of_random_psd(seed in 0u64..10_000, n in 1usize..7, rank in 0usize..7) {
        let rank = rank.min(n);
        let mut r = rng(seed);
        let b = DMatrix::from_fn(n, rank, |_, _| rand::Rng::gen_range(&mut r, -1.0..1.0));
        let m = &b * b.transpose();
        let p = pseudoinverse(&m, 1e-9);
        let scale = 1.0 + m.abs().max() + p.abs().max();
        prop_assert!(max_abs_diff(&(&m * &p * &m), &m) < 1e-8 * scale * scale);
        prop_assert!(max_abs_diff(&(&p * &m * &p), &p) < 1e-8 * scale * scale * scale);
    }

    #[test]
    fn laplacian_is_psd_with_transposed_reverse(seed in 0u64..10_000, n in 3usize..7, d in 1usize..4) {
        let cg = random_instance(seed, n, d);
        prop_assert!(sorted_eigenvalues(&cg.laplacian())[0] > -1e-10);
        for e in cg.graph().edges() {
            prop_assert_eq!(cg.sigma(e.v, e.u).unwrap(), &cg.sigma(e.u, e.v).unwrap().transpose());
        }
    }
}
