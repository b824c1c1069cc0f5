//! Consistency, nullity and the decomposition of a signature into a trivial
//! part and an absolutely inconsistent part.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{ConnectionGraph, Signature};
use crate::linalg::{
    complete_orthonormal, default_rank_tol, orthogonality_deviation, sorted_eigen,
    symmetric_eigenvalues,
};
use crate::meanpath::omega1_loop;

/// Tolerance on per-vertex orthonormality of scaled kernel blocks and on
/// reconstructed switching matrices.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

/// Tolerance on cycle holonomies in [`cycle_product_check`].
pub const HOLONOMY_TOL: f64 = 1e-8;

fn rank_tol(cg: &ConnectionGraph) -> f64 {
    default_rank_tol(cg.n() * cg.d())
}

/// Nullity of the connection Laplacian: eigenvalues at most `rank_tol * lambda_max`.
pub fn nullity(cg: &ConnectionGraph) -> usize {
    nullity_with_tol(cg, rank_tol(cg))
}

pub fn nullity_with_tol(cg: &ConnectionGraph, tol: f64) -> usize {
    crate::linalg::numerical_nullity(&cg.laplacian(), tol)
}

/// Consistent iff the nullity equals `d` (the graph is connected).
pub fn is_consistent(cg: &ConnectionGraph) -> bool {
    nullity(cg) == cg.d()
}

/// `g(x)` = product of signatures along the BFS tree path from vertex 0 to
/// `x`. Switching by `g` turns every tree edge into `I`.
pub fn tree_transport(cg: &ConnectionGraph, skip_edge: Option<usize>) -> Vec<DMatrix<f64>> {
    let d = cg.d();
    let (parent, order) = cg.graph().bfs_tree(0, skip_edge);
    let mut g = vec![DMatrix::identity(d, d); cg.n()];
    for &x in order.iter().skip(1) {
        let (p, _) = parent[x].expect("connected graph");
        g[x] = &g[p] * cg.sigma(p, x).expect("tree edge");
    }
    g
}

/// Holonomy `g(u) sigma_uv g(v)^T` of the fundamental cycle of each non-tree
/// edge `(u, v)`.
pub fn fundamental_holonomies(cg: &ConnectionGraph) -> Vec<((usize, usize), DMatrix<f64>)> {
    let g = tree_transport(cg, None);
    let (parent, _) = cg.graph().bfs_tree(0, None);
    let tree: std::collections::HashSet<usize> = parent.iter().flatten().map(|&(_, e)| e).collect();
    cg.graph()
        .edges()
        .iter()
        .enumerate()
        .filter(|(k, _)| !tree.contains(k))
        .map(|(_, e)| {
            (
                (e.u, e.v),
                &g[e.u] * cg.sigma(e.u, e.v).expect("edge") * g[e.v].transpose(),
            )
        })
        .collect()
}

/// Largest entrywise deviation of a fundamental-cycle holonomy from `I`.
pub fn cycle_product_check(cg: &ConnectionGraph) -> f64 {
    let d = cg.d();
    fundamental_holonomies(cg)
        .into_iter()
        .map(|(_, h)| (h - DMatrix::<f64>::identity(d, d)).abs().max())
        .fold(0.0, f64::max)
}

/// Signature product along a tree path from `i` to `j`; equals the product
/// along any path when the signature is consistent.
pub fn path_product(cg: &ConnectionGraph, i: usize, j: usize) -> Result<DMatrix<f64>> {
    cg.graph().check_vertex(i)?;
    cg.graph().check_vertex(j)?;
    let g = tree_transport(cg, None);
    Ok(g[i].transpose() * &g[j])
}

/// Signature with `I` on every BFS tree edge (rooted at vertex 0), together
/// with the switching map realizing the equivalence.
pub fn spanning_tree_simplify(
    cg: &ConnectionGraph,
) -> Result<(ConnectionGraph, Vec<DMatrix<f64>>)> {
    let g = tree_transport(cg, None);
    Ok((cg.apply_switching(&g)?, g))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub rho: usize,
    /// `h(x) = [F_x, G_x]^T`: applying it to `sigma` yields `I_rho ⊕ tau` on
    /// every edge.
    pub switching: Vec<DMatrix<f64>>,
    /// Absolutely inconsistent component of dimension `d - rho`; `None` when
    /// `sigma` is consistent.
    pub tau: Option<Signature>,
}

impl DecompositionResult {
    /// `(⊕_rho iota^1) ⊕ tau` on the graph of `cg`.
    pub fn reconstruction(&self, cg: &ConnectionGraph) -> Result<ConnectionGraph> {
        let g = cg.graph();
        let trivial = Signature::identity(g, self.rho);
        match (&self.tau, trivial) {
            (None, Ok(t)) => cg.with_signature(t),
            (Some(tau), Ok(t)) => cg.with_signature(crate::graph::direct_sum(&t, tau)?),
            (Some(tau), Err(_)) => cg.with_signature(tau.clone()),
            (None, Err(e)) => Err(e),
        }
    }

    /// The absolutely inconsistent component as a connection graph.
    pub fn tau_graph(&self, cg: &ConnectionGraph) -> Result<Option<ConnectionGraph>> {
        self.tau
            .as_ref()
            .map(|t| cg.with_signature(t.clone()))
            .transpose()
    }
}

/// Split `sigma` into `(⊕_rho iota^1) ⊕ tau` with `tau` absolutely
/// inconsistent.
///
/// Kernel eigenvectors of `L` scaled by `sqrt(n)` have orthonormal
/// columns at every vertex; completing those blocks `F_x` to orthogonal
/// `[F_x, G_x]` gives `tau_xy = G_x^T sigma_xy G_y`.
pub fn decompose_signature(cg: &ConnectionGraph) -> Result<DecompositionResult> {
    let (n, d) = (cg.n(), cg.d());
    let l = cg.laplacian();
    let (vals, vecs) = sorted_eigen(&l);
    let cutoff = rank_tol(cg) * vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let rho = vals.iter().filter(|&&v| v <= cutoff).count();
    if rho == 0 {
        return Ok(DecompositionResult {
            rho,
            switching: vec![DMatrix::identity(d, d); n],
            tau: Some(cg.signature().clone()),
        });
    }
    if rho > d {
        return Err(Error::KernelDegeneracy(rho as f64));
    }
    let scale = (n as f64).sqrt();
    let mut switching = Vec::with_capacity(n);
    let mut completions = Vec::with_capacity(n);
    for x in 0..n {
        let fx = vecs.view((x * d, 0), (d, rho)) * scale;
        let dev = orthogonality_deviation(&fx);
        if dev > DECOMPOSITION_TOL {
            return Err(Error::KernelDegeneracy(dev));
        }
        let full = complete_orthonormal(&fx)?;
        completions.push(full.columns(rho, d - rho).into_owned());
        switching.push(full.transpose());
    }
    let tau = if rho == d {
        None
    } else {
        let entries = cg.signature().iter().map(|(&(u, v), s)| {
            let t = completions[u].transpose() * s * &completions[v];
            (u, v, polar_orthogonal(&t))
        });
        Some(Signature::new(d - rho, entries)?)
    };
    Ok(DecompositionResult {
        rho,
        switching,
        tau,
    })
}

/// Nearest orthogonal matrix, removing round-off from products of
/// numerically orthogonal factors.
fn polar_orthogonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    // Newton iteration X <- (X + X^{-T}) / 2 converges quadratically from a
    // nearly orthogonal start.
    let mut x = m.clone();
    for _ in 0..8 {
        let Some(inv) = x.clone().try_inverse() else {
            break;
        };
        let next = (&x + inv.transpose()) * 0.5;
        let step = (&next - &x).abs().max();
        x = next;
        if step < 1e-15 {
            break;
        }
    }
    x
}

/// Normal form of a cycle signature.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleClassification {
    /// Number of `iota^1` summands.
    pub plus_one: usize,
    /// Number of `iota^{-1}` summands.
    pub minus_one: usize,
    /// Rotation angles in `(0, pi)`, ascending.
    pub angles: Vec<f64>,
    /// The edge carrying the holonomy after switching (oriented `u -> v`).
    pub edge: (usize, usize),
    /// Block diagonal `I ⊕ -I ⊕ R(theta_1) ⊕ ...`.
    pub normal_form: DMatrix<f64>,
    /// Switching map taking `sigma` to the normal-form signature.
    pub switching: Vec<DMatrix<f64>>,
}

impl CycleClassification {
    /// Signature equal to `normal_form` on [`Self::edge`] and `I` elsewhere.
    pub fn reconstruction(&self, cg: &ConnectionGraph) -> Result<ConnectionGraph> {
        let d = cg.d();
        let (a, b) = self.edge;
        let entries = cg.signature().iter().map(|(&(u, v), _)| {
            let m = if (u, v) == (a, b) {
                self.normal_form.clone()
            } else if (u, v) == (b, a) {
                self.normal_form.transpose()
            } else {
                DMatrix::identity(d, d)
            };
            (u, v, m)
        });
        cg.with_signature(Signature::new(d, entries)?)
    }
}

const UNIT_EIGEN_TOL: f64 = 1e-10;

/// Classify the signature of a cycle graph up to switching as
/// `(⊕ iota^1) ⊕ (⊕ iota^{-1}) ⊕ R(theta_1) ⊕ ... ⊕ R(theta_k)`.
///
/// The holonomy `Q` is block-diagonalized through the symmetric part
/// `(Q + Q^T)/2`, whose eigenvalue `cos(theta)` eigenspaces are exactly the
/// invariant planes of `Q`.
pub fn classify_cycle_signature(cg: &ConnectionGraph) -> Result<CycleClassification> {
    let g = cg.graph();
    let n = g.n();
    if g.edges().len() != n || (0..n).any(|x| g.neighbors(x).len() != 2) {
        return Err(Error::NotACycle);
    }
    let d = cg.d();
    let b = g
        .neighbors(0)
        .iter()
        .map(|&(y, _)| y)
        .min()
        .expect("degree 2");
    let skip = g.edge_index(0, b).expect("edge to neighbor");
    let t = tree_transport(cg, Some(skip));
    let q = &t[0] * cg.sigma(0, b).expect("edge") * t[b].transpose();
    let s = (&q + q.transpose()) * 0.5;
    let (vals, vecs) = sorted_eigen(&s);

    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut planes: Vec<(f64, DMatrix<f64>, DMatrix<f64>)> = Vec::new();
    let mut chosen: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut k = 0;
    while k < d {
        let mut end = k + 1;
        while end < d && (vals[end] - vals[k]).abs() <= 1e-8 {
            end += 1;
        }
        let c = vals[k..end].iter().sum::<f64>() / (end - k) as f64;
        if (c - 1.0).abs() <= UNIT_EIGEN_TOL || (c + 1.0).abs() <= UNIT_EIGEN_TOL {
            for m in k..end {
                let v = vecs.column(m).into_owned();
                if c > 0.0 {
                    plus.push(v);
                } else {
                    minus.push(v);
                }
            }
        } else {
            let mut local: Vec<nalgebra::DVector<f64>> = Vec::new();
            for m in k..end {
                let mut v = vecs.column(m).into_owned();
                for u in local.iter().chain(chosen.iter()) {
                    v -= u * u.dot(&v);
                }
                let norm = v.norm();
                if norm < 0.5 {
                    continue;
                }
                v /= norm;
                let qv = &q * &v;
                let cv = v.dot(&qv);
                let mut w = &qv - &v * cv;
                let sn = w.norm();
                w /= sn;
                let theta = sn.atan2(cv);
                local.push(v.clone());
                local.push(w.clone());
                planes.push((
                    theta,
                    DMatrix::from_columns(&[v]),
                    DMatrix::from_columns(&[w]),
                ));
            }
            chosen.extend(local);
        }
        k = end;
    }
    if plus.len() + minus.len() + 2 * planes.len() != d {
        return Err(Error::KernelDegeneracy(
            (plus.len() + minus.len() + 2 * planes.len()) as f64,
        ));
    }
    planes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cols: Vec<nalgebra::DVector<f64>> = plus.iter().chain(minus.iter()).cloned().collect();
    for (_, v, w) in &planes {
        cols.push(v.column(0).into_owned());
        cols.push(w.column(0).into_owned());
    }
    let p = DMatrix::from_columns(&cols);
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    blocks.extend(plus.iter().map(|_| DMatrix::identity(1, 1)));
    blocks.extend(minus.iter().map(|_| -DMatrix::identity(1, 1)));
    blocks.extend(
        planes
            .iter()
            .map(|(theta, _, _)| crate::linalg::rotation2(*theta)),
    );
    let normal_form = crate::linalg::block_diagonal(&blocks);
    let switching = t.iter().map(|tx| p.transpose() * tx).collect();
    Ok(CycleClassification {
        plus_one: plus.len(),
        minus_one: minus.len(),
        angles: planes.iter().map(|p| p.0).collect(),
        edge: (0, b),
        normal_form,
        switching,
    })
}

/// Outcome of comparing the two absolute-inconsistency criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsoluteInconsistencyReport {
    pub absolutely_inconsistent: bool,
    pub nullity: usize,
    /// `lambda_min(L) / lambda_max(L)`.
    pub spectral_margin: f64,
    /// `min_x lambda_min(I - Omega^1_x)`.
    pub min_margin: f64,
}

/// Compare invertibility of `L` with positive definiteness of `I - Omega^1_x`
/// at every vertex.
pub fn absolute_inconsistency_report(cg: &ConnectionGraph) -> Result<AbsoluteInconsistencyReport> {
    let tol = rank_tol(cg);
    let vals = symmetric_eigenvalues(&cg.laplacian());
    let lmax = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let spectral_margin = vals[0] / lmax;
    let nullity = vals.iter().filter(|&&v| v <= tol * lmax).count();
    let mut min_margin = f64::INFINITY;
    for x in 0..cg.n() {
        let m = DMatrix::identity(cg.d(), cg.d()) - omega1_loop(cg, x)?.value;
        min_margin = min_margin.min(symmetric_eigenvalues(&m)[0]);
    }
    let by_spectrum = nullity == 0;
    let by_loops = min_margin > tol;
    if by_spectrum != by_loops {
        // Both margins inside the same tolerance band is a rank ambiguity
        // rather than a contradiction; trust the spectrum there.
        let clear = spectral_margin > 100.0 * tol || min_margin > 100.0 * tol;
        if clear {
            return Err(Error::CriterionMismatch {
                nullity,
                min_margin,
            });
        }
    }
    Ok(AbsoluteInconsistencyReport {
        absolutely_inconsistent: by_spectrum,
        nullity,
        spectral_margin,
        min_margin,
    })
}

pub fn is_absolutely_inconsistent(cg: &ConnectionGraph) -> Result<bool> {
    Ok(absolute_inconsistency_report(cg)?.absolutely_inconsistent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::cycle;
    use crate::graph::WeightedGraph;
    use crate::linalg::rotation2;
    use std::f64::consts::PI;

    fn spectrum(cg: &ConnectionGraph) -> Vec<f64> {
        symmetric_eigenvalues(&cg.laplacian())
    }

    #[test]
    fn nullity_of_cycles() {
        assert_eq!(nullity(&cycle(4, 0.0).unwrap()), 2);
        assert_eq!(nullity(&cycle(4, 1.0).unwrap()), 0);
        assert!(is_consistent(&cycle(3, 2.0 * PI).unwrap()));
        assert!(!is_consistent(&cycle(3, PI).unwrap()));
    }

    #[test]
    fn tree_is_always_consistent() {
        let g = WeightedGraph::new(4, [(0, 1, 1.0), (1, 2, 2.0), (1, 3, 0.5)]).unwrap();
        let sig = Signature::new(
            2,
            [
                (0, 1, rotation2(0.3)),
                (1, 2, rotation2(2.0)),
                (1, 3, rotation2(-1.0)),
            ],
        )
        .unwrap();
        let cg = ConnectionGraph::new(g, sig).unwrap();
        assert!(is_consistent(&cg));
        assert_eq!(cycle_product_check(&cg), 0.0);
        let (simple, _) = spanning_tree_simplify(&cg).unwrap();
        for (_, s) in simple.signature().iter() {
            assert!((s - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn holonomy_detects_inconsistency() {
        assert!(cycle_product_check(&cycle(5, 0.4).unwrap()) > 0.1);
        assert!(cycle_product_check(&cycle(5, 0.0).unwrap()) < 1e-12);
    }

    #[test]
    fn consistent_decomposes_to_identity() {
        let cg = cycle(4, 0.0)
            .unwrap()
            .apply_switching(&[
                rotation2(0.1),
                rotation2(1.0),
                rotation2(2.0),
                rotation2(-0.5),
            ])
            .unwrap();
        let dec = decompose_signature(&cg).unwrap();
        assert_eq!(dec.rho, 2);
        assert!(dec.tau.is_none());
        let switched = cg.apply_switching(&dec.switching).unwrap();
        for (_, s) in switched.signature().iter() {
            assert!((s - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-8);
        }
    }

    #[test]
    fn absolutely_inconsistent_is_returned_unchanged() {
        let cg = cycle(3, PI / 2.0).unwrap();
        let dec = decompose_signature(&cg).unwrap();
        assert_eq!(dec.rho, 0);
        assert_eq!(dec.tau.as_ref(), Some(cg.signature()));
        assert!(is_absolutely_inconsistent(&cg).unwrap());
        assert!(!is_absolutely_inconsistent(&cycle(3, 0.0).unwrap()).unwrap());
    }

    #[test]
    fn mixed_decomposition_spectrum() {
        let base = cycle(5, 0.0).unwrap();
        let one = ConnectionGraph::new(
            base.graph().clone(),
            Signature::identity(base.graph(), 1).unwrap(),
        )
        .unwrap();
        let mixed = one.direct_sum(&cycle(5, 1.3).unwrap()).unwrap();
        let dec = decompose_signature(&mixed).unwrap();
        assert_eq!(dec.rho, 1);
        let rec = dec.reconstruction(&mixed).unwrap();
        let (a, b) = (spectrum(&mixed), spectrum(&rec));
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
        let tau = dec.tau_graph(&mixed).unwrap().unwrap();
        assert_eq!(nullity(&tau), 0);
    }

    #[test]
    fn classify_elementary_cycles() {
        let c0 = classify_cycle_signature(&cycle(4, 0.0).unwrap()).unwrap();
        assert_eq!((c0.plus_one, c0.minus_one, c0.angles.len()), (2, 0, 0));
        let cpi = classify_cycle_signature(&cycle(4, PI).unwrap()).unwrap();
        assert_eq!((cpi.plus_one, cpi.minus_one, cpi.angles.len()), (0, 2, 0));
        for theta in [PI / 3.0, 5.0 * PI / 3.0] {
            let cg = cycle(5, theta).unwrap();
            let c = classify_cycle_signature(&cg).unwrap();
            assert_eq!((c.plus_one, c.minus_one), (0, 0));
            assert!((c.angles[0] - PI / 3.0).abs() < 1e-10);
            let switched = cg.apply_switching(&c.switching).unwrap();
            let rec = c.reconstruction(&cg).unwrap();
            for ((_, a), (_, b)) in switched.signature().iter().zip(rec.signature().iter()) {
                assert!((a - b).abs().max() < 1e-9);
            }
        }
    }

    #[test]
    fn classify_rejects_non_cycles() {
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let cg = ConnectionGraph::new(g.clone(), Signature::identity(&g, 2).unwrap()).unwrap();
        assert_eq!(classify_cycle_signature(&cg).unwrap_err(), Error::NotACycle);
    }
}
