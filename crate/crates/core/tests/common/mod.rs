//! Random instances and reference computations built directly on nalgebra,
//! independent of the library's own assembly and solvers.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use conres::{ConnectionGraph, Signature, WeightedGraph};

pub type Edges = Vec<(usize, usize, f64, DMatrix<f64>)>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hamiltonian cycle through a random permutation plus random chords, with
/// weights in `[0.5, 2]`.
pub fn random_topology(rng: &mut ChaCha8Rng, n: usize, chord_p: f64) -> Vec<(usize, usize, f64)> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut set = std::collections::BTreeSet::new();
    for k in 0..n {
        let (a, b) = (perm[k], perm[(k + 1) % n]);
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < chord_p {
                set.insert((a, b));
            }
        }
    }
    set.into_iter()
        .map(|(a, b)| (a, b, rng.gen_range(0.5..2.0)))
        .collect()
}

/// Haar-like orthogonal matrix: QR of a Gaussian matrix with the signs of
/// `diag(R)` folded into `Q`.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for c in 0..d {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

pub fn random_edges(rng: &mut ChaCha8Rng, topo: &[(usize, usize, f64)], d: usize) -> Edges {
    topo.iter()
        .map(|&(u, v, w)| (u, v, w, random_orthogonal(rng, d)))
        .collect()
}

/// `sigma_uv = h_u^T h_v` for random frames `h`: every cycle product is `I`.
pub fn consistent_edges(
    rng: &mut ChaCha8Rng,
    n: usize,
    topo: &[(usize, usize, f64)],
    d: usize,
) -> Edges {
    let frames: Vec<DMatrix<f64>> = (0..n).map(|_| random_orthogonal(rng, d)).collect();
    topo.iter()
        .map(|&(u, v, w)| (u, v, w, frames[u].transpose() * &frames[v]))
        .collect()
}

/// `sigma_uv = Q_u (I_rho ⊕ tau_uv) Q_v^T` with random frames `Q` and a
/// `tau` redrawn until its Laplacian is clearly nonsingular, so the result
/// has nullity exactly `rho`. The topology must contain a cycle.
pub fn engineered_edges(
    rng: &mut ChaCha8Rng,
    n: usize,
    topo: &[(usize, usize, f64)],
    d: usize,
    rho: usize,
) -> Edges {
    engineered_parts(rng, n, topo, d, rho).0
}

/// [`engineered_edges`] together with the planted `tau` (empty when `rho = d`).
pub fn engineered_parts(
    rng: &mut ChaCha8Rng,
    n: usize,
    topo: &[(usize, usize, f64)],
    d: usize,
    rho: usize,
) -> (Edges, Edges) {
    assert!(rho <= d);
    let k = d - rho;
    let frames: Vec<DMatrix<f64>> = (0..n).map(|_| random_orthogonal(rng, d)).collect();
    let taus: Vec<DMatrix<f64>> = if k == 0 {
        vec![DMatrix::zeros(0, 0); topo.len()]
    } else {
        loop {
            let taus: Edges = topo
                .iter()
                .map(|&(u, v, w)| {
                    let t = if k == 1 {
                        DMatrix::from_element(1, 1, if rng.gen::<bool>() { 1.0 } else { -1.0 })
                    } else {
                        random_orthogonal(rng, k)
                    };
                    (u, v, w, t)
                })
                .collect();
            let ev = sorted_eigenvalues(&dense_laplacian(n, k, &taus));
            if ev[0] > 1e-3 * ev[ev.len() - 1] {
                break taus.into_iter().map(|t| t.3).collect();
            }
        }
    };
    let sigma = topo
        .iter()
        .zip(&taus)
        .map(|(&(u, v, w), tau)| {
            let mut block = DMatrix::identity(d, d);
            block.view_mut((rho, rho), (k, k)).copy_from(tau);
            (u, v, w, &frames[u] * block * frames[v].transpose())
        })
        .collect();
    let tau = if k == 0 {
        Vec::new()
    } else {
        topo.iter()
            .zip(taus)
            .map(|(&(u, v, w), t)| (u, v, w, t))
            .collect()
    };
    (sigma, tau)
}

pub fn build(n: usize, d: usize, edges: &Edges) -> ConnectionGraph {
    let g = WeightedGraph::new(n, edges.iter().map(|(u, v, w, _)| (*u, *v, *w))).unwrap();
    let s = Signature::new(d, edges.iter().map(|(u, v, _, m)| (*u, *v, m.clone()))).unwrap();
    ConnectionGraph::new(g, s).unwrap()
}

pub fn random_instance(seed: u64, n: usize, d: usize) -> ConnectionGraph {
    let mut r = rng(seed);
    let topo = random_topology(&mut r, n, 0.35);
    build(n, d, &random_edges(&mut r, &topo, d))
}

/// Connection Laplacian assembled entry by entry.
pub fn dense_laplacian(n: usize, d: usize, edges: &Edges) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n * d, n * d);
    for (u, v, w, s) in edges {
        for a in 0..d {
            l[(u * d + a, u * d + a)] += w;
            l[(v * d + a, v * d + a)] += w;
            for b in 0..d {
                l[(u * d + a, v * d + b)] -= w * s[(a, b)];
                l[(v * d + b, u * d + a)] -= w * s[(a, b)];
            }
        }
    }
    l
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns the eigenvalues and the eigenvectors as columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].powi(2))
            .sum();
        if off.sqrt() <= 1e-15 * a.norm().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|k| a[(k, k)]).collect(), v)
}

/// Pseudoinverse of a symmetric matrix from its Jacobi eigen-decomposition,
/// dropping eigenvalues below `rel` times the largest in magnitude.
pub fn pinv_sym(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let (vals, vecs) = jacobi_eigen(m);
    let cut = rel
        * vals
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(f64::MIN_POSITIVE);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() > cut {
            let c = vecs.column(k);
            out += c * c.transpose() / lam;
        }
    }
    out
}

/// Schur complement onto the vertex blocks `keep` (in the given order),
/// eliminating everything else through an LU solve.
pub fn schur_lu(m: &DMatrix<f64>, d: usize, keep: &[usize]) -> DMatrix<f64> {
    let nb = m.nrows() / d;
    let rest: Vec<usize> = (0..nb).filter(|x| !keep.contains(x)).collect();
    let idx = |vs: &[usize]| -> Vec<usize> {
        vs.iter()
            .flat_map(|&v| (0..d).map(move |a| v * d + a))
            .collect()
    };
    let (k, r) = (idx(keep), idx(&rest));
    let sel = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
    };
    let a = sel(&k, &k);
    if r.is_empty() {
        return a;
    }
    let x = sel(&r, &r)
        .lu()
        .solve(&sel(&r, &k))
        .expect("eliminated block invertible");
    a - sel(&k, &r) * x
}

/// Classical effective resistance from the grounded Laplacian: remove `j`,
/// solve `L_j x = e_i`, read `x_i`.
pub fn grounded_resistance(n: usize, topo: &[(usize, usize, f64)], i: usize, j: usize) -> f64 {
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(u, v, w) in topo {
        l[(u, u)] += w;
        l[(v, v)] += w;
        l[(u, v)] -= w;
        l[(v, u)] -= w;
    }
    let keep: Vec<usize> = (0..n).filter(|&x| x != j).collect();
    let lj = DMatrix::from_fn(n - 1, n - 1, |a, b| l[(keep[a], keep[b])]);
    let pos = keep.iter().position(|&x| x == i).unwrap();
    let mut e = DMatrix::zeros(n - 1, 1);
    e[(pos, 0)] = 1.0;
    lj.lu().solve(&e).unwrap()[(pos, 0)]
}

pub fn topology_of(cg: &ConnectionGraph) -> Vec<(usize, usize, f64)> {
    cg.graph().edges().iter().map(|e| (e.u, e.v, e.w)).collect()
}

pub fn edges_of(cg: &ConnectionGraph) -> Edges {
    cg.graph()
        .edges()
        .iter()
        .map(|e| (e.u, e.v, e.w, cg.sigma(e.u, e.v).unwrap().clone()))
        .collect()
}

pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn spectra_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}
