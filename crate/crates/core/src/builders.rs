//! Canonical connection graphs: elementary cycles, lines and parallel
//! combinations of lines, the dumbbell and the Wheatstone bridge.
//!
//! Vertex numbers in the docs are 1-based (as printed by the CLI); the
//! returned graphs are 0-based like the rest of the crate.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{ConnectionGraph, Signature, WeightedGraph};
use crate::linalg::rotation2;

/// `diag(1, R(theta))`: a rotation about the first axis.
pub fn rotation3d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c])
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite")))
    }
}

/// Unit-weight n-cycle `1-2-...-n-1` with the 2D rotation `R(theta)` on edge
/// (1,2) and the identity elsewhere.
pub fn cycle(n: usize, theta: f64) -> Result<ConnectionGraph> {
    cycle_with(n, rotation2(theta), theta)
}

fn cycle_with(n: usize, holonomy: DMatrix<f64>, theta: f64) -> Result<ConnectionGraph> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "cycle needs n >= 3, got {n}"
        )));
    }
    check_finite("theta", theta)?;
    let d = holonomy.nrows();
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let g = WeightedGraph::new(n, edges.iter().map(|&(u, v)| (u, v, 1.0)))?;
    let sig = Signature::new(
        d,
        edges.iter().enumerate().map(|(k, &(u, v))| {
            let m = if k == 0 {
                holonomy.clone()
            } else {
                DMatrix::identity(d, d)
            };
            (u, v, m)
        }),
    )?;
    ConnectionGraph::new(g, sig)
}

/// A path `i = x_0, x_1, ..., x_m = j` given by its edge weights and the
/// signatures `sigma_{x_{l-1} x_l}` oriented from `i` towards `j`.
#[derive(Debug, Clone)]
pub struct Line {
    pub weights: Vec<f64>,
    pub signatures: Vec<DMatrix<f64>>,
}

impl Line {
    pub fn new(weights: Vec<f64>, signatures: Vec<DMatrix<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != signatures.len() {
            return Err(Error::InvalidParameter(format!(
                "line needs equally many (>= 1) weights and signatures, got {} and {}",
                weights.len(),
                signatures.len()
            )));
        }
        let d = signatures[0].nrows();
        if signatures.iter().any(|s| s.shape() != (d, d)) {
            return Err(Error::InvalidParameter(
                "line signatures must share one square shape".into(),
            ));
        }
        Ok(Line {
            weights,
            signatures,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn d(&self) -> usize {
        self.signatures[0].nrows()
    }
}

/// Path graph `1-2-...-(m+1)` carrying the line's weights and signatures.
pub fn line(l: &Line) -> Result<ConnectionGraph> {
    let n = l.len() + 1;
    let g = WeightedGraph::new(n, l.weights.iter().enumerate().map(|(k, &w)| (k, k + 1, w)))?;
    let sig = Signature::new(
        l.d(),
        l.signatures
            .iter()
            .enumerate()
            .map(|(k, s)| (k, k + 1, s.clone())),
    )?;
    ConnectionGraph::new(g, sig)
}

/// Lines glued at their endpoints: vertex 1 is the common start `i`, vertex 2
/// the common end `j`, and internal vertices follow line by line.
pub fn parallel_lines(lines: &[Line]) -> Result<ConnectionGraph> {
    let first = lines
        .first()
        .ok_or_else(|| Error::InvalidParameter("need at least one line".into()))?;
    let d = first.d();
    if lines.iter().any(|l| l.d() != d) {
        return Err(Error::InvalidParameter(
            "lines must share one signature dimension".into(),
        ));
    }
    if lines.iter().filter(|l| l.len() == 1).count() > 1 {
        return Err(Error::NotInternallyDisjoint);
    }
    let mut next = 2;
    let mut edges = Vec::new();
    let mut sigs = Vec::new();
    for l in lines {
        let mut prev = 0;
        for (k, (&w, s)) in l.weights.iter().zip(&l.signatures).enumerate() {
            let to = if k + 1 == l.len() {
                1
            } else {
                next += 1;
                next - 1
            };
            edges.push((prev, to, w));
            sigs.push((prev, to, s.clone()));
            prev = to;
        }
    }
    let g = WeightedGraph::new(next, edges)?;
    ConnectionGraph::new(g, Signature::new(d, sigs)?)
}

/// Where the two signature-bearing edges (1,2) and (2,3) of the dumbbell sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DumbbellLayout {
    /// Two `K_m` cliques bridged by the path 1-2-3: vertex 1 lies in the first
    /// clique, 3 in the second, 2 is the midpoint of the bridge.
    #[default]
    Bridge,
    /// Vertices 1, 2, 3 all belong to the first clique; the cliques are joined
    /// by a single unsigned edge from vertex 3 to the second clique.
    InClique,
}

/// Two `K_m` cliques joined by a bridge, unit weights, 3D signatures
/// `rotation3d(theta12)` on (1,2) and `rotation3d(theta23)` on (2,3),
/// identity elsewhere.
pub fn dumbbell(
    m: usize,
    theta12: f64,
    theta23: f64,
    layout: DumbbellLayout,
) -> Result<ConnectionGraph> {
    check_finite("theta12", theta12)?;
    check_finite("theta23", theta23)?;
    let (n, mut edges) = match layout {
        DumbbellLayout::Bridge => {
            if m < 2 {
                return Err(Error::InvalidParameter(format!(
                    "dumbbell needs m >= 2, got {m}"
                )));
            }
            // clique A: 0 and 3..m+2, clique B: 2 and m+2..2m+1, bridge 0-1-2
            let a: Vec<usize> = std::iter::once(0).chain(3..m + 2).collect();
            let b: Vec<usize> = std::iter::once(2).chain(m + 2..2 * m + 1).collect();
            let mut edges = clique(&a);
            edges.extend(clique(&b));
            edges.push((0, 1));
            edges.push((1, 2));
            (2 * m + 1, edges)
        }
        DumbbellLayout::InClique => {
            if m < 3 {
                return Err(Error::InvalidParameter(format!(
                    "in-clique dumbbell needs m >= 3, got {m}"
                )));
            }
            let a: Vec<usize> = (0..m).collect();
            let b: Vec<usize> = (m..2 * m).collect();
            let mut edges = clique(&a);
            edges.extend(clique(&b));
            edges.push((2, m));
            (2 * m, edges)
        }
    };
    edges.sort_unstable();
    let g = WeightedGraph::new(n, edges.iter().map(|&(u, v)| (u, v, 1.0)))?;
    let sig = Signature::new(
        3,
        edges.iter().map(|&(u, v)| {
            let s = match (u, v) {
                (0, 1) => rotation3d(theta12),
                (1, 2) => rotation3d(theta23),
                _ => DMatrix::identity(3, 3),
            };
            (u, v, s)
        }),
    )?;
    ConnectionGraph::new(g, sig)
}

fn clique(vs: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (k, &a) in vs.iter().enumerate() {
        for &b in &vs[k + 1..] {
            out.push((a.min(b), a.max(b)));
        }
    }
    out
}

/// Edges of the Wheatstone bridge, 0-based: (1,2),(1,3),(2,3),(2,4),(3,4).
pub const WHEATSTONE_EDGES: [(usize, usize); 5] = [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)];

/// Unit-weight Wheatstone bridge with `rotation3d(theta)` on `swept_edge`
/// (0-based; (1,3) i.e. vertices 2-4 by default) and the identity elsewhere.
pub fn wheatstone(theta: f64, swept_edge: Option<(usize, usize)>) -> Result<ConnectionGraph> {
    check_finite("theta", theta)?;
    let (su, sv) = swept_edge.unwrap_or((1, 3));
    let key = (su.min(sv), su.max(sv));
    if !WHEATSTONE_EDGES.contains(&key) {
        return Err(Error::InvalidParameter(format!(
            "({}, {}) is not a Wheatstone edge",
            su + 1,
            sv + 1
        )));
    }
    let g = WeightedGraph::new(4, WHEATSTONE_EDGES.iter().map(|&(u, v)| (u, v, 1.0)))?;
    let sig = Signature::new(
        3,
        WHEATSTONE_EDGES.iter().map(|&(u, v)| {
            let s = if (u, v) == (su, sv) {
                rotation3d(theta)
            } else if (v, u) == (su, sv) {
                rotation3d(theta).transpose()
            } else {
                DMatrix::identity(3, 3)
            };
            (u, v, s)
        }),
    )?;
    ConnectionGraph::new(g, sig)
}
