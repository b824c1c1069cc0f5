//! Weighted graphs, orthogonal edge signatures, and the connection Laplacian.
//!
//! Vertices are 0-based here. Only one orientation of each signature edge is
//! stored; the reverse orientation is the transpose, so `sigma(v, u)` is
//! exactly `sigma(u, v)^T`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal, direct_sum_matrix, orthogonality_deviation};

/// Tolerance on `max |S^T S - I|` for signature and switching matrices.
pub const ORTH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Connected, simple, positively weighted undirected graph.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    degrees: Vec<f64>,
    // (neighbor, edge index) per vertex
    adjacency: Vec<Vec<(usize, usize)>>,
    lookup: HashMap<(usize, usize), usize>,
}

impl WeightedGraph {
    /// Validate and build a graph on vertices `0..n`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewVertices { min: 2, got: n });
        }
        let mut out = Vec::new();
        let mut lookup = HashMap::new();
        let mut adjacency = vec![Vec::new(); n];
        let mut degrees = vec![0.0; n];
        for (u, v, w) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::VertexOutOfRange { vertex: x, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::NonpositiveWeight { u, v, w });
            }
            let key = (u.min(v), u.max(v));
            if lookup.contains_key(&key) {
                return Err(Error::DuplicateEdge(key.0, key.1));
            }
            let idx = out.len();
            lookup.insert(key, idx);
            adjacency[u].push((v, idx));
            adjacency[v].push((u, idx));
            degrees[u] += w;
            degrees[v] += w;
            out.push(Edge { u, v, w });
        }
        let g = WeightedGraph {
            n,
            edges: out,
            degrees,
            adjacency,
            lookup,
        };
        let components = g.component_count();
        if components != 1 {
            return Err(Error::DisconnectedGraph { components });
        }
        Ok(g)
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(x) = stack.pop() {
                for &(y, _) in &self.adjacency[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        count
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// `(neighbor, edge index)` pairs incident to `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.lookup.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_index(u, v).is_some()
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        self.edge_index(u, v).map(|k| self.edges[k].w)
    }

    pub fn check_vertex(&self, i: usize) -> Result<()> {
        if i < self.n {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                vertex: i,
                n: self.n,
            })
        }
    }

    /// Checks both vertices exist and differ.
    pub fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        self.check_vertex(i)?;
        self.check_vertex(j)?;
        if i == j {
            return Err(Error::SamePair(i));
        }
        Ok(())
    }

    /// Classical Laplacian `L = D - W`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.degrees));
        for e in &self.edges {
            l[(e.u, e.v)] -= e.w;
            l[(e.v, e.u)] -= e.w;
        }
        l
    }

    /// Breadth-first spanning tree from `root`, optionally ignoring one edge.
    /// Returns `(parent, edge index)` per vertex (`None` at the root) and the
    /// visit order.
    pub fn bfs_tree(
        &self,
        root: usize,
        skip_edge: Option<usize>,
    ) -> (Vec<Option<(usize, usize)>>, Vec<usize>) {
        let mut parent = vec![None; self.n];
        let mut seen = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        let mut queue = std::collections::VecDeque::from([root]);
        seen[root] = true;
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for &(y, k) in &self.adjacency[x] {
                if Some(k) == skip_edge || seen[y] {
                    continue;
                }
                seen[y] = true;
                parent[y] = Some((x, k));
                queue.push_back(y);
            }
        }
        (parent, order)
    }
}

/// Orthogonal `d x d` matrices on oriented edges, keyed by `(min, max)` with
/// the matrix stored for the `min -> max` orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    d: usize,
    entries: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl Signature {
    /// Build from `(u, v, sigma_uv)` triples; the orientation is normalized.
    pub fn new(
        d: usize,
        entries: impl IntoIterator<Item = (usize, usize, DMatrix<f64>)>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut map = BTreeMap::new();
        for (u, v, m) in entries {
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::SignatureShape {
                    u,
                    v,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    d,
                });
            }
            let deviation = orthogonality_deviation(&m);
            if deviation.is_nan() || deviation > ORTH_TOL {
                return Err(Error::NonOrthogonalSignature { u, v, deviation });
            }
            let key = (u.min(v), u.max(v));
            let stored = if u < v { m } else { m.transpose() };
            if map.insert(key, stored).is_some() {
                return Err(Error::DuplicateEdge(key.0, key.1));
            }
        }
        Ok(Signature { d, entries: map })
    }

    /// The same matrix on every edge of `g`.
    pub fn constant(g: &WeightedGraph, m: &DMatrix<f64>) -> Result<Self> {
        Signature::new(m.nrows(), g.edges().iter().map(|e| (e.u, e.v, m.clone())))
    }

    /// Identity signature of dimension `d` on `g`.
    pub fn identity(g: &WeightedGraph, d: usize) -> Result<Self> {
        Signature::constant(g, &DMatrix::identity(d, d))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `sigma_uv` for the given orientation.
    pub fn get(&self, u: usize, v: usize) -> Option<DMatrix<f64>> {
        if u < v {
            self.entries.get(&(u, v)).cloned()
        } else {
            self.entries.get(&(v, u)).map(|m| m.transpose())
        }
    }

    /// Stored entries as `((min, max), sigma_{min,max})`.
    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &DMatrix<f64>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn same_edges(&self, other: &Signature) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .keys()
                .zip(other.entries.keys())
                .all(|(a, b)| a == b)
    }
}

/// Blockwise `(sigma ⊕ sigma')_ij = diag(sigma_ij, sigma'_ij)`.
pub fn direct_sum(sigma: &Signature, other: &Signature) -> Result<Signature> {
    if !sigma.same_edges(other) {
        return Err(Error::EdgeSetMismatch);
    }
    let entries = sigma
        .entries
        .iter()
        .zip(other.entries.values())
        .map(|((&(u, v), a), b)| (u, v, direct_sum_matrix(a, b)));
    Signature::new(sigma.d + other.d, entries)
}

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    w: f64,
    sigma: DMatrix<f64>,
}

/// A weighted graph together with a signature on exactly its edges.
#[derive(Debug, Clone)]
pub struct ConnectionGraph {
    graph: WeightedGraph,
    signature: Signature,
    arcs: Vec<Vec<Arc>>,
}

impl ConnectionGraph {
    pub fn new(graph: WeightedGraph, signature: Signature) -> Result<Self> {
        if signature.len() != graph.edges().len() {
            return Err(Error::EdgeSetMismatch);
        }
        let mut arcs = vec![Vec::new(); graph.n()];
        for e in graph.edges() {
            let s = signature.get(e.u, e.v).ok_or(Error::EdgeSetMismatch)?;
            arcs[e.v].push(Arc {
                to: e.u,
                w: e.w,
                sigma: s.transpose(),
            });
            arcs[e.u].push(Arc {
                to: e.v,
                w: e.w,
                sigma: s,
            });
        }
        Ok(ConnectionGraph {
            graph,
            signature,
            arcs,
        })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn d(&self) -> usize {
        self.signature.d()
    }

    /// `sigma_uv` oriented from `u` to `v`, if `{u, v}` is an edge.
    pub fn sigma(&self, u: usize, v: usize) -> Option<&DMatrix<f64>> {
        self.arcs
            .get(u)?
            .iter()
            .find(|a| a.to == v)
            .map(|a| &a.sigma)
    }

    /// Outgoing `(neighbor, weight, sigma_{u,neighbor})` triples of `u`.
    pub fn arcs(&self, u: usize) -> impl Iterator<Item = (usize, f64, &DMatrix<f64>)> {
        self.arcs[u].iter().map(|a| (a.to, a.w, &a.sigma))
    }

    /// The `nd x nd` connection Laplacian: `deg(i) I` on diagonal blocks and
    /// `-w_ij sigma_ij` off the diagonal.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let (n, d) = (self.n(), self.d());
        let mut l = DMatrix::zeros(n * d, n * d);
        for i in 0..n {
            l.view_mut((i * d, i * d), (d, d))
                .fill_diagonal(self.graph.degree(i));
            for a in &self.arcs[i] {
                l.view_mut((i * d, a.to * d), (d, d))
                    .copy_from(&(&a.sigma * -a.w));
            }
        }
        l
    }

    /// `(L f)(i) = sum_{j ~ i} w_ij (f(i) - sigma_ij f(j))`, evaluated edgewise.
    pub fn apply_laplacian(&self, f: &BlockVector) -> Result<BlockVector> {
        self.check_block_vector(f)?;
        let mut out = BlockVector::zeros(self.n(), self.d(), f.cols());
        for i in 0..self.n() {
            let mut acc = DMatrix::zeros(self.d(), f.cols());
            for a in &self.arcs[i] {
                acc += (f.block(i) - &a.sigma * f.block(a.to)) * a.w;
            }
            out.set_block(i, &acc);
        }
        Ok(out)
    }

    /// `f^T L f` summed over edges as `w_ij (f(i) - sigma_ij f(j))^T (f(i) - sigma_ij f(j))`.
    pub fn quadratic_form(&self, f: &BlockVector) -> Result<DMatrix<f64>> {
        self.check_block_vector(f)?;
        let mut q = DMatrix::zeros(f.cols(), f.cols());
        for e in self.graph.edges() {
            let s = self.sigma(e.u, e.v).expect("edge present");
            let diff = f.block(e.u) - s * f.block(e.v);
            q += diff.transpose() * diff * e.w;
        }
        Ok(q)
    }

    pub(crate) fn check_block_vector(&self, f: &BlockVector) -> Result<()> {
        if f.n() != self.n() || f.d() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: format!("n={}, d={}", self.n(), self.d()),
                got: format!("n={}, d={}", f.n(), f.d()),
            });
        }
        Ok(())
    }

    /// Signature `tau_ij = f(i) sigma_ij f(j)^T` for a vertexwise switching map `f`.
    pub fn apply_switching(&self, f: &[DMatrix<f64>]) -> Result<ConnectionGraph> {
        check_switching(f, self.n(), self.d())?;
        let entries = self
            .signature
            .iter()
            .map(|(&(u, v), s)| (u, v, &f[u] * s * f[v].transpose()));
        let sig = Signature::new(self.d(), entries)?;
        ConnectionGraph::new(self.graph.clone(), sig)
    }

    /// Connection graph on the same underlying graph with signature `sigma ⊕ other`.
    pub fn direct_sum(&self, other: &ConnectionGraph) -> Result<ConnectionGraph> {
        ConnectionGraph::new(
            self.graph.clone(),
            direct_sum(&self.signature, &other.signature)?,
        )
    }

    /// Same graph, different signature.
    pub fn with_signature(&self, signature: Signature) -> Result<ConnectionGraph> {
        ConnectionGraph::new(self.graph.clone(), signature)
    }
}

pub(crate) fn check_switching(f: &[DMatrix<f64>], n: usize, d: usize) -> Result<()> {
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} switching matrices"),
            got: format!("{}", f.len()),
        });
    }
    for (vertex, m) in f.iter().enumerate() {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let deviation = orthogonality_deviation(m);
        if deviation.is_nan() || deviation > ORTH_TOL {
            return Err(Error::NonOrthogonalSwitch { vertex, deviation });
        }
    }
    Ok(())
}

/// Block-diagonal `F` with `f(i)` as its i-th block.
pub fn switching_matrix(f: &[DMatrix<f64>]) -> DMatrix<f64> {
    block_diagonal(f)
}

/// Row order that turns `L^{sigma ⊕ sigma'}` (interleaved per vertex) into
/// `L^sigma ⊕ L^{sigma'}` when applied to both rows and columns.
pub fn direct_sum_permutation(n: usize, d1: usize, d2: usize) -> Vec<usize> {
    let d = d1 + d2;
    let first = (0..n).flat_map(|i| (0..d1).map(move |k| i * d + k));
    let second = (0..n).flat_map(|i| (0..d2).map(move |k| i * d + d1 + k));
    first.chain(second).collect()
}

/// A function `V -> R^{d x c}` stored as an `nd x c` stacked matrix
/// (`c = d` for the matrix-valued functions used throughout).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    n: usize,
    d: usize,
    data: DMatrix<f64>,
}

impl BlockVector {
    pub fn new(n: usize, d: usize, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != n * d {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", n * d),
                got: format!("{} rows", data.nrows()),
            });
        }
        Ok(BlockVector { n, d, data })
    }

    pub fn zeros(n: usize, d: usize, cols: usize) -> Self {
        BlockVector {
            n,
            d,
            data: DMatrix::zeros(n * d, cols),
        }
    }

    pub fn from_blocks(blocks: &[DMatrix<f64>]) -> Result<Self> {
        let n = blocks.len();
        let (d, c) = blocks
            .first()
            .map(|b| (b.nrows(), b.ncols()))
            .ok_or(Error::EmptyIndexSet)?;
        let mut out = BlockVector::zeros(n, d, c);
        for (i, b) in blocks.iter().enumerate() {
            if b.shape() != (d, c) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{d}x{c}"),
                    got: format!("{}x{}", b.nrows(), b.ncols()),
                });
            }
            out.set_block(i, b);
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn block(&self, i: usize) -> DMatrixView<'_, f64> {
        self.data.view((i * self.d, 0), (self.d, self.data.ncols()))
    }

    pub fn block_owned(&self, i: usize) -> DMatrix<f64> {
        self.block(i).into_owned()
    }

    pub fn set_block(&mut self, i: usize, m: &DMatrix<f64>) {
        let c = self.data.ncols();
        self.data
            .view_mut((i * self.d, 0), (self.d, c))
            .copy_from(m);
    }

    /// Frobenius norm of the stacked matrix.
    pub fn norm(&self) -> f64 {
        self.data.norm()
    }
}
