//! Matrix-valued harmonic functions on connection graphs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{BlockVector, ConnectionGraph};
use crate::linalg::{block_indices, select, solve_spd, spectral_norm, IndexSet};

/// Residual tolerance for harmonicity checks.
pub const HARMONIC_TOL: f64 = 1e-9;

/// Prescribed `d x d` values on a set of boundary vertices.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    boundary: IndexSet,
    values: Vec<DMatrix<f64>>,
}

impl BoundaryData {
    /// `values` pairs each boundary vertex with its prescribed block.
    pub fn new(n: usize, values: impl IntoIterator<Item = (usize, DMatrix<f64>)>) -> Result<Self> {
        let mut pairs: Vec<(usize, DMatrix<f64>)> = values.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptyBoundary);
        }
        pairs.sort_by_key(|(v, _)| *v);
        if let Some(w) = pairs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter(format!(
                "vertex {} given twice",
                w[0].0
            )));
        }
        let boundary = IndexSet::new(pairs.iter().map(|(v, _)| *v), n)?;
        Ok(BoundaryData {
            boundary,
            values: pairs.into_iter().map(|(_, m)| m).collect(),
        })
    }

    pub fn boundary(&self) -> &IndexSet {
        &self.boundary
    }

    pub fn value(&self, vertex: usize) -> Option<&DMatrix<f64>> {
        self.boundary
            .as_slice()
            .binary_search(&vertex)
            .ok()
            .map(|k| &self.values[k])
    }
}

/// Solve `u = phi` on the boundary, `(L u)(x) = 0` at every other vertex.
///
/// The interior block `L_{H,H}` is positive definite for any proper subset, so
/// the solution is unique and obtained by Cholesky.
pub fn solve_dirichlet(cg: &ConnectionGraph, bd: &BoundaryData) -> Result<BlockVector> {
    let (n, d) = (cg.n(), cg.d());
    for v in bd.values.iter() {
        if v.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d} boundary values"),
                got: format!("{}x{}", v.nrows(), v.ncols()),
            });
        }
    }
    let mut u = BlockVector::zeros(n, d, d);
    for (&b, v) in bd.boundary.as_slice().iter().zip(&bd.values) {
        u.set_block(b, v);
    }
    let interior = bd.boundary.complement(n);
    if interior.is_empty() {
        return Ok(u);
    }
    let l = cg.laplacian();
    let h = block_indices(&interior, d);
    let db = block_indices(bd.boundary.as_slice(), d);
    let mut phi = DMatrix::zeros(db.len(), d);
    for (k, v) in bd.values.iter().enumerate() {
        phi.view_mut((k * d, 0), (d, d)).copy_from(v);
    }
    let rhs = -(select(&l, &h, &db) * phi);
    let sol = solve_spd(&select(&l, &h, &h), &rhs)?;
    for (k, &x) in interior.iter().enumerate() {
        u.set_block(x, &sol.view((k * d, 0), (d, d)).into_owned());
    }
    Ok(u)
}

/// `E(f) = 1/2 Tr(f^T L f)`.
pub fn dirichlet_energy(cg: &ConnectionGraph, f: &BlockVector) -> Result<f64> {
    Ok(0.5 * cg.quadratic_form(f)?.trace())
}

/// Connection voltage function: harmonic off `{i, j}`, `I` at `i`, `0` at `j`.
pub fn voltage_function(cg: &ConnectionGraph, i: usize, j: usize) -> Result<BlockVector> {
    cg.graph().check_pair(i, j)?;
    let d = cg.d();
    let bd = BoundaryData::new(
        cg.n(),
        [(i, DMatrix::identity(d, d)), (j, DMatrix::zeros(d, d))],
    )?;
    solve_dirichlet(cg, &bd)
}

/// Outcome of a maximum norm principle check (spectral norm).
#[derive(Debug, Clone, PartialEq)]
pub struct MaxNormReport {
    pub closure_max: f64,
    pub boundary_max: f64,
    pub max_harmonic_residual: f64,
    pub holds: bool,
}

/// Vertex boundary of `h`: vertices outside `h` adjacent to it.
pub fn vertex_boundary(cg: &ConnectionGraph, h: &IndexSet) -> Vec<usize> {
    let mut out: Vec<usize> = h
        .as_slice()
        .iter()
        .flat_map(|&x| cg.graph().neighbors(x).iter().map(|&(y, _)| y))
        .filter(|&y| !h.contains(y))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Check that `max_{closure(H)} ||f|| = max_{boundary(H)} ||f||` for `f`
/// harmonic on the proper subset `h`.
pub fn check_max_norm_principle(
    cg: &ConnectionGraph,
    f: &BlockVector,
    h: &IndexSet,
) -> Result<MaxNormReport> {
    cg.check_block_vector(f)?;
    if h.len() >= cg.n() {
        return Err(Error::InvalidParameter(
            "H must be a proper subset of V".into(),
        ));
    }
    let lf = cg.apply_laplacian(f)?;
    let norms: Vec<f64> = (0..cg.n())
        .map(|x| spectral_norm(&f.block_owned(x)))
        .collect();
    let scale = 1.0_f64.max(norms.iter().cloned().fold(0.0, f64::max));
    let mut max_res = 0.0_f64;
    for &x in h.as_slice() {
        let res = spectral_norm(&lf.block_owned(x)) / cg.graph().degree(x);
        if res > HARMONIC_TOL * scale {
            return Err(Error::NotHarmonic {
                vertex: x,
                residual: res,
            });
        }
        max_res = max_res.max(res);
    }
    let boundary = vertex_boundary(cg, h);
    let boundary_max = boundary.iter().map(|&x| norms[x]).fold(0.0, f64::max);
    let closure_max = h
        .as_slice()
        .iter()
        .map(|&x| norms[x])
        .fold(boundary_max, f64::max);
    Ok(MaxNormReport {
        closure_max,
        boundary_max,
        max_harmonic_residual: max_res,
        holds: (closure_max - boundary_max).abs() <= HARMONIC_TOL * scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::cycle;
    use crate::graph::{Signature, WeightedGraph};

    #[test]
    fn full_boundary_returns_phi() {
        let cg = cycle(3, 0.4).unwrap();
        let vals: Vec<(usize, DMatrix<f64>)> = (0..3)
            .map(|x| (x, DMatrix::from_element(2, 2, x as f64)))
            .collect();
        let bd = BoundaryData::new(3, vals.clone()).unwrap();
        let u = solve_dirichlet(&cg, &bd).unwrap();
        for (x, v) in vals {
            assert_eq!(u.block_owned(x), v);
        }
    }

    #[test]
    fn empty_boundary_rejected() {
        assert_eq!(BoundaryData::new(3, []).unwrap_err(), Error::EmptyBoundary);
    }

    #[test]
    fn two_vertex_voltage() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let cg = ConnectionGraph::new(g.clone(), Signature::identity(&g, 1).unwrap()).unwrap();
        let v = voltage_function(&cg, 0, 1).unwrap();
        assert_eq!(v.data().as_slice(), &[1.0, 0.0]);
        assert_eq!(voltage_function(&cg, 1, 1).unwrap_err(), Error::SamePair(1));
    }

    #[test]
    fn path_voltage_is_linear() {
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let cg = ConnectionGraph::new(g.clone(), Signature::identity(&g, 1).unwrap()).unwrap();
        let v = voltage_function(&cg, 0, 2).unwrap();
        assert!((v.data()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn consistent_constant_is_harmonic_with_zero_energy() {
        let cg = cycle(4, 0.0).unwrap();
        let f = BlockVector::from_blocks(&vec![crate::linalg::rotation2(0.3); 4]).unwrap();
        assert!(dirichlet_energy(&cg, &f).unwrap().abs() < 1e-14);
        let h = IndexSet::new([1, 2], 4).unwrap();
        let rep = check_max_norm_principle(&cg, &f, &h).unwrap();
        assert!(rep.holds);
        assert!((rep.closure_max - 1.0).abs() < 1e-12);
        assert!((rep.boundary_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_harmonic_rejected() {
        let cg = cycle(4, 0.3).unwrap();
        let mut f = BlockVector::zeros(4, 2, 2);
        f.set_block(1, &DMatrix::identity(2, 2));
        let h = IndexSet::new([1], 4).unwrap();
        assert!(matches!(
            check_max_norm_principle(&cg, &f, &h),
            Err(Error::NotHarmonic { vertex: 1, .. })
        ));
    }

    #[test]
    fn energy_of_indicator_matches_scalar_form() {
        let g = WeightedGraph::new(3, [(0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        let cg = ConnectionGraph::new(g.clone(), Signature::identity(&g, 1).unwrap()).unwrap();
        let f = BlockVector::new(3, 1, DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0])).unwrap();
        // 1/2 e_2^T L e_2 = deg(2) / 2
        assert!((dirichlet_energy(&cg, &f).unwrap() - 1.25).abs() < 1e-15);
    }
}
