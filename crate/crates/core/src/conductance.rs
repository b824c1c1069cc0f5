//! Connection conductance matrices.

use nalgebra::DMatrix;

use crate::builders::{parallel_lines, Line};
use crate::dirichlet::voltage_function;
use crate::error::{Error, Result};
use crate::graph::ConnectionGraph;
use crate::linalg::{block_indices, inverse_spd, select, solve_spd, symmetrize};
use crate::meanpath::{hitting_probabilities, omega1_conditioned_loop, omega1_escape, omega1_loop};

/// A `2d x 2d` matrix over an ordered vertex pair, `i` block first.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    pair: (usize, usize),
    d: usize,
    full: DMatrix<f64>,
}

impl PairMatrix {
    pub fn new(pair: (usize, usize), full: DMatrix<f64>) -> Result<Self> {
        let (r, c) = full.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: "2d x 2d matrix".into(),
                got: format!("{r}x{c}"),
            });
        }
        Ok(PairMatrix {
            pair,
            d: r / 2,
            full,
        })
    }

    pub fn from_blocks(
        pair: (usize, usize),
        ii: &DMatrix<f64>,
        ij: &DMatrix<f64>,
        ji: &DMatrix<f64>,
        jj: &DMatrix<f64>,
    ) -> Result<Self> {
        let d = ii.nrows();
        if [ii, ij, ji, jj].iter().any(|b| b.shape() != (d, d)) {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d} blocks"),
                got: "mixed shapes".into(),
            });
        }
        let mut full = DMatrix::zeros(2 * d, 2 * d);
        full.view_mut((0, 0), (d, d)).copy_from(ii);
        full.view_mut((0, d), (d, d)).copy_from(ij);
        full.view_mut((d, 0), (d, d)).copy_from(ji);
        full.view_mut((d, d), (d, d)).copy_from(jj);
        PairMatrix::new(pair, full)
    }

    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn full(&self) -> &DMatrix<f64> {
        &self.full
    }

    fn block(&self, r: usize, c: usize) -> DMatrix<f64> {
        self.full
            .view((r * self.d, c * self.d), (self.d, self.d))
            .into_owned()
    }

    pub fn ii(&self) -> DMatrix<f64> {
        self.block(0, 0)
    }

    pub fn ij(&self) -> DMatrix<f64> {
        self.block(0, 1)
    }

    pub fn ji(&self) -> DMatrix<f64> {
        self.block(1, 0)
    }

    pub fn jj(&self) -> DMatrix<f64> {
        self.block(1, 1)
    }

    /// The same matrix with the pair order reversed.
    pub fn swapped(&self) -> PairMatrix {
        let (i, j) = self.pair;
        PairMatrix::from_blocks((j, i), &self.jj(), &self.ji(), &self.ij(), &self.ii())
            .expect("square blocks")
    }
}

/// `C(i,j) = L / L_{{i,j}^c}`, with `i`'s block first.
pub fn conductance_matrix(cg: &ConnectionGraph, i: usize, j: usize) -> Result<PairMatrix> {
    let g = cg.graph();
    g.check_vertex(i)?;
    g.check_vertex(j)?;
    g.check_pair(i, j)?;
    let d = cg.d();
    let l = cg.laplacian();
    let keep = block_indices(&[i, j], d);
    let rest: Vec<usize> = (0..cg.n()).filter(|&x| x != i && x != j).collect();
    let a = select(&l, &keep, &keep);
    let full = if rest.is_empty() {
        a
    } else {
        let drop = block_indices(&rest, d);
        let b = select(&l, &keep, &drop);
        a - &b * solve_spd(&select(&l, &drop, &drop), &b.transpose())?
    };
    PairMatrix::new((i, j), symmetrize(&full))
}

/// `C(i,j)` read off the voltage functions: column blocks are
/// `(L V_{i->j})` and `(L V_{j->i})` evaluated at `i` and `j`.
pub fn conductance_via_voltages(cg: &ConnectionGraph, i: usize, j: usize) -> Result<PairMatrix> {
    let vi = cg.apply_laplacian(&voltage_function(cg, i, j)?)?;
    let vj = cg.apply_laplacian(&voltage_function(cg, j, i)?)?;
    PairMatrix::from_blocks(
        (i, j),
        &vi.block_owned(i),
        &vj.block_owned(i),
        &vi.block_owned(j),
        &vj.block_owned(j),
    )
}

/// Largest block norm of `(L V_{i->j})(k)` over `k` outside `{i, j}`.
pub fn current_balance_residual(cg: &ConnectionGraph, i: usize, j: usize) -> Result<f64> {
    let lv = cg.apply_laplacian(&voltage_function(cg, i, j)?)?;
    Ok((0..cg.n())
        .filter(|&k| k != i && k != j)
        .map(|k| lv.block(k).norm())
        .fold(0.0, f64::max))
}

/// Classical effective conductance `deg(i) P^i[T_j^1 < T_i^1]`.
pub fn escape_conductance(cg: &ConnectionGraph, i: usize, j: usize) -> Result<f64> {
    let g = cg.graph();
    let h = hitting_probabilities(g, j, i)?;
    Ok(g.neighbors(i)
        .iter()
        .map(|&(y, e)| g.edges()[e].w * h[y])
        .sum())
}

/// `C(i,j)` assembled from the escape probability and conditioned mean path
/// signatures:
///
/// `c [[I, -I], [-I, I]] + [[(deg i - c)(I - W_ii), c(I - W_ij)], [c(I - W_ji), (deg j - c)(I - W_jj)]]`
///
/// where `W_ii = Omega^1_ii(j)` and `W_ij = Omega^1_ij(i)`.
pub fn conductance_via_escape(cg: &ConnectionGraph, i: usize, j: usize) -> Result<PairMatrix> {
    let g = cg.graph();
    g.check_pair(i, j)?;
    let d = cg.d();
    let eye = DMatrix::<f64>::identity(d, d);
    let c = escape_conductance(cg, i, j)?;
    let loop_i = omega1_conditioned_loop(cg, i, j)?.value;
    let loop_j = omega1_conditioned_loop(cg, j, i)?.value;
    let esc_ij = omega1_escape(cg, i, j)?.value;
    let esc_ji = omega1_escape(cg, j, i)?.value;
    let ii = &eye * c + (&eye - loop_i) * (g.degree(i) - c);
    let jj = &eye * c + (&eye - loop_j) * (g.degree(j) - c);
    let ij = -(esc_ij * c);
    let ji = -(esc_ji * c);
    PairMatrix::from_blocks((i, j), &ii, &ij, &ji, &jj)
}

/// Closed form for a line from its first to its last vertex:
/// `(1 / sum 1/w) [[I, -P], [-P^T, I]]` with `P` the product of the signatures.
pub fn series_conductance(l: &Line) -> Result<PairMatrix> {
    let d = l.d();
    let c = 1.0 / l.weights.iter().map(|w| 1.0 / w).sum::<f64>();
    let p = l
        .signatures
        .iter()
        .fold(DMatrix::identity(d, d), |acc, s| acc * s);
    let eye = DMatrix::<f64>::identity(d, d) * c;
    PairMatrix::from_blocks((0, l.len()), &eye, &(-&p * c), &(-p.transpose() * c), &eye)
}

/// Conductance of lines glued at their endpoints, as the sum of the series
/// conductances. The pair is `(0, 1)`, matching [`parallel_lines`].
pub fn parallel_sum(lines: &[Line]) -> Result<PairMatrix> {
    // Validates disjointness and shapes.
    parallel_lines(lines)?;
    let d = lines[0].d();
    let mut full = DMatrix::zeros(2 * d, 2 * d);
    for l in lines {
        full += series_conductance(l)?.full();
    }
    PairMatrix::new((0, 1), full)
}

/// `Omega^0_{ij} = -(C_ii)^{-1} C_ij`.
pub fn omega0_from_conductance(c: &PairMatrix) -> Result<DMatrix<f64>> {
    Ok(-inverse_spd(&c.ii())? * c.ij())
}

/// Residuals of `C / C_jj = deg(i)(I - Omega^1_i)` and
/// `C / C_ii = deg(j)(I - Omega^1_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurBlockReport {
    pub residual_i: f64,
    pub residual_j: f64,
    pub holds: bool,
}

pub const SCHUR_BLOCK_TOL: f64 = 1e-9;

pub fn schur_block_identities(
    cg: &ConnectionGraph,
    i: usize,
    j: usize,
) -> Result<SchurBlockReport> {
    let c = conductance_matrix(cg, i, j)?;
    let g = cg.graph();
    let d = cg.d();
    let eye = DMatrix::<f64>::identity(d, d);
    let over_jj = c.ii() - c.ij() * solve_spd(&c.jj(), &c.ji())?;
    let over_ii = c.jj() - c.ji() * solve_spd(&c.ii(), &c.ij())?;
    let rhs_i = (&eye - omega1_loop(cg, i)?.value) * g.degree(i);
    let rhs_j = (&eye - omega1_loop(cg, j)?.value) * g.degree(j);
    let scale = g.degree(i).max(g.degree(j)).max(1.0);
    let residual_i = (over_jj - rhs_i).abs().max() / scale;
    let residual_j = (over_ii - rhs_j).abs().max() / scale;
    Ok(SchurBlockReport {
        residual_i,
        residual_j,
        holds: residual_i.max(residual_j) <= SCHUR_BLOCK_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{cycle, line};
    use crate::graph::{Signature, WeightedGraph};
    use crate::linalg::{rotation2, symmetric_eigenvalues};
    use crate::meanpath::omega0;

    fn unit_triangle() -> ConnectionGraph {
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        ConnectionGraph::new(g.clone(), Signature::identity(&g, 1).unwrap()).unwrap()
    }

    #[test]
    fn classical_triangle() {
        let c = conductance_matrix(&unit_triangle(), 0, 1).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.5, -1.5, -1.5, 1.5]);
        assert!((c.full() - expected).abs().max() < 1e-12);
    }

    #[test]
    fn rotated_triangle_blocks() {
        let theta = 0.9;
        let cg = cycle(3, theta).unwrap();
        let c = conductance_matrix(&cg, 0, 1).unwrap();
        let eye = DMatrix::<f64>::identity(2, 2);
        let r = rotation2(theta);
        assert!((c.ii() - &eye * 1.5).abs().max() < 1e-12);
        assert!((c.jj() - &eye * 1.5).abs().max() < 1e-12);
        assert!((c.ij() + (&r + &eye * 0.5)).abs().max() < 1e-12);
        assert!((c.ji() + (r.transpose() + &eye * 0.5)).abs().max() < 1e-12);
    }

    #[test]
    fn pair_order_is_respected() {
        let cg = cycle(4, 1.1).unwrap();
        let a = conductance_matrix(&cg, 2, 0).unwrap();
        let b = conductance_matrix(&cg, 0, 2).unwrap();
        assert_eq!(a.pair(), (2, 0));
        assert!((a.full() - b.swapped().full()).abs().max() < 1e-12);
        assert_eq!(
            conductance_matrix(&cg, 1, 1).unwrap_err(),
            Error::SamePair(1)
        );
    }

    #[test]
    fn single_edge_is_series_formula() {
        let s = rotation2(0.3);
        let l = Line::new(vec![2.5], vec![s.clone()]).unwrap();
        let c = conductance_matrix(&line(&l).unwrap(), 0, 1).unwrap();
        let f = series_conductance(&l).unwrap();
        assert!((c.full() - f.full()).abs().max() < 1e-12);
        assert!((c.ij() + s * 2.5).abs().max() < 1e-12);
    }

    #[test]
    fn voltage_and_escape_routes_agree() {
        let cg = cycle(5, 1.7).unwrap();
        let a = conductance_matrix(&cg, 0, 2).unwrap();
        let b = conductance_via_voltages(&cg, 0, 2).unwrap();
        let c = conductance_via_escape(&cg, 0, 2).unwrap();
        assert!((a.full() - b.full()).abs().max() < 1e-10);
        assert!((a.full() - c.full()).abs().max() < 1e-10);
        assert!(current_balance_residual(&cg, 0, 2).unwrap() < 1e-10);
    }

    #[test]
    fn cycle_diagonal_blocks_are_scalar() {
        let cg = cycle(6, 2.2).unwrap();
        let c = conductance_via_escape(&cg, 1, 4).unwrap();
        let cij = escape_conductance(&cg, 1, 4).unwrap();
        assert!((cij - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.ii() - DMatrix::identity(2, 2) * cij).abs().max() < 1e-10);
    }

    #[test]
    fn omega0_from_blocks() {
        let cg = cycle(5, 0.6).unwrap();
        let c = conductance_matrix(&cg, 1, 3).unwrap();
        let o = omega0(&cg, 1, 3).unwrap().value;
        assert!((omega0_from_conductance(&c).unwrap() - o).abs().max() < 1e-10);
    }

    #[test]
    fn schur_blocks_on_cycle() {
        let cg = cycle(4, 1.2).unwrap();
        assert!(schur_block_identities(&cg, 0, 2).unwrap().holds);
    }

    #[test]
    fn parallel_sum_two_paths() {
        let s = rotation2(0.5);
        let lines = vec![
            Line::new(vec![1.0], vec![s.clone()]).unwrap(),
            Line::new(
                vec![1.0, 1.0],
                vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)],
            )
            .unwrap(),
        ];
        let glued = conductance_matrix(&parallel_lines(&lines).unwrap(), 0, 1).unwrap();
        let sum = parallel_sum(&lines).unwrap();
        assert!((glued.full() - sum.full()).abs().max() < 1e-12);
        assert!(symmetric_eigenvalues(sum.full())[0] > -1e-12);
    }
}
