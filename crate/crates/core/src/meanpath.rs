//! Mean path signatures: the expected product of edge signatures collected by
//! a simple random walk (kernel `D^{-1} W`) up to a stopping time.
//!
//! Exact values come from Dirichlet problems and Schur complements. Two
//! independent evaluations serve as oracles: a seeded Monte Carlo sampler and
//! a path-sum iteration that accumulates walk contributions by length.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dirichlet::{solve_dirichlet, voltage_function, BoundaryData};
use crate::error::{Error, Result};
use crate::graph::{BlockVector, ConnectionGraph, WeightedGraph};
use crate::linalg::{block_indices, schur_complement, select, solve_spd, spectral_norm, IndexSet};

/// Probabilities at or below this are treated as structurally zero.
pub const PROB_FLOOR: f64 = 1e-12;

/// Whether the stopping time counts time zero (`s = 0`) or starts at one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Zero,
    One,
}

impl Step {
    fn offset(self) -> usize {
        match self {
            Step::Zero => 0,
            Step::One => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaKind {
    /// `Omega^0_{start,target}`.
    Hitting { start: usize, target: usize },
    /// `Omega^1_{vertex}`: mean product over walks returning to `vertex`.
    Loop { vertex: usize },
    /// `Omega^s_{start,target}(avoid)`: walks reaching `target` before `avoid`.
    Conditioned {
        start: usize,
        target: usize,
        avoid: usize,
        step: Step,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Exact,
    MonteCarlo {
        samples: usize,
        accepted: usize,
        rejected: usize,
        censored: usize,
        /// Entrywise standard error of the estimate.
        stderr: DMatrix<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanPathSignature {
    pub value: DMatrix<f64>,
    pub kind: OmegaKind,
    pub provenance: Provenance,
}

impl MeanPathSignature {
    fn exact(value: DMatrix<f64>, kind: OmegaKind) -> Self {
        MeanPathSignature {
            value,
            kind,
            provenance: Provenance::Exact,
        }
    }

    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.value)
    }

    /// Largest entrywise standard error (zero for exact values).
    pub fn max_stderr(&self) -> f64 {
        match &self.provenance {
            Provenance::Exact => 0.0,
            Provenance::MonteCarlo { stderr, .. } => stderr.iter().cloned().fold(0.0, f64::max),
        }
    }
}

/// `Omega^0_{x j}` for every `x`: the solution of the Dirichlet problem with
/// `I` at `j` and harmonic elsewhere.
pub fn omega0_column(cg: &ConnectionGraph, j: usize) -> Result<BlockVector> {
    cg.graph().check_vertex(j)?;
    let bd = BoundaryData::new(cg.n(), [(j, DMatrix::identity(cg.d(), cg.d()))])?;
    solve_dirichlet(cg, &bd)
}

/// `Omega^0_{ij} = -((L_{j^c})^{-1} L_{j^c, j})(i)`, and `I` when `i == j`.
pub fn omega0(cg: &ConnectionGraph, i: usize, j: usize) -> Result<MeanPathSignature> {
    cg.graph().check_vertex(i)?;
    let col = omega0_column(cg, j)?;
    Ok(MeanPathSignature::exact(
        col.block_owned(i),
        OmegaKind::Hitting {
            start: i,
            target: j,
        },
    ))
}

/// `L / L_{i^c}`, the Schur complement onto the single block of `i`.
pub fn vertex_schur(cg: &ConnectionGraph, i: usize) -> Result<DMatrix<f64>> {
    cg.graph().check_vertex(i)?;
    let others = IndexSet::new((0..cg.n()).filter(|&x| x != i), cg.n())?;
    schur_complement(&cg.laplacian(), &others, cg.d(), false)
}

/// `Omega^1_i = I - (L / L_{i^c}) / deg(i)`, symmetrized.
pub fn omega1_loop(cg: &ConnectionGraph, i: usize) -> Result<MeanPathSignature> {
    let s = vertex_schur(cg, i)?;
    let d = cg.d();
    let m = DMatrix::identity(d, d) - s / cg.graph().degree(i);
    let m = (&m + m.transpose()) * 0.5;
    Ok(MeanPathSignature::exact(m, OmegaKind::Loop { vertex: i }))
}

/// `P^x[T_i^0 < T_j^0]`: the classical voltage at `x` with 1 at `i`, 0 at `j`.
pub fn hitting_probability(g: &WeightedGraph, x: usize, i: usize, j: usize) -> Result<f64> {
    g.check_vertex(x)?;
    Ok(hitting_probabilities(g, i, j)?[x])
}

/// `P^x[T_i^0 < T_j^0]` for every `x`.
pub fn hitting_probabilities(g: &WeightedGraph, i: usize, j: usize) -> Result<Vec<f64>> {
    g.check_pair(i, j)?;
    let n = g.n();
    let l = g.laplacian();
    let interior: Vec<usize> = (0..n).filter(|&x| x != i && x != j).collect();
    let mut out = vec![0.0; n];
    out[i] = 1.0;
    if !interior.is_empty() {
        let rhs = -select(&l, &interior, &[i]);
        let sol = solve_spd(&select(&l, &interior, &interior), &rhs)?;
        for (k, &x) in interior.iter().enumerate() {
            out[x] = sol[(k, 0)].clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// `Omega^s_{start,target}(avoid)`, the mean path signature from `start`
/// stopped at `target`, conditioned on reaching `target` before `avoid`.
///
/// Off `{target, avoid}` the value is `V_{target->avoid}(start)` divided by the
/// hitting probability. For `s = 1` with `start` in `{target, avoid}` the first
/// step is peeled off: `sum_y P_{start,y} sigma_{start,y} V(y)` over
/// `sum_y P_{start,y} P^y[T_target < T_avoid]`.
pub fn omega_conditioned(
    cg: &ConnectionGraph,
    start: usize,
    target: usize,
    avoid: usize,
    step: Step,
) -> Result<MeanPathSignature> {
    let g = cg.graph();
    g.check_vertex(start)?;
    g.check_vertex(target)?;
    g.check_vertex(avoid)?;
    let kind = OmegaKind::Conditioned {
        start,
        target,
        avoid,
        step,
    };
    let d = cg.d();
    if target == avoid {
        return Err(Error::UnreachableConditioning { probability: 0.0 });
    }
    let first_step = step == Step::One && (start == target || start == avoid);
    if !first_step {
        if start == target {
            return Ok(MeanPathSignature::exact(DMatrix::identity(d, d), kind));
        }
        if start == avoid {
            return Err(Error::UnreachableConditioning { probability: 0.0 });
        }
    }
    let v = voltage_function(cg, target, avoid)?;
    let h = hitting_probabilities(g, target, avoid)?;
    let (num, prob) = if first_step {
        let deg = g.degree(start);
        let mut num = DMatrix::zeros(d, d);
        let mut prob = 0.0;
        for (y, w, s) in cg.arcs(start) {
            num += s * v.block(y) * (w / deg);
            prob += h[y] * w / deg;
        }
        (num, prob)
    } else {
        (v.block_owned(start), h[start])
    };
    if prob <= PROB_FLOOR {
        return Err(if start == target {
            Error::DegenerateConditioning { probability: prob }
        } else {
            Error::UnreachableConditioning { probability: prob }
        });
    }
    let mut value = num / prob;
    if start == target {
        value = (&value + value.transpose()) * 0.5;
    }
    Ok(MeanPathSignature::exact(value, kind))
}

/// `Omega^0_{x i}(j)`: walks from `x` that reach `i` before `j`.
pub fn omega0_conditioned(
    cg: &ConnectionGraph,
    x: usize,
    i: usize,
    j: usize,
) -> Result<MeanPathSignature> {
    omega_conditioned(cg, x, i, j, Step::Zero)
}

/// `Omega^1_{ii}(j)`: mean product over loops at `i` that avoid `j`.
pub fn omega1_conditioned_loop(
    cg: &ConnectionGraph,
    i: usize,
    j: usize,
) -> Result<MeanPathSignature> {
    cg.graph().check_pair(i, j)?;
    omega_conditioned(cg, i, i, j, Step::One)
}

/// `Omega^1_{ij}(i)`: walks leaving `i` that reach `j` before returning.
pub fn omega1_escape(cg: &ConnectionGraph, i: usize, j: usize) -> Result<MeanPathSignature> {
    cg.graph().check_pair(i, j)?;
    omega_conditioned(cg, i, j, i, Step::One)
}

/// Mean path signature and the probability of the conditioning event,
/// evaluated by summing walk contributions in order of walk length.
///
/// Iterates `A(x) <- sum_y P_{xy} sigma_{xy} B(y)` with `B = I` at `target`,
/// `0` at `avoid` and `B = A` elsewhere, starting from zero; the k-th iterate
/// holds the contribution of walks of length at most k.
pub fn omega_by_path_sums(
    cg: &ConnectionGraph,
    start: usize,
    target: usize,
    avoid: Option<usize>,
    step: Step,
    tol: f64,
    max_iter: usize,
) -> Result<(DMatrix<f64>, f64)> {
    let (n, d) = (cg.n(), cg.d());
    let g = cg.graph();
    g.check_vertex(start)?;
    g.check_vertex(target)?;
    if let Some(a) = avoid {
        g.check_vertex(a)?;
        if a == target {
            return Err(Error::UnreachableConditioning { probability: 0.0 });
        }
    }
    let boundary = |y: usize| y == target || Some(y) == avoid;
    let eye = DMatrix::<f64>::identity(d, d);
    let zero = DMatrix::<f64>::zeros(d, d);
    let mut a = vec![zero.clone(); n];
    let mut p = vec![0.0; n];
    let value_at = |a: &[DMatrix<f64>], p: &[f64], y: usize| -> (DMatrix<f64>, f64) {
        if y == target {
            (eye.clone(), 1.0)
        } else if Some(y) == avoid {
            (zero.clone(), 0.0)
        } else {
            (a[y].clone(), p[y])
        }
    };
    let mut converged = false;
    for _ in 0..max_iter {
        let mut change = 0.0_f64;
        let mut next_a = a.clone();
        let mut next_p = p.clone();
        for x in (0..n).filter(|&x| !boundary(x)) {
            let deg = g.degree(x);
            let mut acc = DMatrix::zeros(d, d);
            let mut pacc = 0.0;
            for (y, w, s) in cg.arcs(x) {
                let (by, py) = value_at(&a, &p, y);
                acc += s * by * (w / deg);
                pacc += py * w / deg;
            }
            change = change
                .max((&acc - &a[x]).abs().max())
                .max((pacc - p[x]).abs());
            next_a[x] = acc;
            next_p[x] = pacc;
        }
        a = next_a;
        p = next_p;
        if change <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InvalidParameter(format!(
            "path sums did not converge in {max_iter} iterations"
        )));
    }
    let (num, prob) = if boundary(start) && step == Step::One {
        let deg = g.degree(start);
        let mut acc = DMatrix::zeros(d, d);
        let mut pacc = 0.0;
        for (y, w, s) in cg.arcs(start) {
            let (by, py) = value_at(&a, &p, y);
            acc += s * by * (w / deg);
            pacc += py * w / deg;
        }
        (acc, pacc)
    } else {
        value_at(&a, &p, start)
    };
    if prob <= PROB_FLOOR {
        return Err(Error::UnreachableConditioning { probability: prob });
    }
    Ok((num / prob, prob))
}

/// Random walk sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkConfig {
    pub samples: usize,
    pub seed: u64,
    pub max_steps: usize,
}

impl WalkConfig {
    pub fn new(samples: usize, seed: u64, max_steps: usize) -> Result<Self> {
        if samples == 0 || max_steps == 0 {
            return Err(Error::InvalidParameter(
                "samples and max_steps must be positive".into(),
            ));
        }
        Ok(WalkConfig {
            samples,
            seed,
            max_steps,
        })
    }

    /// Step cap `100 n^2 max_deg / min_weight`.
    pub fn default_max_steps(g: &WeightedGraph) -> usize {
        let n = g.n() as f64;
        let max_deg = g.degrees().iter().cloned().fold(0.0, f64::max);
        let min_w = g.edges().iter().map(|e| e.w).fold(f64::INFINITY, f64::min);
        (100.0 * n * n * max_deg / min_w).ceil().min(1e9) as usize
    }

    pub fn with_default_cap(g: &WeightedGraph, samples: usize, seed: u64) -> Result<Self> {
        WalkConfig::new(samples, seed, WalkConfig::default_max_steps(g).max(1))
    }
}

enum WalkOutcome {
    Accepted(DMatrix<f64>),
    Rejected,
    Censored,
}

struct Sampler<'a> {
    cg: &'a ConnectionGraph,
    cumulative: Vec<Vec<f64>>,
}

impl<'a> Sampler<'a> {
    fn new(cg: &'a ConnectionGraph) -> Self {
        let cumulative = (0..cg.n())
            .map(|x| {
                let mut acc = 0.0;
                cg.arcs(x)
                    .map(|(_, w, _)| {
                        acc += w;
                        acc
                    })
                    .collect()
            })
            .collect();
        Sampler { cg, cumulative }
    }

    fn next_arc(&self, x: usize, rng: &mut ChaCha8Rng) -> usize {
        let cum = &self.cumulative[x];
        let u = rng.gen::<f64>() * cum[cum.len() - 1];
        cum.partition_point(|&c| c <= u).min(cum.len() - 1)
    }

    fn walk(
        &self,
        start: usize,
        target: usize,
        step: Step,
        condition: Option<usize>,
        max_steps: usize,
        rng: &mut ChaCha8Rng,
    ) -> WalkOutcome {
        let d = self.cg.d();
        let mut prod = DMatrix::<f64>::identity(d, d);
        let mut x = start;
        let mut t = 0usize;
        loop {
            if t >= step.offset() {
                if x == target {
                    return if condition == Some(target) {
                        WalkOutcome::Rejected
                    } else {
                        WalkOutcome::Accepted(prod)
                    };
                }
                if Some(x) == condition {
                    return WalkOutcome::Rejected;
                }
            }
            if t == max_steps {
                return WalkOutcome::Censored;
            }
            let k = self.next_arc(x, rng);
            let (y, _, s) = self.cg.arcs(x).nth(k).expect("arc index in range");
            prod *= s;
            x = y;
            t += 1;
        }
    }
}

const CHUNK: usize = 4096;

/// Per-chunk sum, sum of squares, accepted, rejected and censored counts.
type ChunkSums = (DMatrix<f64>, DMatrix<f64>, usize, usize, usize);

/// Monte Carlo estimate of `E^start[prod sigma | T_target^s < T_condition^s]`
/// (unconditioned when `condition` is `None`).
///
/// Sample `k` draws from its own ChaCha8 stream (`seed`, stream `k`), and
/// chunk partial sums are merged in index order, so the result is identical
/// whatever the thread count.
pub fn mc_mean_path(
    cg: &ConnectionGraph,
    start: usize,
    target: usize,
    step: Step,
    condition: Option<usize>,
    cfg: &WalkConfig,
) -> Result<MeanPathSignature> {
    let g = cg.graph();
    g.check_vertex(start)?;
    g.check_vertex(target)?;
    if let Some(k) = condition {
        g.check_vertex(k)?;
    }
    if cfg.samples == 0 || cfg.max_steps == 0 {
        return Err(Error::InvalidParameter(
            "samples and max_steps must be positive".into(),
        ));
    }
    let d = cg.d();
    let sampler = Sampler::new(cg);
    let chunks = cfg.samples.div_ceil(CHUNK);
    let partials: Vec<ChunkSums> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut sum = DMatrix::zeros(d, d);
            let mut sumsq = DMatrix::zeros(d, d);
            let (mut acc, mut rej, mut cen) = (0, 0, 0);
            for k in c * CHUNK..((c + 1) * CHUNK).min(cfg.samples) {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(k as u64);
                match sampler.walk(start, target, step, condition, cfg.max_steps, &mut rng) {
                    WalkOutcome::Accepted(p) => {
                        sumsq += p.component_mul(&p);
                        sum += p;
                        acc += 1;
                    }
                    WalkOutcome::Rejected => rej += 1,
                    WalkOutcome::Censored => cen += 1,
                }
            }
            (sum, sumsq, acc, rej, cen)
        })
        .collect();
    let mut sum = DMatrix::zeros(d, d);
    let mut sumsq = DMatrix::zeros(d, d);
    let (mut accepted, mut rejected, mut censored) = (0, 0, 0);
    for (s, sq, a, r, c) in partials {
        sum += s;
        sumsq += sq;
        accepted += a;
        rejected += r;
        censored += c;
    }
    if censored > 0 {
        log::warn!(
            "{censored} of {} walks hit the {}-step cap and were discarded",
            cfg.samples,
            cfg.max_steps
        );
    }
    if accepted == 0 {
        return Err(if censored == cfg.samples {
            Error::AllCensored(censored)
        } else {
            Error::ZeroAcceptance { rejected, censored }
        });
    }
    let na = accepted as f64;
    let mean = &sum / na;
    let stderr = if accepted > 1 {
        DMatrix::from_fn(d, d, |r, c| {
            let var = ((sumsq[(r, c)] - na * mean[(r, c)] * mean[(r, c)]) / (na - 1.0)).max(0.0);
            (var / na).sqrt()
        })
    } else {
        DMatrix::from_element(d, d, f64::INFINITY)
    };
    let kind = match (step, condition) {
        (Step::Zero, None) => OmegaKind::Hitting { start, target },
        (Step::One, None) if start == target => OmegaKind::Loop { vertex: start },
        (step, Some(avoid)) => OmegaKind::Conditioned {
            start,
            target,
            avoid,
            step,
        },
        (Step::One, None) => OmegaKind::Hitting { start, target },
    };
    Ok(MeanPathSignature {
        value: mean,
        kind,
        provenance: Provenance::MonteCarlo {
            samples: cfg.samples,
            accepted,
            rejected,
            censored,
            stderr,
        },
    })
}

/// Result of checking `f(i) = Omega^0_{ij} f(j)` for a kernel element `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportReport {
    pub kernel_residual: f64,
    pub max_transport_residual: f64,
    pub holds: bool,
}

/// Transport tolerance for [`kernel_transport_check`].
pub const TRANSPORT_TOL: f64 = 1e-8;

/// Verify that a kernel element of `L` is transported by `Omega^0` between
/// every pair of vertices.
pub fn kernel_transport_check(cg: &ConnectionGraph, f: &BlockVector) -> Result<TransportReport> {
    let lf = cg.apply_laplacian(f)?;
    let scale = 1.0_f64.max(f.norm());
    let kernel_residual = lf.norm() / scale;
    if kernel_residual > 1e-9 {
        return Err(Error::NotInKernel(kernel_residual));
    }
    let mut worst = 0.0_f64;
    for j in 0..cg.n() {
        let col = omega0_column(cg, j)?;
        for i in 0..cg.n() {
            let res = (f.block(i) - col.block(i) * f.block(j)).norm() / scale;
            worst = worst.max(res);
        }
    }
    Ok(TransportReport {
        kernel_residual,
        max_transport_residual: worst,
        holds: worst <= TRANSPORT_TOL,
    })
}

/// `Omega^0_{ij}` read from the block structure of the Laplacian directly,
/// eliminating `j`'s complement: used to cross-check [`omega0`].
pub fn omega0_via_blocks(cg: &ConnectionGraph, i: usize, j: usize) -> Result<DMatrix<f64>> {
    cg.graph().check_vertex(i)?;
    cg.graph().check_vertex(j)?;
    let d = cg.d();
    if i == j {
        return Ok(DMatrix::identity(d, d));
    }
    let l = cg.laplacian();
    let rest: Vec<usize> = (0..cg.n()).filter(|&x| x != j).collect();
    let rows = block_indices(&rest, d);
    let jc = block_indices(&[j], d);
    let sol = solve_spd(&select(&l, &rows, &rows), &(-select(&l, &rows, &jc)))?;
    let k = rest.iter().position(|&x| x == i).expect("i != j");
    Ok(sol.view((k * d, 0), (d, d)).into_owned())
}
