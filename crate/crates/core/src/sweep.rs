//! Parameter sweeps: one signature edge is rotated over a grid of angles and
//! the requested quantities are recorded per grid point.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::builders::{cycle, dumbbell, wheatstone, DumbbellLayout};
use crate::conductance::conductance_matrix;
use crate::error::{Error, Result};
use crate::graph::{ConnectionGraph, Signature};
use crate::io::{csv_writer, fmt_real, one_based};
use crate::linalg::rotation2;
use crate::resistance::{
    chung_connection_resistance, classical_effective_resistance, resistance_matrix,
    scalar_connection_resistance,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builder {
    Cycle {
        n: usize,
    },
    Wheatstone,
    Dumbbell {
        m: usize,
        theta12: f64,
        theta23: f64,
        layout: DumbbellLayout,
    },
}

impl Builder {
    /// Graph at the builder's fixed parameters (zero angle where it has one).
    pub fn base(&self) -> Result<ConnectionGraph> {
        match *self {
            Builder::Cycle { n } => cycle(n, 0.0),
            Builder::Wheatstone => wheatstone(0.0, None),
            Builder::Dumbbell {
                m,
                theta12,
                theta23,
                layout,
            } => dumbbell(m, theta12, theta23, layout),
        }
    }

    /// Default swept edge, 0-based and oriented.
    pub fn default_edge(&self) -> (usize, usize) {
        match self {
            Builder::Cycle { .. } => (0, 1),
            Builder::Wheatstone => (1, 3),
            Builder::Dumbbell { .. } => (0, 1),
        }
    }

    /// Default vertex pair, 0-based. Cycles through the swept edge must pass
    /// the pair for the scalar resistance to respond, so the Wheatstone
    /// default is the bridge terminals (1,4) and the dumbbell default spans
    /// both cliques.
    pub fn default_pair(&self) -> Result<(usize, usize)> {
        Ok(match self {
            Builder::Cycle { .. } => (0, 1),
            Builder::Wheatstone => (0, 3),
            Builder::Dumbbell { .. } => (0, self.base()?.n() - 1),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    ScalarCr,
    ChungCr,
    ClassicalEr,
    ConductanceBlocks,
    ResistanceBlocks,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::ScalarCr => "scalar_cr",
            Quantity::ChungCr => "chung_cr",
            Quantity::ClassicalEr => "classical_er",
            Quantity::ConductanceBlocks => "conductance_blocks",
            Quantity::ResistanceBlocks => "resistance_blocks",
        }
    }

    /// Accepts both `scalar_cr` and `scalar-cr` spellings.
    pub fn parse(s: &str) -> Option<Quantity> {
        match s.replace('-', "_").as_str() {
            "scalar_cr" => Some(Quantity::ScalarCr),
            "chung_cr" => Some(Quantity::ChungCr),
            "classical_er" => Some(Quantity::ClassicalEr),
            "conductance_blocks" => Some(Quantity::ConductanceBlocks),
            "resistance_blocks" => Some(Quantity::ResistanceBlocks),
            _ => None,
        }
    }

    fn columns(&self, d: usize) -> Vec<String> {
        let prefix = match self {
            Quantity::ConductanceBlocks => "C",
            Quantity::ResistanceBlocks => "R",
            other => return vec![other.name().to_string()],
        };
        let mut out = Vec::with_capacity(4 * d * d);
        for block in ["ii", "ij", "ji", "jj"] {
            for r in 1..=d {
                for c in 1..=d {
                    out.push(format!("{prefix}_{block}_{r}{c}"));
                }
            }
        }
        out
    }
}

/// `steps` equally spaced angles from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl ThetaGrid {
    pub fn new(start: f64, stop: f64, steps: usize) -> Result<Self> {
        if steps < 2 || !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidParameter(
                "theta grid needs finite bounds and at least 2 steps".into(),
            ));
        }
        Ok(ThetaGrid { start, stop, steps })
    }

    /// Parse `start:stop:steps`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidParameter(format!("theta grid {s:?} is not start:stop:steps"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parse_angle(parts[0]).ok_or_else(bad)?;
        let stop = parse_angle(parts[1]).ok_or_else(bad)?;
        let steps = parts[2].trim().parse().map_err(|_| bad())?;
        ThetaGrid::new(start, stop, steps)
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.steps - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.steps {
            self.stop
        } else {
            self.start + k as f64 * self.step()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.steps).map(|k| self.point(k)).collect()
    }
}

/// A real number, optionally written as a multiple of `pi` (`2pi`, `pi/2`).
pub fn parse_angle(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return Some(x);
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim().parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let coef = num.strip_suffix("pi")?.trim();
    let coef = match coef {
        "" => 1.0,
        "-" => -1.0,
        c => c.trim_end_matches('*').parse::<f64>().ok()?,
    };
    Some(coef * std::f64::consts::PI / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub builder: Builder,
    /// Swept edge, 0-based, oriented `u -> v`.
    pub edge: (usize, usize),
    pub grid: ThetaGrid,
    pub quantities: Vec<Quantity>,
    /// Vertex pair, 0-based.
    pub pair: (usize, usize),
}

/// `diag(I_{d-2}, R(theta))`; requires `d >= 2`.
pub fn embedded_rotation(d: usize, theta: f64) -> Result<DMatrix<f64>> {
    if d < 2 {
        return Err(Error::InvalidParameter(
            "rotation sweeps need d >= 2".into(),
        ));
    }
    let mut m = DMatrix::identity(d, d);
    m.view_mut((d - 2, d - 2), (2, 2))
        .copy_from(&rotation2(theta));
    Ok(m)
}

/// `cg` with the signature on `edge` replaced by `rot`, oriented `u -> v`.
pub fn with_edge_signature(
    cg: &ConnectionGraph,
    edge: (usize, usize),
    rot: &DMatrix<f64>,
) -> Result<ConnectionGraph> {
    let (a, b) = edge;
    if !cg.graph().has_edge(a, b) {
        return Err(Error::NotAnEdge(a, b));
    }
    let entries = cg.signature().iter().map(|(&(u, v), s)| {
        let m = if (u, v) == (a, b) {
            rot.clone()
        } else if (u, v) == (b, a) {
            rot.transpose()
        } else {
            s.clone()
        };
        (u, v, m)
    });
    cg.with_signature(Signature::new(cg.d(), entries)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    /// One value per column, `NaN` where a quantity failed.
    pub values: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub header: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Column values by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?.checked_sub(1)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    /// CSV with header `theta,<columns>,status`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            let mut rec = vec![fmt_real(row.theta)];
            rec.extend(row.values.iter().map(|&x| fmt_real(x)));
            rec.push(row.error.clone().unwrap_or_else(|| "ok".into()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn evaluate(cg: &ConnectionGraph, q: Quantity, pair: (usize, usize)) -> Result<Vec<f64>> {
    let (i, j) = pair;
    let blocks = |m: crate::conductance::PairMatrix| {
        let mut out = Vec::new();
        for b in [m.ii(), m.ij(), m.ji(), m.jj()] {
            for r in 0..b.nrows() {
                out.extend(b.row(r).iter().copied());
            }
        }
        out
    };
    Ok(match q {
        Quantity::ScalarCr => vec![scalar_connection_resistance(cg, i, j)?],
        Quantity::ChungCr => vec![chung_connection_resistance(cg, i, j)?],
        Quantity::ClassicalEr => vec![classical_effective_resistance(cg.graph(), i, j)?],
        Quantity::ConductanceBlocks => blocks(conductance_matrix(cg, i, j)?),
        Quantity::ResistanceBlocks => blocks(resistance_matrix(cg, i, j)?),
    })
}

/// Evaluate the sweep at every grid point (in parallel); rows come back in
/// grid order and failing points carry their error instead of aborting.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    if spec.quantities.is_empty() {
        return Err(Error::InvalidParameter("no quantities requested".into()));
    }
    let base = spec.builder.base()?;
    base.graph().check_vertex(spec.pair.0)?;
    base.graph().check_vertex(spec.pair.1)?;
    base.graph().check_pair(spec.pair.0, spec.pair.1)?;
    if !base.graph().has_edge(spec.edge.0, spec.edge.1) {
        return Err(Error::NotAnEdge(spec.edge.0, spec.edge.1));
    }
    let d = base.d();
    embedded_rotation(d, 0.0)?;
    let mut header = vec!["theta".to_string()];
    for q in &spec.quantities {
        header.extend(q.columns(d));
    }
    header.push("status".into());
    let width = header.len() - 2;
    let rows = (0..spec.grid.steps)
        .into_par_iter()
        .map(|k| {
            let theta = spec.grid.point(k);
            let cg = match embedded_rotation(d, theta)
                .and_then(|r| with_edge_signature(&base, spec.edge, &r))
            {
                Ok(cg) => cg,
                Err(e) => {
                    return SweepRow {
                        theta,
                        values: vec![f64::NAN; width],
                        error: Some(one_based(e).to_string()),
                    }
                }
            };
            let mut values = Vec::with_capacity(width);
            let mut errors = Vec::new();
            for &q in &spec.quantities {
                match evaluate(&cg, q, spec.pair) {
                    Ok(v) => values.extend(v),
                    Err(e) => {
                        values.extend(std::iter::repeat_n(f64::NAN, q.columns(d).len()));
                        errors.push(format!("{}: {}", q.name(), one_based(e)));
                    }
                }
            }
            SweepRow {
                theta,
                values,
                error: (!errors.is_empty()).then(|| errors.join("; ")),
            }
        })
        .collect();
    Ok(SweepResult { header, rows })
}
