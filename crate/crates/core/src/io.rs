//! JSON graph documents and CSV output.
//!
//! Documents number vertices from 1; everything returned to the library is
//! 0-based.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conductance::PairMatrix;
use crate::error::Error;
use crate::graph::{ConnectionGraph, Signature, WeightedGraph};

pub const FORMAT_TAG: &str = "conres/1";

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    pub w: f64,
    /// Row-major `d x d` signature for the orientation `u -> v`.
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub format: String,
    pub n: usize,
    pub d: usize,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

impl GraphDocument {
    pub fn from_graph(cg: &ConnectionGraph, metadata: Option<Metadata>) -> Self {
        let edges = cg
            .graph()
            .edges()
            .iter()
            .map(|e| {
                let s = cg.sigma(e.u, e.v).expect("edge carries a signature");
                EdgeRecord {
                    u: e.u + 1,
                    v: e.v + 1,
                    w: e.w,
                    sigma: (0..s.nrows())
                        .map(|r| s.row(r).iter().copied().collect())
                        .collect(),
                }
            })
            .collect();
        GraphDocument {
            format: FORMAT_TAG.into(),
            n: cg.n(),
            d: cg.d(),
            edges,
            metadata,
        }
    }

    pub fn parse(text: &str) -> Result<Self, DocumentError> {
        let doc: GraphDocument =
            serde_json::from_str(text).map_err(|e| DocumentError::Parse(e.to_string()))?;
        if doc.format != FORMAT_TAG {
            return Err(DocumentError::Parse(format!(
                "unsupported format {:?}, expected {FORMAT_TAG:?}",
                doc.format
            )));
        }
        Ok(doc)
    }

    pub fn read(path: &std::path::Path) -> Result<Self, DocumentError> {
        GraphDocument::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents always serialize");
        s.push('\n');
        s
    }

    /// Validate and build the connection graph.
    pub fn to_graph(&self) -> Result<ConnectionGraph, DocumentError> {
        let n = self.n;
        let d = self.d;
        let zero_based = |x: usize| {
            x.checked_sub(1)
                .filter(|&v| v < n)
                .ok_or(Error::VertexOutOfRange { vertex: x, n })
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut sigs = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            let (u, v) = (zero_based(e.u)?, zero_based(e.v)?);
            let rows = e.sigma.len();
            let cols = e.sigma.first().map_or(0, Vec::len);
            if rows != d || e.sigma.iter().any(|r| r.len() != d) {
                return Err(Error::SignatureShape {
                    u: e.u,
                    v: e.v,
                    rows,
                    cols,
                    d,
                }
                .into());
            }
            let m = DMatrix::from_fn(d, d, |r, c| e.sigma[r][c]);
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "signature on edge ({}, {}) is not finite",
                    e.u, e.v
                ))
                .into());
            }
            edges.push((u, v, e.w));
            sigs.push((u, v, m));
        }
        let g = WeightedGraph::new(n, edges).map_err(one_based)?;
        let sig = Signature::new(d, sigs).map_err(one_based)?;
        Ok(ConnectionGraph::new(g, sig)?)
    }
}

/// Shift the vertex ids carried by an error from 0-based to 1-based.
pub fn one_based(e: Error) -> Error {
    match e {
        Error::VertexOutOfRange { vertex, n } => Error::VertexOutOfRange {
            vertex: vertex + 1,
            n,
        },
        Error::SignatureShape {
            u,
            v,
            rows,
            cols,
            d,
        } => Error::SignatureShape {
            u: u + 1,
            v: v + 1,
            rows,
            cols,
            d,
        },
        Error::SamePair(x) => Error::SamePair(x + 1),
        Error::NotAnEdge(u, v) => Error::NotAnEdge(u + 1, v + 1),
        Error::NotHarmonic { vertex, residual } => Error::NotHarmonic {
            vertex: vertex + 1,
            residual,
        },
        Error::MissingBoundaryValue(x) => Error::MissingBoundaryValue(x + 1),
        Error::NonOrthogonalSwitch { vertex, deviation } => Error::NonOrthogonalSwitch {
            vertex: vertex + 1,
            deviation,
        },
        Error::NonOrthogonalSignature { u, v, deviation } => Error::NonOrthogonalSignature {
            u: u + 1,
            v: v + 1,
            deviation,
        },
        Error::SelfLoop(x) => Error::SelfLoop(x + 1),
        Error::DuplicateEdge(u, v) => Error::DuplicateEdge(u + 1, v + 1),
        Error::NonpositiveWeight { u, v, w } => Error::NonpositiveWeight {
            u: u + 1,
            v: v + 1,
            w,
        },
        other => other,
    }
}

/// 17 significant digits, round-trip safe.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV writer with LF line endings.
pub fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Emit the blocks of a pair matrix as `block,row,c1..cd` records with
/// blocks labelled `ii`, `ij`, `ji`, `jj`.
pub fn write_pair_matrix<W: Write>(out: W, m: &PairMatrix) -> csv::Result<()> {
    let mut w = csv_writer(out);
    let d = m.d();
    let mut header = vec!["block".to_string(), "row".to_string()];
    header.extend((1..=d).map(|c| format!("c{c}")));
    w.write_record(&header)?;
    for (label, b) in [
        ("ii", m.ii()),
        ("ij", m.ij()),
        ("ji", m.ji()),
        ("jj", m.jj()),
    ] {
        for r in 0..d {
            let mut rec = vec![label.to_string(), (r + 1).to_string()];
            rec.extend(b.row(r).iter().map(|&x| fmt_real(x)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Emit a `d x d` matrix as `row,c1..cd` records.
pub fn write_matrix<W: Write>(out: W, m: &DMatrix<f64>) -> csv::Result<()> {
    let mut w = csv_writer(out);
    let mut header = vec!["row".to_string()];
    header.extend((1..=m.ncols()).map(|c| format!("c{c}")));
    w.write_record(&header)?;
    for r in 0..m.nrows() {
        let mut rec = vec![(r + 1).to_string()];
        rec.extend(m.row(r).iter().map(|&x| fmt_real(x)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{cycle, wheatstone};

    #[test]
    fn round_trip_is_byte_identical() {
        for cg in [
            cycle(3, std::f64::consts::FRAC_PI_2).unwrap(),
            wheatstone(0.3, None).unwrap(),
        ] {
            let text = GraphDocument::from_graph(&cg, None).to_json();
            let doc = GraphDocument::parse(&text).unwrap();
            assert_eq!(doc.to_json(), text);
            let back = doc.to_graph().unwrap();
            assert_eq!(back.laplacian(), cg.laplacian());
        }
    }

    #[test]
    fn ids_are_one_based() {
        let doc = GraphDocument::from_graph(&cycle(3, 0.0).unwrap(), None);
        assert_eq!((doc.edges[0].u, doc.edges[0].v), (1, 2));
        let mut bad = doc.clone();
        bad.edges[0].u = 0;
        assert!(matches!(
            bad.to_graph(),
            Err(DocumentError::Invalid(Error::VertexOutOfRange {
                vertex: 0,
                ..
            }))
        ));
    }

    #[test]
    fn corrupted_sigma_is_a_validation_error() {
        let mut doc = GraphDocument::from_graph(&cycle(3, 0.4).unwrap(), None);
        doc.edges[1].sigma[0][0] = 2.0;
        assert!(matches!(
            doc.to_graph(),
            Err(DocumentError::Invalid(Error::NonOrthogonalSignature {
                u: 2,
                v: 3,
                ..
            }))
        ));
        doc.edges[1].sigma.pop();
        assert!(matches!(
            doc.to_graph(),
            Err(DocumentError::Invalid(Error::SignatureShape { .. }))
        ));
    }

    #[test]
    fn wrong_tag_and_syntax_are_parse_errors() {
        assert!(matches!(
            GraphDocument::parse("{"),
            Err(DocumentError::Parse(_))
        ));
        let text = GraphDocument::from_graph(&cycle(3, 0.0).unwrap(), None)
            .to_json()
            .replace("conres/1", "conres/9");
        assert!(matches!(
            GraphDocument::parse(&text),
            Err(DocumentError::Parse(_))
        ));
    }

    #[test]
    fn reals_keep_17_digits() {
        assert_eq!(fmt_real(2.0 / 3.0), "6.6666666666666663e-1");
        assert_eq!(fmt_real(2.0 / 3.0).parse::<f64>().unwrap(), 2.0 / 3.0);
    }
}
