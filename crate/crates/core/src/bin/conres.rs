use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use conres::builders::{cycle, dumbbell, wheatstone, DumbbellLayout};
use conres::check::{run_checks, CheckOptions, IDENTITY_TOL, MC_Z_LIMIT};
use conres::conductance::conductance_matrix;
use conres::decompose::{is_consistent, nullity, nullity_with_tol};
use conres::io::{
    fmt_real, one_based, write_matrix, write_pair_matrix, DocumentError, GraphDocument, Metadata,
};
use conres::meanpath::{mc_mean_path, omega0, omega1_escape, Provenance, Step, WalkConfig};
use conres::resistance::{
    chung_connection_resistance, classical_effective_resistance, resistance_matrix,
    scalar_connection_resistance,
};
use conres::sweep::{parse_angle, run_sweep, Builder, Quantity, SweepSpec, ThetaGrid};
use conres::{ConnectionGraph, Error};

#[derive(Parser)]
#[command(
    name = "conres",
    version,
    about = "Effective conductance and resistance on connection graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one quantity for a vertex pair of a graph document.
    Compute(ComputeArgs),
    /// Write a graph document produced by one of the builders.
    Gen(GenArgs),
    /// Rotate one edge signature over a grid of angles and tabulate quantities.
    Sweep(SweepArgs),
    /// Run the identity suite on a vertex pair.
    Check(CheckArgs),
}

#[derive(Args)]
struct ComputeArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Vertex pair, 1-based; not needed for nullity and consistent.
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pair: Vec<usize>,
    #[arg(long, value_enum)]
    quantity: ComputeQuantity,
    /// Estimate omega0 from this many random walks instead of solving exactly.
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative eigenvalue threshold for the nullity.
    #[arg(long)]
    rank_tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComputeQuantity {
    ClassicalEr,
    ChungCr,
    ScalarCr,
    #[value(alias = "conductance-blocks")]
    Conductance,
    #[value(alias = "resistance-blocks")]
    Resistance,
    Omega0,
    /// Mean path signature of walks from i that return to i before reaching j.
    Omega1,
    Nullity,
    Consistent,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    builder: GenBuilder,
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenBuilder {
    /// Cycle with a planar rotation on edge (1,2).
    Cycle {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_parser = angle, default_value = "0")]
        theta: f64,
    },
    /// Wheatstone bridge with a rotation on one edge.
    Wheatstone {
        #[arg(long, value_parser = angle, default_value = "0")]
        theta: f64,
        /// Rotated edge, 1-based.
        #[arg(long, num_args = 2, value_names = ["U", "V"])]
        edge: Option<Vec<usize>>,
    },
    /// Two cliques joined by a bridge carrying rotations on (1,2) and (2,3).
    Dumbbell {
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, value_parser = angle, default_value = "0")]
        theta12: f64,
        #[arg(long, value_parser = angle, default_value = "0")]
        theta23: f64,
        #[arg(long, value_enum, default_value_t = Layout::Bridge)]
        layout: Layout,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    Bridge,
    InClique,
}

impl From<Layout> for DumbbellLayout {
    fn from(l: Layout) -> Self {
        match l {
            Layout::Bridge => DumbbellLayout::Bridge,
            Layout::InClique => DumbbellLayout::InClique,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepBuilder {
    Cycle,
    Wheatstone,
    Dumbbell,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    builder: SweepBuilder,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    m: usize,
    #[arg(long, value_parser = angle, default_value = "0")]
    theta12: f64,
    #[arg(long, value_parser = angle, default_value = "0")]
    theta23: f64,
    #[arg(long, value_enum, default_value_t = Layout::Bridge)]
    layout: Layout,
    /// Swept edge, 1-based and oriented; defaults to the builder's signed edge.
    #[arg(long, num_args = 2, value_names = ["U", "V"])]
    edge: Option<Vec<usize>>,
    #[arg(long, default_value = "0:2pi:200")]
    theta_grid: String,
    /// Comma-separated subset of scalar-cr, chung-cr, classical-er,
    /// conductance-blocks, resistance-blocks. chung-cr needs the pair to be an
    /// edge once the signature is inconsistent.
    #[arg(long, value_delimiter = ',', default_value = "scalar-cr,classical-er")]
    quantity: Vec<String>,
    /// Vertex pair, 1-based; defaults to a pair that the swept edge influences.
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pair: Option<Vec<usize>>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pair: Vec<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance for the deterministic identities.
    #[arg(long, default_value_t = IDENTITY_TOL)]
    tolerance: f64,
    /// Monte Carlo agreement threshold in standard errors.
    #[arg(long, default_value_t = MC_Z_LIMIT)]
    z_limit: f64,
}

fn angle(s: &str) -> Result<f64, String> {
    parse_angle(s)
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("{s:?} is not an angle"))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(Error),
    #[error("{0}")]
    Compute(Error),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0} of {1} identities failed")]
    CheckFailed(usize, usize),
    #[error("{0} of {1} grid points failed")]
    SweepFailed(usize, usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Compute(_) | CliError::Io(_) | CliError::SweepFailed(..) => 4,
            CliError::CheckFailed(..) => 5,
        }
    }
}

/// Report library errors with 1-based vertex ids.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let e = one_based(e);
        if e.is_validation() {
            CliError::Validation(e)
        } else {
            CliError::Compute(e)
        }
    }
}

impl From<DocumentError> for CliError {
    fn from(e: DocumentError) -> Self {
        match e {
            DocumentError::Parse(m) => CliError::Parse(m),
            DocumentError::Io(e) => CliError::Parse(e.to_string()),
            DocumentError::Invalid(e) => CliError::Validation(e),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

fn load(path: &Path) -> Result<ConnectionGraph, CliError> {
    Ok(GraphDocument::read(path)?.to_graph()?)
}

/// Translate a 1-based pair, rejecting out-of-range or repeated ids.
fn pair(ids: &[usize], n: usize) -> Result<(usize, usize), CliError> {
    let zero = |x: usize| match x {
        1.. if x <= n => Ok(x - 1),
        _ => Err(CliError::Validation(Error::VertexOutOfRange {
            vertex: x,
            n,
        })),
    };
    let [a, b] = ids else {
        return Err(CliError::Validation(Error::InvalidParameter(
            "--pair I J is required".into(),
        )));
    };
    let (i, j) = (zero(*a)?, zero(*b)?);
    if i == j {
        return Err(CliError::Validation(Error::SamePair(ids[0])));
    }
    Ok((i, j))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn compute(a: ComputeArgs) -> Result<(), CliError> {
    let cg = load(&a.input)?;
    let mut out = sink(a.output.as_deref())?;
    if let ComputeQuantity::Nullity | ComputeQuantity::Consistent = a.quantity {
        let line = match a.quantity {
            ComputeQuantity::Consistent => is_consistent(&cg).to_string(),
            _ => match a.rank_tol {
                Some(t) => nullity_with_tol(&cg, t),
                None => nullity(&cg),
            }
            .to_string(),
        };
        writeln!(out, "{line}")?;
        out.flush()?;
        return Ok(());
    }
    let (i, j) = pair(&a.pair, cg.n())?;
    match a.quantity {
        ComputeQuantity::ClassicalEr => writeln!(
            out,
            "{}",
            fmt_real(classical_effective_resistance(cg.graph(), i, j)?)
        )?,
        ComputeQuantity::ChungCr => {
            writeln!(out, "{}", fmt_real(chung_connection_resistance(&cg, i, j)?))?
        }
        ComputeQuantity::ScalarCr => writeln!(
            out,
            "{}",
            fmt_real(scalar_connection_resistance(&cg, i, j)?)
        )?,
        ComputeQuantity::Conductance => {
            write_pair_matrix(&mut out, &conductance_matrix(&cg, i, j)?)?
        }
        ComputeQuantity::Resistance => write_pair_matrix(&mut out, &resistance_matrix(&cg, i, j)?)?,
        ComputeQuantity::Omega0 => {
            let est = match a.mc_samples {
                Some(samples) => {
                    let cfg = WalkConfig::with_default_cap(cg.graph(), samples, a.seed)?;
                    mc_mean_path(&cg, i, j, Step::Zero, None, &cfg)?
                }
                None => omega0(&cg, i, j)?,
            };
            if let Provenance::MonteCarlo {
                samples, censored, ..
            } = &est.provenance
            {
                eprintln!(
                    "{samples} walks, {censored} censored, max stderr {:.3e}",
                    est.max_stderr()
                );
            }
            write_matrix(&mut out, &est.value)?
        }
        ComputeQuantity::Omega1 => write_matrix(&mut out, &omega1_escape(&cg, i, j)?.value)?,
        ComputeQuantity::Nullity | ComputeQuantity::Consistent => unreachable!("handled above"),
    }
    out.flush()?;
    Ok(())
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let (cg, name) = match a.builder {
        GenBuilder::Cycle { n, theta } => (cycle(n, theta)?, format!("cycle n={n} theta={theta}")),
        GenBuilder::Wheatstone { theta, edge } => {
            let edge = match edge {
                Some(e) if e.contains(&0) => {
                    return Err(CliError::Validation(Error::VertexOutOfRange {
                        vertex: 0,
                        n: 4,
                    }));
                }
                Some(e) => Some((e[0] - 1, e[1] - 1)),
                None => None,
            };
            (
                wheatstone(theta, edge)?,
                format!("wheatstone theta={theta}"),
            )
        }
        GenBuilder::Dumbbell {
            m,
            theta12,
            theta23,
            layout,
        } => (
            dumbbell(m, theta12, theta23, layout.into())?,
            format!("dumbbell m={m} theta12={theta12} theta23={theta23}"),
        ),
    };
    let doc = GraphDocument::from_graph(
        &cg,
        Some(Metadata {
            name: Some(name),
            description: None,
        }),
    );
    let mut out = sink(a.output.as_deref())?;
    out.write_all(doc.to_json().as_bytes())?;
    out.flush()?;
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), CliError> {
    let builder = match a.builder {
        SweepBuilder::Cycle => Builder::Cycle { n: a.n },
        SweepBuilder::Wheatstone => Builder::Wheatstone,
        SweepBuilder::Dumbbell => Builder::Dumbbell {
            m: a.m,
            theta12: a.theta12,
            theta23: a.theta23,
            layout: a.layout.into(),
        },
    };
    let n = builder.base()?.n();
    let edge = match &a.edge {
        Some(e) => pair(e, n)?,
        None => builder.default_edge(),
    };
    let pair = match &a.pair {
        Some(p) => pair(p, n)?,
        None => builder.default_pair()?,
    };
    let quantities = a
        .quantity
        .iter()
        .map(|q| {
            Quantity::parse(q.trim())
                .ok_or_else(|| Error::InvalidParameter(format!("unknown quantity {q:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SweepSpec {
        builder,
        edge,
        grid: ThetaGrid::parse(&a.theta_grid)?,
        quantities,
        pair,
    };
    let result = run_sweep(&spec)?;
    let mut out = sink(a.output.as_deref())?;
    result.write_csv(&mut out)?;
    out.flush()?;
    match result.failures() {
        0 => Ok(()),
        k => Err(CliError::SweepFailed(k, result.rows.len())),
    }
}

fn check(a: CheckArgs) -> Result<(), CliError> {
    let cg = load(&a.input)?;
    let (i, j) = pair(&a.pair, cg.n())?;
    let opts = CheckOptions {
        mc_samples: a.mc_samples,
        seed: a.seed,
        tolerance: a.tolerance,
        z_limit: a.z_limit,
    };
    let report = run_checks(&cg, i, j, &opts)?;
    let mut out = io::stdout().lock();
    for it in &report.items {
        writeln!(out, "{it}")?;
    }
    let failed = report
        .items
        .iter()
        .filter(|c| c.status == conres::check::Status::Fail)
        .count();
    if failed > 0 {
        return Err(CliError::CheckFailed(failed, report.items.len()));
    }
    writeln!(out, "all identities hold")?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Compute(a) => compute(a),
        Command::Gen(a) => gen(a),
        Command::Sweep(a) => sweep(a),
        Command::Check(a) => check(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("conres: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
