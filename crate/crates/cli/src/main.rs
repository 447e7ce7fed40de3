use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dso_core::evaporation::{self, SweepOptions};
use dso_core::generate::GraphSpec;
use dso_core::oracle::{self, BuildOptions, Oracle, Query};
use dso_core::verify::{self, Precision, VerifyConfig};
use dso_core::{Graph, TransitionPolicy};

mod bench;

#[derive(Parser)]
#[command(name = "dso", version, about = "Replacement shortest paths from one evaporated fundamental matrix")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess a graph into an oracle file.
    Build(BuildArgs),
    /// Answer a (*, t, F) query from an oracle file.
    Query(QueryArgs),
    /// Sweep alpha from shortest-path to all-path routing.
    Continuum(ContinuumArgs),
    /// Check the oracle against Dijkstra on seeded random graphs.
    Verify(VerifyArgs),
    /// Time oracle queries against Dijkstra recomputation.
    Bench(bench::BenchArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge-list file.
    #[arg(short = 'g', long = "graph")]
    graph: PathBuf,
    #[arg(long, default_value = "degree-weighted")]
    policy: TransitionPolicy,
    /// Compute the exact diameter instead of using (n - 1) * w_max.
    #[arg(long)]
    exact_diameter: bool,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Output oracle file.
    #[arg(short = 'o', long = "oracle")]
    oracle: PathBuf,
    /// Evaporation factor; defaults to the safe bound.
    #[arg(long)]
    alpha: Option<f64>,
    /// Accept an alpha above the safe bound.
    #[arg(long = "unsafe")]
    allow_unsafe: bool,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
    Tsv,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(short = 'o', long = "oracle")]
    oracle: PathBuf,
    #[arg(short = 't', long)]
    target: usize,
    /// Comma-separated failed nodes; empty for none.
    #[arg(short = 'F', long = "failures", default_value = "", allow_hyphen_values = true)]
    failures: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Rebuild the matrix in multiprecision before querying.
    #[arg(long, default_value = "f64")]
    precision: Precision,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct ContinuumArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(short = 't', long)]
    target: usize,
    /// Comma-separated alphas; defaults to the bound, 0.3, 0.6, 0.9 and 1.
    #[arg(long)]
    alphas: Option<String>,
    /// Also report U - L against exact distances.
    #[arg(long)]
    reference: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Output file for json/tsv, directory for dot.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    instances: usize,
    #[arg(long, default_value_t = 4)]
    min_n: usize,
    #[arg(long, default_value_t = 25)]
    max_n: usize,
    #[arg(long, default_value_t = 4)]
    max_out_degree: usize,
    /// Reject graphs whose diameter exceeds this; 0 disables.
    #[arg(long, default_value_t = 8)]
    max_diameter: u64,
    #[arg(long, default_value = "mp")]
    precision: Precision,
    #[arg(long, default_value = "degree-weighted")]
    policy: TransitionPolicy,
    /// Use (n - 1) * w_max in the bound instead of the exact diameter.
    #[arg(long)]
    loose_diameter: bool,
    /// Corrupt one matrix entry of the first instance.
    #[arg(long)]
    perturb: bool,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    #[arg(long)]
    no_timing: bool,
}

/// Failure mapped onto the process exit code.
pub(crate) enum Failure {
    Usage(String),
    Verification(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<dso_core::Error> for Failure {
    fn from(e: dso_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

pub(crate) type CmdResult = Result<(), Failure>;

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => Failure::Usage(format!("no such file: {}", path.display())),
        _ => Failure::Usage(format!("{}: {e}", path.display())),
    })
}

fn write_output(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn load_graph(args: &GraphArgs) -> Result<Graph, Failure> {
    let bytes = read_file(&args.graph)?;
    let text = String::from_utf8(bytes).map_err(|_| Failure::Usage(format!("{} is not UTF-8", args.graph.display())))?;
    let g = Graph::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", args.graph.display())))?;
    Ok(if args.exact_diameter { g.with_exact_diameter() } else { g })
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Failure::Usage(format!("invalid {what} {s:?}"))))
        .collect()
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn build(args: BuildArgs) -> CmdResult {
    let g = load_graph(&args.graph)?;
    let opts = BuildOptions { alpha: args.alpha, allow_unsafe: args.allow_unsafe, policy: args.graph.policy };
    let start = Instant::now();
    let o = oracle::preprocess(&g, &opts)?;
    let elapsed = millis(start);
    let mut file = fs::File::create(&args.oracle).map_err(|e| Failure::Usage(format!("{}: {e}", args.oracle.display())))?;
    o.save(&mut file)?;

    let bound = o.alpha_bound().map_or("underflow".to_string(), |b| b.to_string());
    let mut report = format!("n\t{}\nedges\t{}\nalpha\t{}\nalpha_bound\t{bound}\n", g.n(), g.edge_count(), o.alpha());
    report.push_str(&format!("unsafe\t{}\nresidual\t{:e}\n", o.is_unsafe(), o.residual()));
    if !args.no_timing {
        report.push_str(&format!("build_ms\t{elapsed:.3}\n"));
    }
    write_output(None, &report)
}

fn query(args: QueryArgs) -> CmdResult {
    let bytes = read_file(&args.oracle)?;
    let o = Oracle::from_bytes(&bytes)?;
    let failures: Vec<usize> = parse_list(&args.failures, "failure node")?;
    let q = Query::new(args.target, failures);
    let start = Instant::now();
    let result = match args.precision {
        Precision::F64 => o.query(&q)?,
        Precision::Mp => {
            let opts = BuildOptions { alpha: Some(o.alpha()), allow_unsafe: true, policy: o.policy() };
            oracle::preprocess_mp(o.graph(), &opts)?.query(&q)?
        }
    };
    let elapsed = millis(start);
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    if !args.no_timing {
        eprintln!("query_ms\t{elapsed:.3}");
    }
    let text = match args.format {
        Format::Json => result.to_json() + "\n",
        Format::Dot => result.to_dot(o.graph()),
        Format::Tsv => {
            let mut s = String::from("node\tstatus\tsuccessor\tdistance\n");
            for n in &result.nodes {
                let succ = n.successor.map_or("-".to_string(), |v| v.to_string());
                let dist = n.distance.map_or("-".to_string(), |d| d.to_string());
                s.push_str(&format!("{}\t{}\t{succ}\t{dist}\n", n.id, serde_json::to_value(n.status).unwrap().as_str().unwrap()));
            }
            s
        }
    };
    write_output(args.out.as_deref(), &text)
}

fn alpha_label(alpha: f64) -> String {
    format!("{alpha:e}").replace('.', "_")
}

fn continuum(args: ContinuumArgs) -> CmdResult {
    let g = load_graph(&args.graph)?;
    let alphas = match &args.alphas {
        Some(text) => parse_list::<f64>(text, "alpha")?,
        None => evaporation::default_grid(oracle::default_alpha(oracle::graph_alpha_bound(&g)?)),
    };
    if alphas.is_empty() {
        return Err(Failure::Usage("the alpha grid is empty".into()));
    }
    let p = dso_core::graph::transition_matrix(&g, args.graph.policy);
    let opts = SweepOptions { with_reference: args.reference, ..Default::default() };
    let report = evaporation::continuum_sweep(&g, &p, args.target, &alphas, &opts)?;
    match args.format {
        Format::Json => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            write_output(args.out.as_deref(), &text)
        }
        Format::Dot => {
            let dir = args.out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
            let mut listing = String::new();
            for block in &report.blocks {
                let path = dir.join(format!("alpha-{}.dot", alpha_label(block.alpha)));
                fs::write(&path, block.to_dot(&g, args.target)).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                listing.push_str(&format!("{}\n", path.display()));
            }
            write_output(None, &listing)
        }
        Format::Tsv => {
            let mut s = String::from("alpha\tnode\thitting_cost\n");
            for block in &report.blocks {
                for (v, u) in block.hitting_cost.iter().enumerate() {
                    let u = u.map_or("-".to_string(), |u| u.to_string());
                    s.push_str(&format!("{}\t{v}\t{u}\n", block.alpha));
                }
            }
            write_output(args.out.as_deref(), &s)
        }
    }
}

fn verify_cmd(args: VerifyArgs) -> CmdResult {
    if args.instances == 0 {
        return Err(Failure::Usage("--instances must be positive".into()));
    }
    if args.max_n == 0 || args.min_n == 0 || args.min_n > args.max_n {
        return Err(Failure::Usage(format!("invalid size range {}..={}", args.min_n, args.max_n)));
    }
    if args.max_out_degree == 0 {
        return Err(Failure::Usage("--max-out-degree must be positive".into()));
    }
    let spec = GraphSpec {
        min_n: args.min_n,
        max_n: args.max_n,
        max_out_degree: args.max_out_degree,
        max_diameter: (args.max_diameter > 0).then_some(args.max_diameter),
        ..GraphSpec::default()
    };
    let cfg = VerifyConfig {
        seed: args.seed,
        instances: args.instances,
        spec,
        precision: args.precision,
        policy: args.policy,
        exact_diameter: !args.loose_diameter,
        perturb: args.perturb,
        ..VerifyConfig::default()
    };
    let start = Instant::now();
    let report = verify::run(&cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mismatches = report.mismatch_count();
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        _ => {
            let mut s = format!(
                "instances\t{}\nqueries\t{}\nchecked_nodes\t{}\n",
                report.instances.len(),
                report.query_count(),
                report.checked_nodes()
            );
            for m in report.instances.iter().flat_map(|i| &i.mismatches).take(10) {
                s.push_str(&format!(
                    "mismatch\tinstance={} t={} F={:?} node={} expected={:?} reported={:?}: {}\n",
                    m.instance, m.target, m.failures, m.node, m.expected, m.reported, m.reason
                ));
            }
            s.push_str(&format!("{mismatches} mismatches\n"));
            s
        }
    };
    write_output(None, &text)?;
    if !args.no_timing {
        eprintln!("verify_s\t{elapsed:.2}");
    }
    if mismatches > 0 {
        return Err(Failure::Verification(format!("{mismatches} mismatches")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Build(a) => build(a),
        Command::Query(a) => query(a),
        Command::Continuum(a) => continuum(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench::run(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
