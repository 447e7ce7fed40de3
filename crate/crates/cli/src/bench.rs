use clap::Args;
use dso_core::bench::{self, BenchConfig};
use dso_core::TransitionPolicy;

use crate::{parse_list, write_output, CmdResult, Failure};

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short = 'n', long, default_value_t = 500)]
    n: usize,
    /// Comma-separated failure-set sizes.
    #[arg(short = 'f', long, default_value = "5")]
    failures: String,
    #[arg(long, default_value_t = 9)]
    trials: usize,
    /// Extra random edges per node on top of the spanning arborescence.
    #[arg(long, default_value_t = 1.0)]
    extra_per_node: f64,
    #[arg(long, default_value = "degree-weighted")]
    policy: TransitionPolicy,
    /// Print "-" instead of wall times.
    #[arg(long)]
    no_timing: bool,
}

pub fn run(args: BenchArgs) -> CmdResult {
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    if args.n < 2 {
        return Err(Failure::Usage("-n must be at least 2".into()));
    }
    let failure_sizes: Vec<usize> = parse_list(&args.failures, "failure-set size")?;
    if failure_sizes.is_empty() {
        return Err(Failure::Usage("no failure-set sizes given".into()));
    }
    let cfg = BenchConfig {
        seed: args.seed,
        n: args.n,
        failure_sizes,
        trials: args.trials,
        extra_per_node: args.extra_per_node,
        policy: args.policy,
    };
    let rows = bench::run(&cfg)?;
    let ms = |v: f64| if args.no_timing { "-".to_string() } else { format!("{v:.4}") };
    let mut out = String::from("n\tedges\tf\talpha\talpha_safe\tpreprocess_ms\tquery_ms\tdijkstra_ms\tmax_factor_dim\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:e}\t{}\t{}\t{}\t{}\t{}\n",
            r.n,
            r.edges,
            r.failures,
            r.alpha,
            r.alpha_safe,
            ms(r.preprocess_ms),
            ms(r.query_ms),
            ms(r.dijkstra_ms),
            r.max_factor_dim
        ));
    }
    write_output(None, &out)
}
