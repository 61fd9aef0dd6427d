use super::config::{parse_settings, ExperimentConfig};
use super::csv::{emit_csv, render_csv};
use super::runner::run_experiment_with;
use crate::datagen::{gen_node_batch, node_sizes, AlternativeModel, Dependence, NodeGenSpec, SizeRule};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::oracle::fixture::{golden_fixtures, write_fixtures};
use crate::protocol::{run_round, CenterState, DeliveryOrder, InProcessTransport, NodeState, Transport};
use crate::seed::SeedPolicy;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "distbh", version, about = "Distributed Benjamini-Hochberg simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one of the five experiments and write CSV.
    Run(Box<RunArgs>),
    /// Regenerate the golden oracle fixtures with the brute-force grid.
    Oracle {
        #[arg(long)]
        fixture: PathBuf,
    },
    /// Time a single protocol round over about a million p-values.
    Bench {
        #[arg(long, default_value_t = 1_000_000)]
        m: usize,
        #[arg(long, default_value_t = 50)]
        nodes: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Storey,
    Spacing,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CovarianceArg {
    Ar1,
    Block,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, short = 'e')]
    experiment: Option<u8>,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    l: Option<f64>,
    /// Base seed; defaults to $DISTBH_SEED, then a built-in constant.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    mu_grid: Option<String>,
    #[arg(long)]
    rho_grid: Option<String>,
    /// Fixed node size for experiments that do not sweep it.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mu_base: Option<f64>,
    #[arg(long, value_enum)]
    covariance: Option<CovarianceArg>,
    #[arg(long)]
    block_size: Option<usize>,
    /// Draw r1 per node from Unif[0, 0.3] instead of the fixed ramp.
    #[arg(long)]
    random_r1: bool,
    /// Baseline level split: `proportional` or `equal`.
    #[arg(long)]
    local_level: Option<String>,
    #[arg(long, short = 'q')]
    quiet: bool,
}

impl RunArgs {
    fn build_config(&self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => parse_settings(
                &std::fs::read_to_string(path)
                    .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?,
            )?,
            None => Default::default(),
        };
        let experiment = match (self.experiment, file.get("experiment")) {
            (Some(e), _) => e,
            (None, Some(e)) => e
                .parse()
                .map_err(|_| Error::config(format!("bad experiment `{e}`")))?,
            (None, None) => return Err(Error::config("--experiment is required")),
        };
        let mut cfg = ExperimentConfig::preset(experiment)?;
        cfg.apply_settings(&file)?;

        let mut flags: Vec<(&str, String)> = Vec::new();
        if let Some(e) = self.estimator {
            flags.push((
                "estimator",
                match e {
                    EstimatorArg::Storey => "storey",
                    EstimatorArg::Spacing => "spacing",
                }
                .into(),
            ));
        }
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k, v));
            }
        };
        push("alpha", self.alpha.map(|v| v.to_string()));
        push("nodes", self.nodes.map(|v| v.to_string()));
        push("trials", self.trials.map(|v| v.to_string()));
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("l", self.l.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("n", self.n.map(|v| v.to_string()));
        push("mu_base", self.mu_base.map(|v| v.to_string()));
        push("block_size", self.block_size.map(|v| v.to_string()));
        push(
            "covariance",
            self.covariance.map(|c| {
                match c {
                    CovarianceArg::Ar1 => "ar1",
                    CovarianceArg::Block => "block",
                }
                .to_string()
            }),
        );
        push("local_level", self.local_level.clone());
        push("n_grid", self.n_grid.clone());
        push("mu_grid", self.mu_grid.clone());
        push("rho_grid", self.rho_grid.clone());
        if self.random_r1 {
            flags.push(("r1_rule", "random".into()));
        }
        for (k, v) in flags {
            cfg.apply(k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(e, Error::Config(_) | Error::InvalidInput(_))
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.build_config()?;
    let quiet = args.quiet;
    if !quiet {
        eprintln!(
            "experiment {}: {} grid points x {} trials, N = {}, {}, seed {}",
            cfg.experiment,
            cfg.grid.len(),
            cfg.trials,
            cfg.nodes,
            cfg.estimator,
            cfg.seed.base_seed
        );
    }
    let param = super::config::grid_param_name(cfg.grid_param, cfg.covariance);
    let started = Instant::now();
    let rows = run_experiment_with(&cfg, |g, v| {
        if !quiet {
            eprintln!("  [{}/{}] {} = {v} ({:.1?})", g + 1, cfg.grid.len(), param, started.elapsed());
        }
    })
    .map_err(runtime)?;
    match &args.out {
        Some(path) => emit_csv(&rows, path).map_err(runtime)?,
        None => {
            let text = render_csv(&rows).map_err(runtime)?;
            std::io::stdout().write_all(text.as_bytes()).map_err(runtime)?;
        }
    }
    Ok(())
}

/// Marks an error raised after validation as a runtime failure.
fn runtime(e: impl Into<Error>) -> Error {
    match e.into() {
        Error::Config(m) | Error::InvalidInput(m) => Error::Numeric(m),
        other => other,
    }
}

fn bench(m: usize, nodes: usize, seed: Option<u64>) -> Result<()> {
    if nodes == 0 || m < nodes {
        return Err(Error::config("bench needs 1 <= nodes <= m"));
    }
    let seed = SeedPolicy::new(seed.unwrap_or_else(super::config::default_seed));
    let per = m / nodes;
    let mut sizes = node_sizes(per, nodes, SizeRule::Uniform);
    sizes[nodes - 1] += m - per * nodes;
    let alt = AlternativeModel::symmetric(3.0)?;

    let t0 = Instant::now();
    let mut states = sizes
        .iter()
        .enumerate()
        .map(|(i, &mi)| {
            let spec = NodeGenSpec {
                m: mi,
                m1: mi / 10,
                alt,
                dependence: Dependence::Independent,
            };
            let id = i as u32 + 1;
            let batch = gen_node_batch(&spec, &mut seed.stream(0, 0, id))?;
            NodeState::new(id, batch, Estimator::default())
        })
        .collect::<Result<Vec<_>>>()?;
    let generate = t0.elapsed();

    let mut center = CenterState::new(nodes, 0.2)?;
    let mut transport = InProcessTransport::new(DeliveryOrder::Fifo);
    let t1 = Instant::now();
    let results = run_round(&mut states, &mut center, &mut transport)?;
    let round = t1.elapsed();
    let rejections: usize = results.iter().map(|r| r.k_hat).sum();
    let stats = transport.stats();
    println!("m = {m}, nodes = {nodes}");
    println!("generate: {generate:.3?}");
    println!("round:    {round:.3?}");
    println!("rejections: {rejections}");
    println!("messages: {}, bytes: {}", stats.messages(), stats.bytes());
    Ok(())
}

/// Entry point shared by the binary and tests. Returns the process exit code:
/// 0 on success, 1 on usage or configuration errors, 2 on runtime failures.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => run(*args),
        Command::Oracle { fixture } => golden_fixtures().and_then(|f| write_fixtures(&fixture, &f)).map_err(runtime),
        Command::Bench { m, nodes, seed } => bench(m, nodes, seed),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                1
            } else {
                2
            }
        }
    }
}
