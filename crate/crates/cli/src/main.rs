use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use excd::discovery::{self, bivariate_direction_data, DiscoveryConfig};
use excd::graphs::Dag;
use excd::harness::{
    self, read_config_file, read_json_arg, ConfigSource, ExperimentConfig, ExperimentKind,
};
use excd::process::{bivariate_xor_model, degenerate_check, sample_dataset, EnvDataset, MixturePrior};
use excd::Error;

#[derive(Parser)]
#[command(name = "excd", version, about = "Causal discovery from exchangeable multi-environment data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset from a graph and prior.
    Simulate(SimulateArgs),
    /// Run discovery on a dataset CSV.
    Discover(DiscoverArgs),
    /// Decide X->Y, Y->X or independence on a two-variable dataset.
    Bivariate(BivariateArgs),
    /// Bivariate accuracy against the number of environments.
    SweepBivariate(SweepArgs),
    /// Multivariate recovery on the standard graphs.
    SweepMultivariate(SweepArgs),
    /// Exact Markov/faithfulness verification and oracle-driven discovery.
    OracleVerify(SweepArgs),
    /// Count unrolled CI classes against classical Markov equivalence classes.
    Identifiability(SweepArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Graph as JSON or a JSON file; defaults to the bivariate X->Y model.
    #[arg(long)]
    graph: Option<String>,
    /// Prior as JSON or a JSON file; defaults to parity-plus-Beta(1,3)-noise.
    #[arg(long)]
    prior: Option<String>,
    #[arg(long, default_value_t = 1000)]
    envs: usize,
    #[arg(long, default_value_t = 2)]
    samples_per_env: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; a JSON sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DiscoverArgs {
    data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    bonferroni: bool,
    /// Pick the most sink-like variable when no sink passes.
    #[arg(long)]
    force: bool,
    /// Write the full result JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BivariateArgs {
    data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Settings file (key = value lines or JSON); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated environment counts.
    #[arg(long)]
    envs: Option<String>,
    #[arg(long)]
    samples_per_env: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    prior: Option<String>,
    /// Use the full published protocol sizes.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

impl SweepArgs {
    fn flags(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("seed", self.seed.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("envs", self.envs.clone());
        put("samples-per-env", self.samples_per_env.map(|v| v.to_string()));
        put("repeats", self.repeats.map(|v| v.to_string()));
        put("max-nodes", self.max_nodes.map(|v| v.to_string()));
        put("graph", self.graph.clone());
        put("prior", self.prior.clone());
        m
    }

    fn resolve(&self, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
        let mut file = BTreeMap::new();
        let mut cfg = match &self.config {
            Some(path) => match read_config_file(path)
                .with_context(|| format!("reading config {}", path.display()))?
            {
                ConfigSource::Full(c) => c,
                ConfigSource::Flat(m) => {
                    file = m;
                    let paper = file.get("paper-scale").is_some_and(|v| v == "true");
                    ExperimentConfig::defaults(kind, paper || self.paper_scale)
                }
            },
            None => ExperimentConfig::defaults(kind, self.paper_scale),
        };
        if cfg.kind != kind {
            bail!("config is for {:?}, not {:?}", cfg.kind, kind);
        }
        file.remove("paper-scale");
        cfg.apply(&file)?;
        cfg.apply(&self.flags())?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(path: &Path) -> anyhow::Result<EnvDataset> {
    EnvDataset::load(path).with_context(|| format!("loading {}", path.display()))
}

fn warn_degenerate(ds: &EnvDataset) -> anyhow::Result<()> {
    for w in degenerate_check(ds)? {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let g: Dag = match &a.graph {
        Some(s) => read_json_arg(s)?,
        None => bivariate_xor_model().0,
    };
    let prior: MixturePrior = match &a.prior {
        Some(s) => read_json_arg(s)?,
        None => harness::default_prior(&g),
    };
    let ds = sample_dataset(&g, &prior, a.envs, a.samples_per_env, a.seed)?;
    ds.save(&a.out)?;
    eprintln!("wrote {} environments to {}", ds.n_envs(), a.out.display());
    Ok(())
}

fn discover(a: &DiscoverArgs) -> anyhow::Result<ExitCode> {
    let ds = load(&a.data)?;
    warn_degenerate(&ds)?;
    let cfg = DiscoveryConfig {
        alpha: a.alpha,
        bonferroni: a.bonferroni,
        force: a.force,
    };
    match discovery::discover(&ds, cfg) {
        Ok(mut res) => {
            res.seed = ds.seed;
            let text = serde_json::to_string_pretty(&res)?;
            match &a.out {
                Some(p) => std::fs::write(p, text + "\n")?,
                None => println!("{text}"),
            }
            let edges: Vec<String> = res.graph.edges().map(|(x, y)| format!("X{}->X{}", x + 1, y + 1)).collect();
            eprintln!("edges: {}", if edges.is_empty() { "none".into() } else { edges.join(", ") });
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ Error::NoSinkFound { .. }) => {
            eprintln!("error: {e}");
            if let Error::NoSinkFound { remaining, p_values } = &e {
                for (row, &i) in p_values.iter().zip(remaining) {
                    let cells: Vec<String> = row.iter().map(|p| format!("{p:.3e}")).collect();
                    eprintln!("  X{}: {}", i + 1, cells.join(" "));
                }
            }
            eprintln!("rerun with --force to pick the most sink-like variable");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

fn bivariate(a: &BivariateArgs) -> anyhow::Result<()> {
    let ds = load(&a.data)?;
    if ds.n_vars() != 2 {
        bail!("bivariate needs exactly 2 variables, found {}", ds.n_vars());
    }
    warn_degenerate(&ds)?;
    let out = bivariate_direction_data(&ds, a.alpha)?;
    for t in &out.tests {
        eprintln!("{}", t.describe());
    }
    println!("{}", serde_json::to_string(&out.direction)?.trim_matches('"'));
    Ok(())
}

fn sweep(kind: ExperimentKind, stem: &str, a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = a.resolve(kind)?;
    let (csv, manifest) = harness::run_experiment(&cfg)?;
    let (csv_path, json_path) = harness::write_outputs(&a.out, stem, &csv, &manifest)?;
    print!("{csv}");
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn oracle_verify(a: &SweepArgs) -> anyhow::Result<ExitCode> {
    let cfg = a.resolve(ExperimentKind::OracleSweep)?;
    let report = harness::run_oracle_sweep(&cfg)?;
    let disc = harness::run_exact_discovery(cfg.max_nodes + 1, cfg.repeats.min(10), harness::ORACLE_ATOMS, cfg.seed)?;
    let recovered: usize = disc.iter().map(|r| r.recovered).sum();
    let total: usize = disc.iter().map(|r| r.models).sum();
    let markov = report.markov_always();
    let pass = markov && report.icm_sets_distinct && recovered == total;
    let manifest = serde_json::json!({
        "pass": pass,
        "markov_always": markov,
        "faithful_fraction": report.faithful_fraction(),
        "bridge_fraction": report.bridge_fraction(),
        "oracle_discovery": {"recovered": recovered, "total": total, "rows": disc},
        "sweep": report,
    });
    let (csv_path, json_path) = harness::write_outputs(&a.out, "oracle_sweep", &report.to_csv(), &manifest)?;
    println!(
        "markov {}  faithful {:.4}  bridge {:.4}  distinct-ci-sets {}  oracle-discovery {}/{}",
        markov,
        report.faithful_fraction(),
        report.bridge_fraction(),
        report.icm_sets_distinct,
        recovered,
        total
    );
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate(a) => simulate(&a).map(|_| ExitCode::SUCCESS),
        Command::Discover(a) => discover(&a),
        Command::Bivariate(a) => bivariate(&a).map(|_| ExitCode::SUCCESS),
        Command::SweepBivariate(a) => {
            sweep(ExperimentKind::BivariateSweep, "bivariate_sweep", &a).map(|_| ExitCode::SUCCESS)
        }
        Command::SweepMultivariate(a) => {
            sweep(ExperimentKind::Multivariate, "multivariate", &a).map(|_| ExitCode::SUCCESS)
        }
        Command::OracleVerify(a) => oracle_verify(&a),
        Command::Identifiability(a) => {
            sweep(ExperimentKind::IdentifiabilitySweep, "identifiability", &a).map(|_| ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
