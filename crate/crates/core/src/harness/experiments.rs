use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::discovery::{self, bivariate_direction_data, discover_with, Direction, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::graphs::{
    ci_set, enumerate_dags, icm_unroll, markov_equivalent_dags, partition, Dag,
};
use crate::oracle::{self, ExactOracle, FiniteMixtureModel, DEFAULT_TOL};
use crate::process::random::{derive_seed, env_rng};
use crate::process::{bivariate_xor_model, sample_dataset, Cpt, MixturePrior};

/// Seed of repeat `repeat` at grid point `point`.
pub fn dataset_seed(seed: u64, point: u64, repeat: u64) -> u64 {
    derive_seed(derive_seed(seed, point), repeat)
}

/// Default simulation prior: roots `Ber(theta)`, every other node the parity
/// of its parents flipped by `Ber(psi)`, with `theta, psi ~ Beta(1, 3)`.
///
/// Drawing every table column independently from one Beta instead would make
/// `P(child | parent)` average to the same value for each parent value, so a
/// child sample carries no information about another sample of its parent
/// and no edge is detectable.
pub fn default_prior(g: &Dag) -> MixturePrior {
    MixturePrior::xor_binary(g, 1.0, 3.0)
}

fn expected_direction(g: &Dag) -> Result<Direction> {
    match (g.has_edge(0, 1), g.has_edge(1, 0)) {
        (true, _) => Ok(Direction::XToY),
        (_, true) => Ok(Direction::YToX),
        _ if g.node_count() == 2 => Ok(Direction::Independent),
        _ => Err(Error::Config("bivariate sweep needs a 2-node graph".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BivariateRow {
    pub envs: usize,
    pub repeats: usize,
    pub correct_fraction: f64,
    pub x_to_y: usize,
    pub y_to_x: usize,
    pub independent: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BivariateSweep {
    pub config: ExperimentConfig,
    pub truth: Direction,
    pub rows: Vec<BivariateRow>,
}

impl BivariateSweep {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("envs,repeats,correct_fraction,x_to_y,y_to_x,independent\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.4},{},{},{}",
                r.envs, r.repeats, r.correct_fraction, r.x_to_y, r.y_to_x, r.independent
            );
        }
        s
    }
}

/// Repeats the three-hypothesis decision on fresh datasets at every grid
/// point and reports how often the true hypothesis wins.
pub fn run_bivariate_sweep(cfg: &ExperimentConfig) -> Result<BivariateSweep> {
    cfg.validate()?;
    let (g, prior) = match (&cfg.graph, &cfg.prior) {
        (Some(g), Some(p)) => (g.clone(), p.clone()),
        (None, None) => bivariate_xor_model(),
        (Some(g), None) => (g.clone(), default_prior(g)),
        (None, Some(p)) => (bivariate_xor_model().0, p.clone()),
    };
    let truth = expected_direction(&g)?;
    let jobs: Vec<(usize, usize)> = cfg
        .envs
        .iter()
        .flat_map(|&e| (0..cfg.repeats).map(move |r| (e, r)))
        .collect();
    let outcomes: Vec<((usize, usize), Direction)> = jobs
        .par_iter()
        .map(|&(e, r)| {
            let ds = sample_dataset(
                &g,
                &prior,
                e,
                cfg.samples_per_env,
                dataset_seed(cfg.seed, e as u64, r as u64),
            )?;
            Ok(((e, r), bivariate_direction_data(&ds, cfg.alpha)?.direction))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &e in &cfg.envs {
        let here: Vec<Direction> = outcomes
            .iter()
            .filter(|((env, _), _)| *env == e)
            .map(|(_, d)| *d)
            .collect();
        let count = |d: Direction| here.iter().filter(|&&x| x == d).count();
        rows.push(BivariateRow {
            envs: e,
            repeats: here.len(),
            correct_fraction: count(truth) as f64 / here.len() as f64,
            x_to_y: count(Direction::XToY),
            y_to_x: count(Direction::YToX),
            independent: count(Direction::Independent),
        });
    }
    Ok(BivariateSweep {
        config: cfg.clone(),
        truth,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedGraph {
    pub name: String,
    pub graph: Dag,
    pub envs: usize,
}

/// Graphs of the multivariate experiment: fork and collider on three nodes
/// at `envs[0]` environments, chain and diamond on four nodes at the last
/// grid value. Nodes are labeled A, B, C, D = 0, 1, 2, 3.
pub fn standard_graphs(cfg: &ExperimentConfig) -> Vec<NamedGraph> {
    let small = cfg.envs[0];
    let large = *cfg.envs.last().expect("validated nonempty");
    let mk = |name: &str, d: usize, edges: &[(usize, usize)], envs: usize| NamedGraph {
        name: name.to_string(),
        graph: Dag::new(d, edges.iter().copied()).expect("fixed graphs are acyclic"),
        envs,
    };
    vec![
        mk("fork", 3, &[(0, 1), (0, 2)], small),
        mk("collider", 3, &[(1, 0), (2, 0)], small),
        mk("chain4", 4, &[(0, 1), (1, 2), (2, 3)], large),
        mk("diamond", 4, &[(0, 1), (1, 2), (2, 3), (1, 3)], large),
    ]
}

pub fn node_label(v: usize) -> String {
    if v < 26 {
        char::from(b'A' + v as u8).to_string()
    } else {
        format!("V{v}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeRate {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultivariateRow {
    pub name: String,
    pub graph: Dag,
    pub envs: usize,
    pub repeats: usize,
    /// Fraction of repeats recovering the graph exactly.
    pub graph_rate: f64,
    /// Fraction of repeats whose sink buckets match the graph's.
    pub order_rate: f64,
    /// Repeats that stopped without finding a sink.
    pub no_sink: usize,
    pub edge_rates: Vec<EdgeRate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultivariateReport {
    pub config: ExperimentConfig,
    pub prior: String,
    pub rows: Vec<MultivariateRow>,
}

impl MultivariateReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("graph,envs,repeats,item,rate\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},graph,{:.4}", r.name, r.envs, r.repeats, r.graph_rate);
            let _ = writeln!(s, "{},{},{},order,{:.4}", r.name, r.envs, r.repeats, r.order_rate);
            for e in &r.edge_rates {
                let _ = writeln!(
                    s,
                    "{},{},{},{}->{},{:.4}",
                    r.name,
                    r.envs,
                    r.repeats,
                    node_label(e.from),
                    node_label(e.to),
                    e.rate
                );
            }
        }
        s
    }
}

/// Runs discovery on `repeats` datasets per graph and tallies exact
/// recovery and per-edge recovery.
pub fn run_multivariate(cfg: &ExperimentConfig) -> Result<MultivariateReport> {
    cfg.validate()?;
    let graphs = match &cfg.graph {
        Some(g) => vec![NamedGraph {
            name: "custom".into(),
            graph: g.clone(),
            envs: cfg.envs[0],
        }],
        None => standard_graphs(cfg),
    };
    let dcfg = DiscoveryConfig {
        alpha: cfg.alpha,
        ..DiscoveryConfig::default()
    };
    let mut rows = Vec::new();
    for (gi, ng) in graphs.iter().enumerate() {
        let prior = cfg
            .prior
            .clone()
            .unwrap_or_else(|| default_prior(&ng.graph));
        let truth_order = discovery::SinkOrder::of_graph(&ng.graph);
        let results: Vec<Option<discovery::DiscoveryResult>> = (0..cfg.repeats)
            .into_par_iter()
            .map(|r| {
                let ds = sample_dataset(
                    &ng.graph,
                    &prior,
                    ng.envs,
                    cfg.samples_per_env,
                    dataset_seed(cfg.seed, gi as u64, r as u64),
                )?;
                match discovery::discover(&ds, dcfg) {
                    Ok(res) => Ok(Some(res)),
                    Err(Error::NoSinkFound { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        let n = results.len() as f64;
        let found: Vec<&discovery::DiscoveryResult> = results.iter().flatten().collect();
        let graph_rate = found.iter().filter(|r| r.graph == ng.graph).count() as f64 / n;
        let order_rate = found.iter().filter(|r| r.sink_order == truth_order).count() as f64 / n;
        let edge_rates = ng
            .graph
            .edges()
            .map(|(a, b)| EdgeRate {
                from: a,
                to: b,
                rate: found.iter().filter(|r| r.graph.has_edge(a, b)).count() as f64 / n,
            })
            .collect();
        rows.push(MultivariateRow {
            name: ng.name.clone(),
            graph: ng.graph.clone(),
            envs: ng.envs,
            repeats: cfg.repeats,
            graph_rate,
            order_rate,
            no_sink: results.iter().filter(|r| r.is_none()).count(),
            edge_rates,
        });
    }
    Ok(MultivariateReport {
        config: cfg.clone(),
        prior: match &cfg.prior {
            Some(_) => "custom (see config)".into(),
            None => "parity of parents flipped by Ber(psi), roots Ber(theta), theta, psi ~ Beta(1,3)".into(),
        },
        rows,
    })
}

/// Exact verification of one graph against random finite-mixture models.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleGraphRow {
    pub graph: Dag,
    pub models: usize,
    /// Models with no Markov violation (must equal `models`).
    pub markov: usize,
    /// Models with no faithfulness violation.
    pub faithful: usize,
    /// Models whose exact CI set equals the unrolled graph's.
    pub bridge: usize,
    /// Smallest dependence gap among faithfulness violations, if any.
    pub violations: Vec<oracle::Violation>,
    /// Whether the injected single-atom model shows extra independences.
    pub single_atom_unfaithful: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSweep {
    pub config: ExperimentConfig,
    pub atoms_per_node: usize,
    pub rows: Vec<OracleGraphRow>,
    /// Pairwise comparisons of unrolled CI sets within each node count.
    pub pairs_compared: usize,
    /// Whether all unrolled CI sets within each node count are distinct.
    pub icm_sets_distinct: bool,
}

impl OracleSweep {
    pub fn markov_always(&self) -> bool {
        self.rows.iter().all(|r| r.markov == r.models)
    }

    pub fn faithful_fraction(&self) -> f64 {
        let total: usize = self.rows.iter().map(|r| r.models).sum();
        self.rows.iter().map(|r| r.faithful).sum::<usize>() as f64 / total as f64
    }

    pub fn bridge_fraction(&self) -> f64 {
        let total: usize = self.rows.iter().map(|r| r.models).sum();
        self.rows.iter().map(|r| r.bridge).sum::<usize>() as f64 / total as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("graph,models,markov,faithful,bridge,single_atom_unfaithful\n");
        for r in &self.rows {
            let edges: Vec<String> = r
                .graph
                .edges()
                .map(|(a, b)| format!("{}->{}", node_label(a), node_label(b)))
                .collect();
            let _ = writeln!(
                s,
                "d{}:{},{},{},{},{},{}",
                r.graph.node_count(),
                edges.join(" "),
                r.models,
                r.markov,
                r.faithful,
                r.bridge,
                r.single_atom_unfaithful
            );
        }
        s
    }
}

/// Largest node count the oracle sweep handles (2 samples, 12-node unrolled
/// statement enumeration).
pub const ORACLE_SWEEP_MAX_NODES: usize = 3;
pub const ORACLE_ATOMS: usize = 3;

/// Single-atom model with fixed generic tables, for the i.i.d. collapse check.
fn single_atom_model(g: &Dag) -> Result<FiniteMixtureModel> {
    let cpts = (0..g.node_count())
        .map(|i| {
            let n_cols = 1usize << g.parents(i).len();
            let p: Vec<f64> = (0..n_cols).map(|k| 0.2 + 0.5 * k as f64 / n_cols as f64 + 0.03 * i as f64).collect();
            Cpt::binary(vec![2; g.parents(i).len()], &p)
        })
        .collect::<Result<Vec<_>>>()?;
    FiniteMixtureModel::single_atom(g, cpts, 2)
}

/// Checks, for every DAG up to `max_nodes` nodes and `repeats` random generic
/// models each, that the exact CI set matches the unrolled graph, and that
/// unrolled CI sets tell all DAGs apart.
pub fn run_oracle_sweep(cfg: &ExperimentConfig) -> Result<OracleSweep> {
    cfg.validate()?;
    if cfg.max_nodes > ORACLE_SWEEP_MAX_NODES {
        return Err(Error::Config(format!(
            "oracle sweep supports at most {ORACLE_SWEEP_MAX_NODES} nodes"
        )));
    }
    let n_samples = 2;
    let mut jobs = Vec::new();
    for d in 1..=cfg.max_nodes {
        for g in enumerate_dags(d)? {
            jobs.push(g);
        }
    }
    let rows: Vec<OracleGraphRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(gi, g)| {
            let d = g.node_count();
            let max_cond = d * n_samples - 2;
            let graph_set = ci_set(&icm_unroll(g, n_samples)?, max_cond)?;
            let mut row = OracleGraphRow {
                graph: g.clone(),
                models: cfg.repeats,
                markov: 0,
                faithful: 0,
                bridge: 0,
                violations: Vec::new(),
                single_atom_unfaithful: false,
            };
            for m in 0..cfg.repeats {
                let mut rng = env_rng(derive_seed(cfg.seed, gi as u64), m as u64);
                let model = FiniteMixtureModel::random_generic(
                    g,
                    &vec![2; d],
                    ORACLE_ATOMS,
                    n_samples,
                    &mut rng,
                )?;
                let report = oracle::verify_markov_faithful(&model, max_cond, DEFAULT_TOL)?;
                row.markov += usize::from(report.is_markov());
                row.faithful += usize::from(report.is_faithful());
                row.violations.extend(report.markov_violations);
                row.violations.extend(report.faithfulness_violations);
                let exact = oracle::exact_ci_set(&model, max_cond, DEFAULT_TOL)?;
                row.bridge += usize::from(exact == graph_set);
            }
            let collapsed = oracle::verify_markov_faithful(&single_atom_model(g)?, max_cond, DEFAULT_TOL)?;
            row.single_atom_unfaithful = collapsed.is_markov() && !collapsed.is_faithful();
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut pairs = 0;
    let mut distinct = true;
    for d in 1..=cfg.max_nodes {
        let sets: Vec<_> = enumerate_dags(d)?
            .iter()
            .map(|g| ci_set(&icm_unroll(g, n_samples)?, d * n_samples - 2))
            .collect::<Result<_>>()?;
        for a in 0..sets.len() {
            for b in a + 1..sets.len() {
                pairs += 1;
                distinct &= sets[a] != sets[b];
            }
        }
    }
    Ok(OracleSweep {
        config: cfg.clone(),
        atoms_per_node: ORACLE_ATOMS,
        rows,
        pairs_compared: pairs,
        icm_sets_distinct: distinct,
    })
}

/// Discovery with exact CI verdicts on one graph.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactDiscoveryRow {
    pub graph: Dag,
    pub models: usize,
    pub recovered: usize,
}

/// Runs discovery with the exact oracle in place of statistical tests for
/// every DAG up to `max_nodes` nodes and `models` random generic models each.
pub fn run_exact_discovery(
    max_nodes: usize,
    models: usize,
    atoms: usize,
    seed: u64,
) -> Result<Vec<ExactDiscoveryRow>> {
    let mut graphs = Vec::new();
    for d in 1..=max_nodes {
        graphs.extend(enumerate_dags(d)?);
    }
    graphs
        .par_iter()
        .enumerate()
        .map(|(gi, g)| {
            let mut recovered = 0;
            for m in 0..models {
                let mut rng = env_rng(derive_seed(seed, gi as u64), m as u64);
                let model =
                    FiniteMixtureModel::random_generic(g, &vec![2; g.node_count()], atoms, 2, &mut rng)?;
                let oracle = ExactOracle::new(&model, DEFAULT_TOL)?;
                let res = discover_with(&oracle, DiscoveryConfig::default())?;
                recovered += usize::from(res.graph == *g);
            }
            Ok(ExactDiscoveryRow {
                graph: g.clone(),
                models,
                recovered,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentifiabilityRow {
    pub nodes: usize,
    pub dags: usize,
    /// Class sizes under unrolled (exchangeable) CI sets.
    pub icm_class_sizes: Vec<usize>,
    /// Class sizes under skeleton + v-structure equivalence.
    pub iid_class_sizes: Vec<usize>,
    pub pairs_compared: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    pub config: ExperimentConfig,
    pub rows: Vec<IdentifiabilityRow>,
}

impl IdentifiabilityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("nodes,dags,icm_classes,iid_classes,largest_iid_class,pairs_compared\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.nodes,
                r.dags,
                r.icm_class_sizes.len(),
                r.iid_class_sizes.len(),
                r.iid_class_sizes.iter().max().copied().unwrap_or(0),
                r.pairs_compared
            );
        }
        s
    }
}

/// Partitions all DAGs of each size by unrolled CI sets and by classical
/// Markov equivalence.
pub fn run_identifiability(cfg: &ExperimentConfig) -> Result<IdentifiabilityReport> {
    let n_samples = cfg.samples_per_env.max(2);
    let rows = (1..=cfg.max_nodes)
        .map(|d| {
            let dags = enumerate_dags(d)?;
            let sets: Vec<_> = dags
                .par_iter()
                .map(|g| ci_set(&icm_unroll(g, n_samples)?, d * n_samples - 2))
                .collect::<Result<_>>()?;
            let sizes = |classes: Vec<Vec<usize>>| classes.into_iter().map(|c| c.len()).collect();
            Ok(IdentifiabilityRow {
                nodes: d,
                dags: dags.len(),
                icm_class_sizes: sizes(partition(&sets, |a, b| a == b)),
                iid_class_sizes: sizes(partition(&dags, markov_equivalent_dags)),
                pairs_compared: dags.len() * (dags.len().saturating_sub(1)) / 2,
            })
        })
        .collect::<Result<_>>()?;
    Ok(IdentifiabilityReport {
        config: cfg.clone(),
        rows,
    })
}

/// Runs the experiment named by `cfg.kind`; returns `(csv, manifest json)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(String, serde_json::Value)> {
    Ok(match cfg.kind {
        ExperimentKind::BivariateSweep => {
            let r = run_bivariate_sweep(cfg)?;
            (r.to_csv(), serde_json::to_value(&r)?)
        }
        ExperimentKind::Multivariate => {
            let r = run_multivariate(cfg)?;
            (r.to_csv(), serde_json::to_value(&r)?)
        }
        ExperimentKind::OracleSweep => {
            let r = run_oracle_sweep(cfg)?;
            (r.to_csv(), serde_json::to_value(&r)?)
        }
        ExperimentKind::IdentifiabilitySweep => {
            let r = run_identifiability(cfg)?;
            (r.to_csv(), serde_json::to_value(&r)?)
        }
    })
}
