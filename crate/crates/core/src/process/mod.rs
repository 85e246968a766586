//! Exchangeable multi-environment data: every environment draws its own
//! mechanism tables from the prior, then samples i.i.d. rows through the
//! graph with those tables.

mod cpt;
mod dataset;
mod prior;
pub mod random;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use cpt::{Cpt, EnvParams};
pub use dataset::{sidecar_path, DatasetMeta, EnvDataset, Environment};
pub use prior::{Atom, MixturePrior, NodePrior};

use crate::ci_test::{test_statement, GTestConfig};
use crate::error::{Error, Result};
use crate::graphs::{Dag, SampleStatement, VarSample};

/// Draws one environment's tables from `prior`.
pub fn sample_env_params(prior: &MixturePrior, g: &Dag, seed: u64) -> Result<EnvParams> {
    prior.validate(g)?;
    Ok(prior.draw(g, &mut random::env_rng(seed, 0)))
}

/// One row drawn ancestrally through `g` with the tables in `params`.
pub fn sample_row<R: Rng + ?Sized>(g: &Dag, order: &[usize], params: &EnvParams, rng: &mut R, row: &mut [u32]) {
    for &i in order {
        let cpt = &params.cpts[i];
        let col = cpt.column_index(g.parents(i).iter().map(|&p| row[p] as usize));
        row[i] = random::categorical(rng, cpt.column(col)) as u32;
    }
}

/// `n_envs` environments of `samples_per_env` rows each. Environment `e`
/// uses its own random stream, so the output does not depend on thread
/// scheduling.
pub fn sample_dataset(
    g: &Dag,
    prior: &MixturePrior,
    n_envs: usize,
    samples_per_env: usize,
    seed: u64,
) -> Result<EnvDataset> {
    if n_envs == 0 || samples_per_env == 0 {
        return Err(Error::InvalidParams(
            "need at least one environment and one sample per environment".into(),
        ));
    }
    prior.validate(g)?;
    let d = g.node_count();
    let order = g.topological_order();
    let envs: Vec<Environment> = (0..n_envs)
        .into_par_iter()
        .map(|e| {
            let mut rng = random::env_rng(seed, e as u64);
            let params = prior.draw(g, &mut rng);
            let mut values = vec![0u32; d * samples_per_env];
            for row in values.chunks_mut(d) {
                sample_row(g, &order, &params, &mut rng, row);
            }
            Environment::from_flat(d, values)
        })
        .collect();
    let mut ds = EnvDataset::new(prior.cards.clone(), envs)?;
    ds.true_graph = Some(g.clone());
    ds.seed = Some(seed);
    ds.prior = Some(prior.clone());
    Ok(ds)
}

/// Bivariate model `X -> Y` with `X ~ Ber(theta)`, `Y = Ber(psi) xor X`,
/// `theta, psi ~ Beta(1, 3)` independently per environment.
pub fn bivariate_xor_model() -> (Dag, MixturePrior) {
    let g = Dag::new(2, [(0, 1)]).expect("two-node graph");
    let prior = MixturePrior {
        cards: vec![2, 2],
        nodes: vec![
            NodePrior::Beta {
                alpha: 1.0,
                beta: 3.0,
            },
            NodePrior::XorBeta {
                alpha: 1.0,
                beta: 3.0,
            },
        ],
    };
    (g, prior)
}

/// Significance level below which within-environment dependence counts as
/// heterogeneity across environments.
pub const HETEROGENEITY_LEVEL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegeneracyWarning {
    /// Only one value observed.
    Constant { var: usize },
    /// No detectable dependence between two samples of the same environment:
    /// the variable's distribution looks identical across environments.
    Homogeneous { var: usize, p_value: f64 },
    /// Heterogeneity needs two samples per environment.
    TooFewSamples,
}

impl std::fmt::Display for DegeneracyWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DegeneracyWarning::Constant { var } => write!(f, "X{} is constant", var + 1),
            DegeneracyWarning::Homogeneous { var, p_value } => write!(
                f,
                "X{} shows no heterogeneity across environments (p = {p_value:.3e})",
                var + 1
            ),
            DegeneracyWarning::TooFewSamples => {
                write!(f, "fewer than 2 samples per environment; heterogeneity not checked")
            }
        }
    }
}

/// Flags variables whose mechanism appears not to vary across environments.
///
/// Heterogeneity is detected as dependence between samples 1 and 2 of the
/// same variable within environments (a G-test with one observation per
/// environment).
pub fn degenerate_check(ds: &EnvDataset) -> Result<Vec<DegeneracyWarning>> {
    let mut out = Vec::new();
    let two = ds.min_samples() >= 2;
    if !two {
        out.push(DegeneracyWarning::TooFewSamples);
    }
    for var in 0..ds.n_vars() {
        let first = ds.envs()[0].row(0)[var];
        let constant = ds.envs().iter().all(|e| e.rows().all(|r| r[var] == first));
        if constant {
            out.push(DegeneracyWarning::Constant { var });
            continue;
        }
        if two {
            let stmt = SampleStatement::pair(VarSample::new(var, 0), VarSample::new(var, 1), [])?;
            let r = test_statement(ds, &stmt, &GTestConfig::default())?;
            if r.p_value > HETEROGENEITY_LEVEL {
                out.push(DegeneracyWarning::Homogeneous {
                    var,
                    p_value: r.p_value,
                });
            }
        }
    }
    Ok(out)
}
