use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cpt::{Cpt, EnvParams, STOCHASTIC_TOL};
use super::random;
use crate::error::{Error, Result};
use crate::graphs::Dag;

/// Weighted table in a finite mixture prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub cpt: Cpt,
}

/// Prior over one node's conditional probability table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodePrior {
    /// Every column drawn independently from Dirichlet(`alpha`).
    Dirichlet { alpha: Vec<f64> },
    /// Binary node; every column's `P(X = 1)` drawn independently from
    /// Beta(`alpha`, `beta`).
    Beta { alpha: f64, beta: f64 },
    /// Binary node with binary parents: `X = Ber(psi) xor (xor of parents)`
    /// with a single `psi ~ Beta(alpha, beta)` shared by all columns.
    XorBeta { alpha: f64, beta: f64 },
    /// Finite mixture of tables.
    Mixture { atoms: Vec<Atom> },
}

/// Per-node priors from which each environment's tables are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixturePrior {
    pub cards: Vec<usize>,
    pub nodes: Vec<NodePrior>,
}

impl MixturePrior {
    /// Same prior family for every binary node of `g`.
    pub fn uniform_binary(g: &Dag, node: NodePrior) -> Self {
        MixturePrior {
            cards: vec![2; g.node_count()],
            nodes: vec![node; g.node_count()],
        }
    }

    /// Binary nodes where roots are `Ber(theta)` and every other node is the
    /// parity of its parents flipped by `Ber(psi)` noise, with `theta, psi ~
    /// Beta(alpha, beta)` drawn per node.
    pub fn xor_binary(g: &Dag, alpha: f64, beta: f64) -> Self {
        MixturePrior {
            cards: vec![2; g.node_count()],
            nodes: (0..g.node_count())
                .map(|i| {
                    if g.parents(i).is_empty() {
                        NodePrior::Beta { alpha, beta }
                    } else {
                        NodePrior::XorBeta { alpha, beta }
                    }
                })
                .collect(),
        }
    }

    pub fn validate(&self, g: &Dag) -> Result<()> {
        let d = g.node_count();
        if self.cards.len() != d || self.nodes.len() != d {
            return Err(Error::InvalidPrior(format!(
                "prior covers {} cardinalities and {} nodes, graph has {d}",
                self.cards.len(),
                self.nodes.len()
            )));
        }
        if let Some(i) = self.cards.iter().position(|&k| k == 0) {
            return Err(Error::InvalidPrior(format!("node {i} has cardinality 0")));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let binary_only = |what: &str| -> Result<()> {
                if self.cards[i] != 2 {
                    return Err(Error::InvalidPrior(format!(
                        "{what} prior on node {i} with cardinality {}",
                        self.cards[i]
                    )));
                }
                Ok(())
            };
            match node {
                NodePrior::Dirichlet { alpha } => {
                    if alpha.len() != self.cards[i] {
                        return Err(Error::InvalidPrior(format!(
                            "dirichlet on node {i} has {} parameters for cardinality {}",
                            alpha.len(),
                            self.cards[i]
                        )));
                    }
                    check_positive(i, alpha)?;
                }
                NodePrior::Beta { alpha, beta } => {
                    binary_only("beta")?;
                    check_positive(i, &[*alpha, *beta])?;
                }
                NodePrior::XorBeta { alpha, beta } => {
                    binary_only("xor-beta")?;
                    check_positive(i, &[*alpha, *beta])?;
                    if let Some(&p) = g.parents(i).iter().find(|&&p| self.cards[p] != 2) {
                        return Err(Error::InvalidPrior(format!(
                            "xor-beta on node {i} needs binary parents, node {p} is not"
                        )));
                    }
                }
                NodePrior::Mixture { atoms } => {
                    if atoms.is_empty() {
                        return Err(Error::InvalidPrior(format!("empty mixture on node {i}")));
                    }
                    if atoms.iter().any(|a| !(a.weight >= 0.0)) {
                        return Err(Error::InvalidPrior(format!(
                            "negative mixture weight on node {i}"
                        )));
                    }
                    let total: f64 = atoms.iter().map(|a| a.weight).sum();
                    if (total - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::InvalidPrior(format!(
                            "mixture weights on node {i} sum to {total}"
                        )));
                    }
                    for a in atoms {
                        a.cpt.check_shape(g, i, &self.cards)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// One table per node of `g`, drawn independently. The prior must have
    /// been validated against `g`.
    pub(crate) fn draw<R: Rng + ?Sized>(&self, g: &Dag, rng: &mut R) -> EnvParams {
        let cpts = (0..g.node_count())
            .map(|i| {
                let parent_cards: Vec<usize> = g.parents(i).iter().map(|&p| self.cards[p]).collect();
                let n_cols: usize = parent_cards.iter().product();
                let columns = match &self.nodes[i] {
                    NodePrior::Dirichlet { alpha } => {
                        (0..n_cols).map(|_| random::dirichlet(rng, alpha)).collect()
                    }
                    NodePrior::Beta { alpha, beta } => (0..n_cols)
                        .map(|_| {
                            let p = random::beta(rng, *alpha, *beta);
                            vec![1.0 - p, p]
                        })
                        .collect(),
                    NodePrior::XorBeta { alpha, beta } => {
                        let psi = random::beta(rng, *alpha, *beta);
                        (0..n_cols)
                            .map(|col| {
                                let p = if col.count_ones() % 2 == 0 { psi } else { 1.0 - psi };
                                vec![1.0 - p, p]
                            })
                            .collect()
                    }
                    NodePrior::Mixture { atoms } => {
                        let weights: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
                        return atoms[random::categorical(rng, &weights)].cpt.clone();
                    }
                };
                Cpt::from_columns(self.cards[i], parent_cards, columns)
                    .expect("sampled columns are stochastic")
            })
            .collect();
        EnvParams { cpts }
    }
}

fn check_positive(node: usize, params: &[f64]) -> Result<()> {
    if params.iter().all(|&a| a > 0.0 && a.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidPrior(format!(
            "node {node} has a non-positive concentration parameter"
        )))
    }
}
