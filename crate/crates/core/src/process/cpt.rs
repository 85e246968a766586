use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Dag;

pub(crate) const STOCHASTIC_TOL: f64 = 1e-12;

/// Conditional probability table `P(X = x | parents = config)`.
///
/// Columns are indexed by the parent configuration in mixed radix over the
/// parents in ascending node order, first parent most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CptJson", into = "CptJson")]
pub struct Cpt {
    card: usize,
    parent_cards: Vec<usize>,
    /// column-major: `probs[col * card + x]`
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CptJson {
    card: usize,
    #[serde(default)]
    parent_cards: Vec<usize>,
    columns: Vec<Vec<f64>>,
}

impl TryFrom<CptJson> for Cpt {
    type Error = Error;

    fn try_from(j: CptJson) -> Result<Self> {
        Cpt::from_columns(j.card, j.parent_cards, j.columns)
    }
}

impl From<Cpt> for CptJson {
    fn from(c: Cpt) -> Self {
        CptJson {
            card: c.card,
            columns: (0..c.n_columns()).map(|k| c.column(k).to_vec()).collect(),
            parent_cards: c.parent_cards,
        }
    }
}

impl Cpt {
    pub fn from_columns(
        card: usize,
        parent_cards: Vec<usize>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let expected: usize = parent_cards.iter().product();
        if columns.len() != expected {
            return Err(Error::InvalidParams(format!(
                "cpt has {} columns, parents need {expected}",
                columns.len()
            )));
        }
        let mut probs = Vec::with_capacity(card * expected);
        for col in columns {
            if col.len() != card {
                return Err(Error::InvalidParams(format!(
                    "cpt column of length {} for cardinality {card}",
                    col.len()
                )));
            }
            probs.extend(col);
        }
        let cpt = Cpt {
            card,
            parent_cards,
            probs,
        };
        cpt.validate()?;
        Ok(cpt)
    }

    /// Root-node table with a single column.
    pub fn marginal(probs: Vec<f64>) -> Result<Self> {
        Cpt::from_columns(probs.len(), Vec::new(), vec![probs])
    }

    /// Binary node with `P(X = 1 | config) = p_one[config]`.
    pub fn binary(parent_cards: Vec<usize>, p_one: &[f64]) -> Result<Self> {
        Cpt::from_columns(
            2,
            parent_cards,
            p_one.iter().map(|&p| vec![1.0 - p, p]).collect(),
        )
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.card == 0 {
            return Err(Error::InvalidParams("cpt cardinality 0".into()));
        }
        for k in 0..self.n_columns() {
            let col = self.column(k);
            if col.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidParams(format!(
                    "cpt column {k} has an entry outside [0, 1]"
                )));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidParams(format!(
                    "cpt column {k} sums to {sum}"
                )));
            }
        }
        Ok(())
    }

    pub fn card(&self) -> usize {
        self.card
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn n_columns(&self) -> usize {
        self.probs.len() / self.card
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.probs[k * self.card..(k + 1) * self.card]
    }

    pub fn prob(&self, x: usize, column: usize) -> f64 {
        self.probs[column * self.card + x]
    }

    /// Column index for parent values listed in ascending parent order.
    pub fn column_index(&self, parent_values: impl IntoIterator<Item = usize>) -> usize {
        parent_values
            .into_iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (v, &k)| acc * k + v)
    }

    /// Whether this table fits node `node` of `g` under cardinalities `cards`.
    pub(crate) fn check_shape(&self, g: &Dag, node: usize, cards: &[usize]) -> Result<()> {
        let want: Vec<usize> = g.parents(node).iter().map(|&p| cards[p]).collect();
        if self.card != cards[node] || self.parent_cards != want {
            return Err(Error::InvalidPrior(format!(
                "table for node {node} has shape {}x{:?}, graph needs {}x{:?}",
                self.card, self.parent_cards, cards[node], want
            )));
        }
        Ok(())
    }
}

/// One realization of every mechanism parameter: a table per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub cpts: Vec<Cpt>,
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        self.cpts.iter().try_for_each(Cpt::validate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_indexing_mixed_radix() {
        let c = Cpt::from_columns(
            2,
            vec![2, 3],
            (0..6).map(|k| vec![1.0 - k as f64 / 10.0, k as f64 / 10.0]).collect(),
        )
        .unwrap();
        assert_eq!(c.column_index([1, 2]), 5);
        assert_eq!(c.column_index([0, 1]), 1);
        assert!((c.prob(1, 4) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_stochastic() {
        assert!(Cpt::marginal(vec![0.5, 0.6]).is_err());
        assert!(Cpt::marginal(vec![1.2, -0.2]).is_err());
        assert!(Cpt::from_columns(2, vec![2], vec![vec![0.5, 0.5]]).is_err());
    }
}
