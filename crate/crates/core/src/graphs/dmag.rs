use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::dag::Dag;
use super::statement::VarSample;
use crate::error::{Error, Result};

/// Directed mixed acyclic graph over `(variable, sample)` nodes.
///
/// Node `(i, n)` has flat index `i * n_samples + n`. Bidirected edges are
/// stored once as `(a, b)` with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DmagJson", into = "DmagJson")]
pub struct Dmag {
    n_vars: usize,
    n_samples: usize,
    directed: BTreeSet<(usize, usize)>,
    bidirected: BTreeSet<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    spouses: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct DmagJson {
    d: usize,
    n_samples: usize,
    directed: Vec<[usize; 2]>,
    bidirected: Vec<[usize; 2]>,
}

impl TryFrom<DmagJson> for Dmag {
    type Error = Error;

    fn try_from(j: DmagJson) -> Result<Self> {
        Dmag::new(
            j.d,
            j.n_samples,
            j.directed.into_iter().map(|[a, b]| (a, b)),
            j.bidirected.into_iter().map(|[a, b]| (a, b)),
        )
    }
}

impl From<Dmag> for DmagJson {
    fn from(m: Dmag) -> Self {
        DmagJson {
            d: m.n_vars,
            n_samples: m.n_samples,
            directed: m.directed.iter().map(|&(a, b)| [a, b]).collect(),
            bidirected: m.bidirected.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

impl Dmag {
    pub fn new(
        n_vars: usize,
        n_samples: usize,
        directed: impl IntoIterator<Item = (usize, usize)>,
        bidirected: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let count = n_vars * n_samples;
        let check = |a: usize, b: usize| -> Result<()> {
            for node in [a, b] {
                if node >= count {
                    return Err(Error::NodeOutOfRange { node, count });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            Ok(())
        };
        let mut dir = BTreeSet::new();
        for (a, b) in directed {
            check(a, b)?;
            dir.insert((a, b));
        }
        let mut bi = BTreeSet::new();
        for (a, b) in bidirected {
            check(a, b)?;
            bi.insert((a.min(b), a.max(b)));
        }
        // acyclicity of the directed part
        Dag::new(count, dir.iter().copied())?;

        let mut parents = vec![Vec::new(); count];
        let mut children = vec![Vec::new(); count];
        let mut spouses = vec![Vec::new(); count];
        for &(a, b) in &dir {
            children[a].push(b);
            parents[b].push(a);
        }
        for &(a, b) in &bi {
            spouses[a].push(b);
            spouses[b].push(a);
        }
        for list in parents.iter_mut().chain(spouses.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Dmag {
            n_vars,
            n_samples,
            directed: dir,
            bidirected: bi,
            parents,
            children,
            spouses,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn node_count(&self) -> usize {
        self.n_vars * self.n_samples
    }

    pub fn node(&self, var: usize, sample: usize) -> usize {
        VarSample::new(var, sample).flat(self.n_samples)
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.directed.iter().copied()
    }

    pub fn bidirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bidirected.iter().copied()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn spouses(&self, v: usize) -> &[usize] {
        &self.spouses[v]
    }

    /// Directed part restricted to the nodes of one sample, relabeled to
    /// variable indices.
    pub fn sample_slice(&self, sample: usize) -> Result<Dag> {
        let n = self.n_samples;
        let edges = self
            .directed
            .iter()
            .map(|&(a, b)| (VarSample::from_flat(a, n), VarSample::from_flat(b, n)))
            .filter(|(a, b)| a.sample == sample && b.sample == sample)
            .map(|(a, b)| (a.var, b.var));
        Dag::new(self.n_vars, edges)
    }
}

/// Unrolls `g` across `n_samples` exchangeable samples: one copy of `g` per
/// sample, plus a bidirected edge between every two copies of the same
/// variable (the shared mechanism parameter).
pub fn icm_unroll(g: &Dag, n_samples: usize) -> Result<Dmag> {
    if n_samples == 0 {
        return Err(Error::InvalidParams("n_samples must be at least 1".into()));
    }
    let flat = |var: usize, sample: usize| VarSample::new(var, sample).flat(n_samples);
    let directed = (0..n_samples)
        .flat_map(|s| g.edges().map(move |(a, b)| (flat(a, s), flat(b, s))))
        .collect::<Vec<_>>();
    let bidirected = (0..g.node_count())
        .flat_map(|i| {
            (0..n_samples).flat_map(move |s| (s + 1..n_samples).map(move |t| (flat(i, s), flat(i, t))))
        })
        .collect::<Vec<_>>();
    Dmag::new(g.node_count(), n_samples, directed, bidirected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unroll_bivariate_two_samples() {
        let g = Dag::new(2, [(0, 1)]).unwrap();
        let m = icm_unroll(&g, 2).unwrap();
        // X1=0, X2=1, Y1=2, Y2=3
        assert_eq!(m.directed_edges().collect::<Vec<_>>(), vec![(0, 2), (1, 3)]);
        assert_eq!(m.bidirected_edges().collect::<Vec<_>>(), vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn unroll_trivial_and_counts() {
        let m = icm_unroll(&Dag::empty(1), 1).unwrap();
        assert_eq!(m.node_count(), 1);
        assert_eq!(m.directed_edges().count() + m.bidirected_edges().count(), 0);

        let chain = Dag::new(3, [(0, 1), (1, 2)]).unwrap();
        let m = icm_unroll(&chain, 3).unwrap();
        assert_eq!(m.node_count(), 9);
        assert_eq!(m.directed_edges().count(), 6);
        assert_eq!(m.bidirected_edges().count(), 9);
        assert!(icm_unroll(&chain, 0).is_err());
    }

    #[test]
    fn slices_recover_the_dag() {
        let g = Dag::new(3, [(0, 2), (1, 2)]).unwrap();
        let m = icm_unroll(&g, 3).unwrap();
        for s in 0..3 {
            assert_eq!(m.sample_slice(s).unwrap(), g);
        }
    }

    #[test]
    fn json_round_trip() {
        let g = Dag::new(2, [(0, 1)]).unwrap();
        let m = icm_unroll(&g, 2).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"d":2,"n_samples":2,"directed":[[0,2],[1,3]],"bidirected":[[0,1],[2,3]]}"#
        );
        assert_eq!(serde_json::from_str::<Dmag>(&s).unwrap(), m);
    }
}
