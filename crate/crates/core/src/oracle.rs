//! Exact computation for finite-mixture exchangeable processes.
//!
//! Each node's mechanism is a finite mixture of tables. Within one
//! environment every node draws a single table, shared by all samples:
//!
//! `P(x) = Σ_{atoms} Π_i w_i · Π_n Π_i CPT_i(x_{i;n} | pa_{i;n})`.
//!
//! The joint over all `(variable, sample)` nodes is enumerated exactly, which
//! makes this module the ground truth for conditional independence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ci_test::{CiResult, IndependenceTest, Verdict};
use crate::error::{Error, Result};
use crate::graphs::{
    for_each_singleton_statement, icm_unroll, m_separated, CiStatement, Dag, SampleStatement,
    CI_SET_MAX_NODES,
};
use crate::process::{random, Atom, Cpt, MixturePrior, NodePrior};

/// Largest joint state space the oracle enumerates.
pub const MAX_STATES: usize = 1 << 20;

pub const DEFAULT_TOL: f64 = 1e-9;

/// Finite de Finetti mixture over a graph, unrolled to `samples_per_env`
/// samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMixtureModel {
    pub graph: Dag,
    pub cards: Vec<usize>,
    /// `atoms[i]`: mixture components of node `i`'s table.
    pub atoms: Vec<Vec<Atom>>,
    pub samples_per_env: usize,
}

impl FiniteMixtureModel {
    pub fn new(
        graph: Dag,
        cards: Vec<usize>,
        atoms: Vec<Vec<Atom>>,
        samples_per_env: usize,
    ) -> Result<Self> {
        let m = FiniteMixtureModel {
            graph,
            cards,
            atoms,
            samples_per_env,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_env == 0 {
            return Err(Error::InvalidParams("samples_per_env must be at least 1".into()));
        }
        self.as_prior().validate(&self.graph)?;
        let states = self.state_count();
        if states > MAX_STATES {
            return Err(Error::TooLarge {
                what: "joint state space",
                size: states,
                limit: MAX_STATES,
            });
        }
        Ok(())
    }

    /// Total number of joint configurations (saturating).
    pub fn state_count(&self) -> usize {
        self.cards
            .iter()
            .try_fold(1usize, |acc, &k| {
                (0..self.samples_per_env).try_fold(acc, |a, _| a.checked_mul(k))
            })
            .unwrap_or(usize::MAX)
    }

    pub fn n_vars(&self) -> usize {
        self.graph.node_count()
    }

    /// The same mechanisms as a sampling prior.
    pub fn as_prior(&self) -> MixturePrior {
        MixturePrior {
            cards: self.cards.clone(),
            nodes: self
                .atoms
                .iter()
                .map(|a| NodePrior::Mixture { atoms: a.clone() })
                .collect(),
        }
    }

    /// Random model with `n_atoms` components per node. Tables are uniform on
    /// the simplex column by column and mixture weights are uniform on the
    /// simplex; any two atoms of a node closer than `1e-3` in max-norm, or any
    /// weight below `1e-3`, triggers a redraw.
    pub fn random_generic<R: Rng + ?Sized>(
        graph: &Dag,
        cards: &[usize],
        n_atoms: usize,
        samples_per_env: usize,
        rng: &mut R,
    ) -> Result<Self> {
        const MIN_GAP: f64 = 1e-3;
        const MIN_WEIGHT: f64 = 1e-3;
        let d = graph.node_count();
        let mut atoms = Vec::with_capacity(d);
        for i in 0..d {
            let parent_cards: Vec<usize> = graph.parents(i).iter().map(|&p| cards[p]).collect();
            let n_cols: usize = parent_cards.iter().product();
            let uniform = vec![1.0; cards[i]];
            let node_atoms = loop {
                let weights = loop {
                    let w = random::dirichlet(rng, &vec![1.0; n_atoms]);
                    if w.iter().all(|&x| x >= MIN_WEIGHT) {
                        break w;
                    }
                };
                let tables: Vec<Cpt> = (0..n_atoms)
                    .map(|_| {
                        let cols = (0..n_cols).map(|_| random::dirichlet(rng, &uniform)).collect();
                        Cpt::from_columns(cards[i], parent_cards.clone(), cols)
                    })
                    .collect::<Result<_>>()?;
                let separated = tables.iter().enumerate().all(|(a, ta)| {
                    tables[a + 1..].iter().all(|tb| max_norm_gap(ta, tb) >= MIN_GAP)
                });
                if separated {
                    break weights
                        .into_iter()
                        .zip(tables)
                        .map(|(weight, cpt)| Atom { weight, cpt })
                        .collect::<Vec<_>>();
                }
            };
            atoms.push(node_atoms);
        }
        FiniteMixtureModel::new(graph.clone(), cards.to_vec(), atoms, samples_per_env)
    }

    /// Single-atom model: the mixture collapses to an i.i.d. Bayes net.
    pub fn single_atom(graph: &Dag, cpts: Vec<Cpt>, samples_per_env: usize) -> Result<Self> {
        let cards = cpts.iter().map(Cpt::card).collect();
        let atoms = cpts
            .into_iter()
            .map(|cpt| vec![Atom { weight: 1.0, cpt }])
            .collect();
        FiniteMixtureModel::new(graph.clone(), cards, atoms, samples_per_env)
    }
}

fn max_norm_gap(a: &Cpt, b: &Cpt) -> f64 {
    (0..a.n_columns())
        .flat_map(|k| a.column(k).iter().zip(b.column(k)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

/// Exact probabilities over every configuration of the unrolled nodes.
///
/// Flat node `i * n_samples + n` is digit `i * n_samples + n` of the
/// configuration index, with the last node least significant.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTable {
    n_vars: usize,
    n_samples: usize,
    node_cards: Vec<usize>,
    strides: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Value of flat node `node` in configuration `index`.
    pub fn digit(&self, index: usize, node: usize) -> usize {
        index / self.strides[node] % self.node_cards[node]
    }

    /// Configuration index from per-node values.
    pub fn index_of(&self, values: &[usize]) -> usize {
        values.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    /// Marginal table over `nodes`, indexed in mixed radix with the first
    /// listed node most significant.
    pub fn marginal(&self, nodes: &[usize]) -> Vec<f64> {
        let size: usize = nodes.iter().map(|&v| self.node_cards[v]).product();
        let mut out = vec![0.0; size];
        for (f, &p) in self.probs.iter().enumerate() {
            let k = nodes
                .iter()
                .fold(0, |acc, &v| acc * self.node_cards[v] + self.digit(f, v));
            out[k] += p;
        }
        out
    }
}

/// Exact joint of all `(variable, sample)` nodes.
pub fn exact_joint(model: &FiniteMixtureModel) -> Result<JointTable> {
    model.validate()?;
    let d = model.n_vars();
    let n = model.samples_per_env;
    let g = &model.graph;
    let node_cards: Vec<usize> = (0..d * n).map(|f| model.cards[f / n]).collect();
    let mut strides = vec![1usize; d * n];
    for f in (0..d * n).rev().skip(1) {
        strides[f] = strides[f + 1] * node_cards[f + 1];
    }
    let total = model.state_count();

    // per-sample configuration index of every joint configuration
    let var_strides: Vec<usize> = {
        let mut s = vec![1usize; d];
        for i in (0..d).rev().skip(1) {
            s[i] = s[i + 1] * model.cards[i + 1];
        }
        s
    };
    let sample_space: usize = model.cards.iter().product();
    let mut sample_cfg = vec![0usize; total * n];
    for f in 0..total {
        for s in 0..n {
            sample_cfg[f * n + s] = (0..d)
                .map(|i| (f / strides[i * n + s] % node_cards[i * n + s]) * var_strides[i])
                .sum();
        }
    }
    // per-variable values of every single-sample configuration
    let sample_values: Vec<Vec<usize>> = (0..sample_space)
        .map(|c| (0..d).map(|i| c / var_strides[i] % model.cards[i]).collect())
        .collect();

    let mut probs = vec![0.0; total];
    let mut q = vec![0.0; sample_space];
    let mut choice = vec![0usize; d];
    loop {
        let weight: f64 = (0..d).map(|i| model.atoms[i][choice[i]].weight).product();
        if weight > 0.0 {
            for (c, x) in sample_values.iter().enumerate() {
                q[c] = (0..d)
                    .map(|i| {
                        let cpt = &model.atoms[i][choice[i]].cpt;
                        let col = cpt.column_index(g.parents(i).iter().map(|&p| x[p]));
                        cpt.prob(x[i], col)
                    })
                    .product();
            }
            for (f, p) in probs.iter_mut().enumerate() {
                *p += weight * sample_cfg[f * n..(f + 1) * n].iter().map(|&c| q[c]).product::<f64>();
            }
        }
        // odometer over atom choices
        let mut i = 0;
        loop {
            if i == d {
                return Ok(JointTable {
                    n_vars: d,
                    n_samples: n,
                    node_cards,
                    strides,
                    probs,
                });
            }
            choice[i] += 1;
            if choice[i] < model.atoms[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// Largest violation `|P(l, r | g) - P(l | g) P(r | g)|` over configurations
/// with `P(g) > 0`.
pub fn ci_gap(joint: &JointTable, stmt: &CiStatement) -> Result<f64> {
    let count = joint.n_vars * joint.n_samples;
    if let Some(node) = stmt.nodes().find(|&v| v >= count) {
        return Err(Error::NodeOutOfRange { node, count });
    }
    let card = |v: &[usize]| v.iter().map(|&x| joint.node_cards[x]).product::<usize>();
    let (kl, kr, kg) = (card(stmt.left()), card(stmt.right()), card(stmt.given()));
    let nodes: Vec<usize> = stmt
        .given()
        .iter()
        .chain(stmt.left())
        .chain(stmt.right())
        .copied()
        .collect();
    let table = joint.marginal(&nodes);
    let mut gap = 0.0f64;
    for z in 0..kg {
        let block = &table[z * kl * kr..(z + 1) * kl * kr];
        let pz: f64 = block.iter().sum();
        if pz <= 0.0 {
            continue;
        }
        for x in 0..kl {
            let px: f64 = block[x * kr..(x + 1) * kr].iter().sum::<f64>() / pz;
            for y in 0..kr {
                let py: f64 = (0..kl).map(|xx| block[xx * kr + y]).sum::<f64>() / pz;
                gap = gap.max((block[x * kr + y] / pz - px * py).abs());
            }
        }
    }
    Ok(gap)
}

/// Whether `stmt` holds in the joint up to `tol`.
pub fn exact_ci(joint: &JointTable, stmt: &CiStatement, tol: f64) -> Result<bool> {
    Ok(ci_gap(joint, stmt)? <= tol)
}

/// Conditional independences checked against the unrolled graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MarkovFaithfulReport {
    pub statements_checked: usize,
    /// m-separated in the unrolled graph but dependent in the joint.
    pub markov_violations: Vec<Violation>,
    /// Independent in the joint but m-connected in the unrolled graph.
    pub faithfulness_violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub statement: SampleStatement,
    pub gap: f64,
}

impl MarkovFaithfulReport {
    pub fn is_markov(&self) -> bool {
        self.markov_violations.is_empty()
    }

    pub fn is_faithful(&self) -> bool {
        self.faithfulness_violations.is_empty()
    }
}

/// Compares every singleton statement with conditioning sets up to
/// `max_condition_size` between the joint and the unrolled graph.
pub fn verify_markov_faithful(
    model: &FiniteMixtureModel,
    max_condition_size: usize,
    tol: f64,
) -> Result<MarkovFaithfulReport> {
    let joint = exact_joint(model)?;
    let unrolled = icm_unroll(&model.graph, model.samples_per_env)?;
    let n = unrolled.node_count();
    if n > CI_SET_MAX_NODES {
        return Err(Error::TooLarge {
            what: "statement sweep node count",
            size: n,
            limit: CI_SET_MAX_NODES,
        });
    }
    let ns = model.samples_per_env;
    let mut report = MarkovFaithfulReport::default();
    for_each_singleton_statement(n, max_condition_size, |s| {
        report.statements_checked += 1;
        let gap = ci_gap(&joint, &s)?;
        let independent = gap <= tol;
        let separated = m_separated(&unrolled, &s)?;
        if separated != independent {
            let v = Violation {
                statement: s.map(|f| crate::graphs::VarSample::from_flat(f, ns))?,
                gap,
            };
            if separated {
                report.markov_violations.push(v);
            } else {
                report.faithfulness_violations.push(v);
            }
        }
        Ok(())
    })?;
    Ok(report)
}

/// All singleton statements with conditioning sets up to
/// `max_condition_size` that hold in the joint, in canonical order.
pub fn exact_ci_set(
    model: &FiniteMixtureModel,
    max_condition_size: usize,
    tol: f64,
) -> Result<Vec<CiStatement>> {
    let joint = exact_joint(model)?;
    let n = joint.n_vars * joint.n_samples;
    let mut out = Vec::new();
    for_each_singleton_statement(n, max_condition_size, |s| {
        if exact_ci(&joint, &s, tol)? {
            out.push(s);
        }
        Ok(())
    })?;
    out.sort();
    Ok(out)
}

/// Largest change of the joint under any permutation of sample indices.
pub fn exchangeability_gap(joint: &JointTable) -> f64 {
    let (d, n) = (joint.n_vars, joint.n_samples);
    let mut worst = 0.0f64;
    for perm in permutations(n) {
        let mut values = vec![0usize; d * n];
        for (f, &p) in joint.probs.iter().enumerate() {
            for i in 0..d {
                for s in 0..n {
                    values[i * n + perm[s]] = joint.digit(f, i * n + s);
                }
            }
            worst = worst.max((joint.probs[joint.index_of(&values)] - p).abs());
        }
    }
    worst
}

/// Whether the joint is invariant (within `1e-12`) under every permutation
/// of sample indices.
pub fn verify_exchangeability(model: &FiniteMixtureModel) -> Result<bool> {
    Ok(exchangeability_gap(&exact_joint(model)?) <= 1e-12)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Conditional-independence verdicts read from an exact joint: the
/// infinite-data limit of a statistical test.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    joint: JointTable,
    tol: f64,
}

impl ExactOracle {
    pub fn new(model: &FiniteMixtureModel, tol: f64) -> Result<Self> {
        Ok(ExactOracle {
            joint: exact_joint(model)?,
            tol,
        })
    }

    pub fn joint(&self) -> &JointTable {
        &self.joint
    }
}

impl IndependenceTest for ExactOracle {
    fn n_vars(&self) -> usize {
        self.joint.n_vars
    }

    fn test(&self, stmt: &SampleStatement) -> Result<CiResult> {
        let flat = stmt.to_flat(self.joint.n_samples)?;
        let gap = ci_gap(&self.joint, &flat)?;
        let independent = gap <= self.tol;
        Ok(CiResult {
            statement: stmt.clone(),
            statistic: gap,
            dof: 0,
            p_value: if independent { 1.0 } else { 0.0 },
            verdict: if independent {
                Verdict::Independent
            } else {
                Verdict::Dependent
            },
            n_effective: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::random::env_rng;

    fn bivariate_two_theta() -> FiniteMixtureModel {
        let g = Dag::new(2, [(0, 1)]).unwrap();
        let x_atoms = vec![
            Atom { weight: 0.5, cpt: Cpt::marginal(vec![0.8, 0.2]).unwrap() },
            Atom { weight: 0.5, cpt: Cpt::marginal(vec![0.2, 0.8]).unwrap() },
        ];
        let y_atoms = vec![Atom { weight: 1.0, cpt: Cpt::binary(vec![2], &[0.3, 0.6]).unwrap() }];
        FiniteMixtureModel::new(g, vec![2, 2], vec![x_atoms, y_atoms], 2).unwrap()
    }

    #[test]
    fn mixture_couples_samples() {
        let m = bivariate_two_theta();
        let j = exact_joint(&m).unwrap();
        // X_{;1} = node 0, X_{;2} = node 1
        let pxx = j.marginal(&[0, 1]);
        assert!((pxx[3] - 0.34).abs() < 1e-12);
        let px = j.marginal(&[0]);
        assert!((px[1] - 0.5).abs() < 1e-12);
        assert!((j.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn state_space_guard() {
        let g = Dag::empty(3);
        let cpts = vec![Cpt::marginal(vec![0.5, 0.5]).unwrap(); 3];
        assert!(FiniteMixtureModel::single_atom(&g, cpts.clone(), 7).is_err());
        assert!(FiniteMixtureModel::single_atom(&g, cpts, 6).is_ok());
    }

    #[test]
    fn fig2_statements() {
        let mut rng = env_rng(3, 0);
        let g = Dag::new(2, [(0, 1)]).unwrap();
        let m = FiniteMixtureModel::random_generic(&g, &[2, 2], 2, 2, &mut rng).unwrap();
        let j = exact_joint(&m).unwrap();
        // X1=0, X2=1, Y1=2, Y2=3
        assert!(exact_ci(&j, &CiStatement::pair(0, 3, [1]).unwrap(), DEFAULT_TOL).unwrap());
        assert!(!exact_ci(&j, &CiStatement::pair(0, 3, [2]).unwrap(), DEFAULT_TOL).unwrap());
    }

    #[test]
    fn single_atom_is_iid() {
        let g = Dag::new(2, [(0, 1)]).unwrap();
        let m = FiniteMixtureModel::single_atom(
            &g,
            vec![Cpt::marginal(vec![0.4, 0.6]).unwrap(), Cpt::binary(vec![2], &[0.1, 0.7]).unwrap()],
            2,
        )
        .unwrap();
        let j = exact_joint(&m).unwrap();
        assert!(exact_ci(&j, &CiStatement::pair(0, 1, []).unwrap(), DEFAULT_TOL).unwrap());
        let report = verify_markov_faithful(&m, 2, DEFAULT_TOL).unwrap();
        assert!(report.is_markov());
        assert!(!report.is_faithful());
    }

    #[test]
    fn generic_bivariate_is_markov_and_faithful() {
        let mut rng = env_rng(8, 0);
        let g = Dag::new(2, [(0, 1)]).unwrap();
        let m = FiniteMixtureModel::random_generic(&g, &[2, 2], 2, 2, &mut rng).unwrap();
        let report = verify_markov_faithful(&m, 2, DEFAULT_TOL).unwrap();
        assert!(report.is_markov(), "{report:?}");
        assert!(report.is_faithful(), "{report:?}");
    }

    #[test]
    fn swap_invariance() {
        let m = bivariate_two_theta();
        assert!(verify_exchangeability(&m).unwrap());
        assert_eq!(permutations(3).len(), 6);
    }

    #[test]
    fn oracle_as_test() {
        let m = bivariate_two_theta();
        let o = ExactOracle::new(&m, DEFAULT_TOL).unwrap();
        use crate::graphs::VarSample;
        let s = SampleStatement::pair(VarSample::new(0, 0), VarSample::new(0, 1), []).unwrap();
        let r = o.test(&s).unwrap();
        assert_eq!(r.verdict, Verdict::Dependent);
        assert!((r.statistic - 0.09).abs() < 1e-12);
    }
}
