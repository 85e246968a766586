//! DAG recovery from exchangeable multi-environment data.
//!
//! Step one peels off sinks: variable `i` is a sink of the remaining set `L`
//! when `X_{i;1} ⟂ X_{j;2} | {X_{l;1} : l ∈ L, l ≠ i}` for every other
//! `j ∈ L`. The buckets `S_1, S_2, ...` found this way order the variables
//! from effects to causes. Step two decides each candidate edge `j -> i`
//! between buckets, smallest bucket gap first, by testing
//! `X_{i;1} ⟂ X_{j;2} | Z` with `Z` built from higher buckets and the
//! parent/child structure discovered so far.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci_test::{CiResult, DataTest, IndependenceTest};
use crate::error::{Error, Result};
use crate::graphs::{Dag, SampleStatement, VarSample};
use crate::process::EnvDataset;

/// Sink buckets; `buckets[0]` holds the first-order sinks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SinkOrder {
    buckets: Vec<Vec<usize>>,
}

impl SinkOrder {
    pub fn new(buckets: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for b in &buckets {
            if b.is_empty() {
                return Err(Error::InvalidParams("empty sink bucket".into()));
            }
            for &v in b {
                if !seen.insert(v) {
                    return Err(Error::InvalidParams(format!("variable {v} in two buckets")));
                }
            }
        }
        if seen.iter().enumerate().any(|(k, &v)| k != v) {
            return Err(Error::InvalidParams(
                "sink buckets must cover variables 0..d".into(),
            ));
        }
        let buckets = buckets
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        Ok(SinkOrder { buckets })
    }

    /// Buckets of a known graph (the ground truth the search should find).
    pub fn of_graph(g: &Dag) -> Self {
        let d = g.node_count();
        let mut level = vec![0usize; d];
        let mut order = g.topological_order();
        order.reverse();
        for v in order {
            level[v] = g.children(v).iter().map(|&c| level[c] + 1).max().unwrap_or(0);
        }
        let depth = level.iter().max().map_or(0, |m| m + 1);
        let mut buckets = vec![Vec::new(); depth];
        for (v, &l) in level.iter().enumerate() {
            buckets[l].push(v);
        }
        SinkOrder { buckets }
    }

    pub fn buckets(&self) -> &[Vec<usize>] {
        &self.buckets
    }

    pub fn n_vars(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    /// Bucket index of every variable.
    pub fn levels(&self) -> Vec<usize> {
        let mut level = vec![0; self.n_vars()];
        for (k, b) in self.buckets.iter().enumerate() {
            for &v in b {
                level[v] = k;
            }
        }
        level
    }

    /// Whether every edge of `g` runs from a higher bucket to a lower one.
    pub fn is_consistent_with(&self, g: &Dag) -> bool {
        let level = self.levels();
        g.node_count() == level.len() && g.edges().all(|(a, b)| level[a] > level[b])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub alpha: f64,
    /// Divide `alpha` by the number of ordered variable pairs.
    #[serde(default)]
    pub bonferroni: bool,
    /// On a sweep with no sink, take the variable whose smallest p-value is
    /// largest instead of failing.
    #[serde(default)]
    pub force: bool,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            alpha: 0.05,
            bonferroni: false,
            force: false,
        }
    }
}

impl DiscoveryConfig {
    pub fn effective_alpha(&self, d: usize) -> f64 {
        let pairs = d * d.saturating_sub(1);
        if self.bonferroni && pairs > 0 {
            self.alpha / pairs as f64
        } else {
            self.alpha
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub graph: Dag,
    #[serde(rename = "buckets")]
    pub sink_order: SinkOrder,
    pub test_log: Vec<CiResult>,
    pub config: DiscoveryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn sink_statement(i: usize, j: usize, remaining: &[usize]) -> Result<SampleStatement> {
    SampleStatement::pair(
        VarSample::new(i, 0),
        VarSample::new(j, 1),
        remaining
            .iter()
            .filter(|&&l| l != i)
            .map(|&l| VarSample::new(l, 0)),
    )
}

/// Step one: sink buckets, with the log of every test run.
pub fn find_sink_order<T: IndependenceTest + ?Sized>(
    tester: &T,
    force: bool,
) -> Result<(SinkOrder, Vec<CiResult>)> {
    let d = tester.n_vars();
    if d == 0 {
        return Err(Error::InvalidParams("no variables".into()));
    }
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut buckets = Vec::new();
    let mut log = Vec::new();
    while !remaining.is_empty() {
        // the conditioning sets use the remaining set as of the sweep start
        let pairs: Vec<(usize, usize)> = remaining
            .iter()
            .flat_map(|&i| remaining.iter().filter(move |&&j| j != i).map(move |&j| (i, j)))
            .collect();
        let results: Vec<CiResult> = pairs
            .par_iter()
            .map(|&(i, j)| tester.test(&sink_statement(i, j, &remaining)?))
            .collect::<Result<_>>()?;
        let passes = |i: usize| {
            pairs
                .iter()
                .zip(&results)
                .filter(|((a, _), _)| *a == i)
                .all(|(_, r)| r.independent())
        };
        let mut sinks: Vec<usize> = remaining.iter().copied().filter(|&i| passes(i)).collect();
        if sinks.is_empty() {
            let matrix: Vec<Vec<f64>> = remaining
                .iter()
                .map(|&i| {
                    remaining
                        .iter()
                        .map(|&j| {
                            pairs
                                .iter()
                                .position(|&p| p == (i, j))
                                .map_or(f64::NAN, |k| results[k].p_value)
                        })
                        .collect()
                })
                .collect();
            if !force {
                return Err(Error::NoSinkFound {
                    remaining: remaining.clone(),
                    p_values: matrix,
                });
            }
            let min_p = |row: &Vec<f64>| row.iter().copied().filter(|p| !p.is_nan()).fold(1.0, f64::min);
            let best = (0..remaining.len())
                .max_by(|&a, &b| min_p(&matrix[a]).total_cmp(&min_p(&matrix[b])).then(b.cmp(&a)))
                .expect("nonempty");
            sinks.push(remaining[best]);
        }
        remaining.retain(|v| !sinks.contains(v));
        buckets.push(sinks);
        log.extend(results);
    }
    Ok((SinkOrder::new(buckets)?, log))
}

/// Step two: edges between buckets.
pub fn find_edges<T: IndependenceTest + ?Sized>(
    tester: &T,
    order: &SinkOrder,
) -> Result<(Dag, Vec<CiResult>)> {
    let d = tester.n_vars();
    if order.n_vars() != d {
        return Err(Error::InvalidParams(format!(
            "sink order covers {} variables, data has {d}",
            order.n_vars()
        )));
    }
    let buckets = order.buckets();
    let depth = buckets.len();
    let mut parents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); d];
    let mut children: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); d];
    let mut log = Vec::new();
    for gap in 1..depth {
        for k in 0..depth - gap {
            let source_bucket = k + gap;
            let above: BTreeSet<usize> = buckets[source_bucket + 1..].iter().flatten().copied().collect();
            for &i in &buckets[k] {
                for &j in &buckets[source_bucket] {
                    let mut given = above.clone();
                    if gap > 1 {
                        given.extend(parents[i].iter().copied());
                        for &c in &children[j] {
                            given.extend(
                                parents[c]
                                    .iter()
                                    .copied()
                                    .filter(|p| buckets[source_bucket].binary_search(p).is_ok()),
                            );
                        }
                    }
                    given.remove(&i);
                    given.remove(&j);
                    let stmt = SampleStatement::pair(
                        VarSample::new(i, 0),
                        VarSample::new(j, 1),
                        given.into_iter().map(|v| VarSample::new(v, 0)),
                    )?;
                    let r = tester.test(&stmt)?;
                    if !r.independent() {
                        parents[i].insert(j);
                        children[j].insert(i);
                    }
                    log.push(r);
                }
            }
        }
    }
    let edges = parents
        .iter()
        .enumerate()
        .flat_map(|(i, ps)| ps.iter().map(move |&j| (j, i)));
    Ok((Dag::new(d, edges)?, log))
}

/// Both steps against an arbitrary source of CI verdicts.
pub fn discover_with<T: IndependenceTest + ?Sized>(
    tester: &T,
    config: DiscoveryConfig,
) -> Result<DiscoveryResult> {
    let (sink_order, mut test_log) = find_sink_order(tester, config.force)?;
    let (graph, edge_log) = find_edges(tester, &sink_order)?;
    test_log.extend(edge_log);
    Ok(DiscoveryResult {
        graph,
        sink_order,
        test_log,
        config,
        seed: None,
    })
}

/// Full discovery on a dataset with G-tests.
pub fn discover(ds: &EnvDataset, config: DiscoveryConfig) -> Result<DiscoveryResult> {
    ds.require_two_samples()?;
    let tester = DataTest::new(ds, config.effective_alpha(ds.n_vars()));
    let mut out = discover_with(&tester, config)?;
    out.seed = ds.seed;
    Ok(out)
}

/// Hypotheses of the bivariate experiment, in tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "X->Y")]
    XToY,
    #[serde(rename = "Y->X")]
    YToX,
    #[serde(rename = "X_||_Y")]
    Independent,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::XToY, Direction::YToX, Direction::Independent];

    /// The statement implied by this hypothesis: `X_1 ⟂ Y_2 | X_2`,
    /// `X_1 ⟂ Y_2 | Y_1`, or `X_1 ⟂ Y_1`.
    pub fn statement(self) -> SampleStatement {
        let x = |s| VarSample::new(0, s);
        let y = |s| VarSample::new(1, s);
        match self {
            Direction::XToY => SampleStatement::pair(x(0), y(1), [x(1)]),
            Direction::YToX => SampleStatement::pair(x(0), y(1), [y(0)]),
            Direction::Independent => SampleStatement::pair(x(0), y(0), []),
        }
        .expect("fixed statements are valid")
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::XToY => "X->Y",
            Direction::YToX => "Y->X",
            Direction::Independent => "X_||_Y",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateOutcome {
    pub direction: Direction,
    pub tests: Vec<CiResult>,
}

/// Runs the three hypothesis tests and returns the one with the highest
/// p-value; ties go to the earlier hypothesis in [`Direction::ALL`].
pub fn bivariate_direction<T: IndependenceTest + ?Sized>(tester: &T) -> Result<BivariateOutcome> {
    if tester.n_vars() != 2 {
        return Err(Error::InvalidParams(format!(
            "bivariate decision needs 2 variables, got {}",
            tester.n_vars()
        )));
    }
    let tests = Direction::ALL
        .iter()
        .map(|h| tester.test(&h.statement()))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for k in 1..tests.len() {
        if tests[k].p_value > tests[best].p_value {
            best = k;
        }
    }
    Ok(BivariateOutcome {
        direction: Direction::ALL[best],
        tests,
    })
}

/// [`bivariate_direction`] with G-tests on a dataset.
pub fn bivariate_direction_data(ds: &EnvDataset, alpha: f64) -> Result<BivariateOutcome> {
    ds.require_two_samples()?;
    bivariate_direction(&DataTest::new(ds, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ci_test::Verdict;
    use crate::graphs::{icm_unroll, m_separated, Dmag};

    /// Verdicts read off the unrolled graph by m-separation.
    struct GraphOracle {
        unrolled: Dmag,
    }

    impl GraphOracle {
        fn new(g: &Dag) -> Self {
            GraphOracle {
                unrolled: icm_unroll(g, 2).unwrap(),
            }
        }
    }

    impl IndependenceTest for GraphOracle {
        fn n_vars(&self) -> usize {
            self.unrolled.n_vars()
        }

        fn test(&self, stmt: &SampleStatement) -> Result<CiResult> {
            let sep = m_separated(&self.unrolled, &stmt.to_flat(2)?)?;
            Ok(CiResult {
                statement: stmt.clone(),
                statistic: 0.0,
                dof: 0,
                p_value: if sep { 1.0 } else { 0.0 },
                verdict: if sep { Verdict::Independent } else { Verdict::Dependent },
                n_effective: 0,
            })
        }
    }

    #[test]
    fn single_variable() {
        let o = GraphOracle::new(&Dag::empty(1));
        let (order, log) = find_sink_order(&o, false).unwrap();
        assert_eq!(order.buckets(), &[vec![0]]);
        assert!(log.is_empty());
    }

    #[test]
    fn chain_sink_order() {
        let g = Dag::new(3, [(0, 1), (1, 2)]).unwrap();
        let (order, _) = find_sink_order(&GraphOracle::new(&g), false).unwrap();
        assert_eq!(order.buckets(), &[vec![2], vec![1], vec![0]]);
        assert_eq!(order, SinkOrder::of_graph(&g));
    }

    #[test]
    fn isolated_variables_have_no_edges() {
        let g = Dag::empty(2);
        let r = discover_with(&GraphOracle::new(&g), DiscoveryConfig::default()).unwrap();
        assert_eq!(r.graph, g);
        assert_eq!(r.sink_order.buckets(), &[vec![0, 1]]);
    }

    #[test]
    fn graph_oracle_recovers_every_dag_up_to_four_nodes() {
        for d in 1..=4 {
            for g in crate::graphs::enumerate_dags(d).unwrap() {
                let r = discover_with(&GraphOracle::new(&g), DiscoveryConfig::default()).unwrap();
                assert_eq!(r.graph, g, "sink order {:?}", r.sink_order);
                assert!(r.sink_order.is_consistent_with(&r.graph));
            }
        }
    }

    #[test]
    fn bivariate_on_graph_oracle() {
        let xy = Dag::new(2, [(0, 1)]).unwrap();
        let yx = Dag::new(2, [(1, 0)]).unwrap();
        assert_eq!(bivariate_direction(&GraphOracle::new(&xy)).unwrap().direction, Direction::XToY);
        assert_eq!(bivariate_direction(&GraphOracle::new(&yx)).unwrap().direction, Direction::YToX);
        // all three statements hold: tie broken toward X->Y
        let none = Dag::empty(2);
        let out = bivariate_direction(&GraphOracle::new(&none)).unwrap();
        assert!(out.tests.iter().all(CiResult::independent));
        assert_eq!(out.direction, Direction::XToY);
    }

    /// Every sink test fails: X and Y depend on each other in every pattern.
    struct AllDependent;

    impl IndependenceTest for AllDependent {
        fn n_vars(&self) -> usize {
            3
        }

        fn test(&self, stmt: &SampleStatement) -> Result<CiResult> {
            let p = 0.001 * (1 + stmt.left()[0].var) as f64;
            Ok(CiResult {
                statement: stmt.clone(),
                statistic: 10.0,
                dof: 1,
                p_value: p,
                verdict: Verdict::Dependent,
                n_effective: 10,
            })
        }
    }

    #[test]
    fn no_sink_is_reported_or_forced() {
        match find_sink_order(&AllDependent, false) {
            Err(Error::NoSinkFound { remaining, p_values }) => {
                assert_eq!(remaining, vec![0, 1, 2]);
                assert_eq!(p_values.len(), 3);
                assert!(p_values[0][0].is_nan());
            }
            other => panic!("unexpected {other:?}"),
        }
        let (order, _) = find_sink_order(&AllDependent, true).unwrap();
        // variable 2 has the largest minimum p-value in every sweep
        assert_eq!(order.buckets(), &[vec![2], vec![1], vec![0]]);
    }

    #[test]
    fn sink_order_validation() {
        assert!(SinkOrder::new(vec![vec![0], vec![]]).is_err());
        assert!(SinkOrder::new(vec![vec![0], vec![0]]).is_err());
        assert!(SinkOrder::new(vec![vec![0, 2]]).is_err());
        let o = SinkOrder::new(vec![vec![1], vec![0]]).unwrap();
        assert!(o.is_consistent_with(&Dag::new(2, [(0, 1)]).unwrap()));
        assert!(!o.is_consistent_with(&Dag::new(2, [(1, 0)]).unwrap()));
    }

    #[test]
    fn bonferroni_alpha() {
        let c = DiscoveryConfig { alpha: 0.06, bonferroni: true, force: false };
        assert!((c.effective_alpha(3) - 0.01).abs() < 1e-15);
        assert_eq!(DiscoveryConfig::default().effective_alpha(3), 0.05);
    }
}
