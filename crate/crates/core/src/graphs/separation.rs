//! d-/m-separation by reachability over (node, arrival) states.
//!
//! A walk may pass a node `v` when `v` is a non-collider outside the
//! conditioning set, or a collider that is an ancestor of (or in) the
//! conditioning set. An arrowhead into `v` from a bidirected edge counts the
//! same as one from a directed edge.

use super::dag::Dag;
use super::dmag::{icm_unroll, Dmag};
use super::statement::CiStatement;
use crate::error::{Error, Result};

pub(crate) trait MixedAdjacency {
    fn node_count(&self) -> usize;
    fn parents(&self, v: usize) -> &[usize];
    fn children(&self, v: usize) -> &[usize];
    fn spouses(&self, v: usize) -> &[usize];
}

impl MixedAdjacency for Dag {
    fn node_count(&self) -> usize {
        Dag::node_count(self)
    }
    fn parents(&self, v: usize) -> &[usize] {
        Dag::parents(self, v)
    }
    fn children(&self, v: usize) -> &[usize] {
        Dag::children(self, v)
    }
    fn spouses(&self, _v: usize) -> &[usize] {
        &[]
    }
}

impl MixedAdjacency for Dmag {
    fn node_count(&self) -> usize {
        Dmag::node_count(self)
    }
    fn parents(&self, v: usize) -> &[usize] {
        Dmag::parents(self, v)
    }
    fn children(&self, v: usize) -> &[usize] {
        Dmag::children(self, v)
    }
    fn spouses(&self, v: usize) -> &[usize] {
        Dmag::spouses(self, v)
    }
}

fn separated<G: MixedAdjacency>(g: &G, s: &CiStatement) -> Result<bool> {
    let n = g.node_count();
    if let Some(node) = s.nodes().find(|&v| v >= n) {
        return Err(Error::NodeOutOfRange { node, count: n });
    }
    let mut in_given = vec![false; n];
    for &z in s.given() {
        in_given[z] = true;
    }
    // ancestors of the conditioning set, inclusive
    let mut anc = in_given.clone();
    let mut stack: Vec<usize> = s.given().to_vec();
    while let Some(v) = stack.pop() {
        for &p in g.parents(v) {
            if !anc[p] {
                anc[p] = true;
                stack.push(p);
            }
        }
    }
    let mut is_target = vec![false; n];
    for &r in s.right() {
        is_target[r] = true;
    }

    // state index: 2 * v + (arrived with arrowhead at v)
    let mut seen = vec![false; 2 * n];
    let mut queue: Vec<(usize, bool)> = Vec::new();
    for &x in s.left() {
        // a start node behaves as an unconditioned non-collider
        seen[2 * x] = true;
        queue.push((x, false));
    }
    let mut push = |w: usize, head: bool, queue: &mut Vec<(usize, bool)>| {
        let k = 2 * w + usize::from(head);
        if !seen[k] {
            seen[k] = true;
            queue.push((w, head));
        }
    };
    while let Some((v, head_in)) = queue.pop() {
        if is_target[v] {
            return Ok(false);
        }
        let start = !head_in && s.left().binary_search(&v).is_ok();
        // leaving through an edge with a tail at v: v is never a collider
        if start || !in_given[v] {
            for &c in g.children(v) {
                push(c, true, &mut queue);
            }
        }
        // leaving through an edge with an arrowhead at v
        let pass = if start {
            true
        } else if head_in {
            anc[v]
        } else {
            !in_given[v]
        };
        if pass {
            for &p in g.parents(v) {
                push(p, false, &mut queue);
            }
            for &sp in g.spouses(v) {
                push(sp, true, &mut queue);
            }
        }
    }
    Ok(true)
}

pub fn d_separated(g: &Dag, s: &CiStatement) -> Result<bool> {
    separated(g, s)
}

pub fn m_separated(m: &Dmag, s: &CiStatement) -> Result<bool> {
    separated(m, s)
}

/// Largest unrolled graph `ci_set` will enumerate.
pub const CI_SET_MAX_NODES: usize = 12;

/// All singleton statements `a ⟂ b | Z` (`a < b`, `|Z| <= max_condition_size`)
/// that hold by m-separation, in canonical order.
///
/// Only singleton-vs-singleton statements are listed.
pub fn ci_set(m: &Dmag, max_condition_size: usize) -> Result<Vec<CiStatement>> {
    let n = m.node_count();
    if n > CI_SET_MAX_NODES {
        return Err(Error::TooLarge {
            what: "ci_set node count",
            size: n,
            limit: CI_SET_MAX_NODES,
        });
    }
    let mut out = Vec::new();
    for_each_singleton_statement(n, max_condition_size, |s| {
        if m_separated(m, &s)? {
            out.push(s);
        }
        Ok(())
    })?;
    out.sort();
    Ok(out)
}

/// Calls `f` for every singleton statement over `n` nodes with conditioning
/// sets up to `max_condition_size`.
pub fn for_each_singleton_statement(
    n: usize,
    max_condition_size: usize,
    mut f: impl FnMut(CiStatement) -> Result<()>,
) -> Result<()> {
    for a in 0..n {
        for b in a + 1..n {
            let rest: Vec<usize> = (0..n).filter(|&v| v != a && v != b).collect();
            for mask in 0u32..(1u32 << rest.len()) {
                if mask.count_ones() as usize > max_condition_size {
                    continue;
                }
                let given = rest
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask >> k & 1 == 1)
                    .map(|(_, &v)| v);
                f(CiStatement::pair(a, b, given)?)?;
            }
        }
    }
    Ok(())
}

/// Whether the unrolled graphs of `g1` and `g2` imply the same singleton
/// conditional independences.
pub fn markov_equivalent_icm(
    g1: &Dag,
    g2: &Dag,
    n_samples: usize,
    max_condition_size: usize,
) -> Result<bool> {
    if g1.node_count() != g2.node_count() {
        return Ok(false);
    }
    let a = ci_set(&icm_unroll(g1, n_samples)?, max_condition_size)?;
    let b = ci_set(&icm_unroll(g2, n_samples)?, max_condition_size)?;
    Ok(a == b)
}

/// Groups `graphs` into classes under an equivalence predicate; classes and
/// their members keep input order.
pub fn partition<T>(graphs: &[T], mut equivalent: impl FnMut(&T, &T) -> bool) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (k, g) in graphs.iter().enumerate() {
        match classes.iter_mut().find(|c| equivalent(&graphs[c[0]], g)) {
            Some(c) => c.push(k),
            None => classes.push(vec![k]),
        }
    }
    classes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stmt(a: usize, b: usize, z: &[usize]) -> CiStatement {
        CiStatement::pair(a, b, z.iter().copied()).unwrap()
    }

    #[test]
    fn d_separation_basics() {
        let chain = Dag::new(3, [(0, 1), (1, 2)]).unwrap();
        assert!(d_separated(&chain, &stmt(0, 2, &[1])).unwrap());
        assert!(!d_separated(&chain, &stmt(0, 2, &[])).unwrap());

        let collider = Dag::new(3, [(0, 2), (1, 2)]).unwrap();
        assert!(!d_separated(&collider, &stmt(0, 1, &[2])).unwrap());
        assert!(d_separated(&collider, &stmt(0, 1, &[])).unwrap());

        // conditioning on a descendant of the collider opens it
        let g = Dag::new(4, [(0, 2), (1, 2), (2, 3)]).unwrap();
        assert!(!d_separated(&g, &stmt(0, 1, &[3])).unwrap());
    }

    #[test]
    fn overlapping_sets_error() {
        assert!(CiStatement::pair(0usize, 1, [1]).is_err());
        let g = Dag::empty(2);
        assert!(d_separated(&g, &stmt(0, 5, &[])).is_err());
    }

    // X_{;1}=0, X_{;2}=1, Y_{;1}=2, Y_{;2}=3
    #[test]
    fn unrolled_bivariate_orientations() {
        let xy = icm_unroll(&Dag::new(2, [(0, 1)]).unwrap(), 2).unwrap();
        let yx = icm_unroll(&Dag::new(2, [(1, 0)]).unwrap(), 2).unwrap();
        let x1_y2_given_x2 = stmt(0, 3, &[1]);
        let x1_y2_given_y1 = stmt(0, 3, &[2]);
        assert!(m_separated(&xy, &x1_y2_given_x2).unwrap());
        assert!(!m_separated(&yx, &x1_y2_given_x2).unwrap());
        assert!(m_separated(&yx, &x1_y2_given_y1).unwrap());
        assert!(!m_separated(&xy, &x1_y2_given_y1).unwrap());
    }

    #[test]
    fn ci_set_examples() {
        let indep = icm_unroll(&Dag::empty(2), 1).unwrap();
        assert!(ci_set(&indep, 0).unwrap().contains(&stmt(0, 1, &[])));

        let xy = icm_unroll(&Dag::new(2, [(0, 1)]).unwrap(), 2).unwrap();
        let set = ci_set(&xy, 2).unwrap();
        assert!(set.contains(&stmt(0, 3, &[1])));
        assert!(!set.contains(&stmt(0, 3, &[2])));
        assert!(ci_set(&xy, 0).unwrap().iter().all(|s| s.given().is_empty()));

        let mut sorted = set.clone();
        sorted.sort();
        assert_eq!(set, sorted);
    }

    #[test]
    fn ci_set_guard() {
        let g = Dag::empty(7);
        let m = icm_unroll(&g, 2).unwrap();
        assert!(matches!(ci_set(&m, 1), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn icm_distinguishes_direction() {
        let xy = Dag::new(2, [(0, 1)]).unwrap();
        let yx = Dag::new(2, [(1, 0)]).unwrap();
        assert!(!markov_equivalent_icm(&xy, &yx, 2, 2).unwrap());
        assert!(markov_equivalent_icm(&xy, &xy, 2, 2).unwrap());
    }
}
