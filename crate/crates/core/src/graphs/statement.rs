use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A conditional-independence statement `left ⟂ right | given`.
///
/// The three node sets are sorted, deduplicated and pairwise disjoint, and
/// `left`/`right` are nonempty. The derived ordering is lexicographic on
/// `(left, right, given)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CiStatement<T = usize> {
    left: Vec<T>,
    right: Vec<T>,
    given: Vec<T>,
}

impl<T: Ord + Copy + fmt::Debug> CiStatement<T> {
    pub fn new(
        left: impl IntoIterator<Item = T>,
        right: impl IntoIterator<Item = T>,
        given: impl IntoIterator<Item = T>,
    ) -> Result<Self> {
        let norm = |it: &mut dyn Iterator<Item = T>| {
            let mut v: Vec<T> = it.collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let left = norm(&mut left.into_iter());
        let right = norm(&mut right.into_iter());
        let given = norm(&mut given.into_iter());
        if left.is_empty() || right.is_empty() {
            return Err(Error::InvalidStatement(
                "left and right sets must be nonempty".into(),
            ));
        }
        for (a, b, what) in [
            (&left, &right, "left and right"),
            (&left, &given, "left and given"),
            (&right, &given, "right and given"),
        ] {
            if let Some(x) = a.iter().find(|x| b.binary_search(x).is_ok()) {
                return Err(Error::InvalidStatement(format!(
                    "{what} sets overlap at {x:?}"
                )));
            }
        }
        Ok(CiStatement { left, right, given })
    }

    pub fn pair(a: T, b: T, given: impl IntoIterator<Item = T>) -> Result<Self> {
        Self::new([a], [b], given)
    }

    pub fn left(&self) -> &[T] {
        &self.left
    }

    pub fn right(&self) -> &[T] {
        &self.right
    }

    pub fn given(&self) -> &[T] {
        &self.given
    }

    /// Same statement with left and right exchanged.
    pub fn swapped(&self) -> Self {
        CiStatement {
            left: self.right.clone(),
            right: self.left.clone(),
            given: self.given.clone(),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        self.left
            .iter()
            .chain(&self.right)
            .chain(&self.given)
            .copied()
    }

    pub fn try_map<U: Ord + Copy + fmt::Debug>(
        &self,
        mut f: impl FnMut(T) -> Result<U>,
    ) -> Result<CiStatement<U>> {
        let mut m = |v: &[T]| v.iter().map(|&x| f(x)).collect::<Result<Vec<U>>>();
        let (l, r, g) = (m(&self.left)?, m(&self.right)?, m(&self.given)?);
        CiStatement::new(l, r, g)
    }

    pub fn map<U: Ord + Copy + fmt::Debug>(&self, mut f: impl FnMut(T) -> U) -> Result<CiStatement<U>> {
        self.try_map(|x| Ok(f(x)))
    }
}

/// Variable `var` observed in sample `sample` of an environment (both 0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarSample {
    pub var: usize,
    pub sample: usize,
}

impl VarSample {
    pub const fn new(var: usize, sample: usize) -> Self {
        VarSample { var, sample }
    }

    /// Flat node index in an unrolled graph with `n_samples` samples.
    pub const fn flat(self, n_samples: usize) -> usize {
        self.var * n_samples + self.sample
    }

    pub const fn from_flat(index: usize, n_samples: usize) -> Self {
        VarSample {
            var: index / n_samples,
            sample: index % n_samples,
        }
    }
}

impl fmt::Display for VarSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X{};{}", self.var + 1, self.sample + 1)
    }
}

/// A statement over `(variable, sample)` nodes.
pub type SampleStatement = CiStatement<VarSample>;

impl SampleStatement {
    pub fn to_flat(&self, n_samples: usize) -> Result<CiStatement> {
        self.try_map(|v| {
            if v.sample >= n_samples {
                Err(Error::InvalidStatement(format!(
                    "{v} refers to a sample beyond {n_samples}"
                )))
            } else {
                Ok(v.flat(n_samples))
            }
        })
    }
}

impl fmt::Display for SampleStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[VarSample]| {
            v.iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{} _||_ {}", join(&self.left), join(&self.right))?;
        if !self.given.is_empty() {
            write!(f, " | {}", join(&self.given))?;
        }
        Ok(())
    }
}
