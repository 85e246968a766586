//! Conditional-independence testing on multi-environment data. Every
//! statement is evaluated with one observation per environment.

mod chi2;
mod gtest;

pub use chi2::{chi2_sf, gamma_q, ln_gamma};
pub use gtest::{
    g_test, tabulate, test_statement, CiResult, ContingencyCube, GTestConfig, GTestOutcome,
    Verdict,
};

use crate::error::Result;
use crate::graphs::SampleStatement;
use crate::process::EnvDataset;

/// Source of conditional-independence verdicts for statements over
/// `(variable, sample)` nodes.
pub trait IndependenceTest: Sync {
    fn n_vars(&self) -> usize;
    fn test(&self, stmt: &SampleStatement) -> Result<CiResult>;
}

/// G-test against a dataset.
#[derive(Clone, Copy, Debug)]
pub struct DataTest<'a> {
    pub data: &'a EnvDataset,
    pub config: GTestConfig,
}

impl<'a> DataTest<'a> {
    pub fn new(data: &'a EnvDataset, alpha: f64) -> Self {
        DataTest {
            data,
            config: GTestConfig { alpha },
        }
    }
}

impl IndependenceTest for DataTest<'_> {
    fn n_vars(&self) -> usize {
        self.data.n_vars()
    }

    fn test(&self, stmt: &SampleStatement) -> Result<CiResult> {
        test_statement(self.data, stmt, &self.config)
    }
}
