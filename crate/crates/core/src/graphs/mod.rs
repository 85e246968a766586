//! Causal graphs, the ICM unrolling operator and separation oracles.

mod dag;
mod dmag;
mod separation;
mod statement;

pub use dag::{enumerate_dags, markov_equivalent_dags, Dag};
pub use dmag::{icm_unroll, Dmag};
pub use separation::{
    ci_set, d_separated, for_each_singleton_statement, m_separated, markov_equivalent_icm,
    partition, CI_SET_MAX_NODES,
};
pub use statement::{CiStatement, SampleStatement, VarSample};
