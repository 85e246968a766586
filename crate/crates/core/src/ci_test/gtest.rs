use serde::{Deserialize, Serialize};

use super::chi2::chi2_sf;
use crate::error::{Error, Result};
use crate::graphs::{SampleStatement, VarSample};
use crate::process::EnvDataset;

/// Counts indexed by (stratum, row, column).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyCube {
    strata: usize,
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl ContingencyCube {
    pub fn zeros(strata: usize, rows: usize, cols: usize) -> Self {
        ContingencyCube {
            strata,
            rows,
            cols,
            counts: vec![0; strata * rows * cols],
        }
    }

    /// Single-stratum table from nested rows.
    pub fn from_table(table: &[Vec<u64>]) -> Self {
        Self::from_strata(&[table.to_vec()])
    }

    pub fn from_strata(strata: &[Vec<Vec<u64>>]) -> Self {
        let rows = strata.first().map_or(0, Vec::len);
        let cols = strata.first().and_then(|t| t.first()).map_or(0, Vec::len);
        let mut cube = Self::zeros(strata.len(), rows, cols);
        for (z, t) in strata.iter().enumerate() {
            assert_eq!(t.len(), rows, "ragged stratum");
            for (x, r) in t.iter().enumerate() {
                assert_eq!(r.len(), cols, "ragged row");
                for (y, &c) in r.iter().enumerate() {
                    *cube.at_mut(z, x, y) = c;
                }
            }
        }
        cube
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.strata, self.rows, self.cols)
    }

    pub fn get(&self, z: usize, x: usize, y: usize) -> u64 {
        self.counts[(z * self.rows + x) * self.cols + y]
    }

    fn at_mut(&mut self, z: usize, x: usize, y: usize) -> &mut u64 {
        &mut self.counts[(z * self.rows + x) * self.cols + y]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Mixed-radix encoding of a set of (variable, sample) values.
fn encode(ds: &EnvDataset, nodes: &[VarSample]) -> (usize, Vec<(VarSample, usize)>) {
    let mut size = 1usize;
    let radix = nodes
        .iter()
        .map(|&n| {
            let k = ds.cards()[n.var];
            size *= k;
            (n, k)
        })
        .collect();
    (size, radix)
}

/// Accumulates one observation per environment: the values of the nodes the
/// statement references, read from that environment's samples.
pub fn tabulate(ds: &EnvDataset, stmt: &SampleStatement) -> Result<ContingencyCube> {
    let d = ds.n_vars();
    for node in stmt.nodes() {
        if node.var >= d {
            return Err(Error::NodeOutOfRange {
                node: node.var,
                count: d,
            });
        }
    }
    let max_sample = stmt.nodes().map(|n| n.sample).max().unwrap_or(0);
    if let Some((env, e)) = ds
        .envs()
        .iter()
        .enumerate()
        .find(|(_, e)| e.n_samples() <= max_sample)
    {
        return Err(Error::SampleOutOfRange {
            env,
            sample: max_sample,
            available: e.n_samples(),
        });
    }
    let (rows, left) = encode(ds, stmt.left());
    let (cols, right) = encode(ds, stmt.right());
    let (strata, given) = encode(ds, stmt.given());
    let mut cube = ContingencyCube::zeros(strata, rows, cols);
    let index = |env: &crate::process::Environment, radix: &[(VarSample, usize)]| {
        radix
            .iter()
            .fold(0usize, |acc, &(n, k)| acc * k + env.get(n) as usize)
    };
    for env in ds.envs() {
        let x = index(env, &left);
        let y = index(env, &right);
        let z = index(env, &given);
        *cube.at_mut(z, x, y) += 1;
    }
    Ok(cube)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Independent,
    Dependent,
}

/// Outcome of one conditional-independence test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub statement: SampleStatement,
    #[serde(rename = "g")]
    pub statistic: f64,
    pub dof: usize,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub verdict: Verdict,
    pub n_effective: u64,
}

impl CiResult {
    pub fn independent(&self) -> bool {
        self.verdict == Verdict::Independent
    }

    /// Text form used in logs.
    pub fn describe(&self) -> String {
        format!(
            "{}: G={:.4} dof={} p={:.4e} {:?}",
            self.statement, self.statistic, self.dof, self.p_value, self.verdict
        )
    }
}

/// Statistic, degrees of freedom and p-value of a G-test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GTestOutcome {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub n: u64,
}

/// Stratified G-test of row/column independence within strata.
///
/// Empty strata are skipped; each stratum contributes
/// `(r_z - 1)(c_z - 1)` degrees of freedom where `r_z`, `c_z` count the rows
/// and columns with a nonzero margin in that stratum.
pub fn g_test(cube: &ContingencyCube) -> GTestOutcome {
    let (strata, rows, cols) = cube.shape();
    let mut g = 0.0;
    let mut dof = 0usize;
    let mut row_sum = vec![0u64; rows];
    let mut col_sum = vec![0u64; cols];
    for z in 0..strata {
        row_sum.iter_mut().for_each(|r| *r = 0);
        col_sum.iter_mut().for_each(|c| *c = 0);
        let mut n = 0u64;
        for x in 0..rows {
            for y in 0..cols {
                let c = cube.get(z, x, y);
                row_sum[x] += c;
                col_sum[y] += c;
                n += c;
            }
        }
        if n == 0 {
            continue;
        }
        let nz_rows = row_sum.iter().filter(|&&r| r > 0).count();
        let nz_cols = col_sum.iter().filter(|&&c| c > 0).count();
        dof += (nz_rows - 1) * (nz_cols - 1);
        let nf = n as f64;
        for x in 0..rows {
            for y in 0..cols {
                let o = cube.get(z, x, y);
                if o > 0 {
                    let of = o as f64;
                    let expected = row_sum[x] as f64 * col_sum[y] as f64 / nf;
                    g += of * (of / expected).ln();
                }
            }
        }
    }
    let statistic = (2.0 * g).max(0.0);
    GTestOutcome {
        statistic,
        dof,
        p_value: chi2_sf(statistic, dof),
        n: cube.total(),
    }
}

/// Significance settings for statistical tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GTestConfig {
    pub alpha: f64,
}

impl Default for GTestConfig {
    fn default() -> Self {
        GTestConfig { alpha: 0.05 }
    }
}

/// Tabulates `stmt` over environments and runs the G-test; the verdict is
/// independent iff `p > alpha`.
pub fn test_statement(
    ds: &EnvDataset,
    stmt: &SampleStatement,
    cfg: &GTestConfig,
) -> Result<CiResult> {
    let cube = tabulate(ds, stmt)?;
    let out = g_test(&cube);
    Ok(CiResult {
        statement: stmt.clone(),
        statistic: out.statistic,
        dof: out.dof,
        p_value: out.p_value,
        verdict: if out.p_value > cfg.alpha {
            Verdict::Independent
        } else {
            Verdict::Dependent
        },
        n_effective: out.n,
    })
}
