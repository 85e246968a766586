use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::prior::MixturePrior;
use crate::error::{Error, Result};
use crate::graphs::{Dag, VarSample};

/// Samples of one environment, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Environment {
    d: usize,
    values: Vec<u32>,
}

impl Environment {
    pub fn from_rows(d: usize, rows: &[Vec<u32>]) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::InvalidDataset(format!(
                "row of length {} in a {d}-variable dataset",
                r.len()
            )));
        }
        Ok(Environment {
            d,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    pub(crate) fn from_flat(d: usize, values: Vec<u32>) -> Self {
        debug_assert_eq!(values.len() % d.max(1), 0);
        Environment { d, values }
    }

    pub fn n_samples(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.values.len() / self.d
        }
    }

    pub fn row(&self, sample: usize) -> &[u32] {
        &self.values[sample * self.d..(sample + 1) * self.d]
    }

    pub fn get(&self, node: VarSample) -> u32 {
        self.values[node.sample * self.d + node.var]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.values.chunks(self.d.max(1))
    }
}

/// Categorical observations indexed by (environment, sample, variable).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvDataset {
    cards: Vec<usize>,
    envs: Vec<Environment>,
    pub true_graph: Option<Dag>,
    pub seed: Option<u64>,
    pub prior: Option<MixturePrior>,
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub cards: Vec<usize>,
    pub n_envs: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub prior: Option<MixturePrior>,
    #[serde(default)]
    pub true_graph: Option<Dag>,
}

impl EnvDataset {
    pub fn new(cards: Vec<usize>, envs: Vec<Environment>) -> Result<Self> {
        let d = cards.len();
        if d == 0 {
            return Err(Error::InvalidDataset("no variables".into()));
        }
        if envs.is_empty() {
            return Err(Error::InvalidDataset("no environments".into()));
        }
        for (e, env) in envs.iter().enumerate() {
            if env.d != d {
                return Err(Error::InvalidDataset(format!(
                    "environment {e} has {} variables, expected {d}",
                    env.d
                )));
            }
            if env.n_samples() == 0 {
                return Err(Error::InvalidDataset(format!("environment {e} is empty")));
            }
            for (n, row) in env.rows().enumerate() {
                for (i, (&x, &k)) in row.iter().zip(&cards).enumerate() {
                    if x as usize >= k {
                        return Err(Error::InvalidDataset(format!(
                            "environment {e} sample {n}: X{} = {x} outside [0, {k})",
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(EnvDataset {
            cards,
            envs,
            true_graph: None,
            seed: None,
            prior: None,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn envs(&self) -> &[Environment] {
        &self.envs
    }

    pub fn min_samples(&self) -> usize {
        self.envs.iter().map(Environment::n_samples).min().unwrap_or(0)
    }

    /// Fails unless every environment holds at least two samples.
    pub fn require_two_samples(&self) -> Result<()> {
        match self.envs.iter().position(|e| e.n_samples() < 2) {
            Some(env) => Err(Error::TooFewSamples {
                env,
                samples: self.envs[env].n_samples(),
            }),
            None => Ok(()),
        }
    }

    /// Columns relabeled so that old variable `v` becomes `perm[v]`.
    pub fn permute_vars(&self, perm: &[usize]) -> Result<Self> {
        let d = self.n_vars();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParams("not a permutation".into()));
        }
        let mut cards = vec![0; d];
        for v in 0..d {
            cards[perm[v]] = self.cards[v];
        }
        let envs = self
            .envs
            .iter()
            .map(|env| {
                let mut values = vec![0; env.values.len()];
                for (n, row) in env.rows().enumerate() {
                    for v in 0..d {
                        values[n * d + perm[v]] = row[v];
                    }
                }
                Environment::from_flat(d, values)
            })
            .collect();
        let mut out = EnvDataset::new(cards, envs)?;
        out.seed = self.seed;
        out.true_graph = self.true_graph.as_ref().map(|g| g.permuted(perm)).transpose()?;
        Ok(out)
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            cards: self.cards.clone(),
            n_envs: self.n_envs(),
            seed: self.seed,
            prior: self.prior.clone(),
            true_graph: self.true_graph.clone(),
        }
    }

    /// Writes `env,sample,X1,...,Xd` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["env".to_string(), "sample".to_string()];
        header.extend((1..=self.n_vars()).map(|i| format!("X{i}")));
        w.write_record(&header).map_err(csv_io)?;
        for (e, env) in self.envs.iter().enumerate() {
            for (n, row) in env.rows().enumerate() {
                let mut rec = vec![e.to_string(), n.to_string()];
                rec.extend(row.iter().map(u32::to_string));
                w.write_record(&rec).map_err(csv_io)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Parses the CSV layout written by [`write_csv`](Self::write_csv).
    ///
    /// Without explicit cardinalities each variable's cardinality is one more
    /// than its largest observed code.
    pub fn read_csv<R: Read>(input: R, cards: Option<&[usize]>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers().map_err(|e| Error::Csv {
            line: 1,
            message: e.to_string(),
        })?;
        if header.len() < 3 || &header[0] != "env" || &header[1] != "sample" {
            return Err(Error::Csv {
                line: 1,
                message: "header must be env,sample,X1,...,Xd".into(),
            });
        }
        let d = header.len() - 2;
        for (k, name) in header.iter().skip(2).enumerate() {
            if name != format!("X{}", k + 1) {
                return Err(Error::Csv {
                    line: 1,
                    message: format!("column {} should be X{}, found {name:?}", k + 3, k + 1),
                });
            }
        }
        let mut grouped: BTreeMap<usize, BTreeMap<usize, Vec<u32>>> = BTreeMap::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::Csv {
                line,
                message: e.to_string(),
            })?;
            if rec.len() != d + 2 {
                return Err(Error::Csv {
                    line,
                    message: format!("expected {} fields, found {}", d + 2, rec.len()),
                });
            }
            let parse = |field: &str, what: &str| -> Result<u64> {
                field.trim().parse::<u64>().map_err(|_| Error::Csv {
                    line,
                    message: format!("{what} {field:?} is not a nonnegative integer"),
                })
            };
            let env = parse(&rec[0], "env")? as usize;
            let sample = parse(&rec[1], "sample")? as usize;
            let row = (0..d)
                .map(|i| {
                    let v = parse(&rec[i + 2], "value")?;
                    u32::try_from(v).map_err(|_| Error::Csv {
                        line,
                        message: format!("value {v} too large"),
                    })
                })
                .collect::<Result<Vec<u32>>>()?;
            if grouped.entry(env).or_default().insert(sample, row).is_some() {
                return Err(Error::Csv {
                    line,
                    message: format!("duplicate row for env {env} sample {sample}"),
                });
            }
        }
        let mut envs = Vec::with_capacity(grouped.len());
        for (expected, (env, rows)) in grouped.into_iter().enumerate() {
            if env != expected {
                return Err(Error::InvalidDataset(format!(
                    "environment ids must be 0..E-1; missing {expected}"
                )));
            }
            if let Some((k, _)) = rows.keys().enumerate().find(|(k, s)| *k != **s) {
                return Err(Error::InvalidDataset(format!(
                    "environment {env} is missing sample {k}"
                )));
            }
            let rows: Vec<Vec<u32>> = rows.into_values().collect();
            envs.push(Environment::from_rows(d, &rows)?);
        }
        let cards = match cards {
            Some(c) if c.len() == d => c.to_vec(),
            Some(c) => {
                return Err(Error::InvalidDataset(format!(
                    "{} cardinalities for {d} columns",
                    c.len()
                )))
            }
            None => (0..d)
                .map(|i| {
                    envs.iter()
                        .flat_map(|e| e.rows().map(move |r| r[i] as usize + 1))
                        .max()
                        .unwrap_or(1)
                })
                .collect(),
        };
        EnvDataset::new(cards, envs)
    }

    /// Writes `<dir>/<stem>.csv` and its `<stem>.json` sidecar.
    pub fn save(&self, csv_path: &Path) -> Result<()> {
        let f = BufWriter::new(File::create(csv_path)?);
        self.write_csv(f)?;
        let meta = serde_json::to_string_pretty(&self.meta())?;
        std::fs::write(sidecar_path(csv_path), meta + "\n")?;
        Ok(())
    }

    /// Reads a dataset CSV, picking up its sidecar when present.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let side = sidecar_path(csv_path);
        let meta: Option<DatasetMeta> = if side.exists() {
            Some(serde_json::from_reader(File::open(&side)?)?)
        } else {
            None
        };
        let mut ds = EnvDataset::read_csv(
            File::open(csv_path)?,
            meta.as_ref().map(|m| m.cards.as_slice()),
        )?;
        if let Some(m) = meta {
            if m.n_envs != ds.n_envs() {
                return Err(Error::InvalidDataset(format!(
                    "sidecar records {} environments, csv has {}",
                    m.n_envs,
                    ds.n_envs()
                )));
            }
            ds.seed = m.seed;
            ds.prior = m.prior;
            ds.true_graph = m.true_graph;
        }
        Ok(ds)
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EnvDataset {
        let envs = vec![
            Environment::from_rows(2, &[vec![0, 1], vec![1, 1]]).unwrap(),
            Environment::from_rows(2, &[vec![1, 0], vec![0, 0], vec![1, 1]]).unwrap(),
        ];
        EnvDataset::new(vec![2, 2], envs).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let ds = toy();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("env,sample,X1,X2\n0,0,0,1\n"));
        let back = EnvDataset::read_csv(buf.as_slice(), Some(&[2, 2])).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let missing_col = "env,sample,X1,X2\n0,0,1\n";
        match EnvDataset::read_csv(missing_col.as_bytes(), None) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let bad_value = "env,sample,X1\n0,0,1\n0,1,x\n";
        match EnvDataset::read_csv(bad_value.as_bytes(), None) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let bad_header = "e,sample,X1\n0,0,1\n";
        assert!(EnvDataset::read_csv(bad_header.as_bytes(), None).is_err());
        let gap = "env,sample,X1\n0,0,1\n0,2,1\n";
        assert!(EnvDataset::read_csv(gap.as_bytes(), None).is_err());
    }

    #[test]
    fn value_range_enforced() {
        let env = Environment::from_rows(1, &[vec![3]]).unwrap();
        assert!(EnvDataset::new(vec![2], vec![env]).is_err());
    }

    #[test]
    fn two_sample_precondition() {
        let ds = toy();
        assert!(ds.require_two_samples().is_ok());
        let one = EnvDataset::new(vec![2], vec![Environment::from_rows(1, &[vec![1]]).unwrap()]).unwrap();
        assert!(matches!(
            one.require_two_samples(),
            Err(Error::TooFewSamples { env: 0, samples: 1 })
        ));
    }

    #[test]
    fn permuting_columns() {
        let ds = toy();
        let p = ds.permute_vars(&[1, 0]).unwrap();
        assert_eq!(p.envs()[1].row(0), &[0, 1]);
        assert_eq!(p.permute_vars(&[1, 0]).unwrap(), ds);
    }
}
