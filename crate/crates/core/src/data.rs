//! Datasets and their split across clients.
//!
//! A [`FederatedDataset`] holds one sample list per client plus a pooled
//! holdout set. Holdout rows are taken from each client's share, so client
//! lists and the holdout together are exactly the input rows.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

pub const DEFAULT_TEST_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    Iid,
    ByLabelShard,
    BySource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    pub clients: Vec<Vec<Sample>>,
    pub test: Vec<Sample>,
    pub dim: usize,
    pub classes: usize,
    pub mode: PartitionMode,
}

impl FederatedDataset {
    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn total_samples(&self) -> usize {
        self.clients.iter().map(Vec::len).sum::<usize>() + self.test.len()
    }

    /// Moves `⌊fraction·len⌋` rows of every client into the holdout, always
    /// leaving each client at least one row.
    fn hold_out(&mut self, fraction: f64) {
        for client in &mut self.clients {
            let take = ((client.len() as f64 * fraction).floor() as usize)
                .min(client.len().saturating_sub(1));
            let keep = client.len() - take;
            self.test.extend(client.drain(keep..));
        }
    }
}

/// Parameters for a Gaussian-mixture classification set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub dim: usize,
    pub classes: usize,
    pub clients: usize,
    /// 0 gives identical label mixes everywhere, 1 gives one label per client.
    pub heterogeneity: f64,
    /// Scale of the class means relative to unit within-class noise.
    pub separation: f64,
    pub test_fraction: f64,
}

impl SyntheticSpec {
    pub fn new(samples: usize, dim: usize, classes: usize, clients: usize, heterogeneity: f64) -> Self {
        Self {
            samples,
            dim,
            classes,
            clients,
            heterogeneity,
            separation: 1.0,
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

/// Largest-remainder rounding of `weights · total` to integers summing to `total`.
fn apportion(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut short = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if short == 0 {
            break;
        }
        counts[i] += 1;
        short -= 1;
    }
    counts
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<FederatedDataset> {
    if spec.clients == 0 {
        return Err(Error::invalid("clients", "need at least one client"));
    }
    if spec.samples < spec.clients {
        return Err(Error::invalid(
            "samples",
            format!("{} samples cannot cover {} clients", spec.samples, spec.clients),
        ));
    }
    if spec.classes == 0 || spec.dim == 0 {
        return Err(Error::invalid("classes", "need at least one class and one feature"));
    }
    if !(0.0..=1.0).contains(&spec.heterogeneity) {
        return Err(Error::invalid("heterogeneity", "must lie in [0, 1]"));
    }
    if !(0.0..1.0).contains(&spec.test_fraction) {
        return Err(Error::invalid("test_fraction", "must lie in [0, 1)"));
    }

    let mut rng = stream(seed, Purpose::Data, 0);
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| spec.separation * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let sizes = apportion(&vec![1.0; spec.clients], spec.samples);
    let uniform = 1.0 / spec.classes as f64;
    let mut clients = Vec::with_capacity(spec.clients);
    for (n, &size) in sizes.iter().enumerate() {
        let dominant = n % spec.classes;
        let mix: Vec<f64> = (0..spec.classes)
            .map(|c| {
                let spike = if c == dominant { 1.0 } else { 0.0 };
                (1.0 - spec.heterogeneity) * uniform + spec.heterogeneity * spike
            })
            .collect();
        let mut labels: Vec<usize> = apportion(&mix, size)
            .into_iter()
            .enumerate()
            .flat_map(|(c, k)| std::iter::repeat_n(c, k))
            .collect();
        labels.shuffle(&mut rng);
        let samples = labels
            .into_iter()
            .map(|label| Sample {
                features: means[label]
                    .iter()
                    .map(|m| m + rng.sample::<f64, _>(StandardNormal))
                    .collect(),
                label,
            })
            .collect();
        clients.push(samples);
    }

    let mut data = FederatedDataset {
        clients,
        test: Vec::new(),
        dim: spec.dim,
        classes: spec.classes,
        mode: if spec.heterogeneity == 0.0 {
            PartitionMode::Iid
        } else {
            PartitionMode::ByLabelShard
        },
    };
    data.hold_out(spec.test_fraction);
    Ok(data)
}

/// How to split rows read from a CSV file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvSchema {
    pub mode: PartitionMode,
    /// Ignored in `BySource` mode, where each distinct source is a client.
    pub clients: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

/// Reads `label`, optional `source`, and numeric feature columns.
pub fn load_csv_dataset(path: &Path, schema: &CsvSchema) -> Result<FederatedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Dataset {
            path: path.to_path_buf(),
            message: "missing `label` column".into(),
        })?;
    let source_col = headers.iter().position(|h| h == "source");
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != label_col && Some(i) != source_col)
        .collect();

    let mut rows: Vec<(Sample, Option<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let label_raw = &record[label_col];
        let label: usize = label_raw
            .parse()
            .map_err(|_| bad(format!("label `{label_raw}` is not a non-negative integer")))?;
        let features = feature_cols
            .iter()
            .map(|&i| {
                let raw = &record[i];
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(format!("column `{}`: `{raw}` is not a finite number", &headers[i])))
            })
            .collect::<Result<Vec<f64>>>()?;
        let source = source_col.map(|i| record[i].to_string());
        rows.push((Sample { features, label }, source));
    }
    if rows.is_empty() {
        return Err(Error::Dataset {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }

    let classes = rows.iter().map(|(s, _)| s.label).max().unwrap_or(0) + 1;
    let clients = match schema.mode {
        PartitionMode::BySource => {
            if source_col.is_none() {
                return Err(Error::Dataset {
                    path: path.to_path_buf(),
                    message: "by-source partitioning needs a `source` column".into(),
                });
            }
            let mut groups: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
            for (sample, source) in rows {
                groups.entry(source.unwrap_or_default()).or_default().push(sample);
            }
            groups.into_values().collect()
        }
        mode => {
            if schema.clients == 0 || rows.len() < schema.clients {
                return Err(Error::Dataset {
                    path: path.to_path_buf(),
                    message: format!("{} rows cannot cover {} clients", rows.len(), schema.clients),
                });
            }
            let mut samples: Vec<Sample> = rows.into_iter().map(|(s, _)| s).collect();
            let mut rng = stream(schema.seed, Purpose::Data, 1);
            samples.shuffle(&mut rng);
            if mode == PartitionMode::ByLabelShard {
                samples.sort_by_key(|s| s.label);
            }
            split_contiguous(samples, schema.clients)
        }
    };
    let dim = clients[0][0].features.len();
    let mut data = FederatedDataset {
        clients,
        test: Vec::new(),
        dim,
        classes,
        mode: schema.mode,
    };
    data.hold_out(schema.test_fraction);
    Ok(data)
}

fn split_contiguous(samples: Vec<Sample>, parts: usize) -> Vec<Vec<Sample>> {
    let sizes = apportion(&vec![1.0; parts], samples.len());
    let mut iter = samples.into_iter();
    sizes
        .into_iter()
        .map(|k| iter.by_ref().take(k).collect())
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}
