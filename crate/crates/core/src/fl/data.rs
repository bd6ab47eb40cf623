//! Synthetic datasets, partitioning across satellites, and the on-disk cache.
//!
//! Cache layout (all little-endian):
//!
//! | field    | type          |
//! |----------|---------------|
//! | magic    | 8 bytes `LEOFLDS\0` |
//! | version  | u32 (= 1)     |
//! | n        | u64           |
//! | d        | u64           |
//! | classes  | u64           |
//! | features | n·d f64, row-major |
//! | labels   | n u32         |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::constellation::{Constellation, SatelliteId};
use crate::error::{invalid, Error, Result};
use crate::seed::rng_for;

pub const DATASET_MAGIC: [u8; 8] = *b"LEOFLDS\0";
pub const DATASET_VERSION: u32 = 1;

/// Labeled rows with row-major features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<u32>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
            classes: self.classes,
        }
    }

    /// Largest squared norm of a bias-augmented row `[x, 1]`.
    pub fn max_augmented_norm_sq(&self) -> f64 {
        (0..self.len())
            .map(|i| 1.0 + self.row(i).iter().map(|x| x * x).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// One satellite's local data.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetShard {
    pub data: Dataset,
    pub owner: SatelliteId,
}

impl DatasetShard {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Gaussian class clusters: class means are random unit directions scaled by
/// `separation`, samples add unit-variance isotropic noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn means(&self) -> Vec<Vec<f64>> {
        let mut rng = rng_for(self.seed, "synthetic-means", &[]);
        (0..self.classes)
            .map(|_| {
                let v: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                v.iter().map(|x| x / norm * self.separation).collect()
            })
            .collect()
    }

    /// Draws `n` balanced rows from stream `stream` (0 = training data).
    pub fn sample(&self, n: usize, stream: u64) -> Result<Dataset> {
        if self.classes == 0 || self.dim == 0 {
            return Err(invalid("classes/dim", "must be positive"));
        }
        if !(self.separation >= 0.0) {
            return Err(invalid("separation", "must be nonnegative"));
        }
        let means = self.means();
        let mut rng = rng_for(self.seed, "synthetic-rows", &[stream]);
        let mut labels: Vec<u32> = (0..n).map(|i| (i % self.classes) as u32).collect();
        labels.shuffle(&mut rng);
        let mut features = Vec::with_capacity(n * self.dim);
        for &y in &labels {
            for m in &means[y as usize] {
                let z: f64 = rng.sample(StandardNormal);
                features.push(m + z);
            }
        }
        Ok(Dataset {
            features,
            labels,
            dim: self.dim,
            classes: self.classes,
        })
    }
}

pub fn generate_synthetic(
    classes: usize,
    dim: usize,
    n: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    SyntheticSpec {
        classes,
        dim,
        separation,
        seed,
    }
    .sample(n, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMode {
    Iid,
    /// Classes split across shells (30/30/40% for three shells, equal
    /// otherwise); each shell's samples are shared equally by its satellites.
    NonIid,
}

fn split_even(indices: &[usize], parts: usize) -> Vec<Vec<usize>> {
    let base = indices.len() / parts;
    let extra = indices.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut at = 0;
    for p in 0..parts {
        let take = base + usize::from(p < extra);
        out.push(indices[at..at + take].to_vec());
        at += take;
    }
    out
}

/// Number of classes owned by each shell.
fn shell_class_counts(classes: usize, shells: usize) -> Vec<usize> {
    let fractions: Vec<f64> = if shells == 3 {
        vec![0.3, 0.3, 0.4]
    } else {
        vec![1.0 / shells as f64; shells]
    };
    let mut counts: Vec<usize> = fractions
        .iter()
        .map(|f| ((f * classes as f64).floor() as usize).max(1))
        .collect();
    let assigned: usize = counts[..shells - 1].iter().sum();
    counts[shells - 1] = classes.saturating_sub(assigned);
    counts
}

pub fn partition(
    dataset: &Dataset,
    mode: PartitionMode,
    constellation: &Constellation,
    seed: u64,
) -> Result<Vec<DatasetShard>> {
    let ids = constellation.ids();
    if ids.is_empty() {
        return Err(invalid("constellation", "no satellites to hold data"));
    }
    let mut rng = rng_for(seed, "partition", &[]);
    let mut groups: Vec<(Vec<SatelliteId>, Vec<usize>)> = Vec::new();
    match mode {
        PartitionMode::Iid => {
            let mut all: Vec<usize> = (0..dataset.len()).collect();
            all.shuffle(&mut rng);
            groups.push((ids.to_vec(), all));
        }
        PartitionMode::NonIid => {
            let shells = constellation.shells().len();
            if dataset.classes < shells {
                return Err(invalid(
                    "partition",
                    format!("{} classes cannot cover {shells} shells", dataset.classes),
                ));
            }
            let counts = shell_class_counts(dataset.classes, shells);
            let mut first = 0;
            for (s, &count) in counts.iter().enumerate() {
                let owned = first..first + count;
                first += count;
                let mut rows: Vec<usize> = (0..dataset.len())
                    .filter(|&i| owned.contains(&(dataset.labels[i] as usize)))
                    .collect();
                rows.shuffle(&mut rng);
                let sats: Vec<SatelliteId> =
                    ids.iter().copied().filter(|i| i.shell_index == s).collect();
                groups.push((sats, rows));
            }
        }
    }
    let mut shards = Vec::with_capacity(ids.len());
    for (sats, rows) in groups {
        for (owner, part) in sats.iter().zip(split_even(&rows, sats.len())) {
            if part.is_empty() {
                return Err(invalid(
                    "partition",
                    format!("{owner} would receive no samples"),
                ));
            }
            shards.push(DatasetShard {
                data: dataset.subset(&part),
                owner: *owner,
            });
        }
    }
    shards.sort_by_key(|s| s.owner);
    Ok(shards)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut buf = Vec::with_capacity(36 + data.features.len() * 8 + data.labels.len() * 4);
    buf.extend_from_slice(&DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    for v in [data.len(), data.dim, data.classes] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for x in &data.features {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for y in &data.labels {
        buf.extend_from_slice(&y.to_le_bytes());
    }
    let tmp = path.with_extension("tmp");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let bad = |m: &str| Error::DatasetFormat(m.to_string());
    if buf.len() < 36 || buf[..8] != DATASET_MAGIC {
        return Err(bad("missing magic"));
    }
    let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
    if version != DATASET_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let word = |at: usize| u64::from_le_bytes(buf[at..at + 8].try_into().unwrap()) as usize;
    let (n, d, classes) = (word(12), word(20), word(28));
    let need = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_mul(8))
        .and_then(|f| f.checked_add(n * 4 + 36))
        .ok_or_else(|| bad("header overflow"))?;
    if buf.len() != need {
        return Err(bad(&format!("expected {need} bytes, found {}", buf.len())));
    }
    let mut at = 36;
    let features = (0..n * d)
        .map(|i| f64::from_le_bytes(buf[at + 8 * i..at + 8 * i + 8].try_into().unwrap()))
        .collect();
    at += n * d * 8;
    let labels: Vec<u32> = (0..n)
        .map(|i| u32::from_le_bytes(buf[at + 4 * i..at + 4 * i + 4].try_into().unwrap()))
        .collect();
    if labels.iter().any(|&y| y as usize >= classes) {
        return Err(bad("label out of range"));
    }
    Ok(Dataset {
        features,
        labels,
        dim: d,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_walker_delta, ShellSpec};

    fn sixty() -> Constellation {
        let specs: Vec<_> = [500e3, 1000e3, 1500e3]
            .iter()
            .map(|&h| ShellSpec::walker(h, 70.0, 2, 10))
            .collect();
        build_walker_delta(&specs).unwrap()
    }

    #[test]
    fn synthetic_shape_and_determinism() {
        let a = generate_synthetic(10, 32, 6000, 3.0, 1).unwrap();
        assert_eq!(a.len(), 6000);
        assert_eq!(a.features.len(), 6000 * 32);
        assert_eq!(a, generate_synthetic(10, 32, 6000, 3.0, 1).unwrap());
        assert_ne!(a, generate_synthetic(10, 32, 6000, 3.0, 2).unwrap());
    }

    #[test]
    fn iid_partition_is_exact_split() {
        let d = generate_synthetic(10, 4, 6000, 1.0, 3).unwrap();
        let shards = partition(&d, PartitionMode::Iid, &sixty(), 5).unwrap();
        assert_eq!(shards.len(), 60);
        assert!(shards.iter().all(|s| s.len() == 100));
    }

    #[test]
    fn non_iid_class_split() {
        let d = generate_synthetic(10, 4, 6000, 1.0, 3).unwrap();
        let shards = partition(&d, PartitionMode::NonIid, &sixty(), 5).unwrap();
        let mut per_shell = vec![std::collections::BTreeSet::new(); 3];
        for s in &shards {
            per_shell[s.owner.shell_index].extend(s.data.labels.iter().copied());
        }
        let sizes: Vec<usize> = per_shell.iter().map(|c| c.len()).collect();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert!(per_shell[0].is_disjoint(&per_shell[1]));
        assert!(per_shell[1].is_disjoint(&per_shell[2]));
        assert_eq!(shards.iter().map(|s| s.len()).sum::<usize>(), 6000);
    }

    #[test]
    fn cache_round_trip_and_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let d = generate_synthetic(3, 5, 17, 2.0, 9).unwrap();
        write_dataset(&path, &d).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), d);
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::DatasetFormat(_))));
    }
}
