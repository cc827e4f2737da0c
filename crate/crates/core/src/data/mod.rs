//! Datasets: a row-major sample matrix plus per-feature statistics, split
//! metadata and a content hash identifying where the numbers came from.

mod idx;
mod table;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use idx::{load_idx, load_idx_labels, parse_idx_images, write_idx_images, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use table::{load_csv, load_csv_with, parse_csv, CsvOptions};

/// Name of the content-hash algorithm recorded in manifests.
pub const HASH_ALGORITHM: &str = "sha256";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Binary,
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    None,
    TrainTest { train: Vec<usize>, test: Vec<usize> },
    Folds { k: usize, assignment: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// Hex SHA-256 of the source bytes (or of the generated matrix).
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_samples: usize,
    n_features: usize,
    samples: Vec<f64>,
    kind: DataKind,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    pub split: Split,
    pub provenance: Provenance,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn matrix_hash(samples: &[f64], n_features: usize) -> String {
    let mut h = Sha256::new();
    h.update((n_features as u64).to_le_bytes());
    for x in samples {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Column means and population standard deviations.
pub fn column_stats(samples: &[f64], n_samples: usize, n_features: usize) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0; n_features];
    let mut std = vec![0.0; n_features];
    if n_samples == 0 {
        return (mean, std);
    }
    for row in samples.chunks_exact(n_features) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n_samples as f64);
    for row in samples.chunks_exact(n_features) {
        for ((s, x), m) in std.iter_mut().zip(row).zip(&mean) {
            *s += (x - m).powi(2);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / n_samples as f64).sqrt());
    (mean, std)
}

impl Dataset {
    /// Wraps a row-major matrix. The content hash covers the values.
    pub fn from_rows(
        samples: Vec<f64>,
        n_features: usize,
        kind: DataKind,
        source: impl Into<String>,
    ) -> Result<Self> {
        if n_features == 0 || samples.len() % n_features != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} values do not form rows of {n_features} features",
                samples.len()
            )));
        }
        let hash = matrix_hash(&samples, n_features);
        Self::with_hash(samples, n_features, kind, source.into(), hash)
    }

    pub(crate) fn with_hash(
        samples: Vec<f64>,
        n_features: usize,
        kind: DataKind,
        source: String,
        content_hash: String,
    ) -> Result<Self> {
        if kind == DataKind::Binary && samples.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::InvalidParameter("binary dataset holds a non-{0,1} entry".into()));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("dataset holds a non-finite entry".into()));
        }
        let n_samples = samples.len() / n_features;
        let (feature_mean, feature_std) = column_stats(&samples, n_samples, n_features);
        Ok(Dataset {
            n_samples,
            n_features,
            samples,
            kind,
            feature_mean,
            feature_std,
            split: Split::None,
            provenance: Provenance {
                source,
                content_hash,
            },
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn kind(&self) -> DataKind {
        self.kind
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.n_features)
    }

    pub fn feature_mean(&self) -> &[f64] {
        &self.feature_mean
    }

    pub fn feature_std(&self) -> &[f64] {
        &self.feature_std
    }

    pub fn content_hash(&self) -> &str {
        &self.provenance.content_hash
    }

    /// New dataset holding the given rows, in order. Provenance is kept and
    /// the split is cleared.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut samples = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            if i >= self.n_samples {
                return Err(Error::InvalidParameter(format!("row {i} out of range")));
            }
            samples.extend_from_slice(self.row(i));
        }
        let mut out = Self::with_hash(
            samples,
            self.n_features,
            self.kind,
            self.provenance.source.clone(),
            self.provenance.content_hash.clone(),
        )?;
        out.provenance = self.provenance.clone();
        Ok(out)
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.n_samples)).collect();
        self.subset(&idx)
    }

    /// Training rows under a train/test split (all rows otherwise).
    pub fn train(&self) -> Result<Self> {
        match &self.split {
            Split::TrainTest { train, .. } => self.subset(train),
            _ => Ok(self.clone()),
        }
    }

    /// Test rows under a train/test split (empty otherwise).
    pub fn test(&self) -> Result<Self> {
        match &self.split {
            Split::TrainTest { test, .. } => self.subset(test),
            _ => self.subset(&[]),
        }
    }

    /// `(train, test)` for fold `f` of a k-fold split.
    pub fn fold(&self, f: usize) -> Result<(Self, Self)> {
        let Split::Folds { k, assignment } = &self.split else {
            return Err(Error::InvalidParameter("dataset has no fold assignment".into()));
        };
        if f >= *k {
            return Err(Error::InvalidParameter(format!("fold {f} out of {k}")));
        }
        let (test, train): (Vec<usize>, Vec<usize>) = (0..self.n_samples).partition(|&i| assignment[i] == f);
        Ok((self.subset(&train)?, self.subset(&test)?))
    }

    /// Contiguous split: the first `round(fraction * n)` rows train.
    pub fn with_train_fraction(mut self, fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!("train fraction {fraction} outside [0, 1]")));
        }
        let n_train = (fraction * self.n_samples as f64).round() as usize;
        self.split = Split::TrainTest {
            train: (0..n_train).collect(),
            test: (n_train..self.n_samples).collect(),
        };
        Ok(self)
    }

    pub fn with_folds<R: Rng + ?Sized>(mut self, k: usize, rng: &mut R) -> Result<Self> {
        let assignment = kfold(self.n_samples, k, rng)?;
        self.split = Split::Folds { k, assignment };
        Ok(self)
    }
}

/// `n_samples x n_features` i.i.d. standard normal entries with a 70/30
/// train/test split.
pub fn synthetic_gaussian<R: Rng + ?Sized>(n_samples: usize, n_features: usize, rng: &mut R) -> Result<Dataset> {
    if n_samples == 0 || n_features == 0 {
        return Err(Error::InvalidParameter("synthetic dataset needs positive sizes".into()));
    }
    let samples: Vec<f64> = (0..n_samples * n_features)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Dataset::from_rows(samples, n_features, DataKind::Real, format!("synthetic:gaussian:{n_samples}x{n_features}"))?
        .with_train_fraction(0.7)
}

/// Maps entries `>= threshold` to 1 and the rest to 0.
pub fn binarize(ds: &Dataset, threshold: f64) -> Result<Dataset> {
    let samples = ds
        .samples
        .iter()
        .map(|&x| if x >= threshold { 1.0 } else { 0.0 })
        .collect();
    let mut out = Dataset::with_hash(
        samples,
        ds.n_features,
        DataKind::Binary,
        ds.provenance.source.clone(),
        ds.provenance.content_hash.clone(),
    )?;
    out.split = ds.split.clone();
    Ok(out)
}

/// Z-scores every column (population std). Constant columns become 0 and
/// keep a recorded std of 0.
pub fn normalize(ds: &Dataset) -> Result<Dataset> {
    let (mean, std) = (&ds.feature_mean, &ds.feature_std);
    let samples = ds
        .samples
        .chunks_exact(ds.n_features)
        .flat_map(|row| {
            row.iter()
                .zip(mean.iter().zip(std))
                .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
        })
        .collect();
    let mut out = Dataset::with_hash(
        samples,
        ds.n_features,
        DataKind::Real,
        ds.provenance.source.clone(),
        ds.provenance.content_hash.clone(),
    )?;
    out.split = ds.split.clone();
    Ok(out)
}

/// Seeded partition of `0..n` into `k` folds whose sizes differ by at most
/// one. Returns the fold of every index.
pub fn kfold<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k-fold needs 2 <= k <= n, got k = {k}, n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut assignment = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            assignment[i] = f;
        }
        pos += size;
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn synthetic_shape_and_split() {
        let ds = synthetic_gaussian(1000, 100, &mut seeded(1)).unwrap();
        assert_eq!((ds.n_samples(), ds.n_features()), (1000, 100));
        let bound = 4.0 / (1000f64).sqrt();
        assert!(ds.feature_mean().iter().all(|m| m.abs() < bound));
        assert_eq!(ds.train().unwrap().n_samples(), 700);
        assert_eq!(ds.test().unwrap().n_samples(), 300);
    }

    #[test]
    fn synthetic_is_reproducible() {
        let a = synthetic_gaussian(20, 5, &mut seeded(3)).unwrap();
        let b = synthetic_gaussian(20, 5, &mut seeded(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.content_hash(), b.content_hash());
    }

    #[test]
    fn normalize_fixture() {
        // column 0: 1,2,3 (mean 2, std sqrt(2/3)); column 1 constant
        let ds = Dataset::from_rows(vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0], 2, DataKind::Real, "fixture").unwrap();
        let z = normalize(&ds).unwrap();
        let s = (2.0f64 / 3.0).sqrt();
        let expect = [-1.0 / s, 0.0, 0.0, 0.0, 1.0 / s, 0.0];
        for (a, b) in z.samples().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(z.feature_std()[1], 0.0);
        assert!((z.feature_std()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let ds = synthetic_gaussian(50, 4, &mut seeded(2)).unwrap();
        let once = normalize(&ds).unwrap();
        let twice = normalize(&once).unwrap();
        for (a, b) in once.samples().iter().zip(twice.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn binarize_thresholds() {
        let ds = Dataset::from_rows(vec![0.0, 0.49, 0.5, 1.0], 2, DataKind::Real, "t").unwrap();
        let b = binarize(&ds, 0.5).unwrap();
        assert_eq!(b.samples(), &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(b.kind(), DataKind::Binary);
        let zeros = Dataset::from_rows(vec![0.0; 4], 4, DataKind::Real, "t").unwrap();
        assert_eq!(binarize(&zeros, 0.5).unwrap().samples(), &[0.0; 4]);
    }

    #[test]
    fn binary_kind_is_checked() {
        assert!(Dataset::from_rows(vec![0.0, 0.5], 2, DataKind::Binary, "t").is_err());
    }

    #[test]
    fn kfold_sizes() {
        let mut rng = seeded(8);
        let a = kfold(10, 10, &mut rng).unwrap();
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());

        let a = kfold(1059, 10, &mut rng).unwrap();
        let mut sizes = vec![0; 10];
        a.iter().for_each(|&f| sizes[f] += 1);
        sizes.sort();
        assert_eq!(sizes, vec![105, 106, 106, 106, 106, 106, 106, 106, 106, 106]);
    }

    #[test]
    fn kfold_range_errors() {
        let mut rng = seeded(8);
        assert!(kfold(10, 1, &mut rng).is_err());
        assert!(kfold(3, 4, &mut rng).is_err());
    }

    #[test]
    fn folds_partition_rows() {
        let ds = synthetic_gaussian(23, 2, &mut seeded(1)).unwrap().with_folds(4, &mut seeded(2)).unwrap();
        let mut total = 0;
        for f in 0..4 {
            let (train, test) = ds.fold(f).unwrap();
            assert_eq!(train.n_samples() + test.n_samples(), 23);
            total += test.n_samples();
        }
        assert_eq!(total, 23);
    }
}
