//! Synthetic multi-class datasets: Gaussian clusters on hypercube vertices in
//! an informative subspace, plus redundant and pure-noise features.
//!
//! Column layout is `[informative | redundant | noise]`; rows are shuffled.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::csvio::{self, field, header};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_informative: usize,
    pub n_redundant: usize,
    pub k_classes: usize,
    pub clusters_per_class: usize,
    pub cluster_std: f64,
    pub class_separation: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n_samples: 2000,
            n_features: 20,
            n_informative: 5,
            n_redundant: 2,
            k_classes: 3,
            clusters_per_class: 1,
            cluster_std: 1.0,
            class_separation: 2.0,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn n_clusters(&self) -> usize {
        self.k_classes * self.clusters_per_class
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::config("dataset.n_features", "must be positive"));
        }
        if self.n_informative == 0 {
            return Err(Error::config("dataset.n_informative", "must be positive"));
        }
        if self.n_informative + self.n_redundant > self.n_features {
            return Err(Error::config(
                "dataset.n_informative",
                format!(
                    "n_informative + n_redundant = {} exceeds n_features = {}",
                    self.n_informative + self.n_redundant,
                    self.n_features
                ),
            ));
        }
        if self.k_classes < 2 {
            return Err(Error::config("dataset.k_classes", "must be at least 2"));
        }
        if self.clusters_per_class == 0 {
            return Err(Error::config("dataset.clusters_per_class", "must be at least 1"));
        }
        if !(self.cluster_std > 0.0 && self.cluster_std.is_finite()) {
            return Err(Error::config("dataset.cluster_std", "must be positive"));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::config("dataset.class_separation", "must be positive"));
        }
        if self.n_samples < self.n_clusters() {
            return Err(Error::config(
                "dataset.n_samples",
                format!("need at least one sample per cluster ({})", self.n_clusters()),
            ));
        }
        // 2^n_informative vertices are available for cluster centers
        if self.n_informative < 64 && (1u128 << self.n_informative) < self.n_clusters() as u128 {
            return Err(Error::config(
                "dataset.n_informative",
                format!(
                    "{} clusters do not fit on the {} vertices of a {}-cube",
                    self.n_clusters(),
                    1u128 << self.n_informative,
                    self.n_informative
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `N × D`, one sample per row.
    pub features: DMatrix<f64>,
    /// Class labels in `[0, k)`.
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Generating spec, absent for datasets read back from disk.
    pub spec: Option<DatasetSpec>,
}

impl Dataset {
    pub fn from_parts(features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Contract(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::Contract("non-finite feature value".into()));
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Dataset {
            features,
            labels,
            num_classes,
            spec: None,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    fn csv_header(d: usize) -> Vec<String> {
        header((0..d).map(|j| format!("f{j}")).chain(["label".to_string()]))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self.features.row_iter().zip(&self.labels).map(|(row, l)| {
            row.iter()
                .map(|v| v.to_string())
                .chain([l.to_string()])
                .collect()
        });
        csvio::write_csv(path, &Self::csv_header(self.n_features()), rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingUpstream(path.to_path_buf()));
        }
        let mut reader = csv::Reader::from_path(path)?;
        let d = reader.headers()?.len().saturating_sub(1);
        drop(reader);
        let records = csvio::read_csv(path, &Self::csv_header(d))?;
        let mut values = Vec::with_capacity(records.len() * d);
        let mut labels = Vec::with_capacity(records.len());
        for rec in &records {
            for j in 0..d {
                values.push(field::<f64>(rec, j, path)?);
            }
            labels.push(field::<usize>(rec, d, path)?);
        }
        Dataset::from_parts(DMatrix::from_row_slice(records.len(), d, &values), labels)
    }
}

/// Picks `count` distinct vertices of the `dim`-cube as bit patterns.
fn pick_vertices<R: Rng + ?Sized>(dim: usize, count: usize, rng: &mut R) -> Vec<Vec<bool>> {
    if dim <= 20 {
        rand::seq::index::sample(rng, 1usize << dim, count)
            .into_iter()
            .map(|v| (0..dim).map(|b| (v >> b) & 1 == 1).collect())
            .collect()
    } else {
        let mut picked: Vec<Vec<bool>> = Vec::with_capacity(count);
        while picked.len() < count {
            let cand: Vec<bool> = (0..dim).map(|_| rng.random_bool(0.5)).collect();
            if !picked.contains(&cand) {
                picked.push(cand);
            }
        }
        picked
    }
}

/// Splits `total` into `parts` near-equal shares, larger shares first.
fn split_evenly(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

pub fn generate(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, Stream::Dataset);
    let n = spec.n_samples;
    let d_inf = spec.n_informative;

    let vertices = pick_vertices(d_inf, spec.n_clusters(), &mut rng);
    let centers: Vec<Vec<f64>> = vertices
        .iter()
        .map(|bits| {
            bits.iter()
                .map(|&b| if b { spec.class_separation } else { -spec.class_separation })
                .collect()
        })
        .collect();

    // Cluster c belongs to class c / clusters_per_class.
    let mut cluster_of_row = Vec::with_capacity(n);
    for (class, class_n) in split_evenly(n, spec.k_classes).into_iter().enumerate() {
        for (j, m) in split_evenly(class_n, spec.clusters_per_class).into_iter().enumerate() {
            cluster_of_row.extend(std::iter::repeat_n(class * spec.clusters_per_class + j, m));
        }
    }

    let mut features = DMatrix::<f64>::zeros(n, spec.n_features);
    for (i, &c) in cluster_of_row.iter().enumerate() {
        for j in 0..d_inf {
            let e: f64 = rng.sample(StandardNormal);
            features[(i, j)] = centers[c][j] + spec.cluster_std * e;
        }
    }

    let mixing = DMatrix::<f64>::from_fn(d_inf, spec.n_redundant, |_, _| {
        rng.random_range(-1.0..=1.0)
    });
    if spec.n_redundant > 0 {
        let redundant = features.columns(0, d_inf) * &mixing;
        features
            .columns_mut(d_inf, spec.n_redundant)
            .copy_from(&redundant);
    }
    for j in (d_inf + spec.n_redundant)..spec.n_features {
        for i in 0..n {
            features[(i, j)] = rng.sample(StandardNormal);
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let shuffled = DMatrix::from_fn(n, spec.n_features, |i, j| features[(order[i], j)]);
    let labels = order
        .iter()
        .map(|&i| cluster_of_row[i] / spec.clusters_per_class)
        .collect();

    Ok(Dataset {
        features: shuffled,
        labels,
        num_classes: spec.k_classes,
        spec: Some(*spec),
    })
}

/// Centers each column and scales it to unit (population) standard deviation.
/// Constant columns become all-zero.
pub fn standardize(ds: &Dataset) -> Dataset {
    let n = ds.n_samples() as f64;
    let mut out = ds.clone();
    for mut col in out.features.column_iter_mut() {
        let mean = col.sum() / n;
        col.apply(|v| *v -= mean);
        let sd = (col.norm_squared() / n).sqrt();
        if sd > 0.0 {
            col.apply(|v| *v /= sd);
        } else {
            col.fill(0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_two_class_split() {
        let ds = generate(&DatasetSpec {
            n_samples: 100,
            k_classes: 2,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(ds.n_samples(), 100);
        assert_eq!(ds.n_features(), 20);
        let counts = ds.class_counts();
        assert!(counts.iter().all(|&c| c.abs_diff(50) <= 1));
    }

    #[test]
    fn odd_split_stays_within_one() {
        let ds = generate(&DatasetSpec {
            n_samples: 101,
            k_classes: 3,
            clusters_per_class: 2,
            ..Default::default()
        })
        .unwrap();
        let counts = ds.class_counts();
        assert_eq!(counts.iter().sum::<usize>(), 101);
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn cluster_std_is_recovered() {
        // One cluster per class, pure informative features: each class is a
        // single isotropic Gaussian with the configured spread.
        let spec = DatasetSpec {
            n_samples: 4000,
            n_features: 4,
            n_informative: 4,
            n_redundant: 0,
            k_classes: 2,
            cluster_std: 0.7,
            seed: 9,
            ..Default::default()
        };
        let ds = generate(&spec).unwrap();
        for class in 0..2 {
            let rows: Vec<usize> = (0..ds.n_samples()).filter(|&i| ds.labels[i] == class).collect();
            let m = rows.len() as f64;
            let mut cov = DMatrix::<f64>::zeros(4, 4);
            let mean: Vec<f64> = (0..4)
                .map(|j| rows.iter().map(|&i| ds.features[(i, j)]).sum::<f64>() / m)
                .collect();
            for &i in &rows {
                for a in 0..4 {
                    for b in 0..4 {
                        cov[(a, b)] += (ds.features[(i, a)] - mean[a]) * (ds.features[(i, b)] - mean[b]);
                    }
                }
            }
            cov /= m - 1.0;
            for a in 0..4 {
                let sd = cov[(a, a)].sqrt();
                assert!((sd - 0.7).abs() < 0.15 * 0.7, "class {class} dim {a}: sd {sd}");
                for b in 0..4 {
                    if a != b {
                        assert!(cov[(a, b)].abs() < 0.05, "off-diagonal {}", cov[(a, b)]);
                    }
                }
            }
            // centres sit on ±class_separation
            for &mu in &mean {
                assert!((mu.abs() - 2.0).abs() < 0.1);
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = DatasetSpec::default();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert!(a
            .features
            .iter()
            .zip(b.features.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.labels, b.labels);
        let c = generate(&DatasetSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn redundant_columns_are_linear_in_informative() {
        let spec = DatasetSpec {
            n_samples: 50,
            ..Default::default()
        };
        let ds = generate(&spec).unwrap();
        // Solve the least-squares fit of one redundant column on the informative block.
        let x = ds.features.columns(0, 5).into_owned();
        let y = ds.features.column(5).into_owned();
        let beta = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        let resid = &y - &x * beta;
        assert!(resid.amax() < 1e-9);
    }

    #[test]
    fn every_class_present_and_finite() {
        let ds = generate(&DatasetSpec {
            k_classes: 5,
            ..Default::default()
        })
        .unwrap();
        assert!(ds.class_counts().iter().all(|&c| c > 0));
        assert!(ds.features.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn infeasible_specs_are_config_errors() {
        let too_many = DatasetSpec {
            n_informative: 2,
            k_classes: 3,
            clusters_per_class: 2,
            ..Default::default()
        };
        assert!(matches!(generate(&too_many), Err(Error::Config { .. })));
        let too_wide = DatasetSpec {
            n_informative: 15,
            n_redundant: 6,
            ..Default::default()
        };
        assert!(matches!(generate(&too_wide), Err(Error::Config { .. })));
        let one_class = DatasetSpec {
            k_classes: 1,
            ..Default::default()
        };
        assert!(generate(&one_class).is_err());
    }

    #[test]
    fn standardize_moments() {
        let mut ds = generate(&DatasetSpec {
            n_samples: 300,
            ..Default::default()
        })
        .unwrap();
        ds.features.column_mut(3).fill(7.5);
        let st = standardize(&ds);
        for (j, col) in st.features.column_iter().enumerate() {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let sd = (col.map(|v| (v - mean).powi(2)).sum() / n).sqrt();
            assert!(mean.abs() < 1e-9);
            if j == 3 {
                assert!(col.iter().all(|&v| v == 0.0));
            } else {
                assert!((sd - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.csv");
        let ds = generate(&DatasetSpec {
            n_samples: 40,
            n_features: 7,
            ..Default::default()
        })
        .unwrap();
        ds.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("f0,f1,f2,f3,f4,f5,f6,label\n"));
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(back.features, ds.features);
        assert_eq!(back.labels, ds.labels);
        assert!(matches!(
            Dataset::read_csv(&dir.path().join("nope.csv")),
            Err(Error::MissingUpstream(_))
        ));
    }
}
