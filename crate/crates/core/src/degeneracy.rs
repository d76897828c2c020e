//! Replica experiments: the same dataset is embedded and assigned under
//! several seeds, then embeddings and energy spectra are compared across
//! replicas.
//!
//! Both comparison scores are constructions of this crate. The alignment
//! score measures how far two latent clouds are from an orthogonal copy of
//! each other; the spectrum distance compares sorted, min-max normalised
//! class-mean energies.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::assign::{self, class_aggregates, AssignConfig, EnergyAssignment};
use crate::csvio::{self, header};
use crate::datagen::Dataset;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{stream_rng, Stream};
use crate::vae::{self, LatentEmbedding, VaeConfig};

/// Relative eigenvalue tolerance used for the covariance rank of a replica.
pub const RANK_TOL: f64 = 1e-8;
/// Thresholds for [`vae::collapsed_dims`] in replica summaries.
pub const COLLAPSE_MU_TOL: f64 = 1e-2;
pub const COLLAPSE_VAR_TOL: f64 = 5e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct Replica {
    pub seed: u64,
    pub vae_digest: String,
    pub embedding: LatentEmbedding,
    pub assignment: EnergyAssignment,
}

#[derive(Debug)]
pub struct ReplicaOutcome {
    pub seed: u64,
    pub result: Result<Replica>,
}

/// Trains one VAE and one assigner per seed on `ds`. The dataset is shared;
/// only the model seeds change. A failing replica does not stop the others.
pub fn run_replicas(
    ds: &Dataset,
    vae_cfg: &VaeConfig,
    assign_cfg: &AssignConfig,
    seeds: &[u64],
) -> Vec<ReplicaOutcome> {
    seeds
        .par_iter()
        .map(|&seed| ReplicaOutcome {
            seed,
            result: run_one(ds, vae_cfg, assign_cfg, seed),
        })
        .collect()
}

fn run_one(ds: &Dataset, vae_cfg: &VaeConfig, assign_cfg: &AssignConfig, seed: u64) -> Result<Replica> {
    let vcfg = VaeConfig {
        seed,
        ..vae_cfg.clone()
    };
    let acfg = AssignConfig {
        seed,
        ..assign_cfg.clone()
    };
    let (model, _) = vae::train_vae(ds, &vcfg)?;
    let embedding = vae::encode_dataset(&model, ds, seed)?;
    let (assigner, _) = assign::train_assigner(&embedding, &acfg)?;
    let assignment = assign::assign_energies(&assigner, &embedding)?;
    Ok(Replica {
        seed,
        vae_digest: sha256_hex(&vcfg.to_text()),
        embedding,
        assignment,
    })
}

/// Orthogonal Procrustes agreement between two latent clouds.
///
/// Both `mu` matrices are centred and scaled to unit Frobenius norm; the
/// score is the nuclear norm of `AᵀB`, i.e. `1 − ½‖AR − B‖²` for the best
/// orthogonal `R`. It lies in `[0, 1]` and equals 1 exactly when one cloud is
/// an orthogonal image of the other.
pub fn embedding_alignment(a: &LatentEmbedding, b: &LatentEmbedding) -> Result<f64> {
    cloud_alignment(&a.mu, &b.mu)
}

pub fn cloud_alignment(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Contract(format!(
            "cannot align clouds of shape {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let normalise = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let c = linalg::centered(m);
        let norm = c.norm();
        if norm == 0.0 {
            return Err(Error::Contract("cannot align a cloud with zero spread".into()));
        }
        Ok(c / norm)
    };
    let (a, b) = (normalise(a)?, normalise(b)?);
    let cross = a.transpose() * b;
    let score: f64 = cross.singular_values().iter().sum();
    Ok(score.clamp(0.0, 1.0))
}

/// Sorted values rescaled to `[0, 1]`; a constant vector maps to zeros.
pub fn normalise_spectrum(spectrum: &[f64]) -> Vec<f64> {
    let mut s = spectrum.to_vec();
    s.sort_by(f64::total_cmp);
    let (lo, hi) = match (s.first(), s.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return s,
    };
    if hi == lo {
        return vec![0.0; s.len()];
    }
    s.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Mean absolute difference of the normalised sorted spectra.
pub fn spectrum_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Contract(format!(
            "spectra of length {} and {} are not comparable",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (normalise_spectrum(a), normalise_spectrum(b));
    Ok(na.iter().zip(&nb).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Class-mean spectrum of `assignment` after shuffling its labels with the
/// label-shuffle stream of `seed`.
pub fn shuffled_control_spectrum(assignment: &EnergyAssignment, seed: u64) -> Vec<f64> {
    let mut labels = assignment.labels.clone();
    labels.shuffle(&mut stream_rng(seed, Stream::LabelShuffle));
    let mut means: Vec<f64> = class_aggregates(&assignment.energy, &assignment.n, &labels)
        .iter()
        .map(|c| c.mean_energy)
        .collect();
    means.sort_by(f64::total_cmp);
    means
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaSummary {
    pub seed: u64,
    pub vae_digest: String,
    pub covariance_rank: usize,
    pub collapsed_dims: Vec<usize>,
    /// Class-mean energies sorted ascending, with the matching std.
    pub spectrum: Vec<f64>,
    pub spectrum_std: Vec<f64>,
    pub control_spectrum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub seed_a: u64,
    pub seed_b: u64,
    pub alignment: f64,
    pub spectrum_distance: f64,
    /// Distance between replica `a` and the label-shuffled control of `b`.
    pub control_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaReport {
    pub replicas: Vec<ReplicaSummary>,
    pub failures: Vec<(u64, String)>,
    /// Every unordered pair `a < b` in replica order.
    pub pairs: Vec<PairScore>,
    pub median_alignment: f64,
    pub median_spectrum_distance: f64,
    pub median_control_distance: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn report(outcomes: &[ReplicaOutcome]) -> Result<ReplicaReport> {
    let mut ok: Vec<&Replica> = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match &o.result {
            Ok(r) => ok.push(r),
            Err(e) => failures.push((o.seed, e.to_string())),
        }
    }
    let mut replicas = Vec::with_capacity(ok.len());
    for r in &ok {
        let mut classes = r.assignment.classes.clone();
        classes.sort_by(|a, b| a.mean_energy.total_cmp(&b.mean_energy));
        let (rank, _) = vae::covariance_rank(&r.embedding, RANK_TOL)?;
        replicas.push(ReplicaSummary {
            seed: r.seed,
            vae_digest: r.vae_digest.clone(),
            covariance_rank: rank,
            collapsed_dims: vae::collapsed_dims(&r.embedding, COLLAPSE_MU_TOL, COLLAPSE_VAR_TOL),
            spectrum: classes.iter().map(|c| c.mean_energy).collect(),
            spectrum_std: classes.iter().map(|c| c.std_energy).collect(),
            control_spectrum: shuffled_control_spectrum(&r.assignment, r.seed),
        });
    }
    if let Some(first) = replicas.first() {
        let k = first.spectrum.len();
        if replicas.iter().any(|r| r.spectrum.len() != k) {
            return Err(Error::Contract("replicas disagree on the number of classes".into()));
        }
    }
    let mut pairs = Vec::new();
    for i in 0..ok.len() {
        for j in i + 1..ok.len() {
            pairs.push(PairScore {
                seed_a: ok[i].seed,
                seed_b: ok[j].seed,
                alignment: embedding_alignment(&ok[i].embedding, &ok[j].embedding)?,
                spectrum_distance: spectrum_distance(&replicas[i].spectrum, &replicas[j].spectrum)?,
                control_distance: spectrum_distance(
                    &replicas[i].spectrum,
                    &replicas[j].control_spectrum,
                )?,
            });
        }
    }
    let col = |f: fn(&PairScore) -> f64| median(&pairs.iter().map(f).collect::<Vec<_>>());
    Ok(ReplicaReport {
        median_alignment: col(|p| p.alignment),
        median_spectrum_distance: col(|p| p.spectrum_distance),
        median_control_distance: col(|p| p.control_distance),
        replicas,
        failures,
        pairs,
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

impl ReplicaReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[summary]");
        let _ = writeln!(s, "replicas = {}", self.replicas.len());
        let _ = writeln!(s, "failures = {}", self.failures.len());
        let _ = writeln!(s, "median_alignment = {}", self.median_alignment);
        let _ = writeln!(s, "median_spectrum_distance = {}", self.median_spectrum_distance);
        let _ = writeln!(s, "median_control_distance = {}", self.median_control_distance);
        let _ = writeln!(s, "alignment_score = orthogonal Procrustes nuclear norm (constructed measure)");
        let _ = writeln!(s, "spectrum_distance = mean abs diff of min-max normalised sorted class means (constructed measure)");
        for r in &self.replicas {
            let _ = writeln!(s, "\n[replica.{}]", r.seed);
            let _ = writeln!(s, "vae_digest = {}", r.vae_digest);
            let _ = writeln!(s, "covariance_rank = {}", r.covariance_rank);
            let _ = writeln!(s, "collapsed_dims = {}", join(&r.collapsed_dims));
            let _ = writeln!(s, "spectrum = {}", join(&r.spectrum));
            let _ = writeln!(s, "control_spectrum = {}", join(&r.control_spectrum));
        }
        for (seed, msg) in &self.failures {
            let _ = writeln!(s, "\n[failure.{seed}]");
            let _ = writeln!(s, "error = {msg}");
        }
        s
    }

    pub fn write_spectra_csv(&self, path: &Path) -> Result<()> {
        let rows = self.replicas.iter().flat_map(|r| {
            (0..r.spectrum.len()).map(move |i| {
                vec![
                    r.seed.to_string(),
                    i.to_string(),
                    r.spectrum[i].to_string(),
                    r.spectrum_std[i].to_string(),
                ]
            })
        });
        csvio::write_csv(path, &header(["seed", "class_rank", "mean_E", "std_E"]), rows)
    }

    pub fn write_pairwise_csv(&self, path: &Path) -> Result<()> {
        let rows = self.pairs.iter().map(|p| {
            vec![
                p.seed_a.to_string(),
                p.seed_b.to_string(),
                p.alignment.to_string(),
                p.spectrum_distance.to_string(),
            ]
        });
        csvio::write_csv(
            path,
            &header(["seedA", "seedB", "alignment", "spectrum_distance"]),
            rows,
        )
    }
}
