//! Staged execution against a run directory.
//!
//! Each stage reads its inputs from the directory, writes its artifacts, and
//! appends one line to `manifest.txt`. Existing artifacts are only replaced
//! when `overwrite` is set.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::assign::{self, Assigner, EnergyAssignment};
use crate::boxspectrum::{self, SpectrumTable};
use crate::config::{RunConfig, Stage};
use crate::csvio::{self, header};
use crate::datagen::{self, Dataset};
use crate::degeneracy;
use crate::error::{Error, Result};
use crate::linalg;
use crate::vae::{self, LatentEmbedding, Vae};

pub const DATASET: &str = "dataset.csv";
pub const VAE_MODEL: &str = "vae_model.txt";
pub const VAE_TRACE: &str = "vae_trace.csv";
pub const EMBEDDING: &str = "embedding.csv";
pub const LATENT_REPORT: &str = "latent_report.txt";
pub const SPECTRUM: &str = "spectrum.csv";
pub const COUPLING: &str = "coupling.csv";
pub const ASSIGNER_MODEL: &str = "assigner_model.txt";
pub const ASSIGN_TRACE: &str = "assign_trace.csv";
pub const ASSIGNMENT: &str = "assignment.csv";
pub const CLASS_SPECTRUM: &str = "class_spectrum.csv";
pub const REPLICA_REPORT: &str = "replicas.txt";
pub const REPLICA_SPECTRA: &str = "replica_spectra.csv";
pub const PAIRWISE: &str = "pairwise.csv";
pub const PSI_CURVE: &str = "psi_curve.csv";
pub const LATENT2D: &str = "latent2d.csv";
pub const MANIFEST: &str = "manifest.txt";

/// Grid points per class in `psi_curve.csv`.
pub const PSI_GRID: usize = 50;

pub fn artifacts(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Generate => &[DATASET],
        Stage::TrainVae => &[VAE_MODEL, VAE_TRACE],
        Stage::Embed => &[EMBEDDING, LATENT_REPORT],
        Stage::Spectrum => &[SPECTRUM, COUPLING],
        Stage::Assign => &[ASSIGNER_MODEL, ASSIGN_TRACE, ASSIGNMENT, CLASS_SPECTRUM],
        Stage::Replicas => &[REPLICA_REPORT, REPLICA_SPECTRA, PAIRWISE],
        Stage::Plotdata => &[PSI_CURVE, LATENT2D],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub command: String,
    pub digest: String,
    pub seed: u64,
    pub duration: Duration,
}

impl StageRecord {
    pub fn manifest_line(&self) -> String {
        format!(
            "command={} digest={} seed={} duration_ms={}",
            self.command,
            self.digest,
            self.seed,
            self.duration.as_millis()
        )
    }
}

fn check_writable(dir: &Path, stages: &[Stage], overwrite: bool) -> Result<()> {
    if overwrite {
        return Ok(());
    }
    for stage in stages {
        for name in artifacts(*stage) {
            let p = dir.join(name);
            if p.exists() {
                return Err(Error::WouldOverwrite(p));
            }
        }
    }
    Ok(())
}

fn append_manifest(dir: &Path, record: &StageRecord) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(MANIFEST))?;
    writeln!(f, "{}", record.manifest_line())?;
    Ok(())
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingUpstream(path))
    }
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    Dataset::read_csv(&dir.join(DATASET))
}

fn load_vae(dir: &Path) -> Result<Vae> {
    let text = fs::read_to_string(require(dir.join(VAE_MODEL))?)?;
    Vae::from_text(&text)
}

fn load_assigner(dir: &Path) -> Result<Assigner> {
    let text = fs::read_to_string(require(dir.join(ASSIGNER_MODEL))?)?;
    Assigner::from_text(&text)
}

/// Runs one stage: guard, work, manifest line.
pub fn run_stage(cfg: &RunConfig, dir: &Path, stage: Stage, overwrite: bool) -> Result<StageRecord> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    check_writable(dir, &[stage], overwrite)?;
    let start = Instant::now();
    match stage {
        Stage::Generate => stage_generate(cfg, dir)?,
        Stage::TrainVae => stage_train_vae(cfg, dir)?,
        Stage::Embed => stage_embed(cfg, dir)?,
        Stage::Spectrum => stage_spectrum(cfg, dir)?,
        Stage::Assign => stage_assign(cfg, dir)?,
        Stage::Replicas => stage_replicas(cfg, dir)?,
        Stage::Plotdata => emit_plotdata(dir)?,
    }
    let record = StageRecord {
        command: stage.tag().to_string(),
        digest: cfg.digest(),
        seed: cfg.seed,
        duration: start.elapsed(),
    };
    append_manifest(dir, &record)?;
    Ok(record)
}

/// Runs `cfg.stages` in order after checking that nothing would be
/// overwritten.
pub fn run_pipeline(cfg: &RunConfig, dir: &Path, overwrite: bool) -> Result<Vec<StageRecord>> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    check_writable(dir, &cfg.stages, overwrite)?;
    let start = Instant::now();
    let mut records = Vec::with_capacity(cfg.stages.len() + 1);
    for &stage in &cfg.stages {
        records.push(run_stage(cfg, dir, stage, true)?);
    }
    let record = StageRecord {
        command: "pipeline".into(),
        digest: cfg.digest(),
        seed: cfg.seed,
        duration: start.elapsed(),
    };
    append_manifest(dir, &record)?;
    records.push(record);
    Ok(records)
}

fn stage_generate(cfg: &RunConfig, dir: &Path) -> Result<()> {
    datagen::generate(&cfg.dataset)?.write_csv(&dir.join(DATASET))
}

fn stage_train_vae(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let ds = datagen::standardize(&load_dataset(dir)?);
    let (model, trace) = vae::train_vae(&ds, &cfg.vae)?;
    fs::write(dir.join(VAE_MODEL), model.to_text())?;
    vae::write_trace_csv(&trace, &dir.join(VAE_TRACE))
}

fn stage_embed(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let ds = datagen::standardize(&load_dataset(dir)?);
    let model = load_vae(dir)?;
    let emb = vae::encode_dataset(&model, &ds, cfg.seed)?;
    emb.write_csv(&dir.join(EMBEDDING))?;
    let (rank, eig) = vae::covariance_rank(&emb, degeneracy::RANK_TOL)?;
    let collapsed = vae::collapsed_dims(&emb, degeneracy::COLLAPSE_MU_TOL, degeneracy::COLLAPSE_VAR_TOL);
    let join = |v: Vec<String>| v.join(" ");
    let text = format!(
        "covariance_rank = {rank}\neigenvalues = {}\ncollapsed_dims = {}\n",
        join(eig.iter().map(|e| e.to_string()).collect()),
        join(collapsed.iter().map(|d| d.to_string()).collect()),
    );
    fs::write(dir.join(LATENT_REPORT), text)?;
    Ok(())
}

fn stage_spectrum(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let table = boxspectrum::build_table(&cfg.assign.spec)?;
    table.write_spectrum_csv(&dir.join(SPECTRUM))?;
    table.write_coupling_csv(&dir.join(COUPLING))
}

/// Reads the tabulated spectrum back from a run directory.
pub fn read_spectrum(cfg: &RunConfig, dir: &Path) -> Result<SpectrumTable> {
    SpectrumTable::read_csv(&dir.join(SPECTRUM), &dir.join(COUPLING), &cfg.assign.spec)
}

fn stage_assign(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let emb = LatentEmbedding::read_csv(&dir.join(EMBEDDING))?;
    let (assigner, trace) = assign::train_assigner(&emb, &cfg.assign)?;
    let result = assign::assign_energies(&assigner, &emb)?;
    fs::write(dir.join(ASSIGNER_MODEL), assigner.to_text())?;
    assign::write_trace_csv(&trace, &dir.join(ASSIGN_TRACE))?;
    result.write_csv(&dir.join(ASSIGNMENT))?;
    write_class_spectrum(&result, &dir.join(CLASS_SPECTRUM))
}

/// `label,count,mean_E,std_E,mean_n,std_n`, one row per class.
pub fn write_class_spectrum(result: &EnergyAssignment, path: &Path) -> Result<()> {
    let rows = result.classes.iter().map(|c| {
        vec![
            c.label.to_string(),
            c.count.to_string(),
            c.mean_energy.to_string(),
            c.std_energy.to_string(),
            c.mean_n.to_string(),
            c.std_n.to_string(),
        ]
    });
    csvio::write_csv(
        path,
        &header(["label", "count", "mean_E", "std_E", "mean_n", "std_n"]),
        rows,
    )
}

fn stage_replicas(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let ds = datagen::standardize(&load_dataset(dir)?);
    let outcomes = degeneracy::run_replicas(&ds, &cfg.vae, &cfg.assign, &cfg.replica_seeds);
    let report = degeneracy::report(&outcomes)?;
    if report.replicas.is_empty() {
        let first = report.failures.first().map_or(String::new(), |f| f.1.clone());
        return Err(Error::Training(format!("every replica failed; first error: {first}")));
    }
    fs::write(dir.join(REPLICA_REPORT), report.to_text())?;
    report.write_spectra_csv(&dir.join(REPLICA_SPECTRA))?;
    report.write_pairwise_csv(&dir.join(PAIRWISE))
}

/// Writes `psi_curve.csv` and `latent2d.csv` from a run directory holding an
/// embedding, a trained assigner, and its assignment.
pub fn emit_plotdata(dir: &Path) -> Result<()> {
    let emb = LatentEmbedding::read_csv(&dir.join(EMBEDDING))?;
    let assigner = load_assigner(dir)?;
    let result = EnergyAssignment::read_csv(&dir.join(ASSIGNMENT))?;
    if result.energy.len() != emb.n_samples() {
        return Err(Error::Contract(format!(
            "{} has {} rows but {} has {}",
            ASSIGNMENT,
            result.energy.len(),
            EMBEDDING,
            emb.n_samples()
        )));
    }
    write_psi_curve(&assigner, &emb, &dir.join(PSI_CURVE))?;
    write_latent2d(&emb, &result, &dir.join(LATENT2D))
}

/// For each class, a line of latent codes through the class mean along the
/// projection direction, spanning the class's projected range; the trained
/// network is evaluated on every point.
fn write_psi_curve(assigner: &Assigner, emb: &LatentEmbedding, path: &Path) -> Result<()> {
    let proj = &assigner.projection;
    let spec = &assigner.config.spec;
    let scalars = proj.scalar(&emb.mu)?;
    let d = emb.latent_dim();
    let mut rows = Vec::new();
    for label in 0..emb.num_classes() {
        let idx: Vec<usize> = (0..emb.n_samples()).filter(|&i| emb.labels[i] == label).collect();
        if idx.is_empty() {
            continue;
        }
        let center: Vec<f64> = (0..d)
            .map(|j| idx.iter().map(|&i| emb.mu[(i, j)]).sum::<f64>() / idx.len() as f64)
            .collect();
        let c_scalar: f64 = (0..d)
            .map(|j| (center[j] - proj.mean[j]) * proj.direction[j])
            .sum();
        let lo = idx.iter().map(|&i| scalars[i]).fold(f64::INFINITY, f64::min);
        let hi = idx.iter().map(|&i| scalars[i]).fold(f64::NEG_INFINITY, f64::max);
        let dir_norm2 = proj.direction.norm_squared();
        let grid = DMatrix::from_fn(PSI_GRID, d, |g, j| {
            let s = lo + (hi - lo) * g as f64 / (PSI_GRID - 1) as f64;
            center[j] + (s - c_scalar) * proj.direction[j] / dir_norm2
        });
        let z_box = proj.to_box(&grid)?;
        let psi = assigner.psi(&grid)?;
        for g in 0..PSI_GRID {
            let n = assign::quantum_number(psi[g], z_box[g], spec, assigner.config.inversion)?;
            rows.push(vec![
                label.to_string(),
                z_box[g].to_string(),
                psi[g].to_string(),
                n.to_string(),
                assign::sample_energy(n, spec).to_string(),
            ]);
        }
    }
    csvio::write_csv(path, &header(["label", "z_box", "psi", "n", "E"]), rows)
}

fn write_latent2d(emb: &LatentEmbedding, result: &EnergyAssignment, path: &Path) -> Result<()> {
    let k = emb.latent_dim().min(2);
    let (mean, axes, _) = linalg::principal_axes(&emb.mu, k)?;
    let rows = (0..emb.n_samples()).map(|i| {
        let pc = |c: usize| -> f64 {
            if c >= k {
                return 0.0;
            }
            (0..emb.latent_dim())
                .map(|j| (emb.mu[(i, j)] - mean[j]) * axes[(j, c)])
                .sum()
        };
        vec![
            i.to_string(),
            pc(0).to_string(),
            pc(1).to_string(),
            emb.labels[i].to_string(),
            result.energy[i].to_string(),
        ]
    });
    csvio::write_csv(path, &header(["id", "pc1", "pc2", "label", "E"]), rows)
}
