use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latent_spectrum::assign::{self, Assigner, EnergyAssignment};
use latent_spectrum::boxspectrum::SpectrumTable;
use latent_spectrum::config::RunConfig;
use latent_spectrum::datagen::Dataset;
use latent_spectrum::vae::{self, LatentEmbedding, Vae};

const SMALL: &str = "\
[dataset]
n_samples = 150
n_features = 8
n_informative = 3
n_redundant = 1

[vae]
encoder_hidden = [12]
decoder_hidden = [12]
epochs = 3
batch_size = 32

[assign]
hidden = [8]
epochs = 5
batch_size = 50

[replicas]
seeds = [11, 12]
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latent-spectrum"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stderr_line(o: &Output) -> String {
    let s = String::from_utf8(o.stderr.clone()).unwrap();
    assert_eq!(s.lines().count(), 1, "expected one error line, got {s:?}");
    s.trim_end().to_string()
}

fn csv_bodies(dir: &Path) -> Vec<(String, String)> {
    let mut names: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let body = fs::read_to_string(dir.join(&n)).unwrap();
            (n, body)
        })
        .collect()
}

#[test]
fn pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    let o = run(&["pipeline"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "dataset.csv",
        "vae_model.txt",
        "vae_trace.csv",
        "embedding.csv",
        "latent_report.txt",
        "spectrum.csv",
        "coupling.csv",
        "assigner_model.txt",
        "assign_trace.csv",
        "assignment.csv",
        "class_spectrum.csv",
        "psi_curve.csv",
        "latent2d.csv",
        "manifest.txt",
    ] {
        assert!(out.join(name).exists(), "missing {name}");
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines.len(), 7);
    let mut cfg = RunConfig::parse(SMALL).unwrap();
    cfg.out = out.clone();
    let digest = cfg.digest();
    for line in &lines {
        assert!(line.contains(&format!("digest={digest}")), "{line}");
        assert!(line.contains("seed=0") && line.contains("duration_ms="));
    }
    assert!(lines[6].starts_with("command=pipeline"));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 7);
}

#[test]
fn artifacts_round_trip_through_their_readers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    assert!(run(&["pipeline"], &cfg_path, &out).status.success());
    let cfg = RunConfig::parse(SMALL).unwrap();

    let ds = Dataset::read_csv(&out.join("dataset.csv")).unwrap();
    assert_eq!((ds.n_samples(), ds.n_features()), (150, 8));
    let tmp2 = tempfile::tempdir().unwrap();
    ds.write_csv(&tmp2.path().join("d.csv")).unwrap();
    assert_eq!(
        fs::read(tmp2.path().join("d.csv")).unwrap(),
        fs::read(out.join("dataset.csv")).unwrap()
    );

    let model = Vae::from_text(&fs::read_to_string(out.join("vae_model.txt")).unwrap()).unwrap();
    assert_eq!(model.to_text(), fs::read_to_string(out.join("vae_model.txt")).unwrap());
    assert_eq!(vae::read_trace_csv(&out.join("vae_trace.csv")).unwrap().len(), 3);

    let emb = LatentEmbedding::read_csv(&out.join("embedding.csv")).unwrap();
    let ds_std = latent_spectrum::datagen::standardize(&ds);
    let fresh = vae::encode_dataset(&model, &ds_std, cfg.seed).unwrap();
    // the noise column is not stored; it is recovered from the samples
    assert_eq!((&emb.mu, &emb.logvar, &emb.samples, &emb.labels), (&fresh.mu, &fresh.logvar, &fresh.samples, &fresh.labels));
    assert!((&emb.noise - &fresh.noise).amax() < 1e-9);

    let table = SpectrumTable::read_csv(&out.join("spectrum.csv"), &out.join("coupling.csv"), &cfg.assign.spec).unwrap();
    assert_eq!(table, latent_spectrum::boxspectrum::build_table(&cfg.assign.spec).unwrap());

    let assigner = Assigner::from_text(&fs::read_to_string(out.join("assigner_model.txt")).unwrap()).unwrap();
    let result = EnergyAssignment::read_csv(&out.join("assignment.csv")).unwrap();
    assert_eq!(result, assign::assign_energies(&assigner, &emb).unwrap());
    assert_eq!(assign::read_trace_csv(&out.join("assign_trace.csv")).unwrap().len(), 5);

    let curve = fs::read_to_string(out.join("psi_curve.csv")).unwrap();
    assert!(curve.starts_with("label,z_box,psi,n,E\n"));
    assert_eq!(curve.lines().count(), 1 + 3 * latent_spectrum::pipeline::PSI_GRID);
    let latent = fs::read_to_string(out.join("latent2d.csv")).unwrap();
    assert!(latent.starts_with("id,pc1,pc2,label,E\n"));
    assert_eq!(latent.lines().count(), 151);
}

#[test]
fn spectrum_alone_has_vanishing_integer_corrections() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = tmp.path().join("run");
    let o = run(&["spectrum"], &cfg, &out);
    assert!(o.status.success());
    let body = fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let mut rows = 0;
    for line in body.lines().skip(1) {
        let e1: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(e1.abs() <= 1e-9, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 10);
}

#[test]
fn rerun_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["pipeline"], &cfg, &a).status.success());
    assert!(run(&["pipeline"], &cfg, &b).status.success());
    assert_eq!(csv_bodies(&a), csv_bodies(&b));
    assert_eq!(
        fs::read(a.join("assigner_model.txt")).unwrap(),
        fs::read(b.join("assigner_model.txt")).unwrap()
    );
}

#[test]
fn seed_flag_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["generate"], &cfg, &a).status.success());
    let o = bin()
        .args(["generate", "--seed", "5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_ne!(
        fs::read(a.join("dataset.csv")).unwrap(),
        fs::read(b.join("dataset.csv")).unwrap()
    );
    assert!(fs::read_to_string(b.join("manifest.txt")).unwrap().contains("seed=5"));
}

#[test]
fn stages_run_one_at_a_time() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let staged = tmp.path().join("staged");
    for cmd in ["generate", "train-vae", "embed", "spectrum", "assign", "plotdata"] {
        let o = run(&[cmd], &cfg, &staged);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let whole = tmp.path().join("whole");
    assert!(run(&["pipeline"], &cfg, &whole).status.success());
    assert_eq!(csv_bodies(&staged), csv_bodies(&whole));
}

#[test]
fn missing_upstream_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    let o = run(&["assign"], &cfg, &out);
    assert_eq!(o.status.code(), Some(3));
    let line = stderr_line(&o);
    assert!(line.starts_with("error kind=missing_upstream"), "{line}");
    assert!(line.contains("embedding.csv"));

    let o = run(&["train-vae"], &cfg, &out);
    assert!(stderr_line(&o).contains("dataset.csv"));
}

#[test]
fn refuses_to_overwrite_without_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    assert!(run(&["generate"], &cfg, &out).status.success());
    let before = fs::read(out.join("dataset.csv")).unwrap();
    let o = run(&["generate"], &cfg, &out);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr_line(&o).starts_with("error kind=would_overwrite"));
    assert_eq!(fs::read(out.join("dataset.csv")).unwrap(), before);
    assert!(run(&["generate", "--overwrite"], &cfg, &out).status.success());

    // pipeline refuses before running anything
    let o = run(&["pipeline"], &cfg, &out);
    assert_eq!(o.status.code(), Some(4));
    assert!(!out.join("vae_model.txt").exists());
}

#[test]
fn config_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(tmp.path(), "[box]\nlength = -2.0\n");
    let o = run(&["spectrum"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let line = stderr_line(&o);
    assert!(line.starts_with("error kind=config") && line.contains("box.length"), "{line}");
    assert!(!out.exists());

    let o = run(&["spectrum"], &tmp.path().join("absent.toml"), &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).contains("absent.toml"));
}

#[test]
fn replicas_stage_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("run");
    assert!(run(&["generate"], &cfg, &out).status.success());
    let o = run(&["replicas"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(out.join("replicas.txt")).unwrap();
    assert!(report.contains("replicas = 2") && report.contains("[replica.11]"));
    let pairs = fs::read_to_string(out.join("pairwise.csv")).unwrap();
    assert_eq!(pairs.lines().count(), 2);
    let spectra = fs::read_to_string(out.join("replica_spectra.csv")).unwrap();
    assert!(spectra.starts_with("seed,class_rank,mean_E,std_E\n"));
    assert_eq!(spectra.lines().count(), 1 + 2 * 3);
}
