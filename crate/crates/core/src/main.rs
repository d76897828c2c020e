use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use latent_spectrum::config::{RunConfig, Stage};
use latent_spectrum::pipeline;
use latent_spectrum::Error;

#[derive(Parser)]
#[command(name = "latent-spectrum", version, about = "Energy spectra of VAE latent spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Sectioned key-value run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Run directory; defaults to `[run] out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace artifacts that already exist.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic dataset -> dataset.csv
    Generate(Common),
    /// Train the VAE -> vae_model.txt, vae_trace.csv
    TrainVae(Common),
    /// Encode the dataset -> embedding.csv, latent_report.txt
    Embed(Common),
    /// Box spectrum tables -> spectrum.csv, coupling.csv
    Spectrum(Common),
    /// Train the energy network -> assignment.csv and friends
    Assign(Common),
    /// Seed replicas -> replicas.txt, replica_spectra.csv, pairwise.csv
    Replicas(Common),
    /// Every stage listed in `[run] stages`
    Pipeline(Common),
    /// psi_curve.csv, latent2d.csv
    Plotdata(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::MissingUpstream(_) => 3,
        Error::WouldOverwrite(_) => 4,
        Error::Training(_) => 5,
        Error::Contract(_) => 6,
        Error::Parse { .. } => 7,
        Error::Io(_) | Error::Csv(_) => 8,
    }
}

fn run(cli: Cli) -> Result<Vec<String>, Error> {
    let (stage, common) = match cli.command {
        Command::Generate(c) => (Some(Stage::Generate), c),
        Command::TrainVae(c) => (Some(Stage::TrainVae), c),
        Command::Embed(c) => (Some(Stage::Embed), c),
        Command::Spectrum(c) => (Some(Stage::Spectrum), c),
        Command::Assign(c) => (Some(Stage::Assign), c),
        Command::Replicas(c) => (Some(Stage::Replicas), c),
        Command::Plotdata(c) => (Some(Stage::Plotdata), c),
        Command::Pipeline(c) => (None, c),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = common.out {
        cfg.out = out;
    }
    let dir = cfg.out.clone();
    let records = match stage {
        Some(stage) => vec![pipeline::run_stage(&cfg, &dir, stage, common.overwrite)?],
        None => pipeline::run_pipeline(&cfg, &dir, common.overwrite)?,
    };
    Ok(records.iter().map(|r| r.manifest_line()).collect())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error kind={} message={:?}", e.kind(), message);
            ExitCode::from(exit_code(&e))
        }
    }
}
