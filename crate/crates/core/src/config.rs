//! Run configuration: one sectioned key-value file.
//!
//! ```text
//! [dataset]   DatasetSpec fields (seed comes from [run])
//! [vae]       VaeConfig fields (input_dim follows dataset.n_features)
//! [box]       BoxSpec fields
//! [assign]    AssignConfig fields other than the box
//! [replicas]  seeds = [..]
//! [run]       seed, out, stages
//! ```
//!
//! Every key is optional and falls back to the module default. Unknown keys
//! are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::assign::{AssignConfig, InversionMode, ProjectionMode};
use crate::boxspectrum::{BoxSpec, CouplingMode};
use crate::datagen::DatasetSpec;
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::vae::VaeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    TrainVae,
    Embed,
    Spectrum,
    Assign,
    Replicas,
    Plotdata,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Generate,
        Stage::TrainVae,
        Stage::Embed,
        Stage::Spectrum,
        Stage::Assign,
        Stage::Replicas,
        Stage::Plotdata,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::TrainVae => "train-vae",
            Stage::Embed => "embed",
            Stage::Spectrum => "spectrum",
            Stage::Assign => "assign",
            Stage::Replicas => "replicas",
            Stage::Plotdata => "plotdata",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Stage::ALL.into_iter().find(|s| s.tag() == tag)
    }
}

/// Stages run by `pipeline` when `[run] stages` is not given.
pub const DEFAULT_STAGES: [Stage; 6] = [
    Stage::Generate,
    Stage::TrainVae,
    Stage::Embed,
    Stage::Spectrum,
    Stage::Assign,
    Stage::Plotdata,
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub vae: VaeConfig,
    /// Carries the box spec in `assign.spec`.
    pub assign: AssignConfig,
    pub replica_seeds: Vec<u64>,
    pub out: PathBuf,
    pub stages: Vec<Stage>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            seed: 0,
            dataset: DatasetSpec::default(),
            vae: VaeConfig::default(),
            assign: AssignConfig::default(),
            replica_seeds: vec![1, 2, 3, 4, 5],
            out: PathBuf::from("run"),
            stages: DEFAULT_STAGES.to_vec(),
        };
        cfg.sync();
        cfg
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    dataset: RawDataset,
    #[serde(default)]
    vae: RawVae,
    #[serde(default, rename = "box")]
    box_: RawBox,
    #[serde(default)]
    assign: RawAssign,
    #[serde(default)]
    replicas: RawReplicas,
    #[serde(default)]
    run: RawRun,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    n_samples: Option<usize>,
    n_features: Option<usize>,
    n_informative: Option<usize>,
    n_redundant: Option<usize>,
    k_classes: Option<usize>,
    clusters_per_class: Option<usize>,
    cluster_std: Option<f64>,
    class_separation: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawVae {
    encoder_hidden: Option<Vec<usize>>,
    latent_dim: Option<usize>,
    decoder_hidden: Option<Vec<usize>>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    beta: Option<f64>,
    activation: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBox {
    length: Option<f64>,
    kinetic: Option<f64>,
    frequency: Option<u32>,
    alpha: Option<f64>,
    modes: Option<usize>,
    coupling_mode: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAssign {
    hidden: Option<Vec<usize>>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    norm_weight: Option<f64>,
    inversion: Option<String>,
    projection: Option<String>,
    activation: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawReplicas {
    seeds: Option<Vec<u64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
    out: Option<PathBuf>,
    stages: Option<Vec<String>>,
}

fn tag<T>(field: &str, value: Option<String>, parse: fn(&str) -> Option<T>, default: T) -> Result<T> {
    match value {
        None => Ok(default),
        Some(v) => parse(&v).ok_or_else(|| Error::config(field, format!("unknown value `{v}`"))),
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    let items: Vec<String> = v.iter().map(ToString::to_string).collect();
    format!("[{}]", items.join(", "))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            Error::config("config", msg.trim_end())
        })?;
        let d = DatasetSpec::default();
        let v = VaeConfig::default();
        let b = BoxSpec::default();
        let a = AssignConfig::default();
        let base = RunConfig::default();
        let (rd, rv, rb, ra) = (raw.dataset, raw.vae, raw.box_, raw.assign);

        let stages = match raw.run.stages {
            None => base.stages,
            Some(list) => list
                .iter()
                .map(|s| {
                    Stage::from_tag(s)
                        .ok_or_else(|| Error::config("run.stages", format!("unknown stage `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let spec = BoxSpec {
            length: rb.length.unwrap_or(b.length),
            kinetic: rb.kinetic.unwrap_or(b.kinetic),
            frequency: rb.frequency.unwrap_or(b.frequency),
            alpha: rb.alpha.unwrap_or(b.alpha),
            modes: rb.modes.unwrap_or(b.modes),
            coupling_mode: tag("box.coupling_mode", rb.coupling_mode, CouplingMode::from_tag, b.coupling_mode)?,
        };
        let mut cfg = RunConfig {
            seed: raw.run.seed.unwrap_or(base.seed),
            dataset: DatasetSpec {
                n_samples: rd.n_samples.unwrap_or(d.n_samples),
                n_features: rd.n_features.unwrap_or(d.n_features),
                n_informative: rd.n_informative.unwrap_or(d.n_informative),
                n_redundant: rd.n_redundant.unwrap_or(d.n_redundant),
                k_classes: rd.k_classes.unwrap_or(d.k_classes),
                clusters_per_class: rd.clusters_per_class.unwrap_or(d.clusters_per_class),
                cluster_std: rd.cluster_std.unwrap_or(d.cluster_std),
                class_separation: rd.class_separation.unwrap_or(d.class_separation),
                seed: 0,
            },
            vae: VaeConfig {
                input_dim: 0,
                encoder_hidden: rv.encoder_hidden.unwrap_or(v.encoder_hidden),
                latent_dim: rv.latent_dim.unwrap_or(v.latent_dim),
                decoder_hidden: rv.decoder_hidden.unwrap_or(v.decoder_hidden),
                epochs: rv.epochs.unwrap_or(v.epochs),
                batch_size: rv.batch_size.unwrap_or(v.batch_size),
                learning_rate: rv.learning_rate.unwrap_or(v.learning_rate),
                beta: rv.beta.unwrap_or(v.beta),
                activation: tag("vae.activation", rv.activation, Activation::from_tag, v.activation)?,
                seed: 0,
            },
            assign: AssignConfig {
                hidden: ra.hidden.unwrap_or(a.hidden),
                epochs: ra.epochs.unwrap_or(a.epochs),
                batch_size: ra.batch_size.unwrap_or(a.batch_size),
                learning_rate: ra.learning_rate.unwrap_or(a.learning_rate),
                spec,
                norm_weight: ra.norm_weight.unwrap_or(a.norm_weight),
                inversion: tag("assign.inversion", ra.inversion, InversionMode::from_tag, a.inversion)?,
                projection: tag("assign.projection", ra.projection, ProjectionMode::from_tag, a.projection)?,
                activation: tag("assign.activation", ra.activation, Activation::from_tag, a.activation)?,
                seed: 0,
            },
            replica_seeds: raw.replicas.seeds.unwrap_or(base.replica_seeds),
            out: raw.run.out.unwrap_or(base.out),
            stages,
        };
        cfg.sync();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::config("config", format!("file {} not found", path.display()))
            } else {
                Error::Io(e)
            }
        })?;
        Self::parse(&text)
    }

    /// Propagates the run seed and the feature count into the module configs.
    fn sync(&mut self) {
        self.dataset.seed = self.seed;
        self.vae.seed = self.seed;
        self.assign.seed = self.seed;
        self.vae.input_dim = self.dataset.n_features;
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.sync();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.vae.validate()?;
        self.assign.validate()?;
        // TOML integers are signed 64-bit
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("run.seed", "must be below 2^63"));
        }
        if self.replica_seeds.iter().any(|&s| s > i64::MAX as u64) {
            return Err(Error::config("replicas.seeds", "must be below 2^63"));
        }
        if self.stages.is_empty() {
            return Err(Error::config("run.stages", "must name at least one stage"));
        }
        if self.stages.contains(&Stage::Replicas) && self.replica_seeds.len() < 2 {
            return Err(Error::config("replicas.seeds", "needs at least two seeds"));
        }
        Ok(())
    }

    /// Canonical text with every field written out; re-parses to `self`.
    pub fn to_text(&self) -> String {
        let d = &self.dataset;
        let v = &self.vae;
        let b = &self.assign.spec;
        let a = &self.assign;
        let mut s = String::new();
        let _ = writeln!(s, "[dataset]");
        let _ = writeln!(s, "n_samples = {}", d.n_samples);
        let _ = writeln!(s, "n_features = {}", d.n_features);
        let _ = writeln!(s, "n_informative = {}", d.n_informative);
        let _ = writeln!(s, "n_redundant = {}", d.n_redundant);
        let _ = writeln!(s, "k_classes = {}", d.k_classes);
        let _ = writeln!(s, "clusters_per_class = {}", d.clusters_per_class);
        let _ = writeln!(s, "cluster_std = {:?}", d.cluster_std);
        let _ = writeln!(s, "class_separation = {:?}", d.class_separation);
        let _ = writeln!(s, "\n[vae]");
        let _ = writeln!(s, "encoder_hidden = {}", list(&v.encoder_hidden));
        let _ = writeln!(s, "latent_dim = {}", v.latent_dim);
        let _ = writeln!(s, "decoder_hidden = {}", list(&v.decoder_hidden));
        let _ = writeln!(s, "epochs = {}", v.epochs);
        let _ = writeln!(s, "batch_size = {}", v.batch_size);
        let _ = writeln!(s, "learning_rate = {:?}", v.learning_rate);
        let _ = writeln!(s, "beta = {:?}", v.beta);
        let _ = writeln!(s, "activation = \"{}\"", v.activation.tag());
        let _ = writeln!(s, "\n[box]");
        let _ = writeln!(s, "length = {:?}", b.length);
        let _ = writeln!(s, "kinetic = {:?}", b.kinetic);
        let _ = writeln!(s, "frequency = {}", b.frequency);
        let _ = writeln!(s, "alpha = {:?}", b.alpha);
        let _ = writeln!(s, "modes = {}", b.modes);
        let _ = writeln!(s, "coupling_mode = \"{}\"", b.coupling_mode.tag());
        let _ = writeln!(s, "\n[assign]");
        let _ = writeln!(s, "hidden = {}", list(&a.hidden));
        let _ = writeln!(s, "epochs = {}", a.epochs);
        let _ = writeln!(s, "batch_size = {}", a.batch_size);
        let _ = writeln!(s, "learning_rate = {:?}", a.learning_rate);
        let _ = writeln!(s, "norm_weight = {:?}", a.norm_weight);
        let _ = writeln!(s, "inversion = \"{}\"", a.inversion.tag());
        let _ = writeln!(s, "projection = \"{}\"", a.projection.tag());
        let _ = writeln!(s, "activation = \"{}\"", a.activation.tag());
        let _ = writeln!(s, "\n[replicas]");
        let _ = writeln!(s, "seeds = {}", list(&self.replica_seeds));
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let out = toml::Value::String(self.out.to_string_lossy().into_owned());
        let _ = writeln!(s, "out = {out}");
        let stages: Vec<String> = self.stages.iter().map(|st| format!("\"{}\"", st.tag())).collect();
        let _ = writeln!(s, "stages = [{}]", stages.join(", "));
        s
    }

    /// SHA-256 of [`RunConfig::to_text`].
    pub fn digest(&self) -> String {
        sha256_hex(&self.to_text())
    }
}
