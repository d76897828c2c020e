//! Energy assignment: a small network maps each latent code to a wavefunction
//! value ψ, the box coordinate `z` of the code turns ψ into a continuous
//! quantum number `n`, and the network is trained to minimise the perturbed
//! energy `α n² + E¹(n)` under a unit-norm penalty on ψ.
//!
//! Class labels never enter training; they are only used to aggregate the
//! resulting per-sample energies into a per-class spectrum.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::boxspectrum::{self, BoxMap, BoxSpec};
use crate::csvio::{self, field, header};
use crate::error::{Error, Result};
use crate::linalg;
use crate::nn::{self, Activation, DenseNetwork, OptimizerKind, OptimizerState};
use crate::rng::{stream_rng, Stream};
use crate::vae::{split_sections, LatentEmbedding};

/// Floor applied to the recovered quantum number.
pub const N_MIN: f64 = 1e-3;

/// Distance kept from the box walls, as a fraction of `L`.
pub const BOX_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InversionMode {
    /// `n = L/(π z) · asin(L ψ² / 2)`, exactly as printed.
    PaperLiteral,
    /// `n = L/(π z) · asin(sqrt(L/2) |ψ|)`, the inverse of φₙ(z).
    #[default]
    Corrected,
}

impl InversionMode {
    pub fn tag(self) -> &'static str {
        match self {
            InversionMode::PaperLiteral => "paper-literal",
            InversionMode::Corrected => "corrected",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "paper-literal" | "literal" => Some(InversionMode::PaperLiteral),
            "corrected" => Some(InversionMode::Corrected),
            _ => None,
        }
    }
}

/// How a `d_z`-dimensional code becomes the scalar box coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    #[default]
    FirstPrincipalComponent,
    DimensionMean,
}

impl ProjectionMode {
    pub fn tag(self) -> &'static str {
        match self {
            ProjectionMode::FirstPrincipalComponent => "first-principal-component",
            ProjectionMode::DimensionMean => "per-dimension-mean",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "first-principal-component" | "pca" => Some(ProjectionMode::FirstPrincipalComponent),
            "per-dimension-mean" | "mean" => Some(ProjectionMode::DimensionMean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Box geometry, potential, and kinetic weight α.
    pub spec: BoxSpec,
    /// Weight of the `(L·mean ψ² − 1)²` normalisation penalty.
    pub norm_weight: f64,
    pub inversion: InversionMode,
    pub projection: ProjectionMode,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for AssignConfig {
    fn default() -> Self {
        AssignConfig {
            hidden: vec![32, 32],
            epochs: 400,
            batch_size: 100,
            learning_rate: 1e-2,
            spec: BoxSpec::default(),
            norm_weight: 1.0,
            inversion: InversionMode::Corrected,
            projection: ProjectionMode::FirstPrincipalComponent,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl AssignConfig {
    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.hidden.contains(&0) {
            return Err(Error::config("assign.hidden", "layer sizes must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("assign.epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("assign.batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("assign.learning_rate", "must be positive"));
        }
        if !(self.norm_weight >= 0.0 && self.norm_weight.is_finite()) {
            return Err(Error::config("assign.norm_weight", "must be non-negative"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let hidden: Vec<String> = self.hidden.iter().map(|s| s.to_string()).collect();
        let mut s = String::new();
        let _ = writeln!(s, "hidden = [{}]", hidden.join(", "));
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "learning_rate = {:?}", self.learning_rate);
        let _ = writeln!(s, "norm_weight = {:?}", self.norm_weight);
        let _ = writeln!(s, "inversion = \"{}\"", self.inversion.tag());
        let _ = writeln!(s, "projection = \"{}\"", self.projection.tag());
        let _ = writeln!(s, "activation = \"{}\"", self.activation.tag());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "length = {:?}", self.spec.length);
        let _ = writeln!(s, "kinetic = {:?}", self.spec.kinetic);
        let _ = writeln!(s, "frequency = {}", self.spec.frequency);
        let _ = writeln!(s, "alpha = {:?}", self.spec.alpha);
        let _ = writeln!(s, "modes = {}", self.spec.modes);
        let _ = writeln!(s, "coupling_mode = \"{}\"", self.spec.coupling_mode.tag());
        s
    }

    fn from_text(block: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Raw {
            hidden: Vec<usize>,
            epochs: usize,
            batch_size: usize,
            learning_rate: f64,
            norm_weight: f64,
            inversion: String,
            projection: String,
            activation: String,
            seed: u64,
            length: f64,
            kinetic: f64,
            frequency: u32,
            alpha: f64,
            modes: usize,
            coupling_mode: String,
        }
        let bad = |what: &str, v: &str| Error::parse("assign_config", format!("unknown {what} `{v}`"));
        let raw: Raw =
            toml::from_str(block).map_err(|e| Error::parse("assign_config", e.to_string()))?;
        Ok(AssignConfig {
            hidden: raw.hidden,
            epochs: raw.epochs,
            batch_size: raw.batch_size,
            learning_rate: raw.learning_rate,
            norm_weight: raw.norm_weight,
            inversion: InversionMode::from_tag(&raw.inversion)
                .ok_or_else(|| bad("inversion", &raw.inversion))?,
            projection: ProjectionMode::from_tag(&raw.projection)
                .ok_or_else(|| bad("projection", &raw.projection))?,
            activation: Activation::from_tag(&raw.activation)
                .ok_or_else(|| bad("activation", &raw.activation))?,
            seed: raw.seed,
            spec: BoxSpec {
                length: raw.length,
                kinetic: raw.kinetic,
                frequency: raw.frequency,
                alpha: raw.alpha,
                modes: raw.modes,
                coupling_mode: boxspectrum::CouplingMode::from_tag(&raw.coupling_mode)
                    .ok_or_else(|| bad("coupling mode", &raw.coupling_mode))?,
            },
        })
    }
}

/// Fitted map from latent codes to box coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub mode: ProjectionMode,
    pub mean: DVector<f64>,
    /// Unit direction for the principal-component mode, `1/d_z` weights for
    /// the mean mode.
    pub direction: DVector<f64>,
    pub map: BoxMap,
}

impl Projection {
    pub fn fit(mu: &DMatrix<f64>, mode: ProjectionMode, spec: &BoxSpec) -> Result<Self> {
        if mu.nrows() < 2 {
            return Err(Error::Contract("projection needs at least 2 latent codes".into()));
        }
        let d = mu.ncols();
        let (mean, direction) = match mode {
            ProjectionMode::FirstPrincipalComponent => {
                let (mean, axes, _) = linalg::principal_axes(mu, 1)?;
                (mean, axes.column(0).into_owned())
            }
            ProjectionMode::DimensionMean => {
                (DVector::zeros(d), DVector::from_element(d, 1.0 / d as f64))
            }
        };
        let raw = scalars(mu, &mean, &direction);
        let map = BoxMap::fit(&raw, spec.length, BOX_MARGIN * spec.length)?;
        Ok(Projection {
            mode,
            mean,
            direction,
            map,
        })
    }

    /// Scalar coordinate of each row before box mapping.
    pub fn scalar(&self, mu: &DMatrix<f64>) -> Result<Vec<f64>> {
        if mu.ncols() != self.direction.len() {
            return Err(Error::Contract(format!(
                "latent width {} does not match projection width {}",
                mu.ncols(),
                self.direction.len()
            )));
        }
        Ok(scalars(mu, &self.mean, &self.direction))
    }

    pub fn to_box(&self, mu: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.scalar(mu)?.into_iter().map(|s| self.map.apply(s)).collect())
    }

    fn to_text(&self) -> String {
        let join = |v: &DVector<f64>| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "mode = \"{}\"\nmean = [{}]\ndirection = [{}]\nmin = {:?}\nmax = {:?}\nmargin = {:?}\nlength = {:?}\n",
            self.mode.tag(),
            join(&self.mean),
            join(&self.direction),
            self.map.min,
            self.map.max,
            self.map.margin,
            self.map.length
        )
    }

    fn from_text(block: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Raw {
            mode: String,
            mean: Vec<f64>,
            direction: Vec<f64>,
            min: f64,
            max: f64,
            margin: f64,
            length: f64,
        }
        let raw: Raw = toml::from_str(block).map_err(|e| Error::parse("projection", e.to_string()))?;
        Ok(Projection {
            mode: ProjectionMode::from_tag(&raw.mode)
                .ok_or_else(|| Error::parse("projection", format!("unknown mode `{}`", raw.mode)))?,
            mean: DVector::from_vec(raw.mean),
            direction: DVector::from_vec(raw.direction),
            map: BoxMap {
                min: raw.min,
                max: raw.max,
                margin: raw.margin,
                length: raw.length,
            },
        })
    }
}

fn scalars(mu: &DMatrix<f64>, mean: &DVector<f64>, direction: &DVector<f64>) -> Vec<f64> {
    mu.row_iter()
        .map(|row| {
            row.iter()
                .zip(mean.iter())
                .zip(direction.iter())
                .map(|((x, m), d)| (x - m) * d)
                .sum()
        })
        .collect()
}

/// Scalar coordinate of each latent code (before box mapping).
pub fn project_latent(emb: &LatentEmbedding, cfg: &AssignConfig) -> Result<Vec<f64>> {
    Projection::fit(&emb.mu, cfg.projection, &cfg.spec)?.scalar(&emb.mu)
}

/// Quantum number and its derivative with respect to ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub n: f64,
    pub dn_dpsi: f64,
    /// The arcsin argument reached 1 and was clamped.
    pub clamped: bool,
    /// The raw value fell below [`N_MIN`].
    pub floored: bool,
}

pub fn invert(psi: f64, z_box: f64, spec: &BoxSpec, mode: InversionMode) -> Result<Inversion> {
    let l = spec.length;
    let eps = BOX_MARGIN * l;
    if !(z_box >= eps * (1.0 - 1e-12)) {
        return Err(Error::Contract(format!(
            "box coordinate {z_box} is below the margin {eps}"
        )));
    }
    if !psi.is_finite() {
        return Err(Error::Training(format!("non-finite wavefunction value {psi}")));
    }
    let scale = l / (PI * z_box);
    let (u, du) = match mode {
        InversionMode::PaperLiteral => (l * psi * psi / 2.0, l * psi),
        InversionMode::Corrected => {
            let k = (l / 2.0).sqrt();
            let sign = if psi > 0.0 {
                1.0
            } else if psi < 0.0 {
                -1.0
            } else {
                0.0
            };
            (k * psi.abs(), k * sign)
        }
    };
    let clamped = u >= 1.0;
    let (raw, draw) = if clamped {
        (scale * PI / 2.0, 0.0)
    } else {
        (scale * u.asin(), scale * du / (1.0 - u * u).sqrt())
    };
    if raw < N_MIN {
        return Ok(Inversion {
            n: N_MIN,
            dn_dpsi: 0.0,
            clamped,
            floored: true,
        });
    }
    Ok(Inversion {
        n: raw,
        dn_dpsi: draw,
        clamped,
        floored: false,
    })
}

/// Continuous quantum number recovered from ψ at box coordinate `z_box`.
pub fn quantum_number(psi: f64, z_box: f64, spec: &BoxSpec, mode: InversionMode) -> Result<f64> {
    invert(psi, z_box, spec, mode).map(|i| i.n)
}

/// Energy `α n² + E¹(n)` of one sample.
pub fn sample_energy(n: f64, spec: &BoxSpec) -> f64 {
    spec.alpha * n * n + boxspectrum::e1_closed(n, spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLoss {
    pub loss: f64,
    /// `λ (L·mean ψ² − 1)²`
    pub penalty: f64,
    pub energies: Vec<f64>,
    pub quantum_numbers: Vec<f64>,
    /// `∂loss/∂ψᵢ`
    pub grad: Vec<f64>,
    /// Fraction of samples whose arcsin argument was clamped.
    pub clamp_rate: f64,
}

/// `mean(α nᵢ² + E¹(nᵢ)) + λ (L·mean ψᵢ² − 1)²` and its gradient in ψ.
pub fn energy_loss(psi: &[f64], z_box: &[f64], cfg: &AssignConfig) -> Result<EnergyLoss> {
    if psi.is_empty() {
        return Err(Error::Contract("energy_loss on an empty batch".into()));
    }
    if psi.len() != z_box.len() {
        return Err(Error::Contract(format!(
            "{} wavefunction values but {} box coordinates",
            psi.len(),
            z_box.len()
        )));
    }
    let spec = &cfg.spec;
    let b = psi.len() as f64;
    let l = spec.length;
    let mut energies = Vec::with_capacity(psi.len());
    let mut quantum_numbers = Vec::with_capacity(psi.len());
    let mut grad = Vec::with_capacity(psi.len());
    let mut clamped = 0usize;
    for (&p, &z) in psi.iter().zip(z_box) {
        let inv = invert(p, z, spec, cfg.inversion)?;
        clamped += usize::from(inv.clamped);
        let e = sample_energy(inv.n, spec);
        let de_dn = 2.0 * spec.alpha * inv.n + boxspectrum::e1_derivative(inv.n, spec);
        energies.push(e);
        quantum_numbers.push(inv.n);
        grad.push(de_dn * inv.dn_dpsi / b);
    }
    let norm = l * psi.iter().map(|p| p * p).sum::<f64>() / b;
    let excess = norm - 1.0;
    let penalty = cfg.norm_weight * excess * excess;
    for (g, &p) in grad.iter_mut().zip(psi) {
        *g += cfg.norm_weight * 2.0 * excess * 2.0 * l * p / b;
    }
    let loss = energies.iter().sum::<f64>() / b + penalty;
    Ok(EnergyLoss {
        loss,
        penalty,
        energies,
        quantum_numbers,
        grad,
        clamp_rate: clamped as f64 / b,
    })
}

/// Trained energy network with the projection it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct Assigner {
    pub config: AssignConfig,
    pub network: DenseNetwork,
    pub projection: Projection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub mean_n: f64,
    pub mean_energy: f64,
    pub clamp_rate: f64,
}

impl Assigner {
    /// ψ for each latent code (rows of `mu`).
    pub fn psi(&self, mu: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.network.forward(mu)?.column(0).iter().copied().collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("[assign_config]\n");
        s.push_str(&self.config.to_text());
        s.push_str("[projection]\n");
        s.push_str(&self.projection.to_text());
        s.push_str("[network]\n");
        s.push_str(&nn::write_network(&self.network));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let sections = split_sections(text, &["assign_config", "projection", "network"])?;
        let config = AssignConfig::from_text(sections[0])?;
        config.validate()?;
        let projection = Projection::from_text(sections[1])?;
        let network = nn::read_network(sections[2])?;
        if network.input_size() != projection.direction.len() || network.output_size() != 1 {
            return Err(Error::parse("assigner model", "network shape disagrees with projection"));
        }
        Ok(Assigner {
            config,
            network,
            projection,
        })
    }
}

pub fn train_assigner(emb: &LatentEmbedding, cfg: &AssignConfig) -> Result<(Assigner, Vec<AssignEpoch>)> {
    cfg.validate()?;
    let projection = Projection::fit(&emb.mu, cfg.projection, &cfg.spec)?;
    if projection.map.max == projection.map.min {
        return Err(Error::Contract(
            "latent codes project to a single point; nothing to assign".into(),
        ));
    }
    let z_box = projection.to_box(&emb.mu)?;
    let d = emb.latent_dim();
    let sizes: Vec<usize> = std::iter::once(d)
        .chain(cfg.hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect();
    let mut init_rng = stream_rng(cfg.seed, Stream::AssignInit);
    let mut network = DenseNetwork::new(&sizes, cfg.activation, Activation::Identity, &mut init_rng)?;
    let mut opt = OptimizerState::new(&network, OptimizerKind::adam(), cfg.learning_rate)?;
    let mut shuffle_rng = stream_rng(cfg.seed, Stream::AssignShuffle);
    let n = emb.n_samples();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut shuffle_rng);
        let (mut loss, mut mean_n, mut mean_e, mut clamp) = (0.0, 0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let x = DMatrix::from_fn(chunk.len(), d, |i, j| emb.mu[(chunk[i], j)]);
            let zb: Vec<f64> = chunk.iter().map(|&i| z_box[i]).collect();
            let (out, cache) = network.forward_cached(&x)?;
            let psi: Vec<f64> = out.column(0).iter().copied().collect();
            let el = energy_loss(&psi, &zb, cfg)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            let w = chunk.len() as f64 / n as f64;
            loss += w * el.loss;
            mean_n += el.quantum_numbers.iter().sum::<f64>() / n as f64;
            mean_e += el.energies.iter().sum::<f64>() / n as f64;
            clamp += w * el.clamp_rate;
            let upstream = DMatrix::from_column_slice(chunk.len(), 1, &el.grad);
            let (grads, _) = network.backward(&cache, &upstream)?;
            nn::step(&mut network, &grads, &mut opt)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
        }
        if !loss.is_finite() {
            return Err(Error::Training(format!("epoch {epoch}: energy loss diverged")));
        }
        trace.push(AssignEpoch {
            epoch,
            loss,
            mean_n,
            mean_energy: mean_e,
            clamp_rate: clamp,
        });
    }
    Ok((
        Assigner {
            config: cfg.clone(),
            network,
            projection,
        },
        trace,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassAggregate {
    pub label: usize,
    pub count: usize,
    pub mean_energy: f64,
    pub std_energy: f64,
    pub mean_n: f64,
    pub std_n: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAssignment {
    pub psi: Vec<f64>,
    pub z_box: Vec<f64>,
    pub n: Vec<f64>,
    pub energy: Vec<f64>,
    pub labels: Vec<usize>,
    /// One entry per label present, ordered by label.
    pub classes: Vec<ClassAggregate>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let count = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / count;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    (mean, var.sqrt())
}

/// Per-label mean and (population) standard deviation of energy and `n`.
pub fn class_aggregates(energy: &[f64], n: &[f64], labels: &[usize]) -> Vec<ClassAggregate> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k)
        .filter_map(|label| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
            if idx.is_empty() {
                return None;
            }
            let (mean_energy, std_energy) = mean_std(idx.iter().map(|&i| energy[i]));
            let (mean_n, std_n) = mean_std(idx.iter().map(|&i| n[i]));
            Some(ClassAggregate {
                label,
                count: idx.len(),
                mean_energy,
                std_energy,
                mean_n,
                std_n,
            })
        })
        .collect()
}

pub fn assign_energies(assigner: &Assigner, emb: &LatentEmbedding) -> Result<EnergyAssignment> {
    let spec = &assigner.config.spec;
    let z_box = assigner.projection.to_box(&emb.mu)?;
    let psi = assigner.psi(&emb.mu)?;
    let mut n = Vec::with_capacity(psi.len());
    let mut energy = Vec::with_capacity(psi.len());
    for (&p, &z) in psi.iter().zip(&z_box) {
        let q = quantum_number(p, z, spec, assigner.config.inversion)?;
        n.push(q);
        energy.push(sample_energy(q, spec));
    }
    let classes = class_aggregates(&energy, &n, &emb.labels);
    Ok(EnergyAssignment {
        psi,
        z_box,
        n,
        energy,
        labels: emb.labels.clone(),
        classes,
    })
}

/// Class-mean energies in ascending order.
pub fn sorted_class_means(assign: &EnergyAssignment) -> Vec<f64> {
    let mut means: Vec<f64> = assign.classes.iter().map(|c| c.mean_energy).collect();
    means.sort_by(f64::total_cmp);
    means
}

/// Differences between consecutive sorted class-mean energies.
pub fn spectrum_gap(assign: &EnergyAssignment) -> Vec<f64> {
    sorted_class_means(assign)
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect()
}

/// One-way ratio of between-class to within-class variance of `values`.
fn sums_of_squares(values: &[f64], labels: &[usize]) -> (f64, f64, usize) {
    let n = values.len() as f64;
    let grand = values.iter().sum::<f64>() / n;
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut between = 0.0;
    let mut within = 0.0;
    let mut groups = 0;
    for label in 0..k {
        let group: Vec<f64> = labels
            .iter()
            .zip(values)
            .filter(|(l, _)| **l == label)
            .map(|(_, v)| *v)
            .collect();
        if group.is_empty() {
            continue;
        }
        groups += 1;
        let m = group.iter().sum::<f64>() / group.len() as f64;
        between += group.len() as f64 * (m - grand).powi(2);
        within += group.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    (between, within, groups)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        return if num > 0.0 { f64::INFINITY } else { 0.0 };
    }
    num / den
}

/// One-way ANOVA variance ratio: between-class mean square over
/// within-class mean square, with k-1 and N-k degrees of freedom.
pub fn variance_ratio(values: &[f64], labels: &[usize]) -> f64 {
    let (between, within, k) = sums_of_squares(values, labels);
    let n = values.len();
    if k < 2 || n <= k {
        return 0.0;
    }
    ratio(between / (k - 1) as f64, within / (n - k) as f64)
}

/// Between-class over within-class sum of squares, without the
/// degrees-of-freedom scaling.
pub fn sum_of_squares_ratio(values: &[f64], labels: &[usize]) -> f64 {
    let (between, within, _) = sums_of_squares(values, labels);
    ratio(between, within)
}

pub fn write_trace_csv(trace: &[AssignEpoch], path: &Path) -> Result<()> {
    let rows = trace.iter().map(|t| {
        vec![
            t.epoch.to_string(),
            t.loss.to_string(),
            t.mean_n.to_string(),
            t.mean_energy.to_string(),
            t.clamp_rate.to_string(),
        ]
    });
    csvio::write_csv(
        path,
        &header(["epoch", "loss", "mean_n", "mean_E", "clamp_rate"]),
        rows,
    )
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<AssignEpoch>> {
    csvio::read_csv(path, &header(["epoch", "loss", "mean_n", "mean_E", "clamp_rate"]))?
        .iter()
        .map(|r| {
            Ok(AssignEpoch {
                epoch: field(r, 0, path)?,
                loss: field(r, 1, path)?,
                mean_n: field(r, 2, path)?,
                mean_energy: field(r, 3, path)?,
                clamp_rate: field(r, 4, path)?,
            })
        })
        .collect()
}

impl EnergyAssignment {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = (0..self.psi.len()).map(|i| {
            vec![
                i.to_string(),
                self.psi[i].to_string(),
                self.z_box[i].to_string(),
                self.n[i].to_string(),
                self.energy[i].to_string(),
                self.labels[i].to_string(),
            ]
        });
        csvio::write_csv(path, &header(["id", "psi", "z_box", "n", "E", "label"]), rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let records = csvio::read_csv(path, &header(["id", "psi", "z_box", "n", "E", "label"]))?;
        let mut out = EnergyAssignment {
            psi: Vec::with_capacity(records.len()),
            z_box: Vec::with_capacity(records.len()),
            n: Vec::with_capacity(records.len()),
            energy: Vec::with_capacity(records.len()),
            labels: Vec::with_capacity(records.len()),
            classes: Vec::new(),
        };
        for r in &records {
            out.psi.push(field(r, 1, path)?);
            out.z_box.push(field(r, 2, path)?);
            out.n.push(field(r, 3, path)?);
            out.energy.push(field(r, 4, path)?);
            out.labels.push(field(r, 5, path)?);
        }
        out.classes = class_aggregates(&out.energy, &out.n, &out.labels);
        Ok(out)
    }
}
