//! Dense variational autoencoder with a diagonal Gaussian posterior and
//! unit-variance Gaussian decoder, plus probes for degenerate posteriors.
//!
//! The encoder emits `[μ | log σ²]` (width `2·d_z`); the decoder maps a
//! reparametrised draw `z* = μ + σ ⊙ ε` back to feature space.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::csvio::{self, field, header};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::nn::{self, Activation, DenseNetwork, Gradients, OptimizerKind, OptimizerState};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub decoder_hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// KL weight β.
    pub beta: f64,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            input_dim: 20,
            encoder_hidden: vec![64, 64],
            latent_dim: 2,
            decoder_hidden: vec![64, 64],
            epochs: 40,
            batch_size: 64,
            learning_rate: 1e-3,
            beta: 1.0,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("vae.input_dim", "must be positive"));
        }
        if self.latent_dim == 0 {
            return Err(Error::config("vae.latent_dim", "must be at least 1"));
        }
        if self.encoder_hidden.contains(&0) {
            return Err(Error::config("vae.encoder_hidden", "layer sizes must be positive"));
        }
        if self.decoder_hidden.contains(&0) {
            return Err(Error::config("vae.decoder_hidden", "layer sizes must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("vae.epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("vae.batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("vae.learning_rate", "must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::config("vae.beta", "must be positive"));
        }
        Ok(())
    }

    /// `key = value` lines, one per field, in a fixed order.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| {
            let items: Vec<String> = v.iter().map(|s| s.to_string()).collect();
            format!("[{}]", items.join(", "))
        };
        let mut s = String::new();
        let _ = writeln!(s, "input_dim = {}", self.input_dim);
        let _ = writeln!(s, "encoder_hidden = {}", list(&self.encoder_hidden));
        let _ = writeln!(s, "latent_dim = {}", self.latent_dim);
        let _ = writeln!(s, "decoder_hidden = {}", list(&self.decoder_hidden));
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "learning_rate = {:?}", self.learning_rate);
        let _ = writeln!(s, "beta = {:?}", self.beta);
        let _ = writeln!(s, "activation = \"{}\"", self.activation.tag());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vae {
    pub config: VaeConfig,
    pub encoder: DenseNetwork,
    pub decoder: DenseNetwork,
}

/// Epoch-averaged loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeEpoch {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboTerms {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentEmbedding {
    /// Posterior means, `N × d_z`.
    pub mu: DMatrix<f64>,
    /// Posterior log-variances, `N × d_z`.
    pub logvar: DMatrix<f64>,
    /// One reparametrised draw per row.
    pub samples: DMatrix<f64>,
    /// The standard-normal draw that produced `samples`.
    pub noise: DMatrix<f64>,
    /// Carried through for evaluation only.
    pub labels: Vec<usize>,
}

impl LatentEmbedding {
    pub fn n_samples(&self) -> usize {
        self.mu.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.mu.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    fn csv_header(d: usize) -> Vec<String> {
        header(
            std::iter::once("id".to_string())
                .chain((0..d).map(|j| format!("mu{j}")))
                .chain((0..d).map(|j| format!("logvar{j}")))
                .chain((0..d).map(|j| format!("z{j}")))
                .chain(std::iter::once("label".to_string())),
        )
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let d = self.latent_dim();
        let rows = (0..self.n_samples()).map(|i| {
            let mut row = Vec::with_capacity(3 * d + 2);
            row.push(i.to_string());
            for m in [&self.mu, &self.logvar, &self.samples] {
                row.extend((0..d).map(|j| m[(i, j)].to_string()));
            }
            row.push(self.labels[i].to_string());
            row
        });
        csvio::write_csv(path, &Self::csv_header(d), rows)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingUpstream(path.to_path_buf()));
        }
        let width = csv::Reader::from_path(path)?.headers()?.len();
        if width < 5 || (width - 2) % 3 != 0 {
            return Err(Error::parse(path.display().to_string(), "bad embedding header width"));
        }
        let d = (width - 2) / 3;
        let records = csvio::read_csv(path, &Self::csv_header(d))?;
        let n = records.len();
        let mut mu = DMatrix::<f64>::zeros(n, d);
        let mut logvar = DMatrix::<f64>::zeros(n, d);
        let mut samples = DMatrix::<f64>::zeros(n, d);
        let mut labels = Vec::with_capacity(n);
        for (i, rec) in records.iter().enumerate() {
            for j in 0..d {
                mu[(i, j)] = field(rec, 1 + j, path)?;
                logvar[(i, j)] = field(rec, 1 + d + j, path)?;
                samples[(i, j)] = field(rec, 1 + 2 * d + j, path)?;
            }
            labels.push(field(rec, 1 + 3 * d, path)?);
        }
        let noise = DMatrix::from_fn(n, d, |i, j| {
            (samples[(i, j)] - mu[(i, j)]) / (0.5 * logvar[(i, j)]).exp()
        });
        Ok(LatentEmbedding {
            mu,
            logvar,
            samples,
            noise,
            labels,
        })
    }
}

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Contract(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `z* = μ + exp(logvar / 2) ⊙ ε`.
pub fn reparametrize(
    mu: &DMatrix<f64>,
    logvar: &DMatrix<f64>,
    noise: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    same_shape(mu, logvar, "reparametrize mu/logvar")?;
    same_shape(mu, noise, "reparametrize mu/noise")?;
    Ok(DMatrix::from_fn(mu.nrows(), mu.ncols(), |i, j| {
        mu[(i, j)] + (0.5 * logvar[(i, j)]).exp() * noise[(i, j)]
    }))
}

/// Negative ELBO per sample: squared error summed over features plus
/// `β · KL(q(z|x) ‖ N(0, I))`, both averaged over the batch.
pub fn elbo_loss(
    x: &DMatrix<f64>,
    recon: &DMatrix<f64>,
    mu: &DMatrix<f64>,
    logvar: &DMatrix<f64>,
    beta: f64,
) -> Result<ElboTerms> {
    same_shape(x, recon, "elbo_loss x/recon")?;
    same_shape(mu, logvar, "elbo_loss mu/logvar")?;
    if x.nrows() != mu.nrows() || x.nrows() == 0 {
        return Err(Error::Contract("elbo_loss batch sizes differ or are empty".into()));
    }
    let b = x.nrows() as f64;
    let recon_term = (recon - x).norm_squared() / b;
    let kl_sum: f64 = mu
        .iter()
        .zip(logvar.iter())
        .map(|(&m, &lv)| 0.5 * (lv.exp() + m * m - 1.0 - lv))
        .sum();
    let kl_term = kl_sum / b;
    let total = recon_term + beta * kl_term;
    if !(total.is_finite() && recon_term.is_finite() && kl_term.is_finite()) {
        return Err(Error::Training("non-finite ELBO terms".into()));
    }
    Ok(ElboTerms {
        total,
        recon: recon_term,
        kl: kl_term,
    })
}

impl Vae {
    pub fn new(config: VaeConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(config.seed, Stream::VaeInit);
        let d = config.input_dim;
        let dz = config.latent_dim;
        let enc_sizes: Vec<usize> = std::iter::once(d)
            .chain(config.encoder_hidden.iter().copied())
            .chain(std::iter::once(2 * dz))
            .collect();
        let dec_sizes: Vec<usize> = std::iter::once(dz)
            .chain(config.decoder_hidden.iter().copied())
            .chain(std::iter::once(d))
            .collect();
        let encoder = DenseNetwork::new(&enc_sizes, config.activation, Activation::Identity, &mut rng)?;
        let decoder = DenseNetwork::new(&dec_sizes, config.activation, Activation::Identity, &mut rng)?;
        Ok(Vae {
            config,
            encoder,
            decoder,
        })
    }

    /// Posterior `(μ, log σ²)` for each row of `x`.
    pub fn encode(&self, x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let out = self.encoder.forward(x)?;
        let dz = self.config.latent_dim;
        Ok((
            out.columns(0, dz).into_owned(),
            out.columns(dz, dz).into_owned(),
        ))
    }

    pub fn decode(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.decoder.forward(z)
    }

    /// Loss terms and gradients of `total` for both networks on one batch
    /// with a fixed noise draw.
    pub fn batch_gradients(
        &self,
        x: &DMatrix<f64>,
        noise: &DMatrix<f64>,
    ) -> Result<(ElboTerms, Gradients, Gradients)> {
        let dz = self.config.latent_dim;
        let beta = self.config.beta;
        let b = x.nrows() as f64;
        let (enc_out, enc_cache) = self.encoder.forward_cached(x)?;
        let mu = enc_out.columns(0, dz).into_owned();
        let logvar = enc_out.columns(dz, dz).into_owned();
        let z = reparametrize(&mu, &logvar, noise)?;
        let (recon, dec_cache) = self.decoder.forward_cached(&z)?;
        let terms = elbo_loss(x, &recon, &mu, &logvar, beta)?;

        let d_recon = (&recon - x) * (2.0 / b);
        let (dec_grads, dz_grad) = self.decoder.backward(&dec_cache, &d_recon)?;

        let mut upstream = DMatrix::zeros(x.nrows(), 2 * dz);
        for i in 0..x.nrows() {
            for j in 0..dz {
                let (m, lv, e) = (mu[(i, j)], logvar[(i, j)], noise[(i, j)]);
                let sigma = (0.5 * lv).exp();
                upstream[(i, j)] = dz_grad[(i, j)] + beta * m / b;
                upstream[(i, dz + j)] =
                    dz_grad[(i, j)] * e * 0.5 * sigma + beta * 0.5 * (lv.exp() - 1.0) / b;
            }
        }
        let (enc_grads, _) = self.encoder.backward(&enc_cache, &upstream)?;
        Ok((terms, enc_grads, dec_grads))
    }

    /// Loss for a fixed noise draw, without gradients.
    pub fn batch_loss(&self, x: &DMatrix<f64>, noise: &DMatrix<f64>) -> Result<ElboTerms> {
        let (mu, logvar) = self.encode(x)?;
        let z = reparametrize(&mu, &logvar, noise)?;
        let recon = self.decode(&z)?;
        elbo_loss(x, &recon, &mu, &logvar, self.config.beta)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("[vae_config]\n");
        s.push_str(&self.config.to_text());
        s.push_str("[encoder]\n");
        s.push_str(&nn::write_network(&self.encoder));
        s.push_str("[decoder]\n");
        s.push_str(&nn::write_network(&self.decoder));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let sections = split_sections(text, &["vae_config", "encoder", "decoder"])?;
        let config = parse_vae_config(sections[0])?;
        config.validate()?;
        let encoder = nn::read_network(sections[1])?;
        let decoder = nn::read_network(sections[2])?;
        if encoder.input_size() != config.input_dim
            || encoder.output_size() != 2 * config.latent_dim
            || decoder.input_size() != config.latent_dim
            || decoder.output_size() != config.input_dim
        {
            return Err(Error::parse("vae model", "network shapes disagree with config"));
        }
        Ok(Vae {
            config,
            encoder,
            decoder,
        })
    }
}

/// Splits `[name]`-headed blocks, which must appear in the given order.
pub(crate) fn split_sections<'a>(text: &'a str, names: &[&str]) -> Result<Vec<&'a str>> {
    let mut starts = Vec::with_capacity(names.len());
    let mut search_from = 0;
    for name in names {
        let tag = format!("[{name}]\n");
        let pos = text[search_from..]
            .find(&tag)
            .map(|p| p + search_from)
            .ok_or_else(|| Error::parse("model file", format!("missing section [{name}]")))?;
        starts.push((pos, pos + tag.len()));
        search_from = pos + tag.len();
    }
    Ok((0..names.len())
        .map(|i| {
            let end = starts.get(i + 1).map_or(text.len(), |s| s.0);
            &text[starts[i].1..end]
        })
        .collect())
}

fn parse_vae_config(block: &str) -> Result<VaeConfig> {
    #[derive(serde::Deserialize)]
    struct Raw {
        input_dim: usize,
        encoder_hidden: Vec<usize>,
        latent_dim: usize,
        decoder_hidden: Vec<usize>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        beta: f64,
        activation: String,
        seed: u64,
    }
    let raw: Raw = toml::from_str(block).map_err(|e| Error::parse("vae_config", e.to_string()))?;
    let activation = Activation::from_tag(&raw.activation)
        .ok_or_else(|| Error::parse("vae_config", format!("unknown activation {}", raw.activation)))?;
    Ok(VaeConfig {
        input_dim: raw.input_dim,
        encoder_hidden: raw.encoder_hidden,
        latent_dim: raw.latent_dim,
        decoder_hidden: raw.decoder_hidden,
        epochs: raw.epochs,
        batch_size: raw.batch_size,
        learning_rate: raw.learning_rate,
        beta: raw.beta,
        activation,
        seed: raw.seed,
    })
}

fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // row-major draw order so the stream does not depend on storage layout
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

fn gather_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Trains a VAE on the (standardized) features of `ds`.
pub fn train_vae(ds: &Dataset, cfg: &VaeConfig) -> Result<(Vae, Vec<VaeEpoch>)> {
    if ds.n_features() != cfg.input_dim {
        return Err(Error::config(
            "vae.input_dim",
            format!("is {} but the dataset has {} features", cfg.input_dim, ds.n_features()),
        ));
    }
    let mut vae = Vae::new(cfg.clone())?;
    let mut enc_opt = OptimizerState::new(&vae.encoder, OptimizerKind::adam(), cfg.learning_rate)?;
    let mut dec_opt = OptimizerState::new(&vae.decoder, OptimizerKind::adam(), cfg.learning_rate)?;
    let mut shuffle_rng = stream_rng(cfg.seed, Stream::VaeShuffle);
    let mut noise_rng = stream_rng(cfg.seed, Stream::VaeNoise);
    let n = ds.n_samples();
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut shuffle_rng);
        let (mut total, mut recon, mut kl) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let x = gather_rows(&ds.features, chunk);
            let noise = standard_normal_matrix(chunk.len(), cfg.latent_dim, &mut noise_rng);
            let (terms, eg, dg) = vae
                .batch_gradients(&x, &noise)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            let w = chunk.len() as f64 / n as f64;
            total += w * terms.total;
            recon += w * terms.recon;
            kl += w * terms.kl;
            nn::step(&mut vae.encoder, &eg, &mut enc_opt)
                .and_then(|_| nn::step(&mut vae.decoder, &dg, &mut dec_opt))
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
        }
        if !total.is_finite() {
            return Err(Error::Training(format!("epoch {epoch}: loss diverged")));
        }
        trace.push(VaeEpoch {
            epoch,
            total,
            recon,
            kl,
        });
    }
    Ok((vae, trace))
}

pub fn write_trace_csv(trace: &[VaeEpoch], path: &Path) -> Result<()> {
    let rows = trace.iter().map(|t| {
        vec![
            t.epoch.to_string(),
            t.total.to_string(),
            t.recon.to_string(),
            t.kl.to_string(),
        ]
    });
    csvio::write_csv(path, &header(["epoch", "total", "recon", "kl"]), rows)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<VaeEpoch>> {
    csvio::read_csv(path, &header(["epoch", "total", "recon", "kl"]))?
        .iter()
        .map(|r| {
            Ok(VaeEpoch {
                epoch: field(r, 0, path)?,
                total: field(r, 1, path)?,
                recon: field(r, 2, path)?,
                kl: field(r, 3, path)?,
            })
        })
        .collect()
}

/// Encodes every row with one reparametrised draw from `seed`.
pub fn encode_dataset(model: &Vae, ds: &Dataset, seed: u64) -> Result<LatentEmbedding> {
    let (mu, logvar) = model.encode(&ds.features)?;
    if !logvar.iter().all(|v| v.is_finite() && v.exp() > 0.0) {
        return Err(Error::Training("encoder produced a degenerate log-variance".into()));
    }
    let mut rng = stream_rng(seed, Stream::EncodeNoise);
    let noise = standard_normal_matrix(mu.nrows(), mu.ncols(), &mut rng);
    let samples = reparametrize(&mu, &logvar, &noise)?;
    Ok(LatentEmbedding {
        mu,
        logvar,
        samples,
        noise,
        labels: ds.labels.clone(),
    })
}

/// Numerical rank of the empirical covariance of the posterior means and its
/// eigenvalues in descending order.
pub fn covariance_rank(emb: &LatentEmbedding, tol: f64) -> Result<(usize, Vec<f64>)> {
    rank_of_rows(&emb.mu, tol)
}

pub fn rank_of_rows(rows: &DMatrix<f64>, tol: f64) -> Result<(usize, Vec<f64>)> {
    let cov = linalg::covariance(rows)?;
    let (values, _) = linalg::sorted_eigen(&cov);
    Ok((linalg::numerical_rank(&values, tol), values))
}

/// Latent dimensions that look like the prior for every sample: means barely
/// move across the data and the posterior variance stays near 1.
pub fn collapsed_dims(emb: &LatentEmbedding, mu_tol: f64, var_tol: f64) -> Vec<usize> {
    let n = emb.n_samples() as f64;
    (0..emb.latent_dim())
        .filter(|&j| {
            let col = emb.mu.column(j);
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            let var_mean = emb.logvar.column(j).iter().map(|v| v.exp()).sum::<f64>() / n;
            sd < mu_tol && (var_mean - 1.0).abs() < var_tol
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, standardize, DatasetSpec};
    use proptest::prelude::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn reparametrize_examples() {
        let eps = m(1, 2, &[0.3, -1.2]);
        let z = reparametrize(&DMatrix::zeros(1, 2), &DMatrix::zeros(1, 2), &eps).unwrap();
        assert_eq!(z, eps);
        let mu = m(1, 2, &[0.5, 2.0]);
        let z = reparametrize(&mu, &m(1, 2, &[1.0, -3.0]), &DMatrix::zeros(1, 2)).unwrap();
        assert_eq!(z, mu);
        let z = reparametrize(&m(1, 1, &[1.0]), &m(1, 1, &[4.0_f64.ln()]), &m(1, 1, &[0.5])).unwrap();
        assert!((z[(0, 0)] - 2.0).abs() < 1e-15);
        assert!(reparametrize(&mu, &DMatrix::zeros(2, 2), &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn elbo_examples() {
        let x = m(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.0, 0.5]);
        let zero = DMatrix::zeros(2, 1);
        let t = elbo_loss(&x, &x, &zero, &zero, 1.0).unwrap();
        assert_eq!(t.recon, 0.0);
        assert_eq!(t.kl, 0.0);
        let t = elbo_loss(&m(1, 1, &[0.0]), &m(1, 1, &[0.0]), &m(1, 1, &[1.0]), &m(1, 1, &[0.0]), 1.0)
            .unwrap();
        assert!((t.kl - 0.5).abs() < 1e-15);
        // recon: squared error summed over features, averaged over rows
        let r = m(2, 3, &[0.0, 2.0, 3.0, -1.0, 0.0, 2.5]);
        let t = elbo_loss(&x, &r, &zero, &zero, 2.0).unwrap();
        assert!((t.recon - (1.0 + 4.0) / 2.0).abs() < 1e-15);
        assert!(elbo_loss(&x, &r, &m(2, 1, &[f64::NAN, 0.0]), &zero, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(mu in proptest::collection::vec(-5.0f64..5.0, 6),
                             lv in proptest::collection::vec(-6.0f64..6.0, 6)) {
            let x = DMatrix::zeros(3, 1);
            let t = elbo_loss(&x, &x, &m(3, 2, &mu), &m(3, 2, &lv), 1.0).unwrap();
            prop_assert!(t.kl >= 0.0);
        }

        #[test]
        fn reparametrize_is_affine_in_noise(mu in -3.0f64..3.0, lv in -4.0f64..4.0,
                                            e in -3.0f64..3.0, a in -5.0f64..5.0) {
            let (mu_m, lv_m) = (m(1, 1, &[mu]), m(1, 1, &[lv]));
            let base = reparametrize(&mu_m, &lv_m, &m(1, 1, &[e])).unwrap()[(0, 0)] - mu;
            let scaled = reparametrize(&mu_m, &lv_m, &m(1, 1, &[a * e])).unwrap()[(0, 0)] - mu;
            prop_assert!((scaled - a * base).abs() < 1e-9 * (1.0 + scaled.abs()));
        }
    }

    #[test]
    fn vae_gradients_match_finite_differences() {
        let cfg = VaeConfig {
            input_dim: 4,
            encoder_hidden: vec![5],
            latent_dim: 2,
            decoder_hidden: vec![3],
            beta: 0.7,
            seed: 21,
            ..Default::default()
        };
        let vae = Vae::new(cfg).unwrap();
        let x = DMatrix::from_fn(3, 4, |i, j| ((i * 4 + j) as f64 * 0.61).cos());
        let noise = DMatrix::from_fn(3, 2, |i, j| ((i + 2 * j) as f64 * 0.9).sin());
        let (_, eg, dg) = vae.batch_gradients(&x, &noise).unwrap();
        let enc_fd = nn::numeric_gradients(&vae.encoder, 1e-5, |enc| {
            let probe = Vae { encoder: enc.clone(), ..vae.clone() };
            probe.batch_loss(&x, &noise).unwrap().total
        });
        let dec_fd = nn::numeric_gradients(&vae.decoder, 1e-5, |dec| {
            let probe = Vae { decoder: dec.clone(), ..vae.clone() };
            probe.batch_loss(&x, &noise).unwrap().total
        });
        assert!(nn::max_relative_error(&eg, &enc_fd, 1e-7) < 1e-4);
        assert!(nn::max_relative_error(&dg, &dec_fd, 1e-7) < 1e-4);
    }

    fn small_dataset() -> Dataset {
        standardize(
            &generate(&DatasetSpec {
                n_samples: 300,
                n_features: 8,
                n_informative: 3,
                n_redundant: 1,
                ..Default::default()
            })
            .unwrap(),
        )
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let ds = small_dataset();
        let cfg = VaeConfig {
            input_dim: 8,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            epochs: 8,
            batch_size: 32,
            learning_rate: 3e-3,
            ..Default::default()
        };
        let (model, trace) = train_vae(&ds, &cfg).unwrap();
        assert_eq!(trace.len(), 8);
        assert!(trace.last().unwrap().total <= trace[0].total);
        assert!(trace.iter().all(|t| t.kl >= 0.0));
        let (again, _) = train_vae(&ds, &cfg).unwrap();
        assert_eq!(model, again);

        let emb = encode_dataset(&model, &ds, 5).unwrap();
        let rebuilt = reparametrize(&emb.mu, &emb.logvar, &emb.noise).unwrap();
        assert_eq!(rebuilt, emb.samples);
        assert_eq!(emb, encode_dataset(&model, &ds, 5).unwrap());
    }

    #[test]
    fn mismatched_input_dim_is_config_error() {
        let ds = small_dataset();
        assert!(matches!(
            train_vae(&ds, &VaeConfig::default()),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn model_and_embedding_round_trip() {
        let ds = small_dataset();
        let cfg = VaeConfig {
            input_dim: 8,
            encoder_hidden: vec![6],
            decoder_hidden: vec![6, 4],
            epochs: 1,
            ..Default::default()
        };
        let (model, trace) = train_vae(&ds, &cfg).unwrap();
        let back = Vae::from_text(&model.to_text()).unwrap();
        assert_eq!(back, model);

        let dir = tempfile::tempdir().unwrap();
        let emb = encode_dataset(&model, &ds, 1).unwrap();
        let path = dir.path().join("embedding.csv");
        emb.write_csv(&path).unwrap();
        let head = std::fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("id,mu0,mu1,logvar0,logvar1,z0,z1,label\n"));
        let read = LatentEmbedding::read_csv(&path).unwrap();
        assert_eq!(read.mu, emb.mu);
        assert_eq!(read.samples, emb.samples);
        assert_eq!(read.labels, emb.labels);
        assert!((&read.noise - &emb.noise).amax() < 1e-9);

        let tpath = dir.path().join("trace.csv");
        write_trace_csv(&trace, &tpath).unwrap();
        assert_eq!(read_trace_csv(&tpath).unwrap(), trace);
    }

    fn embedding_from_mu(mu: DMatrix<f64>) -> LatentEmbedding {
        let n = mu.nrows();
        let d = mu.ncols();
        LatentEmbedding {
            logvar: DMatrix::zeros(n, d),
            samples: mu.clone(),
            noise: DMatrix::zeros(n, d),
            labels: vec![0; n],
            mu,
        }
    }

    #[test]
    fn covariance_rank_cases() {
        let same = embedding_from_mu(DMatrix::from_element(20, 3, 1.5));
        assert_eq!(covariance_rank(&same, 1e-8).unwrap().0, 0);

        let line = embedding_from_mu(DMatrix::from_fn(100, 3, |i, j| {
            (i as f64 * 0.37).sin() * [1.0, 2.0, -0.5][j]
        }));
        assert_eq!(covariance_rank(&line, 1e-8).unwrap().0, 1);

        let mut rng = stream_rng(4, Stream::Dataset);
        let iso = embedding_from_mu(standard_normal_matrix(5000, 4, &mut rng));
        let (rank, values) = covariance_rank(&iso, 1e-8).unwrap();
        assert_eq!(rank, 4);
        assert!(values.windows(2).all(|w| w[0] >= w[1]));
        assert!(values.iter().all(|v| (v - 1.0).abs() < 0.1));

        let tiny = embedding_from_mu(DMatrix::zeros(1, 2));
        assert!(matches!(covariance_rank(&tiny, 1e-8), Err(Error::Contract(_))));
    }

    #[test]
    fn rank_is_rotation_invariant() {
        let mut rng = stream_rng(8, Stream::Dataset);
        let mut base = standard_normal_matrix(200, 3, &mut rng);
        base.column_mut(2).fill(0.0);
        let (c, s) = (0.6_f64, 0.8_f64);
        let rot = m(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
            * m(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]);
        let rotated = &base * rot.transpose();
        let (r0, v0) = rank_of_rows(&base, 1e-8).unwrap();
        let (r1, v1) = rank_of_rows(&rotated, 1e-8).unwrap();
        assert_eq!((r0, r1), (2, 2));
        for (a, b) in v0.iter().zip(&v1) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn collapsed_dimension_probe() {
        let n = 50;
        let mut emb = embedding_from_mu(DMatrix::from_fn(n, 3, |i, j| match j {
            0 => i as f64 * 0.1,
            1 => 1e-4 * (i as f64).sin(),
            _ => 1e-4,
        }));
        emb.logvar = DMatrix::from_fn(n, 3, |_, j| if j == 2 { -3.0 } else { 0.01 });
        // dim 1 is prior-like; dim 2 has constant mean but tight posterior
        assert_eq!(collapsed_dims(&emb, 1e-2, 0.05), vec![1]);
    }
}
