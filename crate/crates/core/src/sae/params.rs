use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::rng::{derive_seed, rng_from_seed};
use crate::linalg::{DenseMatrix, DEFAULT_SIGMA_TOL};

/// Seed stream used for decoder initialization.
pub(crate) const INIT_STREAM: u64 = 0;

/// Hyperparameters for [`train_sae`](super::train_sae).
///
/// Defaults follow the reference setup: Adam with β₁ = 0.9, β₂ = 0.999,
/// learning rate 5·10⁻⁵, k = 32 and an expansion factor of 8. Batch size,
/// ε and epoch count are conventional choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub expansion_factor: usize,
    pub k: usize,
    pub seed: u64,
    pub sigma_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 4096,
            epochs: 1,
            expansion_factor: 8,
            k: 32,
            seed: 0,
            sigma_tol: DEFAULT_SIGMA_TOL,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::invalid(format!(
                "Adam betas must lie in (0, 1), got beta1={} beta2={}",
                self.beta1, self.beta2
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return Err(Error::invalid("adam_epsilon must be positive"));
        }
        if self.batch_size == 0 || self.expansion_factor == 0 || self.k == 0 {
            return Err(Error::invalid(
                "batch_size, expansion_factor and k must be positive",
            ));
        }
        Ok(())
    }
}

/// Weights of a TopK sparse autoencoder.
///
/// Row-vector convention throughout: `f = (x − b_dec) · w_enc` with `w_enc`
/// stored `D × F`, and `x̂ = TopK(f) · w_dec + b_dec` with `w_dec` stored
/// `F × D`. There is no encoder bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeParams {
    k: usize,
    pub(crate) w_enc: DenseMatrix,
    pub(crate) w_dec: DenseMatrix,
    pub(crate) b_dec: Vec<f32>,
}

impl SaeParams {
    /// Assembles parameters, checking shapes, finiteness and `1 ≤ k ≤ F`.
    /// `F` must be a multiple of `D`.
    pub fn new(w_enc: DenseMatrix, w_dec: DenseMatrix, b_dec: Vec<f32>, k: usize) -> Result<Self> {
        let (d, f) = w_enc.shape();
        if d == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if w_dec.shape() != (f, d) {
            return Err(Error::shape(
                "SaeParams::new",
                format!("w_enc is {d}x{f} so w_dec must be {f}x{d}, got {:?}", w_dec.shape()),
            ));
        }
        if b_dec.len() != d {
            return Err(Error::shape(
                "SaeParams::new",
                format!("b_dec has {} entries, expected {d}", b_dec.len()),
            ));
        }
        if let Some(i) = b_dec.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "b_dec".into(),
                location: format!("index {i}"),
            });
        }
        if f % d != 0 {
            return Err(Error::invalid(format!(
                "feature count {f} is not a multiple of input dimension {d}"
            )));
        }
        if k == 0 || k > f {
            return Err(Error::invalid(format!("k must lie in 1..={f}, got {k}")));
        }
        Ok(Self {
            k,
            w_enc,
            w_dec,
            b_dec,
        })
    }

    /// Input dimension `D`.
    pub fn d_in(&self) -> usize {
        self.w_enc.rows()
    }

    /// Latent width `F`.
    pub fn n_features(&self) -> usize {
        self.w_enc.cols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Encoder weights, `D × F`.
    pub fn w_enc(&self) -> &DenseMatrix {
        &self.w_enc
    }

    /// Decoder weights, `F × D`.
    pub fn w_dec(&self) -> &DenseMatrix {
        &self.w_dec
    }

    pub fn b_dec(&self) -> &[f32] {
        &self.b_dec
    }

    pub fn expansion_factor(&self) -> usize {
        self.n_features() / self.d_in()
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        2 * self.d_in() * self.n_features() + self.d_in()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// SHA-256 (hex) over `D`, `F`, `k` and the little-endian weights.
    ///
    /// Recorded in feature files so every feature matrix names the exact
    /// autoencoder that produced it.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.d_in(), self.n_features(), self.k] {
            h.update((v as u64).to_le_bytes());
        }
        for v in self
            .w_enc
            .as_slice()
            .iter()
            .chain(self.w_dec.as_slice())
            .chain(&self.b_dec)
        {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Fresh autoencoder for `d_in`-dimensional inputs.
///
/// Decoder rows are seeded Gaussian vectors scaled to unit L2 norm, the
/// encoder is their exact transpose, and `b_dec` is the per-dimension mean of
/// `warmup`.
pub fn sae_init(d_in: usize, cfg: &TrainConfig, warmup: &DenseMatrix) -> Result<SaeParams> {
    if d_in == 0 {
        return Err(Error::invalid("input dimension must be positive"));
    }
    cfg.validate()?;
    if warmup.cols() != d_in || warmup.rows() == 0 {
        return Err(Error::shape(
            "sae_init",
            format!(
                "warmup batch must be Nx{d_in} with N >= 1, got {}x{}",
                warmup.rows(),
                warmup.cols()
            ),
        ));
    }
    let f = cfg
        .expansion_factor
        .checked_mul(d_in)
        .ok_or(Error::Overflow("feature count"))?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, INIT_STREAM));
    let mut dec = Vec::with_capacity(f * d_in);
    let mut row = vec![0.0f64; d_in];
    for _ in 0..f {
        loop {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-6 {
                dec.extend(row.iter().map(|v| (v / norm) as f32));
                break;
            }
        }
    }
    let w_dec = DenseMatrix::from_vec(f, d_in, dec)?;
    let w_enc = w_dec.transpose();
    let n = warmup.rows() as f64;
    let b_dec = warmup.column_sums().into_iter().map(|s| (s / n) as f32).collect();
    SaeParams::new(w_enc, w_dec, b_dec, cfg.k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(expansion: usize, k: usize) -> TrainConfig {
        TrainConfig {
            expansion_factor: expansion,
            k,
            seed: 11,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn encoder_is_decoder_transpose() {
        let warm = DenseMatrix::from_rows(&[[0.5f32, 1.0, -2.0]]).unwrap();
        let p = sae_init(3, &cfg(4, 2), &warm).unwrap();
        assert_eq!(p.n_features(), 12);
        for i in 0..3 {
            for j in 0..12 {
                assert_eq!(p.w_enc.get(i, j), p.w_dec.get(j, i));
            }
        }
        for j in 0..12 {
            let norm: f32 = p.w_dec.row(j).iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!((norm - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn bias_is_warmup_mean() {
        let r = [0.25f32, -3.0, 7.5, 1.0];
        let warm = DenseMatrix::from_rows(&[r, r, r]).unwrap();
        let p = sae_init(4, &cfg(2, 3), &warm).unwrap();
        assert_eq!(p.b_dec, r.to_vec());
    }

    #[test]
    fn init_errors() {
        let warm = DenseMatrix::zeros(1, 2);
        assert!(sae_init(0, &cfg(2, 1), &DenseMatrix::zeros(1, 0)).is_err());
        assert!(sae_init(3, &cfg(2, 1), &warm).is_err());
        assert!(sae_init(2, &cfg(2, 5), &warm).is_err());
        let bad = TrainConfig {
            beta1: 1.0,
            ..cfg(2, 1)
        };
        assert!(sae_init(2, &bad, &warm).is_err());
    }

    #[test]
    fn fingerprint_tracks_weights() {
        let warm = DenseMatrix::zeros(2, 2);
        let a = sae_init(2, &cfg(2, 1), &warm).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.b_dec[0] = 1.0;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
