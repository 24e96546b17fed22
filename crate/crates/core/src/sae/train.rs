use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{adam_step, dead_latent_count, mse_loss, sae_backward, sae_forward, sae_init};
use super::{AdamState, SaeParams, TrainConfig};
use crate::error::{Error, Result};
use crate::features::ActivationMatrix;
use crate::linalg::rng::derive_seed;
use crate::linalg::{seeded_permutation, DenseMatrix};

/// Seed streams `EPOCH_STREAM + e` shuffle epoch `e`.
const EPOCH_STREAM: u64 = 1_000;

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-row MSE over each epoch, measured before each batch's update.
    pub epoch_mse: Vec<f64>,
    /// MSE of every optimizer step, in order.
    pub batch_mse: Vec<f64>,
    /// Features never selected by the trained SAE over the training rows.
    pub dead_latents: usize,
    /// Wall-clock seconds per epoch. Not serialized, so saved reports stay
    /// reproducible byte for byte.
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
    pub seed: u64,
    pub config: TrainConfig,
}

/// Trains a TopK SAE on every row of `acts` (all tokens or patches).
pub fn train_sae(acts: &ActivationMatrix, cfg: &TrainConfig) -> Result<(SaeParams, TrainReport)> {
    train_on_matrix(&acts.data, cfg)
}

/// [`train_sae`] on a bare matrix.
///
/// Runs `epochs × ⌈N / batch_size⌉` Adam steps. Each epoch visits the rows in
/// a fresh seeded permutation. `b_dec` is initialized from the first
/// `min(N, batch_size)` rows in storage order. Non-finite activations cannot
/// reach this point: [`DenseMatrix`] rejects them on construction, naming the
/// row.
pub fn train_on_matrix(x: &DenseMatrix, cfg: &TrainConfig) -> Result<(SaeParams, TrainReport)> {
    cfg.validate()?;
    let (n, d) = x.shape();
    if n == 0 {
        return Err(Error::Empty {
            what: "activation matrix",
        });
    }
    let warm: Vec<usize> = (0..n.min(cfg.batch_size)).collect();
    let mut params = sae_init(d, cfg, &x.select_rows(&warm))?;
    let mut state = AdamState::new(&params);
    let mut report = TrainReport {
        epoch_mse: Vec::with_capacity(cfg.epochs),
        batch_mse: Vec::new(),
        dead_latents: 0,
        epoch_seconds: Vec::with_capacity(cfg.epochs),
        seed: cfg.seed,
        config: cfg.clone(),
    };
    if cfg.epochs == 0 {
        report.dead_latents = dead_latent_count(&params, x)?;
        return Ok((params, report));
    }

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let order = seeded_permutation(n, derive_seed(cfg.seed, EPOCH_STREAM + epoch as u64))?;
        let mut weighted = 0.0;
        for rows in order.chunks(cfg.batch_size) {
            let batch = x.select_rows(rows);
            let fwd = sae_forward(&params, &batch)?;
            let loss = mse_loss(&batch, &fwd.x_hat)?;
            let grads = sae_backward(&params, &batch, &fwd)?;
            adam_step(&mut state, &mut params, &grads, cfg)?;
            weighted += loss * rows.len() as f64;
            report.batch_mse.push(loss);
        }
        let mse = weighted / n as f64;
        report.epoch_mse.push(mse);
        report.epoch_seconds.push(started.elapsed().as_secs_f64());
        log::info!("epoch {epoch}: mse {mse:.6}");
    }
    report.dead_latents = dead_latent_count(&params, x)?;
    Ok((params, report))
}
