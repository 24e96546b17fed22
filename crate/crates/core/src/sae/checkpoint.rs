//! `.sae` checkpoint files.
//!
//! ```text
//! "SAEC" | version u32 | header length u32 | header JSON
//!        | w_enc f32[D·F] | w_dec f32[F·D] | b_dec f32[D]
//! ```
//!
//! The header echoes `d_in`, `n_features`, `k`, `expansion`, the training
//! seed and configuration, and the writing tool. It carries no timestamps, so
//! identical parameters always produce identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SaeParams, TrainConfig};
use crate::envelope::{EnvelopeReader, EnvelopeWriter};
use crate::error::Result;
use crate::linalg::DenseMatrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SAEC";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub d_in: usize,
    pub n_features: usize,
    pub k: usize,
    pub expansion: usize,
    pub seed: Option<u64>,
    pub config: Option<TrainConfig>,
    pub created_by: String,
    pub fingerprint: String,
}

pub(crate) fn created_by() -> String {
    concat!("concept-bridge ", env!("CARGO_PKG_VERSION")).to_string()
}

/// Writes `params` (and optionally the config that trained them) to `path`.
pub fn save_checkpoint(path: impl AsRef<Path>, params: &SaeParams, config: Option<&TrainConfig>) -> Result<()> {
    let header = CheckpointHeader {
        d_in: params.d_in(),
        n_features: params.n_features(),
        k: params.k(),
        expansion: params.expansion_factor(),
        seed: config.map(|c| c.seed),
        config: config.cloned(),
        created_by: created_by(),
        fingerprint: params.fingerprint(),
    };
    let mut w = EnvelopeWriter::create(path.as_ref(), CHECKPOINT_MAGIC, &header)?;
    w.f32s(params.w_enc.as_slice())?;
    w.f32s(params.w_dec.as_slice())?;
    w.f32s(&params.b_dec)?;
    w.finish()
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(SaeParams, CheckpointHeader)> {
    let (mut r, header) = EnvelopeReader::open::<CheckpointHeader>(path.as_ref(), CHECKPOINT_MAGIC)?;
    let (d, f) = (header.d_in, header.n_features);
    let at = r.offset();
    let weights = d
        .checked_mul(f)
        .filter(|_| d > 0 && f > 0)
        .ok_or_else(|| r.malformed(at, format!("invalid dimensions d_in={d} n_features={f}")))?;
    r.expect_remaining(((2 * weights + d) as u64) * 4)?;
    let w_enc = DenseMatrix::from_vec(d, f, r.f32s(weights)?)?;
    let w_dec = DenseMatrix::from_vec(f, d, r.f32s(weights)?)?;
    let b_dec = r.f32s(d)?;
    let params = SaeParams::new(w_enc, w_dec, b_dec, header.k)
        .map_err(|e| r.malformed(at, e.to_string()))?;
    Ok((params, header))
}
