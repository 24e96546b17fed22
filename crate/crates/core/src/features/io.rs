//! `.acts` and `.feat` files.
//!
//! Activation file:
//!
//! ```text
//! "SAEA" | version u32 | header length u32 | header JSON
//!        | n_rows u64 | n_cols u32 | f32[n_rows · n_cols]
//! ```
//!
//! The header JSON carries `model_id`, `layer`, `dataset_id`, `token_mode`,
//! `global_token_kind` and echoes `n_rows`/`n_cols`. Feature files use magic
//! `"SAEF"`, add `spans` (layer, column range, k, SAE checkpoint hash) and
//! `s_mode` to the header, and append the `S` vector as `f64[n_cols]` after
//! the matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_spans, ActivationMatrix, FeatureMatrix, LayerSpan, SMode, TokenMode};
use crate::envelope::{EnvelopeReader, EnvelopeWriter};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const ACTIVATION_MAGIC: &[u8; 4] = b"SAEA";
pub const FEATURE_MAGIC: &[u8; 4] = b"SAEF";

#[derive(Serialize, Deserialize)]
struct ActivationHeader {
    model_id: String,
    layer: u32,
    dataset_id: String,
    token_mode: TokenMode,
    global_token_kind: Option<String>,
    n_rows: u64,
    n_cols: u32,
}

#[derive(Serialize, Deserialize)]
struct FeatureHeader {
    model_id: String,
    dataset_id: String,
    spans: Vec<LayerSpan>,
    s_mode: SMode,
    n_rows: u64,
    n_cols: u32,
}

fn dims(m: &DenseMatrix) -> Result<(u64, u32)> {
    let cols = u32::try_from(m.cols()).map_err(|_| Error::Overflow("column count"))?;
    Ok((m.rows() as u64, cols))
}

fn write_matrix(w: &mut EnvelopeWriter, m: &DenseMatrix) -> Result<()> {
    let (rows, cols) = dims(m)?;
    w.u64(rows)?;
    w.u32(cols)?;
    w.f32s(m.as_slice())
}

/// Reads the `n_rows | n_cols | payload` block, checking it against the
/// header echo and against the file length (`trailing` bytes follow it).
fn read_matrix(r: &mut EnvelopeReader, n_rows: u64, n_cols: u32, bytes_per_col_after: u64) -> Result<DenseMatrix> {
    let at = r.offset();
    let rows = r.u64()?;
    let cols = r.u32()?;
    if rows != n_rows || cols != n_cols {
        return Err(r.malformed(
            at,
            format!("matrix is {rows}x{cols} but the header says {n_rows}x{n_cols}"),
        ));
    }
    let count = rows
        .checked_mul(u64::from(cols))
        .ok_or(Error::Overflow("payload size"))?;
    let trailing = u64::from(cols) * bytes_per_col_after;
    r.expect_remaining(count * 4 + trailing)?;
    let data = r.f32s(count as usize)?;
    let at = r.offset();
    DenseMatrix::from_vec(rows as usize, cols as usize, data).map_err(|e| r.malformed(at, e.to_string()))
}

pub fn write_activations(path: impl AsRef<Path>, acts: &ActivationMatrix) -> Result<()> {
    let (n_rows, n_cols) = dims(&acts.data)?;
    let header = ActivationHeader {
        model_id: acts.model_id.clone(),
        layer: acts.layer,
        dataset_id: acts.dataset_id.clone(),
        token_mode: acts.token_mode,
        global_token_kind: acts.global_token_kind.clone(),
        n_rows,
        n_cols,
    };
    let mut w = EnvelopeWriter::create(path.as_ref(), ACTIVATION_MAGIC, &header)?;
    write_matrix(&mut w, &acts.data)?;
    w.finish()
}

pub fn read_activations(path: impl AsRef<Path>) -> Result<ActivationMatrix> {
    let (mut r, h) = EnvelopeReader::open::<ActivationHeader>(path.as_ref(), ACTIVATION_MAGIC)?;
    let data = read_matrix(&mut r, h.n_rows, h.n_cols, 0)?;
    let mut acts = ActivationMatrix::new(data, h.model_id, h.layer, h.dataset_id, h.token_mode)
        .map_err(|e| r.malformed(0, format!("{e} in {}", r.path().display())))?;
    acts.global_token_kind = h.global_token_kind;
    Ok(acts)
}

pub fn write_features(path: impl AsRef<Path>, fm: &FeatureMatrix) -> Result<()> {
    let (n_rows, n_cols) = dims(&fm.data)?;
    let header = FeatureHeader {
        model_id: fm.model_id.clone(),
        dataset_id: fm.dataset_id.clone(),
        spans: fm.spans.clone(),
        s_mode: fm.s_mode,
        n_rows,
        n_cols,
    };
    let mut w = EnvelopeWriter::create(path.as_ref(), FEATURE_MAGIC, &header)?;
    write_matrix(&mut w, &fm.data)?;
    w.f64s(&fm.s_vector)?;
    w.finish()
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let (mut r, h) = EnvelopeReader::open::<FeatureHeader>(path.as_ref(), FEATURE_MAGIC)?;
    let data = read_matrix(&mut r, h.n_rows, h.n_cols, 8)?;
    validate_spans(&h.spans, data.cols()).map_err(|e| r.malformed(12, e.to_string()))?;
    let s_vector = r.f64s(data.cols())?;
    Ok(FeatureMatrix {
        data,
        model_id: h.model_id,
        dataset_id: h.dataset_id,
        spans: h.spans,
        s_mode: h.s_mode,
        s_vector,
    })
}

/// Validates any `.acts`, `.feat` or `.sae` file end to end and returns its
/// kind and header as JSON.
pub fn describe_file(path: impl AsRef<Path>) -> Result<serde_json::Value> {
    use crate::envelope::sniff_magic;
    let path = path.as_ref();
    let magic = sniff_magic(path)?;
    let (kind, header): (&str, serde_json::Value) = match &magic {
        m if m == ACTIVATION_MAGIC => {
            let (_, h) = EnvelopeReader::open::<serde_json::Value>(path, ACTIVATION_MAGIC)?;
            read_activations(path)?;
            ("activations", h)
        }
        m if m == FEATURE_MAGIC => {
            let (_, h) = EnvelopeReader::open::<serde_json::Value>(path, FEATURE_MAGIC)?;
            read_features(path)?;
            ("features", h)
        }
        m if m == crate::sae::CHECKPOINT_MAGIC => {
            let (_, h) = EnvelopeReader::open::<serde_json::Value>(path, crate::sae::CHECKPOINT_MAGIC)?;
            crate::sae::load_checkpoint(path)?;
            ("sae_checkpoint", h)
        }
        other => {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                expected: "SAEA, SAEF or SAEC".into(),
                found: String::from_utf8_lossy(other).into_owned(),
            })
        }
    };
    Ok(serde_json::json!({ "kind": kind, "magic": String::from_utf8_lossy(&magic), "header": header }))
}
