//! Activation and feature matrices, cumulative activations, and their files.
//!
//! An [`ActivationMatrix`] holds encoder activations for one layer. SAEs are
//! trained on `all_tokens` dumps; features are extracted only from
//! `global_only` dumps, one row per data sample, so that models with
//! different tokenizers, patch sizes or modalities line up row for row.

mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::sae::{sae_encode, topk_indices, SaeParams};

pub use io::{
    describe_file, read_activations, read_features, write_activations, write_features, ACTIVATION_MAGIC,
    FEATURE_MAGIC,
};

/// Which token positions an activation dump contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenMode {
    /// Every token or patch: SAE training data.
    AllTokens,
    /// One global vector per sample (CLS, EOS, pooled): feature extraction.
    GlobalOnly,
}

impl fmt::Display for TokenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenMode::AllTokens => "all_tokens",
            TokenMode::GlobalOnly => "global_only",
        })
    }
}

impl FromStr for TokenMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_tokens" => Ok(TokenMode::AllTokens),
            "global_only" => Ok(TokenMode::GlobalOnly),
            other => Err(Error::invalid(format!(
                "unknown token mode {other:?} (expected all_tokens or global_only)"
            ))),
        }
    }
}

/// How the cumulative activation `S_i` is summed over samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SMode {
    /// `Σ_x f_i(x)` over pre-TopK latents, as defined. Can be negative.
    #[default]
    Raw,
    /// `Σ_x max(f_i(x), 0)`.
    Relu,
    /// Sum of the TopK-masked latents.
    PostTopk,
}

impl fmt::Display for SMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SMode::Raw => "raw",
            SMode::Relu => "relu",
            SMode::PostTopk => "post_topk",
        })
    }
}

impl FromStr for SMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(SMode::Raw),
            "relu" => Ok(SMode::Relu),
            "post_topk" => Ok(SMode::PostTopk),
            other => Err(Error::invalid(format!(
                "unknown s_mode {other:?} (expected raw, relu or post_topk)"
            ))),
        }
    }
}

/// Activations of one encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    /// `N × D`.
    pub data: DenseMatrix,
    pub model_id: String,
    pub layer: u32,
    pub dataset_id: String,
    pub token_mode: TokenMode,
    /// What "global" means for this architecture (`cls`, `eos`, `pooled`).
    pub global_token_kind: Option<String>,
}

impl ActivationMatrix {
    pub fn new(
        data: DenseMatrix,
        model_id: impl Into<String>,
        layer: u32,
        dataset_id: impl Into<String>,
        token_mode: TokenMode,
    ) -> Result<Self> {
        if data.rows() == 0 || data.cols() == 0 {
            return Err(Error::Empty {
                what: "activation matrix",
            });
        }
        Ok(Self {
            data,
            model_id: model_id.into(),
            layer,
            dataset_id: dataset_id.into(),
            token_mode,
            global_token_kind: None,
        })
    }

    pub fn with_global_token_kind(mut self, kind: impl Into<String>) -> Self {
        self.global_token_kind = Some(kind.into());
        self
    }
}

/// A contiguous block of feature columns that came from one SAE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpan {
    pub layer: u32,
    pub start: usize,
    pub len: usize,
    /// TopK width of the producing SAE (needed for `post_topk` weights).
    pub k: usize,
    pub sae_checkpoint_hash: String,
}

/// Pre-TopK SAE latents over a dataset, plus their cumulative activations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    /// `N × F`.
    pub data: DenseMatrix,
    pub model_id: String,
    pub dataset_id: String,
    /// Column provenance; a single span unless layers were concatenated.
    pub spans: Vec<LayerSpan>,
    pub s_mode: SMode,
    /// `S_i` under `s_mode`, length `F`.
    pub s_vector: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a single-layer feature matrix and computes its `S` vector.
    pub fn new(
        data: DenseMatrix,
        model_id: impl Into<String>,
        dataset_id: impl Into<String>,
        span: LayerSpan,
        s_mode: SMode,
    ) -> Result<Self> {
        Self::from_spans(data, model_id.into(), dataset_id.into(), vec![span], s_mode)
    }

    /// Single-layer matrix with placeholder provenance (`k = F`, empty hash).
    /// Convenient for analytics on matrices that did not come from an SAE.
    pub fn from_matrix(data: DenseMatrix, model_id: impl Into<String>, layer: u32, s_mode: SMode) -> Result<Self> {
        let span = LayerSpan {
            layer,
            start: 0,
            len: data.cols(),
            k: data.cols(),
            sae_checkpoint_hash: String::new(),
        };
        Self::new(data, model_id, "", span, s_mode)
    }

    pub(crate) fn from_spans(
        data: DenseMatrix,
        model_id: String,
        dataset_id: String,
        spans: Vec<LayerSpan>,
        s_mode: SMode,
    ) -> Result<Self> {
        validate_spans(&spans, data.cols())?;
        let mut fm = Self {
            data,
            model_id,
            dataset_id,
            spans,
            s_mode,
            s_vector: Vec::new(),
        };
        if fm.data.rows() == 0 {
            return Err(Error::Empty {
                what: "feature matrix",
            });
        }
        fm.s_vector = cumulative_activation(&fm, s_mode)?;
        Ok(fm)
    }

    pub fn n_samples(&self) -> usize {
        self.data.rows()
    }

    pub fn n_features(&self) -> usize {
        self.data.cols()
    }

    /// The layer, when this matrix covers exactly one.
    pub fn layer(&self) -> Option<u32> {
        match self.spans.as_slice() {
            [only] => Some(only.layer),
            _ => None,
        }
    }

    /// `model:layer`, or `model:first-last` for concatenated layers.
    pub fn label(&self) -> String {
        match self.spans.as_slice() {
            [only] => format!("{}:{}", self.model_id, only.layer),
            [first, .., last] => format!("{}:{}-{}", self.model_id, first.layer, last.layer),
            [] => self.model_id.clone(),
        }
    }

    /// Layer of feature column `col`.
    pub fn column_layer(&self, col: usize) -> Option<u32> {
        self.spans
            .iter()
            .find(|s| col >= s.start && col < s.start + s.len)
            .map(|s| s.layer)
    }
}

fn validate_spans(spans: &[LayerSpan], cols: usize) -> Result<()> {
    let mut next = 0;
    for s in spans {
        if s.start != next || s.len == 0 || s.k == 0 || s.k > s.len {
            return Err(Error::invalid(format!(
                "layer span {s:?} does not tile the feature columns (expected start {next}, 1 <= k <= len)"
            )));
        }
        next += s.len;
    }
    if next != cols {
        return Err(Error::invalid(format!(
            "layer spans cover {next} columns but the matrix has {cols}"
        )));
    }
    Ok(())
}

/// Pre-TopK features of the global representation of every sample.
///
/// Rejects `all_tokens` dumps: features are only compared on one global
/// vector per sample.
pub fn extract_features(p: &SaeParams, acts: &ActivationMatrix, s_mode: SMode) -> Result<FeatureMatrix> {
    if acts.token_mode != TokenMode::GlobalOnly {
        return Err(Error::invalid(format!(
            "feature extraction needs a global_only activation dump, got {} for {} layer {}",
            acts.token_mode, acts.model_id, acts.layer
        )));
    }
    let data = sae_encode(p, &acts.data)?;
    let span = LayerSpan {
        layer: acts.layer,
        start: 0,
        len: p.n_features(),
        k: p.k(),
        sae_checkpoint_hash: p.fingerprint(),
    };
    FeatureMatrix::new(data, acts.model_id.clone(), acts.dataset_id.clone(), span, s_mode)
}

/// Cumulative activation `S_i` of every feature column, in `f64`.
pub fn cumulative_activation(fm: &FeatureMatrix, mode: SMode) -> Result<Vec<f64>> {
    let data = &fm.data;
    if data.is_empty() {
        return Err(Error::Empty {
            what: "feature matrix",
        });
    }
    Ok(match mode {
        SMode::Raw => data.column_sums(),
        SMode::Relu => {
            let mut s = vec![0.0f64; data.cols()];
            for r in 0..data.rows() {
                for (acc, &v) in s.iter_mut().zip(data.row(r)) {
                    *acc += f64::from(v.max(0.0));
                }
            }
            s
        }
        SMode::PostTopk => {
            let mut s = vec![0.0f64; data.cols()];
            let (mut scratch, mut idx) = (Vec::new(), Vec::new());
            for r in 0..data.rows() {
                let row = data.row(r);
                for span in &fm.spans {
                    let seg = &row[span.start..span.start + span.len];
                    topk_indices(seg, span.k, &mut scratch, &mut idx);
                    for &i in &idx {
                        s[span.start + i as usize] += f64::from(seg[i as usize]);
                    }
                }
            }
            s
        }
    })
}

/// Spread of the `S` weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SDiagnostics {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// `std / mean`.
    pub coefficient_of_variation: f64,
}

/// Mean, population σ and coefficient of variation of `s`.
pub fn s_diagnostics(s: &[f64]) -> Result<SDiagnostics> {
    if s.is_empty() {
        return Err(Error::Empty { what: "S vector" });
    }
    let n = s.len() as f64;
    let mean = s.iter().sum::<f64>() / n;
    let std = (s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if mean == 0.0 {
        return Err(Error::invalid(
            "coefficient of variation is undefined for a zero-mean S vector",
        ));
    }
    Ok(SDiagnostics {
        mean,
        std,
        coefficient_of_variation: std / mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(rows: &[&[f32]], mode: SMode) -> FeatureMatrix {
        FeatureMatrix::from_matrix(DenseMatrix::from_rows(rows).unwrap(), "m", 0, mode).unwrap()
    }

    #[test]
    fn cumulative_examples() {
        let f = fm(&[&[0.5], &[0.0], &[1.5]], SMode::Raw);
        assert_eq!(f.s_vector, vec![2.0]);
        let f = fm(&[&[-1.0], &[2.0]], SMode::Relu);
        assert_eq!(f.s_vector, vec![2.0]);
        assert_eq!(cumulative_activation(&f, SMode::Raw).unwrap(), vec![1.0]);
    }

    #[test]
    fn post_topk_respects_span_k() {
        let data = DenseMatrix::from_rows(&[[3.0f32, 1.0, 2.0], [0.0, 5.0, -1.0]]).unwrap();
        let span = LayerSpan {
            layer: 2,
            start: 0,
            len: 3,
            k: 1,
            sae_checkpoint_hash: "h".into(),
        };
        let f = FeatureMatrix::new(data, "m", "d", span, SMode::PostTopk).unwrap();
        assert_eq!(f.s_vector, vec![3.0, 5.0, 0.0]);
    }

    #[test]
    fn unknown_mode_is_an_error() {
        assert!("median".parse::<SMode>().is_err());
        assert_eq!("post_topk".parse::<SMode>().unwrap(), SMode::PostTopk);
        assert!("some_tokens".parse::<TokenMode>().is_err());
    }

    #[test]
    fn diagnostics() {
        let d = s_diagnostics(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.coefficient_of_variation, 0.0);
        let d = s_diagnostics(&[0.0, 2.0]).unwrap();
        assert_eq!((d.mean, d.std, d.coefficient_of_variation), (1.0, 1.0, 1.0));
        assert!(s_diagnostics(&[-1.0, 1.0]).is_err());
        assert!(s_diagnostics(&[]).is_err());
    }

    #[test]
    fn extraction_requires_global_rows() {
        let p = SaeParams::new(DenseMatrix::identity(2), DenseMatrix::identity(2), vec![0.0; 2], 1).unwrap();
        let x = DenseMatrix::from_rows(&[[1.0f32, 2.0]]).unwrap();
        let acts = ActivationMatrix::new(x.clone(), "m", 0, "d", TokenMode::AllTokens).unwrap();
        assert!(extract_features(&p, &acts, SMode::Raw).is_err());
        let acts = ActivationMatrix::new(x, "m", 0, "d", TokenMode::GlobalOnly).unwrap();
        let f = extract_features(&p, &acts, SMode::Raw).unwrap();
        assert_eq!(f.data.as_slice(), &[1.0, 2.0]);
        assert_eq!(f.spans[0].sae_checkpoint_hash, p.fingerprint());
        assert_eq!(f.label(), "m:0");
    }
}
