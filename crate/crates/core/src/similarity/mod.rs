//! Maximum pairwise Pearson correlation (MPPC) and its activation-weighted
//! variant (wMPPC).
//!
//! For a source feature `i` and target features `j`,
//! `ρ_i = max_j corr(f_i, g_j)` over the same ordered samples. MPPC is the
//! mean of `ρ` and wMPPC weights it by the source's cumulative activations:
//! `Σ S_i ρ_i / Σ S_i`. Both are directional.

mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LayerSpan, SMode};
use crate::linalg::{correlation_row_max, standardize_columns, DenseMatrix, TileConfig, DEFAULT_SIGMA_TOL};

pub use report::{write_grid_csv, write_pair_json, write_table_csv, write_table_json, WmppcTable};

/// Per-feature best matches of one source against one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MppcResult {
    /// `ρ_i` for every source feature.
    pub rho: Vec<f64>,
    /// Lowest target index attaining `ρ_i`.
    pub argmax: Vec<usize>,
    pub mppc: f64,
    pub wmppc: f64,
    pub n_samples: usize,
    pub source_id: String,
    pub target_id: String,
    /// Constant source columns; each contributes `ρ = 0`.
    pub dead_source_count: usize,
    pub s_mode: SMode,
}

/// A feature matrix standardized once, for reuse across many comparisons.
#[derive(Debug, Clone)]
pub struct Prepared<'a> {
    pub features: &'a FeatureMatrix,
    standardized: DenseMatrix,
    constant_count: usize,
}

impl<'a> Prepared<'a> {
    pub fn new(features: &'a FeatureMatrix) -> Result<Self> {
        let (standardized, stats) = standardize_columns(&features.data, DEFAULT_SIGMA_TOL)?;
        Ok(Self {
            features,
            standardized,
            constant_count: stats.constant_count(),
        })
    }

    /// Column-standardized data (constant columns are zero).
    pub fn standardized(&self) -> &DenseMatrix {
        &self.standardized
    }

    pub fn constant_count(&self) -> usize {
        self.constant_count
    }
}

/// MPPC and wMPPC of `src` against `tgt`.
pub fn mppc_pair(src: &FeatureMatrix, tgt: &FeatureMatrix, cfg: &TileConfig) -> Result<MppcResult> {
    check_aligned(src, tgt)?;
    mppc_prepared(&Prepared::new(src)?, &Prepared::new(tgt)?, cfg)
}

/// [`mppc_pair`] on already standardized inputs.
pub fn mppc_prepared(src: &Prepared<'_>, tgt: &Prepared<'_>, cfg: &TileConfig) -> Result<MppcResult> {
    let (rho, argmax) = best_matches(src, tgt, cfg)?;
    let mppc = rho.iter().sum::<f64>() / rho.len() as f64;
    let wmppc = wmppc_from(&rho, &src.features.s_vector)?;
    Ok(MppcResult {
        rho,
        argmax,
        mppc,
        wmppc,
        n_samples: src.features.n_samples(),
        source_id: src.features.label(),
        target_id: tgt.features.label(),
        dead_source_count: src.constant_count,
        s_mode: src.features.s_mode,
    })
}

/// `ρ_i` and its argmax for every source feature, without any weighting.
pub fn best_matches(src: &Prepared<'_>, tgt: &Prepared<'_>, cfg: &TileConfig) -> Result<(Vec<f64>, Vec<usize>)> {
    check_aligned(src.features, tgt.features)?;
    let (values, argmax) = correlation_row_max(&src.standardized, &tgt.standardized, cfg)?;
    Ok((values.iter().map(|&v| f64::from(v)).collect(), argmax))
}

fn check_aligned(src: &FeatureMatrix, tgt: &FeatureMatrix) -> Result<()> {
    if src.n_samples() != tgt.n_samples() {
        return Err(Error::Misaligned {
            src: src.n_samples(),
            tgt: tgt.n_samples(),
        });
    }
    if src.dataset_id != tgt.dataset_id {
        log::warn!(
            "comparing features from different datasets ({:?} vs {:?})",
            src.dataset_id,
            tgt.dataset_id
        );
    }
    Ok(())
}

/// `Σ S_i ρ_i / Σ S_i`.
///
/// Fails when the weights carry no mass (`Σ|S| < 1e-12`) or when `Σ S ≤ 0`;
/// logs a warning when some weights are negative.
pub fn wmppc_from(rho: &[f64], s: &[f64]) -> Result<f64> {
    if rho.len() != s.len() {
        return Err(Error::shape(
            "wmppc",
            format!("{} correlations but {} weights", rho.len(), s.len()),
        ));
    }
    if rho.is_empty() {
        return Err(Error::Empty { what: "correlation vector" });
    }
    let abs_mass: f64 = s.iter().map(|v| v.abs()).sum();
    if abs_mass < 1e-12 {
        return Err(Error::DegenerateWeights(format!(
            "sum of |S| is {abs_mass:e}; every feature has zero cumulative activation"
        )));
    }
    let total: f64 = s.iter().sum();
    let negative = s.iter().filter(|v| **v < 0.0).count();
    if negative > 0 {
        log::warn!("{negative} of {} cumulative activations are negative", s.len());
    }
    if total <= 0.0 {
        return Err(Error::DegenerateWeights(format!(
            "sum of S is {total:e}; use s_mode relu or post_topk for positive weights"
        )));
    }
    Ok(s.iter().zip(rho).map(|(w, r)| w * r).sum::<f64>() / total)
}

/// Pearson correlation between the weights and the matches, or 0 when either
/// is constant.
pub fn s_rho_correlation(s: &[f64], rho: &[f64]) -> Result<f64> {
    if s.len() != rho.len() {
        return Err(Error::shape(
            "s_rho_correlation",
            format!("{} weights but {} correlations", s.len(), rho.len()),
        ));
    }
    if s.len() < 2 {
        return Err(Error::invalid("S-rho correlation needs at least 2 features"));
    }
    let n = s.len() as f64;
    let ms = s.iter().sum::<f64>() / n;
    let mr = rho.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in s.iter().zip(rho) {
        let (da, db) = (a - ms, b - mr);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Joins the features of several layers of one model column-wise.
pub fn concat_layers(fms: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = fms.first().ok_or(Error::Empty { what: "layer list" })?;
    let mut spans: Vec<LayerSpan> = Vec::new();
    let mut s_vector = Vec::new();
    for fm in fms {
        if fm.n_samples() != first.n_samples() {
            return Err(Error::Misaligned {
                src: first.n_samples(),
                tgt: fm.n_samples(),
            });
        }
        if fm.model_id != first.model_id || fm.dataset_id != first.dataset_id {
            return Err(Error::invalid(format!(
                "cannot concatenate {} on {:?} with {} on {:?}",
                first.model_id, first.dataset_id, fm.model_id, fm.dataset_id
            )));
        }
        if fm.s_mode != first.s_mode {
            return Err(Error::invalid(format!(
                "mixed s_mode ({} and {})",
                first.s_mode, fm.s_mode
            )));
        }
        let offset = s_vector.len();
        for span in &fm.spans {
            if spans.iter().any(|s| s.layer == span.layer) {
                return Err(Error::invalid(format!("layer {} appears twice", span.layer)));
            }
            spans.push(LayerSpan {
                start: span.start + offset,
                ..span.clone()
            });
        }
        s_vector.extend_from_slice(&fm.s_vector);
    }
    let parts: Vec<&DenseMatrix> = fms.iter().map(|f| &f.data).collect();
    Ok(FeatureMatrix {
        data: DenseMatrix::hconcat(&parts)?,
        model_id: first.model_id.clone(),
        dataset_id: first.dataset_id.clone(),
        spans,
        s_mode: first.s_mode,
        s_vector,
    })
}

/// wMPPC for every (source layer, target layer) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGrid {
    pub source_id: String,
    pub target_id: String,
    pub src_layers: Vec<u32>,
    pub tgt_layers: Vec<u32>,
    /// Row-major, `src_layers.len() × tgt_layers.len()`.
    pub values: Vec<f64>,
}

impl LayerGrid {
    pub fn get(&self, src: usize, tgt: usize) -> f64 {
        self.values[src * self.tgt_layers.len() + tgt]
    }
}

fn single_layer(fm: &FeatureMatrix) -> Result<u32> {
    fm.layer()
        .ok_or_else(|| Error::invalid(format!("{} spans several layers; grids need one layer per matrix", fm.label())))
}

/// Layerwise wMPPC heatmap between two stacks of single-layer features.
pub fn layerwise_grid(src: &[FeatureMatrix], tgt: &[FeatureMatrix], cfg: &TileConfig) -> Result<LayerGrid> {
    let (Some(s0), Some(t0)) = (src.first(), tgt.first()) else {
        return Err(Error::Empty { what: "layer list" });
    };
    let src_layers = src.iter().map(single_layer).collect::<Result<Vec<_>>>()?;
    let tgt_layers = tgt.iter().map(single_layer).collect::<Result<Vec<_>>>()?;
    let cell = |a: usize, b: usize| {
        let (src_layer, tgt_layer) = (src_layers[a], tgt_layers[b]);
        move |e: Error| Error::GridCell {
            src_layer,
            tgt_layer,
            source: Box::new(e),
        }
    };
    let tgt_prep = tgt
        .iter()
        .enumerate()
        .map(|(b, t)| Prepared::new(t).map_err(cell(0, b)))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(src.len() * tgt.len());
    for (a, s) in src.iter().enumerate() {
        let sp = Prepared::new(s).map_err(cell(a, 0))?;
        for (b, tp) in tgt_prep.iter().enumerate() {
            values.push(mppc_prepared(&sp, tp, cfg).map_err(cell(a, b))?.wmppc);
        }
    }
    Ok(LayerGrid {
        source_id: s0.model_id.clone(),
        target_id: t0.model_id.clone(),
        src_layers,
        tgt_layers,
        values,
    })
}

/// Multiply-add count of one full correlation: `2 · N · F_src · F_tgt`.
pub fn estimate_flops(f_total_src: u64, f_total_tgt: u64, n_samples: u64) -> Result<u128> {
    if f_total_src == 0 || f_total_tgt == 0 || n_samples == 0 {
        return Err(Error::invalid("FLOP estimate needs positive feature and sample counts"));
    }
    2u128
        .checked_mul(u128::from(n_samples))
        .and_then(|v| v.checked_mul(u128::from(f_total_src)))
        .and_then(|v| v.checked_mul(u128::from(f_total_tgt)))
        .ok_or(Error::Overflow("FLOP count"))
}
