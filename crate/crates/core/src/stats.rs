//! How unlikely is a best match of `ρ > x` between unrelated features?
//!
//! Under the null, the Fisher transform `artanh(r)·√(L − 3)` of a sample
//! correlation over `L` samples is standard normal. A source feature's `ρ` is
//! the maximum over `N` target features, so
//! `P(ρ > x) = 1 − Φ(artanh(x)·√(L − 3))^N`. At realistic sizes this is far
//! below `f64` range, so everything is computed as `log10`.
//!
//! The empirical counterpart is [`shuffle_baseline`]: shuffle each target
//! column over samples independently, which keeps every feature's
//! distribution but destroys any correspondence between models.

use std::f64::consts::{LN_10, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::rng::derive_seed;
use crate::linalg::{seeded_permutation, DenseMatrix, TileConfig};
use crate::similarity::{mppc_pair, MppcResult};

/// Threshold, number of target features and number of samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceQuery {
    x: f64,
    n_targets: u64,
    n_samples: u64,
}

impl SignificanceQuery {
    /// Requires `|x| < 1`, `n_targets ≥ 1` and `n_samples ≥ 4`.
    pub fn new(x: f64, n_targets: u64, n_samples: u64) -> Result<Self> {
        if x.is_nan() || x.abs() >= 1.0 {
            return Err(Error::invalid(format!("correlation threshold must satisfy |x| < 1, got {x}")));
        }
        if n_targets == 0 {
            return Err(Error::invalid("need at least one target feature"));
        }
        if n_samples < 4 {
            return Err(Error::invalid(format!(
                "the Fisher transform needs at least 4 samples, got {n_samples}"
            )));
        }
        Ok(Self {
            x,
            n_targets,
            n_samples,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn n_targets(&self) -> u64 {
        self.n_targets
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    /// `artanh(x)·√(L − 3)`.
    pub fn z(&self) -> f64 {
        self.x.atanh() * ((self.n_samples - 3) as f64).sqrt()
    }
}

/// `log10(1 − Φ(z))`.
///
/// Uses `erfc` up to `z = 8` and the asymptotic series
/// `φ(z)/z · (1 − 1/z² + 3/z⁴)` beyond, where `erfc` underflows.
pub fn normal_tail_log10(z: f64) -> f64 {
    if z <= 8.0 {
        return (0.5 * libm::erfc(z / SQRT_2)).log10();
    }
    let z2 = z * z;
    let ln_phi = -0.5 * z2 - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2);
    (ln_phi - z.ln() + series.ln()) / LN_10
}

/// `log10 P(ρ > x)` for the maximum of `N` null correlations.
pub fn fisher_max_tail_log10(q: &SignificanceQuery) -> f64 {
    let tail_log10 = normal_tail_log10(q.z());
    let n = q.n_targets as f64;
    let tail = 10f64.powf(tail_log10);
    if n * tail < 1e-8 {
        return n.log10() + tail_log10;
    }
    (-(n * (-tail).ln_1p()).exp_m1()).log10()
}

/// The `{x, N, L, log10_p, method}` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub x: f64,
    #[serde(rename = "N")]
    pub n_targets: u64,
    #[serde(rename = "L")]
    pub n_samples: u64,
    pub log10_p: f64,
    pub method: String,
}

impl SignificanceReport {
    pub fn new(q: &SignificanceQuery) -> Self {
        Self {
            x: q.x,
            n_targets: q.n_targets,
            n_samples: q.n_samples,
            log10_p: fisher_max_tail_log10(q),
            method: "fisher-max-order-statistic".into(),
        }
    }
}

/// `m` with every column permuted over rows by its own seeded permutation
/// (column `j` uses `derive_seed(seed, j)`).
pub fn shuffle_columns(m: &DenseMatrix, seed: u64) -> Result<DenseMatrix> {
    let (rows, cols) = m.shape();
    let shuffled: Vec<Vec<f32>> = (0..cols)
        .into_par_iter()
        .map(|j| {
            let perm = seeded_permutation(rows, derive_seed(seed, j as u64))?;
            Ok(perm.iter().map(|&r| m.get(r, j)).collect())
        })
        .collect::<Result<_>>()?;
    let mut data = vec![0.0f32; rows * cols];
    for (j, col) in shuffled.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            data[r * cols + j] = *v;
        }
    }
    DenseMatrix::from_vec(rows, cols, data)
}

/// [`mppc_pair`] against a column-shuffled copy of `tgt`.
pub fn shuffle_baseline(src: &FeatureMatrix, tgt: &FeatureMatrix, seed: u64, cfg: &TileConfig) -> Result<MppcResult> {
    let shuffled = FeatureMatrix {
        data: shuffle_columns(&tgt.data, seed)?,
        ..tgt.clone()
    };
    let mut r = mppc_pair(src, &shuffled, cfg)?;
    r.target_id = format!("{}#shuffled-{seed}", tgt.label());
    Ok(r)
}
