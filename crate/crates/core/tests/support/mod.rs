//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use concept_bridge::linalg::DenseMatrix;
use concept_bridge::sae::{sae_backward, sae_forward, SaeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect::<Vec<f32>>();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

/// Textbook two-pass Pearson correlation of two columns.
pub fn pearson(x: &[f32], y: &[f32]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let my = y.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (f64::from(a) - mx, f64::from(b) - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Full `F_A × F_B` Pearson matrix, pair by pair.
pub fn naive_correlation(a: &DenseMatrix, b: &DenseMatrix) -> Vec<f64> {
    let bc: Vec<Vec<f32>> = (0..b.cols()).map(|j| b.column(j)).collect();
    let mut out = Vec::with_capacity(a.cols() * b.cols());
    for i in 0..a.cols() {
        let ai = a.column(i);
        out.extend(bc.iter().map(|bj| pearson(&ai, bj)));
    }
    out
}

/// SAE parameters in `f64`, flattened like the crate's tensors.
#[derive(Clone)]
pub struct RefSae {
    pub d: usize,
    pub f: usize,
    pub k: usize,
    pub w_enc: Vec<f64>,
    pub w_dec: Vec<f64>,
    pub b_dec: Vec<f64>,
}

impl RefSae {
    pub fn from_params(p: &SaeParams) -> Self {
        let wide = |v: &[f32]| v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
        Self {
            d: p.d_in(),
            f: p.n_features(),
            k: p.k(),
            w_enc: wide(p.w_enc().as_slice()),
            w_dec: wide(p.w_dec().as_slice()),
            b_dec: wide(p.b_dec()),
        }
    }

    /// Latents and TopK selection (by value, lower index on ties) of one row.
    pub fn encode_row(&self, x: &[f32]) -> (Vec<f64>, Vec<usize>) {
        let c: Vec<f64> = x.iter().zip(&self.b_dec).map(|(&v, b)| f64::from(v) - b).collect();
        let f: Vec<f64> = (0..self.f)
            .map(|j| (0..self.d).map(|i| c[i] * self.w_enc[i * self.f + j]).sum())
            .collect();
        let mut order: Vec<usize> = (0..self.f).collect();
        order.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
        order.truncate(self.k);
        order.sort_unstable();
        (f, order)
    }

    pub fn loss(&self, x: &DenseMatrix) -> f64 {
        let mut total = 0.0;
        for r in 0..x.rows() {
            let (f, sel) = self.encode_row(x.row(r));
            for i in 0..self.d {
                let xh = self.b_dec[i] + sel.iter().map(|&s| f[s] * self.w_dec[s * self.d + i]).sum::<f64>();
                let e = xh - f64::from(x.get(r, i));
                total += e * e;
            }
        }
        total / x.rows() as f64
    }

    /// Gap between the k-th and (k+1)-th largest latent, over all rows.
    pub fn min_selection_margin(&self, x: &DenseMatrix) -> f64 {
        let mut margin = f64::INFINITY;
        for r in 0..x.rows() {
            let (mut f, _) = self.encode_row(x.row(r));
            if self.k < self.f {
                f.sort_by(|a, b| b.total_cmp(a));
                margin = margin.min(f[self.k - 1] - f[self.k]);
            }
        }
        margin
    }

    fn tensor_mut(&mut self, t: usize) -> &mut Vec<f64> {
        match t {
            0 => &mut self.w_enc,
            1 => &mut self.w_dec,
            _ => &mut self.b_dec,
        }
    }
}

/// Random small SAE with Gaussian weights and a random batch.
pub fn random_sae(d: usize, f: usize, k: usize, batch: usize, seed: u64) -> (SaeParams, DenseMatrix) {
    let mut r = rng(seed);
    let w_enc = gaussian(d, f, &mut r);
    let w_dec = gaussian(f, d, &mut r);
    let b_dec: Vec<f32> = (0..d).map(|_| r.random_range(-0.5..0.5)).collect();
    let x = gaussian(batch, d, &mut r);
    (SaeParams::new(w_enc, w_dec, b_dec, k).unwrap(), x)
}

pub struct GradCheck {
    pub compared: usize,
    pub worst_rel: f64,
    pub skipped_near_tie: bool,
}

/// Compares `sae_backward` with central differences of [`RefSae::loss`]
/// (`h = 1e-4`), entry by entry. Relative error is taken against
/// `max(|numeric|, 1e-3)`. Instances whose TopK margin is below `1e-3`
/// (a step of `h` could flip the selection) are skipped.
pub fn gradient_check(d: usize, f: usize, k: usize, batch: usize, seed: u64) -> GradCheck {
    let h = 1e-4;
    let (p, x) = random_sae(d, f, k, batch, seed);
    let reference = RefSae::from_params(&p);
    if reference.min_selection_margin(&x) < 1e-3 {
        return GradCheck {
            compared: 0,
            worst_rel: 0.0,
            skipped_near_tie: true,
        };
    }
    let fwd = sae_forward(&p, &x).unwrap();
    let g = sae_backward(&p, &x, &fwd).unwrap();
    let analytic = [&g.w_enc, &g.w_dec, &g.b_dec];
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (t, grad) in analytic.iter().enumerate() {
        for (idx, &a) in grad.iter().enumerate() {
            let mut plus = reference.clone();
            plus.tensor_mut(t)[idx] += h;
            let mut minus = reference.clone();
            minus.tensor_mut(t)[idx] -= h;
            let numeric = (plus.loss(&x) - minus.loss(&x)) / (2.0 * h);
            let rel = (f64::from(a) - numeric).abs() / numeric.abs().max(1e-3);
            worst = worst.max(rel);
            compared += 1;
        }
    }
    GradCheck {
        compared,
        worst_rel: worst,
        skipped_near_tie: false,
    }
}

/// Max over `n` null sample correlations between one Gaussian vector and `n`
/// independent ones, each of length `l`.
pub fn null_max_correlation(n: usize, l: usize, rng: &mut ChaCha8Rng) -> f64 {
    let draw = |rng: &mut ChaCha8Rng| (0..l).map(|_| StandardNormal.sample(rng)).collect::<Vec<f32>>();
    let x = draw(rng);
    (0..n)
        .map(|_| pearson(&x, &draw(rng)))
        .fold(f64::NEG_INFINITY, f64::max)
}
