use std::cmp::Ordering;

use rayon::prelude::*;

use super::SaeParams;
use crate::error::{Error, Result};
use crate::linalg::{matmul, DenseMatrix, TileConfig};

/// Larger value first; equal values keep the lower index first.
#[inline]
fn rank_order(values: &[f32], a: u32, b: u32) -> Ordering {
    values[b as usize]
        .total_cmp(&values[a as usize])
        .then(a.cmp(&b))
}

/// Indices of the `k` largest entries of `values`, returned in ascending
/// index order. Ties go to the lower index. `scratch` is reused between
/// calls.
pub(crate) fn topk_indices(values: &[f32], k: usize, scratch: &mut Vec<u32>, out: &mut Vec<u32>) {
    scratch.clear();
    scratch.extend(0..values.len() as u32);
    if k < values.len() {
        scratch.select_nth_unstable_by(k - 1, |&a, &b| rank_order(values, a, b));
    }
    out.clear();
    out.extend_from_slice(&scratch[..k]);
    out.sort_unstable();
}

/// Keeps the `k` largest values of `f` (by value, not magnitude) and zeroes
/// the rest. Ties are resolved toward the lower index.
///
/// ```
/// use concept_bridge::sae::topk_select;
/// assert_eq!(topk_select(&[0.1, -0.5, 3.0, 2.0], 2).unwrap(), vec![0.0, 0.0, 3.0, 2.0]);
/// assert_eq!(topk_select(&[-1.0, -2.0, -3.0], 2).unwrap(), vec![-1.0, -2.0, 0.0]);
/// ```
pub fn topk_select(f: &[f32], k: usize) -> Result<Vec<f32>> {
    if k == 0 || k > f.len() {
        return Err(Error::invalid(format!(
            "k must lie in 1..={}, got {k}",
            f.len()
        )));
    }
    let (mut scratch, mut idx) = (Vec::new(), Vec::new());
    topk_indices(f, k, &mut scratch, &mut idx);
    let mut out = vec![0.0; f.len()];
    for &i in &idx {
        out[i as usize] = f[i as usize];
    }
    Ok(out)
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Latents before TopK, `B × F`.
    pub f_pre: DenseMatrix,
    /// TopK-masked latents, `B × F`.
    pub f_sparse: DenseMatrix,
    /// Reconstruction, `B × D`.
    pub x_hat: DenseMatrix,
    /// Selected feature indices, `B × k`, ascending within each row.
    pub selected: Vec<u32>,
}

fn check_input(p: &SaeParams, x: &DenseMatrix, op: &'static str) -> Result<()> {
    if x.cols() != p.d_in() {
        return Err(Error::shape(
            op,
            format!("input has {} columns, SAE expects {}", x.cols(), p.d_in()),
        ));
    }
    Ok(())
}

pub(crate) fn center(p: &SaeParams, x: &DenseMatrix) -> DenseMatrix {
    let mut c = x.clone();
    let d = p.d_in();
    for row in c.as_mut_slice().chunks_exact_mut(d) {
        for (v, b) in row.iter_mut().zip(&p.b_dec) {
            *v -= b;
        }
    }
    c
}

/// Pre-TopK latents `(x − b_dec) · w_enc`.
pub fn sae_encode(p: &SaeParams, x: &DenseMatrix) -> Result<DenseMatrix> {
    check_input(p, x, "sae_encode")?;
    matmul(&center(p, x), &p.w_enc, &TileConfig::default())
}

/// Row-wise TopK selection of a latent matrix: `B × k` ascending indices.
pub(crate) fn select_rows(f_pre: &DenseMatrix, k: usize) -> Vec<u32> {
    let mut selected = vec![0u32; f_pre.rows() * k];
    if k == 0 {
        return selected;
    }
    selected
        .par_chunks_mut(k)
        .enumerate()
        .for_each_init(
            || (Vec::new(), Vec::new()),
            |(scratch, idx), (r, dst)| {
                topk_indices(f_pre.row(r), k, scratch, idx);
                dst.copy_from_slice(idx);
            },
        );
    selected
}

/// Full forward pass: encode, TopK, decode.
pub fn sae_forward(p: &SaeParams, x: &DenseMatrix) -> Result<ForwardPass> {
    check_input(p, x, "sae_forward")?;
    let (b, d, f, k) = (x.rows(), p.d_in(), p.n_features(), p.k());
    let f_pre = matmul(&center(p, x), &p.w_enc, &TileConfig::default())?;
    let selected = select_rows(&f_pre, k);

    let mut f_sparse = DenseMatrix::zeros(b, f);
    for r in 0..b {
        let src = f_pre.row(r);
        let dst = f_sparse.row_mut(r);
        for &s in &selected[r * k..(r + 1) * k] {
            dst[s as usize] = src[s as usize];
        }
    }

    let mut x_hat = DenseMatrix::zeros(b, d);
    x_hat
        .as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .for_each_init(
            || vec![0.0f64; d],
            |acc, (r, dst)| {
                acc.fill(0.0);
                let fr = f_pre.row(r);
                for &s in &selected[r * k..(r + 1) * k] {
                    let a = f64::from(fr[s as usize]);
                    for (c, &w) in acc.iter_mut().zip(p.w_dec.row(s as usize)) {
                        *c += a * f64::from(w);
                    }
                }
                for ((o, &c), &bias) in dst.iter_mut().zip(acc.iter()).zip(&p.b_dec) {
                    *o = (c + f64::from(bias)) as f32;
                }
            },
        );

    Ok(ForwardPass {
        f_pre,
        f_sparse,
        x_hat,
        selected,
    })
}

/// Squared L2 reconstruction error per row, averaged over rows.
pub fn mse_loss(x: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?} vs {:?}", x.shape(), x_hat.shape()),
        ));
    }
    if x.rows() == 0 {
        return Err(Error::Empty { what: "batch" });
    }
    let total: f64 = x
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(&a, &b)| {
            let d = f64::from(a) - f64::from(b);
            d * d
        })
        .sum();
    Ok(total / x.rows() as f64)
}

/// Number of features never chosen by TopK on any row of `x`.
pub fn dead_latent_count(p: &SaeParams, x: &DenseMatrix) -> Result<usize> {
    let f_pre = sae_encode(p, x)?;
    let mut alive = vec![false; p.n_features()];
    for &s in &select_rows(&f_pre, p.k()) {
        alive[s as usize] = true;
    }
    Ok(alive.iter().filter(|&&a| !a).count())
}
