use rayon::prelude::*;

use super::forward::{center, ForwardPass};
use super::SaeParams;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Gradients of [`mse_loss`](super::mse_loss) with respect to each
/// parameter tensor, laid out like the tensors themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// `D × F`, row-major.
    pub w_enc: Vec<f32>,
    /// `F × D`, row-major.
    pub w_dec: Vec<f32>,
    pub b_dec: Vec<f32>,
}

impl Gradients {
    pub(crate) fn tensors(&self) -> [(&'static str, &[f32]); 3] {
        [
            ("w_enc", &self.w_enc),
            ("w_dec", &self.w_dec),
            ("b_dec", &self.b_dec),
        ]
    }
}

/// Analytic backpropagation of the mean squared reconstruction error.
///
/// TopK is treated as a fixed mask: gradients flow only through the `k`
/// selected latents of each row. `b_dec` collects both its additive decoder
/// path and its subtractive encoder path.
///
/// Each per-feature gradient row is accumulated in row order of the batch, so
/// the result does not depend on the number of threads.
pub fn sae_backward(p: &SaeParams, x: &DenseMatrix, fwd: &ForwardPass) -> Result<Gradients> {
    let (b, d, f, k) = (x.rows(), p.d_in(), p.n_features(), p.k());
    if x.cols() != d
        || fwd.f_pre.shape() != (b, f)
        || fwd.x_hat.shape() != (b, d)
        || fwd.selected.len() != b * k
    {
        return Err(Error::shape(
            "sae_backward",
            format!(
                "forward outputs do not belong to this input/SAE (x {:?}, f_pre {:?}, x_hat {:?}, {} selections)",
                x.shape(),
                fwd.f_pre.shape(),
                fwd.x_hat.shape(),
                fwd.selected.len()
            ),
        ));
    }
    if b == 0 {
        return Err(Error::Empty { what: "batch" });
    }

    // dL/dx̂ = 2 (x̂ − x) / B
    let scale = 2.0 / b as f64;
    let g_xhat: Vec<f64> = fwd
        .x_hat
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .map(|(&xh, &xv)| scale * (f64::from(xh) - f64::from(xv)))
        .collect();

    // dL/df at the selected slots: g_xhat · w_decᵀ restricted to the mask.
    let mut g_f = vec![0.0f64; b * k];
    g_f.par_chunks_mut(k).enumerate().for_each(|(r, dst)| {
        let gx = &g_xhat[r * d..(r + 1) * d];
        for (slot, &s) in dst.iter_mut().zip(&fwd.selected[r * k..(r + 1) * k]) {
            *slot = gx
                .iter()
                .zip(p.w_dec.row(s as usize))
                .map(|(&g, &w)| g * f64::from(w))
                .sum();
        }
    });

    // Feature -> (row, slot) lists, rows ascending.
    let mut offsets = vec![0usize; f + 1];
    for &s in &fwd.selected {
        offsets[s as usize + 1] += 1;
    }
    for i in 0..f {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut hits = vec![0usize; b * k];
    for (flat, &s) in fwd.selected.iter().enumerate() {
        hits[cursor[s as usize]] = flat;
        cursor[s as usize] += 1;
    }

    let centered = center(p, x);
    let mut grad_dec = vec![0.0f32; f * d];
    let mut grad_enc_t = vec![0.0f32; f * d];
    let mut g_sum = vec![0.0f64; f];
    grad_dec
        .par_chunks_mut(d)
        .zip(grad_enc_t.par_chunks_mut(d))
        .zip(g_sum.par_iter_mut())
        .enumerate()
        .for_each_init(
            || (vec![0.0f64; d], vec![0.0f64; d]),
            |(acc_dec, acc_enc), (s, ((gd, ge), gs))| {
                acc_dec.fill(0.0);
                acc_enc.fill(0.0);
                let mut total = 0.0;
                for &flat in &hits[offsets[s]..offsets[s + 1]] {
                    let r = flat / k;
                    let a = f64::from(fwd.f_pre.get(r, s));
                    let g = g_f[flat];
                    total += g;
                    for (c, &gx) in acc_dec.iter_mut().zip(&g_xhat[r * d..(r + 1) * d]) {
                        *c += a * gx;
                    }
                    for (c, &xc) in acc_enc.iter_mut().zip(centered.row(r)) {
                        *c += g * f64::from(xc);
                    }
                }
                for (o, &v) in gd.iter_mut().zip(acc_dec.iter()) {
                    *o = v as f32;
                }
                for (o, &v) in ge.iter_mut().zip(acc_enc.iter()) {
                    *o = v as f32;
                }
                *gs = total;
            },
        );

    let mut grad_enc = vec![0.0f32; d * f];
    for s in 0..f {
        for j in 0..d {
            grad_enc[j * f + s] = grad_enc_t[s * d + j];
        }
    }

    let mut grad_b = vec![0.0f64; d];
    for r in 0..b {
        for (c, &g) in grad_b.iter_mut().zip(&g_xhat[r * d..(r + 1) * d]) {
            *c += g;
        }
    }
    for (j, c) in grad_b.iter_mut().enumerate() {
        let enc_row = p.w_enc.row(j);
        let through_encoder: f64 = g_sum
            .iter()
            .zip(enc_row)
            .map(|(&g, &w)| g * f64::from(w))
            .sum();
        *c -= through_encoder;
    }

    Ok(Gradients {
        w_enc: grad_enc,
        w_dec: grad_dec,
        b_dec: grad_b.into_iter().map(|v| v as f32).collect(),
    })
}
