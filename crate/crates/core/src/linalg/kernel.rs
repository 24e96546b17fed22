//! Tiled dense products.
//!
//! Every output element is a single `f64` accumulator fed sequentially over
//! the inner dimension. Tiles only decide which elements are in flight
//! together, and threads only ever own whole row tiles, so every function here
//! returns bitwise-identical results for any [`TileConfig`] and any thread
//! count.

use std::ops::Range;

use rayon::prelude::*;

use super::{DenseMatrix, TileConfig};
use crate::error::{Error, Result};

/// Computes `a · b` one row tile at a time, handing each finished
/// `rows × width` block of accumulators to `visit(first_col, width, acc)`.
fn visit_row_tile<F>(a: &DenseMatrix, b: &DenseMatrix, cfg: &TileConfig, rows: Range<usize>, mut visit: F)
where
    F: FnMut(usize, usize, &[f64]),
{
    let inner = a.cols();
    let n_rows = rows.len();
    let mut acc = vec![0.0f64; n_rows * cfg.tile_cols.min(b.cols().max(1))];
    for j0 in (0..b.cols()).step_by(cfg.tile_cols) {
        let width = cfg.tile_cols.min(b.cols() - j0);
        let acc = &mut acc[..n_rows * width];
        acc.fill(0.0);
        for k0 in (0..inner).step_by(cfg.inner_block) {
            let k1 = (k0 + cfg.inner_block).min(inner);
            for (local, i) in rows.clone().enumerate() {
                let a_seg = &a.row(i)[k0..k1];
                let acc_row = &mut acc[local * width..(local + 1) * width];
                for (dk, &av) in a_seg.iter().enumerate() {
                    let av = f64::from(av);
                    let b_seg = &b.row(k0 + dk)[j0..j0 + width];
                    for (c, &bv) in acc_row.iter_mut().zip(b_seg) {
                        *c += av * f64::from(bv);
                    }
                }
            }
        }
        visit(j0, width, acc);
    }
}

/// Fills `out` (row-major, `a.rows() × b.cols()`) with `scale · a · b`.
fn product_into(a: &DenseMatrix, b: &DenseMatrix, cfg: &TileConfig, scale: f64, out: &mut [f32]) {
    let cols = b.cols();
    if cols == 0 {
        return;
    }
    out.par_chunks_mut(cfg.tile_rows * cols)
        .enumerate()
        .for_each(|(t, slab)| {
            let r0 = t * cfg.tile_rows;
            let rows = r0..r0 + slab.len() / cols;
            let n_rows = rows.len();
            visit_row_tile(a, b, cfg, rows, |j0, width, acc| {
                for local in 0..n_rows {
                    let dst = &mut slab[local * cols + j0..local * cols + j0 + width];
                    for (d, &v) in dst.iter_mut().zip(&acc[local * width..(local + 1) * width]) {
                        *d = (v * scale) as f32;
                    }
                }
            });
        });
}

/// Standard matrix product `a · b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix, cfg: &TileConfig) -> Result<DenseMatrix> {
    cfg.validate()?;
    if a.cols() != b.rows() {
        return Err(Error::shape(
            "matmul",
            format!("{}x{} · {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let mut out = vec![0.0f32; a.rows() * b.cols()];
    product_into(a, b, cfg, 1.0, &mut out);
    Ok(DenseMatrix::from_parts_unchecked(a.rows(), b.cols(), out))
}

fn check_correlation_inputs(xs: &DenseMatrix, ys: &DenseMatrix, cfg: &TileConfig) -> Result<()> {
    cfg.validate()?;
    if xs.rows() != ys.rows() {
        return Err(Error::Misaligned {
            src: xs.rows(),
            tgt: ys.rows(),
        });
    }
    if xs.rows() < 2 {
        return Err(Error::invalid(format!(
            "correlation needs at least 2 samples, got {}",
            xs.rows()
        )));
    }
    Ok(())
}

/// Pearson correlation matrix of two column-standardized matrices:
/// `out[i, j] = Σ_n xs[n, i] · ys[n, j] / N`.
///
/// Inputs must already be standardized with population σ (see
/// [`standardize_columns`](super::standardize_columns)); the kernel does not
/// re-check this.
pub fn blocked_correlation(xs: &DenseMatrix, ys: &DenseMatrix, cfg: &TileConfig) -> Result<DenseMatrix> {
    check_correlation_inputs(xs, ys, cfg)?;
    let xt = xs.transpose();
    let mut out = vec![0.0f32; xs.cols() * ys.cols()];
    product_into(&xt, ys, cfg, 1.0 / xs.rows() as f64, &mut out);
    Ok(DenseMatrix::from_parts_unchecked(xs.cols(), ys.cols(), out))
}

/// Row-wise maximum of the correlation matrix of `xs` against `ys` without
/// materializing it.
///
/// Target columns are visited one tile at a time with a running maximum per
/// source column, so memory stays at one tile of accumulators per thread. The
/// values are rounded to `f32` exactly as [`blocked_correlation`] rounds them,
/// so this equals `rowwise_max(blocked_correlation(xs, ys))` bitwise,
/// argmax included.
pub fn correlation_row_max(
    xs: &DenseMatrix,
    ys: &DenseMatrix,
    cfg: &TileConfig,
) -> Result<(Vec<f32>, Vec<usize>)> {
    check_correlation_inputs(xs, ys, cfg)?;
    if ys.cols() == 0 {
        return Err(Error::Empty {
            what: "target feature matrix",
        });
    }
    let xt = xs.transpose();
    let scale = 1.0 / xs.rows() as f64;
    let n_src = xs.cols();
    let mut values = vec![f32::NEG_INFINITY; n_src];
    let mut argmax = vec![0usize; n_src];
    values
        .par_chunks_mut(cfg.tile_rows)
        .zip(argmax.par_chunks_mut(cfg.tile_rows))
        .enumerate()
        .for_each(|(t, (vals, idxs))| {
            let r0 = t * cfg.tile_rows;
            let rows = r0..r0 + vals.len();
            visit_row_tile(&xt, ys, cfg, rows, |j0, width, acc| {
                for (local, (best, best_j)) in vals.iter_mut().zip(idxs.iter_mut()).enumerate() {
                    for (dj, &v) in acc[local * width..(local + 1) * width].iter().enumerate() {
                        let r = (v * scale) as f32;
                        // strict: earlier (lower) index wins ties
                        if r > *best {
                            *best = r;
                            *best_j = j0 + dj;
                        }
                    }
                }
            });
        });
    Ok((values, argmax))
}

/// Maximum of each row and the lowest column index attaining it.
pub fn rowwise_max(m: &DenseMatrix) -> Result<(Vec<f32>, Vec<usize>)> {
    if m.is_empty() {
        return Err(Error::Empty { what: "matrix" });
    }
    Ok((0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .enumerate()
                .fold((f32::NEG_INFINITY, 0usize), |(bv, bj), (j, &v)| {
                    if v > bv {
                        (v, j)
                    } else {
                        (bv, bj)
                    }
                })
        })
        .unzip())
}
