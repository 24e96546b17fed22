//! CSV and JSON exports of similarity results.
//!
//! Floats are written in Rust's shortest round-trip form, so the CSV and
//! JSON variants of a report parse back to identical values.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{mppc_prepared, LayerGrid, MppcResult, Prepared};
use crate::error::Result;
use crate::features::FeatureMatrix;
use crate::linalg::TileConfig;

/// All-pairs wMPPC between a set of feature matrices: row = source,
/// column = target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmppcTable {
    pub ids: Vec<String>,
    /// Row-major `ids.len()²`.
    pub wmppc: Vec<f64>,
    pub mppc: Vec<f64>,
    /// Constant columns of each matrix.
    pub dead_counts: Vec<usize>,
    pub n_samples: usize,
    pub tile: TileConfig,
}

impl WmppcTable {
    pub fn build(fms: &[FeatureMatrix], cfg: &TileConfig) -> Result<Self> {
        let prepared = fms.iter().map(Prepared::new).collect::<Result<Vec<_>>>()?;
        let mut wmppc = Vec::with_capacity(fms.len() * fms.len());
        let mut mppc = Vec::with_capacity(fms.len() * fms.len());
        for s in &prepared {
            for t in &prepared {
                let r = mppc_prepared(s, t, cfg)?;
                wmppc.push(r.wmppc);
                mppc.push(r.mppc);
            }
        }
        Ok(Self {
            ids: fms.iter().map(FeatureMatrix::label).collect(),
            wmppc,
            mppc,
            dead_counts: prepared.iter().map(Prepared::constant_count).collect(),
            n_samples: fms.first().map_or(0, FeatureMatrix::n_samples),
            tile: *cfg,
        })
    }

    pub fn get(&self, src: usize, tgt: usize) -> f64 {
        self.wmppc[src * self.ids.len() + tgt]
    }
}

fn square_csv<W: Write>(out: W, corner: &str, rows: &[String], cols: &[String], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![corner.to_string()];
    header.extend(cols.iter().cloned());
    w.write_record(&header)?;
    for (r, id) in rows.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(values[r * cols.len()..(r + 1) * cols.len()].iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// wMPPC table as CSV with model-layer ids on both axes.
pub fn write_table_csv<W: Write>(out: W, table: &WmppcTable) -> Result<()> {
    square_csv(out, "source\\target", &table.ids, &table.ids, &table.wmppc)
}

pub fn write_table_json<W: Write>(out: W, table: &WmppcTable) -> Result<()> {
    serde_json::to_writer_pretty(out, table)?;
    Ok(())
}

/// Layer grid as heatmap CSV.
pub fn write_grid_csv<W: Write>(out: W, grid: &LayerGrid) -> Result<()> {
    let label = |id: &str, l: &u32| format!("{id}:{l}");
    let rows: Vec<String> = grid.src_layers.iter().map(|l| label(&grid.source_id, l)).collect();
    let cols: Vec<String> = grid.tgt_layers.iter().map(|l| label(&grid.target_id, l)).collect();
    square_csv(out, "source\\target", &rows, &cols, &grid.values)
}

/// One comparison with the tile configuration that produced it.
pub fn write_pair_json<W: Write>(out: W, result: &MppcResult, cfg: &TileConfig) -> Result<()> {
    #[derive(Serialize)]
    struct PairReport<'a> {
        #[serde(flatten)]
        result: &'a MppcResult,
        tile: &'a TileConfig,
    }
    serde_json::to_writer_pretty(out, &PairReport { result, tile: cfg })?;
    Ok(())
}
