//! Ranking CSV and the top-feature manifest.

use std::io::Write;

use serde::Serialize;

use super::{top_activating_samples, Group, SharednessRanking};
use crate::error::Result;
use crate::features::FeatureMatrix;

/// One row per source feature, in ranking order:
/// `rank, feature_index, delta, s, rho_min_g, rho_max_h, argmax:<target>...`.
pub fn write_ranking_csv<W: Write>(out: W, ranking: &SharednessRanking) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["rank", "feature_index", "delta", "s", "rho_min_g", "rho_max_h"]
        .map(String::from)
        .to_vec();
    header.extend(ranking.comparisons.iter().map(|c| format!("argmax:{}", c.target_id)));
    w.write_record(&header)?;
    let order = super::top_indices(&ranking.delta, ranking.delta.len());
    for (rank, &i) in order.iter().enumerate() {
        let mut rec = vec![
            rank.to_string(),
            i.to_string(),
            ranking.delta[i].to_string(),
            ranking.s[i].to_string(),
            ranking.rho_bound(i, Group::G).to_string(),
            ranking.rho_bound(i, Group::H).to_string(),
        ];
        rec.extend(ranking.comparisons.iter().map(|c| c.argmax[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct TopFeature {
    feature_index: usize,
    delta: f64,
    s: f64,
    layer: Option<u32>,
    top_samples: Vec<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    source_id: &'a str,
    group_g_ids: &'a [String],
    group_h_ids: &'a [String],
    fraction: f64,
    n_features: usize,
    samples_per_feature: usize,
    top_features: Vec<TopFeature>,
}

/// JSON listing, for every top-ranked feature, the samples (row indices of
/// the shared dataset) that activate it most.
pub fn write_manifest_json<W: Write>(
    out: W,
    ranking: &SharednessRanking,
    src: &FeatureMatrix,
    samples_per_feature: usize,
) -> Result<()> {
    let count = samples_per_feature.min(src.n_samples());
    let top_features = ranking
        .top_indices
        .iter()
        .map(|&i| {
            Ok(TopFeature {
                feature_index: i,
                delta: ranking.delta[i],
                s: ranking.s[i],
                layer: src.column_layer(i),
                top_samples: top_activating_samples(src, i, count)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        source_id: &ranking.source_id,
        group_g_ids: &ranking.group_g_ids,
        group_h_ids: &ranking.group_h_ids,
        fraction: ranking.fraction,
        n_features: ranking.delta.len(),
        samples_per_feature: count,
        top_features,
    };
    serde_json::to_writer_pretty(out, &manifest)?;
    Ok(())
}
