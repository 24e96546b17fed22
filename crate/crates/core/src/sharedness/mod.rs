//! Comparative Sharedness: which features of a model `M` are matched well by
//! every model of a group `G` but poorly by every model of a group `H`.
//!
//! For one pair, `Δ_i = S_i (ρ_i^A − ρ_i^B)(ρ_i^A + ρ_i^B)`, the difference of
//! the two wMPPC contributions. For groups,
//! `Δ_i = S_i ((min_G ρ_i)² − (max_H ρ_i)²)`.

mod report;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::TileConfig;
use crate::similarity::{best_matches, Prepared};

pub use report::{write_manifest_json, write_ranking_csv};

fn warn_negative(s: &[f64]) {
    let negative = s.iter().filter(|v| **v < 0.0).count();
    if negative > 0 {
        log::warn!("{negative} features have negative S; their sharedness sign is inverted");
    }
}

/// Pairwise sharedness of each feature toward `a` rather than `b`.
pub fn comparative_sharedness(s: &[f64], rho_a: &[f64], rho_b: &[f64]) -> Result<Vec<f64>> {
    if s.len() != rho_a.len() || s.len() != rho_b.len() {
        return Err(Error::shape(
            "comparative_sharedness",
            format!("lengths S={}, rho_a={}, rho_b={}", s.len(), rho_a.len(), rho_b.len()),
        ));
    }
    warn_negative(s);
    Ok(s.iter()
        .zip(rho_a.iter().zip(rho_b))
        .map(|(s, (a, b))| s * (a - b) * (a + b))
        .collect())
}

/// Group sharedness: worst match in `G` against best match in `H`.
pub fn generalized_cs(s: &[f64], rhos_g: &[&[f64]], rhos_h: &[&[f64]]) -> Result<Vec<f64>> {
    if rhos_g.is_empty() || rhos_h.is_empty() {
        return Err(Error::invalid("both comparison groups need at least one member"));
    }
    if let Some(bad) = rhos_g.iter().chain(rhos_h).find(|r| r.len() != s.len()) {
        return Err(Error::shape(
            "generalized_cs",
            format!("S has {} entries but a rho vector has {}", s.len(), bad.len()),
        ));
    }
    warn_negative(s);
    Ok((0..s.len())
        .map(|i| {
            let lo = rhos_g.iter().map(|r| r[i]).fold(f64::INFINITY, f64::min);
            let hi = rhos_h.iter().map(|r| r[i]).fold(f64::NEG_INFINITY, f64::max);
            s[i] * (lo * lo - hi * hi)
        })
        .collect())
}

/// Indices of the `⌊fraction · F⌋` (at least one) largest scores, highest
/// first, ties to the lower index.
///
/// ```
/// use concept_bridge::sharedness::top_fraction;
///
/// assert_eq!(top_fraction(&[3.0, 1.0, 2.0], 1.0)?, vec![0, 2, 1]);
/// assert_eq!(top_fraction(&vec![0.0; 8192], 0.01)?.len(), 81);
/// # Ok::<(), concept_bridge::Error>(())
/// ```
pub fn top_fraction(delta: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if delta.is_empty() {
        return Err(Error::Empty { what: "score vector" });
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let count = ((fraction * delta.len() as f64 + 1e-9).floor() as usize).clamp(1, delta.len());
    Ok(top_indices(delta, count))
}

fn top_indices<T: Copy + Into<f64>>(values: &[T], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let by_value = |a: &usize, b: &usize| {
        values[*b]
            .into()
            .total_cmp(&values[*a].into())
            .then(a.cmp(b))
    };
    if count < idx.len() {
        idx.select_nth_unstable_by(count, by_value);
        idx.truncate(count);
    }
    idx.sort_unstable_by(by_value);
    idx
}

/// The `count` samples on which `feature` fires hardest, strongest first.
pub fn top_activating_samples(fm: &FeatureMatrix, feature: usize, count: usize) -> Result<Vec<usize>> {
    if feature >= fm.n_features() {
        return Err(Error::invalid(format!(
            "feature {feature} out of range for {} features",
            fm.n_features()
        )));
    }
    if count > fm.n_samples() {
        return Err(Error::invalid(format!(
            "asked for {count} samples but only {} exist",
            fm.n_samples()
        )));
    }
    Ok(top_indices(&fm.data.column(feature), count))
}

/// Size of the intersection of two index sets.
pub fn overlap_count(a: &[usize], b: &[usize]) -> usize {
    let a: HashSet<_> = a.iter().collect();
    b.iter().collect::<HashSet<_>>().intersection(&a).count()
}

/// Which side of the comparison a target belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    G,
    H,
}

/// One source-to-target match used by a ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target_id: String,
    pub group: Group,
    pub rho: Vec<f64>,
    pub argmax: Vec<usize>,
}

/// Sharedness scores of every source feature and the top of the ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharednessRanking {
    pub source_id: String,
    pub group_g_ids: Vec<String>,
    pub group_h_ids: Vec<String>,
    pub delta: Vec<f64>,
    pub s: Vec<f64>,
    pub comparisons: Vec<Comparison>,
    pub top_indices: Vec<usize>,
    pub fraction: f64,
}

impl SharednessRanking {
    /// Correlates `src` with every member of both groups and ranks its
    /// features by group sharedness.
    pub fn build(
        src: &FeatureMatrix,
        group_g: &[FeatureMatrix],
        group_h: &[FeatureMatrix],
        fraction: f64,
        cfg: &TileConfig,
    ) -> Result<Self> {
        let sp = Prepared::new(src)?;
        let mut comparisons = Vec::with_capacity(group_g.len() + group_h.len());
        for (group, members) in [(Group::G, group_g), (Group::H, group_h)] {
            for t in members {
                let (rho, argmax) = best_matches(&sp, &Prepared::new(t)?, cfg)?;
                comparisons.push(Comparison {
                    target_id: t.label(),
                    group,
                    rho,
                    argmax,
                });
            }
        }
        let side = |g: Group| -> Vec<&[f64]> {
            comparisons
                .iter()
                .filter(|c| c.group == g)
                .map(|c| c.rho.as_slice())
                .collect()
        };
        let delta = generalized_cs(&src.s_vector, &side(Group::G), &side(Group::H))?;
        Self::assemble(src, group_g, group_h, delta, comparisons, fraction)
    }

    /// Pairwise ranking of `src` toward `a` rather than `b`, using the
    /// factored form `S (ρ_A − ρ_B)(ρ_A + ρ_B)`.
    pub fn pairwise(
        src: &FeatureMatrix,
        a: &FeatureMatrix,
        b: &FeatureMatrix,
        fraction: f64,
        cfg: &TileConfig,
    ) -> Result<Self> {
        let sp = Prepared::new(src)?;
        let (rho_a, argmax_a) = best_matches(&sp, &Prepared::new(a)?, cfg)?;
        let (rho_b, argmax_b) = best_matches(&sp, &Prepared::new(b)?, cfg)?;
        let delta = comparative_sharedness(&src.s_vector, &rho_a, &rho_b)?;
        let comparisons = vec![
            Comparison {
                target_id: a.label(),
                group: Group::G,
                rho: rho_a,
                argmax: argmax_a,
            },
            Comparison {
                target_id: b.label(),
                group: Group::H,
                rho: rho_b,
                argmax: argmax_b,
            },
        ];
        Self::assemble(
            src,
            std::slice::from_ref(a),
            std::slice::from_ref(b),
            delta,
            comparisons,
            fraction,
        )
    }

    fn assemble(
        src: &FeatureMatrix,
        group_g: &[FeatureMatrix],
        group_h: &[FeatureMatrix],
        delta: Vec<f64>,
        comparisons: Vec<Comparison>,
        fraction: f64,
    ) -> Result<Self> {
        let top_indices = top_fraction(&delta, fraction)?;
        Ok(Self {
            source_id: src.label(),
            group_g_ids: group_g.iter().map(FeatureMatrix::label).collect(),
            group_h_ids: group_h.iter().map(FeatureMatrix::label).collect(),
            delta,
            s: src.s_vector.clone(),
            comparisons,
            top_indices,
            fraction,
        })
    }

    fn rho_bound(&self, i: usize, group: Group) -> f64 {
        let vals = self.comparisons.iter().filter(|c| c.group == group).map(|c| c.rho[i]);
        match group {
            Group::G => vals.fold(f64::INFINITY, f64::min),
            Group::H => vals.fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SMode;
    use crate::linalg::DenseMatrix;

    #[test]
    fn pairwise_examples() {
        let d = comparative_sharedness(&[2.0, 1.0, 0.0], &[0.8, 0.4, 0.9], &[0.5, 0.4, 0.1]).unwrap();
        assert!((d[0] - 0.78).abs() < 1e-12);
        assert_eq!(&d[1..], &[0.0, 0.0]);
        assert!(comparative_sharedness(&[1.0], &[0.5, 0.2], &[0.1]).is_err());
    }

    #[test]
    fn group_examples() {
        let d = generalized_cs(&[2.0], &[&[0.8], &[0.9]], &[&[0.3], &[0.5]]).unwrap();
        assert!((d[0] - 0.78).abs() < 1e-12);
        assert!(generalized_cs(&[2.0], &[], &[&[0.3]]).is_err());
        let same: &[&[f64]] = &[&[0.2, 0.9], &[0.6, 0.1]];
        assert!(generalized_cs(&[1.0, 3.0], same, same).unwrap().iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn top_fraction_counts_and_ties() {
        assert_eq!(top_fraction(&[3.0, 1.0, 2.0], 1.0).unwrap(), vec![0, 2, 1]);
        assert_eq!(top_fraction(&[1.0; 4], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(top_fraction(&vec![0.5; 8192], 0.01).unwrap().len(), 81);
        assert_eq!(top_fraction(&[1.0, 2.0], 0.01).unwrap(), vec![1]);
        assert_eq!(top_fraction(&vec![0.0; 100], 0.29).unwrap().len(), 29);
        assert!(top_fraction(&[], 0.5).is_err());
        assert!(top_fraction(&[1.0], 0.0).is_err());
    }

    #[test]
    fn top_samples() {
        let fm = FeatureMatrix::from_matrix(
            DenseMatrix::from_rows(&[[0.1f32], [5.0], [3.0]]).unwrap(),
            "m",
            0,
            SMode::Raw,
        )
        .unwrap();
        assert_eq!(top_activating_samples(&fm, 0, 2).unwrap(), vec![1, 2]);
        assert_eq!(top_activating_samples(&fm, 0, 3).unwrap(), vec![1, 2, 0]);
        assert!(top_activating_samples(&fm, 1, 1).is_err());
        assert!(top_activating_samples(&fm, 0, 4).is_err());
    }

    #[test]
    fn overlaps() {
        let a: Vec<usize> = (0..81).collect();
        assert_eq!(overlap_count(&a, &a), 81);
        assert_eq!(overlap_count(&[1, 2], &[3, 4]), 0);
        assert_eq!(overlap_count(&[1, 2, 5], &[5, 1, 9]), 2);
    }
}
