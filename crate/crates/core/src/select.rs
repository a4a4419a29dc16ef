//! Feature ranking by tree-ensemble impurity importance and projection onto
//! the top-k columns.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::LabeledDataset;
use crate::trees::{fit_forest, impurity_importances, ForestConfig};

/// One ranked feature: dataset column index, name, normalized importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub importance: f64,
    pub index: usize,
}

/// Features in descending importance order (ties broken by ascending column
/// index), with the forest configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<RankedFeature>,
    pub config: ForestConfig,
}

/// Names kept by a selection, in ranking order, with their original column
/// indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub names: Vec<String>,
    pub indices: Vec<usize>,
}

/// Rank features by fitting an ensemble (extra-trees configuration by
/// convention) and normalizing its impurity importances. Deterministic given
/// `config.seed`.
pub fn rank_features(data: &LabeledDataset, config: &ForestConfig) -> Result<ImportanceRanking> {
    if data.n_rows() < 2 {
        return Err(Error::Argument("need at least 2 rows to rank features".into()));
    }
    let present = data.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::Argument(
            "no discriminative signal: fewer than 2 labels present".into(),
        ));
    }
    let forest = fit_forest(data, config)?;
    let importances = impurity_importances(&forest)?;
    let mut entries: Vec<RankedFeature> = importances
        .into_iter()
        .enumerate()
        .map(|(index, importance)| RankedFeature {
            name: data.feature_names[index].clone(),
            importance,
            index,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then(a.index.cmp(&b.index))
    });
    Ok(ImportanceRanking {
        entries,
        config: *config,
    })
}

/// First `k` entries of the ranking, in ranking order.
pub fn select_top_k(ranking: &ImportanceRanking, k: usize) -> Result<FeatureMask> {
    if k == 0 || k > ranking.entries.len() {
        return Err(Error::Argument(format!(
            "k = {k} out of range for a ranking of {} features",
            ranking.entries.len()
        )));
    }
    let kept = &ranking.entries[..k];
    Ok(FeatureMask {
        names: kept.iter().map(|e| e.name.clone()).collect(),
        indices: kept.iter().map(|e| e.index).collect(),
    })
}

/// Restrict the feature matrix to the mask's columns in mask order; labels
/// and row order are unchanged.
pub fn project(data: &LabeledDataset, mask: &FeatureMask) -> Result<LabeledDataset> {
    let mut columns = Vec::with_capacity(mask.names.len());
    for name in &mask.names {
        match data.feature_names.iter().position(|n| n == name) {
            Some(c) => columns.push(c),
            None => {
                return Err(Error::Schema(format!(
                    "feature '{name}' not present in dataset"
                )))
            }
        }
    }
    let mut features = Vec::with_capacity(data.n_rows() * columns.len());
    for r in 0..data.n_rows() {
        let row = data.row(r);
        for &c in &columns {
            features.push(row[c]);
        }
    }
    LabeledDataset::from_parts(
        mask.names.clone(),
        features,
        data.labels().to_vec(),
        data.label_dict.clone(),
        data.provenance.clone(),
    )
}

/// Two-column CSV export: `name,importance`.
pub fn write_ranking_csv<W: Write>(ranking: &ImportanceRanking, mut w: W) -> Result<()> {
    writeln!(w, "name,importance").map_err(|e| Error::io("<ranking csv>", e))?;
    for entry in &ranking.entries {
        writeln!(w, "{},{}", entry.name, entry.importance)
            .map_err(|e| Error::io("<ranking csv>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::LabelDictionary;
    use crate::trees::tests::dataset;

    fn discriminative_data() -> LabeledDataset {
        // feature 0 separates perfectly, feature 1 is structureless noise
        let n = 60;
        let f0: Vec<f64> = (0..n).map(|i| if i < n / 2 { i as f64 } else { 100.0 + i as f64 }).collect();
        let f1: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64).collect();
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        dataset(&[&f0, &f1], &labels, 2)
    }

    #[test]
    fn perfect_feature_dominates_ranking() {
        let data = discriminative_data();
        let ranking = rank_features(&data, &ForestConfig::extra_trees(17)).unwrap();
        assert_eq!(ranking.entries[0].name, "f0");
        assert!(ranking.entries[0].importance > 0.9);
        let sum: f64 = ranking.entries.iter().map(|e| e.importance).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicated_column_shares_importance_mass() {
        let data = discriminative_data();
        let mut with_dup_cols: Vec<Vec<f64>> = Vec::new();
        for c in 0..data.n_features() {
            with_dup_cols.push((0..data.n_rows()).map(|r| data.value(r, c)).collect());
        }
        with_dup_cols.push(with_dup_cols[0].clone());
        let col_refs: Vec<&[f64]> = with_dup_cols.iter().map(|c| c.as_slice()).collect();
        let with_dup = dataset(&col_refs, data.labels(), 2);

        let base = rank_features(&data, &ForestConfig::extra_trees(17)).unwrap();
        let dup = rank_features(&with_dup, &ForestConfig::extra_trees(17)).unwrap();
        let sum: f64 = dup.entries.iter().map(|e| e.importance).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let base_f0 = base.entries.iter().find(|e| e.name == "f0").unwrap().importance;
        let combined: f64 = dup
            .entries
            .iter()
            .filter(|e| e.index == 0 || e.index == 2)
            .map(|e| e.importance)
            .sum();
        assert!(combined > 0.8 * base_f0, "combined {combined} vs base {base_f0}");
    }

    #[test]
    fn ranking_is_deterministic() {
        let data = discriminative_data();
        let a = rank_features(&data, &ForestConfig::extra_trees(5)).unwrap();
        let b = rank_features(&data, &ForestConfig::extra_trees(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_label_data_is_rejected() {
        let data = dataset(&[&[1.0, 2.0, 3.0]], &[0, 0, 0], 2);
        let err = rank_features(&data, &ForestConfig::extra_trees(0)).unwrap_err();
        assert!(err.to_string().contains("no discriminative signal"));
    }

    #[test]
    fn top_k_selects_prefix_and_nests() {
        let data = discriminative_data();
        let ranking = rank_features(&data, &ForestConfig::extra_trees(2)).unwrap();
        let one = select_top_k(&ranking, 1).unwrap();
        let two = select_top_k(&ranking, 2).unwrap();
        assert_eq!(one.names.len(), 1);
        assert_eq!(two.names.len(), 2);
        assert!(one.names.iter().all(|n| two.names.contains(n)));
        assert!(select_top_k(&ranking, 0).is_err());
        assert!(select_top_k(&ranking, 3).is_err());
    }

    #[test]
    fn full_mask_projection_is_identity() {
        let data = discriminative_data();
        let mask = FeatureMask {
            names: data.feature_names.clone(),
            indices: (0..data.n_features()).collect(),
        };
        let projected = project(&data, &mask).unwrap();
        assert_eq!(projected.features_flat(), data.features_flat());
        assert_eq!(projected.labels(), data.labels());
    }

    #[test]
    fn single_column_projection_keeps_rows() {
        let data = discriminative_data();
        let mask = FeatureMask {
            names: vec!["f1".into()],
            indices: vec![1],
        };
        let projected = project(&data, &mask).unwrap();
        assert_eq!(projected.n_features(), 1);
        assert_eq!(projected.n_rows(), data.n_rows());
        assert_eq!(projected.value(3, 0), data.value(3, 1));
    }

    #[test]
    fn projection_is_idempotent() {
        let data = discriminative_data();
        let mask = FeatureMask {
            names: vec!["f1".into(), "f0".into()],
            indices: vec![1, 0],
        };
        let once = project(&data, &mask).unwrap();
        let twice = project(&once, &mask).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn unknown_mask_name_is_schema_error() {
        let data = discriminative_data();
        let mask = FeatureMask {
            names: vec!["ghost".into()],
            indices: vec![0],
        };
        assert!(matches!(project(&data, &mask), Err(Error::Schema(_))));
    }

    #[test]
    fn ranking_csv_lists_name_and_importance() {
        let data = discriminative_data();
        let ranking = rank_features(&data, &ForestConfig::extra_trees(3)).unwrap();
        let mut buf = Vec::new();
        write_ranking_csv(&ranking, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("name,importance"));
        assert!(lines.next().unwrap().starts_with("f0,"));
    }

    #[test]
    fn dict_used_in_helper_matches() {
        // guard: helper dictionary starts at label A
        let d = LabelDictionary::new(vec!["A".into(), "B".into()]).unwrap();
        assert_eq!(d.resolve("A"), Some(0));
    }
}
