//! Evaluation utilities: pairwise win/tie/loss tabulation from rankings,
//! Fleiss' kappa for multi-rater agreement, and winner-vs-loser feature gap
//! tables.

use crate::error::{Error, Result};
use crate::records::PreferencePair;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// One rater's ranking of systems for one context. `ranking[0]` holds the
/// best systems; ties share a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub context_id: String,
    pub rater_id: String,
    pub ranking: Vec<Vec<String>>,
}

impl RankingRecord {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for group in &self.ranking {
            if group.is_empty() {
                return Err(Error::Validation(format!(
                    "record '{}': empty rank group",
                    self.context_id
                )));
            }
            for system in group {
                if !seen.insert(system.as_str()) {
                    return Err(Error::Validation(format!(
                        "record '{}': system '{system}' appears more than once",
                        self.context_id
                    )));
                }
            }
        }
        if seen.is_empty() {
            return Err(Error::Validation(format!(
                "record '{}': empty ranking",
                self.context_id
            )));
        }
        Ok(())
    }

    fn rank_map(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        for (rank, group) in self.ranking.iter().enumerate() {
            for system in group {
                map.insert(system.as_str(), rank);
            }
        }
        map
    }

    fn system_set(&self) -> BTreeSet<&str> {
        self.ranking.iter().flatten().map(String::as_str).collect()
    }
}

/// Win/tie/loss fractions for every ordered system pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WtlMatrix {
    /// Systems in lexicographic order; indexes the cell grid.
    pub systems: Vec<String>,
    /// Row-major `(win, tie, loss)` fractions; `None` on the diagonal.
    pub cells: Vec<Option<(f64, f64, f64)>>,
}

impl WtlMatrix {
    pub fn cell(&self, row: &str, col: &str) -> Option<(f64, f64, f64)> {
        let r = self.systems.iter().position(|s| s == row)?;
        let c = self.systems.iter().position(|s| s == col)?;
        self.cells[r * self.systems.len() + c]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("system_a,system_b,win,tie,loss\n");
        let n = self.systems.len();
        for r in 0..n {
            for c in 0..n {
                if let Some((w, t, l)) = self.cells[r * n + c] {
                    out.push_str(&format!(
                        "{},{},{w},{t},{l}\n",
                        self.systems[r], self.systems[c]
                    ));
                }
            }
        }
        out
    }

    /// Aligned plain-text table with `win/tie/loss` cells.
    pub fn to_text_table(&self) -> String {
        let n = self.systems.len();
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec![String::new()];
        header.extend(self.systems.iter().cloned());
        rows.push(header);
        for r in 0..n {
            let mut row = vec![self.systems[r].clone()];
            for c in 0..n {
                row.push(match self.cells[r * n + c] {
                    Some((w, t, l)) => format!("{w:.2}/{t:.2}/{l:.2}"),
                    None => "-".to_string(),
                });
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..=n)
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in rows {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, cell)| format!("{:width$}", cell, width = widths[i]))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Tabulates pairwise win/tie/loss fractions over ranking records.
///
/// Every record must rank exactly the same system set. For the ordered pair
/// (A, B), `win` is the fraction of records placing A strictly above B.
pub fn pairwise_wtl(records: &[RankingRecord]) -> Result<WtlMatrix> {
    if records.is_empty() {
        return Err(Error::Validation("no ranking records".into()));
    }
    for r in records {
        r.validate()?;
    }
    let system_set = records[0].system_set();
    for r in &records[1..] {
        if r.system_set() != system_set {
            return Err(Error::Validation(format!(
                "record '{}' (rater '{}') ranks a different system set",
                r.context_id, r.rater_id
            )));
        }
    }
    let systems: Vec<String> = system_set.iter().map(|s| s.to_string()).collect();
    let n = systems.len();
    let mut counts = vec![(0u64, 0u64, 0u64); n * n];
    for record in records {
        let ranks = record.rank_map();
        for (a, sys_a) in systems.iter().enumerate() {
            for (b, sys_b) in systems.iter().enumerate() {
                if a == b {
                    continue;
                }
                let ra = ranks[sys_a.as_str()];
                let rb = ranks[sys_b.as_str()];
                let cell = &mut counts[a * n + b];
                if ra < rb {
                    cell.0 += 1;
                } else if ra == rb {
                    cell.1 += 1;
                } else {
                    cell.2 += 1;
                }
            }
        }
    }
    let total = records.len() as f64;
    let cells = (0..n * n)
        .map(|i| {
            if i / n == i % n {
                None
            } else {
                let (w, t, l) = counts[i];
                Some((w as f64 / total, t as f64 / total, l as f64 / total))
            }
        })
        .collect();
    Ok(WtlMatrix { systems, cells })
}

/// Fleiss' kappa over an item-by-category count table with a constant
/// number of raters per item.
///
/// `kappa = (P_bar - P_e) / (1 - P_e)` with the usual per-item agreement
/// and chance-agreement terms. Perfect agreement with degenerate chance
/// agreement returns 1.0.
pub fn fleiss_kappa(table: &[Vec<u64>]) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::Validation("empty table".into()));
    }
    let categories = table[0].len();
    if categories < 2 {
        return Err(Error::Validation("need at least 2 categories".into()));
    }
    if table.iter().any(|row| row.len() != categories) {
        return Err(Error::Validation("ragged category counts".into()));
    }
    let raters: u64 = table[0].iter().sum();
    if raters < 2 {
        return Err(Error::Validation("need at least 2 raters per item".into()));
    }
    for (i, row) in table.iter().enumerate() {
        if row.iter().sum::<u64>() != raters {
            return Err(Error::Validation(format!(
                "row {i} sums to {}, expected {raters} raters per item",
                row.iter().sum::<u64>()
            )));
        }
    }
    let n_items = table.len() as f64;
    let n = raters as f64;
    let total = n_items * n;
    let mut p = vec![0.0; categories];
    for row in table {
        for (j, &c) in row.iter().enumerate() {
            p[j] += c as f64;
        }
    }
    for pj in &mut p {
        *pj /= total;
    }
    let p_bar: f64 = table
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c as f64) * (c as f64)).sum();
            (sq - n) / (n * (n - 1.0))
        })
        .sum::<f64>()
        / n_items;
    let p_e: f64 = p.iter().map(|pj| pj * pj).sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        // All mass in one category: observed agreement is necessarily
        // perfect, report full agreement rather than 0/0.
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Per-feature mean over winners and losers of a preference dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGapReport {
    pub winner_mean: Vec<f64>,
    pub loser_mean: Vec<f64>,
}

impl FeatureGapReport {
    pub fn gap(&self) -> Vec<f64> {
        self.winner_mean
            .iter()
            .zip(&self.loser_mean)
            .map(|(w, l)| w - l)
            .collect()
    }

    pub fn to_csv(&self, feature_names: &[String]) -> String {
        let mut out = String::from("feature,winner_mean,loser_mean,gap\n");
        for (i, name) in feature_names.iter().enumerate() {
            out.push_str(&format!(
                "{name},{},{},{}\n",
                self.winner_mean[i],
                self.loser_mean[i],
                self.winner_mean[i] - self.loser_mean[i]
            ));
        }
        out
    }
}

/// Arithmetic feature means over winner and loser sides separately.
pub fn feature_gap_report(dataset: &[PreferencePair]) -> Result<FeatureGapReport> {
    if dataset.is_empty() {
        return Err(Error::Validation("empty dataset".into()));
    }
    let dim = dataset[0].winner_features.len();
    let mut winner_mean = vec![0.0; dim];
    let mut loser_mean = vec![0.0; dim];
    for pair in dataset {
        for (acc, &v) in winner_mean.iter_mut().zip(pair.winner_features.values()) {
            *acc += v;
        }
        for (acc, &v) in loser_mean.iter_mut().zip(pair.loser_features.values()) {
            *acc += v;
        }
    }
    let n = dataset.len() as f64;
    for v in winner_mean.iter_mut().chain(loser_mean.iter_mut()) {
        *v /= n;
    }
    Ok(FeatureGapReport {
        winner_mean,
        loser_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::CandidateRef;
    use crate::schema::FeatureVector;

    fn record(context: &str, rater: &str, ranking: &[&[&str]]) -> RankingRecord {
        RankingRecord {
            context_id: context.into(),
            rater_id: rater.into(),
            ranking: ranking
                .iter()
                .map(|g| g.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    #[test]
    fn always_above_gives_unit_win_fraction() {
        let records: Vec<RankingRecord> = (0..10)
            .map(|i| record(&format!("c{i}"), "r", &[&["A"], &["B"]]))
            .collect();
        let matrix = pairwise_wtl(&records).unwrap();
        assert_eq!(matrix.cell("A", "B"), Some((1.0, 0.0, 0.0)));
        assert_eq!(matrix.cell("B", "A"), Some((0.0, 0.0, 1.0)));
        assert_eq!(matrix.cell("A", "A"), None);
    }

    #[test]
    fn counts_match_direct_tabulation() {
        // 32 records: A above B 18 times, tied 2, below 12.
        let mut records = Vec::new();
        for i in 0..18 {
            records.push(record(&format!("w{i}"), "r", &[&["A"], &["B"]]));
        }
        for i in 0..2 {
            records.push(record(&format!("t{i}"), "r", &[&["A", "B"]]));
        }
        for i in 0..12 {
            records.push(record(&format!("l{i}"), "r", &[&["B"], &["A"]]));
        }
        let matrix = pairwise_wtl(&records).unwrap();
        let (w, t, l) = matrix.cell("A", "B").unwrap();
        assert!((w - 0.5625).abs() < 1e-12);
        assert!((t - 0.0625).abs() < 1e-12);
        assert!((l - 0.375).abs() < 1e-12);
        assert!((w + t + l - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_inconsistent_system_sets() {
        let records = vec![
            record("c0", "r", &[&["A"], &["B"]]),
            record("c1", "r", &[&["A"], &["C"]]),
        ];
        assert!(pairwise_wtl(&records).is_err());
    }

    #[test]
    fn rejects_duplicate_system_in_record() {
        let bad = record("c0", "r", &[&["A"], &["A", "B"]]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn perfect_agreement_kappa_is_one() {
        let table = vec![vec![5, 0, 0], vec![0, 5, 0], vec![5, 0, 0], vec![0, 0, 5]];
        assert!((fleiss_kappa(&table).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chance_level_agreement_kappa_is_zero() {
        // 2 raters, 2 categories, rows (2,0), (0,2), (1,1), (1,1):
        // P_bar = (1 + 1 + 0 + 0)/4 = 0.5, p = (0.5, 0.5), P_e = 0.5,
        // so P_bar = P_e exactly and kappa = 0.
        let table = vec![vec![2, 0], vec![0, 2], vec![1, 1], vec![1, 1]];
        assert!(fleiss_kappa(&table).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kappa_matches_hand_worked_example() {
        // 10 items, 5 raters, 3 categories; exact value 179/554.
        let table = vec![
            vec![5, 0, 0],
            vec![0, 5, 0],
            vec![0, 0, 5],
            vec![4, 1, 0],
            vec![3, 1, 1],
            vec![2, 2, 1],
            vec![1, 3, 1],
            vec![0, 2, 3],
            vec![2, 0, 3],
            vec![1, 1, 3],
        ];
        let kappa = fleiss_kappa(&table).unwrap();
        assert!((kappa - 179.0 / 554.0).abs() < 1e-6, "kappa {kappa}");
    }

    #[test]
    fn kappa_invariant_under_relabeling_and_item_permutation() {
        let table = vec![vec![4, 1, 0], vec![3, 1, 1], vec![0, 2, 3], vec![2, 0, 3]];
        let base = fleiss_kappa(&table).unwrap();
        // Swap categories 0 and 2.
        let relabeled: Vec<Vec<u64>> = table.iter().map(|r| vec![r[2], r[1], r[0]]).collect();
        assert!((fleiss_kappa(&relabeled).unwrap() - base).abs() < 1e-12);
        // Permute items.
        let mut shuffled = table.clone();
        shuffled.reverse();
        assert!((fleiss_kappa(&shuffled).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn kappa_rejects_bad_tables() {
        assert!(fleiss_kappa(&[]).is_err());
        assert!(fleiss_kappa(&[vec![5], vec![5]]).is_err()); // single category
        assert!(fleiss_kappa(&[vec![3, 2], vec![2, 2]]).is_err()); // unequal sums
        assert!(fleiss_kappa(&[vec![1, 0], vec![0, 1]]).is_err()); // 1 rater
    }

    fn pair(w: Vec<f64>, l: Vec<f64>) -> PreferencePair {
        PreferencePair {
            context_id: "c".into(),
            winner: CandidateRef::new("w"),
            loser: CandidateRef::new("l"),
            winner_features: FeatureVector::new(w),
            loser_features: FeatureVector::new(l),
            annotator_id: None,
        }
    }

    #[test]
    fn single_pair_gap_report_echoes_the_pair() {
        let report = feature_gap_report(&[pair(vec![4.0; 7], vec![2.0; 7])]).unwrap();
        assert_eq!(report.winner_mean, vec![4.0; 7]);
        assert_eq!(report.loser_mean, vec![2.0; 7]);
        assert_eq!(report.gap(), vec![2.0; 7]);
    }

    #[test]
    fn dominating_winners_show_positive_gap_everywhere() {
        let dataset = vec![
            pair(vec![4.0, 4.2, 4.4, 4.1, 4.3, 4.0, 4.8], vec![2.0; 7]),
            pair(vec![3.5, 3.9, 3.6, 3.8, 4.0, 3.7, 4.1], vec![3.0; 7]),
        ];
        let report = feature_gap_report(&dataset).unwrap();
        for g in report.gap() {
            assert!(g > 0.0);
        }
    }

    #[test]
    fn gap_report_invariant_under_dataset_permutation() {
        let mut dataset = vec![
            pair(vec![4.0; 7], vec![2.0; 7]),
            pair(vec![3.0; 7], vec![1.0; 7]),
            pair(vec![5.0; 7], vec![0.0; 7]),
        ];
        let a = feature_gap_report(&dataset).unwrap();
        dataset.reverse();
        let b = feature_gap_report(&dataset).unwrap();
        for (x, y) in a.winner_mean.iter().zip(&b.winner_mean) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
