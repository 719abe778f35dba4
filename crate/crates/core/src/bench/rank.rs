use std::fmt;

use serde::{Deserialize, Serialize};

use crate::metrics::ValidationReport;
use crate::{Error, Result};

/// The five ranked validation measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Nmi,
    Ari,
    Nmse,
    Dbi,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Accuracy, Metric::Nmi, Metric::Ari, Metric::Nmse, Metric::Dbi];

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Accuracy | Metric::Nmi | Metric::Ari)
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Accuracy => "Accuracy",
            Metric::Nmi => "NMI",
            Metric::Ari => "ARI",
            Metric::Nmse => "nMSE",
            Metric::Dbi => "DBI",
        }
    }

    pub fn of(self, r: &ValidationReport) -> f64 {
        match self {
            Metric::Accuracy => r.accuracy,
            Metric::Nmi => r.nmi,
            Metric::Ari => r.ari,
            Metric::Nmse => r.nmse,
            Metric::Dbi => r.dbi,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parameter(format!("unknown metric '{s}'")))
    }
}

/// Competition ranks: `1 + #{strictly better}`. Missing scores stay unranked
/// and do not count as better than anything.
pub fn competition_ranks(values: &[Option<f64>], higher_is_better: bool) -> Vec<Option<usize>> {
    values
        .iter()
        .map(|v| {
            v.map(|a| {
                1 + values
                    .iter()
                    .flatten()
                    .filter(|&&b| if higher_is_better { b > a } else { b < a })
                    .count()
            })
        })
        .collect()
}

/// Metric × algorithm rank grid with per-algorithm mean ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub metrics: Vec<String>,
    pub algorithms: Vec<String>,
    /// `ranks[m][a]`; `None` marks a gap (missing score).
    pub ranks: Vec<Vec<Option<usize>>>,
    /// Mean over the available ranks of each algorithm.
    pub averages: Vec<Option<f64>>,
    /// True for algorithms whose average skips at least one gap.
    pub gaps: Vec<bool>,
}

impl RankTable {
    fn assemble(metrics: Vec<String>, algorithms: Vec<String>, ranks: Vec<Vec<Option<usize>>>) -> Self {
        let a = algorithms.len();
        let mut averages = Vec::with_capacity(a);
        let mut gaps = Vec::with_capacity(a);
        for j in 0..a {
            let present: Vec<usize> = ranks.iter().filter_map(|row| row[j]).collect();
            gaps.push(present.len() < ranks.len());
            averages.push(
                (!present.is_empty()).then(|| present.iter().sum::<usize>() as f64 / present.len() as f64),
            );
        }
        Self {
            metrics,
            algorithms,
            ranks,
            averages,
            gaps,
        }
    }

    /// Builds a table from ranks computed elsewhere (e.g. published tables).
    pub fn from_ranks(metrics: Vec<String>, algorithms: Vec<String>, ranks: Vec<Vec<usize>>) -> Result<Self> {
        let a = algorithms.len();
        if ranks.len() != metrics.len() || ranks.iter().any(|r| r.len() != a) {
            return Err(Error::Structural("rank grid does not match its labels".into()));
        }
        if let Some(bad) = ranks.iter().flatten().find(|&&r| r == 0 || r > a) {
            return Err(Error::Domain(format!("rank {bad} outside 1..={a}")));
        }
        let ranks = ranks.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
        Ok(Self::assemble(metrics, algorithms, ranks))
    }

    /// `Average` row formatted to two decimals.
    pub fn average_labels(&self) -> Vec<String> {
        self.averages
            .iter()
            .map(|a| a.map_or_else(String::new, |v| format!("{v:.2}")))
            .collect()
    }

    /// Header of algorithms, one row per metric, then `Average`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for a in &self.algorithms {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
        for (m, row) in self.metrics.iter().zip(&self.ranks) {
            out.push_str(m);
            for r in row {
                out.push(',');
                if let Some(r) = r {
                    out.push_str(&r.to_string());
                }
            }
            out.push('\n');
        }
        out.push_str("Average");
        for a in self.average_labels() {
            out.push(',');
            out.push_str(&a);
        }
        out.push('\n');
        out
    }
}

/// Ranks algorithms per metric; `scores[m][a]` is algorithm `a` on metric
/// `metrics[m]`, `None` when missing. Non-finite scores count as missing.
pub fn rank_algorithms(algorithms: &[String], metrics: &[Metric], scores: &[Vec<Option<f64>>]) -> Result<RankTable> {
    if algorithms.len() < 2 {
        return Err(Error::Parameter("ranking needs at least two algorithms".into()));
    }
    if scores.len() != metrics.len() || scores.iter().any(|r| r.len() != algorithms.len()) {
        return Err(Error::Structural("score grid does not match its labels".into()));
    }
    let ranks = metrics
        .iter()
        .zip(scores)
        .map(|(m, row)| {
            let row: Vec<Option<f64>> = row.iter().map(|v| v.filter(|x| x.is_finite())).collect();
            competition_ranks(&row, m.higher_is_better())
        })
        .collect();
    Ok(RankTable::assemble(
        metrics.iter().map(|m| m.label().to_string()).collect(),
        algorithms.to_vec(),
        ranks,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ColorBand {
    Green,
    Yellow,
    Red,
}

impl ColorBand {
    pub fn fill(self) -> &'static str {
        match self {
            ColorBand::Green => "#2e9e4f",
            ColorBand::Yellow => "#f2c318",
            ColorBand::Red => "#d63c32",
        }
    }
}

impl fmt::Display for ColorBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorBand::Green => "green",
            ColorBand::Yellow => "yellow",
            ColorBand::Red => "red",
        })
    }
}

/// Green up to 3.332, yellow up to 5.665, red above, after rounding the
/// average half-up to three decimals.
pub fn color_band(average: f64) -> Result<ColorBand> {
    if !(1.0..=8.0).contains(&average) {
        return Err(Error::Domain(format!("average rank {average} outside [1, 8]")));
    }
    // The small bias absorbs binary representation error, e.g. 3.3325·1000.
    let thousandths = (average * 1000.0 + 0.5 + 1e-7).floor() as i64;
    Ok(match thousandths {
        ..=3332 => ColorBand::Green,
        3333..=5665 => ColorBand::Yellow,
        _ => ColorBand::Red,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Winner {
    pub name: String,
    pub tie: bool,
}

/// Lowest value wins; on a tie the lexicographically first name wins and
/// `tie` is set.
pub fn winner<S: AsRef<str>>(entries: &[(S, f64)]) -> Result<Winner> {
    let best = entries
        .iter()
        .map(|e| e.1)
        .filter(|v| !v.is_nan())
        .fold(f64::INFINITY, f64::min);
    let mut names: Vec<&str> = entries.iter().filter(|e| e.1 == best).map(|e| e.0.as_ref()).collect();
    if names.is_empty() {
        return Err(Error::Domain("no measured algorithm".into()));
    }
    names.sort_unstable();
    Ok(Winner {
        name: names[0].to_string(),
        tie: names.len() > 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("a{i}")).collect()
    }

    #[test]
    fn published_average() {
        let t = RankTable::from_ranks(
            Metric::ALL.iter().map(|m| m.label().to_string()).collect(),
            names(8),
            vec![
                vec![1, 2, 6, 3, 7, 8, 5, 4],
                vec![2, 4, 8, 1, 7, 6, 5, 3],
                vec![1, 6, 2, 4, 3, 7, 6, 5],
                vec![1, 3, 2, 7, 3, 8, 5, 6],
                vec![1, 6, 5, 2, 7, 8, 4, 3],
            ],
        )
        .unwrap();
        assert_eq!(
            t.average_labels(),
            ["1.20", "4.20", "4.60", "3.40", "5.40", "7.40", "5.00", "4.20"]
        );
        assert!(t.to_csv().ends_with("Average,1.20,4.20,4.60,3.40,5.40,7.40,5.00,4.20\n"));
    }

    #[test]
    fn ties_share_rank() {
        let t = rank_algorithms(&names(2), &[Metric::Accuracy], &[vec![Some(0.5), Some(0.5)]]).unwrap();
        assert_eq!(t.ranks[0], vec![Some(1), Some(1)]);
        let r = competition_ranks(&[Some(3.0), Some(1.0), Some(1.0), Some(2.0)], false);
        assert_eq!(r, vec![Some(4), Some(1), Some(1), Some(3)]);
    }

    #[test]
    fn gaps_are_flagged() {
        let t = rank_algorithms(
            &names(3),
            &[Metric::Accuracy, Metric::Dbi],
            &[vec![Some(0.9), None, Some(0.5)], vec![Some(1.0), Some(0.2), Some(f64::NAN)]],
        )
        .unwrap();
        assert_eq!(t.ranks[0], vec![Some(1), None, Some(2)]);
        assert_eq!(t.ranks[1], vec![Some(2), Some(1), None]);
        assert_eq!(t.gaps, vec![false, true, true]);
        assert_eq!(t.averages[0], Some(1.5));
    }

    #[test]
    fn needs_two_algorithms() {
        assert!(rank_algorithms(&names(1), &[Metric::Ari], &[vec![Some(1.0)]]).is_err());
    }

    #[test]
    fn bands() {
        assert_eq!(color_band(1.12).unwrap(), ColorBand::Green);
        assert_eq!(color_band(3.332).unwrap(), ColorBand::Green);
        assert_eq!(color_band(3.3325).unwrap(), ColorBand::Yellow);
        assert_eq!(color_band(3.333).unwrap(), ColorBand::Yellow);
        assert_eq!(color_band(5.44).unwrap(), ColorBand::Yellow);
        assert_eq!(color_band(5.665).unwrap(), ColorBand::Yellow);
        assert_eq!(color_band(5.6655).unwrap(), ColorBand::Red);
        assert_eq!(color_band(7.08).unwrap(), ColorBand::Red);
        assert_eq!(color_band(8.0).unwrap(), ColorBand::Red);
        assert!(color_band(0.99).is_err());
        assert!(color_band(8.01).is_err());
        assert!(color_band(f64::NAN).is_err());
    }

    #[test]
    fn winner_rules() {
        let kidney_memory = [
            ("iECA*", 18.177),
            ("ECA*", 21.661),
            ("GENCLUST++", 29.384),
            ("Deep KNN", 17.987),
            ("LVQ", 23.817),
            ("SVM", 24.981),
            ("ANN", 19.384),
            ("KNN", 18.341),
        ];
        assert_eq!(winner(&kidney_memory).unwrap().name, "Deep KNN");
        assert_eq!(winner(&[("solo", 3.0)]).unwrap(), Winner { name: "solo".into(), tie: false });
        assert_eq!(winner(&[("b", 1.0), ("a", 1.0)]).unwrap(), Winner { name: "a".into(), tie: true });
        assert!(winner::<&str>(&[]).is_err());
    }

    #[test]
    fn metric_parsing() {
        assert_eq!(Metric::parse("nmse").unwrap(), Metric::Nmse);
        assert_eq!(Metric::parse(" ARI ").unwrap(), Metric::Ari);
        assert!(Metric::parse("f1").is_err());
    }

    proptest! {
        #[test]
        fn competition_rank_properties(values in prop::collection::vec(0u8..6, 2..9), higher in any::<bool>()) {
            let v: Vec<Option<f64>> = values.iter().map(|&x| Some(x as f64)).collect();
            let r: Vec<usize> = competition_ranks(&v, higher).into_iter().flatten().collect();
            prop_assert!(r.contains(&1));
            prop_assert!(r.iter().all(|&x| x >= 1 && x <= v.len()));
            for (i, a) in values.iter().enumerate() {
                let better = values.iter().filter(|&&b| if higher { b > *a } else { b < *a }).count();
                prop_assert_eq!(r[i], 1 + better);
            }
        }

        #[test]
        fn bands_are_monotone(a in 1.0f64..8.0, b in 1.0f64..8.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(color_band(lo).unwrap() <= color_band(hi).unwrap());
        }
    }
}
