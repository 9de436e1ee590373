//! Confusion matrices and the scores derived from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::KanoLabel;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no items to evaluate")]
    Empty,
    #[error("correlation undefined: `{0}` is constant")]
    ConstantVariable(&'static str),
}

/// 4x4 counts indexed `[true][predicted]` in label-code order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; KanoLabel::COUNT]; KanoLabel::COUNT],
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: KanoLabel, predicted: KanoLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..KanoLabel::COUNT).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(
    truth: &[KanoLabel],
    predicted: &[KanoLabel],
) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut m = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        m.add(t, p);
    }
    Ok(m)
}

/// One-vs-rest scores of a single label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a zero denominator forced one of the scores to 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub accuracy: f64,
    pub per_label: [LabelScores; KanoLabel::COUNT],
}

impl ClassScores {
    pub fn label(&self, label: KanoLabel) -> &LabelScores {
        &self.per_label[label.index()]
    }

    /// Element-wise arithmetic mean; a label is flagged degenerate when any
    /// input flags it. Returns `None` for an empty slice.
    pub fn mean(runs: &[ClassScores]) -> Option<ClassScores> {
        if runs.is_empty() {
            return None;
        }
        let mut out = ClassScores {
            accuracy: mean_of(runs.iter().map(|r| r.accuracy)),
            ..ClassScores::default()
        };
        for (i, slot) in out.per_label.iter_mut().enumerate() {
            *slot = LabelScores {
                precision: mean_of(runs.iter().map(|r| r.per_label[i].precision)),
                recall: mean_of(runs.iter().map(|r| r.per_label[i].recall)),
                f1: mean_of(runs.iter().map(|r| r.per_label[i].f1)),
                degenerate: runs.iter().any(|r| r.per_label[i].degenerate),
            };
        }
        Some(out)
    }

    pub fn csv_header() -> Vec<String> {
        let mut cols = vec!["classifier".to_string(), "accuracy".to_string()];
        for label in KanoLabel::ALL {
            for metric in ["precision", "recall", "f1"] {
                cols.push(format!("{}_{metric}", label.name()));
            }
        }
        cols
    }

    /// Values in [`ClassScores::csv_header`] order, formatted with full
    /// round-trip precision.
    pub fn csv_record(&self, classifier: &str) -> Vec<String> {
        let mut row = vec![classifier.to_string(), self.accuracy.to_string()];
        for s in &self.per_label {
            row.extend([s.precision, s.recall, s.f1].iter().map(f64::to_string));
        }
        row
    }
}

/// Arithmetic mean, clamped to the inputs' range so rounding cannot push it
/// outside `[min, max]`.
pub fn mean_of(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let (lo, hi) = values
        .clone()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    (values.sum::<f64>() / n).clamp(lo, hi)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Accuracy plus one-vs-rest precision, recall and F1 per label. Zero
/// denominators yield 0 and set the label's `degenerate` flag.
pub fn scores(m: &ConfusionMatrix) -> ClassScores {
    let total = m.total();
    let mut out = ClassScores {
        accuracy: ratio(m.correct(), total).unwrap_or(0.0),
        ..ClassScores::default()
    };
    for (k, slot) in out.per_label.iter_mut().enumerate() {
        let tp = m.counts[k][k];
        let predicted: u64 = (0..KanoLabel::COUNT).map(|t| m.counts[t][k]).sum();
        let actual: u64 = m.counts[k].iter().sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let p = precision.unwrap_or(0.0);
        let r = recall.unwrap_or(0.0);
        *slot = LabelScores {
            precision: p,
            recall: r,
            f1: if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            },
            degenerate: precision.is_none() || recall.is_none(),
        };
    }
    out
}

/// Cohen's kappa between two raters. Defined as 1 when both raters use one
/// and the same label throughout.
pub fn cohens_kappa(a: &[KanoLabel], b: &[KanoLabel]) -> Result<f64, MetricsError> {
    let m = confusion(a, b)?;
    let n = m.total() as f64;
    let p_o = m.correct() as f64 / n;
    let p_e: f64 = (0..KanoLabel::COUNT)
        .map(|k| {
            let row: u64 = m.counts[k].iter().sum();
            let col: u64 = (0..KanoLabel::COUNT).map(|t| m.counts[t][k]).sum();
            (row as f64 / n) * (col as f64 / n)
        })
        .sum();
    if p_e == 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Misclassification and initial-disagreement indicators of one review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryPair {
    pub mis: bool,
    pub diff: bool,
}

/// Phi coefficient of the 2x2 table of `(mis, diff)`.
pub fn phi(pairs: &[BinaryPair]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut n = [[0u64; 2]; 2];
    for p in pairs {
        n[usize::from(p.mis)][usize::from(p.diff)] += 1;
    }
    let mis1 = n[1][0] + n[1][1];
    let mis0 = n[0][0] + n[0][1];
    let diff1 = n[0][1] + n[1][1];
    let diff0 = n[0][0] + n[1][0];
    if mis1 == 0 || mis0 == 0 {
        return Err(MetricsError::ConstantVariable("mis"));
    }
    if diff1 == 0 || diff0 == 0 {
        return Err(MetricsError::ConstantVariable("diff"));
    }
    let num = n[1][1] as f64 * n[0][0] as f64 - n[1][0] as f64 * n[0][1] as f64;
    let den = (mis1 as f64 * mis0 as f64 * diff1 as f64 * diff0 as f64).sqrt();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use KanoLabel::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let t = [Basic, Performance, Delighter, Irrelevant, Basic];
        let m = confusion(&t, &t).unwrap();
        assert_eq!(m.correct(), 5);
        let s = scores(&m);
        assert_eq!(s.accuracy, 1.0);
        for l in s.per_label {
            assert_eq!(
                (l.precision, l.recall, l.f1, l.degenerate),
                (1.0, 1.0, 1.0, false)
            );
        }
    }

    #[test]
    fn constant_prediction_fills_one_column() {
        let t = [Basic, Performance, Delighter, Irrelevant, Irrelevant];
        let m = confusion(&t, &[Basic; 5]).unwrap();
        for row in m.counts {
            assert_eq!(row[1] + row[2] + row[3], 0);
        }
        assert_eq!(m.total(), 5);
    }

    #[test]
    fn length_mismatch_and_empty() {
        assert_eq!(
            confusion(&[Basic], &[]),
            Err(MetricsError::LengthMismatch(1, 0))
        );
        assert_eq!(confusion(&[], &[]), Err(MetricsError::Empty));
    }

    #[test]
    fn two_class_block_scores() {
        let mut m = ConfusionMatrix::default();
        m.counts[0] = [5, 1, 0, 0];
        m.counts[1] = [2, 4, 0, 0];
        let s = scores(&m);
        let b = s.label(Basic);
        assert!((b.precision - 5.0 / 7.0).abs() < 1e-15);
        assert!((b.recall - 5.0 / 6.0).abs() < 1e-15);
        assert!((b.f1 - 10.0 / 13.0).abs() < 1e-15);
        let d = s.label(Delighter);
        assert_eq!((d.precision, d.recall, d.f1), (0.0, 0.0, 0.0));
        assert!(d.degenerate);
        assert!(!b.degenerate);
    }

    #[test]
    fn kappa_identical_lists() {
        let a = [Basic, Delighter, Delighter, Irrelevant];
        assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
        assert_eq!(cohens_kappa(&[Basic; 3], &[Basic; 3]).unwrap(), 1.0);
    }

    #[test]
    fn phi_extremes_and_errors() {
        let same: Vec<BinaryPair> = [(true, true), (false, false), (true, true)]
            .iter()
            .map(|&(mis, diff)| BinaryPair { mis, diff })
            .collect();
        assert!((phi(&same).unwrap() - 1.0).abs() < 1e-15);
        let opposite: Vec<BinaryPair> = same
            .iter()
            .map(|p| BinaryPair {
                mis: p.mis,
                diff: !p.diff,
            })
            .collect();
        assert!((phi(&opposite).unwrap() + 1.0).abs() < 1e-15);
        let constant = [
            BinaryPair {
                mis: true,
                diff: false,
            },
            BinaryPair {
                mis: true,
                diff: true,
            },
        ];
        assert_eq!(phi(&constant), Err(MetricsError::ConstantVariable("mis")));
        assert_eq!(phi(&[]), Err(MetricsError::Empty));
    }

    #[test]
    fn csv_layout() {
        let header = ClassScores::csv_header();
        assert_eq!(header.len(), 14);
        assert_eq!(header[2], "basic_precision");
        assert_eq!(header[13], "irrelevant_f1");
        assert_eq!(ClassScores::default().csv_record("x").len(), 14);
    }

    #[test]
    fn mean_of_runs() {
        let a = ClassScores {
            accuracy: 0.5,
            ..Default::default()
        };
        let mut b = ClassScores {
            accuracy: 0.7,
            ..Default::default()
        };
        b.per_label[3].degenerate = true;
        let m = ClassScores::mean(&[a, b]).unwrap();
        assert!((m.accuracy - 0.6).abs() < 1e-15);
        assert!(m.per_label[3].degenerate);
        assert!(ClassScores::mean(&[]).is_none());
    }
}
