//! Segmentation metrics: confusion matrix, per-class accuracy, overall (OA) and
//! average (AA) accuracy, and the OA/AA gap between two validation strategies.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Coord, LabelMap};

/// K×K counts, rows = true class, columns = predicted class, both 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    rows: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_count: u16) -> Self {
        let k = class_count as usize;
        Self {
            rows: vec![vec![0; k]; k],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch("confusion matrix must be square".into()));
        }
        Ok(Self { rows })
    }

    pub fn class_count(&self) -> u16 {
        self.rows.len() as u16
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn get(&self, truth: u16, predicted: u16) -> u64 {
        self.rows[truth as usize - 1][predicted as usize - 1]
    }

    pub fn record(&mut self, truth: u16, predicted: u16) -> Result<()> {
        let k = self.class_count();
        for (what, c) in [("true", truth), ("predicted", predicted)] {
            if c == 0 || c > k {
                return Err(Error::invalid(format!("{what} class {c} outside 1..={k}")));
            }
        }
        self.rows[truth as usize - 1][predicted as usize - 1] += 1;
        Ok(())
    }

    pub fn support(&self, truth: u16) -> u64 {
        self.rows[truth as usize - 1].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.rows.len()).map(|i| self.rows[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    /// Recall of every class with test support, in percent.
    pub per_class_accuracy: BTreeMap<u16, f64>,
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub classes_absent_from_test: Vec<u16>,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self> {
        let total = confusion.total();
        if total == 0 {
            return Err(Error::invalid("cannot score an empty test set"));
        }
        let mut per_class_accuracy = BTreeMap::new();
        let mut classes_absent_from_test = Vec::new();
        for k in 1..=confusion.class_count() {
            let support = confusion.support(k);
            if support == 0 {
                classes_absent_from_test.push(k);
            } else {
                per_class_accuracy.insert(k, 100.0 * confusion.get(k, k) as f64 / support as f64);
            }
        }
        let overall_accuracy = 100.0 * confusion.trace() as f64 / total as f64;
        let average_accuracy =
            per_class_accuracy.values().sum::<f64>() / per_class_accuracy.len() as f64;
        Ok(Self {
            confusion,
            per_class_accuracy,
            overall_accuracy,
            average_accuracy,
            classes_absent_from_test,
        })
    }

    pub fn test_pixel_count(&self) -> u64 {
        self.confusion.total()
    }
}

/// Scores `predictions`, which must name every test pixel exactly once.
pub fn evaluate(labels: &LabelMap, test_pixels: &[Coord], predictions: &[(Coord, u16)]) -> Result<EvalReport> {
    let mut expected = test_pixels.to_vec();
    expected.sort_unstable();
    let mut got: Vec<Coord> = predictions.iter().map(|(c, _)| *c).collect();
    got.sort_unstable();
    if expected != got {
        return Err(Error::Validation(format!(
            "predictions cover {} pixels but the test set has {} (or they differ)",
            got.len(),
            expected.len()
        )));
    }
    let mut confusion = ConfusionMatrix::new(labels.class_count());
    for &(c, predicted) in predictions {
        labels.dims().check(c)?;
        let truth = labels.get(c);
        if truth == 0 {
            return Err(Error::Validation(format!(
                "test pixel ({}, {}) is unlabeled",
                c.row, c.col
            )));
        }
        confusion.record(truth, predicted)?;
    }
    EvalReport::from_confusion(confusion)
}

/// Mean OA and AA of two sets of runs and their differences `a - b`, in
/// percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub runs_a: usize,
    pub runs_b: usize,
    pub mean_oa_a: f64,
    pub mean_oa_b: f64,
    pub mean_aa_a: f64,
    pub mean_aa_b: f64,
    pub oa_gap: f64,
    pub aa_gap: f64,
}

pub fn gap_analysis(a: &[EvalReport], b: &[EvalReport]) -> Result<GapReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("gap analysis needs at least one report on each side"));
    }
    let mean = |rs: &[EvalReport], f: fn(&EvalReport) -> f64| rs.iter().map(f).sum::<f64>() / rs.len() as f64;
    let (oa_a, oa_b) = (mean(a, |r| r.overall_accuracy), mean(b, |r| r.overall_accuracy));
    let (aa_a, aa_b) = (mean(a, |r| r.average_accuracy), mean(b, |r| r.average_accuracy));
    Ok(GapReport {
        runs_a: a.len(),
        runs_b: b.len(),
        mean_oa_a: oa_a,
        mean_oa_b: oa_b,
        mean_aa_a: aa_a,
        mean_aa_b: aa_b,
        oa_gap: oa_a - oa_b,
        aa_gap: aa_a - aa_b,
    })
}

/// Aligned text table, one row per `(algorithm, fold, report)`: class columns
/// `C1..CK`, then OA and AA, two decimals. Classes without test support print
/// as `---`.
pub fn render_table(rows: &[(&str, &str, &EvalReport)]) -> String {
    let k = rows
        .iter()
        .map(|(_, _, r)| r.confusion.class_count())
        .max()
        .unwrap_or(0);
    let mut header: Vec<String> = vec!["Algorithm".into(), "Fold".into()];
    header.extend((1..=k).map(|c| format!("C{c}")));
    header.push("OA".into());
    header.push("AA".into());

    let mut table: Vec<Vec<String>> = vec![header];
    for (alg, fold, r) in rows {
        let mut line = vec![alg.to_string(), fold.to_string()];
        for c in 1..=k {
            line.push(
                r.per_class_accuracy
                    .get(&c)
                    .map_or_else(|| "---".to_string(), |a| format!("{a:.2}")),
            );
        }
        line.push(format!("{:.2}", r.overall_accuracy));
        line.push(format!("{:.2}", r.average_accuracy));
        table.push(line);
    }

    let widths: Vec<usize> = (0..table[0].len())
        .map(|i| table.iter().map(|l| l.get(i).map_or(0, String::len)).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in &table {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(i, s)| if i < 2 { format!("{s:<w$}", w = widths[i]) } else { format!("{s:>w$}", w = widths[i]) })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
