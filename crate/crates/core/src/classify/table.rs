use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Band, Phase};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("no subjects")]
    Empty,
    #[error("subject {subject} has columns {found:?}, expected {expected:?}")]
    InconsistentColumns { subject: String, expected: Vec<String>, found: Vec<String> },
    #[error("subject {subject} lists {column} twice")]
    DuplicateColumn { subject: String, column: String },
    #[error("subject {subject}: accuracy {value} for {column} is outside [0, 100]")]
    OutOfRange { subject: String, column: String, value: f64 },
    #[error("subject {0} appears twice")]
    DuplicateSubject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEntry {
    pub phase: Phase,
    pub band: Band,
    pub accuracy_percent: f64,
    pub n_test: usize,
}

/// One subject's accuracies, the unit a pipeline run writes out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectAccuracies {
    pub subject_id: String,
    pub entries: Vec<AccuracyEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Column {
    pub phase: Phase,
    pub band: Band,
}

impl Column {
    pub fn key(&self) -> String {
        format!("{}_{}", self.phase.name(), self.band.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectRow {
    pub subject_id: String,
    pub cells: Vec<u32>,
}

/// Integer-percent table: one row per subject, one column per
/// (phase, band), and a mean row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub columns: Vec<Column>,
    pub rows: Vec<SubjectRow>,
    pub mean: Vec<u32>,
    /// Marks the column(s) with the highest mean within each phase.
    pub bold: Vec<bool>,
}

/// Nearest integer, halves rounded away from zero.
pub fn round_half_away(x: f64) -> f64 {
    x.round()
}

/// Rounded mean of integer cells, computed exactly.
fn integer_mean(values: impl Iterator<Item = u32>) -> u32 {
    let (sum, n) = values.fold((0u64, 0u64), |(s, n), v| (s + u64::from(v), n + 1));
    ((2 * sum + n) / (2 * n)) as u32
}

pub fn build_accuracy_table(subjects: &[SubjectAccuracies]) -> Result<AccuracyTable, TableError> {
    let first = subjects.first().ok_or(TableError::Empty)?;
    let columns_of = |s: &SubjectAccuracies| -> Result<Vec<Column>, TableError> {
        let mut cols: Vec<Column> = s.entries.iter().map(|e| Column { phase: e.phase, band: e.band }).collect();
        cols.sort();
        if let Some(w) = cols.windows(2).find(|w| w[0] == w[1]) {
            return Err(TableError::DuplicateColumn { subject: s.subject_id.clone(), column: w[0].key() });
        }
        Ok(cols)
    };
    let columns = columns_of(first)?;
    let keys = |cols: &[Column]| cols.iter().map(Column::key).collect::<Vec<_>>();

    let mut rows: Vec<SubjectRow> = Vec::with_capacity(subjects.len());
    for s in subjects {
        let cols = columns_of(s)?;
        if cols != columns {
            return Err(TableError::InconsistentColumns {
                subject: s.subject_id.clone(),
                expected: keys(&columns),
                found: keys(&cols),
            });
        }
        if rows.iter().any(|r| r.subject_id == s.subject_id) {
            return Err(TableError::DuplicateSubject(s.subject_id.clone()));
        }
        let cells = columns
            .iter()
            .map(|c| {
                let e = s.entries.iter().find(|e| e.phase == c.phase && e.band == c.band).expect("column present");
                if !(0.0..=100.0).contains(&e.accuracy_percent) {
                    return Err(TableError::OutOfRange {
                        subject: s.subject_id.clone(),
                        column: c.key(),
                        value: e.accuracy_percent,
                    });
                }
                Ok(round_half_away(e.accuracy_percent) as u32)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(SubjectRow { subject_id: s.subject_id.clone(), cells });
    }

    let mean = recompute_means(&rows, columns.len());
    let bold = bold_columns(&columns, &mean);
    Ok(AccuracyTable { columns, rows, mean, bold })
}

pub fn recompute_means(rows: &[SubjectRow], n_columns: usize) -> Vec<u32> {
    (0..n_columns).map(|c| integer_mean(rows.iter().map(|r| r.cells[c]))).collect()
}

fn bold_columns(columns: &[Column], mean: &[u32]) -> Vec<bool> {
    columns
        .iter()
        .zip(mean)
        .map(|(col, &m)| {
            let best = columns.iter().zip(mean).filter(|(c, _)| c.phase == col.phase).map(|(_, &v)| v).max();
            best == Some(m)
        })
        .collect()
}

fn phase_title(phase: Phase) -> &'static str {
    match phase {
        Phase::Observation => "Observation Phase (%)",
        Phase::Movement => "Movement Phase (%)",
    }
}

fn band_title(band: Band) -> &'static str {
    match band {
        Band::Delta => "Delta",
        Band::Theta => "Theta",
        Band::Alpha => "Alpha",
        Band::Beta => "Beta",
        Band::Gamma => "Gamma",
    }
}

impl AccuracyTable {
    pub fn mean_of(&self, phase: Phase, band: Band) -> Option<u32> {
        self.columns.iter().position(|c| c.phase == phase && c.band == band).map(|i| self.mean[i])
    }

    /// True when the stored means equal the means recomputed from the rows.
    pub fn means_consistent(&self) -> bool {
        recompute_means(&self.rows, self.columns.len()) == self.mean
    }

    fn phases(&self) -> Vec<Phase> {
        let mut phases: Vec<Phase> = self.columns.iter().map(|c| c.phase).collect();
        phases.dedup();
        phases
    }

    /// One header line of `phase_band` keys, subject rows, then `Mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject");
        for c in &self.columns {
            out.push(',');
            out.push_str(&c.key());
        }
        out.push('\n');
        let mut line = |name: &str, cells: &[u32]| {
            out.push_str(name);
            for v in cells {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        };
        for r in &self.rows {
            line(&r.subject_id, &r.cells);
        }
        line("Mean", &self.mean);
        out
    }

    /// One Markdown table per phase, highest mean in bold.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (block, phase) in self.phases().into_iter().enumerate() {
            if block > 0 {
                out.push('\n');
            }
            let idx: Vec<usize> = (0..self.columns.len()).filter(|&i| self.columns[i].phase == phase).collect();
            writeln!(out, "### {}\n", phase_title(phase)).unwrap();
            out.push_str("| Subjects |");
            for &i in &idx {
                write!(out, " {} |", band_title(self.columns[i].band)).unwrap();
            }
            out.push_str("\n|---|");
            out.push_str(&":---:|".repeat(idx.len()));
            out.push('\n');
            for r in &self.rows {
                write!(out, "| {} |", r.subject_id).unwrap();
                for &i in &idx {
                    write!(out, " {} |", r.cells[i]).unwrap();
                }
                out.push('\n');
            }
            out.push_str("| Mean |");
            for &i in &idx {
                if self.bold[i] {
                    write!(out, " **{}** |", self.mean[i]).unwrap();
                } else {
                    write!(out, " {} |", self.mean[i]).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject(id: &str, phase: Phase, band: Band, value: f64) -> SubjectAccuracies {
        SubjectAccuracies {
            subject_id: id.into(),
            entries: vec![AccuracyEntry { phase, band, accuracy_percent: value, n_test: 20 }],
        }
    }

    fn column(phase: Phase, band: Band, values: &[f64]) -> AccuracyTable {
        let subjects: Vec<_> =
            values.iter().enumerate().map(|(i, &v)| subject(&format!("s{}", i + 1), phase, band, v)).collect();
        build_accuracy_table(&subjects).unwrap()
    }

    #[test]
    fn alpha_observation_mean() {
        let t = column(Phase::Observation, Band::Alpha, &[80.0, 70.0, 70.0, 85.0, 65.0]);
        assert_eq!(t.mean, vec![74]);
    }

    #[test]
    fn alpha_movement_mean() {
        let t = column(Phase::Movement, Band::Alpha, &[65.0, 60.0, 80.0, 75.0, 55.0]);
        assert_eq!(t.mean, vec![67]);
    }

    #[test]
    fn single_subject_mean_is_the_row() {
        let t = column(Phase::Observation, Band::Beta, &[55.0]);
        assert_eq!(t.mean, t.rows[0].cells);
        assert!(t.means_consistent());
    }

    #[test]
    fn halves_round_away_from_zero() {
        assert_eq!(column(Phase::Observation, Band::Delta, &[60.0, 65.0]).mean, vec![63]);
        assert_eq!(column(Phase::Observation, Band::Delta, &[0.0, 1.0]).mean, vec![1]);
        assert_eq!(round_half_away(2.5), 3.0);
        assert_eq!(round_half_away(-2.5), -3.0);
    }

    #[test]
    fn mismatched_columns_rejected() {
        let a = subject("s1", Phase::Observation, Band::Alpha, 70.0);
        let b = subject("s2", Phase::Movement, Band::Alpha, 70.0);
        assert!(matches!(build_accuracy_table(&[a, b]), Err(TableError::InconsistentColumns { .. })));
        assert_eq!(build_accuracy_table(&[]), Err(TableError::Empty));
        let bad = subject("s1", Phase::Observation, Band::Alpha, 101.0);
        assert!(matches!(build_accuracy_table(&[bad]), Err(TableError::OutOfRange { .. })));
    }

    #[test]
    fn exports_share_numbers() {
        let mut s = subject("s1", Phase::Observation, Band::Alpha, 80.0);
        s.entries.push(AccuracyEntry { phase: Phase::Observation, band: Band::Delta, accuracy_percent: 45.0, n_test: 20 });
        s.entries.push(AccuracyEntry { phase: Phase::Movement, band: Band::Alpha, accuracy_percent: 65.0, n_test: 20 });
        let t = build_accuracy_table(&[s]).unwrap();
        assert_eq!(t.to_csv(), "subject,observation_delta,observation_alpha,movement_alpha\ns1,45,80,65\nMean,45,80,65\n");
        assert_eq!(t.bold, vec![false, true, true]);
        let md = t.to_markdown();
        assert!(md.contains("| Mean | 45 | **80** |"));
        assert!(md.contains("### Movement Phase (%)"));
    }
}
