//! Stratified 2×2 cohort tables: data model, parsing, and serialization.
//!
//! Counts stay as exact integers; proportions are only produced on demand by
//! [`stratum_risks`].

use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("parse error at line {line}, field {field}: {message}")]
    Parse {
        line: u64,
        field: String,
        message: String,
    },
    #[error("invalid stratum '{stratum}': {message}")]
    Validation { stratum: String, message: String },
    #[error("table must contain at least one stratum")]
    Empty,
    #[error("duplicate stratum label '{0}'")]
    DuplicateLabel(String),
    #[error("stratum '{stratum}' has no {group} individuals")]
    EmptyMargin { stratum: String, group: &'static str },
    #[error("crude table {supplied:?} does not match the sum of strata {summed:?}")]
    MarginMismatch {
        supplied: CohortCell,
        summed: CohortCell,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guess from a file extension; anything that is not `.json` is CSV.
    pub fn from_path(path: &str) -> Format {
        if path.to_ascii_lowercase().ends_with(".json") {
            Format::Json
        } else {
            Format::Csv
        }
    }
}

/// Counts for one binary exposure × binary outcome table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CohortCell {
    pub exposed_cases: u64,
    pub exposed_total: u64,
    pub unexposed_cases: u64,
    pub unexposed_total: u64,
}

impl CohortCell {
    /// Builds a cell, checking that cases never exceed totals.
    ///
    /// Zero totals are accepted here; see [`CohortCell::has_empty_margin`].
    pub fn new(
        exposed_cases: u64,
        exposed_total: u64,
        unexposed_cases: u64,
        unexposed_total: u64,
    ) -> Result<Self, TableError> {
        let cell = CohortCell {
            exposed_cases,
            exposed_total,
            unexposed_cases,
            unexposed_total,
        };
        cell.validate("cell")?;
        Ok(cell)
    }

    fn validate(&self, label: &str) -> Result<(), TableError> {
        if self.exposed_cases > self.exposed_total {
            return Err(TableError::Validation {
                stratum: label.to_string(),
                message: format!(
                    "exposed_cases {} exceeds exposed_total {}",
                    self.exposed_cases, self.exposed_total
                ),
            });
        }
        if self.unexposed_cases > self.unexposed_total {
            return Err(TableError::Validation {
                stratum: label.to_string(),
                message: format!(
                    "unexposed_cases {} exceeds unexposed_total {}",
                    self.unexposed_cases, self.unexposed_total
                ),
            });
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.exposed_total + self.unexposed_total
    }

    pub fn has_empty_margin(&self) -> bool {
        self.exposed_total == 0 || self.unexposed_total == 0
    }

    fn add(&self, other: &CohortCell) -> CohortCell {
        CohortCell {
            exposed_cases: self.exposed_cases + other.exposed_cases,
            exposed_total: self.exposed_total + other.exposed_total,
            unexposed_cases: self.unexposed_cases + other.unexposed_cases,
            unexposed_total: self.unexposed_total + other.unexposed_total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub exposure: String,
    pub outcome: String,
    pub covariate: String,
}

impl Default for Labels {
    fn default() -> Self {
        Labels {
            exposure: "exposure".into(),
            outcome: "outcome".into(),
            covariate: "covariate".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stratum {
    pub label: String,
    pub cell: CohortCell,
}

/// An ordered list of strata, each carrying a 2×2 table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedCohortTable {
    strata: Vec<Stratum>,
    labels: Labels,
}

impl StratifiedCohortTable {
    pub fn new(strata: Vec<Stratum>, labels: Labels) -> Result<Self, TableError> {
        if strata.is_empty() {
            return Err(TableError::Empty);
        }
        let mut seen = HashSet::new();
        for s in &strata {
            if !seen.insert(s.label.as_str()) {
                return Err(TableError::DuplicateLabel(s.label.clone()));
            }
            s.cell.validate(&s.label)?;
        }
        Ok(StratifiedCohortTable { strata, labels })
    }

    /// Single-stratum table.
    pub fn single(label: &str, cell: CohortCell) -> Result<Self, TableError> {
        Self::new(
            vec![Stratum {
                label: label.to_string(),
                cell,
            }],
            Labels::default(),
        )
    }

    /// Checks a separately reported crude table against the strata.
    pub fn check_crude(&self, crude: &CohortCell) -> Result<(), TableError> {
        let summed = collapse(self);
        if summed != *crude {
            return Err(TableError::MarginMismatch {
                supplied: *crude,
                summed,
            });
        }
        Ok(())
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn with_labels(mut self, labels: Labels) -> Self {
        self.labels = labels;
        self
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    /// Labels of strata with a zero exposed or unexposed total.
    pub fn empty_margins(&self) -> Vec<&str> {
        self.strata
            .iter()
            .filter(|s| s.cell.has_empty_margin())
            .map(|s| s.label.as_str())
            .collect()
    }

    /// The collapsed table as a one-stratum table labelled `all`.
    pub fn crude_table(&self) -> StratifiedCohortTable {
        StratifiedCohortTable {
            strata: vec![Stratum {
                label: "all".into(),
                cell: collapse(self),
            }],
            labels: self.labels.clone(),
        }
    }
}

/// Elementwise sum of all strata.
pub fn collapse(table: &StratifiedCohortTable) -> CohortCell {
    table
        .strata
        .iter()
        .fold(CohortCell::default(), |acc, s| acc.add(&s.cell))
}

/// `(risk in unexposed, risk in exposed)` for one cell.
///
/// A zero total has no risk; the error names the empty group.
pub fn stratum_risks(cell: &CohortCell) -> Result<(f64, f64), TableError> {
    if cell.unexposed_total == 0 {
        return Err(TableError::EmptyMargin {
            stratum: String::new(),
            group: "unexposed",
        });
    }
    if cell.exposed_total == 0 {
        return Err(TableError::EmptyMargin {
            stratum: String::new(),
            group: "exposed",
        });
    }
    Ok((
        cell.unexposed_cases as f64 / cell.unexposed_total as f64,
        cell.exposed_cases as f64 / cell.exposed_total as f64,
    ))
}

const CSV_HEADER: [&str; 5] = [
    "stratum",
    "exposed_cases",
    "exposed_total",
    "unexposed_cases",
    "unexposed_total",
];

#[derive(Serialize, Deserialize)]
struct JsonStratum {
    label: String,
    exposed_cases: u64,
    exposed_total: u64,
    unexposed_cases: u64,
    unexposed_total: u64,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    #[serde(default)]
    labels: Labels,
    strata: Vec<JsonStratum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crude: Option<CohortCell>,
}

pub fn parse_table<R: Read>(source: R, format: Format) -> Result<StratifiedCohortTable, TableError> {
    match format {
        Format::Csv => parse_csv(source),
        Format::Json => parse_json(source),
    }
}

pub fn parse_str(source: &str, format: Format) -> Result<StratifiedCohortTable, TableError> {
    parse_table(source.as_bytes(), format)
}

fn parse_csv<R: Read>(source: R) -> Result<StratifiedCohortTable, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers().map_err(csv_error)?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != CSV_HEADER {
        return Err(TableError::Parse {
            line: 1,
            field: "header".into(),
            message: format!("expected header '{}', got '{}'", CSV_HEADER.join(","), got.join(",")),
        });
    }
    let mut strata = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let label = record[0].to_string();
        let mut counts = [0u64; 4];
        for (i, slot) in counts.iter_mut().enumerate() {
            let raw = &record[i + 1];
            *slot = raw.parse().map_err(|_| TableError::Parse {
                line,
                field: CSV_HEADER[i + 1].into(),
                message: format!("'{raw}' is not a nonnegative integer"),
            })?;
        }
        strata.push(Stratum {
            label,
            cell: CohortCell {
                exposed_cases: counts[0],
                exposed_total: counts[1],
                unexposed_cases: counts[2],
                unexposed_total: counts[3],
            },
        });
    }
    StratifiedCohortTable::new(strata, Labels::default())
}

fn csv_error(e: csv::Error) -> TableError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    TableError::Parse {
        line,
        field: "record".into(),
        message: e.to_string(),
    }
}

fn parse_json<R: Read>(source: R) -> Result<StratifiedCohortTable, TableError> {
    let raw: JsonTable = serde_json::from_reader(source).map_err(|e| TableError::Parse {
        line: e.line() as u64,
        field: format!("column {}", e.column()),
        message: e.to_string(),
    })?;
    let strata = raw
        .strata
        .into_iter()
        .map(|s| Stratum {
            label: s.label,
            cell: CohortCell {
                exposed_cases: s.exposed_cases,
                exposed_total: s.exposed_total,
                unexposed_cases: s.unexposed_cases,
                unexposed_total: s.unexposed_total,
            },
        })
        .collect();
    let table = StratifiedCohortTable::new(strata, raw.labels)?;
    if let Some(crude) = raw.crude {
        table.check_crude(&crude)?;
    }
    Ok(table)
}

pub fn to_csv(table: &StratifiedCohortTable) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("write to Vec");
    for s in &table.strata {
        let c = &s.cell;
        writer
            .write_record([
                s.label.clone(),
                c.exposed_cases.to_string(),
                c.exposed_total.to_string(),
                c.unexposed_cases.to_string(),
                c.unexposed_total.to_string(),
            ])
            .expect("write to Vec");
    }
    String::from_utf8(writer.into_inner().expect("flush Vec")).expect("csv output is utf-8")
}

pub fn to_json_value(table: &StratifiedCohortTable) -> serde_json::Value {
    let raw = JsonTable {
        labels: table.labels.clone(),
        strata: table
            .strata
            .iter()
            .map(|s| JsonStratum {
                label: s.label.clone(),
                exposed_cases: s.cell.exposed_cases,
                exposed_total: s.cell.exposed_total,
                unexposed_cases: s.cell.unexposed_cases,
                unexposed_total: s.cell.unexposed_total,
            })
            .collect(),
        crude: None,
    };
    serde_json::to_value(raw).expect("table serializes")
}

pub fn to_json(table: &StratifiedCohortTable) -> String {
    serde_json::to_string_pretty(&to_json_value(table)).expect("table serializes")
}
