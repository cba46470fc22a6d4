use std::collections::HashSet;
use std::path::Path;

use pairsens::ContingencyTable2x2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Study {
    pub label: String,
    #[serde(flatten)]
    pub table: ContingencyTable2x2,
}

#[derive(Debug, Deserialize)]
struct StudySet {
    studies: Vec<Study>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    label: String,
    n_both: u32,
    n_hazard_only: u32,
    n_control_only: u32,
    n_neither: u32,
}

/// Load studies from a `.json` file (`{"studies": [...]}`) or a `.csv` file
/// with columns label, n_both, n_hazard_only, n_control_only, n_neither.
/// All failures come back as messages suitable for a usage error.
pub fn load_studies(path: &Path) -> Result<Vec<Study>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let studies = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let set: StudySet = serde_json::from_str(&text)
                .map_err(|e| format!("{}: invalid JSON input: {e}", path.display()))?;
            set.studies
        }
        Some("csv") => parse_csv(&text).map_err(|e| format!("{}: {e}", path.display()))?,
        _ => {
            return Err(format!(
                "{}: unsupported input extension (expected .json or .csv)",
                path.display()
            ))
        }
    };
    if studies.is_empty() {
        return Err(format!("{}: no studies in input", path.display()));
    }
    let mut seen = HashSet::new();
    for s in &studies {
        if s.label.is_empty() {
            return Err(format!("{}: empty study label", path.display()));
        }
        if !seen.insert(s.label.clone()) {
            return Err(format!("{}: duplicate study label {:?}", path.display(), s.label));
        }
    }
    Ok(studies)
}

fn parse_csv(text: &str) -> Result<Vec<Study>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut studies = Vec::new();
    for (i, record) in reader.deserialize::<CsvRow>().enumerate() {
        let row = record.map_err(|e| format!("invalid CSV input: {e}"))?;
        let table =
            ContingencyTable2x2::new(row.n_both, row.n_hazard_only, row.n_control_only, row.n_neither)
                .map_err(|e| format!("row {}: {e}", i + 1))?;
        studies.push(Study {
            label: row.label,
            table,
        });
    }
    Ok(studies)
}
