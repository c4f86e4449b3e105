use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRecord {
    pub id: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideal: Option<String>,
}

/// Parses JSONL text. Blank lines are skipped but still counted, so line
/// numbers in errors match the file.
pub fn parse_dataset(text: &str, origin: &Path) -> Result<Vec<PromptRecord>> {
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Dataset {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let record: PromptRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if record.prompt.trim().is_empty() {
            return Err(err("prompt is empty".into()));
        }
        if let Some(first) = seen.insert(record.id.clone(), line_no) {
            return Err(err(format!(
                "duplicate id {:?} on lines {first} and {line_no}",
                record.id
            )));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: &Path) -> Result<Vec<PromptRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

/// Every record must carry an ideal response.
pub fn require_ideals(records: &[PromptRecord]) -> Result<Vec<(String, String)>> {
    records
        .iter()
        .map(|r| match &r.ideal {
            Some(ideal) => Ok((r.prompt.clone(), ideal.clone())),
            None => Err(Error::config(format!("record {:?} has no ideal response", r.id))),
        })
        .collect()
}
