//! Plain-text artifacts: cell-centred field dumps with a one-line JSON header, and a
//! reader for them.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// First line of a field dump, after `# `.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    /// Time of the sample, if the field belongs to a history.
    pub t: Option<f64>,
    /// Time nodes of the run the field was taken from.
    pub time_nodes: usize,
    pub horizon: f64,
    pub geometry_hash: String,
}

/// `ny` rows of `nx` values, bottom row first.
pub fn write_field(header: &FieldHeader, values: &[f64]) -> Result<String> {
    if values.len() != header.nx * header.ny {
        return Err(Error::Shape(format!("{} values for a {}×{} grid", values.len(), header.nx, header.ny)));
    }
    let mut s = format!("# {}\n", serde_json::to_string(header)?);
    for row in values.chunks(header.nx) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    Ok(s)
}

pub fn read_field(text: &str) -> Result<(FieldHeader, Vec<f64>)> {
    let mut lines = text.lines();
    let head = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Error::Config("field dump: missing JSON header".into()))?;
    let header: FieldHeader = serde_json::from_str(head)?;
    let mut values = Vec::with_capacity(header.nx * header.ny);
    for (k, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|e| Error::Config(format!("field dump row {}: {e}", k + 1)))?);
        }
    }
    if values.len() != header.nx * header.ny {
        return Err(Error::Shape(format!("field dump holds {} values, header says {}×{}", values.len(), header.nx, header.ny)));
    }
    Ok((header, values))
}

/// Write `text` to `dir/name`, creating the directories on the way.
pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trip() {
        let h = FieldHeader {
            name: "w".into(),
            nx: 3,
            ny: 2,
            t: Some(0.5),
            time_nodes: 9,
            horizon: 2.0,
            geometry_hash: "ab".into(),
        };
        let v = [1.0, -2.5, 3.0e-9, 0.0, 1.0 / 3.0, 7.0];
        let (h2, v2) = read_field(&write_field(&h, &v).unwrap()).unwrap();
        assert_eq!(h, h2);
        for (a, b) in v.iter().zip(&v2) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
        assert!(write_field(&h, &v[..5]).is_err());
    }
}
