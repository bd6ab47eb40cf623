//! CSV tables with fixed column order, written atomically.

use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use super::lemmas::BoundPoint;
use crate::error::{Error, Result};
use crate::protocol::RoundRecord;

pub const ROUND_HEADER: [&str; 6] = [
    "round",
    "sim_time_s",
    "loss",
    "accuracy",
    "bytes_tx",
    "contributors",
];
pub const BOUND_HEADER: [&str; 4] = ["step", "measured_gap", "bound", "holds"];

/// A header plus rows of preformatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Writes `bytes` to a temporary file beside `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn round_table(records: &[RoundRecord]) -> CsvTable {
    let mut t = CsvTable::new(&ROUND_HEADER);
    for r in records {
        t.push([
            r.round.to_string(),
            r.sim_time_s.to_string(),
            r.loss.to_string(),
            r.accuracy.to_string(),
            r.bytes_transmitted.to_string(),
            r.contributors_count.to_string(),
        ]);
    }
    t
}

pub fn bound_table(points: &[BoundPoint]) -> CsvTable {
    let mut t = CsvTable::new(&BOUND_HEADER);
    for p in points {
        t.push([
            p.step.to_string(),
            p.measured_gap.to_string(),
            p.bound.to_string(),
            p.holds().to_string(),
        ]);
    }
    t
}

/// Writes the per-round CSV for `records` to `path`.
pub fn emit_curves(records: &[RoundRecord], path: &Path) -> Result<()> {
    write_atomic(path, &round_table(records).to_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::ModelVector;

    fn rec(round: usize, t: f64) -> RoundRecord {
        RoundRecord {
            round,
            global_model: ModelVector::zeros(1),
            sim_time_s: t,
            bytes_transmitted: 10,
            contributors_count: 4,
            loss: 0.5,
            accuracy: 0.75,
        }
    }

    #[test]
    fn empty_records_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_curves(&[], &p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "round,sim_time_s,loss,accuracy,bytes_tx,contributors\n"
        );
    }

    #[test]
    fn rows_and_rewrites_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/r.csv");
        let recs = [rec(1, 10.5), rec(2, 20.0)];
        emit_curves(&recs, &p).unwrap();
        let first = std::fs::read(&p).unwrap();
        emit_curves(&recs, &p).unwrap();
        assert_eq!(first, std::fs::read(&p).unwrap());
        let text = String::from_utf8(first).unwrap();
        assert!(text.ends_with("1,10.5,0.5,0.75,10,4\n2,20,0.5,0.75,10,4\n"));
    }

    #[test]
    fn names_with_commas_are_quoted() {
        let mut t = CsvTable::new(&["name", "x"]);
        t.push(["Rolla, MO", "1"]);
        assert_eq!(
            String::from_utf8(t.to_bytes()).unwrap(),
            "name,x\n\"Rolla, MO\",1\n"
        );
    }
}
