//! Run records and their CSV form.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use parsco::ledger::PhaseCounts;

use crate::error::{BenchError, Result};

pub const SCHEMA: &str = "parsco-bench/1";
pub const COLUMNS: [&str; 10] = [
    "method",
    "problem",
    "d",
    "eps",
    "seed",
    "gap",
    "query_depth",
    "query_count",
    "est_work",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub problem: String,
    pub d: usize,
    pub eps: f64,
    pub seed: u64,
    pub config_hash: u64,
    pub gap: f64,
    pub query_depth: u64,
    pub query_count: u64,
    pub est_work: f64,
    pub wall_ms: u64,
    pub phases: BTreeMap<&'static str, PhaseCounts>,
    pub warnings: Vec<String>,
}

/// Writes the schema line, the header and one row per record.
pub fn write_csv<W: Write>(mut out: W, records: &[RunRecord], config_hash: u64) -> Result<()> {
    writeln!(out, "# schema {SCHEMA} config {config_hash:016x}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for r in records {
        w.write_record([
            r.method.clone(),
            r.problem.clone(),
            r.d.to_string(),
            r.eps.to_string(),
            r.seed.to_string(),
            r.gap.to_string(),
            r.query_depth.to_string(),
            r.query_count.to_string(),
            r.est_work.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The columns of a CSV row needed for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub method: String,
    pub problem: String,
    pub d: usize,
    pub eps: f64,
    pub seed: u64,
    pub gap: f64,
    pub query_depth: u64,
    pub query_count: u64,
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(BenchError::Invalid(format!("unexpected CSV header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| BenchError::Invalid(format!("row {}: bad `{}` value `{}`", i + 1, COLUMNS[k], &rec[k])))
        };
        rows.push(CsvRow {
            method: rec[0].to_string(),
            problem: rec[1].to_string(),
            d: num(2)? as usize,
            eps: num(3)?,
            seed: num(4)? as u64,
            gap: num(5)?,
            query_depth: num(6)? as u64,
            query_count: num(7)? as u64,
        });
    }
    Ok(rows)
}

impl From<&RunRecord> for CsvRow {
    fn from(r: &RunRecord) -> Self {
        Self {
            method: r.method.clone(),
            problem: r.problem.clone(),
            d: r.d,
            eps: r.eps,
            seed: r.seed,
            gap: r.gap,
            query_depth: r.query_depth,
            query_count: r.query_count,
        }
    }
}
