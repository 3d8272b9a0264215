//! Dataset CSV: `time,s_0..s_{d-1},sdot_0..sdot_{d-1},f_0..f_{w-1},action`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use gmoe_core::data::{MotionDataset, MotionRecord};

use crate::fsutil::write_atomic;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Csv { line: u64, source: csv::Error },
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: u64, expected: usize, found: usize },
    #[error("line {line}, column `{column}`: cannot parse {value:?} as a number")]
    Number { line: u64, column: String, value: String },
    #[error("line {line}: unknown action label {label:?}")]
    UnknownAction { line: u64, label: String },
    #[error("line {line}: time {time} does not increase (previous {previous})")]
    NonMonotoneTime { line: u64, time: f64, previous: f64 },
    #[error("no records")]
    NoRecords,
}

/// Channel widths parsed from a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub num_joints: usize,
    pub wrench_dims: usize,
}

impl Schema {
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["time".to_string()];
        cols.extend((0..self.num_joints).map(|j| format!("s_{j}")));
        cols.extend((0..self.num_joints).map(|j| format!("sdot_{j}")));
        cols.extend((0..self.wrench_dims).map(|c| format!("f_{c}")));
        cols.push("action".to_string());
        cols
    }

    pub fn parse(header: &[&str]) -> Result<Self, CsvError> {
        let count = |prefix: &str| header.iter().filter(|h| h.strip_prefix(prefix).is_some_and(|r| r.parse::<usize>().is_ok())).count();
        let schema = Schema {
            num_joints: count("s_"),
            wrench_dims: count("f_"),
        };
        let want = schema.columns();
        if header != want.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            return Err(CsvError::Header(format!("expected `{}`, found `{}`", want.join(","), header.join(","))));
        }
        Ok(schema)
    }
}

/// Parses a dataset. Labels must come from `actions`; the sample rate is
/// taken from the first time step.
pub fn parse_csv<R: Read>(reader: R, actions: &[String]) -> Result<MotionDataset, CsvError> {
    let mut rows = RecordReader::new(reader, actions)?;
    let schema = rows.schema();
    let records = rows.by_ref().collect::<Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(CsvError::NoRecords);
    }
    let rate_hz = match records.as_slice() {
        [a, b, ..] => 1.0 / (b.time - a.time),
        _ => 0.0,
    };
    Ok(MotionDataset {
        num_joints: schema.num_joints,
        wrench_dims: schema.wrench_dims,
        actions: actions.to_vec(),
        rate_hz,
        records,
    })
}

/// Incremental reader that validates each row as it is pulled.
pub struct RecordReader<R> {
    rows: csv::StringRecordsIntoIter<R>,
    schema: Schema,
    names: Vec<String>,
    actions: Vec<String>,
    previous: f64,
}

impl<R: Read> RecordReader<R> {
    /// Reads and checks the header line.
    pub fn new(reader: R, actions: &[String]) -> Result<Self, CsvError> {
        let rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
        let mut rows = rdr.into_records();
        let header = match rows.next() {
            None => return Err(CsvError::NoRecords),
            Some(h) => h.map_err(|source| CsvError::Csv { line: 1, source })?,
        };
        let header: Vec<&str> = header.iter().collect();
        let schema = Schema::parse(&header)?;
        Ok(RecordReader {
            rows,
            names: schema.columns(),
            schema,
            actions: actions.to_vec(),
            previous: f64::NEG_INFINITY,
        })
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    fn convert(&mut self, row: csv::StringRecord) -> Result<MotionRecord, CsvError> {
        let names = &self.names;
        let (d, w) = (self.schema.num_joints, self.schema.wrench_dims);
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != names.len() {
            return Err(CsvError::ColumnCount {
                line,
                expected: names.len(),
                found: row.len(),
            });
        }
        let mut values = Vec::with_capacity(names.len() - 1);
        for (i, cell) in row.iter().take(names.len() - 1).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| CsvError::Number {
                line,
                column: names[i].clone(),
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        let label = row[names.len() - 1].trim();
        let action = self.actions.iter().position(|a| a == label).ok_or_else(|| CsvError::UnknownAction {
            line,
            label: label.to_string(),
        })?;
        let time = values[0];
        if !(time > self.previous) {
            return Err(CsvError::NonMonotoneTime {
                line,
                time,
                previous: self.previous,
            });
        }
        self.previous = time;
        Ok(MotionRecord {
            time,
            joints: values[1..1 + d].to_vec(),
            velocities: values[1 + d..1 + 2 * d].to_vec(),
            wrenches: values[1 + 2 * d..1 + 2 * d + w].to_vec(),
            action,
        })
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<MotionRecord, CsvError>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = self.rows.next()?;
        Some(
            row.map_err(|source| CsvError::Csv {
                line: source.position().map_or(0, |p| p.line()),
                source,
            })
            .and_then(|r| self.convert(r)),
        )
    }
}

pub fn read_csv(path: &Path, actions: &[String]) -> Result<MotionDataset, CsvError> {
    let file = std::fs::File::open(path).map_err(|source| CsvError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(std::io::BufReader::new(file), actions)
}

/// Writes the schema CSV. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_records<W: Write>(out: W, dataset: &MotionDataset) -> std::io::Result<()> {
    let schema = Schema {
        num_joints: dataset.num_joints,
        wrench_dims: dataset.wrench_dims,
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema.columns())?;
    let mut row: Vec<String> = Vec::new();
    for r in &dataset.records {
        row.clear();
        row.push(r.time.to_string());
        row.extend(r.joints.iter().chain(&r.velocities).chain(&r.wrenches).map(f64::to_string));
        row.push(dataset.actions[r.action].clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, dataset: &MotionDataset) -> std::io::Result<()> {
    write_atomic(path, |w| write_records(w, dataset))
}
