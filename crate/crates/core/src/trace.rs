//! Per-iteration benchmark records and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column order of the trace CSV. Changing it is a schema break.
pub const TRACE_CSV_HEADER: &str =
    "iteration,elapsed_seconds,distortion,recall_at_1,moves_accepted,distance_evals";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Wall-clock seconds since the run started.
    pub elapsed_seconds: f64,
    pub distortion: f64,
    pub recall_at_1: Option<f64>,
    pub moves_accepted: u64,
    /// Vector-to-vector (or vector-to-centroid) evaluations in this iteration.
    pub distance_evals: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTrace {
    pub rows: Vec<TraceRow>,
}

impl MetricsTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn set_recall(&mut self, recall: f64) {
        for row in &mut self.rows {
            row.recall_at_1 = Some(recall);
        }
    }

    /// Wall time of each iteration after the first row.
    pub fn iteration_seconds(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[1].elapsed_seconds - w[0].elapsed_seconds)
            .collect()
    }

    /// Checks the row invariants: strictly increasing iteration, monotone
    /// clock and, when `non_increasing_distortion` is set, no distortion
    /// increase.
    pub fn validate(&self, non_increasing_distortion: bool) -> Result<()> {
        for w in self.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.iteration <= a.iteration {
                return Err(Error::InvalidData(format!(
                    "iteration {} follows {}",
                    b.iteration, a.iteration
                )));
            }
            if b.elapsed_seconds < a.elapsed_seconds {
                return Err(Error::InvalidData(format!(
                    "clock went backwards at iteration {}",
                    b.iteration
                )));
            }
            if non_increasing_distortion && b.distortion > a.distortion {
                return Err(Error::InvalidData(format!(
                    "distortion rose from {} to {} at iteration {}",
                    a.distortion, b.distortion, b.iteration
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        w.write_record(TRACE_CSV_HEADER.split(','))?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != TRACE_CSV_HEADER {
            return Err(Error::InvalidData(format!(
                "unexpected trace header {header:?}"
            )));
        }
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        Ok(Self { rows })
    }
}
