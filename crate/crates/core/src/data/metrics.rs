use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SaaError};

/// One row of `metrics.csv`, written at the end of every epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Zero-based index of the finished epoch.
    pub epoch: u64,
    /// Iterations completed so far.
    pub iteration: u64,
    pub test_acc: f64,
    pub sup_loss: f64,
    pub unsup_loss: f64,
    pub mask_rate: f64,
    /// Naive fraction after this epoch's marker refresh.
    pub naive_fraction: f64,
    pub lr: f64,
    pub wall_ms: u64,
}

fn csv_err(path: &Path, e: csv::Error) -> SaaError {
    SaaError::format("metrics CSV", format!("{}: {e}", path.display()))
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = MetricsWriter::create(path)?;
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRecord>, _>>()
        .map_err(|e| csv_err(path, e))
}

/// Incremental metrics file; every row is flushed as it is written.
pub struct MetricsWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| SaaError::io(path, e))?;
        Ok(MetricsWriter { path: path.to_path_buf(), writer: csv::Writer::from_writer(file) })
    }

    pub fn append(&mut self, record: &MetricsRecord) -> Result<()> {
        self.writer.serialize(record).map_err(|e| csv_err(&self.path, e))?;
        self.writer.flush().map_err(|e| SaaError::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let rows = vec![
            MetricsRecord {
                epoch: 0,
                iteration: 64,
                test_acc: 0.25,
                sup_loss: 1.0 / 3.0,
                unsup_loss: 0.1 + 0.2,
                mask_rate: 0.0,
                naive_fraction: 0.123456789012345,
                lr: 0.03,
                wall_ms: 12,
            },
            MetricsRecord {
                epoch: 1,
                iteration: 128,
                test_acc: 1.0,
                sup_loss: 1e-300,
                unsup_loss: 2.5e10,
                mask_rate: 0.75,
                naive_fraction: 1.0,
                lr: 0.029999,
                wall_ms: 0,
            },
        ];
        write_metrics(&path, &rows).unwrap();
        assert_eq!(read_metrics(&path).unwrap(), rows);
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with(
            "epoch,iteration,test_acc,sup_loss,unsup_loss,mask_rate,naive_fraction,lr,wall_ms\n"
        ));
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(read_metrics(Path::new("/nonexistent/metrics.csv")).is_err());
    }
}
