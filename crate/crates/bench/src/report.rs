//! Sweep results and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(rename = "sendRate")]
    pub send_rate: u64,
    pub users: u64,
    /// Successful requests per second over the measurement window.
    pub throughput: f64,
    /// Mean time from scheduled send to response, over all requests.
    #[serde(rename = "avgLatencySeconds")]
    pub avg_latency_secs: f64,
    pub errors: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub cells: Vec<CellResult>,
}

impl BenchReport {
    pub fn to_csv(&self) -> Result<String, BenchError> {
        if self.cells.is_empty() {
            return Err(BenchError::EmptyReport);
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        for cell in &self.cells {
            writer.serialize(cell).map_err(|e| BenchError::Io(e.to_string()))?;
        }
        let bytes = writer.into_inner().map_err(|e| BenchError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self, BenchError> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let cells = reader
            .deserialize()
            .collect::<Result<Vec<CellResult>, _>>()
            .map_err(|e| BenchError::Io(e.to_string()))?;
        Ok(BenchReport { cells })
    }

    /// Writes the plot data, one row per cell.
    pub fn write_csv(&self, path: &Path) -> Result<(), BenchError> {
        let text = self.to_csv()?;
        std::fs::write(path, text).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read_csv(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(rate: u64, users: u64) -> CellResult {
        CellResult {
            send_rate: rate,
            users,
            throughput: rate as f64 * 0.987654321,
            avg_latency_secs: 0.1 / rate as f64,
            errors: rate % 3,
        }
    }

    #[test]
    fn csv_round_trip() {
        let report = BenchReport {
            cells: (1..=12).map(|i| cell(25 * i, 50)).collect(),
        };
        let text = report.to_csv().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("sendRate,users,throughput,avgLatencySeconds,errors"));
        assert_eq!(lines.count(), 12);
        assert_eq!(BenchReport::from_csv(&text).unwrap(), report);
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(matches!(BenchReport::default().to_csv(), Err(BenchError::EmptyReport)));
    }
}
