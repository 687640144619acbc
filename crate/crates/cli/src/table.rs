//! Result tables and their plot-ready CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Where a table came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub config_hash: String,
    pub data_hash: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl ResultTable {
    pub fn new(columns: &[&str], provenance: Provenance) -> Self {
        ResultTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance,
        }
    }

    /// Append a row; it must have one value per column.
    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(CliError::internal(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }
}

const ACC: [&str; 2] = ["baselineAcc", "discAcc"];
const ERR: [&str; 2] = ["baselineError", "discError"];
const JOINT_COLUMNS: [&str; 12] = [
    "joint1", "joint2", "joint3", "joint4", "joint5", "joint6", "joint7", "joint8", "joint9", "joint10", "joint11",
    "joint12",
];
const CLASS_COLUMNS: [&str; 6] = ["head", "frontRight", "frontLeft", "rearRight", "rearLeft", "tail"];

/// Figure ids with a CSV schema.
pub const FIGURES: [&str; 11] = [
    "fig3", "fig4", "fig5", "fig6", "fig7", "fig11", "fig12", "fig13", "fig14", "fig15", "fig26",
];

/// Column names of a figure's CSV.
pub fn figure_schema(figure: &str) -> Option<Vec<&'static str>> {
    let with = |axis: &'static str, rest: &[&'static str]| {
        let mut v = vec![axis];
        v.extend_from_slice(rest);
        v
    };
    Some(match figure {
        "fig3" => with("forestSize", &ACC),
        "fig4" => with("m", &ACC),
        "fig5" => with("leafSize", &ACC),
        "fig6" => with("iterations", &ACC),
        "fig7" => with("startLevel", &ACC),
        "fig11" => with("forestSize", &ERR),
        "fig12" => with("m", &ERR),
        "fig13" => with("joint", &ERR),
        "fig14" => vec!["joint", "error"],
        "fig15" => {
            let mut v = with("sigma", &ERR);
            v.extend_from_slice(&JOINT_COLUMNS);
            v
        }
        "fig26" => with("trueClass", &CLASS_COLUMNS),
        _ => return None,
    })
}

fn format_value(v: f64) -> String {
    // Shortest round-trip form; integral values print without a fraction.
    format!("{v}")
}

/// Write `table` as the CSV of `figure`. The table's columns must be the
/// figure's schema.
pub fn emit_figure_data(table: &ResultTable, figure: &str, path: &Path) -> Result<()> {
    let schema = figure_schema(figure).ok_or_else(|| CliError::usage(format!("unknown figure id {figure:?}")))?;
    if table.columns != schema {
        return Err(CliError::internal(format!(
            "table columns {:?} do not match {figure} schema {:?}",
            table.columns, schema
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format_value(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Read a figure CSV back into columns and rows.
pub fn read_figure_data(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let columns = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| CliError::data(format!("bad number {v:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            config_hash: "c".into(),
            data_hash: "d".into(),
            timestamp: 0,
        }
    }

    #[test]
    fn fig3_schema_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fig3.csv");
        let mut t = ResultTable::new(&["forestSize", "baselineAcc", "discAcc"], prov());
        for k in [1.0, 3.0, 5.0] {
            t.push(vec![k, 0.75, 0.8]).unwrap();
        }
        emit_figure_data(&t, "fig3", &path).unwrap();
        let (cols, rows) = read_figure_data(&path).unwrap();
        assert_eq!(cols, ["forestSize", "baselineAcc", "discAcc"]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1], vec![3.0, 0.75, 0.8]);
        assert!(std::fs::read_to_string(&path).unwrap().contains("\n3,0.75,0.8\n"));
    }

    #[test]
    fn unknown_figure_and_schema_mismatch_fail() {
        let dir = tempfile::tempdir().unwrap();
        let t = ResultTable::new(&["forestSize", "baselineAcc", "discAcc"], prov());
        assert!(emit_figure_data(&t, "fig99", &dir.path().join("x.csv")).is_err());
        assert!(emit_figure_data(&t, "fig4", &dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn every_figure_has_a_schema() {
        for f in FIGURES {
            assert!(figure_schema(f).is_some(), "{f}");
        }
    }
}
