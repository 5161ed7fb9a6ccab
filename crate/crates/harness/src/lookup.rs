//! Lookup-table files.
//!
//! A table is comma-separated text with one header row. Axis columns come
//! first and are named `axis:<name>`; every remaining column holds one task's
//! objective values. Each data row is one grid point:
//!
//! ```text
//! axis:alpha,axis:log_lambda,dataset_a,dataset_b
//! 0.0,0.0,0.71,0.64
//! 0.0,0.5,0.73,0.69
//! ```

use std::path::Path;

use libo_core::environment::LookupTable;
use libo_core::features::PointGrid;

use crate::error::{Error, Result};

const AXIS_PREFIX: &str = "axis:";

pub fn parse_lookup_table(text: &str) -> std::result::Result<LookupTable, String> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(str::to_string)
        .collect();
    let dims = header
        .iter()
        .take_while(|h| h.starts_with(AXIS_PREFIX))
        .count();
    if dims == 0 {
        return Err("the header names no axis: columns".into());
    }
    if header[dims..].iter().any(|h| h.starts_with(AXIS_PREFIX)) {
        return Err("axis: columns must precede task columns".into());
    }
    let tasks = header.len() - dims;
    if tasks == 0 {
        return Err("the header names no task columns".into());
    }
    let mut coords = Vec::new();
    let mut columns = vec![Vec::new(); tasks];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.len() != header.len() {
            return Err(format!(
                "row {}: expected {} fields, found {}",
                line + 2,
                header.len(),
                rec.len()
            ));
        }
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| format!("row {}: {field:?} is not a number", line + 2))?;
            if i < dims {
                coords.push(v);
            } else {
                columns[i - dims].push(v);
            }
        }
    }
    let axis_names = header[..dims]
        .iter()
        .map(|h| h[AXIS_PREFIX.len()..].to_string())
        .collect();
    let task_names = header[dims..].to_vec();
    let grid = PointGrid::from_coords(dims, coords).map_err(|e| e.to_string())?;
    LookupTable::new(axis_names, task_names, grid, columns).map_err(|e| e.to_string())
}

pub fn lookup_table_to_string(table: &LookupTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = table
        .axis_names()
        .iter()
        .map(|a| format!("{AXIS_PREFIX}{a}"))
        .chain(table.task_names().iter().cloned())
        .collect();
    w.write_record(&header).expect("in-memory write");
    let columns: Vec<&[f64]> = (0..table.num_tasks())
        .map(|t| table.column(t).expect("task index in range"))
        .collect();
    for (i, point) in table.grid().iter().enumerate() {
        let row: Vec<String> = point
            .iter()
            .copied()
            .chain(columns.iter().map(|c| c[i]))
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

pub fn read_lookup_table(path: &Path) -> Result<LookupTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lookup_table(&text).map_err(|m| Error::format(path, m))
}

pub fn write_lookup_table(path: &Path, table: &LookupTable) -> Result<()> {
    std::fs::write(path, lookup_table_to_string(table)).map_err(|e| Error::io(path, e))
}
