//! Regret traces, their CSV form, and cross-seed summaries.

use std::path::Path;

use libo_core::lifelong::LifelongRunRecord;

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 7] = [
    "step",
    "task",
    "instantaneous",
    "cumulative",
    "kernel_size",
    "recovered",
    "explored",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    /// 1-based over the whole run.
    pub step: usize,
    pub task: usize,
    pub instantaneous: f64,
    pub cumulative: f64,
    pub kernel_size: usize,
    /// `None` when the environment has no known support.
    pub recovered: Option<bool>,
    pub explored: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    pub rows: Vec<TraceRow>,
}

impl RegretTrace {
    pub fn from_record(record: &LifelongRunRecord) -> Self {
        let mut rows = Vec::new();
        let mut cumulative = 0.0;
        for task in &record.tasks {
            for s in &task.steps {
                cumulative += s.regret;
                rows.push(TraceRow {
                    step: rows.len() + 1,
                    task: task.task,
                    instantaneous: s.regret,
                    cumulative,
                    kernel_size: task.kernel.len(),
                    recovered: task.recovered,
                    explored: s.explored,
                });
            }
        }
        RegretTrace { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn instantaneous(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.instantaneous).collect()
    }

    pub fn cumulative(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cumulative).collect()
    }

    pub fn final_cumulative(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative)
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRACE_HEADER).expect("in-memory write");
        for r in &self.rows {
            let recovered = match r.recovered {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            w.write_record([
                r.step.to_string(),
                r.task.to_string(),
                r.instantaneous.to_string(),
                r.cumulative.to_string(),
                r.kernel_size.to_string(),
                recovered.to_string(),
                u8::from(r.explored).to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text).map_err(|m| Error::format(path, m))
    }

    pub fn from_csv_str(text: &str) -> std::result::Result<Self, String> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().map_err(|e| e.to_string())?;
        if header.iter().ne(TRACE_HEADER) {
            return Err(format!(
                "unexpected header {:?}",
                header.iter().collect::<Vec<_>>()
            ));
        }
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |what: &str| format!("row {}: bad {what}", line + 2);
            rows.push(TraceRow {
                step: field(0).parse().map_err(|_| bad("step"))?,
                task: field(1).parse().map_err(|_| bad("task"))?,
                instantaneous: field(2).parse().map_err(|_| bad("instantaneous"))?,
                cumulative: field(3).parse().map_err(|_| bad("cumulative"))?,
                kernel_size: field(4).parse().map_err(|_| bad("kernel_size"))?,
                recovered: match field(5) {
                    "" => None,
                    "1" => Some(true),
                    "0" => Some(false),
                    _ => return Err(bad("recovered")),
                },
                explored: match field(6) {
                    "1" => true,
                    "0" => false,
                    _ => return Err(bad("explored")),
                },
            });
        }
        Ok(RegretTrace { rows })
    }
}

/// Per-step mean and standard error across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub seeds: usize,
    pub mean: Vec<f64>,
    /// Sample standard deviation over `√seeds`; zero for a single seed.
    pub standard_error: Vec<f64>,
}

impl Summary {
    pub fn final_mean(&self) -> f64 {
        self.mean.last().copied().unwrap_or(0.0)
    }

    pub fn final_standard_error(&self) -> f64 {
        self.standard_error.last().copied().unwrap_or(0.0)
    }
}

/// Summarizes equal-length series. Values are sorted per step before
/// summation, so the result does not depend on the order of the series.
pub fn summarize(series: &[Vec<f64>]) -> Result<Summary> {
    let first = series
        .first()
        .ok_or_else(|| Error::Config("nothing to summarize".into()))?;
    let len = first.len();
    if let Some(s) = series.iter().find(|s| s.len() != len) {
        return Err(Error::Ragged {
            expected: len,
            found: s.len(),
        });
    }
    let k = series.len();
    let mut mean = Vec::with_capacity(len);
    let mut se = Vec::with_capacity(len);
    let mut column = vec![0.0; k];
    for i in 0..len {
        for (c, s) in column.iter_mut().zip(series) {
            *c = s[i];
        }
        column.sort_by(f64::total_cmp);
        let m = column.iter().sum::<f64>() / k as f64;
        let e = if k > 1 {
            let ss: f64 = column.iter().map(|v| (v - m) * (v - m)).sum();
            (ss / (k - 1) as f64).sqrt() / (k as f64).sqrt()
        } else {
            0.0
        };
        mean.push(m);
        se.push(e);
    }
    Ok(Summary {
        seeds: k,
        mean,
        standard_error: se,
    })
}

/// Cumulative and instantaneous summaries of a set of traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub cumulative: Summary,
    pub instantaneous: Summary,
}

pub fn summarize_traces(traces: &[&RegretTrace]) -> Result<TraceSummary> {
    let cum: Vec<Vec<f64>> = traces.iter().map(|t| t.cumulative()).collect();
    let inst: Vec<Vec<f64>> = traces.iter().map(|t| t.instantaneous()).collect();
    Ok(TraceSummary {
        cumulative: summarize(&cum)?,
        instantaneous: summarize(&inst)?,
    })
}

impl TraceSummary {
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "step",
            "mean_cumulative",
            "se_cumulative",
            "mean_instantaneous",
            "se_instantaneous",
        ])
        .expect("in-memory write");
        for i in 0..self.cumulative.mean.len() {
            w.write_record([
                (i + 1).to_string(),
                self.cumulative.mean[i].to_string(),
                self.cumulative.standard_error[i].to_string(),
                self.instantaneous.mean[i].to_string(),
                self.instantaneous.standard_error[i].to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}
