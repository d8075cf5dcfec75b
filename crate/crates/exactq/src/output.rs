//! CSV, JSON and text-table output.

use std::fs;
use std::path::{Path, PathBuf};

use exactq_core::oracles::RatioAudit;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::experiment::{Experiment, ReplicaRecord, Summary};

/// One row of the per-replica CSV. Aborted replicas leave `M0` and
/// `first_idle` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub replica_id: u64,
    #[serde(rename = "M0")]
    pub m0: Option<f64>,
    pub first_idle: Option<usize>,
    pub function_evals: u64,
}

impl From<&ReplicaRecord> for ReplicaRow {
    fn from(r: &ReplicaRecord) -> Self {
        Self { replica_id: r.replica_id, m0: r.m0, first_idle: r.first_idle, function_evals: r.function_evals }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub batch: usize,
    pub batch_size: usize,
    pub mean: f64,
}

pub fn write_replicas_csv(path: &Path, records: &[ReplicaRecord]) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(ReplicaRow::from(r))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn read_replicas_csv(path: &Path) -> AppResult<Vec<ReplicaRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_batches_csv(path: &Path, means: &[f64], batch_size: usize) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (batch, mean) in means.iter().enumerate() {
        w.serialize(BatchRow { batch, batch_size, mean: *mean })?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| AppError::io(path, e))
}

/// Left-aligned first column, right-aligned rest, two spaces between.
pub fn align(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&width).enumerate() {
            let pad = w - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn ci(lo: f64, hi: f64) -> String {
    format!("[{lo:.4}, {hi:.4}]")
}

/// Comparison table, one row per scenario.
pub fn render_table(summaries: &[Summary]) -> AppResult<String> {
    if summaries.is_empty() {
        return Err(AppError::Config("no summaries to tabulate".into()));
    }
    let header = ["scenario", "rho", "replicas", "aborted", "exact 95% CI", "batch-means 95% CI", "overlap", "exact s", "lindley s"];
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                s.rho.map_or("-".into(), |r| format!("{r:.4}")),
                s.completed.to_string(),
                s.aborted.len().to_string(),
                ci(s.exact.lower, s.exact.upper),
                s.lindley.map_or("-".into(), |b| ci(b.lower, b.upper)),
                s.overlap.map_or("-".into(), |o| if o { "yes" } else { "no" }.into()),
                format!("{:.2}", s.wall_clock.exact_s),
                format!("{:.2}", s.wall_clock.lindley_s),
            ]
        })
        .collect();
    Ok(align(&header, &rows))
}

pub fn render_audit(a: &RatioAudit) -> String {
    let header = ["k", "g(k)", "union", "tilt (sharp)", "tilt (envelope)", "B^c", "pass"];
    let rows: Vec<Vec<String>> = a
        .rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                format!("{:.3e}", r.g),
                format!("{:.3e}", r.a_union),
                format!("{:.3e}", r.tilt_sharp),
                format!("{:.3e}", r.tilt_envelope),
                format!("{:.3e}", r.bc_union),
                if r.pass() { "yes" } else { "no" }.into(),
            ]
        })
        .collect();
    align(&header, &rows)
}

/// Files written for one experiment.
#[derive(Debug, Clone)]
pub struct Written {
    pub replicas: PathBuf,
    pub lindley: Option<PathBuf>,
    pub summary: PathBuf,
    pub table: PathBuf,
}

pub fn emit(dir: &Path, e: &Experiment) -> AppResult<Written> {
    fs::create_dir_all(dir).map_err(|err| AppError::io(dir, err))?;
    let name = &e.summary.name;
    let replicas = dir.join(format!("{name}_replicas.csv"));
    write_replicas_csv(&replicas, &e.records)?;
    let lindley = match e.summary.lindley {
        Some(b) => {
            let p = dir.join(format!("{name}_lindley.csv"));
            write_batches_csv(&p, &e.lindley_means, b.batch_size)?;
            Some(p)
        }
        None => None,
    };
    let summary = dir.join(format!("{name}_summary.json"));
    write_json(&summary, &e.summary)?;
    let table = dir.join(format!("{name}_table.txt"));
    let text = render_table(std::slice::from_ref(&e.summary))?;
    fs::write(&table, text).map_err(|err| AppError::io(&table, err))?;
    Ok(Written { replicas, lindley, summary, table })
}
