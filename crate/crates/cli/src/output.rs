//! Result files: CSV or NDJSON data, a JSON record, plot-data export.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::run::{ResultRecord, Row};

pub const CSV_HEADER: &str = "series,x,value_re,value_im,abs,stderr,n";

pub fn rows_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{},{}\n", r.series, r.x, r.value_re, r.value_im, r.abs, r.stderr, r.n));
    }
    out
}

pub fn rows_ndjson(rows: &[Row]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("row serializes"));
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
struct RecordFile<'a> {
    experiment: &'a str,
    config_hash: &'a str,
    seed: u64,
    wall_clock_s: f64,
    data_file: String,
    n_rows: usize,
    config: &'a ExperimentConfig,
}

/// Data files depend only on the config and seed; the wall-clock time goes
/// to the separate record file.
pub fn write_outputs(record: &ResultRecord, cfg: &ExperimentConfig, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let (ext, data) = match cfg.output.format {
        Format::Csv => ("csv", rows_csv(&record.rows)),
        Format::Ndjson => ("ndjson", rows_ndjson(&record.rows)),
    };
    let data_path = dir.join(format!("{}.{ext}", record.experiment));
    write_atomic(&data_path, &data)?;
    let mut written = vec![data_path.clone()];
    if !record.progress.is_empty() {
        let p = dir.join(format!("{}.progress.ndjson", record.experiment));
        write_atomic(&p, &rows_ndjson(&record.progress))?;
        written.push(p);
    }
    let meta = RecordFile {
        experiment: &record.experiment,
        config_hash: &record.config_hash,
        seed: record.seed,
        wall_clock_s: record.wall_clock_s,
        data_file: data_path.file_name().unwrap().to_string_lossy().into_owned(),
        n_rows: record.rows.len(),
        config: cfg,
    };
    let p = dir.join(format!("{}.record.json", record.experiment));
    write_atomic(&p, &(serde_json::to_string_pretty(&meta).expect("record serializes") + "\n"))?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMetric(pub String);

impl std::fmt::Display for UnknownMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown metric {:?}", self.0)
    }
}

/// Long-format `(x, series, value, stderr)` CSV for one series.
pub fn export_plotdata(record: &ResultRecord, which: &str) -> Result<String, UnknownMetric> {
    let rows: Vec<&Row> = record.rows.iter().filter(|r| r.series == which).collect();
    if rows.is_empty() {
        return Err(UnknownMetric(which.into()));
    }
    let mut out = String::from("x,series,value,stderr\n");
    for r in rows {
        let value = if r.value_im == 0.0 { r.value_re } else { r.abs };
        out.push_str(&format!("{},{},{},{}\n", r.x, r.series, value, r.stderr));
    }
    Ok(out)
}
