use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use csv::{ReaderBuilder, StringRecord, Trim};
use nndm::Dataset;
use serde::Serialize;
use tempfile::NamedTempFile;

/// Numeric CSV contents. `lines[i]` is the 1-based source line of `rows[i]`.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    pub lines: Vec<u64>,
}

impl Table {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn to_dataset(&self, path: &Path) -> Result<Dataset> {
        let data = Dataset::new(self.rows.concat(), self.rows.len(), self.width())
            .with_context(|| format!("{}", path.display()))?;
        match &self.header {
            Some(h) => Ok(data.with_column_names(h.clone())?),
            None => Ok(data),
        }
    }
}

fn is_number(field: &str) -> bool {
    field.parse::<f64>().is_ok()
}

/// Reads a comma-separated numeric table. The first row is a header when any
/// of its fields is non-numeric. Lines starting with `#` are skipped.
pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(Trim::All)
        .from_reader(file);
    let mut header = None;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    let mut record = StringRecord::new();
    let mut first = true;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => bail!("{}: {}", path.display(), describe_csv_error(&e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        if first {
            first = false;
            if !record.iter().all(is_number) {
                header = Some(record.iter().map(str::to_owned).collect());
                continue;
            }
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(anyhow!(
                    "{}:{}:{}: cannot parse `{}` as a finite number",
                    path.display(),
                    line,
                    c + 1,
                    field
                )),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
        lines.push(line);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(Table { header, rows, lines })
}

fn describe_csv_error(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => format!(
            "line {}: expected {} fields, found {}",
            pos.as_ref().map_or(0, |p| p.line()),
            expected_len,
            len
        ),
        csv::ErrorKind::Utf8 { pos, err } => format!(
            "line {}: field {} is not valid UTF-8",
            pos.as_ref().map_or(0, |p| p.line()),
            err.field() + 1
        ),
        _ => e.to_string(),
    }
}

/// Features and 0/1 labels split from a table. `label` is a header name or
/// a 1-based column index; `None` selects the last column.
pub fn split_labels(table: &Table, label: Option<&str>, path: &Path) -> Result<(Dataset, Vec<u8>)> {
    let width = table.width();
    if width < 2 {
        bail!("{}: label column absent; need at least one feature and a label", path.display());
    }
    let col = match label {
        None => width - 1,
        Some(wanted) => {
            let by_name = table
                .header
                .as_ref()
                .and_then(|h| h.iter().position(|name| name == wanted));
            match (by_name, wanted.parse::<usize>()) {
                (Some(c), _) => c,
                (None, Ok(i)) if (1..=width).contains(&i) => i - 1,
                _ => bail!("{}: label column `{}` not found", path.display(), wanted),
            }
        }
    };
    let mut labels = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len() * (width - 1));
    for (row, line) in table.rows.iter().zip(&table.lines) {
        labels.push(match row[col] {
            0.0 => 0,
            1.0 => 1,
            v => bail!("{}:{}:{}: label must be 0 or 1, got {}", path.display(), line, col + 1, v),
        });
        values.extend(row.iter().enumerate().filter(|&(c, _)| c != col).map(|(_, v)| *v));
    }
    let data = Dataset::new(values, labels.len(), width - 1)?;
    let data = match &table.header {
        Some(h) => data.with_column_names(
            h.iter().enumerate().filter(|&(c, _)| c != col).map(|(_, s)| s.clone()).collect(),
        )?,
        None => data,
    };
    Ok((data, labels))
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// CSV text with a leading `#` line holding the compact configuration echo.
pub fn csv_with_echo(echo: &serde_json::Value, header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "# {}", serde_json::to_string(echo)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| anyhow!("{}", e.error()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Output files written to temporaries beside their targets and renamed into
/// place only by [`Staged::commit`]; dropping uncommitted staging deletes
/// the temporaries.
#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn add(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if self.files.iter().any(|(_, p)| p == path) {
            bail!("output path {} requested twice", path.display());
        }
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("cannot write to {}", dir.display()))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        self.files.push((tmp, path.to_path_buf()));
        Ok(())
    }

    pub fn commit(self) -> Result<()> {
        let mut done: Vec<PathBuf> = Vec::new();
        for (tmp, path) in self.files {
            if let Err(e) = tmp.persist(&path) {
                for p in &done {
                    let _ = std::fs::remove_file(p);
                }
                return Err(anyhow!("cannot write {}: {}", path.display(), e.error));
            }
            done.push(path);
        }
        Ok(())
    }
}
