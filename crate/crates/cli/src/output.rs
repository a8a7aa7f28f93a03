//! Result tables, CSV rendering and run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ResolvedConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    /// Reals use 9 significant digits in scientific notation.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) if v.is_nan() => "nan".into(),
            Cell::Real(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Real(v) => format!("{v:.8e}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

/// One experiment's output before rendering.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key=value` lines written after the manifest line.
    pub notes: Vec<String>,
    /// Monte-Carlo sample counts keyed by metric.
    pub sample_counts: BTreeMap<String, u64>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn count(&mut self, metric: &str, n: u64) {
        *self.sample_counts.entry(metric.to_owned()).or_default() += n;
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of everything that determines the CSV body: the resolved config
/// minus the output path, and the artifact version.
pub fn config_hash(cfg: &ResolvedConfig) -> String {
    let mut c = cfg.clone();
    c.output_path = PathBuf::new();
    let body = serde_json::json!({ "version": crate::VERSION, "config": c });
    sha256_hex(body.to_string().as_bytes())
}

pub fn render_csv(table: &Table, config_hash: &str) -> Result<Vec<u8>, csv::Error> {
    let mut buf = format!("# manifest config_sha256={config_hash}\n");
    for n in &table.notes {
        buf.push_str("# ");
        buf.push_str(n);
        buf.push('\n');
    }
    let mut w = csv::Writer::from_writer(buf.into_bytes());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: &'static str,
    pub experiment: String,
    pub seed: u64,
    pub config_sha256: String,
    pub csv_sha256: String,
    pub csv_path: PathBuf,
    pub rows: usize,
    pub duration_seconds: f64,
    pub sample_counts: BTreeMap<String, u64>,
    pub config: ResolvedConfig,
}

/// `dir/name.csv` → `dir/name.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}.manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_format_has_nine_significant_digits() {
        assert_eq!(Cell::Real(1.0).render(), "1.00000000e0");
        assert_eq!(Cell::Real(-0.0012345678912).render(), "-1.23456789e-3");
        assert_eq!(Cell::Real(f64::NAN).render(), "nan");
        assert_eq!(Cell::Empty.render(), "");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["m", "x"]);
        t.notes.push("channel=flat".into());
        t.push(vec![1usize.into(), 0.5.into()]);
        let s = String::from_utf8(render_csv(&t, "abc").unwrap()).unwrap();
        assert_eq!(
            s,
            "# manifest config_sha256=abc\n# channel=flat\nm,x\n1,5.00000000e-1\n"
        );
    }

    #[test]
    fn manifest_sits_next_to_csv() {
        assert_eq!(
            manifest_path(Path::new("out/fig2.csv")),
            PathBuf::from("out/fig2.manifest.json")
        );
        assert_eq!(
            manifest_path(Path::new("fig2")),
            PathBuf::from("fig2.manifest.json")
        );
    }
}
