//! Tabular outputs: an in-memory table type, an RFC-4180 CSV encoder, and
//! the output-directory MANIFEST with per-file SHA-256 digests.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};

/// A rectangular table with named columns; the unit every figure and CSV
/// artifact is built from.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row<S: Into<String>>(&mut self, cells: Vec<S>) {
        let cells: Vec<String> = cells.into_iter().map(Into::into).collect();
        assert_eq!(
            cells.len(),
            self.columns.len(),
            "row width {} does not match {} columns",
            cells.len(),
            self.columns.len()
        );
        self.rows.push(cells);
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .with_context(|| format!("table has no column named {name:?}"))
    }

    /// All cells of one column parsed as f64; empty cells become NaN.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                let cell = &r[idx];
                if cell.is_empty() {
                    Ok(f64::NAN)
                } else {
                    cell.parse::<f64>()
                        .with_context(|| format!("cell {cell:?} in column {name:?} is not numeric"))
                }
            })
            .collect()
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<String>> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx].clone()).collect())
    }

    /// RFC-4180 encoding: CRLF line endings, fields containing commas,
    /// quotes, or line breaks quoted with internal quotes doubled.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        encode_record(&mut out, &self.columns);
        for row in &self.rows {
            encode_record(&mut out, row);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())
            .with_context(|| format!("writing {}", path.display()))
    }
}

fn encode_record(out: &mut String, cells: &[String]) {
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        if cell.contains([',', '"', '\n', '\r']) {
            out.push('"');
            out.push_str(&cell.replace('"', "\"\""));
            out.push('"');
        } else {
            out.push_str(cell);
        }
    }
    out.push_str("\r\n");
}

/// Shortest round-trip decimal form of an f64 (Rust's Display), so equal
/// numbers always serialize to identical bytes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_cell<T: Display>(v: T) -> String {
    format!("{v}")
}

/// SHA-256 of a file, hex-encoded.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Writes `MANIFEST` in the output directory: one `file <sha256> <path>`
/// line per produced artifact (sorted by path, MANIFEST itself excluded),
/// preceded by a status line. A failed run records which stage failed so a
/// partial directory is still accounted for.
pub fn write_manifest(out_dir: &Path, failed_stage: Option<&str>) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let mut files = Vec::new();
    collect_files(out_dir, out_dir, &mut files)?;
    files.sort();
    let mut text = String::from("medley-manifest v1\n");
    match failed_stage {
        None => text.push_str("status complete\n"),
        Some(stage) => {
            text.push_str("status partial\n");
            text.push_str(&format!("failed_stage {stage}\n"));
        }
    }
    for rel in &files {
        let digest = sha256_file(&out_dir.join(rel))?;
        text.push_str(&format!("file {digest} {rel}\n"));
    }
    let manifest_path = out_dir.join("MANIFEST");
    fs::write(&manifest_path, text)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(manifest_path)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("children live under the walk root");
            let rel = rel.to_string_lossy().replace('\\', "/");
            if rel == "MANIFEST" {
                continue;
            }
            out.push(rel);
        }
    }
    Ok(())
}

/// Parses a MANIFEST back into (status line, failed stage, file->digest).
pub fn read_manifest(path: &Path) -> Result<ManifestSummary> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("medley-manifest v1") => {}
        other => bail!("unrecognized manifest header {other:?}"),
    }
    let status = match lines.next() {
        Some(s) if s.starts_with("status ") => s["status ".len()..].to_string(),
        other => bail!("missing manifest status line, got {other:?}"),
    };
    let mut failed_stage = None;
    let mut files = Vec::new();
    for line in lines {
        if let Some(rest) = line.strip_prefix("failed_stage ") {
            failed_stage = Some(rest.to_string());
        } else if let Some(rest) = line.strip_prefix("file ") {
            let (digest, rel) = rest
                .split_once(' ')
                .with_context(|| format!("malformed manifest entry {line:?}"))?;
            files.push((rel.to_string(), digest.to_string()));
        } else if !line.trim().is_empty() {
            bail!("unrecognized manifest line {line:?}");
        }
    }
    Ok(ManifestSummary {
        status,
        failed_stage,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct ManifestSummary {
    pub status: String,
    pub failed_stage: Option<String>,
    /// (relative path, sha256) pairs in manifest order.
    pub files: Vec<(String, String)>,
}
