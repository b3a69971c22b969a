//! Staged output: data files and a manifest land in the output directory
//! together or not at all.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(String, Vec<u8>)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn entries(&self) -> Vec<FileEntry> {
        self.files
            .iter()
            .map(|(name, bytes)| FileEntry {
                name: name.clone(),
                sha256: sha256_hex(bytes),
                bytes: bytes.len(),
            })
            .collect()
    }

    /// Writes every staged file plus `manifest.json` (which gets a `files`
    /// list appended) into `dir`. Files go to temporaries first and are
    /// renamed once all of them are on disk; any failure removes what was
    /// written.
    pub fn commit(self, dir: &Path, mut manifest: serde_json::Value) -> Result<Vec<FileEntry>> {
        let entries = self.entries();
        manifest["files"] = serde_json::to_value(&entries)?;
        let mut all = self.files;
        let mut text = serde_json::to_vec_pretty(&manifest)?;
        text.push(b'\n');
        all.push((MANIFEST.to_string(), text));

        fs::create_dir_all(dir)?;
        let mut temps: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(all.len());
        let staged = all.iter().try_for_each(|(name, bytes)| {
            let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
            temps.push((tmp.clone(), dir.join(name)));
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()
        });
        if let Err(e) = staged {
            for (tmp, _) in &temps {
                let _ = fs::remove_file(tmp);
            }
            return Err(e.into());
        }
        let mut done = Vec::new();
        for (tmp, dst) in &temps {
            if let Err(e) = fs::rename(tmp, dst) {
                for (tmp, _) in &temps {
                    let _ = fs::remove_file(tmp);
                }
                for d in &done {
                    let _ = fs::remove_file(d);
                }
                return Err(e.into());
            }
            done.push(dst.clone());
        }
        Ok(entries)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Rows `(x_1..x_N, Re, Im, |Psi|^2)`; floats in shortest round-trip form.
pub fn field_csv(n: usize, rows: &[(Vec<f64>, Complex64)]) -> Vec<u8> {
    let mut out = String::new();
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push_str(",re,im,abs2\n");
    for (x, v) in rows {
        for xi in x {
            out.push_str(&format!("{xi:e},"));
        }
        out.push_str(&format!("{:e},{:e},{:e}\n", v.re, v.im, v.norm_sqr()));
    }
    out.into_bytes()
}

#[derive(Serialize)]
struct JsonRow<'a> {
    x: &'a [f64],
    re: f64,
    im: f64,
    abs2: f64,
}

pub fn field_json(rows: &[(Vec<f64>, Complex64)]) -> Result<Vec<u8>> {
    let rows: Vec<JsonRow> = rows
        .iter()
        .map(|(x, v)| JsonRow {
            x,
            re: v.re,
            im: v.im,
            abs2: v.norm_sqr(),
        })
        .collect();
    let mut out = serde_json::to_vec(&rows)?;
    out.push(b'\n');
    Ok(out)
}
