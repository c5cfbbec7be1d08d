//! Output files: metadata headers, number formatting, atomic writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "BUTTERFLY_LAB_OUT";

/// What is needed to reproduce a run: tool version, hash of the resolved config, seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Metadata {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        Self {
            command: command.to_owned(),
            version: VERSION.to_owned(),
            config_sha256: config_hash(cfg),
            seed: cfg.seed,
        }
    }

    pub fn csv_header(&self) -> String {
        format!(
            "# butterfly-lab {} {}\n# config_sha256 {}\n# seed {}\n",
            self.version, self.command, self.config_sha256, self.seed
        )
    }

    pub fn json(&self) -> Value {
        json!({
            "command": self.command,
            "version": self.version,
            "config_sha256": self.config_sha256,
            "seed": self.seed,
        })
    }
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// `x` rounded to 12 significant digits, printed in its shortest form.
pub fn sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}").to_lowercase();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

pub fn csv(meta: &Metadata, header: &str, rows: &[Vec<String>]) -> String {
    let mut out = meta.csv_header();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the same directory, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, &text)
}

/// Flag, then config, then `BUTTERFLY_LAB_OUT`, then `./butterfly-out`.
pub fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("butterfly-out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig(2.0), "2");
        assert_eq!(sig(0.1), "0.1");
        assert_eq!(sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig(2.0617453551622655), "2.06174535516");
        assert_eq!(sig(-1234567.891234567), "-1234567.89123");
        assert_eq!(sig(f64::NAN), "nan");
        assert_eq!(sig(4.440892098500626e-16), "4.4408920985e-16");
        assert_eq!(sig(0.0), "0");
    }

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn csv_layout() {
        let meta = Metadata::new("otoc", &RunConfig::default());
        let text = csv(&meta, "a,b", &[vec!["1".into(), "2".into()]]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# butterfly-lab"));
        assert_eq!(&lines[3..], &["a,b", "1,2"]);
    }
}
