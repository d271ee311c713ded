//! Output files: atomic writes, numeric CSV tables and the run manifest.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io(e)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Index columns print as integers, everything else as `{:.16e}`.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        let int: Vec<bool> = self.columns.iter().map(|c| INTEGER_COLUMNS.contains(&c.as_str())).collect();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().zip(&int).map(|(v, i)| format_cell(*v, *i)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, column: 1, message: "empty table".into() })??;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .enumerate()
                .map(|(c, s)| {
                    s.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 2,
                        column: c + 1,
                        message: format!("bad number '{s}': {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    line: i + 2,
                    column: 1,
                    message: format!("expected {} fields, found {}", columns.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

const INTEGER_COLUMNS: [&str; 6] = ["n", "m", "point", "N_B", "ok", "monotone"];

fn format_cell(v: f64, integer: bool) -> String {
    if integer && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub point: usize,
    pub settings: Vec<(String, f64)>,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub config_echo: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub timings: Vec<Timing>,
    pub version: String,
    pub seed: Option<u64>,
    pub warnings: Vec<String>,
    pub failures: Vec<PointFailure>,
}

/// Hex SHA-256 of the command name and the canonical config JSON.
pub fn run_id(command: &str, config: &serde_json::Value) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0u8]);
    h.update(serde_json::to_string(config).unwrap_or_default().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(["q", "n", "E"]);
        t.push(vec![-2.0, 0.0, 0.123456789012345678]);
        t.push(vec![0.0125, 3.0, -1e-300]);
        let back = Table::read(std::io::Cursor::new(t.to_csv())).unwrap();
        assert_eq!(back, t);
        assert!(matches!(
            Table::read(std::io::Cursor::new("a,b\n1,2\n3\n")),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempdir();
        let p = dir.join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        let leftovers = std::fs::read_dir(&dir).unwrap().count();
        assert_eq!(leftovers, 1);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn run_id_is_deterministic() {
        let c = serde_json::json!({"a": 1, "b": [1.5, 2]});
        assert_eq!(run_id("bands", &c), run_id("bands", &c.clone()));
        assert_ne!(run_id("bands", &c), run_id("gs", &c));
        assert_eq!(run_id("bands", &c).len(), 64);
    }

    fn tempdir() -> PathBuf {
        let d = std::env::temp_dir().join(format!("ringlattice-io-{}-{:?}", std::process::id(), std::thread::current().id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }
}
