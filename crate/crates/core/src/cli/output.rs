use super::{CliError, Invocation};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::PathBuf;

/// A CSV file with `#` metadata rows and one described column per field.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub meta: Vec<String>,
    /// (column name, description with unit)
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(name: impl Into<String>, columns: &[(&str, &str)]) -> Self {
        CsvTable {
            name: name.into(),
            meta: Vec::new(),
            columns: columns.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, line: impl Into<String>) -> Self {
        self.meta.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, command: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# bandedge {command}: {}", self.name);
        for m in &self.meta {
            let _ = writeln!(s, "# {m}");
        }
        let _ = writeln!(
            s,
            "# units: dimensionless collective units (time tau = N^(2/3) beta1 t isotropic, N^2 beta3 t anisotropic, N gamma t free space)"
        );
        for (name, desc) in &self.columns {
            let _ = writeln!(s, "# column {name}: {desc}");
        }
        let header: Vec<&str> = self.columns.iter().map(|c| c.0.as_str()).collect();
        let _ = writeln!(s, "{}", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// Everything a command produces before it is written to disk.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub tables: Vec<CsvTable>,
    pub summary: Value,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Value,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct OutputRecord {
    file: String,
    bytes: usize,
    sha256: String,
}

fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

pub(super) fn write_run(inv: &Invocation, art: Artifacts, wall_clock: f64) -> Result<RunOutput, CliError> {
    let command = inv.command.name();
    std::fs::create_dir_all(&inv.out)?;
    let mut files = Vec::new();
    let mut records = Vec::new();
    let mut write = |name: String, body: String| -> Result<(), CliError> {
        let path = inv.out.join(&name);
        std::fs::write(&path, body.as_bytes())?;
        records.push(OutputRecord { file: name, bytes: body.len(), sha256: sha256_hex(body.as_bytes()) });
        files.push(path);
        Ok(())
    };
    for t in &art.tables {
        write(format!("{}.csv", t.name), t.render(command))?;
    }
    let summary = json!({ "command": command, "results": art.summary, "warnings": art.warnings });
    write("summary.json".into(), serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))? + "\n")?;
    let manifest = json!({
        "command": command,
        "code_version": env!("CARGO_PKG_VERSION"),
        "config": inv.config,
        "seeds": {
            "master_seed": inv.seed,
            "expansion": "ChaCha8 generator seeded from master_seed; realization or path i uses stream i",
        },
        "workers": inv.workers,
        "convergence_check": inv.convergence_check,
        "wall_clock_seconds": wall_clock,
        "outputs": records,
    });
    let path = inv.out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))? + "\n")?;
    files.push(path);
    Ok(RunOutput { dir: inv.out.clone(), files, summary, warnings: art.warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_described_columns() {
        let mut t = CsvTable::new("x", &[("tau", "time"), ("j3", "inversion")]).meta("delta_c = 0");
        t.push(vec![0.0, 1.0]);
        let s = t.render("meanfield");
        assert!(s.contains("# column j3: inversion\n"));
        assert!(s.ends_with("tau,j3\n0e0,1e0\n"));
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
