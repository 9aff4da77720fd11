use std::fmt::Display;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

/// In-memory CSV table with a fixed header.
#[derive(Clone, Debug)]
pub struct Csv {
    pub name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<String>,
}

impl Csv {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: &[&dyn Display]) {
        debug_assert_eq!(fields.len(), self.header.len());
        let line: Vec<String> = fields.iter().map(|f| f.to_string()).collect();
        self.rows.push(line.join(","));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join(self.name), self.render())
    }
}

/// CSVs plus free-form summary lines produced by one subcommand.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<Csv>,
    pub summary: Vec<String>,
}

impl RunOutput {
    pub fn note(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }
}

/// First 12 hex digits of SHA-256 over the subcommand and config text.
pub fn run_hash(command: &str, config_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0u8]);
    h.update(config_text.as_bytes());
    h.finalize()
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub struct ReportMeta<'a> {
    pub command: &'a str,
    pub config_path: &'a Path,
    pub config_text: &'a str,
    pub workers: usize,
    pub seconds: f64,
    pub status: &'a str,
}

pub fn render_report(meta: &ReportMeta, out: &RunOutput) -> String {
    let mut s = String::new();
    s.push_str(&format!("command: {}\n", meta.command));
    s.push_str(&format!("status: {}\n", meta.status));
    s.push_str(&format!("run hash: {}\n", run_hash(meta.command, meta.config_text)));
    s.push_str(&format!("wall time: {:.3} s\n", meta.seconds));
    s.push_str(&format!("workers: {}\n", meta.workers));
    s.push_str("\nsummary:\n");
    for line in &out.summary {
        s.push_str(&format!("  {line}\n"));
    }
    s.push_str("\nfiles:\n");
    for f in &out.files {
        s.push_str(&format!("  {} ({} rows)\n", f.name, f.len()));
    }
    s.push_str("  report.txt\n");
    s.push_str(&format!("\nconfig ({}):\n", meta.config_path.display()));
    for line in meta.config_text.lines() {
        s.push_str(&format!("  {line}\n"));
    }
    s
}
