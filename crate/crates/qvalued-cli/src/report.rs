//! Deterministic suite outputs: one CSV per suite plus a summary with one
//! pass/fail line per assertion and the fitted constants. No timestamps, so
//! reruns with the same seed are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

/// Stable float formatting for CSV bodies.
pub fn fmt(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.12e}")
    }
}

pub struct Summary {
    suite: String,
    seed: u64,
    lines: Vec<(bool, String)>,
    notes: Vec<String>,
}

impl Summary {
    pub fn new(suite: &str, seed: u64) -> Self {
        Self { suite: suite.into(), seed, lines: Vec::new(), notes: Vec::new() }
    }

    /// Record one asserted inequality.
    pub fn check(&mut self, name: &str, pass: bool, detail: String) -> bool {
        self.lines.push((pass, format!("{name} {detail}")));
        pass
    }

    /// Record a reported (non-asserted) quantity.
    pub fn note(&mut self, name: &str, detail: String) {
        self.notes.push(format!("{name} {detail}"));
    }

    pub fn all_passed(&self) -> bool {
        self.lines.iter().all(|(p, _)| *p)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "suite: {}", self.suite).unwrap();
        writeln!(out, "seed: {}", self.seed).unwrap();
        for (pass, line) in &self.lines {
            writeln!(out, "{} {line}", if *pass { "PASS" } else { "FAIL" }).unwrap();
        }
        for line in &self.notes {
            writeln!(out, "INFO {line}").unwrap();
        }
        writeln!(out, "result: {}", if self.all_passed() { "PASS" } else { "FAIL" }).unwrap();
        out
    }

    pub fn write(&self, out_dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join(format!("summary_{}.txt", self.suite));
        std::fs::write(&path, self.render())
            .with_context(|| format!("writing {}", path.display()))
    }
}

/// CSV writer with a fixed header and deterministic body.
pub struct Csv {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(out_dir: &Path, name: &str, header: &[&str]) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out_dir)?;
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { path: out_dir.join(name), writer })
    }

    pub fn row(&mut self, fields: &[String]) -> anyhow::Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self) -> anyhow::Result<()> {
        let bytes = self.writer.into_inner()?;
        std::fs::write(&self.path, bytes)
            .with_context(|| format!("writing {}", self.path.display()))
    }
}
