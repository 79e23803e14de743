use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Fatal checks turn the exit status nonzero.
    pub fatal: bool,
}

#[derive(Debug, Default)]
pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub scalars: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

/// Shortest round-trip form, exponent notation outside [1e-4, 1e6).
pub fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && !(1e-4..1e6).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl Report {
    pub fn new(header: &[&'static str]) -> Self {
        Report {
            header: header.to_vec(),
            ..Default::default()
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn scalar(&mut self, key: impl Into<String>, value: impl ToString) {
        self.scalars.push((key.into(), value.to_string()));
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            fatal: false,
        });
    }

    pub fn audit(&mut self, name: impl Into<String>, pass: bool) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            fatal: true,
        });
    }

    pub fn fatal_failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.fatal && !c.pass).collect()
    }

    /// Writes `<id>.csv` and `<id>.summary` into `dir`.
    pub fn write(&self, dir: &Path, id: &str, cfg: &ExperimentConfig) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let csv_path = dir.join(format!("{id}.csv"));
        let mut w = csv::Writer::from_path(&csv_path)
            .with_context(|| format!("writing {}", csv_path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;

        let mut s = String::new();
        for (k, v) in cfg.echo() {
            s.push_str(&format!("config.{k}={v}\n"));
        }
        for (k, v) in &self.scalars {
            s.push_str(&format!("{k}={v}\n"));
        }
        for c in &self.checks {
            s.push_str(&format!(
                "check.{}={}\n",
                c.name,
                if c.pass { "pass" } else { "fail" }
            ));
        }
        let ok = self.checks.iter().all(|c| c.pass);
        s.push_str(&format!("status={}\n", if ok { "pass" } else { "fail" }));
        let summary = dir.join(format!("{id}.summary"));
        fs::write(&summary, s).with_context(|| format!("writing {}", summary.display()))?;
        Ok(())
    }
}
