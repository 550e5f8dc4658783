//! Report bundles: a directory holding named CSV tables, `config.json` and a
//! `report.json` index with fit results and provenance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use omckit::table::{format_f64, Table};

use crate::config::{Format, RunConfig};
use crate::error::{self, CliError, CliResult};
use crate::svg;

pub const REPORT_FILE: &str = "report.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub version: String,
    pub timestamp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub command: String,
    /// Table name to CSV path relative to the bundle directory.
    pub tables: BTreeMap<String, String>,
    pub fits: BTreeMap<String, serde_json::Value>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

/// Formats an optional number; `None` becomes an empty cell.
pub fn cell(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(format_f64).unwrap_or_default()
}

/// Collects outputs and writes them as they arrive, in call order.
pub struct BundleWriter {
    dir: PathBuf,
    svg: bool,
    command: String,
    tables: BTreeMap<String, String>,
    fits: BTreeMap<String, serde_json::Value>,
    warnings: Vec<String>,
}

impl BundleWriter {
    pub fn new(command: &str, cfg: &RunConfig) -> CliResult<Self> {
        let dir = cfg.outputs.directory.clone();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(BundleWriter {
            dir,
            svg: cfg.outputs.formats.contains(&Format::Svg),
            command: command.to_string(),
            tables: BTreeMap::new(),
            fits: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn table(&mut self, name: &str, t: &Table) -> CliResult<()> {
        let rel = format!("{name}.csv");
        let path = self.dir.join(&rel);
        error::write(&path, t.to_csv_string())?;
        if self.svg {
            if let Some(doc) = svg::render(name, t) {
                error::write(&self.dir.join(format!("{name}.svg")), doc)?;
            }
        }
        self.tables.insert(name.to_string(), rel);
        Ok(())
    }

    pub fn fit<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let v = serde_json::to_value(value).map_err(|e| CliError::validation(format!("serializing {name}: {e}")))?;
        self.fits.insert(name.to_string(), v);
        Ok(())
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Writes `config.json` and `report.json`.
    pub fn finish(self, cfg: &RunConfig) -> CliResult<ReportBundle> {
        let config = cfg.canonical_json();
        error::write(&self.dir.join(CONFIG_FILE), &config)?;
        let report = ReportBundle {
            command: self.command,
            tables: self.tables,
            fits: self.fits,
            warnings: self.warnings,
            provenance: Provenance {
                config_sha256: cfg.sha256(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            },
        };
        let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
        json.push(b'\n');
        error::write(&self.dir.join(REPORT_FILE), json)?;
        Ok(report)
    }
}

/// A bundle read back from disk.
pub struct LoadedBundle {
    pub dir: PathBuf,
    pub report: ReportBundle,
    pub config: RunConfig,
}

impl LoadedBundle {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(REPORT_FILE);
        let text = error::read_to_string(&path)?;
        let report = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: not a report bundle: {e}", path.display())))?;
        let cfg_path = dir.join(CONFIG_FILE);
        let config = serde_json::from_str(&error::read_to_string(&cfg_path)?)
            .map_err(|e| CliError::validation(format!("{}: invalid config: {e}", cfg_path.display())))?;
        Ok(LoadedBundle { dir: dir.to_path_buf(), report, config })
    }

    pub fn table_path(&self, name: &str) -> Option<PathBuf> {
        self.report.tables.get(name).map(|rel| self.dir.join(rel))
    }

    pub fn table(&self, name: &str) -> Option<CliResult<Table>> {
        self.table_path(name).map(|p| Table::read(&p).map_err(CliError::in_file(&p)))
    }
}
