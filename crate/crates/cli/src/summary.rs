//! JSON summaries, CSV artifacts and atomic file output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::CliError;

pub const SUMMARY_SCHEMA: &str = "kahler-summary/1";
pub const REPORT_SCHEMA: &str = "kahler-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// measured < tolerance
    Lt,
    /// measured ≤ tolerance
    Le,
    /// measured > tolerance
    Gt,
    /// measured ≥ tolerance
    Ge,
}

impl Comparison {
    pub fn holds(self, measured: f64, tolerance: f64) -> bool {
        // NaN fails every comparison
        match self {
            Comparison::Lt => measured < tolerance,
            Comparison::Le => measured <= tolerance,
            Comparison::Gt => measured > tolerance,
            Comparison::Ge => measured >= tolerance,
        }
    }

    /// Whether larger measurements are worse.
    pub fn upper_bound(self) -> bool {
        matches!(self, Comparison::Lt | Comparison::Le)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub claim: String,
    /// What the check ran on, e.g. `ball_horospherical n=2`.
    pub subject: String,
    pub description: String,
    /// `None` for a vacuous check over an empty sample. Non-finite values
    /// serialize as `null` too, so readers go by `pass`.
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Item {
    pub fn new(
        claim: &str,
        subject: impl Into<String>,
        description: &str,
        measured: Option<f64>,
        tolerance: f64,
        comparison: Comparison,
    ) -> Self {
        let pass = measured.map_or(true, |m| m.is_finite() && comparison.holds(m, tolerance));
        Self {
            claim: claim.to_string(),
            subject: subject.into(),
            description: description.to_string(),
            measured,
            tolerance,
            comparison,
            pass,
        }
    }

    pub fn line(&self) -> String {
        let m = self.measured.map_or("vacuous".to_string(), |m| format!("{m:.3e}"));
        format!(
            "[{}] {} ({}): {m} {} {:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.claim,
            self.subject,
            self.comparison.symbol(),
            self.tolerance
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: String,
    pub command: String,
    pub settings: serde_json::Value,
    pub items: Vec<Item>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

impl Summary {
    pub fn new(settings: &Settings, items: Vec<Item>, mut warnings: Vec<String>) -> Self {
        let mut all = settings.warnings.clone();
        all.append(&mut warnings);
        Self {
            schema_version: SUMMARY_SCHEMA.to_string(),
            command: settings.command.name().to_string(),
            settings: serde_json::to_value(settings).expect("settings serialize"),
            pass: items.iter().all(|i| i.pass),
            items,
            warnings: all,
        }
    }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
    Ok(())
}

/// CSV with a leading `# schema: <kind>` line.
pub fn write_csv(dir: &Path, name: &str, kind: &str, body: &str) -> Result<(), CliError> {
    let text = format!("# schema: {kind}/1\n{body}");
    write_atomic(dir, name, text.as_bytes())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons_and_vacuous_items() {
        assert!(Item::new("x", "s", "", Some(1e-9), 1e-8, Comparison::Lt).pass);
        assert!(!Item::new("x", "s", "", Some(f64::NAN), 1e-8, Comparison::Lt).pass);
        assert!(!Item::new("x", "s", "", Some(f64::INFINITY), 1e-8, Comparison::Gt).pass);
        assert!(Item::new("x", "s", "", None, 1e-8, Comparison::Lt).pass);
        assert!(Item::new("x", "s", "", Some(0.0), 0.0, Comparison::Le).pass);
        assert!(!Item::new("x", "s", "", Some(0.0), 0.0, Comparison::Gt).pass);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", b"one").unwrap();
        write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("a.txt")).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        write_csv(dir.path(), "b.csv", "kahler-test", "x\n1\n").unwrap();
        let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
        assert!(text.starts_with("# schema: kahler-test/1\nx\n"));
    }
}
