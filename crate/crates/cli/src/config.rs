//! Run configuration: JSON file, command-line overrides, defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kahler_core::domains::{defining_function_by_name, potential_by_name};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Verify,
    Scale,
    Flow,
    Solve,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Scale => "scale",
            Command::Flow => "flow",
            Command::Solve => "solve",
            Command::Report => "report",
        }
    }
}

/// Keys accepted in a config file. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub potentials: Option<Vec<String>>,
    pub domains: Option<Vec<String>>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub sample_count: Option<usize>,
    /// Numerical tolerance of the underlying solver (ODE or Newton).
    pub tol: Option<f64>,
    /// Per-claim acceptance thresholds.
    pub tolerances: Option<BTreeMap<String, f64>>,
    pub out: Option<PathBuf>,
    pub j_max: Option<usize>,
    pub pairs: Option<usize>,
    pub t_end: Option<f64>,
    pub starts: Option<usize>,
    pub gridsize: Option<usize>,
    pub inputs: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }
}

/// Values given on the command line; these win over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dim: Option<usize>,
    pub tol: Option<f64>,
}

/// Default acceptance thresholds, keyed by claim id.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("einstein", 1e-8),
        ("pde", 1e-6),
        ("curvature_identity", 1e-7),
        ("key_equation", 1e-8),
        ("key_equation_control", 1e-3),
        ("s_eigenvector", 1e-7),
        ("s_trace", 1e-7),
        ("metric_inverse", 1e-10),
        ("length_identity", 1e-10),
        ("length_bound", 1e-12),
        ("fefferman_ball", 1e-14),
        ("scaling_gap", 1e-6),
        ("scaling_length", 1e-4),
        ("scaling_contraction", 0.75),
        ("gronwall", 0.0),
        ("pluriharmonic", 1e-8),
        ("field_holomorphic", 1e-8),
        ("flow_margin", 0.0),
        ("flow_rho_drift", 1e-6),
        ("flow_phi_drift", 1e-6),
        ("flow_cr", 1e-4),
        ("flow_isometry", 1e-4),
        ("rho_scaling", 1e-5),
        ("ma_ball", 1e-7),
        ("ma_residual", 1e-8),
        ("ma_c_bound", 2.0),
        ("ma_boundary_limit", 1e-2),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Fully resolved settings of one run. Serialized into every summary, so it
/// deliberately leaves out the output directory.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub command: Command,
    pub potentials: Vec<String>,
    pub domains: Vec<String>,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub sample_count: usize,
    pub tol: Option<f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub j_max: usize,
    pub pairs: usize,
    pub t_end: f64,
    pub starts: usize,
    pub gridsize: usize,
    pub inputs: Vec<String>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl Settings {
    pub fn tolerance(&self, claim: &str) -> f64 {
        self.tolerances[claim]
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Precedence: flags > config > per-command defaults.
pub fn resolve(command: Command, cfg: RunConfig, flags: Overrides) -> Result<Settings, CliError> {
    let mut warnings = Vec::new();
    if let Some(c) = cfg.command {
        if c != command {
            warnings.push(format!(
                "config names command '{}', running '{}'",
                c.name(),
                command.name()
            ));
        }
    }
    let dim = flags.dim.or(cfg.dim);
    let dims = match (dim, command) {
        (Some(n), _) => vec![n],
        (None, Command::Verify) => vec![1, 2, 3],
        (None, _) => vec![2],
    };
    for &n in &dims {
        if !(1..=4).contains(&n) {
            return Err(CliError::Config(format!("key `dim`: {n} outside 1..=4")));
        }
    }

    let tol = flags.tol.or(cfg.tol);
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Config(format!("key `tol`: {t} is not a positive number")));
        }
        if !matches!(command, Command::Flow | Command::Solve) {
            warnings.push(format!("--tol has no effect on '{}'; ignored", command.name()));
        }
    }

    let mut tolerances = default_tolerances();
    for (k, v) in cfg.tolerances.unwrap_or_default() {
        match tolerances.get_mut(&k) {
            None => return Err(CliError::Config(format!("key `tolerances.{k}`: unknown claim"))),
            Some(slot) if v.is_finite() && v >= 0.0 => *slot = v,
            Some(_) => {
                return Err(CliError::Config(format!("key `tolerances.{k}`: {v} is not a valid tolerance")))
            }
        }
    }

    let potentials = cfg.potentials.unwrap_or_else(|| match command {
        Command::Scale => strings(&["ball"]),
        Command::Flow => strings(&["ball_horospherical"]),
        _ => strings(&["ball", "ball_horospherical"]),
    });
    let domains = cfg.domains.unwrap_or_else(|| match command {
        Command::Solve => strings(&["ball", "radial_eps=0.1", "radial_eps_normalized=0.1"]),
        _ => strings(&["ball", "radial_eps=0.1", "radial_eps=0.2"]),
    });
    for &n in &dims {
        for (i, name) in potentials.iter().enumerate() {
            if potential_by_name(name, n).is_err() {
                return Err(CliError::Config(format!(
                    "key `potentials[{i}]`: unknown catalog name '{name}'"
                )));
            }
        }
        for (i, name) in domains.iter().enumerate() {
            if defining_function_by_name(name, n).is_err() {
                return Err(CliError::Config(format!(
                    "key `domains[{i}]`: unknown catalog name '{name}'"
                )));
            }
        }
    }

    let t_end = cfg.t_end.unwrap_or(20.0);
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(CliError::Config(format!("key `t_end`: {t_end} must be finite and ≥ 0")));
    }
    let gridsize = cfg.gridsize.unwrap_or(96);
    if gridsize == 0 || gridsize % 24 != 0 {
        return Err(CliError::Config(format!(
            "key `gridsize`: {gridsize} must be a positive multiple of 24"
        )));
    }
    let j_max = cfg.j_max.unwrap_or(20);
    if j_max < 2 {
        return Err(CliError::Config(format!("key `j_max`: {j_max} must be at least 2")));
    }

    Ok(Settings {
        command,
        potentials,
        domains,
        dims,
        seed: flags.seed.or(cfg.seed).unwrap_or(2024),
        sample_count: cfg.sample_count.unwrap_or(50),
        tol,
        tolerances,
        j_max,
        pairs: cfg.pairs.unwrap_or(100),
        t_end,
        starts: cfg.starts.unwrap_or(10),
        gridsize,
        inputs: cfg
            .inputs
            .unwrap_or_else(|| strings(&["verify.json", "scale.json", "flow.json", "solve.json"])),
        out: flags.out.or(cfg.out).unwrap_or_else(|| PathBuf::from("out")),
        warnings,
    })
}
