//! Scenario files (TOML).

use std::path::{Path, PathBuf};

use mplab::barriers::{PlOptions, SweepOptions};
use mplab::bounds::{TheoremId, TheoremOptions};
use mplab::geometry::CylinderSpec;
use mplab::operators::{preset, LinearOp, OperatorSpec, PresetParams, SupInfOp};
use mplab::solver::{GridSpec, SolveMethod, SolveOptions};
use mplab::structure::PlanOptions;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Invalid { path: PathBuf, field: &'static str, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub theorems: Vec<TheoremId>,
    /// Output directory; `out/<name>` when absent.
    pub output: Option<PathBuf>,
    pub counterexample: Option<String>,
    pub operator: OperatorConfig,
    pub domain: Option<CylinderSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub structure: StructureConfig,
    #[serde(default)]
    pub pl: PlConfig,
}

fn default_tolerance() -> f64 {
    1e-10
}

/// Exactly one of `preset`, `linear`, `sup_inf`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub preset: Option<String>,
    pub params: Option<PresetParams>,
    pub linear: Option<LinearOp>,
    pub sup_inf: Option<SupInfOp>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub h: Option<f64>,
    pub r: Option<f64>,
    pub method: SolveMethod,
    pub max_sweeps: usize,
    pub max_policy_iterations: usize,
    pub violation_ladder: Vec<f64>,
    pub eigen_cells: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let t = TheoremOptions::default();
        let s = SolveOptions::default();
        GridConfig {
            h: None,
            r: None,
            method: s.method,
            max_sweeps: s.max_sweeps,
            max_policy_iterations: s.max_policy_iterations,
            violation_ladder: t.violation_ladder,
            eigen_cells: t.eigen_cells,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    pub interior: usize,
    pub far: usize,
    pub random_rank_one: usize,
    pub r_far: Option<f64>,
}

impl Default for StructureConfig {
    fn default() -> Self {
        let p = PlanOptions::default();
        StructureConfig { interior: p.interior, far: p.far, random_rank_one: p.random_rank_one, r_far: p.r_far }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlConfig {
    pub beta0: f64,
    pub d0: Option<f64>,
    pub beta_factor: f64,
    pub sweep: SweepOptions,
    pub barrier_samples: usize,
    pub barrier_radius: f64,
}

impl Default for PlConfig {
    fn default() -> Self {
        let t = TheoremOptions::default();
        PlConfig {
            beta0: t.beta0,
            d0: None,
            beta_factor: t.pl.beta_factor,
            sweep: t.pl.sweep,
            barrier_samples: t.barrier_samples,
            barrier_radius: t.barrier_radius,
        }
    }
}

/// `path` as given, or with `.toml` appended when that is what exists.
pub fn resolve(path: &Path) -> PathBuf {
    if path.is_file() {
        return path.to_path_buf();
    }
    let mut with_ext = path.as_os_str().to_owned();
    with_ext.push(".toml");
    let alt = PathBuf::from(with_ext);
    if alt.is_file() {
        alt
    } else {
        path.to_path_buf()
    }
}

pub fn load(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse(&text, path)
}

pub fn parse(text: &str, path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    cfg.validate(path)?;
    Ok(cfg)
}

/// The operator and domain a scenario runs on, plus the preset name if any.
pub struct Resolved {
    pub label: String,
    pub operator: OperatorSpec,
    pub domain: CylinderSpec,
}

impl ScenarioConfig {
    fn invalid(path: &Path, field: &'static str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { path: path.to_path_buf(), field, message: message.into() }
    }

    fn validate(&self, path: &Path) -> Result<(), ConfigError> {
        let op = &self.operator;
        let count = [op.preset.is_some(), op.linear.is_some(), op.sup_inf.is_some()].iter().filter(|b| **b).count();
        if count != 1 {
            return Err(Self::invalid(path, "operator", "give exactly one of `preset`, `linear`, `sup_inf`"));
        }
        if op.params.is_some() && op.preset.is_none() {
            return Err(Self::invalid(path, "operator.params", "only valid together with `preset`"));
        }
        if op.preset.is_none() && self.domain.is_none() {
            return Err(Self::invalid(path, "domain", "inline operators need an explicit domain"));
        }
        if self.theorems.is_empty() {
            return Err(Self::invalid(path, "theorems", "list at least one of MP, ABP, NARROW, PL"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Self::invalid(path, "tolerance", "must be positive"));
        }
        for (field, v) in [("grid.h", self.grid.h), ("grid.r", self.grid.r)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Self::invalid(path, field, "must be positive"));
                }
            }
        }
        if self.grid.h.is_some() != self.grid.r.is_some() {
            return Err(Self::invalid(path, "grid", "set both `h` and `r` or neither"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Self::invalid(path, "name", "must be a non-empty file-name-safe string"));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> Result<Resolved, ConfigError> {
        let op = &self.operator;
        let (label, operator, default_domain) = if let Some(name) = &op.preset {
            let p = preset(name, &op.params.clone().unwrap_or_default())
                .map_err(|e| Self::invalid(path, "operator.preset", e.to_string()))?;
            (name.clone(), p.operator, Some(p.domain))
        } else if let Some(l) = &op.linear {
            ("inline linear".to_string(), OperatorSpec::from(l.clone()), None)
        } else {
            ("inline sup-inf".to_string(), OperatorSpec::from(op.sup_inf.clone().expect("validated")), None)
        };
        let domain = self.domain.clone().or(default_domain).expect("validated");
        if domain.dim() != operator.dim() {
            return Err(Self::invalid(
                path,
                "domain",
                format!("dimension {} does not match the operator dimension {}", domain.dim(), operator.dim()),
            ));
        }
        Ok(Resolved { label, operator, domain })
    }

    pub fn theorem_options(&self, tolerance: f64) -> TheoremOptions {
        TheoremOptions {
            seed: self.seed,
            tolerance,
            plan: PlanOptions {
                interior: self.structure.interior,
                far: self.structure.far,
                random_rank_one: self.structure.random_rank_one,
                r_far: self.structure.r_far,
                tolerance,
                seed: self.seed,
            },
            grid: match (self.grid.h, self.grid.r) {
                (Some(h), Some(r)) => Some(GridSpec { h, r }),
                _ => None,
            },
            solve: SolveOptions {
                method: self.grid.method,
                tolerance,
                max_sweeps: self.grid.max_sweeps,
                max_policy_iterations: self.grid.max_policy_iterations,
                ..Default::default()
            },
            counterexample: self.counterexample.clone(),
            violation_ladder: self.grid.violation_ladder.clone(),
            beta0: self.pl.beta0,
            d0: self.pl.d0,
            pl: PlOptions { beta_factor: self.pl.beta_factor, sweep: self.pl.sweep },
            barrier_samples: self.pl.barrier_samples,
            barrier_radius: self.pl.barrier_radius,
            eigen_cells: self.grid.eigen_cells.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_preset_config() {
        let cfg = parse(
            "name = \"x\"\ntheorems = [\"MP\"]\n[operator]\npreset = \"linear_mixed\"\n",
            Path::new("x.toml"),
        )
        .unwrap();
        assert_eq!(cfg.theorems, vec![TheoremId::Mp]);
        assert!(cfg.resolve(Path::new("x.toml")).is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse(
            "name = \"x\"\ntheorems = [\"MP\"]\nbogus = 1\n[operator]\npreset = \"linear_mixed\"\n",
            Path::new("x.toml"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn inline_operator_needs_domain() {
        let text = "name = \"x\"\ntheorems = [\"MP\"]\n[operator.linear]\na = [[\"1\"]]\nb = [\"0\"]\nc = \"0\"\n";
        let err = parse(text, Path::new("x.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { field: "domain", .. }));
    }
}
