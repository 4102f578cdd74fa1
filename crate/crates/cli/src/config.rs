//! Run configuration: a TOML document with nested sections. Unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use noisy_ergodic::{DomainKind, NoisySystem};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Check names accepted by `verify`, in execution order.
pub const CHECK_NAMES: [&str; 12] = [
    "maximal",
    "corollary_c",
    "corollary_b",
    "birkhoff",
    "ergodic_limit",
    "periodic",
    "localization",
    "levelsets",
    "nonconvergence_empty",
    "duality",
    "lemma1",
    "lemma2",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<NoisySystem>,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative kernel paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub domain: DomainKind,
    pub cells: usize,
    pub quadrature_points: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            domain: DomainKind::Circle,
            cells: 64,
            quadrature_points: noisy_ergodic::DEFAULT_QUADRATURE_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: u64,
    pub edge_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-12, max_iter: 1_000_000, edge_threshold: 1e-14 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub names: Vec<String>,
    pub n_max: usize,
    pub alpha: f64,
    pub beta: f64,
    pub p: u64,
    pub n_cap: u64,
    pub trials: usize,
    pub tol: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            names: vec!["all".into()],
            n_max: noisy_ergodic::theorems::DEFAULT_N_MAX,
            alpha: 0.25,
            beta: -0.25,
            p: 2,
            n_cap: 1 << 40,
            trials: 8,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    pub periods: Vec<u64>,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig { mu: None, periods: vec![2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n_samples: usize,
    pub master_seed: u64,
    pub start: usize,
    pub steps: usize,
    pub trajectories: usize,
    pub j: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_samples: 10_000,
            master_seed: 0,
            start: 0,
            steps: 100,
            trajectories: 4,
            j: vec![1, 2, 5, 10],
            phi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), formats: vec!["json".into(), "csv".into()] }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, Failure> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Failure::Config(format!("invalid config: {}", e.message())))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn kernel_path(&self) -> Option<PathBuf> {
        self.kernel.as_ref().map(|k| if k.is_absolute() { k.clone() } else { self.base_dir.join(k) })
    }

    /// Check names with `all` expanded, deduplicated, in canonical order.
    pub fn resolved_checks(&self) -> Result<Vec<&'static str>, Failure> {
        for name in &self.checks.names {
            if name != "all" && !CHECK_NAMES.contains(&name.as_str()) {
                return Err(Failure::Config(format!("checks.names: unknown check `{name}`")));
            }
        }
        let all = self.checks.names.iter().any(|n| n == "all");
        Ok(CHECK_NAMES.into_iter().filter(|c| all || self.checks.names.iter().any(|n| n == c)).collect())
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let positive = [
            ("solver.tol", self.solver.tol),
            ("checks.tol", self.checks.tol),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Failure::Config(format!("{field} must be positive, got {v}")));
            }
        }
        if !(self.solver.edge_threshold >= 0.0) {
            return Err(Failure::Config("solver.edge_threshold must be nonnegative".into()));
        }
        let at_least_one = [
            ("partition.cells", self.partition.cells),
            ("partition.quadrature_points", self.partition.quadrature_points),
            ("checks.n_max", self.checks.n_max),
            ("checks.trials", self.checks.trials),
            ("mc.n_samples", self.mc.n_samples),
        ];
        for (field, v) in at_least_one {
            if v == 0 {
                return Err(Failure::Config(format!("{field} must be at least 1")));
            }
        }
        if self.checks.p == 0 || self.measure.periods.contains(&0) {
            return Err(Failure::Config("periods must be at least 1".into()));
        }
        if self.checks.n_cap < 2 {
            return Err(Failure::Config("checks.n_cap must be at least 2".into()));
        }
        if let Some(f) = self.output.formats.iter().find(|f| *f != "json" && *f != "csv") {
            return Err(Failure::Config(format!("output.formats: unknown format `{f}`")));
        }
        self.resolved_checks()?;
        Ok(())
    }

    /// Exactly one kernel source must be present.
    pub fn require_source(&self) -> Result<(), Failure> {
        match (&self.kernel, &self.system) {
            (Some(_), Some(_)) => Err(Failure::Config("give either `kernel` or `[system]`, not both".into())),
            (None, None) => Err(Failure::Config("no kernel: give `--kernel`, `kernel`, or `[system]`".into())),
            _ => Ok(()),
        }
    }

    /// Canonical JSON of the resolved configuration, the input to the config
    /// hash. The output directory is left out, as it does not affect results.
    pub fn canonical(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v["output"].as_object_mut().unwrap().remove("dir");
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_sections() {
        let text = r#"
            [system]
            boundary = "wrap"
            map = { kind = "rotation", angle = 0.37 }
            noise = { kind = "uniform", half_width = 0.1 }

            [partition]
            cells = 256
        "#;
        let cfg = RunConfig::from_toml(text, Path::new(".")).unwrap();
        assert_eq!(cfg.partition.cells, 256);
        assert_eq!(cfg.partition.domain, DomainKind::Circle);
        assert_eq!(cfg.checks.n_max, 64);
        cfg.validate().unwrap();
        cfg.require_source().unwrap();
    }

    #[test]
    fn unknown_keys_name_the_field() {
        let err = RunConfig::from_toml("[solver]\ntoll = 1e-9\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("toll"), "{err}");
        let err = RunConfig::from_toml("[checks]\nnames = [\"maximum\"]\n", Path::new("."))
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("maximum"));
    }

    #[test]
    fn tolerances_must_be_positive() {
        let cfg = RunConfig::from_toml("[checks]\ntol = 0.0\n", Path::new(".")).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn check_expansion_is_canonical() {
        let mut cfg = RunConfig::default();
        cfg.checks.names = vec!["lemma1".into(), "maximal".into(), "lemma1".into()];
        assert_eq!(cfg.resolved_checks().unwrap(), vec!["maximal", "lemma1"]);
        cfg.checks.names = vec!["all".into()];
        assert_eq!(cfg.resolved_checks().unwrap().len(), CHECK_NAMES.len());
    }

    #[test]
    fn exactly_one_source() {
        let cfg = RunConfig::default();
        assert!(cfg.require_source().is_err());
        let both = RunConfig::from_toml(
            "kernel = \"k.txt\"\n[system]\nboundary = \"wrap\"\nmap = { kind = \"doubling\" }\nnoise = { kind = \"none\" }\n",
            Path::new("/tmp"),
        )
        .unwrap();
        assert!(both.require_source().is_err());
        assert_eq!(both.kernel_path().unwrap(), PathBuf::from("/tmp/k.txt"));
    }

    #[test]
    fn output_dir_does_not_enter_the_hash() {
        let mut a = RunConfig::default();
        let before = a.canonical();
        a.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.canonical(), before);
        a.mc.master_seed = 1;
        assert_ne!(a.canonical(), before);
    }
}
