use std::path::{Path, PathBuf};

use coast_core::attribution::AttributionConfig;
use coast_core::bench::BenchConfig;
use coast_core::featsel::SelectionConfig;
use coast_core::graph::DiscoveryConfig;
use coast_core::optimize::OptimizeConfig;
use coast_core::scm::NoiseKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source: Option<PathBuf>,
    #[serde(default)]
    pub target: Option<PathBuf>,
    /// Not echoed into reports so that two output directories compare equal.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub featsel: FeatselStage,
    #[serde(default)]
    pub graph: GraphStage,
    #[serde(default)]
    pub scm: ScmStage,
    #[serde(default)]
    pub attribution: AttributionConfig,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    /// Nodes allowed to carry a shift (C2). Defaults to every candidate.
    #[serde(default)]
    pub actionable: Option<Vec<String>>,
    #[serde(default)]
    pub screen: Option<ScreenStage>,
    #[serde(default)]
    pub bench: Option<BenchStage>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("coast_out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatselStage {
    pub enabled: bool,
    #[serde(flatten)]
    pub config: SelectionConfig,
}

impl Default for FeatselStage {
    fn default() -> Self {
        FeatselStage { enabled: true, config: SelectionConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    #[default]
    Learned,
    File,
    /// Only meaningful for benchmark runs, where the generating graph is known.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphStage {
    pub mode: GraphSource,
    pub path: Option<PathBuf>,
    pub required: Vec<[String; 2]>,
    pub forbidden: Vec<[String; 2]>,
    pub falsify_significance: f64,
    #[serde(flatten)]
    pub discovery: DiscoveryConfig,
}

impl Default for GraphStage {
    fn default() -> Self {
        GraphStage {
            mode: GraphSource::Learned,
            path: None,
            required: Vec::new(),
            forbidden: Vec::new(),
            falsify_significance: 0.05,
            discovery: DiscoveryConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ScmStage {
    pub noise: NoiseKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenStage {
    pub candidates: Vec<String>,
    pub k: usize,
    #[serde(default = "default_top_m")]
    pub top_m: usize,
}

fn default_top_m() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BenchStage {
    /// Cells to run; missing axes fall back to the values in `settings`.
    pub grid: BenchGrid,
    #[serde(flatten)]
    pub settings: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BenchGrid {
    pub q: Vec<usize>,
    pub k_true: Vec<usize>,
    pub sigma: Vec<f64>,
}

impl BenchStage {
    /// The `--quick` preset: ten nodes, every target count and noise level, five seeds.
    pub fn quick() -> Self {
        BenchStage { grid: BenchGrid { q: vec![10], k_true: vec![1, 5, 10], sigma: vec![1.0, 3.0, 5.0] }, settings: BenchConfig::default() }
    }

    pub fn cells(&self) -> Vec<BenchConfig> {
        let pick = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let sigmas = if self.grid.sigma.is_empty() { vec![self.settings.sigma] } else { self.grid.sigma.clone() };
        let mut out = Vec::new();
        for q in pick(&self.grid.q, self.settings.q) {
            for k in pick(&self.grid.k_true, self.settings.k_true) {
                for &sigma in &sigmas {
                    out.push(BenchConfig { q, k_true: k, sigma, ..self.settings.clone() });
                }
            }
        }
        out
    }
}

impl RunConfig {
    pub fn bench_only(stage: BenchStage) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            source: None,
            target: None,
            output_dir: default_output_dir(),
            featsel: FeatselStage::default(),
            graph: GraphStage::default(),
            scm: ScmStage::default(),
            attribution: AttributionConfig::default(),
            optimize: OptimizeConfig::default(),
            actionable: None,
            screen: None,
            bench: Some(stage),
        }
    }

    /// Parse and resolve relative input paths against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::usage(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::usage(format!("config: schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version)));
        }
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.source.as_mut().map(rebase);
        cfg.target.as_mut().map(rebase);
        cfg.graph.path.as_mut().map(rebase);
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Check everything that can be checked before any stage runs.
    pub fn validate_inputs(&self) -> Result<(), CliError> {
        if self.bench.is_some() {
            return Ok(());
        }
        for (label, p) in [("source", &self.source), ("target", &self.target)] {
            match p {
                None => return Err(CliError::usage(format!("config: `{label}` is required unless a `bench` section is given"))),
                Some(p) if !p.is_file() => return Err(CliError::usage(format!("{label} file not found: {}", p.display()))),
                _ => {}
            }
        }
        match self.graph.mode {
            GraphSource::File => match &self.graph.path {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(CliError::usage(format!("graph file not found: {}", p.display()))),
                None => return Err(CliError::usage("graph.mode = \"file\" needs graph.path")),
            },
            GraphSource::Oracle => return Err(CliError::usage("graph.mode = \"oracle\" is only available for benchmark runs")),
            GraphSource::Learned => {}
        }
        if !(self.graph.falsify_significance > 0.0 && self.graph.falsify_significance < 1.0) {
            return Err(CliError::usage("graph.falsify_significance must lie in (0, 1)"));
        }
        self.featsel.config.validate().map_err(CliError::from_core)?;
        self.attribution.validate().map_err(CliError::from_core)?;
        self.optimize.validate().map_err(CliError::from_core)?;
        if let Some(s) = &self.screen {
            if s.k == 0 || s.top_m == 0 || s.candidates.is_empty() {
                return Err(CliError::usage("screen: candidates, k and top_m must be nonempty/positive"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = RunConfig::from_json(r#"{"schema_version": 1, "source": "s.csv", "target": "t.csv"}"#, Path::new("/data")).unwrap();
        assert_eq!(c.source.unwrap(), PathBuf::from("/data/s.csv"));
        assert!(c.featsel.enabled);
        assert_eq!(c.optimize.theta, 30);
        assert_eq!(c.graph.discovery.max_parents, DiscoveryConfig::default().max_parents);
        assert_eq!(c.output_dir, PathBuf::from("/data/coast_out"));
    }

    #[test]
    fn rejects_bad_schema_and_unknown_keys() {
        assert!(RunConfig::from_json(r#"{"schema_version": 2}"#, Path::new(".")).is_err());
        assert!(RunConfig::from_json(r#"{"schema_version": 1, "sed": 3}"#, Path::new(".")).is_err());
        assert!(RunConfig::from_json(r#"{"seed": 3}"#, Path::new(".")).is_err());
    }

    #[test]
    fn nested_stage_settings() {
        let c = RunConfig::from_json(
            r#"{"schema_version": 1, "featsel": {"enabled": false, "fdr_level": 0.1},
                "graph": {"mode": "file", "path": "g.csv", "max_parents": 2},
                "optimize": {"gamma": 0.5, "box_bounds": [-3, 3]}}"#,
            Path::new("/x"),
        )
        .unwrap();
        assert!(!c.featsel.enabled);
        assert_eq!(c.featsel.config.fdr_level, 0.1);
        assert_eq!(c.graph.mode, GraphSource::File);
        assert_eq!(c.graph.discovery.max_parents, 2);
        assert_eq!(c.optimize.box_bounds, Some([-3.0, 3.0]));
    }

    #[test]
    fn bench_cells() {
        let c = RunConfig::from_json(r#"{"schema_version": 1, "bench": {"grid": {"k_true": [1, 5]}, "q": 20, "sigma": 3}}"#, Path::new(".")).unwrap();
        let cells = c.bench.unwrap().cells();
        assert_eq!(cells.len(), 2);
        assert_eq!((cells[1].q, cells[1].k_true, cells[1].sigma), (20, 5, 3.0));
        assert_eq!(BenchStage::quick().cells().len(), 9);
    }

    #[test]
    fn output_dir_is_not_echoed() {
        let c = RunConfig::from_json(r#"{"schema_version": 1, "output_dir": "somewhere"}"#, Path::new(".")).unwrap();
        assert!(!serde_json::to_string(&c).unwrap().contains("somewhere"));
    }
}
