//! Run configuration: JSON file plus command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tlpq_core::runtime::{ClusterConfig, ClusterMode};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Plan,
    Ghz,
    GhzCut,
    Nonherm,
    Imagtime,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Plan => "plan",
            Experiment::Ghz => "ghz",
            Experiment::GhzCut => "ghz-cut",
            Experiment::Nonherm => "nonherm",
            Experiment::Imagtime => "imagtime",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// File form of a run. Every field is optional; command-line flags win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub cluster: Option<ClusterConfig>,
    pub eps: Option<f64>,
    pub c: Option<f64>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t: Option<OneOrMany>,
    #[serde(rename = "baseline_T")]
    pub baseline_t: Option<f64>,
    pub gamma_list: Option<Vec<f64>>,
    pub emulate_float_truncation: Option<bool>,
    pub normalize: Option<bool>,
    pub circuit: Option<PathBuf>,
    pub multi_cut: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub check: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Cluster-related overrides from the command line.
#[derive(Clone, Debug, Default)]
pub struct ClusterOverrides {
    pub mode: Option<ClusterMode>,
    pub nodes: Option<usize>,
    pub workers: Option<Vec<String>>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub retry_limit: Option<usize>,
}

impl ClusterOverrides {
    pub fn apply(&self, base: Option<ClusterConfig>) -> Result<ClusterConfig, CliError> {
        let mut cfg = base.unwrap_or_else(|| ClusterConfig::local(1));
        if let Some(w) = &self.workers {
            cfg.workers = w.clone();
            if self.mode.is_none() {
                cfg.mode = ClusterMode::Network;
            }
        }
        if let Some(m) = &self.mode {
            cfg.mode = m.clone();
        }
        if let Some(n) = self.nodes {
            cfg.nodes = n;
        }
        if self.shots.is_some() {
            cfg.shots = self.shots;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(r) = self.retry_limit {
            cfg.retry_limit = r;
        }
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

/// Fully resolved parameters for one experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub experiment: Experiment,
    pub cluster: ClusterConfig,
    pub eps: f64,
    pub c: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    #[serde(rename = "baseline_T")]
    pub baseline_t: Option<f64>,
    pub gamma_list: Vec<f64>,
    pub emulate_float_truncation: bool,
    pub normalize: bool,
    pub circuit: Option<PathBuf>,
    pub multi_cut: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub check: bool,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be a positive number, got {v}")))
    }
}

impl RunConfig {
    /// Validates against `experiment` and fills defaults.
    pub fn resolve(self, experiment: Experiment, cluster: ClusterConfig) -> Result<Resolved, CliError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(CliError::Config(format!("config file is for '{e}', not '{experiment}'")));
            }
        }
        let reject = |present: bool, name: &str| -> Result<(), CliError> {
            if present {
                Err(CliError::Config(format!("{name} does not apply to '{experiment}'")))
            } else {
                Ok(())
            }
        };
        let lchs = matches!(experiment, Experiment::Nonherm | Experiment::Imagtime);
        for (present, name) in [
            (self.eps.is_some(), "eps"),
            (self.c.is_some(), "c"),
            (self.dt.is_some(), "dt"),
            (self.t.is_some(), "T"),
            (self.emulate_float_truncation.is_some(), "emulate_float_truncation"),
            (self.normalize.is_some(), "normalize"),
        ] {
            reject(!lchs && present, name)?;
        }
        reject(experiment != Experiment::Imagtime && self.gamma_list.is_some(), "gamma_list")?;
        reject(experiment != Experiment::Imagtime && self.baseline_t.is_some(), "baseline_T")?;
        reject(experiment != Experiment::Plan && self.circuit.is_some(), "circuit")?;
        reject(experiment != Experiment::Plan && self.multi_cut.is_some(), "multi_cut")?;
        if self.circuit.is_some() && self.multi_cut.is_some() {
            return Err(CliError::Config("circuit and multi_cut are mutually exclusive".into()));
        }
        if self.multi_cut == Some(0) {
            return Err(CliError::Config("multi_cut must be ≥ 1".into()));
        }

        let emulate = self.emulate_float_truncation.unwrap_or(false);
        let (eps, c, t_default) = match experiment {
            Experiment::Imagtime => (0.3, 1.0, vec![0.5]),
            _ => (0.2, 0.5, tlpq_core::lchs::default_t_sweep(emulate)),
        };
        let t = self.t.map(OneOrMany::into_vec).unwrap_or(t_default);
        if lchs {
            if t.is_empty() {
                return Err(CliError::Config("T list is empty".into()));
            }
            for &x in &t {
                positive("T", x)?;
            }
        }
        if experiment == Experiment::Imagtime && t.len() != 1 {
            return Err(CliError::Config("imagtime takes a single T".into()));
        }
        let gamma_list = self.gamma_list.unwrap_or_else(tlpq_core::lchs::default_gamma_sweep);
        if experiment == Experiment::Imagtime {
            if gamma_list.is_empty() {
                return Err(CliError::Config("gamma list is empty".into()));
            }
            if let Some(g) = gamma_list.iter().find(|g| !g.is_finite()) {
                return Err(CliError::Config(format!("invalid gamma {g}")));
            }
        }
        let baseline_t = match experiment {
            Experiment::Imagtime => Some(positive("baseline_T", self.baseline_t.unwrap_or(1.5))?),
            _ => None,
        };
        let format = self.format.unwrap_or(if lchs { Format::Csv } else { Format::Json });
        if experiment == Experiment::Plan && format == Format::Csv {
            return Err(CliError::Config("plan output is JSON only".into()));
        }
        Ok(Resolved {
            experiment,
            cluster,
            eps: positive("eps", self.eps.unwrap_or(eps))?,
            c: positive("c", self.c.unwrap_or(c))?,
            dt: positive("dt", self.dt.unwrap_or(0.01))?,
            t,
            baseline_t,
            gamma_list,
            emulate_float_truncation: emulate,
            normalize: self.normalize.unwrap_or(true),
            circuit: self.circuit,
            multi_cut: self.multi_cut,
            out: self.out,
            format,
            check: self.check.unwrap_or(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_per_experiment() {
        let r = RunConfig::default().resolve(Experiment::Imagtime, ClusterConfig::local(1)).unwrap();
        assert_eq!((r.eps, r.c, r.t.clone(), r.baseline_t), (0.3, 1.0, vec![0.5], Some(1.5)));
        assert_eq!(r.gamma_list.len(), 11);
        assert_eq!(r.format, Format::Csv);
        let r = RunConfig::default().resolve(Experiment::Nonherm, ClusterConfig::local(1)).unwrap();
        assert_eq!((r.eps, r.c, r.t.len()), (0.2, 0.5, 10));
        let r = RunConfig::default().resolve(Experiment::Ghz, ClusterConfig::local(1)).unwrap();
        assert_eq!(r.format, Format::Json);
    }

    #[test]
    fn rejects_misplaced_and_bad_values() {
        let cfg = RunConfig { gamma_list: Some(vec![0.2]), ..Default::default() };
        assert!(cfg.resolve(Experiment::Ghz, ClusterConfig::local(1)).is_err());
        let cfg = RunConfig { eps: Some(-1.0), ..Default::default() };
        assert!(cfg.resolve(Experiment::Nonherm, ClusterConfig::local(1)).is_err());
        let cfg = RunConfig { experiment: Some(Experiment::Ghz), ..Default::default() };
        assert!(cfg.resolve(Experiment::GhzCut, ClusterConfig::local(1)).is_err());
    }

    #[test]
    fn file_form_parses() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"experiment":"ghz-cut","cluster":{"mode":"local","nodes":4,"shots":100},"format":"csv"}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment, Some(Experiment::GhzCut));
        assert_eq!(cfg.cluster.as_ref().unwrap().nodes, 4);
        let t: RunConfig = serde_json::from_str(r#"{"T":0.5}"#).unwrap();
        assert_eq!(t.t.unwrap().into_vec(), vec![0.5]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn overrides_win() {
        let o = ClusterOverrides { workers: Some(vec!["127.0.0.1:1".into()]), seed: Some(9), ..Default::default() };
        let cfg = o.apply(Some(ClusterConfig::local(3))).unwrap();
        assert_eq!((cfg.mode, cfg.seed), (ClusterMode::Network, 9));
        let bad = ClusterOverrides { nodes: Some(0), ..Default::default() };
        assert!(bad.apply(None).is_err());
    }
}
