use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use crate::benchmarks::Benchmark;
use crate::bo::{AcquisitionSpec, BoConfig};
use crate::error::{Error, Result};
use crate::gp::{SeparableSEKernel, DEFAULT_NOISE_SD};
use crate::separable_extrema::DEFAULT_ALPHA;
use crate::spectral_prior::DEFAULT_ETA;
use crate::tsroots::TsRootsConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Outer,
    InnerCompare,
    SetSizeStudy,
    AtsSweep,
    SpectrumCheck,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetSizes {
    pub n_candidates: usize,
    pub n_explore: usize,
    pub n_exploit: usize,
    pub alpha: f64,
}

impl Default for SetSizes {
    fn default() -> Self {
        let t = TsRootsConfig::default();
        Self {
            n_candidates: t.n_candidates,
            n_explore: t.n_explore,
            n_exploit: t.n_exploit,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperSection {
    /// 0 keeps the initial kernel fixed.
    pub refit_every: usize,
    pub starts: usize,
    pub warm_starts: usize,
    /// Initial (or fixed) kernel.
    pub length_scale: f64,
    pub signal_var: f64,
}

impl Default for HyperSection {
    fn default() -> Self {
        Self {
            refit_every: 1,
            starts: 5,
            warm_starts: 2,
            length_scale: 0.5,
            signal_var: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerSection {
    /// Inner optimizers sharing each sample; the first one drives the loop.
    pub optimizers: Vec<String>,
    /// Random starts for the reference optimum (d <= 2 only, 0 disables).
    pub reference_starts: usize,
}

impl Default for InnerSection {
    fn default() -> Self {
        Self {
            optimizers: vec!["ts_roots".into(), "ts_random_multistart".into()],
            reference_starts: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub length_scale: f64,
    pub n_terms: Vec<usize>,
    pub rff_features: Vec<usize>,
    pub grid_points: usize,
    pub rff_seed: u64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            length_scale: 1.0,
            n_terms: vec![4, 8, 16, 32],
            rff_features: vec![100, 1000],
            grid_points: 41,
            rff_seed: 0,
        }
    }
}

/// A batch experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub benchmark: Option<String>,
    /// Acquisition names; `random_search` is accepted in outer mode.
    #[serde(default)]
    pub acquisitions: Vec<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub n_init: Option<usize>,
    #[serde(default)]
    pub n_starts: Option<usize>,
    #[serde(default)]
    pub set_sizes: SetSizes,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub inner: InnerSection,
    /// Sample-average sizes for `ats_sweep`.
    #[serde(default)]
    pub n_c: Vec<f64>,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    /// When false, time columns are written as zero so reruns are byte-identical.
    #[serde(default = "default_timing")]
    pub timing: bool,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_budget() -> usize {
    50
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_SD
}
fn default_timing() -> bool {
    true
}

/// An outer-loop method: a BO acquisition or the random-search baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Bo(AcquisitionSpec),
    RandomSearch,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Bo(s) => s.to_string(),
            Method::RandomSearch => "random_search".into(),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "random_search" {
            Ok(Method::RandomSearch)
        } else {
            s.parse().map(Method::Bo)
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let mut seen = HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return bad(format!("seed {s} listed twice"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.noise_sd > 0.0) {
            return bad(format!("noise_sd must be positive, got {}", self.noise_sd));
        }
        let s = &self.set_sizes;
        if s.n_candidates == 0 || s.alpha < 1.0 {
            return bad("set_sizes needs n_candidates >= 1 and alpha >= 1".into());
        }
        if self.mode == Mode::SpectrumCheck {
            if !(self.spectrum.length_scale > 0.0) || self.spectrum.grid_points < 2 {
                return bad("spectrum needs length_scale > 0 and grid_points >= 2".into());
            }
            return Ok(());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.budget == 0 {
            return bad("budget must be at least 1".into());
        }
        self.benchmark()?;
        match self.mode {
            Mode::Outer => {
                if self.acquisitions.is_empty() {
                    return bad("outer mode needs at least one acquisition".into());
                }
                self.methods()?;
            }
            Mode::AtsSweep => {
                if self.n_c.is_empty() {
                    return bad("ats_sweep needs n_c values".into());
                }
                self.methods()?;
            }
            Mode::InnerCompare => {
                if self.inner.optimizers.len() < 2 {
                    return bad("inner_compare needs at least two optimizers".into());
                }
                self.inner_optimizers()?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn benchmark(&self) -> Result<Benchmark> {
        match &self.benchmark {
            Some(b) => Benchmark::by_name(b),
            None => Err(Error::Config("benchmark is required".into())),
        }
    }

    /// Outer-loop methods, including the `n_c` sweep in `ats_sweep` mode.
    pub fn methods(&self) -> Result<Vec<Method>> {
        let mut m: Vec<Method> = self.acquisitions.iter().map(|a| a.parse()).collect::<Result<_>>()?;
        if self.mode == Mode::AtsSweep {
            for &n_c in &self.n_c {
                let spec = AcquisitionSpec::Ats { n_c };
                spec.validate()?;
                m.push(Method::Bo(spec));
            }
        }
        if self.mode == Mode::SetSizeStudy {
            m = vec![Method::Bo(AcquisitionSpec::TsRoots)];
        }
        let mut seen = HashSet::new();
        if let Some(d) = m.iter().find(|x| !seen.insert(x.label())) {
            return Err(Error::Config(format!("acquisition `{}` listed twice", d.label())));
        }
        Ok(m)
    }

    /// Inner optimizers for `inner_compare`. They must share one Mercer draw,
    /// so only the Thompson variants that differ in start strategy qualify.
    pub fn inner_optimizers(&self) -> Result<Vec<AcquisitionSpec>> {
        self.inner
            .optimizers
            .iter()
            .map(|s| {
                let a: AcquisitionSpec = s.parse()?;
                match a {
                    AcquisitionSpec::TsRoots
                    | AcquisitionSpec::TsRandomMultistart
                    | AcquisitionSpec::TsGrid
                    | AcquisitionSpec::TsLhs => Ok(a),
                    _ => Err(Error::Config(format!("`{s}` cannot share a Mercer sample in inner_compare"))),
                }
            })
            .collect()
    }

    pub fn ts_config(&self) -> TsRootsConfig {
        let mut t = TsRootsConfig {
            n_candidates: self.set_sizes.n_candidates,
            n_explore: self.set_sizes.n_explore,
            n_exploit: self.set_sizes.n_exploit,
            alpha: self.set_sizes.alpha,
            ..TsRootsConfig::default()
        };
        t.sample.eta = self.eta;
        t
    }

    pub fn bo_config(&self, spec: AcquisitionSpec, dim: usize) -> Result<BoConfig> {
        Ok(BoConfig {
            acquisition: spec,
            budget: self.budget,
            n_init: self.n_init,
            ts: self.ts_config(),
            noise_sd: self.noise_sd,
            kernel: Some(SeparableSEKernel::isotropic(self.hyper.signal_var, self.hyper.length_scale, dim)?),
            refit_every: self.hyper.refit_every,
            hyper_starts: self.hyper.starts,
            warm_starts: self.hyper.warm_starts,
            n_starts: self.n_starts,
            ..BoConfig::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_outer() {
        let c = ExperimentConfig::from_toml(
            r#"
schema_version = 1
mode = "outer"
benchmark = "schwefel2"
acquisitions = ["ts_roots", "random_search", "lcb:1.5"]
seeds = [1, 2]
budget = 5
[set_sizes]
n_explore = 10
"#,
        )
        .unwrap();
        assert_eq!(c.set_sizes.n_explore, 10);
        assert_eq!(c.set_sizes.n_exploit, 200);
        assert_eq!(c.methods().unwrap().len(), 3);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = "schema_version = 1\nmode = \"outer\"\nbenchmark = \"schwefel2\"\nacquisitions = [\"ts_roots\"]\n";
        assert!(ExperimentConfig::from_toml(&format!("{base}seeds = [1, 1]\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{base}seeds = [1]\nfoo = 3\n")).is_err());
        assert!(ExperimentConfig::from_toml(&base.replace("schwefel2", "nope").replace("= 1\n", "= 1\nseeds=[1]\n")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{}seeds = [1]\n", base.replace("version = 1", "version = 2"))).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{base}seeds = [1]\n")).is_ok());
    }
}
