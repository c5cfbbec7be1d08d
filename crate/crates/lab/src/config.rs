//! Run configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use xy_butterfly::butterfly::{linspace, Compiler, DEFAULT_THRESHOLD};
use xy_butterfly::model::ModelParams;
use xy_butterfly::rtr::TrustRegionConfig;
use xy_butterfly::sim::NoiseSpec;
use xy_butterfly::yky::{EstimatorMode, SurfaceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
    Noisy,
    Averaged,
}

impl Mode {
    pub fn estimator(self) -> EstimatorMode {
        match self {
            Mode::Exact => EstimatorMode::Exact,
            Mode::Sampled => EstimatorMode::Sampled,
            Mode::Noisy => EstimatorMode::Noisy,
            Mode::Averaged => EstimatorMode::Averaged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompilerKind {
    Exact,
    Rtr,
    Trotter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "J")]
    pub j: f64,
    pub r: f64,
    pub h: f64,
    pub n: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { j: 1.0, r: 0.0, h: 0.0, n: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { start: 0.0, stop: 3.0, points: 61 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub p2: f64,
    pub p_read: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { p2: 0.005, p_read: 0.01 }
    }
}

/// Compiler used for the evolution inside the protocol. Trust-region fields other than
/// those listed keep the library defaults for the chosen depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompilerSection {
    pub kind: CompilerKind,
    pub layers: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub grad_tol: f64,
    pub cost_tol: f64,
}

impl Default for CompilerSection {
    fn default() -> Self {
        Self { kind: CompilerKind::Exact, layers: 10, max_iters: 100, restarts: 0, grad_tol: 1e-8, cost_tol: 1e-9 }
    }
}

impl CompilerSection {
    pub fn trust_region(&self) -> TrustRegionConfig {
        TrustRegionConfig {
            max_iters: self.max_iters,
            restarts: self.restarts,
            grad_tol: self.grad_tol,
            cost_tol: self.cost_tol,
            ..TrustRegionConfig::for_layers(self.layers)
        }
    }

    pub fn compiler(&self) -> Compiler {
        match self.kind {
            CompilerKind::Exact => Compiler::Exact,
            CompilerKind::Rtr => Compiler::Rtr { layers: self.layers, config: self.trust_region() },
            CompilerKind::Trotter => Compiler::Trotter { layers: self.layers },
        }
    }
}

/// Settings of the `compile` command: one target time, a list of depths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileSection {
    pub t: f64,
    pub layers: Vec<usize>,
}

impl Default for CompileSection {
    fn default() -> Self {
        Self { t: 1.0, layers: vec![2, 4, 6, 8, 10] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub r: f64,
    pub h: f64,
}

/// Parameter rows of the `sweep` command; the rest of the model comes from `[model]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub rows: Vec<SweepRow>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { rows: vec![SweepRow { r: 0.0, h: 0.0 }, SweepRow { r: 2.1, h: 0.8 }] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Mode,
    pub shots: u64,
    pub threshold: f64,
    /// Probe sites; empty means `2..=n`.
    pub js: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub time: TimeGrid,
    pub noise: NoiseSection,
    pub compiler: CompilerSection,
    pub compile: CompileSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            mode: Mode::Exact,
            shots: 10_000,
            threshold: DEFAULT_THRESHOLD,
            js: Vec::new(),
            output_dir: None,
            model: ModelSection::default(),
            time: TimeGrid::default(),
            noise: NoiseSection::default(),
            compiler: CompilerSection::default(),
            compile: CompileSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub shots: Option<u64>,
    pub threshold: Option<f64>,
    pub js: Option<Vec<usize>>,
    pub output_dir: Option<PathBuf>,
    pub j: Option<f64>,
    pub r: Option<f64>,
    pub h: Option<f64>,
    pub n: Option<usize>,
    pub t_stop: Option<f64>,
    pub t_points: Option<usize>,
    pub p2: Option<f64>,
    pub p_read: Option<f64>,
    pub compiler: Option<CompilerKind>,
    pub layers: Option<usize>,
    pub max_iters: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// File (or defaults when `path` is `None`), then flags on top, then validation.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(self.seed, o.seed);
        set!(self.mode, o.mode);
        set!(self.shots, o.shots);
        set!(self.threshold, o.threshold);
        set!(self.js, o.js);
        if o.output_dir.is_some() {
            self.output_dir = o.output_dir.clone();
        }
        set!(self.model.j, o.j);
        set!(self.model.r, o.r);
        set!(self.model.h, o.h);
        set!(self.model.n, o.n);
        set!(self.time.stop, o.t_stop);
        set!(self.time.points, o.t_points);
        set!(self.noise.p2, o.p2);
        set!(self.noise.p_read, o.p_read);
        set!(self.compiler.kind, o.compiler);
        set!(self.compiler.layers, o.layers);
        set!(self.compiler.max_iters, o.max_iters);
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.params()?;
        if self.time.points == 0 || !(self.time.start <= self.time.stop) {
            bail!("time grid needs at least one point and start <= stop");
        }
        if self.compiler.kind != CompilerKind::Exact && self.compiler.layers == 0 {
            bail!("compiler.layers must be at least 1");
        }
        if self.compile.layers.contains(&0) {
            bail!("compile.layers entries must be at least 1");
        }
        if matches!(self.mode, Mode::Sampled | Mode::Noisy | Mode::Averaged) && self.shots == 0 {
            bail!("shots must be positive in {:?} mode", self.mode);
        }
        if !(self.threshold > 0.0 && self.threshold < 2.0) {
            bail!("threshold must lie in (0, 2)");
        }
        NoiseSpec::new(self.noise.p2, self.noise.p_read)?;
        self.compiler.trust_region().validate()?;
        for &j in &self.probes() {
            if j < 2 || j > self.model.n {
                bail!("probe site {j} outside 2..={}", self.model.n);
            }
        }
        Ok(())
    }

    pub fn params(&self) -> anyhow::Result<ModelParams> {
        Ok(ModelParams::open(self.model.j, self.model.r, self.model.h, self.model.n)?)
    }

    pub fn probes(&self) -> Vec<usize> {
        if self.js.is_empty() {
            (2..=self.model.n).collect()
        } else {
            self.js.clone()
        }
    }

    pub fn t_grid(&self) -> Vec<f64> {
        linspace(self.time.start, self.time.stop, self.time.points)
    }

    pub fn surface_spec(&self) -> anyhow::Result<SurfaceSpec> {
        Ok(SurfaceSpec {
            params: self.params()?,
            js: self.probes(),
            t_grid: self.t_grid(),
            mode: self.mode.estimator(),
            noise: NoiseSpec::new(self.noise.p2, self.noise.p_read)?,
            shots: self.shots,
            seed: self.seed,
        })
    }

    /// Same run with the model's `(r, h)` replaced.
    pub fn with_row(&self, row: &SweepRow) -> Self {
        let mut cfg = self.clone();
        cfg.model.r = row.r;
        cfg.model.h = row.h;
        cfg
    }
}
