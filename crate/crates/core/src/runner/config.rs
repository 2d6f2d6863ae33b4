//! Run configuration: one TOML document, every field defaulted, dotted
//! overrides applied before deserialization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::PicardConfig;
use crate::grid::{Field, Grid};
use crate::kernels::KernelSpec;
use crate::norms::make_admissible;
use crate::{io, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Global,
    InflationHomog,
    InflationTruncated,
    Taylor,
    Strichartz,
    Crossval,
    KernelOracle,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Global => "global",
            Experiment::InflationHomog => "inflation-homog",
            Experiment::InflationTruncated => "inflation-truncated",
            Experiment::Taylor => "taylor",
            Experiment::Strichartz => "strichartz",
            Experiment::Crossval => "crossval",
            Experiment::KernelOracle => "kernel-oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub strichartz: StrichartzConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub io: IoConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 1024,
            length: 40.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Homogeneous,
    TruncatedLow,
    Tail,
    Delta,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub lambda: f64,
    pub gamma: f64,
    /// Truncation radius (`truncated-low`).
    pub radius: f64,
    /// Tail scale (`tail`).
    pub h: f64,
    pub path: Option<PathBuf>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::Homogeneous,
            lambda: 1.0,
            gamma: 0.4,
            radius: 1.0,
            h: 0.5,
            path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Gaussian,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub width: f64,
    pub path: Option<PathBuf>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            kind: InitialKind::Gaussian,
            width: 1.0,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    /// Final time of trajectory experiments.
    pub t_final: f64,
    /// Split-step size.
    pub dt: f64,
    /// Probe time of the second-iterate experiments; the largest `s` of `taylor`.
    pub t_probe: f64,
    /// Trapezoid nodes for the second iterate.
    pub n_quad: usize,
    /// Recorded trajectory samples (including `t = 0`).
    pub samples: usize,
    /// Number of `s` values in `taylor`, geometric over `[t_probe/10, t_probe]`.
    pub s_count: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            t_final: 5.0,
            dt: 1e-3,
            t_probe: 0.05,
            n_quad: 64,
            samples: 101,
            s_count: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometric {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub h: Vec<f64>,
    /// Replaces `h` when present.
    pub geometric: Option<Geometric>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            h: vec![1.0, 0.7, 0.5, 0.35, 0.25, 0.18, 0.125],
            geometric: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSection {
    pub t_final: f64,
    pub n_time: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub ball_factor: f64,
}

impl Default for PicardSection {
    fn default() -> Self {
        let p = PicardConfig::<f64>::new(0.05);
        Self {
            t_final: p.t_final,
            n_time: p.n_time,
            tol: p.tol,
            max_iter: p.max_iter,
            ball_factor: p.ball_factor,
        }
    }
}

impl PicardSection {
    pub fn to_config(&self) -> PicardConfig<f64> {
        PicardConfig {
            t_final: self.t_final,
            n_time: self.n_time,
            tol: self.tol,
            max_iter: self.max_iter,
            ball_factor: self.ball_factor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrichartzConfig {
    /// Space exponents; the time exponent follows from admissibility.
    pub q: Vec<f64>,
    /// Number of random initial data.
    pub data: usize,
    /// Time samples `M` at base resolution.
    pub samples: usize,
    /// Report constant bounding every ratio.
    pub bound: f64,
}

impl Default for StrichartzConfig {
    fn default() -> Self {
        Self {
            q: vec![2.0, 2.5],
            data: 20,
            samples: 64,
            bound: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub gamma: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `[lo, hi]` band of `|ξ|` over which the ratio is sampled.
    pub band: [f64; 2],
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            gamma: vec![0.3, 0.4],
            sigma: vec![20.0, 40.0],
            band: [1.0, 4.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub out_dir: PathBuf,
    pub dump_fields: bool,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            dump_fields: false,
        }
    }
}

fn invalid(field: &str, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {message}"))
}

/// Sets `key.path = value` in a TOML table; `value` is parsed as a TOML
/// value, falling back to a bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap();
    let mut table = doc;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses a TOML document, applies overrides, resolves and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.resolve()
    }

    pub fn from_path(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Expands the geometric sweep and validates for the experiment.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(g) = self.sweep.geometric.take() {
            if g.count < 2 || !(g.start > 0.0 && g.stop > 0.0) {
                return Err(invalid(
                    "sweep.geometric",
                    "needs count >= 2 and positive endpoints",
                ));
            }
            let ratio = (g.stop / g.start).powf(1.0 / (g.count - 1) as f64);
            self.sweep.h = (0..g.count)
                .map(|i| g.start * ratio.powi(i as i32))
                .collect();
            self.sweep.h[g.count - 1] = g.stop;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.length).map_err(|e| invalid("grid", e))
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec<f64>> {
        let k = &self.kernel;
        Ok(match k.kind {
            KernelKind::Homogeneous => KernelSpec::homogeneous(k.lambda, k.gamma),
            KernelKind::TruncatedLow => KernelSpec::TruncatedLow {
                gamma: k.gamma,
                radius: k.radius,
            },
            KernelKind::Tail => KernelSpec::tail(k.gamma, k.h),
            KernelKind::Delta => KernelSpec::Delta,
            KernelKind::File => KernelSpec::FromFile {
                path: k
                    .path
                    .clone()
                    .ok_or_else(|| invalid("kernel.path", "required for kind = \"file\""))?,
            },
        })
    }

    pub fn initial_field(&self, grid: &Grid<f64>) -> Result<Field<f64>> {
        match self.initial.kind {
            InitialKind::Gaussian => Field::gaussian(grid.clone(), self.initial.width),
            InitialKind::File => {
                let path = self
                    .initial
                    .path
                    .as_ref()
                    .ok_or_else(|| invalid("initial.path", "required for kind = \"file\""))?;
                io::read_field_on(path, grid)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let d = self.grid.dim as f64;
        let spec = self.kernel_spec()?;
        spec.validate(self.grid.dim)
            .map_err(|e| invalid("kernel", e))?;
        if self.initial.kind == InitialKind::Gaussian && !(self.initial.width > 0.0) {
            return Err(invalid("initial.width", "must be > 0"));
        }
        if self.time.n_quad < 16 {
            return Err(invalid("time.n_quad", "must be >= 16"));
        }
        let gamma = self.kernel.gamma;
        let require_kind = |kind: KernelKind, name: &str| {
            if self.kernel.kind == kind {
                Ok(())
            } else {
                Err(invalid(
                    "kernel.kind",
                    format!("experiment {} needs {name}", self.experiment.name()),
                ))
            }
        };
        match self.experiment {
            Experiment::Global => {
                require_kind(KernelKind::Homogeneous, "homogeneous")?;
                let cap = 2f64.min(d / 2.0);
                if !(gamma > 0.0 && gamma < cap) {
                    return Err(invalid(
                        "kernel.gamma",
                        format!(
                            "global experiment needs 0 < gamma < min(2, d/2) = {cap}, got {gamma}"
                        ),
                    ));
                }
                self.check_stepping()?;
            }
            Experiment::InflationHomog | Experiment::InflationTruncated => {
                if self.experiment == Experiment::InflationHomog {
                    require_kind(KernelKind::Homogeneous, "homogeneous")?;
                } else {
                    require_kind(KernelKind::TruncatedLow, "truncated-low")?;
                }
                let h = &self.sweep.h;
                if h.len() < crate::picard_lab::MIN_FIT_POINTS {
                    return Err(invalid(
                        "sweep.h",
                        format!(
                            "needs at least {} values",
                            crate::picard_lab::MIN_FIT_POINTS
                        ),
                    ));
                }
                if h.iter().any(|&x| !(x > 0.0 && x <= 1.0)) || h.windows(2).any(|w| !(w[1] < w[0]))
                {
                    return Err(invalid(
                        "sweep.h",
                        "values must be strictly decreasing in (0, 1]",
                    ));
                }
                if !(self.time.t_probe > 0.0) {
                    return Err(invalid("time.t_probe", "must be > 0"));
                }
                if self.initial.kind != InitialKind::Gaussian && self.initial.path.is_none() {
                    return Err(invalid("initial.path", "required"));
                }
            }
            Experiment::Taylor => {
                if !(self.time.t_probe > 0.0) {
                    return Err(invalid("time.t_probe", "must be > 0"));
                }
                if self.time.s_count < 4 {
                    return Err(invalid("time.s_count", "must be >= 4"));
                }
            }
            Experiment::Strichartz => {
                if self.strichartz.q.is_empty() {
                    return Err(invalid("strichartz.q", "must not be empty"));
                }
                for &q in &self.strichartz.q {
                    make_admissible(q, self.grid.dim).map_err(|e| invalid("strichartz.q", e))?;
                }
                if self.strichartz.data == 0 {
                    return Err(invalid("strichartz.data", "must be >= 1"));
                }
                if self.strichartz.samples < 16 {
                    return Err(invalid("strichartz.samples", "must be >= 16"));
                }
                if !(self.time.t_final > 0.0) {
                    return Err(invalid("time.t_final", "must be > 0"));
                }
                if !(self.strichartz.bound > 0.0) {
                    return Err(invalid("strichartz.bound", "must be > 0"));
                }
            }
            Experiment::Crossval => {
                self.picard
                    .to_config()
                    .validate()
                    .map_err(|e| invalid("picard", e))?;
                if self.picard.n_time < 2 {
                    return Err(invalid("picard.n_time", "must be >= 2"));
                }
            }
            Experiment::KernelOracle => {
                if self.grid.dim != 1 {
                    return Err(invalid("grid.dim", "kernel-oracle runs in d = 1"));
                }
                if self.oracle.gamma.iter().any(|&g| !(g > 0.0 && g < 1.0))
                    || self.oracle.gamma.is_empty()
                {
                    return Err(invalid("oracle.gamma", "values must lie in (0, 1)"));
                }
                if self.oracle.sigma.len() < 2 || self.oracle.sigma.iter().any(|&s| !(s > 0.0)) {
                    return Err(invalid("oracle.sigma", "needs >= 2 positive widths"));
                }
                let [lo, hi] = self.oracle.band;
                if !(lo > 0.0 && hi > lo && hi < std::f64::consts::PI / grid.dx()) {
                    return Err(invalid("oracle.band", "needs 0 < lo < hi < Nyquist"));
                }
            }
        }
        Ok(())
    }

    fn check_stepping(&self) -> Result<()> {
        let t = &self.time;
        if !(t.dt > 0.0) {
            return Err(invalid("time.dt", "must be > 0"));
        }
        if !(t.t_final >= t.dt) {
            return Err(invalid("time.t_final", "must be >= time.dt"));
        }
        if t.samples < 2 {
            return Err(invalid("time.samples", "must be >= 2"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = RunConfig::from_toml_str("experiment = \"global\"\nkernel.lambda = -1.0\n", &[])
            .unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.kernel.lambda, -1.0);
        assert_eq!(cfg.experiment, Experiment::Global);
    }

    #[test]
    fn overrides_apply_after_parsing() {
        let cfg = RunConfig::from_toml_str(
            "experiment = \"taylor\"\n[grid]\nn = 512\n",
            &[
                "grid.n=256".into(),
                "kernel.kind=delta".into(),
                "io.out_dir=/tmp/x".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.grid.n, 256);
        assert_eq!(cfg.kernel.kind, KernelKind::Delta);
        assert_eq!(cfg.io.out_dir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn global_gamma_cap_is_enforced() {
        let err = RunConfig::from_toml_str("experiment = \"global\"\nkernel.gamma = 0.6\n", &[])
            .unwrap_err();
        assert!(err.to_string().contains("kernel.gamma"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_toml_str("experiment = \"global\"\ngrid.m = 3\n", &[]).is_err());
        assert!(RunConfig::from_toml_str("experiment = \"nope\"\n", &[]).is_err());
    }

    #[test]
    fn geometric_sweep_expands() {
        let cfg = RunConfig::from_toml_str(
            "experiment = \"inflation-homog\"\n[sweep.geometric]\nstart = 1.0\nstop = 0.125\ncount = 4\n",
            &[],
        )
        .unwrap_err();
        // four points are too few for a fit
        assert!(cfg.to_string().contains("sweep.h"));
        let cfg = RunConfig::from_toml_str(
            "experiment = \"inflation-homog\"\n[sweep.geometric]\nstart = 1.0\nstop = 0.0625\ncount = 5\n",
            &[],
        )
        .unwrap();
        assert_eq!(cfg.sweep.h.len(), 5);
        assert!((cfg.sweep.h[1] - 0.5).abs() < 1e-15);
        assert_eq!(cfg.sweep.h[4], 0.0625);
        assert!(cfg.sweep.geometric.is_none());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_toml_str("experiment = \"crossval\"\nkernel.lambda = 0.0\n", &[])
            .unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn malformed_override() {
        let mut t = toml::Table::new();
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
        apply_override(&mut t, "a=1").unwrap();
        assert!(apply_override(&mut t, "a.b=1").is_err());
    }
}
