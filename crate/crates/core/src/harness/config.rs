//! Scenario description and its TOML form.
//!
//! Every section is optional; missing entries take the baseline calibration.
//! Unknown keys are rejected and errors carry the dotted key path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::economy::ParamSet;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::meanfield::{perturbed_uniform, Numerics, Schedule};

use super::io::read_field_snapshot_on;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Pde,
    Agents,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lx: 4.0,
            ly: 4.0,
            nx: 128,
            ny: 128,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid2D> {
        Grid2D::new(self.lx, self.ly, self.nx, self.ny)
    }
}

/// Initial density; always normalized to unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Uniform plus a mean-free random perturbation of relative `amplitude`.
    Uniform {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        /// Defaults to `params.seed`.
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Uniform on the rectangle `[x0, x1] x [y0, y1]`, zero elsewhere, with the
    /// same kind of perturbation on its support.
    Strip {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Epanechnikov bump `(1 - |z - c|^2 / h_e^2)_+`.
    Epanechnikov {
        cx: f64,
        cy: f64,
        h_e: f64,
    },
    File {
        path: PathBuf,
    },
}

fn default_amplitude() -> f64 {
    0.01
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Uniform {
            amplitude: default_amplitude(),
            seed: None,
        }
    }
}

/// A scalar landscape: constant or read from a snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Value(f64),
    File { file: PathBuf },
}

impl FieldSpec {
    fn build(&self, grid: Grid2D, base: &Path, key: &str) -> Result<ScalarField> {
        match self {
            FieldSpec::Value(v) if v.is_finite() => Ok(ScalarField::constant(grid, *v)),
            FieldSpec::Value(v) => Err(Error::config(key, format!("must be finite, got {v}"))),
            FieldSpec::File { file } => {
                read_field_snapshot_on(&base.join(file), &grid).map(|(f, _)| f)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeSpec {
    /// Potential use of land `G`.
    pub g: FieldSpec,
    /// Exogenous amenities `A_ES`.
    pub a_es: FieldSpec,
}

impl Default for LandscapeSpec {
    fn default() -> Self {
        Self {
            g: FieldSpec::Value(1.0),
            a_es: FieldSpec::Value(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub metrics_interval: f64,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            t_end: 20.0,
            snapshot_times: vec![0.0, 1.0, 5.0, 10.0, 20.0],
            metrics_interval: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSpec {
    pub n: usize,
    pub dt: f64,
}

impl Default for AgentSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            dt: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    #[default]
    Cone,
    Epanechnikov,
    QuadraticW,
}

impl KernelChoice {
    pub fn spec(&self, h: f64) -> KernelSpec {
        let family = match self {
            KernelChoice::Cone => KernelFamily::Cone,
            KernelChoice::Epanechnikov => KernelFamily::Epanechnikov,
            KernelChoice::QuadraticW => KernelFamily::QuadraticW,
        };
        KernelSpec::new(family, h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec {
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub t_end: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            n_list: vec![2000, 8000, 32000],
            seeds: vec![1, 2, 3, 4, 5],
            t_end: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySpec {
    pub c_min: f64,
    pub c_max: f64,
    /// Relative width of the returned bracket.
    pub tol: f64,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            c_min: 1e-4,
            c_max: 1e4,
            tol: 1e-10,
        }
    }
}

/// One reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub grid: GridSpec,
    pub params: ParamSet,
    pub init: InitSpec,
    pub landscape: LandscapeSpec,
    pub kernel: KernelChoice,
    pub run: RunSpec,
    pub numerics: Numerics,
    pub analysis: AnalysisConfig,
    pub agents: AgentSpec,
    pub convergence: ConvergenceSpec,
    pub stability: StabilitySpec,
    /// Directory relative file paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "baseline".into(),
            mode: Mode::default(),
            grid: GridSpec::default(),
            params: ParamSet::default(),
            init: InitSpec::default(),
            landscape: LandscapeSpec::default(),
            kernel: KernelChoice::default(),
            run: RunSpec::default(),
            numerics: Numerics::default(),
            analysis: AnalysisConfig::default(),
            agents: AgentSpec::default(),
            convergence: ConvergenceSpec::default(),
            stability: StabilitySpec::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// Parses and validates a scenario from TOML text.
pub fn parse_config_str(text: &str) -> Result<Scenario> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| Error::config("<root>", e.message().to_string()))?;
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." || path.is_empty() {
            "<root>".to_string()
        } else {
            path
        };
        Error::config(key, e.into_inner().message().to_string())
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Reads a scenario file; relative paths inside it resolve against its directory.
pub fn parse_config(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut s = parse_config_str(&text)?;
    s.base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(s)
}

impl Scenario {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() || self.name.contains(['\n', '\r', '=']) {
            return Err(Error::config(
                "name",
                "must be a non-empty single-line string without '='",
            ));
        }
        let grid = self.grid.build()?;
        self.params.validate()?;
        self.numerics.validate()?;
        self.analysis.validate()?;
        self.schedule().validate()?;
        match &self.init {
            InitSpec::Uniform { amplitude, .. } | InitSpec::Strip { amplitude, .. }
                if !(*amplitude >= 0.0 && *amplitude < 1.0) =>
            {
                return Err(Error::config(
                    "init.amplitude",
                    format!("must lie in [0, 1), got {amplitude}"),
                ));
            }
            InitSpec::Strip { x0, x1, y0, y1, .. } => {
                if !(0.0 <= *x0
                    && x0 < x1
                    && *x1 <= grid.lx()
                    && 0.0 <= *y0
                    && y0 < y1
                    && *y1 <= grid.ly())
                {
                    return Err(Error::config(
                        "init",
                        "strip must be a nonempty rectangle inside the domain",
                    ));
                }
            }
            InitSpec::Epanechnikov { h_e, .. } if !(*h_e > 0.0) => {
                return Err(Error::config("init.h_e", format!("must be > 0, got {h_e}")));
            }
            _ => {}
        }
        if matches!(self.mode, Mode::Agents | Mode::Both) {
            if self.agents.n == 0 {
                return Err(Error::config("agents.n", "must be at least 1"));
            }
            if !(self.agents.dt > 0.0) {
                return Err(Error::config(
                    "agents.dt",
                    format!("must be > 0, got {}", self.agents.dt),
                ));
            }
        }
        let c = &self.convergence;
        if c.n_list.is_empty() || c.n_list.windows(2).any(|w| w[0] >= w[1]) || c.n_list[0] == 0 {
            return Err(Error::config(
                "convergence.n_list",
                "must be a nonempty strictly increasing list of positive counts",
            ));
        }
        if c.seeds.is_empty() {
            return Err(Error::config(
                "convergence.seeds",
                "needs at least one seed",
            ));
        }
        if !(c.t_end > 0.0) {
            return Err(Error::config(
                "convergence.t_end",
                format!("must be > 0, got {}", c.t_end),
            ));
        }
        let st = &self.stability;
        if !(st.c_min > 0.0 && st.c_max > st.c_min && st.tol > 0.0) {
            return Err(Error::config(
                "stability",
                "need 0 < c_min < c_max and tol > 0",
            ));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Grid2D> {
        self.grid.build()
    }

    pub fn kernel_spec(&self) -> KernelSpec {
        self.kernel.spec(self.params.h)
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            t_end: self.run.t_end,
            snapshot_times: self.run.snapshot_times.clone(),
            metrics_interval: self.run.metrics_interval,
        }
    }

    pub fn potential(&self, grid: Grid2D) -> Result<ScalarField> {
        self.landscape.g.build(grid, &self.base_dir, "landscape.g")
    }

    pub fn exogenous_amenities(&self, grid: Grid2D) -> Result<ScalarField> {
        self.landscape
            .a_es
            .build(grid, &self.base_dir, "landscape.a_es")
    }

    /// Unit-mass initial density.
    pub fn initial_density(&self, grid: Grid2D) -> Result<ScalarField> {
        let mut l = match &self.init {
            InitSpec::Uniform { amplitude, seed } => {
                perturbed_uniform(grid, 1.0, *amplitude, seed.unwrap_or(self.params.seed))?
            }
            InitSpec::Strip {
                x0,
                x1,
                y0,
                y1,
                amplitude,
                seed,
            } => {
                let noise = perturbed_uniform(
                    grid,
                    grid.area(),
                    *amplitude,
                    seed.unwrap_or(self.params.seed),
                )?;
                let inside = ScalarField::from_fn(grid, |x, y| {
                    if (*x0..=*x1).contains(&x) && (*y0..=*y1).contains(&y) {
                        1.0
                    } else {
                        0.0
                    }
                });
                if inside.sum() == 0.0 {
                    return Err(Error::config("init", "strip contains no cell centers"));
                }
                inside.zip_map(&noise, |a, b| a * b)?
            }
            InitSpec::Epanechnikov { cx, cy, h_e } => ScalarField::from_fn(grid, |x, y| {
                let dx = Grid2D::periodic_delta(x, *cx, grid.lx());
                let dy = Grid2D::periodic_delta(y, *cy, grid.ly());
                (1.0 - (dx * dx + dy * dy) / (h_e * h_e)).max(0.0)
            }),
            InitSpec::File { path } => read_field_snapshot_on(&self.base_dir.join(path), &grid)?.0,
        };
        if let Some(v) = l.values().iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::config(
                "init",
                format!("initial density must be nonnegative, found {v}"),
            ));
        }
        let m = l.integral();
        if !(m > 0.0) {
            return Err(Error::config("init", "initial density has no mass"));
        }
        l.scale(1.0 / m);
        Ok(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_baseline() {
        let s = parse_config_str("").unwrap();
        assert_eq!(s.params, ParamSet::default());
        assert_eq!(s.grid, GridSpec::default());
        assert_eq!(s.landscape, LandscapeSpec::default());
        assert_eq!(s.mode, Mode::Pde);
    }

    #[test]
    fn errors_carry_key_paths() {
        let e = parse_config_str("[params]\nphi = 1.5\n").unwrap_err();
        assert!(
            matches!(&e, Error::Config { key, .. } if key == "params.phi"),
            "{e}"
        );
        let e = parse_config_str("[params]\nbogus = 1\n").unwrap_err();
        assert!(
            matches!(&e, Error::Config { key, .. } if key.starts_with("params")),
            "{e}"
        );
        let e = parse_config_str("[grid]\nnx = 4\n").unwrap_err();
        assert!(
            matches!(&e, Error::Config { key, .. } if key == "grid.nx"),
            "{e}"
        );
        let e = parse_config_str("[init]\nkind = \"uniform\"\nwat = 2\n").unwrap_err();
        assert!(e.is_config(), "{e}");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut s = Scenario {
            init: InitSpec::Strip {
                x0: 1.0,
                x1: 2.0,
                y0: 1.0,
                y1: 7.0,
                amplitude: 0.0,
                seed: Some(3),
            },
            grid: GridSpec {
                lx: 3.0,
                ly: 8.0,
                nx: 48,
                ny: 128,
            },
            ..Scenario::default()
        };
        s.landscape.g = FieldSpec::File {
            file: "g.bin".into(),
        };
        let back = parse_config_str(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn strip_init_has_unit_mass_on_rectangle() {
        let text = "[grid]\nlx = 3.0\nly = 8.0\nnx = 48\nny = 128\n\
                    [init]\nkind = \"strip\"\nx0 = 1.0\nx1 = 2.0\ny0 = 1.0\ny1 = 7.0\n";
        let s = parse_config_str(text).unwrap();
        let g = s.build_grid().unwrap();
        let l = s.initial_density(g).unwrap();
        assert!((l.integral() - 1.0).abs() < 1e-12);
        for k in 0..g.len() {
            let (i, j) = g.coords(k);
            let (x, y) = g.cell_center(i, j);
            let inside = (1.0..=2.0).contains(&x) && (1.0..=7.0).contains(&y);
            assert_eq!(l.values()[k] > 0.0, inside, "cell ({x}, {y})");
        }
    }
}
