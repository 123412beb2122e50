//! Experiment configuration, read from TOML.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use surveil_core::model::{dbm_to_watts, DelayMode, Dims, SystemParams};
use surveil_core::pathfollow::SolverConfig;
use surveil_core::robust::RobustConfig;
use surveil_core::scenario::Topology;

/// Defaults of the simulation section: `N_T = 5, N_R = 3, N_M = 4`, the
/// powers and the node placement.
pub fn default_params() -> (SystemParams, Topology, Dims) {
    (SystemParams::default(), Topology::default(), Dims::default())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Fig10,
    Custom,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 9] = [
        ExperimentId::Fig3,
        ExperimentId::Fig4,
        ExperimentId::Fig5,
        ExperimentId::Fig6,
        ExperimentId::Fig7,
        ExperimentId::Fig8,
        ExperimentId::Fig9,
        ExperimentId::Fig10,
        ExperimentId::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5 => "fig5",
            ExperimentId::Fig6 => "fig6",
            ExperimentId::Fig7 => "fig7",
            ExperimentId::Fig8 => "fig8",
            ExperimentId::Fig9 => "fig9",
            ExperimentId::Fig10 => "fig10",
            ExperimentId::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str() == s.to_ascii_lowercase())
            .with_context(|| format!("unknown experiment {s:?}"))
    }
}

/// What produced a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignType {
    /// Path-following NEE maximization with perfect CSI.
    Nee,
    /// Path-following weighted sum-rate maximization.
    Wsr,
    /// Dinkelbach iterations with inner path-following.
    DinkelbachIca,
    /// Worst-case AO design on the estimates.
    Robust,
    /// Perfect-CSI NEE design applied to the estimates as if they were exact.
    NonRobust,
}

impl DesignType {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignType::Nee => "nee",
            DesignType::Wsr => "wsr",
            DesignType::DinkelbachIca => "dinkelbach_ica",
            DesignType::Robust => "robust",
            DesignType::NonRobust => "non_robust",
        }
    }

    pub const ALL: [DesignType; 5] =
        [DesignType::Nee, DesignType::Wsr, DesignType::DinkelbachIca, DesignType::Robust, DesignType::NonRobust];
}

impl std::str::FromStr for DesignType {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        DesignType::ALL.into_iter().find(|d| d.as_str() == s).with_context(|| format!("unknown design {s:?}"))
    }
}

/// Swept values; the grid is the Cartesian product of the axes present.
/// Powers are given in dBm.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub p_max_dbm: Option<Vec<f64>>,
    pub r_th: Option<Vec<f64>>,
    pub alpha_d: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    /// Horizontal position of T, which sits at `(d_t, 1)`.
    pub d_t: Option<Vec<f64>>,
    /// Vertical position of M, which sits at `(0, d_m)`.
    pub d_m: Option<Vec<f64>>,
}

/// One grid point, with every axis resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub p_max: f64,
    pub r_th: f64,
    pub alpha_d: f64,
    pub eps: f64,
    pub d_t: f64,
    pub d_m: f64,
}

/// Overrides of the system parameters; powers in dBm.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    pub p_s_dbm: Option<f64>,
    pub p_max_dbm: Option<f64>,
    /// All four noise powers.
    pub noise_dbm: Option<f64>,
    pub r_th: Option<f64>,
    pub alpha_d: Option<f64>,
    pub alpha_r: Option<f64>,
    pub xi: Option<f64>,
    pub p_a: Option<f64>,
    pub p_r_ant: Option<f64>,
    pub p_c: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, base: &SystemParams) -> SystemParams {
        let mut p = base.clone();
        if let Some(x) = self.p_s_dbm {
            p.p_s = dbm_to_watts(x);
        }
        if let Some(x) = self.p_max_dbm {
            p.p_max = dbm_to_watts(x);
        }
        if let Some(x) = self.noise_dbm {
            let w = dbm_to_watts(x);
            p.sigma2_t = w;
            p.sigma2_d = w;
            p.sigma2_r = w;
            p.sigma2_m = w;
        }
        let set = |dst: &mut f64, src: Option<f64>| {
            if let Some(x) = src {
                *dst = x;
            }
        };
        set(&mut p.r_th, self.r_th);
        set(&mut p.alpha_d, self.alpha_d);
        set(&mut p.alpha_r, self.alpha_r);
        set(&mut p.xi, self.xi);
        set(&mut p.p_a, self.p_a);
        set(&mut p.p_r_ant, self.p_r_ant);
        set(&mut p.p_c, self.p_c);
        p
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyOverrides {
    /// Relative radius `eps_X = eps ||h_X||` used when the grid has no
    /// `eps` axis.
    pub eps: Option<f64>,
    /// True-channel draws per estimate in outage runs.
    pub perturbations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "both_modes")]
    pub modes: Vec<DelayMode>,
    /// Empty means the experiment's default designs.
    #[serde(default)]
    pub designs: Vec<DesignType>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(default)]
    pub uncertainty: UncertaintyOverrides,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub dims: Dims,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub robust: RobustConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_trials() -> usize {
    100
}

fn both_modes() -> Vec<DelayMode> {
    vec![DelayMode::Nnpd, DelayMode::Npd]
}

pub const DEFAULT_PERTURBATIONS: usize = 200;

impl ExperimentConfig {
    /// The experiment's standard grid, designs and parameters.
    pub fn preset(id: ExperimentId) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            experiment: id,
            trials: default_trials(),
            seed: 0,
            modes: both_modes(),
            designs: Vec::new(),
            grid: Grid::default(),
            params: ParamOverrides::default(),
            uncertainty: UncertaintyOverrides::default(),
            topology: Topology::default(),
            dims: Dims::default(),
            solver: SolverConfig::default(),
            robust: RobustConfig::default(),
            out: None,
        };
        match id {
            ExperimentId::Fig3 => c.trials = 1,
            ExperimentId::Fig4 => c.grid.p_max_dbm = Some(vec![10.0, 15.0, 20.0, 25.0, 30.0]),
            ExperimentId::Fig5 => c.grid.r_th = Some(vec![0.5, 1.0, 1.5, 2.0, 2.5]),
            ExperimentId::Fig6 => c.grid.alpha_d = Some(vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0]),
            ExperimentId::Fig7 => {
                c.grid.d_t = Some(vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
                c.grid.d_m = Some(vec![1.5, 2.0, 2.5, 3.0]);
            }
            ExperimentId::Fig8 => {
                c.trials = 1;
                c.uncertainty.eps = Some(0.02);
            }
            ExperimentId::Fig9 => c.grid.eps = Some(vec![0.01, 0.02, 0.05]),
            ExperimentId::Fig10 => {
                c.grid.eps = Some(vec![0.01, 0.02, 0.05, 0.1]);
                c.params.r_th = Some(1.5);
            }
            ExperimentId::Custom => {}
        }
        c
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let c: ExperimentConfig = toml::from_str(text).context("parsing experiment config")?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        ExperimentConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.modes.is_empty() {
            bail!("no delay mode selected");
        }
        let g = &self.grid;
        for (name, axis) in [
            ("p_max_dbm", &g.p_max_dbm),
            ("r_th", &g.r_th),
            ("alpha_d", &g.alpha_d),
            ("eps", &g.eps),
            ("d_t", &g.d_t),
            ("d_m", &g.d_m),
        ] {
            if let Some(v) = axis {
                if v.is_empty() {
                    bail!("grid axis {name} is empty");
                }
                if v.iter().any(|x| !x.is_finite()) {
                    bail!("grid axis {name} has a non-finite value");
                }
            }
        }
        if g.eps.iter().flatten().chain(self.uncertainty.eps.iter()).any(|&e| e < 0.0) {
            bail!("uncertainty radii must be nonnegative");
        }
        if self.uncertainty.perturbations == Some(0) {
            bail!("perturbations must be at least 1");
        }
        self.system_params().validate()?;
        self.dims.validate()?;
        self.topology.validate()?;
        self.robust.validate()?;
        Ok(())
    }

    pub fn system_params(&self) -> SystemParams {
        self.params.apply(&SystemParams::default())
    }

    pub fn perturbations(&self) -> usize {
        self.uncertainty.perturbations.unwrap_or(DEFAULT_PERTURBATIONS)
    }

    pub fn designs(&self) -> Vec<DesignType> {
        if !self.designs.is_empty() {
            return self.designs.clone();
        }
        use DesignType::*;
        match self.experiment {
            ExperimentId::Fig3 => vec![Nee, Wsr, DinkelbachIca],
            ExperimentId::Fig4 => vec![Nee, Wsr],
            ExperimentId::Fig5 => vec![Nee, Wsr, DinkelbachIca],
            ExperimentId::Fig6 | ExperimentId::Fig7 | ExperimentId::Custom => vec![Nee],
            ExperimentId::Fig8 => vec![Robust],
            ExperimentId::Fig9 => vec![Nee, Robust],
            ExperimentId::Fig10 => vec![Robust, NonRobust],
        }
    }

    /// Grid points in row-major order of the axes as declared.
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let p = self.system_params();
        let base = GridPoint {
            p_max: p.p_max,
            r_th: p.r_th,
            alpha_d: p.alpha_d,
            eps: self.uncertainty.eps.unwrap_or(0.0),
            d_t: self.topology.t[0],
            d_m: self.topology.m[1],
        };
        let g = &self.grid;
        let mut pts = vec![base];
        let mut expand = |axis: &Option<Vec<f64>>, set: fn(&mut GridPoint, f64)| {
            if let Some(vals) = axis {
                pts = pts
                    .iter()
                    .flat_map(|pt| {
                        vals.iter().map(move |&x| {
                            let mut q = *pt;
                            set(&mut q, x);
                            q
                        })
                    })
                    .collect();
            }
        };
        expand(&g.p_max_dbm, |q, x| q.p_max = dbm_to_watts(x));
        expand(&g.r_th, |q, x| q.r_th = x);
        expand(&g.alpha_d, |q, x| q.alpha_d = x);
        expand(&g.eps, |q, x| q.eps = x);
        expand(&g.d_t, |q, x| q.d_t = x);
        expand(&g.d_m, |q, x| q.d_m = x);
        pts
    }

    pub fn params_at(&self, pt: &GridPoint, mode: DelayMode) -> SystemParams {
        SystemParams { p_max: pt.p_max, r_th: pt.r_th, alpha_d: pt.alpha_d, delay_mode: mode, ..self.system_params() }
    }

    pub fn topology_at(&self, pt: &GridPoint) -> Topology {
        let mut t = self.topology.clone();
        t.t[0] = pt.d_t;
        t.m[1] = pt.d_m;
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for id in ExperimentId::ALL {
            let c = ExperimentConfig::preset(id);
            c.validate().unwrap();
            let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn grid_is_a_product() {
        let c = ExperimentConfig::preset(ExperimentId::Fig7);
        let pts = c.grid_points();
        assert_eq!(pts.len(), 20);
        assert_eq!((pts[0].d_t, pts[0].d_m), (-1.0, 1.5));
        assert_eq!((pts[1].d_t, pts[1].d_m), (-1.0, 2.0));
        assert!(pts.iter().all(|p| p.p_max == dbm_to_watts(25.0)));
    }

    #[test]
    fn partial_config_takes_defaults() {
        let c = ExperimentConfig::from_toml(
            r#"
            experiment = "fig4"
            trials = 3
            [grid]
            p_max_dbm = [10, 20]
            [params]
            r_th = 1.0
            [solver]
            max_iters = 20
            "#,
        )
        .unwrap();
        assert_eq!(c.grid_points().len(), 2);
        assert_eq!(c.system_params().r_th, 1.0);
        assert_eq!(c.solver.max_iters, 20);
        assert_eq!(c.solver.obj_tol, SolverConfig::default().obj_tol);
        assert_eq!(c.modes.len(), 2);
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"fig4\"\ntrials = 0").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"fig4\"\n[grid]\nr_th = []").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"fig4\"\n[grid]\nbogus = [1]").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"fig11\"").is_err());
    }

    #[test]
    fn defaults_follow_the_simulation_setup() {
        let (p, t, d) = default_params();
        assert!((p.p_s - 0.010).abs() < 1e-15);
        assert_eq!((p.alpha_d, p.alpha_r), (1.0, 1.0));
        assert_eq!((d.n_t, d.n_r, d.n_m), (5, 3, 4));
        let tm = ((t.t[0] - t.m[0]).powi(2) + (t.t[1] - t.m[1]).powi(2)).sqrt();
        assert!((tm - 1.0).abs() < 1e-15);
    }
}
