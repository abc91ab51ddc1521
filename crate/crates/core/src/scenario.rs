//! Declarative run configuration, presets for each experimental condition,
//! staged evolution and file outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    convolve_detector, dark_population, fit_gaussian_peaks, momentum_distribution, MomentumDistribution, PeakFit,
};
use crate::basis::{build_momentum_grid, FamilyKind, MomentumGrid};
use crate::dynamics::SimParams;
use crate::error::{Error, Result};
use crate::io;
use crate::liouvillian::{build_initial_state, FamilyBlockState};
use crate::propagation::oracle::{cross_family_max, dense_from_blocks, dense_oracle_evolve};
use crate::propagation::{evolve, evolve_from, IntegratorConfig, Trajectory, DEFAULT_DT};

/// Peak positions fitted at the end of every stage, in ħk.
pub const RECOIL_CENTERS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

const PAPER_RABI: f64 = 0.3;
const DEFAULT_OMEGA_R: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub duration: f64,
    #[serde(default = "default_rabi")]
    pub omega_plus: f64,
    #[serde(default = "default_rabi")]
    pub omega_minus: f64,
    #[serde(default)]
    pub delta: f64,
}

fn default_rabi() -> f64 {
    PAPER_RABI
}

impl Stage {
    pub fn new(duration: f64, omega_plus: f64, omega_minus: f64) -> Self {
        Self { duration, omega_plus, omega_minus, delta: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub p_max: f64,
    pub points_per_recoil: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub trajectory: PathBuf,
    pub distribution: PathBuf,
    pub peaks: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            trajectory: "trajectory.csv".into(),
            distribution: "distribution.csv".into(),
            peaks: "peaks.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub grid: GridSpec,
    pub omega_r: f64,
    pub initial_delta_q: f64,
    pub stages: Vec<Stage>,
    pub dt: f64,
    pub observation_stride: usize,
    pub outputs: OutputPaths,
    pub detector_sigma: Option<f64>,
    pub seed_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Short,
    Medium,
    Long,
    Tilted,
    Asymmetric,
}

impl std::str::FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "short" => Ok(Self::Short),
            "medium" => Ok(Self::Medium),
            "long" => Ok(Self::Long),
            "tilted" => Ok(Self::Tilted),
            "asymmetric" => Ok(Self::Asymmetric),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Short => "short",
            Self::Medium => "medium",
            Self::Long => "long",
            Self::Tilted => "tilted",
            Self::Asymmetric => "asymmetric",
        }
    }
}

/// Ready-to-run configuration for a named experimental condition.
pub fn preset(name: PresetName) -> ScenarioConfig {
    let stages = match name {
        PresetName::Short => vec![Stage::new(150.0, PAPER_RABI, PAPER_RABI)],
        PresetName::Medium => vec![Stage::new(200.0, PAPER_RABI, PAPER_RABI)],
        PresetName::Long => vec![Stage::new(800.0, PAPER_RABI, PAPER_RABI)],
        // the retroreflected σ⁻ beam stops overlapping the atoms
        PresetName::Tilted => {
            vec![Stage::new(150.0, PAPER_RABI, PAPER_RABI), Stage::new(100.0, PAPER_RABI, 0.0)]
        }
        PresetName::Asymmetric => vec![Stage::new(150.0, PAPER_RABI, 0.8 * PAPER_RABI)],
    };
    ScenarioConfig {
        grid: GridSpec { p_max: 8.0, points_per_recoil: 20 },
        omega_r: DEFAULT_OMEGA_R,
        initial_delta_q: 0.15,
        stages,
        dt: DEFAULT_DT,
        observation_stride: 500,
        outputs: OutputPaths::default(),
        detector_sigma: None,
        seed_label: name.as_str().to_string(),
    }
}

pub fn preset_by_name(name: &str) -> Result<ScenarioConfig> {
    Ok(preset(name.parse()?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    grid: Option<GridSpec>,
    omega_r: Option<f64>,
    initial_delta_q: Option<f64>,
    stages: Option<Vec<Stage>>,
    dt: Option<f64>,
    observation_stride: Option<usize>,
    outputs: Option<OutputPaths>,
    detector_sigma: Option<f64>,
    seed_label: Option<String>,
}

/// Parses a JSON document; omitted fields take the `short` preset values.
/// Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let doc: ConfigDocument = if text.trim().is_empty() {
        ConfigDocument::default()
    } else {
        serde_json::from_str(text).map_err(|e| Error::ConfigSyntax(e.to_string()))?
    };
    let base = preset(PresetName::Short);
    let config = ScenarioConfig {
        grid: doc.grid.unwrap_or(base.grid),
        omega_r: doc.omega_r.unwrap_or(base.omega_r),
        initial_delta_q: doc.initial_delta_q.unwrap_or(base.initial_delta_q),
        stages: doc.stages.unwrap_or(base.stages),
        dt: doc.dt.unwrap_or(base.dt),
        observation_stride: doc.observation_stride.unwrap_or(base.observation_stride),
        outputs: doc.outputs.unwrap_or(base.outputs),
        detector_sigma: doc.detector_sigma.or(base.detector_sigma),
        seed_label: doc.seed_label.unwrap_or(base.seed_label),
    };
    config.validate()?;
    Ok(config)
}

fn key_error(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config { key: key.into(), reason: reason.into() }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = self.momentum_grid()?;
        if !(self.omega_r > 0.0) || !self.omega_r.is_finite() {
            return Err(key_error("omega_r", format!("must be positive, got {}", self.omega_r)));
        }
        if !(self.initial_delta_q > 0.0) || self.initial_delta_q > grid.p_max() / 4.0 {
            return Err(key_error(
                "initial_delta_q",
                format!("must lie in (0, {}], got {}", grid.p_max() / 4.0, self.initial_delta_q),
            ));
        }
        if self.stages.is_empty() {
            return Err(key_error("stages", "at least one stage is required"));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !(s.duration >= 0.0) || !s.duration.is_finite() {
                return Err(key_error(format!("stages[{i}].duration"), "must be non-negative"));
            }
            if !(s.omega_plus >= 0.0) || !s.omega_plus.is_finite() {
                return Err(key_error(format!("stages[{i}].omega_plus"), "must be non-negative"));
            }
            if !(s.omega_minus >= 0.0) || !s.omega_minus.is_finite() {
                return Err(key_error(format!("stages[{i}].omega_minus"), "must be non-negative"));
            }
            if !s.delta.is_finite() {
                return Err(key_error(format!("stages[{i}].delta"), "must be finite"));
            }
        }
        let integ = IntegratorConfig { dt: self.dt, t_final: 0.0, observation_stride: self.observation_stride };
        integ.validate().map_err(|e| match e {
            Error::StepTooLarge { .. } | Error::InvalidParameter { name: "dt", .. } => key_error("dt", e.to_string()),
            other => key_error("observation_stride", other.to_string()),
        })?;
        let o = &self.outputs;
        if o.trajectory == o.distribution || o.trajectory == o.peaks || o.distribution == o.peaks {
            return Err(key_error("outputs", "output paths must be distinct"));
        }
        if let Some(s) = self.detector_sigma {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(key_error("detector_sigma", format!("must be non-negative, got {s}")));
            }
        }
        Ok(())
    }

    pub fn momentum_grid(&self) -> Result<MomentumGrid> {
        build_momentum_grid(self.grid.p_max, self.grid.points_per_recoil).map_err(|e| key_error("grid", e.to_string()))
    }

    pub fn stage_params(&self, stage: &Stage) -> Result<SimParams> {
        SimParams::new(stage.omega_plus, stage.omega_minus, stage.delta, self.omega_r)
    }

    pub fn total_duration(&self) -> f64 {
        self.stages.iter().map(|s| s.duration).sum()
    }
}

/// State and observables at the end of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub index: usize,
    pub gamma_t: f64,
    pub params: SimParams,
    pub dark_lambda: f64,
    pub dark_iw: f64,
    /// Momentum distribution (detector-convolved when configured).
    pub distribution: MomentumDistribution,
    pub fit: PeakFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub label: String,
    pub final_state: FamilyBlockState,
    pub trajectory: Trajectory,
    pub stages: Vec<StageSummary>,
}

impl RunReport {
    pub fn final_stage(&self) -> &StageSummary {
        self.stages.last().expect("a run has at least one stage")
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let last = self.final_stage();
        serde_json::json!({
            "label": self.label,
            "gamma_t": last.gamma_t,
            "final_trace": self.final_state.trace(),
            "lost_trace": self.final_state.lost_trace,
            "dark_lambda": last.dark_lambda,
            "dark_iw": last.dark_iw,
            "peaks": last.fit.peaks,
            "fit_converged": last.fit.converged,
        })
    }
}

/// Runs every stage in sequence without touching the filesystem. The final
/// state of a stage seeds the next; parameters switch discontinuously.
pub fn simulate(config: &ScenarioConfig) -> Result<RunReport> {
    config.validate()?;
    simulate_unchecked(config)
}

/// [`simulate`] without up-front validation; invalid stage parameters
/// surface as [`Error::Stage`] when that stage starts.
pub fn simulate_unchecked(config: &ScenarioConfig) -> Result<RunReport> {
    let grid = config.momentum_grid()?;
    let mut state = build_initial_state(grid, config.initial_delta_q)?;
    let mut trajectory = Trajectory::new(grid);
    let mut stages = Vec::with_capacity(config.stages.len());
    let mut t = 0.0;
    for (index, stage) in config.stages.iter().enumerate() {
        let t_start = t;
        let wrap = |e: Error| {
            let gamma_t = match &e {
                Error::NegativePopulation { gamma_t, .. } => *gamma_t,
                _ => t_start,
            };
            Error::Stage { stage: index, gamma_t, source: Box::new(e) }
        };
        let params = config.stage_params(stage).map_err(wrap)?;
        let integ = IntegratorConfig {
            dt: config.dt,
            t_final: stage.duration,
            observation_stride: config.observation_stride,
        };
        let (next, part) = evolve_from(&state, &params, &integ, t_start).map_err(wrap)?;
        state = next;
        trajectory.extend(part);
        t = t_start + stage.duration;

        let mut distribution = momentum_distribution(&state);
        if let Some(sigma) = config.detector_sigma {
            distribution = convolve_detector(&distribution, sigma).map_err(wrap)?;
        }
        let fit = fit_gaussian_peaks(&distribution, &RECOIL_CENTERS).map_err(wrap)?;
        let dark = |kind| dark_population(&state, kind, &params).unwrap_or(f64::NAN);
        stages.push(StageSummary {
            index,
            gamma_t: t,
            params,
            dark_lambda: dark(FamilyKind::Lambda),
            dark_iw: dark(FamilyKind::InvertedW),
            distribution,
            fit,
        });
    }
    Ok(RunReport { label: config.seed_label.clone(), final_state: state, trajectory, stages })
}

/// Runs the scenario and writes its trajectory, final distribution and peak
/// fits under `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunReport> {
    let report = simulate(config)?;
    std::fs::create_dir_all(out_dir)?;
    io::write_trajectory(&out_dir.join(&config.outputs.trajectory), &report.trajectory)?;
    io::write_distribution(&out_dir.join(&config.outputs.distribution), &report.final_stage().distribution)?;
    io::write_peak_fits(&out_dir.join(&config.outputs.peaks), &report)?;
    Ok(report)
}

/// Outcome of comparing the block integrator with the dense oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleComparison {
    pub gamma_t: f64,
    pub max_deviation: f64,
    pub max_cross_family: f64,
    pub oracle_trace: f64,
    pub block_total: f64,
}

/// Propagates the standard initial state on `grid` with both the RK4 block
/// integrator and the dense oracle and compares them elementwise.
pub fn oracle_check(grid: MomentumGrid, params: &SimParams, delta_q: f64, t: f64, dt: f64) -> Result<OracleComparison> {
    let st = build_initial_state(grid, delta_q)?;
    let cfg = IntegratorConfig { dt, t_final: t, observation_stride: usize::MAX };
    let (fin, _) = evolve(&st, params, &cfg)?;
    let oracle = dense_oracle_evolve(&dense_from_blocks(&st), params, t, grid)?;
    Ok(OracleComparison {
        gamma_t: t,
        max_deviation: dense_from_blocks(&fin).max_abs_diff(&oracle),
        max_cross_family: cross_family_max(&oracle),
        oracle_trace: oracle.trace(),
        block_total: fin.trace(),
    })
}
