//! Scenario files: a TOML format describing a complete run — plant,
//! controller gains, references, integration grid, tuning objective, swarm
//! settings and the gain sets to compare. Every section and nearly every
//! field is optional; omissions fall back to the built-in benchmark
//! operating point, so the empty file is a valid scenario.
//!
//! Step sections (`[vdc_ref]`, `[iq_ref]`, explicit `[id_ref]`) are the one
//! exception: when present they must be complete, so a half-specified step
//! cannot silently mix with defaults.

use crate::criteria::{Criterion, ObjectiveSpec, ObjectiveTerm};
use crate::model::{PlantParams, PlantState};
use crate::control::ControllerGains;
use crate::pso::SwarmConfig;
use crate::sim::{reference_gain_sets, GainSet, IdRefSource, Scenario, StepSpec, TrajectorySignal};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario file is not valid TOML: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario configuration: {0}")]
    Invalid(String),
}

/// A fully resolved scenario file: everything the CLI needs for any
/// subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub objective: ObjectiveSpec,
    pub swarm: SwarmConfig,
    pub gain_sets: Vec<GainSet>,
}

/// The built-in defaults: the benchmark scenario, the DC-voltage ITAE
/// objective over the full horizon, the stock swarm settings and the three
/// reference gain sets.
pub fn canonical_loaded() -> LoadedScenario {
    let scenario = Scenario::canonical();
    let objective = ObjectiveSpec::dc_voltage_itae(scenario.vdc_ref, scenario.t_end);
    LoadedScenario {
        objective,
        swarm: default_swarm_config(),
        gain_sets: reference_gain_sets(),
        scenario,
    }
}

/// Stock swarm settings: 30 particles, 50 iterations, kp in [0, 1000] and
/// ki in [0, 500], seed 42.
pub fn default_swarm_config() -> SwarmConfig {
    SwarmConfig::new(vec![[0.0, 1000.0], [0.0, 500.0]])
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<LoadedScenario, ConfigError> {
    let file: ScenarioFile = toml::from_str(text)?;
    file.resolve()
}

/// Render a resolved scenario back to TOML, suitable both for inspection
/// and for re-loading.
pub fn render_toml(loaded: &LoadedScenario) -> String {
    let file = ScenarioFile::from_loaded(loaded);
    toml::to_string(&file).expect("scenario files serialize to TOML")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    plant: PlantRaw,
    #[serde(default)]
    gains: GainsRaw,
    #[serde(default = "default_vdc_ref")]
    vdc_ref: StepRaw,
    #[serde(default = "default_iq_ref")]
    iq_ref: StepRaw,
    #[serde(default)]
    id_ref: IdRefRaw,
    #[serde(default)]
    initial_state: StateRaw,
    #[serde(default)]
    sim: SimRaw,
    #[serde(default)]
    objective: ObjectiveRaw,
    #[serde(default)]
    swarm: SwarmRaw,
    #[serde(default = "default_gain_sets", rename = "gain_sets")]
    gain_sets: Vec<GainSetRaw>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PlantRaw {
    rs: f64,
    ls: f64,
    c: f64,
    omega: f64,
    vs: f64,
}

impl Default for PlantRaw {
    fn default() -> Self {
        let p = Scenario::canonical().plant;
        PlantRaw { rs: p.rs, ls: p.ls, c: p.c, omega: p.omega, vs: p.vs }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GainsRaw {
    lambda_d: f64,
    lambda_q: f64,
    kp: f64,
    ki: f64,
}

impl Default for GainsRaw {
    fn default() -> Self {
        let g = Scenario::canonical().gains;
        GainsRaw { lambda_d: g.lambda_d, lambda_q: g.lambda_q, kp: g.kp, ki: g.ki }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRaw {
    initial: f64,
    #[serde(rename = "final")]
    final_value: f64,
    step_time: f64,
}

impl StepRaw {
    fn from_spec(s: &StepSpec) -> Self {
        StepRaw { initial: s.initial, final_value: s.final_value, step_time: s.step_time }
    }

    fn to_spec(&self) -> StepSpec {
        StepSpec {
            initial: self.initial,
            final_value: self.final_value,
            step_time: self.step_time,
        }
    }
}

fn default_vdc_ref() -> StepRaw {
    StepRaw::from_spec(&Scenario::canonical().vdc_ref)
}

fn default_iq_ref() -> StepRaw {
    StepRaw::from_spec(&Scenario::canonical().iq_ref)
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
enum IdRefRaw {
    #[default]
    OuterPi,
    Step {
        initial: f64,
        #[serde(rename = "final")]
        final_value: f64,
        step_time: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StateRaw {
    id: f64,
    iq: f64,
    vdc: f64,
}

impl Default for StateRaw {
    fn default() -> Self {
        let x = Scenario::canonical().initial_state;
        StateRaw { id: x.id, iq: x.iq, vdc: x.vdc }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimRaw {
    dt: f64,
    t_end: f64,
    id_max: f64,
    vdc_min_guard: f64,
}

impl Default for SimRaw {
    fn default() -> Self {
        let sc = Scenario::canonical();
        SimRaw { dt: sc.dt, t_end: sc.t_end, id_max: sc.id_max, vdc_min_guard: sc.vdc_min_guard }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ObjectiveRaw {
    signal: String,
    criterion: String,
    scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
}

impl Default for ObjectiveRaw {
    fn default() -> Self {
        ObjectiveRaw { signal: "vdc".into(), criterion: "itae".into(), scale: 1000.0, horizon: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SwarmRaw {
    particles: usize,
    iterations: usize,
    inertia: f64,
    cognitive: f64,
    social: f64,
    kp_bounds: [f64; 2],
    ki_bounds: [f64; 2],
    vmax_fraction: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_fitness: Option<f64>,
}

impl Default for SwarmRaw {
    fn default() -> Self {
        SwarmRaw::from_config(&default_swarm_config())
    }
}

impl SwarmRaw {
    fn from_config(cfg: &SwarmConfig) -> Self {
        SwarmRaw {
            particles: cfg.n_particles,
            iterations: cfg.n_iterations,
            inertia: cfg.inertia,
            cognitive: cfg.cognitive,
            social: cfg.social,
            kp_bounds: cfg.bounds[0],
            ki_bounds: cfg.bounds[1],
            vmax_fraction: cfg.vmax_fraction,
            seed: cfg.seed,
            target_fitness: cfg.target_fitness,
        }
    }

    fn to_config(&self) -> SwarmConfig {
        let mut cfg = SwarmConfig::new(vec![self.kp_bounds, self.ki_bounds]);
        cfg.n_particles = self.particles;
        cfg.n_iterations = self.iterations;
        cfg.inertia = self.inertia;
        cfg.cognitive = self.cognitive;
        cfg.social = self.social;
        cfg.vmax_fraction = self.vmax_fraction;
        cfg.seed = self.seed;
        cfg.target_fitness = self.target_fitness;
        cfg
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainSetRaw {
    name: String,
    kp: f64,
    ki: f64,
}

fn default_gain_sets() -> Vec<GainSetRaw> {
    reference_gain_sets()
        .into_iter()
        .map(|g| GainSetRaw { name: g.name, kp: g.kp, ki: g.ki })
        .collect()
}

fn criterion_token(c: Criterion) -> &'static str {
    match c {
        Criterion::Iae => "iae",
        Criterion::Ise => "ise",
        Criterion::Itae => "itae",
        Criterion::Itse => "itse",
    }
}

fn parse_criterion(name: &str) -> Result<Criterion, ConfigError> {
    match name.to_ascii_lowercase().as_str() {
        "iae" => Ok(Criterion::Iae),
        "ise" => Ok(Criterion::Ise),
        "itae" => Ok(Criterion::Itae),
        "itse" => Ok(Criterion::Itse),
        other => Err(ConfigError::Invalid(format!(
            "unknown objective criterion '{other}' (expected iae, ise, itae or itse)"
        ))),
    }
}

fn parse_signal(name: &str) -> Result<TrajectorySignal, ConfigError> {
    match name {
        "id" => Ok(TrajectorySignal::Id),
        "iq" => Ok(TrajectorySignal::Iq),
        "vdc" => Ok(TrajectorySignal::Vdc),
        other => Err(ConfigError::Invalid(format!(
            "unknown objective signal '{other}' (expected id, iq or vdc)"
        ))),
    }
}

impl ScenarioFile {
    fn from_loaded(loaded: &LoadedScenario) -> Self {
        let sc = &loaded.scenario;
        let term = &loaded.objective.terms[0];
        ScenarioFile {
            plant: PlantRaw {
                rs: sc.plant.rs,
                ls: sc.plant.ls,
                c: sc.plant.c,
                omega: sc.plant.omega,
                vs: sc.plant.vs,
            },
            gains: GainsRaw {
                lambda_d: sc.gains.lambda_d,
                lambda_q: sc.gains.lambda_q,
                kp: sc.gains.kp,
                ki: sc.gains.ki,
            },
            vdc_ref: StepRaw::from_spec(&sc.vdc_ref),
            iq_ref: StepRaw::from_spec(&sc.iq_ref),
            id_ref: match &sc.id_ref {
                IdRefSource::OuterPi => IdRefRaw::OuterPi,
                IdRefSource::Step(s) => IdRefRaw::Step {
                    initial: s.initial,
                    final_value: s.final_value,
                    step_time: s.step_time,
                },
            },
            initial_state: StateRaw {
                id: sc.initial_state.id,
                iq: sc.initial_state.iq,
                vdc: sc.initial_state.vdc,
            },
            sim: SimRaw {
                dt: sc.dt,
                t_end: sc.t_end,
                id_max: sc.id_max,
                vdc_min_guard: sc.vdc_min_guard,
            },
            objective: ObjectiveRaw {
                signal: term.signal.name().to_string(),
                criterion: criterion_token(term.criterion).to_string(),
                scale: loaded.objective.scale,
                horizon: Some(loaded.objective.horizon),
            },
            swarm: SwarmRaw::from_config(&loaded.swarm),
            gain_sets: loaded
                .gain_sets
                .iter()
                .map(|g| GainSetRaw { name: g.name.clone(), kp: g.kp, ki: g.ki })
                .collect(),
        }
    }

    fn resolve(self) -> Result<LoadedScenario, ConfigError> {
        let scenario = Scenario {
            plant: PlantParams {
                rs: self.plant.rs,
                ls: self.plant.ls,
                c: self.plant.c,
                omega: self.plant.omega,
                vs: self.plant.vs,
            },
            gains: ControllerGains {
                lambda_d: self.gains.lambda_d,
                lambda_q: self.gains.lambda_q,
                kp: self.gains.kp,
                ki: self.gains.ki,
            },
            vdc_ref: self.vdc_ref.to_spec(),
            iq_ref: self.iq_ref.to_spec(),
            id_ref: match self.id_ref {
                IdRefRaw::OuterPi => IdRefSource::OuterPi,
                IdRefRaw::Step { initial, final_value, step_time } => {
                    IdRefSource::Step(StepSpec { initial, final_value, step_time })
                }
            },
            initial_state: PlantState {
                id: self.initial_state.id,
                iq: self.initial_state.iq,
                vdc: self.initial_state.vdc,
            },
            dt: self.sim.dt,
            t_end: self.sim.t_end,
            id_max: self.sim.id_max,
            vdc_min_guard: self.sim.vdc_min_guard,
        };
        scenario.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let signal = parse_signal(&self.objective.signal)?;
        let criterion = parse_criterion(&self.objective.criterion)?;
        let reference = match signal {
            TrajectorySignal::Vdc => scenario.vdc_ref,
            TrajectorySignal::Iq => scenario.iq_ref,
            TrajectorySignal::Id => match &scenario.id_ref {
                IdRefSource::Step(s) => *s,
                IdRefSource::OuterPi => {
                    return Err(ConfigError::Invalid(
                        "an objective on the id signal needs an explicit id_ref step \
                         (the PI command is not a fixed reference)"
                            .into(),
                    ))
                }
            },
        };
        let horizon = self.objective.horizon.unwrap_or(scenario.t_end);
        let objective = ObjectiveSpec {
            terms: vec![ObjectiveTerm { weight: 1.0, signal, criterion, reference }],
            scale: self.objective.scale,
            horizon,
        };
        objective.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if objective.horizon > scenario.t_end {
            return Err(ConfigError::Invalid(format!(
                "objective horizon ({} s) exceeds the simulated span ({} s)",
                objective.horizon, scenario.t_end
            )));
        }

        let swarm = self.swarm.to_config();
        swarm.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let mut gain_sets = Vec::with_capacity(self.gain_sets.len());
        for raw in &self.gain_sets {
            if raw.name.trim().is_empty() {
                return Err(ConfigError::Invalid("gain set with an empty name".into()));
            }
            if gain_sets.iter().any(|g: &GainSet| g.name == raw.name) {
                return Err(ConfigError::Invalid(format!(
                    "duplicate gain set name '{}'",
                    raw.name
                )));
            }
            if !(raw.kp.is_finite() && raw.kp >= 0.0 && raw.ki.is_finite() && raw.ki >= 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "gain set '{}' has invalid gains (kp = {}, ki = {})",
                    raw.name, raw.kp, raw.ki
                )));
            }
            gain_sets.push(GainSet::new(raw.name.clone(), raw.kp, raw.ki));
        }
        if gain_sets.is_empty() {
            return Err(ConfigError::Invalid("at least one gain set is required".into()));
        }

        Ok(LoadedScenario { scenario, objective, swarm, gain_sets })
    }
}
