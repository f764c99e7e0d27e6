//! Simulation and tuning toolkit for a distribution static compensator
//! (DSTATCOM) on the DC side of a grid-tied converter.
//!
//! The crate models the averaged converter in the synchronous dq frame,
//! closes the loop with an exact input-output linearizing current controller
//! under an outer PI voltage loop, scores trajectories with the classic
//! integral error criteria, and tunes the PI gains with a deterministic
//! particle-swarm optimizer.
//!
//! Modules:
//! - [`model`]: plant dynamics, integration step, power and energy bookkeeping.
//! - [`control`]: inner current loops, exact linearization, PI voltage loop,
//!   saturation and modulation output.
//! - [`criteria`]: IAE/ISE/ITAE/ITSE integrals and the tuning objective.
//! - [`pso`]: particle-swarm optimizer with reproducible, thread-count
//!   independent runs, plus standard benchmark functions.
//! - [`sim`]: scenario description, closed-loop runs, step-response metrics
//!   and gain-set comparison.
//! - [`config`]: the TOML scenario-file format.

pub mod config;
pub mod control;
pub mod criteria;
pub mod model;
pub mod pso;
pub mod sim;

pub use config::{
    canonical_loaded, default_swarm_config, load_scenario, parse_scenario_str, render_toml,
    ConfigError, LoadedScenario,
};
pub use control::{
    feedback_linearize, inner_loop, pi_update, saturate, to_modulation, ControlError,
    ControllerGains, ModulationCommand, PiState, DEFAULT_ID_MAX,
};
pub use criteria::{
    integrate_criterion, objective_value, CriteriaError, Criterion, ErrorSeries, ObjectiveSpec,
    ObjectiveTerm,
};
pub use model::{
    compute_power, derivative, dissipation_rate, energy_rate, step_rk4, stored_energy,
    ControlInput, ModelError, PlantParams, PlantState, StateDerivative, DEFAULT_VDC_MIN,
};
pub use pso::{
    optimize, IterationRecord, PsoError, SwarmConfig, SwarmResult,
};
pub use sim::{
    compare_gains, criteria_on, make_fitness, reference_gain_sets, run_closed_loop, step_metrics,
    ComparisonReport, ComparisonRow, CriteriaValues, GainSet, IdRefSource, PerfMetrics, Sample,
    Scenario, SimError, StepSpec, Trajectory, TrajectorySignal,
};
