//! Closed-loop simulation harness: scenario description, fixed-step
//! integration of the plant under the controller, step-response metrics and
//! gain-set comparison.
//!
//! Integration runs classic RK4 on the closed-loop vector field: the current
//! controller (inner loops plus exact linearization plus saturation) is
//! re-evaluated at every RK4 stage state, which models the continuous-time
//! control law. References and the outer PI command are held over each step:
//! the PI is a discrete forward-Euler controller executing once per step.

use crate::control::{
    feedback_linearize, inner_loop, pi_update, saturate, to_modulation, ControlError,
    ControllerGains, PiState, DEFAULT_ID_MAX,
};
use crate::criteria::{
    integrate_criterion, objective_value, Criterion, CriteriaError, ErrorSeries, ObjectiveSpec,
};
use crate::model::{
    advance, compute_power, derivative, rk4_combine, PlantParams, PlantState, StateDerivative,
    DEFAULT_VDC_MIN,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("simulation diverged at t = {t} s: {reason}")]
    Diverged {
        /// Samples recorded before the failure.
        partial: Box<Trajectory>,
        t: f64,
        reason: String,
    },
    #[error("step at t = {step_time} s lies outside the trajectory window [{t_start}, {t_end}] s")]
    StepNotInWindow { step_time: f64, t_start: f64, t_end: f64 },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
}

/// A reference that switches from `initial` to `final_value` at `step_time`
/// (a constant reference is a step with equal levels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSpec {
    pub initial: f64,
    pub final_value: f64,
    pub step_time: f64,
}

impl StepSpec {
    pub fn constant(value: f64) -> Self {
        StepSpec { initial: value, final_value: value, step_time: 0.0 }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        if t >= self.step_time {
            self.final_value
        } else {
            self.initial
        }
    }

    pub fn magnitude(&self) -> f64 {
        (self.final_value - self.initial).abs()
    }

    fn validate(&self, name: &str) -> Result<(), SimError> {
        if !(self.initial.is_finite() && self.final_value.is_finite() && self.step_time.is_finite())
        {
            return Err(SimError::InvalidScenario(format!("{name} has non-finite fields")));
        }
        if self.step_time < 0.0 {
            return Err(SimError::InvalidScenario(format!(
                "{name} step time must be non-negative, got {}",
                self.step_time
            )));
        }
        Ok(())
    }
}

/// Where the d-axis current reference comes from: the outer PI voltage loop
/// (normal operation) or an explicit open-loop step (for plant studies).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdRefSource {
    OuterPi,
    Step(StepSpec),
}

/// Complete description of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantParams,
    pub gains: ControllerGains,
    pub vdc_ref: StepSpec,
    pub iq_ref: StepSpec,
    pub id_ref: IdRefSource,
    pub initial_state: PlantState,
    /// Integration step, seconds.
    pub dt: f64,
    /// Simulated horizon, seconds; must be an integer multiple of `dt`.
    pub t_end: f64,
    /// Clamp on the PI current command, amperes.
    pub id_max: f64,
    /// DC-link floor treated as model breakdown, volts.
    pub vdc_min_guard: f64,
}

impl Scenario {
    /// The benchmark operating point used throughout the tests and as the
    /// CLI default: a 50 Hz grid at 110 V line-to-line feeding a 200 V DC
    /// link, with a 0 to 15 A reactive-current step at t = 20 ms.
    pub fn canonical() -> Self {
        Scenario {
            plant: PlantParams {
                rs: 0.28,
                ls: 0.0013,
                c: 4900e-6,
                omega: 100.0 * std::f64::consts::PI,
                vs: 110.0 * 2.0_f64.sqrt() / 3.0_f64.sqrt(),
            },
            gains: ControllerGains { lambda_d: 1000.0, lambda_q: 1000.0, kp: 1.0, ki: 70.0 },
            vdc_ref: StepSpec::constant(200.0),
            iq_ref: StepSpec { initial: 0.0, final_value: 15.0, step_time: 0.02 },
            id_ref: IdRefSource::OuterPi,
            initial_state: PlantState { id: 0.0, iq: 0.0, vdc: 200.0 },
            dt: 2e-5,
            t_end: 0.1,
            id_max: DEFAULT_ID_MAX,
            vdc_min_guard: DEFAULT_VDC_MIN,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.plant.validate().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        self.gains.validate().map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::InvalidScenario(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(SimError::InvalidScenario(format!(
                "t_end must be at least one step ({} s), got {}",
                self.dt, self.t_end
            )));
        }
        let ratio = self.t_end / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.round().max(1.0) {
            return Err(SimError::InvalidScenario(format!(
                "t_end ({}) is not an integer multiple of dt ({})",
                self.t_end, self.dt
            )));
        }
        if !self.initial_state.is_finite() {
            return Err(SimError::InvalidScenario("initial state has non-finite fields".into()));
        }
        if !(self.id_max.is_finite() && self.id_max > 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "id_max must be positive, got {}",
                self.id_max
            )));
        }
        if !(self.vdc_min_guard.is_finite() && self.vdc_min_guard >= 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "vdc_min_guard must be non-negative, got {}",
                self.vdc_min_guard
            )));
        }
        if self.initial_state.vdc <= self.vdc_min_guard {
            return Err(SimError::InvalidScenario(format!(
                "initial vdc ({}) must exceed the {} V guard",
                self.initial_state.vdc, self.vdc_min_guard
            )));
        }
        self.vdc_ref.validate("vdc_ref")?;
        self.iq_ref.validate("iq_ref")?;
        if let IdRefSource::Step(s) = &self.id_ref {
            s.validate("id_ref")?;
        }
        Ok(())
    }

    /// Number of integration steps; the trajectory has one more sample.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// One record on the uniform time grid. The control values are the ones
/// commanded at this sample's state and applied from here to the next sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub id: f64,
    pub iq: f64,
    pub vdc: f64,
    pub id_ref: f64,
    pub iq_ref: f64,
    pub u1: f64,
    pub u2: f64,
    pub m: f64,
    pub alpha: f64,
    /// Active power, watts.
    pub p: f64,
    /// Reactive power, vars.
    pub q: f64,
}

/// Uniformly sampled closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    /// Largest modulation magnitude over the run; 1.0 means the commanded
    /// vector hit the saturation boundary at some sample.
    pub fn max_modulation(&self) -> f64 {
        self.samples.iter().map(|s| s.m).fold(0.0, f64::max)
    }
}

/// Selector for the state columns of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectorySignal {
    Id,
    Iq,
    Vdc,
}

impl TrajectorySignal {
    pub fn value_of(&self, s: &Sample) -> f64 {
        match self {
            TrajectorySignal::Id => s.id,
            TrajectorySignal::Iq => s.iq,
            TrajectorySignal::Vdc => s.vdc,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrajectorySignal::Id => "id",
            TrajectorySignal::Iq => "iq",
            TrajectorySignal::Vdc => "vdc",
        }
    }
}

fn closed_loop_derivative(
    x: &PlantState,
    id_ref: f64,
    iq_ref: f64,
    sc: &Scenario,
) -> Result<StateDerivative, ControlError> {
    let (v_d, v_q) = inner_loop(x, id_ref, iq_ref, &sc.gains);
    let u = saturate(feedback_linearize(x, v_d, v_q, &sc.plant, sc.vdc_min_guard)?);
    Ok(derivative(x, &u, &sc.plant))
}

/// Simulate the scenario. The first sample is the initial state at t = 0;
/// each later sample follows one RK4 step of the closed loop.
///
/// On divergence (DC link at or below the guard, or a non-finite state) the
/// error carries the trajectory up to the last healthy sample.
pub fn run_closed_loop(sc: &Scenario) -> Result<Trajectory, SimError> {
    sc.validate()?;
    let n = sc.n_steps();
    let mut samples = Vec::with_capacity(n + 1);
    let mut x = sc.initial_state;
    let mut pi = PiState::default();

    for k in 0..=n {
        let t = k as f64 * sc.dt;
        let vdc_ref_t = sc.vdc_ref.value_at(t);
        let iq_ref_t = sc.iq_ref.value_at(t);
        let id_ref_t = match &sc.id_ref {
            IdRefSource::OuterPi => {
                let (cmd, next) = pi_update(vdc_ref_t, x.vdc, &pi, &sc.gains, sc.dt, sc.id_max);
                pi = next;
                cmd
            }
            IdRefSource::Step(spec) => spec.value_at(t),
        };

        // Control at the sample state; this is both the recorded value and
        // the first RK4 stage.
        let (v_d, v_q) = inner_loop(&x, id_ref_t, iq_ref_t, &sc.gains);
        let u = match feedback_linearize(&x, v_d, v_q, &sc.plant, sc.vdc_min_guard) {
            Ok(u) => saturate(u),
            Err(e) => {
                return Err(SimError::Diverged {
                    partial: Box::new(Trajectory { samples }),
                    t,
                    reason: e.to_string(),
                })
            }
        };
        let polar = to_modulation(&u);
        let (p_w, q_var) = compute_power(&x, &sc.plant);
        samples.push(Sample {
            t,
            id: x.id,
            iq: x.iq,
            vdc: x.vdc,
            id_ref: id_ref_t,
            iq_ref: iq_ref_t,
            u1: u.u1,
            u2: u.u2,
            m: polar.m,
            alpha: polar.alpha,
            p: p_w,
            q: q_var,
        });
        if k == n {
            break;
        }

        let stepped = (|| -> Result<PlantState, ControlError> {
            let k1 = derivative(&x, &u, &sc.plant);
            let k2 = closed_loop_derivative(&advance(&x, &k1, 0.5 * sc.dt), id_ref_t, iq_ref_t, sc)?;
            let k3 = closed_loop_derivative(&advance(&x, &k2, 0.5 * sc.dt), id_ref_t, iq_ref_t, sc)?;
            let k4 = closed_loop_derivative(&advance(&x, &k3, sc.dt), id_ref_t, iq_ref_t, sc)?;
            Ok(rk4_combine(&x, &k1, &k2, &k3, &k4, sc.dt))
        })();
        let next = match stepped {
            Ok(next) => next,
            Err(e) => {
                return Err(SimError::Diverged {
                    partial: Box::new(Trajectory { samples }),
                    t,
                    reason: e.to_string(),
                })
            }
        };
        if !next.is_finite() || next.vdc <= sc.vdc_min_guard {
            return Err(SimError::Diverged {
                partial: Box::new(Trajectory { samples }),
                t: t + sc.dt,
                reason: format!(
                    "state left the model's validity region (id = {}, iq = {}, vdc = {})",
                    next.id, next.iq, next.vdc
                ),
            });
        }
        x = next;
    }
    Ok(Trajectory { samples })
}

/// Step-response quality numbers. Times are measured from the step instant.
/// A field is `None` when the quantity is undefined for the trace (for
/// example the trace never settles, or a regulation run has no step to rise
/// through).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerfMetrics {
    /// Peak excursion beyond the final reference, percent of step magnitude
    /// (percent of the reference level for zero-magnitude regulation runs).
    pub overshoot_pct: Option<f64>,
    /// 10% to 90% rise time, seconds.
    pub rise_time: Option<f64>,
    /// Last entry into the +-2% band around the final reference, seconds.
    pub settling_time: Option<f64>,
    /// Absolute error against the final reference at the last sample.
    pub steady_state_error: f64,
}

fn settle_time(window: &[(f64, f64)], target: f64, band: f64, origin: f64) -> Option<f64> {
    let mut last_outside = None;
    for (i, &(_, y)) in window.iter().enumerate() {
        if (y - target).abs() > band {
            last_outside = Some(i);
        }
    }
    match last_outside {
        None => Some(0.0),
        Some(i) if i + 1 < window.len() => Some(window[i + 1].0 - origin),
        Some(_) => None,
    }
}

/// Measure the response of one trajectory signal to a reference step.
///
/// For a true step the band and percentages are relative to the step
/// magnitude. For a constant (zero-magnitude) reference the trace is a
/// regulation run: rise time is undefined, and the band and overshoot are
/// taken relative to the reference level itself.
pub fn step_metrics(
    traj: &Trajectory,
    signal: TrajectorySignal,
    step: &StepSpec,
) -> Result<PerfMetrics, SimError> {
    let first = traj.samples.first().ok_or(SimError::EmptyTrajectory)?;
    let last = traj.samples.last().ok_or(SimError::EmptyTrajectory)?;
    if step.step_time < first.t || step.step_time > last.t {
        return Err(SimError::StepNotInWindow {
            step_time: step.step_time,
            t_start: first.t,
            t_end: last.t,
        });
    }
    let window: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.t >= step.step_time)
        .map(|s| (s.t, signal.value_of(s)))
        .collect();
    let target = step.final_value;
    let magnitude = step.magnitude();
    let steady_state_error = (window.last().expect("window covers the step").1 - target).abs();

    if magnitude > 0.0 {
        let denom = step.final_value - step.initial;
        let mut t10 = None;
        let mut t90 = None;
        for &(t, y) in &window {
            let progress = (y - step.initial) / denom;
            if t10.is_none() && progress >= 0.1 {
                t10 = Some(t);
            }
            if progress >= 0.9 {
                t90 = Some(t);
                break;
            }
        }
        let rise_time = match (t10, t90) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        };
        let dir = denom.signum();
        let peak_beyond =
            window.iter().map(|&(_, y)| dir * (y - target)).fold(f64::NEG_INFINITY, f64::max);
        let overshoot_pct = Some(100.0 * peak_beyond.max(0.0) / magnitude);
        let settling_time =
            settle_time(&window, target, 0.02 * magnitude, step.step_time);
        Ok(PerfMetrics { overshoot_pct, rise_time, settling_time, steady_state_error })
    } else {
        let scale = target.abs();
        if scale == 0.0 {
            return Ok(PerfMetrics {
                overshoot_pct: None,
                rise_time: None,
                settling_time: settle_time(&window, target, 0.0, step.step_time),
                steady_state_error,
            });
        }
        let peak_dev = window.iter().map(|&(_, y)| (y - target).abs()).fold(0.0, f64::max);
        Ok(PerfMetrics {
            overshoot_pct: Some(100.0 * peak_dev / scale),
            rise_time: None,
            settling_time: settle_time(&window, target, 0.02 * scale, step.step_time),
            steady_state_error,
        })
    }
}

/// All four error criteria of one signal against a step reference, over the
/// whole trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriteriaValues {
    pub iae: f64,
    pub ise: f64,
    pub itae: f64,
    pub itse: f64,
}

pub fn criteria_on(
    traj: &Trajectory,
    signal: TrajectorySignal,
    reference: &StepSpec,
) -> Result<CriteriaValues, CriteriaError> {
    let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let es: Vec<f64> =
        traj.samples.iter().map(|s| signal.value_of(s) - reference.value_at(s.t)).collect();
    let series = ErrorSeries::new(ts, es)?;
    Ok(CriteriaValues {
        iae: integrate_criterion(&series, Criterion::Iae),
        ise: integrate_criterion(&series, Criterion::Ise),
        itae: integrate_criterion(&series, Criterion::Itae),
        itse: integrate_criterion(&series, Criterion::Itse),
    })
}

/// Build the tuning fitness: substitute `(kp, ki)` into the scenario, run
/// the closed loop, and evaluate the objective. Divergence and evaluation
/// failures map to +inf so an optimizer can keep searching.
pub fn make_fitness(
    sc: &Scenario,
    spec: &ObjectiveSpec,
) -> impl Fn(&[f64]) -> f64 + Sync + Send + 'static {
    let template = sc.clone();
    let spec = spec.clone();
    move |z: &[f64]| {
        let mut s = template.clone();
        s.gains.kp = z[0];
        s.gains.ki = z[1];
        match run_closed_loop(&s) {
            Ok(traj) => objective_value(&traj, &spec).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    }
}

/// A named `(kp, ki)` pair for comparison runs.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub name: String,
    pub kp: f64,
    pub ki: f64,
}

impl GainSet {
    pub fn new(name: impl Into<String>, kp: f64, ki: f64) -> Self {
        GainSet { name: name.into(), kp, ki }
    }
}

/// The three reference tunings shipped with the toolkit: a low-gain random
/// draw, a hand-tuned trial pair, and the swarm-optimized pair.
pub fn reference_gain_sets() -> Vec<GainSet> {
    vec![
        GainSet::new("random", 3.2145, 14.2455),
        GainSet::new("trial", 1.0, 70.0),
        GainSet::new("pso", 415.2451, 31.0245),
    ]
}

/// Comparison outcome for one gain set. Metrics and criteria are reported
/// for the DC-link voltage against its reference; a diverged run carries
/// neither, only the partial trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub name: String,
    pub kp: f64,
    pub ki: f64,
    pub criteria: Option<CriteriaValues>,
    pub metrics: Option<PerfMetrics>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// One (name, trajectory) pair per row, partial when the row diverged.
    pub trajectories: Vec<(String, Trajectory)>,
}

/// Run the scenario once per gain set and summarize each run against the
/// DC-link reference. A diverging set marks its row; other rows are
/// unaffected.
pub fn compare_gains(sc: &Scenario, sets: &[GainSet]) -> Result<ComparisonReport, SimError> {
    if sets.is_empty() {
        return Err(SimError::InvalidScenario("no gain sets to compare".into()));
    }
    let mut report = ComparisonReport::default();
    for set in sets {
        let mut s = sc.clone();
        s.gains.kp = set.kp;
        s.gains.ki = set.ki;
        match run_closed_loop(&s) {
            Ok(traj) => {
                let criteria = criteria_on(&traj, TrajectorySignal::Vdc, &sc.vdc_ref)?;
                let metrics = step_metrics(&traj, TrajectorySignal::Vdc, &sc.vdc_ref)?;
                report.rows.push(ComparisonRow {
                    name: set.name.clone(),
                    kp: set.kp,
                    ki: set.ki,
                    criteria: Some(criteria),
                    metrics: Some(metrics),
                    diverged: false,
                });
                report.trajectories.push((set.name.clone(), traj));
            }
            Err(SimError::Diverged { partial, .. }) => {
                report.rows.push(ComparisonRow {
                    name: set.name.clone(),
                    kp: set.kp,
                    ki: set.ki,
                    criteria: None,
                    metrics: None,
                    diverged: true,
                });
                report.trajectories.push((set.name.clone(), *partial));
            }
            Err(other) => return Err(other),
        }
    }
    Ok(report)
}
