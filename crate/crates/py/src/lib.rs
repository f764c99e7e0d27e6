//! Python bindings: scenario loading, closed-loop runs, response metrics,
//! error criteria, gain comparison and swarm tuning.
//!
//! The module mirrors the CLI's capabilities in-process:
//!
//! ```python
//! import dstatcom_py as dsc
//! sc = dsc.Scenario()                 # built-in benchmark scenario
//! traj = sc.run()
//! sc.metrics(traj, "iq").rise_time
//! sc.criteria(traj, "vdc").itae
//! best = sc.tune(seed=42)
//! ```

use dstatcom_core::config::{canonical_loaded, parse_scenario_str, render_toml, LoadedScenario};
use dstatcom_core::pso::optimize;
use dstatcom_core::sim::{
    compare_gains, criteria_on, make_fitness, run_closed_loop, step_metrics, IdRefSource,
    SimError, StepSpec, TrajectorySignal,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn signal_from_name(name: &str) -> PyResult<TrajectorySignal> {
    match name {
        "id" => Ok(TrajectorySignal::Id),
        "iq" => Ok(TrajectorySignal::Iq),
        "vdc" => Ok(TrajectorySignal::Vdc),
        other => Err(value_err(format!("unknown signal '{other}' (expected id, iq or vdc)"))),
    }
}

/// A complete run description plus objective, swarm settings and gain sets.
#[pyclass(module = "dstatcom_py", skip_from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: LoadedScenario,
}

/// A uniformly sampled closed-loop run.
#[pyclass(module = "dstatcom_py")]
struct Trajectory {
    inner: dstatcom_core::sim::Trajectory,
}

/// Step-response quality numbers; undefined quantities are None.
#[pyclass(module = "dstatcom_py", get_all, skip_from_py_object)]
#[derive(Clone)]
struct Metrics {
    overshoot_pct: Option<f64>,
    rise_time: Option<f64>,
    settling_time: Option<f64>,
    steady_state_error: f64,
}

/// The four integral error criteria of one signal.
#[pyclass(module = "dstatcom_py", get_all, skip_from_py_object)]
#[derive(Clone)]
struct Criteria {
    itae: f64,
    iae: f64,
    ise: f64,
    itse: f64,
}

/// Outcome of a swarm tuning run.
#[pyclass(module = "dstatcom_py", get_all, skip_from_py_object)]
#[derive(Clone)]
struct TuneResult {
    kp: f64,
    ki: f64,
    fitness: f64,
    evaluations: u64,
    /// Per-iteration (best_fitness, kp, ki), in iteration order.
    history: Vec<(f64, f64, f64)>,
}

/// One gain set's comparison row; criteria and metrics fields are None when
/// the run diverged.
#[pyclass(module = "dstatcom_py", get_all, skip_from_py_object)]
#[derive(Clone)]
struct CompareRow {
    name: String,
    kp: f64,
    ki: f64,
    diverged: bool,
    itae: Option<f64>,
    iae: Option<f64>,
    ise: Option<f64>,
    itse: Option<f64>,
    overshoot_pct: Option<f64>,
    rise_time: Option<f64>,
    settling_time: Option<f64>,
    steady_state_error: Option<f64>,
}

impl Scenario {
    fn reference_for(&self, signal: TrajectorySignal) -> PyResult<StepSpec> {
        let sc = &self.inner.scenario;
        match signal {
            TrajectorySignal::Vdc => Ok(sc.vdc_ref),
            TrajectorySignal::Iq => Ok(sc.iq_ref),
            TrajectorySignal::Id => match &sc.id_ref {
                IdRefSource::Step(s) => Ok(*s),
                IdRefSource::OuterPi => Err(value_err(
                    "the id signal has no fixed reference (its command comes from the PI loop)",
                )),
            },
        }
    }
}

#[pymethods]
impl Scenario {
    /// The built-in benchmark scenario.
    #[new]
    fn new() -> Self {
        Scenario { inner: canonical_loaded() }
    }

    /// Load a scenario file (TOML).
    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(Scenario { inner: dstatcom_core::load_scenario(&path).map_err(value_err)? })
    }

    /// Parse a scenario from TOML text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Scenario { inner: parse_scenario_str(text).map_err(value_err)? })
    }

    /// Render the fully resolved scenario back to TOML.
    fn to_toml(&self) -> String {
        render_toml(&self.inner)
    }

    #[getter]
    fn get_kp(&self) -> f64 {
        self.inner.scenario.gains.kp
    }

    #[setter]
    fn set_kp(&mut self, kp: f64) {
        self.inner.scenario.gains.kp = kp;
    }

    #[getter]
    fn get_ki(&self) -> f64 {
        self.inner.scenario.gains.ki
    }

    #[setter]
    fn set_ki(&mut self, ki: f64) {
        self.inner.scenario.gains.ki = ki;
    }

    #[getter]
    fn get_seed(&self) -> u64 {
        self.inner.swarm.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.swarm.seed = seed;
    }

    #[getter]
    fn get_dt(&self) -> f64 {
        self.inner.scenario.dt
    }

    #[getter]
    fn get_t_end(&self) -> f64 {
        self.inner.scenario.t_end
    }

    #[getter]
    fn get_vdc_min_guard(&self) -> f64 {
        self.inner.scenario.vdc_min_guard
    }

    #[setter]
    fn set_vdc_min_guard(&mut self, v: f64) {
        self.inner.scenario.vdc_min_guard = v;
    }

    /// Names of the configured gain sets, in order.
    #[getter]
    fn get_gain_set_names(&self) -> Vec<String> {
        self.inner.gain_sets.iter().map(|g| g.name.clone()).collect()
    }

    /// Simulate the closed loop. Raises RuntimeError on divergence.
    fn run(&self) -> PyResult<Trajectory> {
        match run_closed_loop(&self.inner.scenario) {
            Ok(t) => Ok(Trajectory { inner: t }),
            Err(e @ SimError::Diverged { .. }) => Err(PyRuntimeError::new_err(e.to_string())),
            Err(e) => Err(value_err(e)),
        }
    }

    /// Tuning objective of a (kp, ki) pair; +inf when the loop diverges.
    fn fitness(&self, kp: f64, ki: f64) -> f64 {
        make_fitness(&self.inner.scenario, &self.inner.objective)(&[kp, ki])
    }

    /// Step-response metrics of `signal` against its configured reference.
    fn metrics(&self, traj: &Trajectory, signal: &str) -> PyResult<Metrics> {
        let signal = signal_from_name(signal)?;
        let reference = self.reference_for(signal)?;
        let m = step_metrics(&traj.inner, signal, &reference).map_err(value_err)?;
        Ok(Metrics {
            overshoot_pct: m.overshoot_pct,
            rise_time: m.rise_time,
            settling_time: m.settling_time,
            steady_state_error: m.steady_state_error,
        })
    }

    /// IAE/ISE/ITAE/ITSE of `signal` against its configured reference.
    fn criteria(&self, traj: &Trajectory, signal: &str) -> PyResult<Criteria> {
        let signal = signal_from_name(signal)?;
        let reference = self.reference_for(signal)?;
        let c = criteria_on(&traj.inner, signal, &reference).map_err(value_err)?;
        Ok(Criteria { itae: c.itae, iae: c.iae, ise: c.ise, itse: c.itse })
    }

    /// Swarm-tune (kp, ki) on the configured objective. Optional overrides
    /// replace the scenario's swarm settings for this call only.
    #[pyo3(signature = (seed=None, particles=None, iters=None))]
    fn tune(
        &self,
        seed: Option<u64>,
        particles: Option<usize>,
        iters: Option<usize>,
    ) -> PyResult<TuneResult> {
        let mut cfg = self.inner.swarm.clone();
        if let Some(seed) = seed {
            cfg.seed = seed;
        }
        if let Some(particles) = particles {
            cfg.n_particles = particles;
        }
        if let Some(iters) = iters {
            cfg.n_iterations = iters;
        }
        let fitness = make_fitness(&self.inner.scenario, &self.inner.objective);
        let result = optimize(&fitness, &cfg).map_err(value_err)?;
        Ok(TuneResult {
            kp: result.best_position[0],
            ki: result.best_position[1],
            fitness: result.best_fitness,
            evaluations: result.evaluations,
            history: result
                .history
                .iter()
                .map(|r| (r.best_fitness, r.best_position[0], r.best_position[1]))
                .collect(),
        })
    }

    /// Run every configured gain set and summarize each against the DC-link
    /// reference.
    fn compare(&self) -> PyResult<Vec<CompareRow>> {
        let report =
            compare_gains(&self.inner.scenario, &self.inner.gain_sets).map_err(value_err)?;
        Ok(report
            .rows
            .into_iter()
            .map(|r| CompareRow {
                name: r.name,
                kp: r.kp,
                ki: r.ki,
                diverged: r.diverged,
                itae: r.criteria.map(|c| c.itae),
                iae: r.criteria.map(|c| c.iae),
                ise: r.criteria.map(|c| c.ise),
                itse: r.criteria.map(|c| c.itse),
                overshoot_pct: r.metrics.and_then(|m| m.overshoot_pct),
                rise_time: r.metrics.and_then(|m| m.rise_time),
                settling_time: r.metrics.and_then(|m| m.settling_time),
                steady_state_error: r.metrics.map(|m| m.steady_state_error),
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        let sc = &self.inner.scenario;
        format!(
            "Scenario(kp={}, ki={}, dt={}, t_end={}, gain_sets={:?})",
            sc.gains.kp,
            sc.gains.ki,
            sc.dt,
            sc.t_end,
            self.get_gain_set_names()
        )
    }
}

#[pymethods]
impl Trajectory {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// One column by name: t, id, iq, vdc, id_ref, iq_ref, u1, u2, m,
    /// alpha, p, q.
    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        let pick: fn(&dstatcom_core::sim::Sample) -> f64 = match name {
            "t" => |s| s.t,
            "id" => |s| s.id,
            "iq" => |s| s.iq,
            "vdc" => |s| s.vdc,
            "id_ref" => |s| s.id_ref,
            "iq_ref" => |s| s.iq_ref,
            "u1" => |s| s.u1,
            "u2" => |s| s.u2,
            "m" => |s| s.m,
            "alpha" => |s| s.alpha,
            "p" => |s| s.p,
            "q" => |s| s.q,
            other => return Err(value_err(format!("unknown column '{other}'"))),
        };
        Ok(self.inner.samples.iter().map(pick).collect())
    }

    /// Largest modulation magnitude over the run.
    fn max_modulation(&self) -> f64 {
        self.inner.max_modulation()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory({} samples, t_last={:?})",
            self.inner.len(),
            self.inner.last_time()
        )
    }
}

#[pymodule]
fn dstatcom_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Metrics>()?;
    m.add_class::<Criteria>()?;
    m.add_class::<TuneResult>()?;
    m.add_class::<CompareRow>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
