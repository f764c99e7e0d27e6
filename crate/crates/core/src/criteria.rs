//! Integral error criteria (IAE, ISE, ITAE, ITSE) and the weighted objective
//! used as the tuning fitness.
//!
//! All four criteria are trapezoid-rule integrals of a pointwise integrand of
//! the error samples; the time-weighted variants multiply by the sample time,
//! which penalizes error that persists late in the horizon.

use crate::sim::{StepSpec, Trajectory, TrajectorySignal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("malformed error series: {0}")]
    MalformedSeries(String),
    #[error("objective horizon {horizon} s exceeds the trajectory end {t_end} s")]
    HorizonExceedsTrajectory { horizon: f64, t_end: f64 },
    #[error("invalid objective: {0}")]
    InvalidObjective(String),
}

/// The four classic integral criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Integral of absolute error.
    Iae,
    /// Integral of squared error.
    Ise,
    /// Integral of time-weighted absolute error.
    Itae,
    /// Integral of time-weighted squared error.
    Itse,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::Iae, Criterion::Ise, Criterion::Itae, Criterion::Itse];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Iae => "IAE",
            Criterion::Ise => "ISE",
            Criterion::Itae => "ITAE",
            Criterion::Itse => "ITSE",
        }
    }

    fn integrand(&self, t: f64, e: f64) -> f64 {
        match self {
            Criterion::Iae => e.abs(),
            Criterion::Ise => e * e,
            Criterion::Itae => t * e.abs(),
            Criterion::Itse => t * e * e,
        }
    }
}

/// A sampled error signal on a strictly increasing, non-negative time grid.
/// Construction validates the invariants, so integration itself cannot fail.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    ts: Vec<f64>,
    es: Vec<f64>,
}

impl ErrorSeries {
    pub fn new(ts: Vec<f64>, es: Vec<f64>) -> Result<Self, CriteriaError> {
        if ts.len() != es.len() {
            return Err(CriteriaError::MalformedSeries(format!(
                "time and error lengths differ ({} vs {})",
                ts.len(),
                es.len()
            )));
        }
        if ts.len() < 2 {
            return Err(CriteriaError::MalformedSeries(format!(
                "need at least two samples, got {}",
                ts.len()
            )));
        }
        if !ts.iter().all(|t| t.is_finite()) || !es.iter().all(|e| e.is_finite()) {
            return Err(CriteriaError::MalformedSeries("non-finite sample".into()));
        }
        if ts[0] < 0.0 {
            return Err(CriteriaError::MalformedSeries(format!(
                "time must be non-negative, starts at {}",
                ts[0]
            )));
        }
        if ts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CriteriaError::MalformedSeries("time grid is not strictly increasing".into()));
        }
        Ok(ErrorSeries { ts, es })
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn errors(&self) -> &[f64] {
        &self.es
    }
}

/// Trapezoid-rule value of one criterion over the series.
pub fn integrate_criterion(series: &ErrorSeries, criterion: Criterion) -> f64 {
    let ts = &series.ts;
    let es = &series.es;
    let mut acc = 0.0;
    for i in 1..ts.len() {
        let g0 = criterion.integrand(ts[i - 1], es[i - 1]);
        let g1 = criterion.integrand(ts[i], es[i]);
        acc += 0.5 * (g0 + g1) * (ts[i] - ts[i - 1]);
    }
    acc
}

/// One weighted term of the tuning objective: a criterion applied to the
/// error between a trajectory signal and its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTerm {
    pub weight: f64,
    pub signal: TrajectorySignal,
    pub criterion: Criterion,
    pub reference: StepSpec,
}

/// Weighted-sum objective evaluated on a trajectory prefix of length
/// `horizon` seconds, then multiplied by `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub terms: Vec<ObjectiveTerm>,
    pub scale: f64,
    pub horizon: f64,
}

impl ObjectiveSpec {
    /// The canonical tuning fitness: 1000 * ITAE of the DC-link voltage
    /// error against its reference.
    pub fn dc_voltage_itae(vdc_ref: StepSpec, horizon: f64) -> Self {
        ObjectiveSpec {
            terms: vec![ObjectiveTerm {
                weight: 1.0,
                signal: TrajectorySignal::Vdc,
                criterion: Criterion::Itae,
                reference: vdc_ref,
            }],
            scale: 1000.0,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<(), CriteriaError> {
        if self.terms.is_empty() {
            return Err(CriteriaError::InvalidObjective("no terms".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(CriteriaError::InvalidObjective(format!("scale must be positive, got {}", self.scale)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(CriteriaError::InvalidObjective(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        for term in &self.terms {
            if !(term.weight.is_finite() && term.weight >= 0.0) {
                return Err(CriteriaError::InvalidObjective(format!(
                    "term weight must be non-negative, got {}",
                    term.weight
                )));
            }
        }
        Ok(())
    }
}

/// Evaluate the objective on a trajectory. Samples with `t <= horizon`
/// (up to a relative slack of one part in 1e9) enter the integral.
pub fn objective_value(traj: &Trajectory, spec: &ObjectiveSpec) -> Result<f64, CriteriaError> {
    spec.validate()?;
    let t_end = traj
        .samples
        .last()
        .map(|s| s.t)
        .ok_or_else(|| CriteriaError::MalformedSeries("empty trajectory".into()))?;
    let cutoff = spec.horizon * (1.0 + 1e-9);
    if spec.horizon > t_end * (1.0 + 1e-9) {
        return Err(CriteriaError::HorizonExceedsTrajectory { horizon: spec.horizon, t_end });
    }
    let mut total = 0.0;
    for term in &spec.terms {
        let mut ts = Vec::new();
        let mut es = Vec::new();
        for s in &traj.samples {
            if s.t > cutoff {
                break;
            }
            ts.push(s.t);
            es.push(term.signal.value_of(s) - term.reference.value_at(s.t));
        }
        let series = ErrorSeries::new(ts, es)?;
        total += term.weight * integrate_criterion(&series, term.criterion);
    }
    Ok(spec.scale * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Sample;
    use approx::assert_abs_diff_eq;

    fn exp_decay_series() -> ErrorSeries {
        let dt = 1e-4_f64;
        let n = (10.0 / dt).round() as usize;
        let ts: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let es: Vec<f64> = ts.iter().map(|t| (-t).exp()).collect();
        ErrorSeries::new(ts, es).unwrap()
    }

    #[test]
    fn criteria_match_closed_forms_for_exponential_error() {
        // For e(t) = exp(-t) on [0, 10] the four integrals have elementary
        // antiderivatives; the trapezoid error at dt = 1e-4 is O(1e-8).
        let s = exp_decay_series();
        let e10 = (-10.0f64).exp();
        let e20 = (-20.0f64).exp();
        assert_abs_diff_eq!(integrate_criterion(&s, Criterion::Iae), 1.0 - e10, epsilon = 1e-6);
        assert_abs_diff_eq!(integrate_criterion(&s, Criterion::Itae), 1.0 - 11.0 * e10, epsilon = 1e-6);
        assert_abs_diff_eq!(integrate_criterion(&s, Criterion::Ise), 0.5 * (1.0 - e20), epsilon = 1e-6);
        assert_abs_diff_eq!(
            integrate_criterion(&s, Criterion::Itse),
            0.25 - 0.25 * 21.0 * e20,
            epsilon = 1e-6
        );
    }

    #[test]
    fn unit_error_gives_interval_length_and_half_square() {
        // Constant |e| = 1 on [0, 1]: IAE = ISE = 1, and the time-weighted
        // pair integrate t exactly (the trapezoid rule is exact on linears).
        let n = 1000;
        let ts: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let es = vec![-1.0; ts.len()];
        let s = ErrorSeries::new(ts, es).unwrap();
        assert_abs_diff_eq!(integrate_criterion(&s, Criterion::Iae), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate_criterion(&s, Criterion::Ise), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate_criterion(&s, Criterion::Itae), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(integrate_criterion(&s, Criterion::Itse), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn series_validation_rejects_malformed_input() {
        assert!(matches!(
            ErrorSeries::new(vec![0.0, 1.0], vec![1.0]),
            Err(CriteriaError::MalformedSeries(_))
        ));
        assert!(ErrorSeries::new(vec![0.0], vec![1.0]).is_err());
        assert!(ErrorSeries::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(ErrorSeries::new(vec![1.0, 0.5], vec![1.0, 1.0]).is_err());
        assert!(ErrorSeries::new(vec![-1.0, 0.5], vec![1.0, 1.0]).is_err());
        assert!(ErrorSeries::new(vec![0.0, f64::NAN], vec![1.0, 1.0]).is_err());
        assert!(ErrorSeries::new(vec![0.0, 1.0], vec![1.0, f64::INFINITY]).is_err());
    }

    fn flat_error_trajectory(value: f64, dt: f64, t_end: f64) -> Trajectory {
        let n = (t_end / dt).round() as usize;
        let samples = (0..=n)
            .map(|k| Sample {
                t: k as f64 * dt,
                id: 0.0,
                iq: 0.0,
                vdc: 200.0 + value,
                id_ref: 0.0,
                iq_ref: 0.0,
                u1: 0.0,
                u2: 0.0,
                m: 0.0,
                alpha: 0.0,
                p: 0.0,
                q: 0.0,
            })
            .collect();
        Trajectory { samples }
    }

    #[test]
    fn canonical_objective_of_unit_error_is_five() {
        // 1000 * integral of t * 1 over [0, 0.1] = 1000 * 0.005.
        let traj = flat_error_trajectory(1.0, 2e-5, 0.1);
        let spec = ObjectiveSpec::dc_voltage_itae(
            StepSpec { initial: 200.0, final_value: 200.0, step_time: 0.0 },
            0.1,
        );
        let v = objective_value(&traj, &spec).unwrap();
        assert_abs_diff_eq!(v, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn horizon_beyond_trajectory_is_an_error() {
        let traj = flat_error_trajectory(1.0, 2e-5, 0.1);
        let spec = ObjectiveSpec::dc_voltage_itae(
            StepSpec { initial: 200.0, final_value: 200.0, step_time: 0.0 },
            0.2,
        );
        assert!(matches!(
            objective_value(&traj, &spec),
            Err(CriteriaError::HorizonExceedsTrajectory { .. })
        ));
    }

    #[test]
    fn quadratic_criteria_scale_quadratically() {
        let s = exp_decay_series();
        let doubled = ErrorSeries::new(s.ts.clone(), s.es.iter().map(|e| 2.0 * e).collect()).unwrap();
        for (c, power) in [
            (Criterion::Iae, 2.0),
            (Criterion::Itae, 2.0),
            (Criterion::Ise, 4.0),
            (Criterion::Itse, 4.0),
        ] {
            let base = integrate_criterion(&s, c);
            let scaled = integrate_criterion(&doubled, c);
            assert_abs_diff_eq!(scaled, power * base, epsilon = 1e-12 * power * base.abs().max(1.0));
        }
    }

    #[test]
    fn delaying_error_raises_the_time_weighted_criteria() {
        // Shifting the same error later by D adds D * IAE to ITAE.
        let s = exp_decay_series();
        let delay = 2.0;
        let shifted =
            ErrorSeries::new(s.ts.iter().map(|t| t + delay).collect(), s.es.clone()).unwrap();
        let itae = integrate_criterion(&s, Criterion::Itae);
        let iae = integrate_criterion(&s, Criterion::Iae);
        let itae_shifted = integrate_criterion(&shifted, Criterion::Itae);
        assert_abs_diff_eq!(itae_shifted, itae + delay * iae, epsilon = 1e-9);
    }
}
