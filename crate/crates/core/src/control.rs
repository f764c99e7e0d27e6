//! Exact-linearizing current controller with an outer PI voltage loop.
//!
//! The control stack has three layers, innermost first:
//!
//! 1. `feedback_linearize` inverts the current equations so that the closed
//!    loop obeys `did/dt = v_d`, `diq/dt = v_q` exactly (not to first order:
//!    the model is flat in the currents, so the cancellation is algebraic).
//! 2. `inner_loop` turns current errors into those rate commands through
//!    proportional gains `lambda_d`, `lambda_q`, giving first-order tracking
//!    with time constants `1/lambda`.
//! 3. `pi_update` regulates the DC-link voltage by commanding d-axis current,
//!    with output clamping and conditional anti-windup.
//!
//! `saturate` projects the modulation vector back onto the unit disk, and
//! `to_modulation` converts it to the magnitude/angle pair a PWM stage needs.

use crate::model::{ControlInput, PlantParams, PlantState};
use thiserror::Error;

/// Default clamp on the magnitude of the commanded d-axis current, amperes.
pub const DEFAULT_ID_MAX: f64 = 50.0;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("DC-link voltage {vdc} V is below the {min} V floor; the linearizing law divides by vdc")]
    VdcTooLow { vdc: f64, min: f64 },
    #[error("invalid controller gains: {0}")]
    InvalidGains(String),
}

/// Gains for the full controller: inner current-loop bandwidths and the
/// outer PI pair being tuned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// d-axis current-loop gain, 1/s.
    pub lambda_d: f64,
    /// q-axis current-loop gain, 1/s.
    pub lambda_q: f64,
    /// Outer-loop proportional gain, A/V.
    pub kp: f64,
    /// Outer-loop integral gain, A/(V s).
    pub ki: f64,
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, v) in [
            ("lambda_d", self.lambda_d),
            ("lambda_q", self.lambda_q),
            ("kp", self.kp),
            ("ki", self.ki),
        ] {
            if !v.is_finite() {
                return Err(ControlError::InvalidGains(format!("{name} must be finite, got {v}")));
            }
        }
        if self.lambda_d <= 0.0 || self.lambda_q <= 0.0 {
            return Err(ControlError::InvalidGains(format!(
                "current-loop gains must be positive (lambda_d={}, lambda_q={})",
                self.lambda_d, self.lambda_q
            )));
        }
        if self.kp < 0.0 || self.ki < 0.0 {
            return Err(ControlError::InvalidGains(format!(
                "PI gains must be non-negative (kp={}, ki={})",
                self.kp, self.ki
            )));
        }
        Ok(())
    }
}

/// Integrator state of the outer PI loop.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PiState {
    /// Accumulated voltage error, volt-seconds.
    pub integral: f64,
}

/// Modulation command in polar form: magnitude (0..=1 after saturation) and
/// angle in radians, range (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationCommand {
    pub m: f64,
    pub alpha: f64,
}

/// One forward-Euler update of the outer PI loop.
///
/// Returns the commanded d-axis current (clamped to `id_max`) and the new
/// integrator state. Anti-windup is conditional: while the output clamps,
/// the integrator is frozen at its previous value, and the integral is
/// additionally bounded so that `ki * |integral| <= id_max`.
pub fn pi_update(
    vdc_ref: f64,
    vdc: f64,
    st: &PiState,
    g: &ControllerGains,
    dt: f64,
    id_max: f64,
) -> (f64, PiState) {
    let e = vdc_ref - vdc;
    let mut integral = st.integral + e * dt;
    if g.ki > 0.0 {
        let bound = id_max / g.ki;
        integral = integral.clamp(-bound, bound);
    }
    let unsaturated = g.kp * e + g.ki * integral;
    if unsaturated.abs() > id_max {
        (id_max.copysign(unsaturated), PiState { integral: st.integral })
    } else {
        (unsaturated, PiState { integral })
    }
}

/// Proportional current loops: map current errors to rate commands
/// `(v_d, v_q)` in A/s.
pub fn inner_loop(x: &PlantState, id_ref: f64, iq_ref: f64, g: &ControllerGains) -> (f64, f64) {
    (
        g.lambda_d * (id_ref - x.id),
        g.lambda_q * (iq_ref - x.iq),
    )
}

/// Solve the current equations for the modulation vector that makes
/// `did/dt = v_d` and `diq/dt = v_q` hold exactly at the state `x`.
///
/// The drift expressions mirror `model::derivative` term for term, so the
/// round trip `derivative(x, feedback_linearize(x, v, p), p)` reproduces the
/// commanded rates to within a few ulp.
///
/// Fails when `x.vdc < vdc_min`: the law divides by vdc and the model is not
/// meaningful on a collapsed DC link.
pub fn feedback_linearize(
    x: &PlantState,
    v_d: f64,
    v_q: f64,
    p: &PlantParams,
    vdc_min: f64,
) -> Result<ControlInput, ControlError> {
    if x.vdc < vdc_min {
        return Err(ControlError::VdcTooLow { vdc: x.vdc, min: vdc_min });
    }
    let drift_d = -(p.rs / p.ls) * x.id + p.omega * x.iq + p.vs / p.ls;
    let drift_q = -p.omega * x.id - (p.rs / p.ls) * x.iq;
    Ok(ControlInput {
        u1: p.ls / x.vdc * (drift_d - v_d),
        u2: p.ls / x.vdc * (drift_q - v_q),
    })
}

/// Clamp the modulation vector to the unit disk, preserving its direction.
/// Vectors already inside the disk are returned unchanged (bitwise).
pub fn saturate(u: ControlInput) -> ControlInput {
    let mag = u.magnitude();
    if mag > 1.0 {
        ControlInput { u1: u.u1 / mag, u2: u.u2 / mag }
    } else {
        u
    }
}

/// Convert the modulation vector to magnitude and phase. The angle follows
/// the atan2 convention, giving (-pi, pi].
pub fn to_modulation(u: &ControlInput) -> ModulationCommand {
    ModulationCommand {
        m: u.magnitude(),
        alpha: u.u2.atan2(u.u1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derivative;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn bench_params() -> PlantParams {
        PlantParams {
            rs: 0.28,
            ls: 0.0013,
            c: 4900e-6,
            omega: 100.0 * std::f64::consts::PI,
            vs: 110.0 * 2.0_f64.sqrt() / 3.0_f64.sqrt(),
        }
    }

    fn gains() -> ControllerGains {
        ControllerGains { lambda_d: 1000.0, lambda_q: 1000.0, kp: 1.0, ki: 70.0 }
    }

    #[test]
    fn pi_update_accumulates_error_when_unsaturated() {
        let (id_ref, st) = pi_update(205.0, 200.0, &PiState::default(), &gains(), 1e-3, DEFAULT_ID_MAX);
        // integral = 5 * 1e-3, output = 1*5 + 70*0.005
        assert_relative_eq!(st.integral, 0.005, max_relative = 1e-12);
        assert_relative_eq!(id_ref, 5.35, max_relative = 1e-12);
    }

    #[test]
    fn pi_update_holds_integrator_while_clamped() {
        let g = gains();
        // kp * e alone exceeds the clamp, so the output pins at id_max and
        // the integrator must not move.
        let (id_ref, st) = pi_update(300.0, 200.0, &PiState::default(), &g, 1e-3, DEFAULT_ID_MAX);
        assert_eq!(id_ref, DEFAULT_ID_MAX);
        assert_eq!(st.integral, 0.0);
        // Same on the negative side, from a pre-loaded integrator.
        let st0 = PiState { integral: -0.3 };
        let (id_ref, st) = pi_update(100.0, 200.0, &st0, &g, 1e-3, DEFAULT_ID_MAX);
        assert_eq!(id_ref, -DEFAULT_ID_MAX);
        assert_eq!(st.integral, st0.integral);
    }

    #[test]
    fn pi_update_is_quiescent_at_zero_error() {
        let (id_ref, st) = pi_update(200.0, 200.0, &PiState::default(), &gains(), 1e-3, DEFAULT_ID_MAX);
        assert_eq!(id_ref, 0.0);
        assert_eq!(st.integral, 0.0);
    }

    #[test]
    fn inner_loop_scales_errors_by_lambda() {
        let x = PlantState { id: 2.0, iq: -1.0, vdc: 200.0 };
        let (v_d, v_q) = inner_loop(&x, 3.0, 4.0, &gains());
        assert_eq!(v_d, 1000.0);
        assert_eq!(v_q, 5000.0);
    }

    #[test]
    fn linearize_at_rest_balances_the_grid_voltage() {
        let p = bench_params();
        let x = PlantState { id: 0.0, iq: 0.0, vdc: 200.0 };
        let u = feedback_linearize(&x, 0.0, 0.0, &p, crate::model::DEFAULT_VDC_MIN).unwrap();
        assert_relative_eq!(u.u1, p.vs / 200.0, max_relative = 1e-12);
        assert_abs_diff_eq!(u.u2, 0.0);
    }

    #[test]
    fn linearize_refuses_collapsed_dc_link() {
        let p = bench_params();
        let x = PlantState { id: 0.0, iq: 0.0, vdc: 0.5 };
        let err = feedback_linearize(&x, 0.0, 0.0, &p, 1.0).unwrap_err();
        assert!(matches!(err, ControlError::VdcTooLow { .. }), "got {err:?}");
    }

    #[test]
    fn linearization_round_trip_reproduces_commanded_rates() {
        let p = bench_params();
        let x = PlantState { id: 10.0, iq: 5.0, vdc: 200.0 };
        for (v_d, v_q) in [(0.0, 0.0), (1000.0, -15000.0), (-8.0e4, 3.3e4)] {
            let u = feedback_linearize(&x, v_d, v_q, &p, 1.0).unwrap();
            let d = derivative(&x, &u, &p);
            assert!((d.did_dt - v_d).abs() <= 1e-10 * v_d.abs().max(1.0));
            assert!((d.diq_dt - v_q).abs() <= 1e-10 * v_q.abs().max(1.0));
        }
    }

    #[test]
    fn saturate_keeps_interior_vectors_bitwise() {
        let u = ControlInput { u1: 0.3141592653589793, u2: -0.2718281828459045 };
        let s = saturate(u);
        assert_eq!(s.u1, u.u1);
        assert_eq!(s.u2, u.u2);
    }

    #[test]
    fn saturate_projects_onto_unit_circle() {
        let s = saturate(ControlInput { u1: 3.0, u2: 4.0 });
        assert_eq!(s.u1, 0.6);
        assert_eq!(s.u2, 0.8);
    }

    #[test]
    fn to_modulation_matches_polar_identities() {
        let m = to_modulation(&ControlInput { u1: -0.3, u2: -0.3 });
        assert_relative_eq!(m.m, 0.3 * 2.0_f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(m.alpha, -3.0 * std::f64::consts::FRAC_PI_4, max_relative = 1e-12);
        let unit = to_modulation(&ControlInput { u1: 1.0, u2: 0.0 });
        assert_eq!(unit.m, 1.0);
        assert_eq!(unit.alpha, 0.0);
    }

    #[test]
    fn gain_validation_rejects_bad_values() {
        let mut g = gains();
        assert!(g.validate().is_ok());
        g.lambda_q = 0.0;
        assert!(g.validate().is_err());
        let mut g = gains();
        g.kp = -1.0;
        assert!(g.validate().is_err());
        let mut g = gains();
        g.ki = f64::INFINITY;
        assert!(g.validate().is_err());
    }

    proptest! {
        #[test]
        fn round_trip_rates_hold_over_the_operating_envelope(
            id in -50.0..50.0f64,
            iq in -50.0..50.0f64,
            vdc in 50.0..400.0f64,
            v_d in -1.0e5..1.0e5f64,
            v_q in -1.0e5..1.0e5f64,
        ) {
            let p = bench_params();
            let x = PlantState { id, iq, vdc };
            let u = feedback_linearize(&x, v_d, v_q, &p, 1.0).unwrap();
            let d = derivative(&x, &u, &p);
            prop_assert!((d.did_dt - v_d).abs() <= 1e-10 * v_d.abs().max(1.0));
            prop_assert!((d.diq_dt - v_q).abs() <= 1e-10 * v_q.abs().max(1.0));
        }

        #[test]
        fn saturation_never_exceeds_unit_magnitude_or_turns_the_vector(
            u1 in -10.0..10.0f64,
            u2 in -10.0..10.0f64,
        ) {
            let u = ControlInput { u1, u2 };
            let s = saturate(u);
            prop_assert!(s.magnitude() <= 1.0 + 1e-12);
            if u.magnitude() > 1e-12 {
                let before = u.u2.atan2(u.u1);
                let after = s.u2.atan2(s.u1);
                prop_assert!((before - after).abs() < 1e-12);
            }
        }

        #[test]
        fn pi_output_and_integral_respect_their_clamps(
            errors in proptest::collection::vec(-400.0..400.0f64, 1..200),
            kp in 0.0..500.0f64,
            ki in 0.0..500.0f64,
        ) {
            let g = ControllerGains { lambda_d: 1000.0, lambda_q: 1000.0, kp, ki };
            let mut st = PiState::default();
            let dt = 2e-5;
            for e in errors {
                let (id_ref, next) = pi_update(200.0 + e, 200.0, &st, &g, dt, DEFAULT_ID_MAX);
                prop_assert!(id_ref.abs() <= DEFAULT_ID_MAX);
                if ki > 0.0 {
                    prop_assert!(next.integral.abs() <= DEFAULT_ID_MAX / ki + 1e-12);
                }
                st = next;
            }
        }
    }
}
