//! Averaged dq-frame model of a DSTATCOM: a three-phase VSC behind a series
//! R-L filter feeding a DC-link capacitor, expressed in a synchronous frame
//! aligned with the grid voltage (vq = 0).
//!
//! State is `[id, iq, vdc]`; the averaged switch vector `(u1, u2)` is the
//! d/q modulation pair, constrained to the unit disk elsewhere (see
//! `control::saturate`). Equations:
//!
//! ```text
//! did/dt  = -(rs/ls) id + omega iq - (u1/ls) vdc + vs/ls
//! diq/dt  = -omega id - (rs/ls) iq - (u2/ls) vdc
//! dvdc/dt = (u1 id + u2 iq) / c
//! ```
//!
//! The sign structure makes the converter lossless: the u-terms cancel in the
//! stored-energy balance, so d/dt[E] = vs id - rs (id^2 + iq^2) exactly.

use thiserror::Error;

/// Default DC-link floor below which the model is considered out of its
/// validity region (the linearizing control divides by vdc).
pub const DEFAULT_VDC_MIN: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("integration diverged: {0}")]
    IntegrationDiverged(String),
}

/// Electrical parameters of the coupling filter, DC link and grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Series filter resistance, ohms.
    pub rs: f64,
    /// Series filter inductance, henries.
    pub ls: f64,
    /// DC-link capacitance, farads.
    pub c: f64,
    /// Grid angular frequency, rad/s.
    pub omega: f64,
    /// Grid phase voltage amplitude (frame-aligned d-axis voltage), volts.
    pub vs: f64,
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("rs", self.rs),
            ("ls", self.ls),
            ("c", self.c),
            ("omega", self.omega),
            ("vs", self.vs),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ModelError::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        if self.rs <= 0.0 || self.ls <= 0.0 || self.c <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "rs, ls, c must be positive (rs={}, ls={}, c={})",
                self.rs, self.ls, self.c
            )));
        }
        if self.omega <= 0.0 || self.vs <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "omega and vs must be positive (omega={}, vs={})",
                self.omega, self.vs
            )));
        }
        Ok(())
    }
}

/// Converter state: d/q filter currents (A) and DC-link voltage (V).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub id: f64,
    pub iq: f64,
    pub vdc: f64,
}

impl PlantState {
    pub fn is_finite(&self) -> bool {
        self.id.is_finite() && self.iq.is_finite() && self.vdc.is_finite()
    }
}

/// Averaged modulation input: d/q components of the switch vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub u1: f64,
    pub u2: f64,
}

impl ControlInput {
    /// Euclidean magnitude of the modulation vector.
    pub fn magnitude(&self) -> f64 {
        self.u1.hypot(self.u2)
    }
}

/// Time derivative of the plant state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub did_dt: f64,
    pub diq_dt: f64,
    pub dvdc_dt: f64,
}

/// Right-hand side of the averaged model.
///
/// The current equations are written as drift plus input channel. The drift
/// expressions are shared verbatim with `control::feedback_linearize` so the
/// exact-cancellation property survives floating point at the ulp level.
pub fn derivative(x: &PlantState, u: &ControlInput, p: &PlantParams) -> StateDerivative {
    let drift_d = -(p.rs / p.ls) * x.id + p.omega * x.iq + p.vs / p.ls;
    let drift_q = -p.omega * x.id - (p.rs / p.ls) * x.iq;
    StateDerivative {
        did_dt: drift_d - u.u1 / p.ls * x.vdc,
        diq_dt: drift_q - u.u2 / p.ls * x.vdc,
        dvdc_dt: (u.u1 * x.id + u.u2 * x.iq) / p.c,
    }
}

pub(crate) fn advance(x: &PlantState, d: &StateDerivative, h: f64) -> PlantState {
    PlantState {
        id: x.id + h * d.did_dt,
        iq: x.iq + h * d.diq_dt,
        vdc: x.vdc + h * d.dvdc_dt,
    }
}

pub(crate) fn rk4_combine(
    x: &PlantState,
    k1: &StateDerivative,
    k2: &StateDerivative,
    k3: &StateDerivative,
    k4: &StateDerivative,
    dt: f64,
) -> PlantState {
    let w = dt / 6.0;
    PlantState {
        id: x.id + w * (k1.did_dt + 2.0 * k2.did_dt + 2.0 * k3.did_dt + k4.did_dt),
        iq: x.iq + w * (k1.diq_dt + 2.0 * k2.diq_dt + 2.0 * k3.diq_dt + k4.diq_dt),
        vdc: x.vdc + w * (k1.dvdc_dt + 2.0 * k2.dvdc_dt + 2.0 * k3.dvdc_dt + k4.dvdc_dt),
    }
}

/// One classic fixed-step RK4 step with the modulation input held constant
/// over the step (zero-order hold).
///
/// Fails with `IntegrationDiverged` if the new state has a non-finite
/// component or the DC-link voltage falls to `vdc_min` or below.
pub fn step_rk4(
    x: &PlantState,
    u: &ControlInput,
    p: &PlantParams,
    dt: f64,
    vdc_min: f64,
) -> Result<PlantState, ModelError> {
    let k1 = derivative(x, u, p);
    let k2 = derivative(&advance(x, &k1, 0.5 * dt), u, p);
    let k3 = derivative(&advance(x, &k2, 0.5 * dt), u, p);
    let k4 = derivative(&advance(x, &k3, dt), u, p);
    let next = rk4_combine(x, &k1, &k2, &k3, &k4, dt);
    if !next.is_finite() {
        return Err(ModelError::IntegrationDiverged(format!(
            "non-finite state after step (id={}, iq={}, vdc={})",
            next.id, next.iq, next.vdc
        )));
    }
    if next.vdc <= vdc_min {
        return Err(ModelError::IntegrationDiverged(format!(
            "vdc dropped to {} V (floor {} V)",
            next.vdc, vdc_min
        )));
    }
    Ok(next)
}

/// Instantaneous active and reactive power (P, Q) exchanged with the grid,
/// watts / vars. With the frame aligned to the grid voltage, P depends only
/// on id and Q only on iq.
pub fn compute_power(x: &PlantState, p: &PlantParams) -> (f64, f64) {
    (1.5 * p.vs * x.id, 1.5 * p.vs * x.iq)
}

/// Energy stored in the filter inductors and the DC-link capacitor, joules.
pub fn stored_energy(x: &PlantState, p: &PlantParams) -> f64 {
    0.5 * p.ls * (x.id * x.id + x.iq * x.iq) + 0.5 * p.c * x.vdc * x.vdc
}

/// d/dt of `stored_energy` along the model flow, by the chain rule.
///
/// Algebraically this equals `vs id - rs (id^2 + iq^2)` for every input `u`:
/// the converter itself is lossless, so the u-terms cancel. Comparing this
/// against the dissipation expression is the conservation test for the sign
/// structure of the equations.
pub fn energy_rate(x: &PlantState, u: &ControlInput, p: &PlantParams) -> f64 {
    let d = derivative(x, u, p);
    p.ls * (x.id * d.did_dt + x.iq * d.diq_dt) + p.c * x.vdc * d.dvdc_dt
}

/// The dissipation side of the energy balance: grid in-feed minus resistive
/// loss, watts.
pub fn dissipation_rate(x: &PlantState, p: &PlantParams) -> f64 {
    p.vs * x.id - p.rs * (x.id * x.id + x.iq * x.iq)
}
