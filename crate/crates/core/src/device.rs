//! HP linear-drift memristor.
//!
//! Memristance follows `M(t) = k1 - k2 * q(t)` where `q` is the charge that
//! has flowed through the device, `k1 = r_off` and
//! `k2 = (r_off - r_on) * mu_v * r_on / D^2`. Under a constant voltage `V`
//! this gives `dM/dt = -k2 * V / M`, i.e. `M^2` moves linearly with the
//! applied voltage-time area. The synaptic weight is the conductance `1/M`.

use crate::error::{Error, Result};
use crate::ops::{Counter, NoCount};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorParams {
    /// Fully doped resistance (ohm).
    pub r_on: f64,
    /// Undoped resistance (ohm).
    pub r_off: f64,
    /// Dopant mobility (m^2 s^-1 V^-1).
    pub mobility_mu_v: f64,
    /// Film thickness (m).
    pub thickness_d: f64,
    /// Seconds per simulation time unit. Pulse widths are in simulation
    /// time units; the drift constant is in SI seconds.
    pub time_unit_s: f64,
}

impl MemristorParams {
    /// Canonical HP TiO2 device: 100 ohm / 16 kohm, 1e-14 m^2/(V s), 10 nm.
    pub fn physical() -> Self {
        MemristorParams {
            r_on: 100.0,
            r_off: 16_000.0,
            mobility_mu_v: 1e-14,
            thickness_d: 10e-9,
            time_unit_s: 0.01,
        }
    }

    /// Dimensionless device with `k1 = 1`. `k2` is set so one training
    /// window of the default non-STDP drive (area 4 V*stu) takes a fresh
    /// device from `M = 1.0` to `M = 0.91`, about 10% of its range.
    pub fn normalized() -> Self {
        let r_on = 0.1;
        let r_off = 1.0;
        let k2 = (1.0 - 0.91_f64 * 0.91) / 8.0;
        MemristorParams {
            r_on,
            r_off,
            mobility_mu_v: k2 / ((r_off - r_on) * r_on),
            thickness_d: 1.0,
            time_unit_s: 1.0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "physical" => Ok(Self::physical()),
            "normalized" => Ok(Self::normalized()),
            other => Err(Error::Config(format!("unknown device preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r_on,
            self.r_off,
            self.mobility_mu_v,
            self.thickness_d,
            self.time_unit_s,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("memristor parameters"));
        }
        if !(self.r_off > self.r_on && self.r_on > 0.0) {
            return Err(Error::InvalidParams(format!(
                "need r_off > r_on > 0, got r_on = {}, r_off = {}",
                self.r_on, self.r_off
            )));
        }
        if self.mobility_mu_v <= 0.0 || self.thickness_d <= 0.0 || self.time_unit_s <= 0.0 {
            return Err(Error::InvalidParams(
                "mobility, thickness and time unit must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn k1(&self) -> f64 {
        self.r_off
    }

    /// Drift coefficient in ohm^2 per (V s).
    pub fn k2(&self) -> f64 {
        (self.r_off - self.r_on) * self.mobility_mu_v * self.r_on
            / (self.thickness_d * self.thickness_d)
    }

    /// Drift coefficient per simulation time unit.
    pub fn k2_per_stu(&self) -> f64 {
        self.k2() * self.time_unit_s
    }

    pub fn g_min(&self) -> f64 {
        1.0 / self.r_off
    }

    pub fn g_max(&self) -> f64 {
        1.0 / self.r_on
    }

    /// Same device with `k2` multiplied by `factor` (mobility rescaled).
    pub fn with_k2_scaled(mut self, factor: f64) -> Self {
        self.mobility_mu_v *= factor;
        self
    }
}

/// Rectangular voltage pulse. Positive amplitude drives current left to
/// right, which lowers memristance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub amplitude_v: f64,
    pub width: f64,
    pub start: f64,
}

impl Pulse {
    pub fn new(amplitude_v: f64, width: f64, start: f64) -> Result<Self> {
        let p = Pulse {
            amplitude_v,
            width,
            start,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_v.is_finite() && self.width.is_finite() && self.start.is_finite()) {
            return Err(Error::NonFinite("pulse"));
        }
        if self.width <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "pulse width must be positive, got {}",
                self.width
            )));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + self.width
    }

    /// Signed voltage-time area.
    pub fn area(&self) -> f64 {
        self.amplitude_v * self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorState {
    pub params: MemristorParams,
    pub memristance_m: f64,
}

impl MemristorState {
    pub fn new(params: MemristorParams, memristance_m: f64) -> Result<Self> {
        params.validate()?;
        if !memristance_m.is_finite() {
            return Err(Error::NonFinite("memristance"));
        }
        if memristance_m < params.r_on || memristance_m > params.r_off {
            return Err(Error::InvalidParams(format!(
                "memristance {memristance_m} outside [{}, {}]",
                params.r_on, params.r_off
            )));
        }
        Ok(MemristorState {
            params,
            memristance_m,
        })
    }

    /// Fresh device at maximum resistance (minimum weight).
    pub fn at_r_off(params: MemristorParams) -> Self {
        MemristorState {
            params,
            memristance_m: params.r_off,
        }
    }

    pub fn conductance(&self) -> f64 {
        1.0 / self.memristance_m
    }

    fn clamp(&self, m: f64) -> f64 {
        m.clamp(self.params.r_on, self.params.r_off)
    }

    /// Closed-form response to a signed voltage-time area (V * stu):
    /// `M' = sqrt(M^2 - 2 k2 A)`, clamped to `[r_on, r_off]`.
    pub fn apply_area_counted<C: Counter>(&self, area: f64, ops: &mut C) -> MemristorState {
        let r_on = self.params.r_on;
        let m2 = self.memristance_m * self.memristance_m;
        let drift = 2.0 * self.params.k2_per_stu() * area;
        let arg = m2 - drift;
        ops.mul(2);
        ops.add(1);
        ops.compare(1);
        let m = if arg <= r_on * r_on { r_on } else { arg.sqrt() };
        ops.mul(1);
        ops.compare(1);
        MemristorState {
            params: self.params,
            memristance_m: m.min(self.params.r_off),
        }
    }

    pub fn apply_area(&self, area: f64) -> Result<MemristorState> {
        if !area.is_finite() {
            return Err(Error::NonFinite("drive area"));
        }
        Ok(self.apply_area_counted(area, &mut NoCount))
    }

    /// Exact response to one rectangular pulse.
    pub fn apply_pulse_analytic(&self, pulse: &Pulse) -> Result<MemristorState> {
        pulse.validate()?;
        self.apply_area(pulse.area())
    }

    /// Explicit first-order integration of `I = V/M`, `M -= k2 I dt`, with
    /// the clamp applied after every step. The final step is shortened so
    /// the steps cover exactly `pulse.width`.
    pub fn apply_pulse_numeric(&self, pulse: &Pulse, dt: f64) -> Result<MemristorState> {
        pulse.validate()?;
        if !dt.is_finite() {
            return Err(Error::NonFinite("dt"));
        }
        if dt <= 0.0 || dt > pulse.width {
            return Err(Error::InvalidParams(format!(
                "need 0 < dt <= width, got dt = {dt}, width = {}",
                pulse.width
            )));
        }
        let v = pulse.amplitude_v;
        let k2 = self.params.k2_per_stu();
        let steps = ((pulse.width / dt) - 1e-9).ceil().max(1.0) as u64;
        let mut m = self.memristance_m;
        for i in 0..steps {
            let h = if i + 1 == steps {
                pulse.width - dt * (steps - 1) as f64
            } else {
                dt
            };
            let current = v / m;
            if current != 0.0 {
                // Ohm's law at the instant: U / I is the present memristance.
                debug_assert!(((v / current) - m).abs() <= 1e-12 * m);
            }
            m = self.clamp(m - k2 * current * h);
        }
        Ok(MemristorState {
            params: self.params,
            memristance_m: m,
        })
    }

    /// Pulse of the given amplitude that moves this device to `target_m`
    /// under the closed-form response. Amplitude sign must match the
    /// direction of the move.
    pub fn pulse_to(&self, target_m: f64, amplitude_v: f64, start: f64) -> Result<Pulse> {
        if !(target_m.is_finite() && amplitude_v.is_finite()) {
            return Err(Error::NonFinite("pulse target"));
        }
        let da = self.memristance_m * self.memristance_m - target_m * target_m;
        let width = da / (2.0 * self.params.k2_per_stu() * amplitude_v);
        if width <= 0.0 || !width.is_finite() {
            return Err(Error::InvalidParams(format!(
                "amplitude {amplitude_v} cannot move M from {} to {target_m}",
                self.memristance_m
            )));
        }
        Pulse::new(amplitude_v, width, start)
    }
}

/// Signed area of a pulse train, `sum(amplitude * width)`. Pulses may be
/// given in any order but must not overlap.
pub fn pulse_train_area(train: &[Pulse]) -> Result<f64> {
    for p in train {
        p.validate()?;
    }
    let mut sorted: Vec<&Pulse> = train.iter().collect();
    sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end() {
            return Err(Error::OverlappingPulses(pair[1].start));
        }
    }
    Ok(train.iter().map(Pulse::area).sum())
}
