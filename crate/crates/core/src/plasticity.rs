//! The two learning rules.
//!
//! STDP pairs presynaptic spikes with the fires of the device's output
//! neuron and scales the conductance by the summed curve values once per
//! window. The non-STDP rule drives the device with the difference between
//! the encoded input pulse and the time controller's output; the signed
//! voltage-time area of that drive sets the memristance change.

use crate::coding::SpikeTrain;
use crate::device::MemristorState;
use crate::error::{Error, Result};
use crate::ops::{Counter, NoCount};
use crate::srm::{simulate_neuron_counted, SrmParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    #[default]
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdpParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    #[serde(default)]
    pub pairing: Pairing,
}

impl Default for StdpParams {
    fn default() -> Self {
        StdpParams {
            a_plus: 0.9,
            a_minus: -0.4,
            tau_plus: 4.0,
            tau_minus: 4.0,
            pairing: Pairing::NearestNeighbor,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        if ![self.a_plus, self.a_minus, self.tau_plus, self.tau_minus]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("stdp parameters"));
        }
        if !(self.a_plus > 0.0 && self.a_minus < 0.0) {
            return Err(Error::InvalidParams("need a_plus > 0 > a_minus".into()));
        }
        if self.tau_plus <= 0.0 || self.tau_minus <= 0.0 {
            return Err(Error::InvalidParams(
                "STDP time constants must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikePair {
    pub t_pre: f64,
    pub t_post: f64,
}

impl SpikePair {
    pub fn delta_t(&self) -> f64 {
        self.t_post - self.t_pre
    }
}

/// Fractional weight change for a post-minus-pre interval.
pub fn stdp_delta(delta_t: f64, p: &StdpParams) -> f64 {
    stdp_delta_counted(delta_t, p, &mut NoCount)
}

fn stdp_delta_counted<C: Counter>(delta_t: f64, p: &StdpParams, ops: &mut C) -> f64 {
    ops.compare(1);
    ops.exp_eval(1);
    ops.mul(1);
    if delta_t > 0.0 {
        p.a_plus * (-delta_t / p.tau_plus).exp()
    } else if delta_t < 0.0 {
        p.a_minus * (delta_t / p.tau_minus).exp()
    } else {
        0.0
    }
}

/// `G' = clamp(G (1 + frac), [1/r_off, 1/r_on])`, `M' = 1/G'`.
pub fn apply_stdp_update(state: &MemristorState, frac: f64) -> MemristorState {
    apply_stdp_update_counted(state, frac, &mut NoCount)
}

fn apply_stdp_update_counted<C: Counter>(
    state: &MemristorState,
    frac: f64,
    ops: &mut C,
) -> MemristorState {
    let p = state.params;
    let target = (state.conductance() * (1.0 + frac)).clamp(p.g_min(), p.g_max());
    ops.mul(2);
    ops.add(1);
    ops.compare(2);
    let m = (1.0 / target).clamp(p.r_on, p.r_off);
    ops.mul(1);
    MemristorState {
        params: p,
        memristance_m: m,
    }
}

/// Same update realized physically: solve the device equation for a pulse
/// of `|amplitude|` in the needed direction and apply it.
pub fn apply_stdp_update_physical(
    state: &MemristorState,
    frac: f64,
    amplitude: f64,
) -> Result<MemristorState> {
    let target = apply_stdp_update(state, frac);
    if target.memristance_m == state.memristance_m {
        return Ok(*state);
    }
    let v = if target.memristance_m < state.memristance_m {
        amplitude.abs()
    } else {
        -amplitude.abs()
    };
    let pulse = state.pulse_to(target.memristance_m, v, 0.0)?;
    state.apply_pulse_analytic(&pulse)
}

/// Candidate pairs owned by one presynaptic spike: at most one potentiation
/// pair and one depression pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairSlots {
    pub potentiation: Option<SpikePair>,
    pub depression: Option<SpikePair>,
}

/// Nearest-neighbour pairing. Each post fire pairs with the nearest
/// strictly earlier pre spike, each pre spike with the nearest strictly
/// earlier post fire; a spike is used at most once per direction, by the
/// earliest partner that claims it. Both inputs must be sorted.
pub fn pair_slots(pre: &[f64], post: &[f64]) -> Vec<PairSlots> {
    let mut slots = vec![PairSlots::default(); pre.len()];
    // potentiation: post f claims pre i = last index with pre[i] < f
    let mut i = 0usize;
    for &f in post {
        while i < pre.len() && pre[i] < f {
            i += 1;
        }
        if i > 0 && slots[i - 1].potentiation.is_none() {
            slots[i - 1].potentiation = Some(SpikePair {
                t_pre: pre[i - 1],
                t_post: f,
            });
        }
    }
    // depression: pre s claims post j = last index with post[j] < s
    let mut j = 0usize;
    let mut claimed: Option<usize> = None;
    for (slot, &s) in slots.iter_mut().zip(pre) {
        while j < post.len() && post[j] < s {
            j += 1;
        }
        if j > 0 && claimed != Some(j - 1) {
            claimed = Some(j - 1);
            slot.depression = Some(SpikePair {
                t_pre: s,
                t_post: post[j - 1],
            });
        }
    }
    slots
}

pub fn pair_spikes(pre: &SpikeTrain, post: &[f64], pairing: Pairing) -> Vec<SpikePair> {
    match pairing {
        Pairing::NearestNeighbor => pair_slots(&pre.spike_times(), post)
            .into_iter()
            .flat_map(|s| s.potentiation.into_iter().chain(s.depression))
            .collect(),
    }
}

/// Dimensionless PSP weight of a device: its conductance in units of the
/// minimum conductance, so a fresh device has weight 1.
pub fn synaptic_weight(state: &MemristorState) -> f64 {
    state.conductance() * state.params.r_off
}

/// One STDP window for a device with its own output neuron: simulate the
/// neuron, pair, sum the curve over all pair slots, update once.
pub fn stdp_window_counted<C: Counter>(
    state: &MemristorState,
    pre: &SpikeTrain,
    srm: &SrmParams,
    stdp: &StdpParams,
    ops: &mut C,
) -> Result<MemristorState> {
    let w = synaptic_weight(state);
    ops.mul(2);
    let trace = simulate_neuron_counted(std::slice::from_ref(pre), &[w], srm, ops)?;
    let slots = pair_slots(&pre.spike_times(), &trace.fire_times);
    let mut frac = 0.0;
    for slot in &slots {
        // empty slots run through the same datapath at an infinite interval
        for (pair, missing) in [
            (slot.potentiation, f64::INFINITY),
            (slot.depression, f64::NEG_INFINITY),
        ] {
            let dt = pair.map_or(missing, |p| p.delta_t());
            ops.add(1);
            let change = stdp_delta_counted(dt, stdp, ops);
            ops.compare(1);
            frac += if pair.is_some() { change } else { 0.0 };
            ops.add(1);
        }
    }
    Ok(apply_stdp_update_counted(state, frac, ops))
}

pub fn stdp_window(
    state: &MemristorState,
    pre: &SpikeTrain,
    srm: &SrmParams,
    stdp: &StdpParams,
) -> Result<MemristorState> {
    stdp_window_counted(state, pre, srm, stdp, &mut NoCount)
}

/// Signed drive area across the device: encoded input minus controller
/// output, integrated over each pulse pair's overlap.
pub fn drive_area_counted<C: Counter>(
    encoded: &SpikeTrain,
    controller_out: &SpikeTrain,
    ops: &mut C,
) -> Result<f64> {
    if encoded.len() != controller_out.len() {
        return Err(Error::ShapeMismatch {
            expected: encoded.len(),
            got: controller_out.len(),
        });
    }
    let mut area = 0.0;
    for (a, b) in encoded.pulses.iter().zip(&controller_out.pulses) {
        let overlap = a.end().min(b.end()) - a.start.max(b.start);
        if overlap <= 0.0 {
            return Err(Error::InvalidTrain(format!(
                "controller pulse at {} does not overlap input pulse at {}",
                b.start, a.start
            )));
        }
        area += (a.amplitude_v - b.amplitude_v) * overlap;
        ops.add(2);
        ops.mul(1);
    }
    Ok(area)
}

/// One non-STDP window. Drive polarity is fixed per pixel, so applying the
/// whole area at once equals applying it pulse by pulse, clamps included.
pub fn train_step_nonstdp_counted<C: Counter>(
    state: &MemristorState,
    black: bool,
    encoded: &SpikeTrain,
    controller_out: &SpikeTrain,
    ops: &mut C,
) -> Result<MemristorState> {
    let area = drive_area_counted(encoded, controller_out, ops)?;
    if (black && area < 0.0) || (!black && area > 0.0) {
        return Err(Error::InvalidTrain(format!(
            "drive area {area} has the wrong polarity for a {} pixel",
            if black { "black" } else { "white" }
        )));
    }
    Ok(state.apply_area_counted(area, ops))
}

pub fn train_step_nonstdp(
    state: &MemristorState,
    black: bool,
    encoded: &SpikeTrain,
    controller_out: &SpikeTrain,
) -> Result<MemristorState> {
    train_step_nonstdp_counted(state, black, encoded, controller_out, &mut NoCount)
}
