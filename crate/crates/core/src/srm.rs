//! Spike response model on a fixed time grid.
//!
//! Each presynaptic spike adds a post-synaptic potential
//! `w * (exp(-t/4) - exp(-t/2))` to the membrane. When the sum reaches the
//! threshold the neuron fires, every in-flight PSP is cleared, and input
//! spikes arriving within the refractory period after the fire are
//! ignored.

use crate::coding::SpikeTrain;
use crate::error::{Error, Result};
use crate::ops::{Counter, NoCount};
use serde::{Deserialize, Serialize};

/// PSP time constants, in simulation time units.
pub const PSP_TAU_SLOW: f64 = 4.0;
pub const PSP_TAU_FAST: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrmParams {
    pub threshold_theta: f64,
    pub refractory_tau_r: f64,
    pub dt: f64,
    pub kernel_cutoff: f64,
}

impl Default for SrmParams {
    fn default() -> Self {
        SrmParams {
            threshold_theta: DEFAULT_THETA,
            refractory_tau_r: 4.0,
            dt: 0.01,
            kernel_cutoff: 40.0,
        }
    }
}

/// Output of [`calibrate_threshold`] for the default encoder at unit weight.
pub const DEFAULT_THETA: f64 = 0.2892;

impl SrmParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.threshold_theta,
            self.refractory_tau_r,
            self.dt,
            self.kernel_cutoff,
        ];
        if all.iter().any(|v| v.is_nan()) || !self.dt.is_finite() || !self.kernel_cutoff.is_finite()
        {
            return Err(Error::NonFinite("srm parameters"));
        }
        if self.threshold_theta <= 0.0 {
            return Err(Error::InvalidParams("threshold must be positive".into()));
        }
        if self.refractory_tau_r < 0.0 || !self.refractory_tau_r.is_finite() {
            return Err(Error::InvalidParams(
                "refractory period must be >= 0".into(),
            ));
        }
        if self.dt <= 0.0 || self.kernel_cutoff <= 0.0 {
            return Err(Error::InvalidParams(
                "dt and kernel cutoff must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Grid index of time `t`.
    pub fn step_of(&self, t: f64) -> i64 {
        (t / self.dt).round() as i64
    }

    /// Number of grid points covering `[0, window)`.
    pub fn steps_in(&self, window: f64) -> i64 {
        (window / self.dt).round() as i64
    }

    pub fn cutoff_steps(&self) -> i64 {
        (self.kernel_cutoff / self.dt + 1e-9).floor() as i64
    }

    pub fn refractory_steps(&self) -> i64 {
        (self.refractory_tau_r / self.dt + 1e-9).floor() as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembraneTrace {
    pub dt: f64,
    /// Potential at each grid point, before any post-fire reset.
    pub potential: Vec<f64>,
    pub fire_times: Vec<f64>,
}

impl MembraneTrace {
    pub fn first_fire(&self) -> Option<f64> {
        self.fire_times.first().copied()
    }

    pub fn peak(&self) -> f64 {
        self.potential.iter().copied().fold(0.0, f64::max)
    }
}

#[inline]
fn kernel(t: f64) -> f64 {
    (-t / PSP_TAU_SLOW).exp() - (-t / PSP_TAU_FAST).exp()
}

/// Post-synaptic potential of one spike `t` after its arrival.
pub fn psp(weight_w: f64, t: f64) -> Result<f64> {
    if !(weight_w.is_finite() && t.is_finite()) {
        return Err(Error::NonFinite("psp input"));
    }
    if t < 0.0 {
        return Ok(0.0);
    }
    Ok(weight_w * kernel(t))
}

pub fn simulate_neuron(
    presyn: &[SpikeTrain],
    weights: &[f64],
    params: &SrmParams,
) -> Result<MembraneTrace> {
    simulate_neuron_counted(presyn, weights, params, &mut NoCount)
}

/// Grid simulation over the first train's window.
///
/// Every spike within the kernel cutoff is evaluated at every grid point,
/// refractory or not; the refractory gate selects whether its PSP is
/// summed. The operation count is therefore fixed by the spike schedule.
pub fn simulate_neuron_counted<C: Counter>(
    presyn: &[SpikeTrain],
    weights: &[f64],
    params: &SrmParams,
    ops: &mut C,
) -> Result<MembraneTrace> {
    if presyn.len() != weights.len() {
        return Err(Error::ShapeMismatch {
            expected: presyn.len(),
            got: weights.len(),
        });
    }
    params.validate()?;
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParams(
            "weights must be finite and >= 0".into(),
        ));
    }
    let window = presyn.first().map_or(0.0, |t| t.window);
    let steps = params.steps_in(window);
    let cutoff = params.cutoff_steps();
    let refractory = params.refractory_steps();
    let theta = params.threshold_theta;
    let dt = params.dt;

    let mut spikes: Vec<(i64, f64)> = presyn
        .iter()
        .zip(weights)
        .flat_map(|(train, &w)| {
            train
                .pulses
                .iter()
                .map(move |p| (params.step_of(p.start), w))
        })
        .collect();
    spikes.sort_by_key(|&(k, _)| k);

    let mut potential = Vec::with_capacity(steps.max(0) as usize);
    let mut fire_times = Vec::new();
    // spikes at or before this step are gated off
    let mut blocked_through: Option<i64> = None;
    let (mut lo, mut hi) = (0usize, 0usize);
    for n in 0..steps {
        while hi < spikes.len() && spikes[hi].0 <= n {
            hi += 1;
        }
        while lo < hi && n - spikes[lo].0 > cutoff {
            lo += 1;
        }
        let mut v = 0.0;
        for &(k, w) in &spikes[lo..hi] {
            let t = (n - k) as f64 * dt;
            let contribution = w * kernel(t);
            ops.add(2);
            ops.exp_eval(2);
            ops.mul(1);
            let open = blocked_through.is_none_or(|b| k > b);
            ops.compare(1);
            v += if open { contribution } else { 0.0 };
            ops.add(1);
        }
        potential.push(v);
        ops.compare(1);
        if v >= theta {
            fire_times.push(n as f64 * dt);
            blocked_through = Some(n + refractory);
        }
    }
    Ok(MembraneTrace {
        dt,
        potential,
        fire_times,
    })
}

/// Threshold halfway between the sub-threshold peaks of a white-driven and
/// a black-driven single-synapse neuron at weight `weight`, checked so the
/// black neuron fires at least twice per window and the white one at most
/// once.
pub fn calibrate_threshold(
    encoding: &crate::coding::EncodingParams,
    params: &SrmParams,
    weight: f64,
) -> Result<f64> {
    use crate::coding::periodic_train;
    encoding.validate_timing()?;
    let train = |black: bool| {
        periodic_train(
            encoding.period(black),
            encoding.v_black,
            encoding.pulse_width,
            encoding.window,
        )
    };
    let (black, white) = (train(true), train(false));
    let linear = SrmParams {
        threshold_theta: f64::INFINITY,
        ..*params
    };
    let peak_black = simulate_neuron(std::slice::from_ref(&black), &[weight], &linear)?.peak();
    let peak_white = simulate_neuron(std::slice::from_ref(&white), &[weight], &linear)?.peak();
    if peak_black <= peak_white {
        return Err(Error::Calibration(format!(
            "black peak {peak_black} does not exceed white peak {peak_white}"
        )));
    }
    let theta = 0.5 * (peak_black + peak_white);
    let tuned = SrmParams {
        threshold_theta: theta,
        ..*params
    };
    let fires_black = simulate_neuron(&[black], &[weight], &tuned)?
        .fire_times
        .len();
    let fires_white = simulate_neuron(&[white], &[weight], &tuned)?
        .fire_times
        .len();
    if fires_black < 2 || fires_white > 1 {
        return Err(Error::Calibration(format!(
            "threshold {theta}: black fires {fires_black}x, white {fires_white}x per window"
        )));
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{periodic_train, EncodingParams};

    fn one_spike(at: f64) -> SpikeTrain {
        let pulse = crate::device::Pulse::new(1.0, 0.5, at).unwrap();
        SpikeTrain::new(vec![pulse], at + 60.0).unwrap()
    }

    #[test]
    fn psp_values() {
        assert_eq!(psp(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(psp(1.0, -3.0).unwrap(), 0.0);
        let t = 4.0 * 2f64.ln();
        assert!((psp(1.0, t).unwrap() - 0.25).abs() < 1e-15);
        assert!((psp(2.0, t).unwrap() - 0.5).abs() < 1e-15);
        assert!(psp(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn peak_by_grid_search() {
        let (mut best_t, mut best) = (0.0, 0.0);
        for i in 0..1_000_000 {
            let t = i as f64 * 1e-5;
            let v = psp(1.0, t).unwrap();
            if v > best {
                best = v;
                best_t = t;
            }
        }
        assert!((best_t - 4.0 * 2f64.ln()).abs() < 1e-5);
        assert!((best - 0.25).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_never_fires() {
        let train = periodic_train(8.0, 1.0, 1.0, 64.0);
        let tr = simulate_neuron(&[train], &[0.0], &SrmParams::default()).unwrap();
        assert!(tr.fire_times.is_empty());
        assert!(tr.potential.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subthreshold_peak() {
        let p = SrmParams {
            threshold_theta: 1.0,
            ..SrmParams::default()
        };
        let tr = simulate_neuron(&[one_spike(0.0)], &[2.0], &p).unwrap();
        assert!(tr.fire_times.is_empty());
        // dense-grid peak of the closed-form kernel
        let dense = (0..600_000)
            .map(|i| psp(2.0, i as f64 * 1e-4).unwrap())
            .fold(0.0, f64::max);
        assert!((tr.peak() - dense).abs() < 2.0 * 0.25 * 1e-3);
        assert!((tr.peak() - 0.5).abs() < 1e-4);
    }

    #[test]
    fn superthreshold_single_fire() {
        let p = SrmParams {
            threshold_theta: 0.1,
            refractory_tau_r: 4.0,
            ..SrmParams::default()
        };
        let w = 0.8; // 0.25 w = 2 theta
        let tr = simulate_neuron(&[one_spike(0.0)], &[w], &p).unwrap();
        let expected = (0..)
            .map(|n| n as f64 * p.dt)
            .find(|&t| psp(w, t).unwrap() >= p.threshold_theta)
            .unwrap();
        assert_eq!(tr.fire_times, vec![expected]);
    }

    #[test]
    fn fires_reset_and_refractory() {
        let p = SrmParams {
            threshold_theta: 0.2,
            refractory_tau_r: 10.0,
            ..SrmParams::default()
        };
        // period 8 spikes; spikes within 10 stu after a fire are ignored
        let train = periodic_train(8.0, 1.0, 1.0, 64.0);
        let tr = simulate_neuron(&[train], &[1.0], &p).unwrap();
        assert!(tr.fire_times.len() >= 2);
        for w in tr.fire_times.windows(2) {
            assert!(w[1] - w[0] > p.refractory_tau_r);
        }
        // right after a fire the membrane is empty for the refractory period
        let f = (tr.fire_times[0] / p.dt).round() as usize;
        let r = (p.refractory_tau_r / p.dt) as usize;
        assert!(tr.potential[f + 1..=f + r].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_lengths() {
        let train = periodic_train(8.0, 1.0, 1.0, 64.0);
        assert!(simulate_neuron(&[train], &[], &SrmParams::default()).is_err());
    }

    #[test]
    fn negative_weight_rejected() {
        let train = periodic_train(8.0, 1.0, 1.0, 64.0);
        assert!(simulate_neuron(&[train], &[-1.0], &SrmParams::default()).is_err());
    }

    #[test]
    fn default_theta_matches_calibration() {
        let theta =
            calibrate_threshold(&EncodingParams::default(), &SrmParams::default(), 1.0).unwrap();
        assert!((theta - DEFAULT_THETA).abs() < 1e-3, "{theta}");
    }

    #[test]
    fn causality_and_onset() {
        let p = SrmParams {
            threshold_theta: f64::INFINITY,
            ..SrmParams::default()
        };
        let tr = simulate_neuron(&[one_spike(5.0)], &[1.0], &p).unwrap();
        let onset = (5.0 / p.dt).round() as usize;
        assert!(tr.potential[..=onset].iter().all(|&v| v == 0.0));
        assert!(tr.potential[onset + 1] > 0.0);
    }
}
