//! Hardware cost proxy: persistent state cells, elementary operations per
//! training window, and a critical-path latency estimate.
//!
//! These are orderings and growth rates, not FPGA resource or clock
//! predictions.
//!
//! Counting conventions match the instrumented simulator:
//! * hardwired parameters (thresholds, curve constants, periods) are not
//!   state;
//! * one input line per pixel and one output line per pixel are shared by
//!   every category, so their registers are counted once;
//! * crossbar off-diagonal devices hold state but see no drive, so crossbar
//!   and feedforward training do the same work.

use crate::coding::{periodic_train, EncodingParams};
use crate::error::Result;
use crate::ops::OpTally;
use crate::patterns::{generate_glyphs, BinaryImage};
use crate::srm::SrmParams;
use crate::topology::{LearningParams, NetworkScale, Rule, Shape};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Latency weight of one exponential relative to other elementary ops.
pub const EXP_LATENCY_WEIGHT: u64 = 10;

pub const REPORT_NOTE: &str =
    "abstract proxy: only orderings and growth rates are meaningful, not ALM or MHz values";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub state_cells: u64,
    /// Operations in one training window across all categories.
    pub ops: OpTally,
    /// Longest dependent chain per simulation step, exponentials weighted.
    pub critical_path: u64,
    pub steps_per_window: u64,
    pub latency_proxy: u64,
    pub note: String,
}

/// Persistent registers for one configuration.
pub fn state_cells(shape: Shape, rule: Rule, scale: NetworkScale) -> u64 {
    let n = scale.pixels() as u64;
    let c = scale.categories_c as u64;
    let devices_per_category = match shape {
        Shape::Feedforward => n,
        Shape::Crossbar => n * n,
    };
    let devices = c * devices_per_category;
    // one learning accumulator per trained-or-not device position
    let accumulators = devices;
    let (input_line, output_line) = match rule {
        // encoder counter + last pre spike; membrane + last fire
        Rule::Stdp => (2, 2),
        // encoder counter; controller latch
        Rule::Nonstdp => (1, 1),
    };
    let readout = c;
    devices + accumulators + n * (input_line + output_line) + readout
}

/// Simulation cost of one single-synapse neuron over a window.
struct SimCost {
    active_pairs: u64,
    max_active: u64,
}

fn simulation_cost(spike_starts: &[f64], window: f64, srm: &SrmParams) -> SimCost {
    let steps = srm.steps_in(window);
    let span = srm.cutoff_steps() + 1;
    let mut ks: Vec<i64> = spike_starts
        .iter()
        .map(|&t| srm.step_of(t))
        .filter(|&k| k < steps)
        .collect();
    ks.sort_unstable();
    let active_pairs = ks.iter().map(|&k| span.min(steps - k) as u64).sum();
    let max_active = (0..ks.len())
        .map(|i| ks[i..].iter().take_while(|&&k| k - ks[i] < span).count() as u64)
        .max()
        .unwrap_or(0);
    SimCost {
        active_pairs,
        max_active,
    }
}

fn train_for(black: bool, enc: &EncodingParams, rule: Rule) -> Vec<f64> {
    let amp = match rule {
        Rule::Nonstdp if !black => enc.v_white,
        _ => enc.v_black,
    };
    periodic_train(enc.period(black), amp, enc.pulse_width, enc.window).spike_times()
}

fn device_ops(black: bool, rule: Rule, learning: &LearningParams) -> OpTally {
    let enc = &learning.encoding;
    let spikes = train_for(black, enc, rule);
    let n_pre = spikes.len() as u64;
    match rule {
        Rule::Stdp => {
            let srm = &learning.srm;
            let sim = simulation_cost(&spikes, enc.window, srm);
            let steps = srm.steps_in(enc.window).max(0) as u64;
            let slots = 2 * n_pre;
            OpTally {
                // weight, per active spike kernel, per slot pairing, update
                add: 3 * sim.active_pairs + 2 * slots + 1,
                mul: 2 + sim.active_pairs + slots + 3,
                exp_eval: 2 * sim.active_pairs + slots,
                compare: sim.active_pairs + steps + 2 * slots + 2,
            }
        }
        Rule::Nonstdp => OpTally {
            add: 2 * n_pre + 1,
            mul: n_pre + 3,
            exp_eval: 0,
            compare: 2,
        },
    }
}

fn window_ops(patterns: &[BinaryImage], rule: Rule, learning: &LearningParams) -> OpTally {
    let black = device_ops(true, rule, learning);
    let white = device_ops(false, rule, learning);
    patterns
        .iter()
        .map(|p| {
            let b = p.black_count() as u64;
            let w = p.pixels().len() as u64 - b;
            let mut t = black.scaled(b);
            t += white.scaled(w);
            // termination check per black device
            t.compare += b;
            t
        })
        .sum()
}

fn critical_path(rule: Rule, learning: &LearningParams) -> u64 {
    match rule {
        Rule::Stdp => {
            let enc = &learning.encoding;
            let max_active = [true, false]
                .iter()
                .map(|&b| {
                    simulation_cost(&train_for(b, enc, rule), enc.window, &learning.srm).max_active
                })
                .max()
                .unwrap_or(0);
            // elapsed-time add, both exponentials in parallel, kernel
            // subtract, weight mul, gate compare, summation chain, threshold
            1 + EXP_LATENCY_WEIGHT + 1 + 1 + 1 + max_active + 1
        }
        // overlap-weighted amplitude: mul, accumulate, polarity compare
        Rule::Nonstdp => 3,
    }
}

/// Closed-form cost for a configuration, using the glyph set generated for
/// `scale`.
pub fn estimate(
    shape: Shape,
    rule: Rule,
    scale: NetworkScale,
    learning: &LearningParams,
) -> Result<CostReport> {
    let patterns = generate_glyphs(scale)?;
    estimate_for(shape, rule, scale, &patterns, learning)
}

pub fn estimate_for(
    shape: Shape,
    rule: Rule,
    scale: NetworkScale,
    patterns: &[BinaryImage],
    learning: &LearningParams,
) -> Result<CostReport> {
    scale.validate()?;
    learning.encoding.validate_timing()?;
    learning.srm.validate()?;
    let steps = learning.srm.steps_in(learning.encoding.window).max(0) as u64;
    let critical_path = critical_path(rule, learning);
    Ok(CostReport {
        state_cells: state_cells(shape, rule, scale),
        ops: window_ops(patterns, rule, learning),
        critical_path,
        steps_per_window: steps,
        latency_proxy: critical_path * steps,
        note: REPORT_NOTE.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpDiff {
    pub op: &'static str,
    pub expected: u64,
    pub actual: u64,
}

impl fmt::Display for OpDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: model {} vs measured {}",
            self.op, self.expected, self.actual
        )
    }
}

/// Compares every op class with an instrumented window. The diff lists the
/// classes that disagree.
pub fn verify_against_instrumentation(
    report: &CostReport,
    measured: &OpTally,
) -> (bool, Vec<OpDiff>) {
    let diff: Vec<OpDiff> = report
        .ops
        .entries()
        .iter()
        .zip(measured.entries())
        .filter(|(a, b)| a.1 != b.1)
        .map(|(a, b)| OpDiff {
            op: a.0,
            expected: a.1,
            actual: b.1,
        })
        .collect();
    (diff.is_empty(), diff)
}
