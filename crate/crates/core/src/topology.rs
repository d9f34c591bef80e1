//! Feedforward and crossbar networks: construction, training to a
//! conductance threshold, and classification by summed read current.
//!
//! Every category owns a bank (feedforward, `p^2` devices) or a grid
//! (crossbar, `p^2 x p^2` devices) trained only on its own pattern. In a
//! crossbar, pixel `i` drives row `i` and is read on column `i`, so only the
//! diagonal is trained and read; off-diagonal devices stay at their
//! initial state. Each trained device has its own output neuron.

use crate::coding::{encode_nonstdp, encode_stdp, time_controller, EncodingParams, SpikeTrain};
use crate::device::{MemristorParams, MemristorState, Pulse};
use crate::error::{Error, Result};
use crate::ops::{Counter, NoCount, OpTally};
use crate::par;
use crate::patterns::{BinaryImage, TestItem};
use crate::plasticity::{stdp_window_counted, train_step_nonstdp_counted, StdpParams};
use crate::srm::SrmParams;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Serialized as the string `PxPxC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetworkScale {
    pub pixels_p: usize,
    pub categories_c: usize,
}

impl NetworkScale {
    pub fn new(pixels_p: usize, categories_c: usize) -> Result<Self> {
        let s = NetworkScale {
            pixels_p,
            categories_c,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pixels_p < 2 || self.categories_c < 2 {
            return Err(Error::InvalidParams(format!(
                "scale {self} needs p >= 2 and c >= 2"
            )));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.pixels_p * self.pixels_p
    }

    /// 3x3x3, 5x5x3, 7x7x3, 5x5x5, 7x7x5, 9x9x5.
    pub fn paper_grid() -> [NetworkScale; 6] {
        [(3, 3), (5, 3), (7, 3), (5, 5), (7, 5), (9, 5)].map(|(p, c)| NetworkScale {
            pixels_p: p,
            categories_c: c,
        })
    }
}

impl fmt::Display for NetworkScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{0}x{0}x{1}", self.pixels_p, self.categories_c)
    }
}

impl FromStr for NetworkScale {
    type Err = Error;

    /// Accepts `PxPxC` or `PxC`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', '*']).collect();
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad scale `{s}`")))?;
        match nums[..] {
            [p, q, c] if p == q => NetworkScale::new(p, c),
            [p, c] => NetworkScale::new(p, c),
            _ => Err(Error::Config(format!("bad scale `{s}`, expected PxPxC"))),
        }
    }
}

impl Serialize for NetworkScale {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NetworkScale {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Feedforward,
    Crossbar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Stdp,
    Nonstdp,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Feedforward => "feedforward",
            Shape::Crossbar => "crossbar",
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Stdp => "stdp",
            Rule::Nonstdp => "nonstdp",
        })
    }
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feedforward" | "ff" => Ok(Shape::Feedforward),
            "crossbar" | "xbar" => Ok(Shape::Crossbar),
            _ => Err(Error::Config(format!("unknown shape `{s}`"))),
        }
    }
}

impl FromStr for Rule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stdp" => Ok(Rule::Stdp),
            "nonstdp" | "non-stdp" => Ok(Rule::Nonstdp),
            _ => Err(Error::Config(format!("unknown rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub scale: NetworkScale,
    pub shape: Shape,
    pub params: MemristorParams,
    /// Memristance per device, one vector per category. Crossbar grids are
    /// row-major `p^2 x p^2`.
    pub banks: Vec<Vec<f64>>,
}

impl Network {
    pub fn build(scale: NetworkScale, shape: Shape, params: MemristorParams) -> Result<Self> {
        scale.validate()?;
        params.validate()?;
        let n = scale.pixels();
        let per_bank = match shape {
            Shape::Feedforward => n,
            Shape::Crossbar => n * n,
        };
        Ok(Network {
            scale,
            shape,
            params,
            banks: vec![vec![params.r_off; per_bank]; scale.categories_c],
        })
    }

    pub fn device_count(&self) -> usize {
        self.banks.iter().map(Vec::len).sum()
    }

    /// Index within a bank of the device trained and read for `pixel`.
    pub fn trained_index(&self, pixel: usize) -> usize {
        match self.shape {
            Shape::Feedforward => pixel,
            Shape::Crossbar => pixel * self.scale.pixels() + pixel,
        }
    }

    pub fn device(&self, category: usize, index: usize) -> MemristorState {
        MemristorState {
            params: self.params,
            memristance_m: self.banks[category][index],
        }
    }

    /// Conductances of the trained devices, per category, in pixel order.
    pub fn trained_conductances(&self) -> Vec<Vec<f64>> {
        (0..self.scale.categories_c)
            .map(|k| {
                (0..self.scale.pixels())
                    .map(|i| 1.0 / self.banks[k][self.trained_index(i)])
                    .collect()
            })
            .collect()
    }

    fn check_image(&self, image: &BinaryImage) -> Result<()> {
        if image.side() != self.scale.pixels_p {
            return Err(Error::ShapeMismatch {
                expected: self.scale.pixels_p,
                got: image.side(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LearningParams {
    pub encoding: EncodingParams,
    pub srm: SrmParams,
    pub stdp: StdpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub cycles: u32,
    pub rule: Rule,
    pub converged: bool,
    pub g_threshold: f64,
    /// Trained-device conductances per category after the last cycle.
    pub conductances: Vec<Vec<f64>>,
    /// Smallest black-pixel conductance after each cycle.
    pub min_black_history: Vec<f64>,
}

/// Per-pixel drive for one category's pattern.
enum Drive {
    Stdp(Vec<SpikeTrain>),
    Nonstdp(Vec<(SpikeTrain, SpikeTrain)>),
}

fn drive_for(pattern: &BinaryImage, rule: Rule, enc: &EncodingParams) -> Result<Drive> {
    Ok(match rule {
        Rule::Stdp => Drive::Stdp(encode_stdp(pattern, enc)?),
        Rule::Nonstdp => Drive::Nonstdp(
            encode_nonstdp(pattern, enc)?
                .into_iter()
                .map(|t| {
                    let out = time_controller(&t, enc.v_mid);
                    (t, out)
                })
                .collect(),
        ),
    })
}

fn check_patterns(net: &Network, patterns: &[BinaryImage]) -> Result<()> {
    if patterns.len() != net.scale.categories_c {
        return Err(Error::ShapeMismatch {
            expected: net.scale.categories_c,
            got: patterns.len(),
        });
    }
    patterns.iter().try_for_each(|p| net.check_image(p))
}

/// One training window for category `k`. Returns the new trained-device
/// memristances in pixel order.
fn train_bank<C: Counter + Default>(
    net: &Network,
    k: usize,
    pattern: &BinaryImage,
    drive: &Drive,
    learning: &LearningParams,
) -> Result<(Vec<f64>, C)> {
    let mut ops = C::default();
    let mut out = Vec::with_capacity(net.scale.pixels());
    for (i, &black) in pattern.pixels().iter().enumerate() {
        let state = net.device(k, net.trained_index(i));
        let next = match drive {
            Drive::Stdp(trains) => {
                stdp_window_counted(&state, &trains[i], &learning.srm, &learning.stdp, &mut ops)?
            }
            Drive::Nonstdp(pairs) => {
                train_step_nonstdp_counted(&state, black, &pairs[i].0, &pairs[i].1, &mut ops)?
            }
        };
        out.push(next.memristance_m);
    }
    Ok((out, ops))
}

/// Trains until every black-pixel device of every category has
/// `G >= g_threshold`, or `max_cycles` windows have run. The second value
/// holds the operation tally of each window.
pub fn train_counted<C: Counter + Default + Send>(
    net: &mut Network,
    patterns: &[BinaryImage],
    rule: Rule,
    learning: &LearningParams,
    g_threshold: f64,
    max_cycles: u32,
    parallel: bool,
) -> Result<(TrainReport, Vec<C>)> {
    check_patterns(net, patterns)?;
    learning.stdp.validate()?;
    learning.srm.validate()?;
    if !(g_threshold > net.params.g_min() && g_threshold < net.params.g_max()) {
        return Err(Error::InvalidParams(format!(
            "g_threshold {g_threshold:e} outside ({:e}, {:e})",
            net.params.g_min(),
            net.params.g_max()
        )));
    }
    let drives = patterns
        .iter()
        .map(|p| drive_for(p, rule, &learning.encoding))
        .collect::<Result<Vec<_>>>()?;
    let categories: Vec<usize> = (0..net.scale.categories_c).collect();

    let mut tallies = Vec::new();
    let mut history = Vec::new();
    let mut converged = false;
    let mut cycles = 0;
    while cycles < max_cycles {
        cycles += 1;
        let snapshot = &*net;
        let results = par::map(&categories, parallel, |&k| {
            train_bank::<C>(snapshot, k, &patterns[k], &drives[k], learning)
        });
        let mut window_ops = C::default();
        for (k, r) in results.into_iter().enumerate() {
            let (bank, ops) = r?;
            window_ops.merge(ops);
            for (i, m) in bank.into_iter().enumerate() {
                let idx = net.trained_index(i);
                net.banks[k][idx] = m;
            }
        }
        let mut done = true;
        let mut min_black = f64::INFINITY;
        for (k, pattern) in patterns.iter().enumerate() {
            for (i, _) in pattern.pixels().iter().enumerate().filter(|(_, &b)| b) {
                let g = 1.0 / net.banks[k][net.trained_index(i)];
                window_ops.compare(1);
                done &= g >= g_threshold;
                min_black = min_black.min(g);
            }
        }
        tallies.push(window_ops);
        history.push(min_black);
        if done {
            converged = true;
            break;
        }
    }
    Ok((
        TrainReport {
            cycles,
            rule,
            converged,
            g_threshold,
            conductances: net.trained_conductances(),
            min_black_history: history,
        },
        tallies,
    ))
}

pub fn train(
    net: &mut Network,
    patterns: &[BinaryImage],
    rule: Rule,
    learning: &LearningParams,
    g_threshold: f64,
    max_cycles: u32,
    parallel: bool,
) -> Result<TrainReport> {
    train_counted::<NoCount>(
        net,
        patterns,
        rule,
        learning,
        g_threshold,
        max_cycles,
        parallel,
    )
    .map(|(r, _)| r)
}

/// Same as [`train`], also returning the per-window operation tallies.
pub fn train_instrumented(
    net: &mut Network,
    patterns: &[BinaryImage],
    rule: Rule,
    learning: &LearningParams,
    g_threshold: f64,
    max_cycles: u32,
) -> Result<(TrainReport, Vec<OpTally>)> {
    train_counted::<OpTally>(
        net,
        patterns,
        rule,
        learning,
        g_threshold,
        max_cycles,
        false,
    )
}

/// Read conditions. A physical read applies `v_read` for `read_width` stu
/// and must move no device by more than [`MAX_READ_DISTURB`] relative; a
/// frozen read evaluates currents without modelling drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadParams {
    pub v_read: f64,
    pub read_width: f64,
    pub frozen: bool,
}

pub const MAX_READ_DISTURB: f64 = 1e-9;

impl ReadParams {
    pub fn physical() -> Self {
        ReadParams {
            v_read: 1e-3,
            read_width: 1e-12,
            frozen: false,
        }
    }

    pub fn frozen() -> Self {
        ReadParams {
            v_read: 1e-3,
            read_width: 1e-12,
            frozen: true,
        }
    }

    pub fn for_preset(name: &str) -> Self {
        if name == "normalized" {
            Self::frozen()
        } else {
            Self::physical()
        }
    }

    /// Worst-case relative memristance change one read can cause, reached
    /// just above `r_on`.
    pub fn worst_disturb(&self, params: &MemristorParams) -> f64 {
        params.k2_per_stu() * self.v_read.abs() * self.read_width / (params.r_on * params.r_on)
    }

    pub fn check(&self, params: &MemristorParams) -> Result<()> {
        if !(self.v_read.is_finite() && self.read_width.is_finite()) || self.read_width <= 0.0 {
            return Err(Error::InvalidParams(
                "read voltage and width must be finite, width > 0".into(),
            ));
        }
        if self.frozen {
            return Ok(());
        }
        let worst = self.worst_disturb(params);
        if worst > MAX_READ_DISTURB {
            return Err(Error::ReadDisturb(worst, MAX_READ_DISTURB));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub category: usize,
    pub scores: Vec<f64>,
    pub ambiguous: bool,
}

/// Scores closer than this (relative) count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

fn decide(scores: Vec<f64>) -> Classification {
    let (mut category, mut best) = (0, f64::NEG_INFINITY);
    for (k, &s) in scores.iter().enumerate() {
        if s > best {
            best = s;
            category = k;
        }
    }
    let tol = TIE_TOLERANCE * best.abs();
    let ambiguous = scores
        .iter()
        .enumerate()
        .any(|(k, &s)| k != category && (best - s) <= tol);
    Classification {
        category,
        scores,
        ambiguous,
    }
}

/// Score of a category is the read current summed over the black pixels'
/// trained devices. Ties go to the lowest index and are flagged.
pub fn classify(net: &Network, image: &BinaryImage, read: &ReadParams) -> Result<Classification> {
    net.check_image(image)?;
    read.check(&net.params)?;
    let scores = (0..net.scale.categories_c)
        .map(|k| {
            image
                .pixels()
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| read.v_read / net.banks[k][net.trained_index(i)])
                .sum()
        })
        .collect();
    Ok(decide(scores))
}

/// Classification that also applies the read pulses to the devices, for
/// measuring read disturbance.
pub fn classify_with_disturb(
    net: &mut Network,
    image: &BinaryImage,
    read: &ReadParams,
) -> Result<Classification> {
    let decision = classify(net, image, read)?;
    let pulse = Pulse::new(read.v_read, read.read_width, 0.0)?;
    for k in 0..net.scale.categories_c {
        for (i, _) in image.pixels().iter().enumerate().filter(|(_, &b)| b) {
            let idx = net.trained_index(i);
            let next = net.device(k, idx).apply_pulse_analytic(&pulse)?;
            net.banks[k][idx] = next.memristance_m;
        }
    }
    Ok(decision)
}

/// Fraction of items classified correctly and unambiguously.
pub fn evaluate(
    net: &Network,
    testset: &[TestItem],
    read: &ReadParams,
    parallel: bool,
) -> Result<f64> {
    if testset.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let hits = par::map(testset, parallel, |item| {
        classify(net, &item.image, read).map(|c| c.category == item.label && !c.ambiguous)
    });
    let mut correct = 0usize;
    for h in hits {
        correct += h? as usize;
    }
    Ok(correct as f64 / testset.len() as f64)
}

pub const SNAPSHOT_FORMAT: &str = "memsnn-network";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub format: String,
    pub version: u32,
    pub network: Network,
}

impl NetworkSnapshot {
    pub fn new(network: Network) -> Self {
        NetworkSnapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            network,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: NetworkSnapshot =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("snapshot: {e}")))?;
        if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
            return Err(Error::Config(format!(
                "unsupported snapshot {} v{}",
                snap.format, snap.version
            )));
        }
        let n = &snap.network;
        let p = n.params;
        if n.banks.len() != n.scale.categories_c
            || n.banks
                .iter()
                .flatten()
                .any(|&m| !(p.r_on..=p.r_off).contains(&m))
        {
            return Err(Error::Config("snapshot devices out of range".into()));
        }
        Ok(snap)
    }
}
