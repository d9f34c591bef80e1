//! Experiment configuration, threshold calibration and the sweep runner.

use crate::costmodel::{estimate_for, CostReport};
use crate::device::MemristorParams;
use crate::error::{Error, Result};
use crate::par;
use crate::patterns::PatternSet;
use crate::topology::{
    evaluate, train, LearningParams, Network, NetworkScale, ReadParams, Rule, Shape,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashMap;
use std::time::Instant;

/// Training threshold: a fixed conductance or calibrated per row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Auto,
    Fixed(f64),
}

impl Serialize for Threshold {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threshold::Auto => s.serialize_str("auto"),
            Threshold::Fixed(g) => s.serialize_f64(*g),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) if s == "auto" => Ok(Threshold::Auto),
            Value::Number(n) => n
                .as_f64()
                .map(Threshold::Fixed)
                .ok_or_else(|| serde::de::Error::custom("bad threshold")),
            other => Err(serde::de::Error::custom(format!(
                "g_threshold must be \"auto\" or a number, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scales: Vec<NetworkScale>,
    pub shapes: Vec<Shape>,
    pub rules: Vec<Rule>,
    pub preset: String,
    pub learning: LearningParams,
    pub g_threshold: Threshold,
    pub flip_prob: f64,
    pub n_test_per_category: usize,
    pub seed: Option<u64>,
    pub max_cycles: u32,
    /// Defaults to the preset's read mode when absent.
    pub read: Option<ReadParams>,
    pub parallel: bool,
    /// Wall time makes reports machine-dependent, so it is opt-in.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scales: NetworkScale::paper_grid().to_vec(),
            shapes: vec![Shape::Feedforward, Shape::Crossbar],
            rules: vec![Rule::Stdp, Rule::Nonstdp],
            preset: "physical".into(),
            learning: LearningParams::default(),
            g_threshold: Threshold::Auto,
            flip_prob: 0.02,
            n_test_per_category: 1000,
            seed: Some(1),
            max_cycles: 20,
            read: None,
            parallel: true,
            record_wall_time: false,
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

fn parse_flag_value(raw: &str, current: Option<&Value>) -> Value {
    let scalar = |s: &str| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()));
    match current {
        Some(Value::Array(_)) if !raw.trim_start().starts_with('[') => {
            Value::Array(raw.split(',').map(|s| scalar(s.trim())).collect())
        }
        _ => scalar(raw),
    }
}

fn set_path(doc: &mut Value, key: &str, raw: &str) -> Result<()> {
    let mut node = doc;
    let parts: Vec<String> = key.split('.').map(|p| p.replace('-', "_")).collect();
    for (n, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().unwrap()
            }
            Value::Object(o) => o,
            _ => {
                return Err(Error::Config(format!(
                    "`{key}` does not name a config field"
                )))
            }
        };
        if n + 1 == parts.len() {
            let v = parse_flag_value(raw, obj.get(part));
            obj.insert(part.clone(), v);
            return Ok(());
        }
        node = obj.entry(part.clone()).or_insert(Value::Null);
    }
    Err(Error::Config("empty override key".into()))
}

impl ExperimentConfig {
    /// Top-level field names, for telling overrides apart from other flags.
    pub fn field_names() -> Vec<String> {
        match serde_json::to_value(ExperimentConfig::default()) {
            Ok(Value::Object(o)) => o.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// Defaults, then the JSON `file` document, then `key=value`
    /// overrides; dotted keys reach nested fields.
    pub fn load(file: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc = serde_json::to_value(ExperimentConfig::default())
            .map_err(|e| Error::Config(e.to_string()))?;
        if let Some(text) = file {
            let patch: Value = serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("config file: {e}")))?;
            if !patch.is_object() {
                return Err(Error::Config("config file must hold a JSON object".into()));
            }
            merge(&mut doc, patch);
        }
        for (k, v) in overrides {
            set_path(&mut doc, k, v)?;
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolved()
    }

    /// Validated copy with every default made explicit.
    pub fn resolved(&self) -> Result<Self> {
        let mut cfg = self.clone();
        if cfg.scales.is_empty() || cfg.shapes.is_empty() || cfg.rules.is_empty() {
            return Err(Error::Config(
                "scales, shapes and rules must be non-empty".into(),
            ));
        }
        for s in &cfg.scales {
            s.validate()?;
        }
        let device = MemristorParams::preset(&cfg.preset)?;
        if !(0.0..=1.0).contains(&cfg.flip_prob) {
            return Err(Error::Config(format!(
                "flip_prob {} outside [0, 1]",
                cfg.flip_prob
            )));
        }
        if cfg.flip_prob > 0.0 && cfg.seed.is_none() {
            return Err(Error::Config(
                "a seed is required when flip_prob > 0".into(),
            ));
        }
        if cfg.n_test_per_category == 0 {
            return Err(Error::Config("n_test_per_category must be positive".into()));
        }
        if let Threshold::Fixed(g) = cfg.g_threshold {
            if !(g > device.g_min() && g < device.g_max()) {
                return Err(Error::Config(format!(
                    "g_threshold {g:e} outside the device range"
                )));
            }
        }
        cfg.learning.encoding.validate_timing()?;
        cfg.learning.encoding.validate_nonstdp()?;
        cfg.learning.srm.validate()?;
        cfg.learning.stdp.validate()?;
        let read = cfg
            .read
            .unwrap_or_else(|| ReadParams::for_preset(&cfg.preset));
        read.check(&device)?;
        cfg.read = Some(read);
        Ok(cfg)
    }

    pub fn device(&self) -> Result<MemristorParams> {
        MemristorParams::preset(&self.preset)
    }

    pub fn read_params(&self) -> ReadParams {
        self.read
            .unwrap_or_else(|| ReadParams::for_preset(&self.preset))
    }
}

/// Training cycles the reference results report at each scale.
pub fn target_cycles(scale: NetworkScale) -> u32 {
    if scale.categories_c <= 3 {
        2
    } else {
        3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub g_threshold: f64,
    pub cycles: u32,
    pub learning: LearningParams,
}

/// Binary search for a threshold that makes training stop after exactly
/// `target` cycles, verified by a fresh training run.
pub fn calibrate(
    scale: NetworkScale,
    shape: Shape,
    rule: Rule,
    target: u32,
    cfg: &ExperimentConfig,
) -> Result<Calibration> {
    if target == 0 {
        return Err(Error::Calibration(
            "training cannot converge in 0 cycles".into(),
        ));
    }
    let device = cfg.device()?;
    let patterns = crate::patterns::generate_glyphs(scale)?;
    let learning = cfg.learning;

    // A threshold above every reachable conductance never converges, so
    // training `target` cycles records the whole oracle.
    let unreachable = device.g_max() * (1.0 - 1e-12);
    let mut net = Network::build(scale, shape, device)?;
    let history = train(
        &mut net,
        &patterns,
        rule,
        &learning,
        unreachable,
        target,
        cfg.parallel,
    )?
    .min_black_history;
    let cycles_for = |g: f64| -> u32 {
        history
            .iter()
            .position(|&m| m >= g)
            .map_or(u32::MAX, |i| i as u32 + 1)
    };

    let (mut lo, mut hi) = (device.g_min(), device.g_max());
    let mut found = None;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        match cycles_for(mid).cmp(&target) {
            std::cmp::Ordering::Less => lo = mid,
            std::cmp::Ordering::Greater => hi = mid,
            std::cmp::Ordering::Equal => {
                found = Some(mid);
                break;
            }
        }
    }
    let Some(g) = found else {
        return Err(Error::Calibration(format!(
            "no threshold gives {target} cycles at {scale} {shape} {rule}; minimum black conductance per cycle: {history:?}"
        )));
    };

    let mut check = Network::build(scale, shape, device)?;
    let report = train(
        &mut check,
        &patterns,
        rule,
        &learning,
        g,
        target,
        cfg.parallel,
    )?;
    if !report.converged || report.cycles != target {
        return Err(Error::Calibration(format!(
            "threshold {g:e} gave {} cycles on re-run, expected {target}",
            report.cycles
        )));
    }
    Ok(Calibration {
        g_threshold: g,
        cycles: target,
        learning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scale: NetworkScale,
    pub shape: Shape,
    pub rule: Rule,
    /// `ok`, or the error that stopped this row.
    pub status: String,
    pub g_threshold: Option<f64>,
    pub converged: Option<bool>,
    pub cycles: Option<u32>,
    pub accuracy: Option<f64>,
    pub cost: Option<CostReport>,
    pub wall_time_s: Option<f64>,
}

impl ReportRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

struct RowResult {
    g_threshold: f64,
    converged: bool,
    cycles: u32,
    accuracy: f64,
    cost: CostReport,
}

fn run_row_inner(
    scale: NetworkScale,
    shape: Shape,
    rule: Rule,
    cfg: &ExperimentConfig,
    testset: &PatternSet,
) -> Result<RowResult> {
    let device = cfg.device()?;
    let g = match cfg.g_threshold {
        Threshold::Fixed(g) => g,
        Threshold::Auto => calibrate(scale, shape, rule, target_cycles(scale), cfg)?.g_threshold,
    };
    let mut net = Network::build(scale, shape, device)?;
    let report = train(
        &mut net,
        &testset.train_patterns,
        rule,
        &cfg.learning,
        g,
        cfg.max_cycles,
        cfg.parallel,
    )?;
    let accuracy = evaluate(&net, &testset.test_items, &cfg.read_params(), cfg.parallel)?;
    let cost = estimate_for(shape, rule, scale, &testset.train_patterns, &cfg.learning)?;
    Ok(RowResult {
        g_threshold: g,
        converged: report.converged,
        cycles: report.cycles,
        accuracy,
        cost,
    })
}

fn testset_for(scale: NetworkScale, cfg: &ExperimentConfig) -> Result<PatternSet> {
    PatternSet::generate(
        scale,
        cfg.flip_prob,
        cfg.n_test_per_category,
        cfg.seed.unwrap_or(0),
    )
}

fn row(
    scale: NetworkScale,
    shape: Shape,
    rule: Rule,
    cfg: &ExperimentConfig,
    testset: &Result<PatternSet>,
) -> ReportRow {
    let start = Instant::now();
    let result = testset
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|t| run_row_inner(scale, shape, rule, cfg, t));
    let wall_time_s = cfg.record_wall_time.then(|| start.elapsed().as_secs_f64());
    match result {
        Ok(r) => ReportRow {
            scale,
            shape,
            rule,
            status: "ok".into(),
            g_threshold: Some(r.g_threshold),
            converged: Some(r.converged),
            cycles: Some(r.cycles),
            accuracy: Some(r.accuracy),
            cost: Some(r.cost),
            wall_time_s,
        },
        Err(e) => ReportRow {
            scale,
            shape,
            rule,
            status: format!("error: {e}"),
            g_threshold: None,
            converged: None,
            cycles: None,
            accuracy: None,
            cost: None,
            wall_time_s,
        },
    }
}

/// One row for a single configuration triple.
pub fn run_one(scale: NetworkScale, shape: Shape, rule: Rule, cfg: &ExperimentConfig) -> ReportRow {
    row(scale, shape, rule, cfg, &testset_for(scale, cfg))
}

/// Every (scale, shape, rule) triple in config order. Rows may run
/// concurrently; results do not depend on it.
pub fn run_sweep(cfg: &ExperimentConfig) -> Vec<ReportRow> {
    let mut testsets = HashMap::new();
    for &s in &cfg.scales {
        testsets.entry(s).or_insert_with(|| testset_for(s, cfg));
    }
    let triples: Vec<(NetworkScale, Shape, Rule)> = cfg
        .scales
        .iter()
        .flat_map(|&s| {
            cfg.shapes
                .iter()
                .flat_map(move |&sh| cfg.rules.iter().map(move |&r| (s, sh, r)))
        })
        .collect();
    par::map(&triples, cfg.parallel, |&(s, sh, r)| {
        row(s, sh, r, cfg, &testsets[&s])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            scales: vec![NetworkScale::new(3, 3).unwrap()],
            n_test_per_category: 20,
            ..Default::default()
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let file = r#"{"flip_prob": 0.1, "max_cycles": 7, "learning": {"srm": {"dt": 0.02}}}"#;
        let cfg = ExperimentConfig::load(
            Some(file),
            &[
                ("flip-prob".into(), "0".into()),
                ("scales".into(), "3x3x3,5x5x5".into()),
                ("learning.stdp.a_plus".into(), "0.8".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.flip_prob, 0.0);
        assert_eq!(cfg.max_cycles, 7);
        assert_eq!(cfg.learning.srm.dt, 0.02);
        assert_eq!(cfg.learning.srm.kernel_cutoff, 40.0);
        assert_eq!(cfg.learning.stdp.a_plus, 0.8);
        assert_eq!(cfg.scales.len(), 2);
        assert_eq!(cfg.read, Some(ReadParams::physical()));
    }

    #[test]
    fn config_errors() {
        assert!(ExperimentConfig::load(Some("{\"bogus\": 1}"), &[]).is_err());
        assert!(ExperimentConfig::load(None, &[("rules".into(), "[]".into())]).is_err());
        assert!(ExperimentConfig::load(None, &[("seed".into(), "null".into())]).is_err());
        assert!(ExperimentConfig::load(
            None,
            &[
                ("seed".into(), "null".into()),
                ("flip_prob".into(), "0".into())
            ]
        )
        .is_ok());
        assert!(ExperimentConfig::load(None, &[("preset".into(), "nope".into())]).is_err());
        assert!(ExperimentConfig::load(None, &[("g_threshold".into(), "1".into())]).is_err());
    }

    #[test]
    fn threshold_serde() {
        let cfg = ExperimentConfig::load(None, &[("g_threshold".into(), "0.001".into())]).unwrap();
        assert_eq!(cfg.g_threshold, Threshold::Fixed(0.001));
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"g_threshold\":0.001"));
        assert!(serde_json::to_string(&ExperimentConfig::default())
            .unwrap()
            .contains("\"auto\""));
    }

    #[test]
    fn calibration_hits_target() {
        let cfg = small();
        let s = NetworkScale::new(3, 3).unwrap();
        for rule in [Rule::Stdp, Rule::Nonstdp] {
            let c = calibrate(s, Shape::Feedforward, rule, 2, &cfg).unwrap();
            assert_eq!(c.cycles, 2);
        }
        assert!(matches!(
            calibrate(s, Shape::Feedforward, Rule::Stdp, 0, &cfg),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn sweep_rows_in_order() {
        let cfg = small().resolved().unwrap();
        let rows = run_sweep(&cfg);
        assert_eq!(rows.len(), 4);
        let order: Vec<_> = rows.iter().map(|r| (r.shape, r.rule)).collect();
        assert_eq!(
            order,
            vec![
                (Shape::Feedforward, Rule::Stdp),
                (Shape::Feedforward, Rule::Nonstdp),
                (Shape::Crossbar, Rule::Stdp),
                (Shape::Crossbar, Rule::Nonstdp),
            ]
        );
        assert!(rows.iter().all(|r| r.is_ok() && r.cycles == Some(2)));
    }

    #[test]
    fn failing_row_is_recorded() {
        let cfg = ExperimentConfig {
            scales: vec![
                NetworkScale::new(2, 2).unwrap(),
                NetworkScale::new(3, 3).unwrap(),
            ],
            rules: vec![Rule::Nonstdp],
            shapes: vec![Shape::Feedforward],
            ..small()
        };
        let rows = run_sweep(&cfg);
        assert!(rows[0].status.starts_with("error"));
        assert!(rows[1].is_ok());
    }
}
