//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use memsnn::costmodel::{estimate, state_cells, verify_against_instrumentation};
use memsnn::device::{MemristorParams, MemristorState, Pulse};
use memsnn::experiment::{calibrate, run_sweep, target_cycles, ExperimentConfig, ReportRow};
use memsnn::patterns::{generate_glyphs, PatternSet};
use memsnn::plasticity::{apply_stdp_update, stdp_delta, StdpParams};
use memsnn::report::{emit_report, Format, Report};
use memsnn::srm::psp;
use memsnn::topology::{
    classify, train, train_instrumented, LearningParams, Network, NetworkScale, Rule, Shape,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

const ORACLE_CASES: usize = 1000;
const ORACLE_REL_TOL: f64 = 1e-6;
const ORACLE_STEPS_PER_WIDTH: f64 = 1e5;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(10);

const PSP_GRID_DT: f64 = 1e-5;
const PSP_PEAK_TOL: f64 = 1e-9;
const PSP_TAIL_FRACTION: f64 = 1e-4;

const STDP_SAMPLES: usize = 10_000;

const CONVERGENCE_TIME_LIMIT: Duration = Duration::from_secs(300);

const NOISY_MIN_ACCURACY: f64 = 0.99;
const NOISY_TREND_TOL: f64 = 0.005;
const NOISY_RULE_GAP: f64 = 0.005;

const EXPONENT_TOL: f64 = 0.1;

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn all_triples() -> Vec<(NetworkScale, Shape, Rule)> {
    let mut v = Vec::new();
    for s in NetworkScale::paper_grid() {
        for shape in [Shape::Feedforward, Shape::Crossbar] {
            for rule in [Rule::Stdp, Rule::Nonstdp] {
                v.push((s, shape, rule));
            }
        }
    }
    v
}

fn device_oracle() -> Outcome {
    let params = MemristorParams::physical();
    let k2 = params.k2_per_stu();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < ORACLE_CASES {
        let m0 = rng.gen_range(2.0 * params.r_on..0.9 * params.r_off);
        let amplitude = rng.gen_range(0.1f64..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        // Explicit Euler's relative error grows with |1 - M'^2 / M^2|, so a
        // single pulse moves M^2 by at most 20%.
        let ratio: f64 = if amplitude > 0.0 {
            rng.gen_range(0.8..0.999)
        } else {
            rng.gen_range(1.001..1.2)
        };
        if m0 * ratio.sqrt() >= params.r_off {
            continue;
        }
        let width = m0 * m0 * (1.0 - ratio).abs() / (2.0 * k2 * amplitude.abs());
        let pulse = Pulse::new(amplitude, width, 0.0).unwrap();
        let state = MemristorState::new(params, m0).unwrap();
        let exact = state.apply_pulse_analytic(&pulse).unwrap().memristance_m;
        let numeric = state
            .apply_pulse_numeric(&pulse, width / ORACLE_STEPS_PER_WIDTH)
            .unwrap()
            .memristance_m;
        worst = worst.max((exact - numeric).abs() / exact);
        cases += 1;
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= ORACLE_REL_TOL && elapsed < ORACLE_TIME_LIMIT,
        format!(
            "max rel err {worst:.2e} over {cases} pulses (tol {ORACLE_REL_TOL:e}), {:.2}s (limit {}s)",
            elapsed.as_secs_f64(),
            ORACLE_TIME_LIMIT.as_secs()
        ),
    )
}

fn psp_kernel() -> Outcome {
    let w = 1.7;
    let (mut t_best, mut v_best) = (0.0, f64::NEG_INFINITY);
    let steps = (20.0 / PSP_GRID_DT) as usize;
    for n in 0..=steps {
        let t = n as f64 * PSP_GRID_DT;
        let v = psp(w, t).unwrap();
        if v > v_best {
            (t_best, v_best) = (t, v);
        }
    }
    let t_star = 4.0 * std::f64::consts::LN_2;
    let at_origin = psp(w, 0.0).unwrap();
    let tail = (0..=16_000)
        .map(|n| psp(w, 40.0 + 1e-6 + n as f64 * 0.01).unwrap().abs())
        .fold(0.0, f64::max);
    let pass = (t_best - t_star).abs() <= PSP_GRID_DT
        && (v_best - 0.25 * w).abs() <= PSP_PEAK_TOL
        && at_origin == 0.0
        && tail < PSP_TAIL_FRACTION * w;
    outcome(
        pass,
        format!(
            "argmax {t_best:.5} vs 4 ln 2 = {t_star:.5}, peak/w {:.12}, psp(0) = {at_origin}, max tail/w {:.2e}",
            v_best / w,
            tail / w
        ),
    )
}

fn stdp_shape() -> Outcome {
    let p = StdpParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for _ in 0..STDP_SAMPLES {
        let a = rng.gen_range(1e-3..30.0);
        let b = rng.gen_range(1e-3..30.0);
        let (near, far) = if a < b { (a, b) } else { (b, a) };
        let up = stdp_delta(near, &p);
        let down = stdp_delta(-near, &p);
        if !(up > 0.0 && down < 0.0) {
            failures.push(format!("sign at {near}"));
        }
        if near < far && !(stdp_delta(far, &p) <= up && stdp_delta(-far, &p) >= down) {
            failures.push(format!("monotonicity at {near}, {far}"));
        }
        if up <= down.abs() {
            failures.push(format!("asymmetry at {near}"));
        }
        // away from the clamp, which caps potentiation near r_on
        let g = rng.gen_range(1.2 / p_r_off()..0.99 / (p_r_on() * (1.0 + p.a_plus)));
        let state = MemristorState::new(MemristorParams::physical(), 1.0 / g).unwrap();
        let gain = apply_stdp_update(&state, up).conductance() - g;
        let loss = g - apply_stdp_update(&state, down).conductance();
        if !(gain > loss && loss > 0.0) {
            failures.push(format!("update asymmetry at G = {g:e}"));
        }
    }
    outcome(
        failures.is_empty() && stdp_delta(0.0, &p) == 0.0,
        format!(
            "{STDP_SAMPLES} intervals, a+ = {}, a- = {}, {} violations{}",
            p.a_plus,
            p.a_minus,
            failures.len(),
            failures
                .first()
                .map(|f| format!(" (first: {f})"))
                .unwrap_or_default()
        ),
    )
}

fn p_r_off() -> f64 {
    MemristorParams::physical().r_off
}

fn p_r_on() -> f64 {
    MemristorParams::physical().r_on
}

fn convergence(cfg: &ExperimentConfig) -> Outcome {
    let start = Instant::now();
    let device = cfg.device().unwrap();
    let mut got = Vec::new();
    let mut pass = true;
    for (scale, shape, rule) in all_triples() {
        let target = target_cycles(scale);
        let cycles = calibrate(scale, shape, rule, target, cfg)
            .ok()
            .and_then(|c| {
                let patterns = generate_glyphs(scale).ok()?;
                let mut net = Network::build(scale, shape, device).ok()?;
                let r = train(
                    &mut net,
                    &patterns,
                    rule,
                    &cfg.learning,
                    c.g_threshold,
                    cfg.max_cycles,
                    true,
                )
                .ok()?;
                r.converged.then_some(r.cycles)
            });
        pass &= cycles == Some(target);
        got.push(cycles.map_or("x".to_string(), |c| c.to_string()));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < CONVERGENCE_TIME_LIMIT;
    outcome(
        pass,
        format!(
            "cycles [{}] for scale x shape x rule, {:.1}s",
            got.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn clean_accuracy(rows: &[ReportRow]) -> Outcome {
    let perfect = rows.iter().filter(|r| r.accuracy == Some(1.0)).count();
    outcome(
        rows.len() == 24 && perfect == 24,
        format!("{perfect}/{} rows at 100% with flip_prob = 0", rows.len()),
    )
}

fn accuracy(rows: &[ReportRow], scale: NetworkScale, shape: Shape, rule: Rule) -> f64 {
    rows.iter()
        .find(|r| r.scale == scale && r.shape == shape && r.rule == rule)
        .and_then(|r| r.accuracy)
        .unwrap_or(f64::NAN)
}

fn noisy_accuracy(rows: &[ReportRow]) -> Outcome {
    let grid = NetworkScale::paper_grid();
    let mut pass = rows.len() == 24 && rows.iter().all(ReportRow::is_ok);
    let mut summary = Vec::new();
    for shape in [Shape::Feedforward, Shape::Crossbar] {
        for rule in [Rule::Stdp, Rule::Nonstdp] {
            let accs: Vec<f64> = grid
                .iter()
                .map(|&s| accuracy(rows, s, shape, rule))
                .collect();
            pass &= accs[0] >= NOISY_MIN_ACCURACY && accs[1] >= NOISY_MIN_ACCURACY;
            pass &= accs.windows(2).all(|w| w[1] <= w[0] + NOISY_TREND_TOL);
            if shape == Shape::Feedforward && rule == Rule::Stdp {
                summary = accs.iter().map(|a| format!("{:.4}", a)).collect();
            }
        }
        for &s in &grid {
            let gap = (accuracy(rows, s, shape, Rule::Stdp)
                - accuracy(rows, s, shape, Rule::Nonstdp))
            .abs();
            pass &= gap <= NOISY_RULE_GAP;
        }
    }
    outcome(
        pass,
        format!(
            "feedforward STDP accuracy [{}]; floor {NOISY_MIN_ACCURACY}, trend tol {NOISY_TREND_TOL}, rule gap tol {NOISY_RULE_GAP}",
            summary.join(" ")
        ),
    )
}

fn cost_dominance() -> Outcome {
    let learning = LearningParams::default();
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    for s in NetworkScale::paper_grid() {
        for shape in [Shape::Feedforward, Shape::Crossbar] {
            let st = estimate(shape, Rule::Stdp, s, &learning).unwrap();
            let ns = estimate(shape, Rule::Nonstdp, s, &learning).unwrap();
            pass &= ns.ops.total() < st.ops.total()
                && ns.latency_proxy < st.latency_proxy
                && ns.state_cells <= st.state_cells
                && ns.ops.exp_eval == 0;
            worst_ratio = worst_ratio.max(ns.ops.total() as f64 / st.ops.total() as f64);
        }
    }
    outcome(
        pass,
        format!("non-STDP below STDP on ops, latency and state at 12 configs; largest ops ratio {worst_ratio:.2e}"),
    )
}

/// Least-squares slope of ln(y) against ln(x).
fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn scaling_shape() -> Outcome {
    let ps = [3usize, 5, 7, 9];
    let xs: Vec<f64> = ps.iter().map(|&p| p as f64).collect();
    let mut pass = true;
    let mut fits = Vec::new();
    for c in [3usize, 5] {
        for rule in [Rule::Stdp, Rule::Nonstdp] {
            let cells = |shape| -> Vec<f64> {
                ps.iter()
                    .map(|&p| state_cells(shape, rule, NetworkScale::new(p, c).unwrap()) as f64)
                    .collect()
            };
            let (ff, xb) = (cells(Shape::Feedforward), cells(Shape::Crossbar));
            let (kf, kx) = (loglog_slope(&xs, &ff), loglog_slope(&xs, &xb));
            pass &= (kf - 2.0).abs() <= EXPONENT_TOL && (kx - 4.0).abs() <= EXPONENT_TOL;
            let ratios: Vec<f64> = xb.iter().zip(&ff).map(|(x, f)| x / f).collect();
            pass &= ratios.windows(2).all(|w| w[1] > w[0]);
            fits.push(format!("c={c} {rule}: {kf:.3}/{kx:.3}"));
        }
    }
    outcome(
        pass,
        format!(
            "feedforward/crossbar exponents {} (tol {EXPONENT_TOL})",
            fits.join(", ")
        ),
    )
}

fn cost_consistency() -> Outcome {
    let learning = LearningParams::default();
    let device = MemristorParams::physical();
    let mut mismatches = Vec::new();
    for (scale, shape, rule) in all_triples() {
        let patterns = generate_glyphs(scale).unwrap();
        let mut net = Network::build(scale, shape, device).unwrap();
        let g = 0.5 * (device.g_min() + device.g_max());
        let (_, tallies) = train_instrumented(&mut net, &patterns, rule, &learning, g, 1).unwrap();
        let report = estimate(shape, rule, scale, &learning).unwrap();
        let (ok, diff) = verify_against_instrumentation(&report, &tallies[0]);
        if !ok {
            mismatches.push(format!("{scale} {shape} {rule}: {diff:?}"));
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "24 configs checked, {} mismatches {}",
            mismatches.len(),
            mismatches.join("; ")
        ),
    )
}

fn topology_equivalence(cfg: &ExperimentConfig) -> Outcome {
    let device = cfg.device().unwrap();
    let read = cfg.read_params();
    let mut pass = true;
    let mut items = 0;
    for scale in NetworkScale::paper_grid() {
        let set = PatternSet::generate(
            scale,
            cfg.flip_prob,
            cfg.n_test_per_category,
            cfg.seed.unwrap(),
        )
        .unwrap();
        for rule in [Rule::Stdp, Rule::Nonstdp] {
            let g = calibrate(scale, Shape::Feedforward, rule, target_cycles(scale), cfg)
                .unwrap()
                .g_threshold;
            let trained = |shape| {
                let mut net = Network::build(scale, shape, device).unwrap();
                train(
                    &mut net,
                    &set.train_patterns,
                    rule,
                    &cfg.learning,
                    g,
                    cfg.max_cycles,
                    true,
                )
                .unwrap();
                net
            };
            let (ff, xb) = (trained(Shape::Feedforward), trained(Shape::Crossbar));
            let bits = |n: &Network| -> Vec<u64> {
                n.trained_conductances()
                    .iter()
                    .flatten()
                    .map(|g| g.to_bits())
                    .collect()
            };
            pass &= bits(&ff) == bits(&xb);
            for item in &set.test_items {
                let a = classify(&ff, &item.image, &read).unwrap();
                let b = classify(&xb, &item.image, &read).unwrap();
                pass &= a.category == b.category && a.ambiguous == b.ambiguous;
                items += 1;
            }
        }
    }
    outcome(
        pass,
        format!("diagonal conductances bit-identical at 12 configs; {items} decisions compared"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, parallel: bool| -> Vec<u8> {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_memsnn"))
            .args(["sweep", "--format", "json", "--out"])
            .arg(&path)
            .arg(format!("--parallel={parallel}"))
            .status()
            .expect("memsnn binary runs");
        assert!(status.success(), "sweep exited with {status}");
        std::fs::read(&path).unwrap()
    };
    let a = run("a.json", true);
    let b = run("b.json", true);
    let c = run("c.json", false);
    // parallelism is echoed in the config, so compare rows separately
    let rows = |bytes: &[u8]| -> String {
        let r: Report = serde_json::from_slice(bytes).unwrap();
        emit_report(
            &Report {
                config: ExperimentConfig::default(),
                ..r
            },
            Format::Json,
        )
        .unwrap()
    };
    let pass = !a.is_empty() && a == b && rows(&a) == rows(&c);
    outcome(
        pass,
        format!(
            "two parallel sweeps byte-identical ({} bytes); sequential rows identical to parallel",
            a.len()
        ),
    )
}

fn main() -> ExitCode {
    let clean_cfg = ExperimentConfig {
        flip_prob: 0.0,
        n_test_per_category: 50,
        ..Default::default()
    }
    .resolved()
    .unwrap();
    let noisy_cfg = ExperimentConfig::default().resolved().unwrap();

    let criteria: Vec<(&str, Check)> = vec![
        ("device oracle equivalence", Box::new(device_oracle)),
        ("psp kernel", Box::new(psp_kernel)),
        ("stdp shape", Box::new(stdp_shape)),
        (
            "convergence reproduction",
            Box::new(|| convergence(&noisy_cfg)),
        ),
        (
            "clean accuracy",
            Box::new(|| clean_accuracy(&run_sweep(&clean_cfg))),
        ),
        (
            "noisy accuracy trend",
            Box::new(|| noisy_accuracy(&run_sweep(&noisy_cfg))),
        ),
        ("cost dominance", Box::new(cost_dominance)),
        ("scaling shape", Box::new(scaling_shape)),
        ("cost model consistency", Box::new(cost_consistency)),
        (
            "topology equivalence",
            Box::new(|| topology_equivalence(&noisy_cfg)),
        ),
        ("sweep determinism", Box::new(determinism)),
    ];

    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag}  {name}: {}", n + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
