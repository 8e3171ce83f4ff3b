//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! cargo test --release --test acceptance

mod common;

use std::time::{Duration, Instant};

use qumem::fock::{lift_unitary, OccupationBasis};
use qumem::hysteresis::{run_closed_loop, run_lpf_loop, DetectionConfig, DriveConfig, Noise, Trace};
use qumem::memristor::{
    output_state_dual_rail, output_state_single_rail, purity_closed_form, MemristorState, QubitInput,
};
use qumem::pipeline::{default_threads, run_entanglement, run_mnist_on, Encoding, EntanglementTaskConfig, MnistTaskConfig};
use qumem::readout::{LabeledExample, ReadoutModel};
use qumem::mnist::load_mnist;
use qumem::tomography::{entries_to_matrix, max_component_diff, published_table, round_trip, table_fixtures, TomographyShots};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn criterion(n: usize, name: &str, budget: Duration, f: impl FnOnce() -> qumem::Result<Outcome>) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok(o) => (o.passed, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = elapsed <= budget;
    let ok = passed && in_time;
    println!(
        "{} criterion {n} ({name}): {detail}; {:.2}s of {:.0}s budget",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    ok
}

fn grid(n: usize) -> impl Iterator<Item = (f64, f64)> {
    (0..n).flat_map(move |i| (0..n).map(move |j| (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64)))
}

fn purity_identity() -> qumem::Result<Outcome> {
    let (mut single, mut dual) = (0.0f64, 0.0f64);
    for (b, r) in grid(101) {
        let q = QubitInput::from_beta2(b)?;
        let target = 1.0 - 2.0 * b * b * r * (1.0 - r);
        single = single.max((output_state_single_rail(q, r)?.purity() - target).abs());
        dual = dual.max((output_state_dual_rail(q, r)?.purity() - target).abs());
        debug_assert!((purity_closed_form(b, r) - target).abs() < 1e-15);
    }
    Ok(outcome(
        single <= 1e-12 && dual <= 1e-12,
        format!("max |Tr rho^2 - 1+2b^4R(1-R)|: 2x2 single-rail {single:.1e}, 3x3 dual-rail {dual:.1e} (tol 1e-12)"),
    ))
}

fn table_fixtures_round_trip() -> qumem::Result<Outcome> {
    let fixtures = table_fixtures()?;
    let table = published_table();
    let mut worst_entry: f64 = 0.0;
    let mut min_fid: f64 = 1.0;
    for (f, row) in fixtures.iter().zip(&table.rows) {
        worst_entry = worst_entry.max(max_component_diff(&f.rho.to_density(), &entries_to_matrix(&row.rho_theory)));
        min_fid = min_fid.min(round_trip(f, TomographyShots::Exact, 0)?.fidelity);
    }
    let purity = output_state_dual_rail(QubitInput::from_beta2(0.3)?, 0.7)?.purity();
    Ok(outcome(
        fixtures.len() == 16 && worst_entry <= 0.005 && min_fid >= 0.999 && (purity - 0.67).abs() <= 0.005,
        format!(
            "{} fixtures, max entry diff {worst_entry:.4} (tol 0.005), min exact fidelity {min_fid:.6} (>= 0.999), purity(0.3, 0.7) = {purity:.4} (0.67 +- 0.005)",
            fixtures.len()
        ),
    ))
}

fn windowed(ratio: f64, detection: &DetectionConfig) -> qumem::Result<Trace> {
    let drive = DriveConfig::new(10.0, 3);
    run_closed_loop(&drive, MemristorState::windowed(ratio * drive.t_osc)?, detection)
}

const INTERMEDIATE: [f64; 5] = [0.05, 0.2, 0.4, 0.6, 0.8];

fn hysteresis_limits() -> qumem::Result<Outcome> {
    let det = DetectionConfig::default();
    let lf = windowed(0.01, &det)?.low_freq_rms();
    let hf = windowed(1.0, &det)?.high_freq_rms();
    let mut worst_origin: f64 = 0.0;
    for r in INTERMEDIATE {
        worst_origin = worst_origin.max(windowed(r, &det)?.max_output_near_origin(0.02));
    }
    Ok(outcome(
        lf <= 0.02 && hf <= 0.02 && worst_origin <= 0.02,
        format!(
            "T=T_osc/100 rms {lf:.4}, T=T_osc rms {hf:.4} (tol 0.02); max n_out near origin over T/T_osc in {INTERMEDIATE:?}: {worst_origin:.4} (<= 0.02)"
        ),
    ))
}

fn noise_realism() -> qumem::Result<Outcome> {
    let exact = DetectionConfig::default();
    let poisson = DetectionConfig {
        noise: Noise::Poisson { seed: 17 },
        ..DetectionConfig::default()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    // panels whose window is at least ten RC constants
    for ratio in [0.2, 0.4, 0.6, 0.8, 1.0] {
        let clean = windowed(ratio, &exact)?;
        let noisy = windowed(ratio, &poisson)?;
        let counts = noisy.meta.mean_counts_per_rc.unwrap_or(0.0);
        let lf_bound = 3.0 * clean.low_freq_rms().max(0.02);
        let hf_bound = 3.0 * clean.high_freq_rms().max(0.02);
        let (lf, hf) = (noisy.low_freq_rms(), noisy.high_freq_rms());
        ok &= (100.0..=1000.0).contains(&counts) && lf <= lf_bound && hf <= hf_bound;
        parts.push(format!(
            "T/T_osc={ratio}: {counts:.0} counts/RC, lf {lf:.3}<={lf_bound:.3}, hf {hf:.3}<={hf_bound:.3}"
        ));
    }
    Ok(outcome(ok, parts.join("; ")))
}

fn lowpass() -> qumem::Result<Outcome> {
    let det = DetectionConfig::default();
    let mut worst_origin: f64 = 0.0;
    let mut lf = f64::NAN;
    for f in [0.1, 1.0, 4.62, 10.0] {
        let trace = run_lpf_loop(&DriveConfig::new(1.0 / f, 3), 4.62, &det)?;
        worst_origin = worst_origin.max(trace.max_output_near_origin(0.02));
        if f == 0.1 {
            lf = trace.low_freq_rms();
        }
    }
    Ok(outcome(
        worst_origin <= 0.02 && lf <= 0.03,
        format!("max n_out near origin {worst_origin:.4} (<= 0.02), f_osc=0.1 Hz rms {lf:.4} (<= 0.03)"),
    ))
}

fn rc_tasks() -> qumem::Result<Outcome> {
    let threads = default_threads();
    let base = MnistTaskConfig::default();
    let subset = load_mnist(&base.data)?;
    let quantum = run_mnist_on(&subset, &base, threads)?.report.test.accuracy;
    let coherent_cfg = MnistTaskConfig {
        encoding: Encoding::Coherent,
        ..base.clone()
    };
    let coherent = run_mnist_on(&subset, &coherent_cfg, threads)?.report.test.accuracy;
    let mut off_cfg = base.clone();
    off_cfg.reservoir.feedback = false;
    let off = run_mnist_on(&subset, &off_cfg, threads)?.report.test.accuracy;
    let ent = run_entanglement(&EntanglementTaskConfig::default(), threads)?.report.test.accuracy;
    let checks = [
        quantum >= 0.90,
        (0.55..=0.85).contains(&coherent) && coherent <= quantum - 0.10,
        (0.25..=0.45).contains(&off),
        ent >= 0.90,
    ];
    Ok(outcome(
        checks.iter().all(|&c| c),
        format!(
            "mnist quantum {quantum:.3} (>= 0.90) {}, coherent {coherent:.3} (in [0.55, 0.85], >= 10 pts below quantum) {}, feedback off {off:.3} (in [0.25, 0.45]) {}, entanglement {ent:.3} (>= 0.90) {}",
            mark(checks[0]),
            mark(checks[1]),
            mark(checks[2]),
            mark(checks[3])
        ),
    ))
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISS"
    }
}

fn oracle_equivalence() -> qumem::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for _ in 0..50 {
        for m in 1..=3 {
            let u = common::haar_unitary(m, &mut rng);
            for p in 0..=2 {
                let basis = OccupationBasis::enumerate(m, p)?;
                worst = worst.max((lift_unitary(&u, &basis)? - common::oracle_lift(&u, &basis)).camax());
                cases += 1;
            }
        }
    }
    Ok(outcome(
        worst <= 1e-10,
        format!("{cases} (m, p, U) cases, max deviation {worst:.1e} (tol 1e-10)"),
    ))
}

fn gradient_check() -> qumem::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let model = ReadoutModel::random(165, 10, 3, draw).with_input_scale(165f64.sqrt());
        let batch: Vec<LabeledExample> = (0..8)
            .map(|_| {
                let raw: Vec<f64> = (0..165).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                LabeledExample::new(raw.iter().map(|v| v / s).collect(), rng.gen_range(0..3))
            })
            .collect::<qumem::Result<_>>()?;
        let (_, g) = model.loss_and_grad(&batch)?;
        let analytic: Vec<f64> = g.w1.iter().chain(g.w2.iter()).copied().collect();
        let mut numeric = Vec::with_capacity(analytic.len());
        for k in 0..analytic.len() {
            let shifted = |delta: f64| -> qumem::Result<f64> {
                let mut w1 = model.w1().clone();
                let mut w2 = model.w2().clone();
                if k < w1.len() {
                    w1[k] += delta;
                } else {
                    w2[k - w1.len()] += delta;
                }
                ReadoutModel::from_weights(w1, w2)?
                    .with_input_scale(model.input_scale())
                    .loss(&batch)
            };
            numeric.push((shifted(h)? - shifted(-h)?) / (2.0 * h));
        }
        let diff = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
        let scale = analytic.iter().map(|a| a.abs()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    Ok(outcome(
        worst <= 1e-5,
        format!("100 draws of a 165-10-3 model, max relative error {worst:.1e} (tol 1e-5)"),
    ))
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "purity identity", s(1), purity_identity),
        criterion(2, "tomography table fixtures", s(10), table_fixtures_round_trip),
        criterion(3, "hysteresis limits", s(30), hysteresis_limits),
        criterion(4, "noise realism", s(60), noise_realism),
        criterion(5, "low-pass memristance", s(30), lowpass),
        criterion(6, "reservoir computing tasks", s(1800), rc_tasks),
        criterion(7, "permanent vs tensor oracle", s(10), oracle_equivalence),
        criterion(8, "readout gradient check", s(10), gradient_check),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
