//! Command-line driver. Each command writes its artefacts atomically into the
//! output directory; `--check` turns reference thresholds into exit code 4.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, HysteresisConfig, LawKind};
use crate::error::{Error, Result};
use crate::hysteresis::{run_closed_loop, run_lpf_loop, DriveConfig, Trace};
use crate::io::{write_atomic, write_json};
use crate::memristor::{purity_closed_form, MemristorState};
use crate::pipeline::{default_threads, run_entanglement, run_mnist, Encoding, TaskOutcome};
use crate::readout::{save_checkpoint, write_features};
use crate::reservoir::Shots;
use crate::tomography::{fit_global_phase, round_trip, table_fixtures, ReconstructionReport, TomographyShots, PHI_GLOBAL};

#[derive(Debug, Parser)]
#[command(name = "qumem", version, about = "Photonic quantum memristor and reservoir simulator")]
pub struct Cli {
    /// JSON experiment config; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Derive every seed from this value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Exit with status 4 when a reference threshold is missed.
    #[arg(long, global = true)]
    pub check: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Mnist,
    Entanglement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-loop hysteresis panels.
    Hysteresis {
        /// windowed, lowpass or frozen
        #[arg(long)]
        law: Option<LawKind>,
    },
    /// Output-state purity over the (|β|², R) grid.
    PurityMap,
    /// Reservoir-computing task: encode, run reservoir, train readout.
    Rc {
        task: Task,
        /// quantum or coherent (mnist only)
        #[arg(long)]
        encoding: Option<Encoding>,
        #[arg(long)]
        feedback: Option<Switch>,
        /// "exact" or a positive shot count
        #[arg(long)]
        shots: Option<Shots>,
    },
    /// Tomography round trip over the published table states.
    Tomography {
        /// "exact" or a positive shot count
        #[arg(long)]
        shots: Option<Shots>,
    },
}

/// One reference threshold and whether it held.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(checks) => {
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if cli.check && checks.iter().any(|c| !c.passed) {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) => 2,
        Error::Data(_) | Error::Io { .. } => 3,
        _ => 1,
    }
}

/// Resolves the config from file, seed and flags.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::Config(format!("cannot read config {}: {e}", p.display())),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    match &cli.command {
        Command::Hysteresis { law: Some(l) } => cfg.hysteresis.law = *l,
        Command::Rc {
            encoding,
            feedback,
            shots,
            ..
        } => {
            if let Some(e) = encoding {
                cfg.mnist.encoding = *e;
            }
            for r in [&mut cfg.mnist.reservoir, &mut cfg.entanglement.reservoir] {
                if let Some(f) = feedback {
                    r.feedback = *f == Switch::On;
                }
                if let Some(s) = shots {
                    r.shots = *s;
                }
            }
        }
        Command::Tomography { shots: Some(s) } => cfg.tomography.shots = *s,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Vec<Check>> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Hysteresis { .. } => cmd_hysteresis(&cfg, &cli.out),
        Command::PurityMap => cmd_purity_map(&cfg, &cli.out),
        Command::Rc { task, .. } => cmd_rc(*task, &cfg, &cli.out),
        Command::Tomography { .. } => cmd_tomography(&cfg, &cli.out),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PanelSummary {
    pub name: String,
    pub t_osc: f64,
    pub window: Option<f64>,
    pub ratio: Option<f64>,
    pub f_osc: f64,
    pub low_freq_rms: f64,
    pub high_freq_rms: f64,
    pub max_output_near_origin: f64,
    pub pinched: bool,
    pub orbit_area: f64,
    pub mean_counts_per_rc: Option<f64>,
}

fn summarise(name: String, trace: &Trace, ratio: Option<f64>, tol: f64) -> PanelSummary {
    PanelSummary {
        name,
        t_osc: trace.meta.drive.t_osc,
        window: trace.meta.window,
        ratio,
        f_osc: 1.0 / trace.meta.drive.t_osc,
        low_freq_rms: trace.low_freq_rms(),
        high_freq_rms: trace.high_freq_rms(),
        max_output_near_origin: trace.max_output_near_origin(tol),
        pinched: trace.is_pinched(tol),
        orbit_area: trace.orbit_area(),
        mean_counts_per_rc: trace.meta.mean_counts_per_rc,
    }
}

/// Runs every panel of `cfg` and returns `(name, trace, summary)`.
pub fn hysteresis_panels(cfg: &HysteresisConfig) -> Result<Vec<(Trace, PanelSummary)>> {
    cfg.validate()?;
    let mut out = Vec::new();
    match cfg.law {
        LawKind::Windowed => {
            let drive = DriveConfig::new(cfg.t_osc, cfg.periods);
            for &ratio in &cfg.ratios {
                let mem = MemristorState::windowed(ratio * cfg.t_osc)?;
                let trace = run_closed_loop(&drive, mem, &cfg.detection)?;
                let s = summarise(format!("windowed_ratio{ratio}"), &trace, Some(ratio), cfg.pinch_tol);
                out.push((trace, s));
            }
        }
        LawKind::Lowpass => {
            for &f in &cfg.lowpass_f_osc {
                let drive = DriveConfig::new(1.0 / f, cfg.periods);
                let trace = run_lpf_loop(&drive, cfg.f_cut, &cfg.detection)?;
                let s = summarise(format!("lowpass_fosc{f}"), &trace, None, cfg.pinch_tol);
                out.push((trace, s));
            }
        }
        LawKind::Frozen => {
            let drive = DriveConfig::new(cfg.t_osc, cfg.periods);
            let trace = run_closed_loop(&drive, MemristorState::frozen(cfg.frozen_reflectivity)?, &cfg.detection)?;
            let s = summarise("frozen".into(), &trace, None, cfg.pinch_tol);
            out.push((trace, s));
        }
    }
    Ok(out)
}

pub fn cmd_hysteresis(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Check>> {
    let h = &cfg.hysteresis;
    let panels = hysteresis_panels(h)?;
    for (trace, s) in &panels {
        trace.write(out, &s.name)?;
    }
    let summaries: Vec<&PanelSummary> = panels.iter().map(|(_, s)| s).collect();
    write_json(
        &out.join("hysteresis_summary.json"),
        &json!({ "config": h, "panels": summaries }),
    )?;
    let mut checks = Vec::new();
    let tol = h.pinch_tol;
    match h.law {
        LawKind::Windowed => {
            let min_ratio = summaries.iter().min_by(|a, b| a.ratio.unwrap().total_cmp(&b.ratio.unwrap()));
            let max_ratio = summaries.iter().max_by(|a, b| a.ratio.unwrap().total_cmp(&b.ratio.unwrap()));
            if let Some(s) = min_ratio {
                checks.push(Check::new(
                    format!("{} low-frequency limit", s.name),
                    s.low_freq_rms <= 0.02,
                    format!("rms {:.4} <= 0.02", s.low_freq_rms),
                ));
            }
            if let Some(s) = max_ratio {
                checks.push(Check::new(
                    format!("{} high-frequency limit", s.name),
                    s.high_freq_rms <= 0.02,
                    format!("rms {:.4} <= 0.02", s.high_freq_rms),
                ));
            }
        }
        LawKind::Lowpass => {
            if let Some(s) = summaries.iter().min_by(|a, b| a.f_osc.total_cmp(&b.f_osc)) {
                checks.push(Check::new(
                    format!("{} nonlinear limit", s.name),
                    s.low_freq_rms <= 0.03,
                    format!("rms {:.4} <= 0.03", s.low_freq_rms),
                ));
            }
        }
        LawKind::Frozen => {}
    }
    for s in &summaries {
        checks.push(Check::new(
            format!("{} pinched", s.name),
            s.pinched,
            format!("max n_out {:.4} where n_in <= {tol}", s.max_output_near_origin),
        ));
    }
    Ok(checks)
}

/// Purity grid as CSV: first column `|β|²`, header row `R` values.
pub fn purity_map_csv(points: usize) -> String {
    let axis: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let mut out = String::from("beta2\\R");
    for r in &axis {
        let _ = write!(out, ",{r}");
    }
    out.push('\n');
    for b in &axis {
        let _ = write!(out, "{b}");
        for r in &axis {
            let _ = write!(out, ",{:.12}", purity_closed_form(*b, *r));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_purity_map(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Check>> {
    let n = cfg.purity_map.points;
    write_atomic(&out.join("purity_map.csv"), purity_map_csv(n).as_bytes())?;
    write_json(&out.join("purity_map.json"), &json!({ "config": cfg.purity_map }))?;
    let corner = purity_closed_form(0.0, 0.0);
    let half = purity_closed_form(1.0, 0.5);
    let axis = |i: usize| i as f64 / (n - 1) as f64;
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (purity_closed_form(axis(i), axis(j)) - purity_closed_form(axis(i), axis(n - 1 - j))).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::new("purity at (0, 0)", (corner - 1.0).abs() < 1e-12, format!("{corner}")),
        Check::new("purity at (1, 0.5)", (half - 0.5).abs() < 1e-12, format!("{half}")),
        Check::new("R <-> 1-R symmetry", asym < 1e-12, format!("max asymmetry {asym:e}")),
    ])
}

fn rc_report(out: &Path, stem: &str, config: &impl Serialize, outcome: &TaskOutcome) -> Result<()> {
    write_json(
        &out.join(format!("{stem}_report.json")),
        &json!({ "config": config, "report": outcome.report }),
    )?;
    save_checkpoint(&outcome.model, &out.join(format!("{stem}_checkpoint.json")))?;
    write_features(&out.join(format!("{stem}_train_features.csv")), &outcome.train_features)?;
    write_features(&out.join(format!("{stem}_test_features.csv")), &outcome.test_features)
}

pub fn cmd_rc(task: Task, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Check>> {
    let threads = default_threads();
    match task {
        Task::Mnist => {
            let c = &cfg.mnist;
            let outcome = run_mnist(c, threads)?;
            let stem = format!(
                "mnist_{}_feedback_{}",
                c.encoding,
                if c.reservoir.feedback { "on" } else { "off" }
            );
            rc_report(out, &stem, c, &outcome)?;
            let acc = outcome.report.test.accuracy;
            let (lo, hi) = match (c.encoding, c.reservoir.feedback) {
                (_, false) => (0.25, 0.45),
                (Encoding::Quantum, true) => (0.90, 1.0),
                (Encoding::Coherent, true) => (0.55, 0.85),
            };
            Ok(vec![Check::new(
                format!("{stem} test accuracy"),
                (lo..=hi).contains(&acc),
                format!("{acc:.3} in [{lo}, {hi}]"),
            )])
        }
        Task::Entanglement => {
            let c = &cfg.entanglement;
            let outcome = run_entanglement(c, threads)?;
            rc_report(out, "entanglement", c, &outcome)?;
            let acc = outcome.report.test.accuracy;
            Ok(vec![Check::new(
                "entanglement test accuracy",
                acc >= 0.90,
                format!("{acc:.3} >= 0.90"),
            )])
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TomographyReport {
    pub states: Vec<ReconstructionReport>,
    pub mean_fidelity: f64,
    pub min_fidelity: f64,
    pub phi_global_reference: f64,
    pub phi_global_fit: f64,
}

pub fn tomography_report(shots: Shots, seed: u64) -> Result<TomographyReport> {
    let shots = match shots {
        Shots::Exact => TomographyShots::Exact,
        Shots::Sampled(n) => TomographyShots::Finite(n),
    };
    let states = table_fixtures()?
        .iter()
        .enumerate()
        .map(|(k, f)| round_trip(f, shots, seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let n = states.len() as f64;
    let mean_fidelity = states.iter().map(|s| s.fidelity).sum::<f64>() / n;
    let min_fidelity = states.iter().map(|s| s.fidelity).fold(1.0, f64::min);
    let samples: Vec<(f64, num_complex::Complex64)> = states
        .iter()
        .map(|s| (s.reflectivity, num_complex::Complex64::new(s.rho_exp[1][2][0], s.rho_exp[1][2][1])))
        .collect();
    Ok(TomographyReport {
        states,
        mean_fidelity,
        min_fidelity,
        phi_global_reference: PHI_GLOBAL,
        phi_global_fit: fit_global_phase(&samples)?,
    })
}

pub fn cmd_tomography(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Check>> {
    let t = &cfg.tomography;
    let report = tomography_report(t.shots, t.seed)?;
    write_json(&out.join("tomography_report.json"), &json!({ "config": t, "report": report }))?;
    let mut checks = vec![Check::new(
        "phi_global round trip",
        (report.phi_global_fit - PHI_GLOBAL).abs() < 0.05,
        format!("{:.4} vs {PHI_GLOBAL}", report.phi_global_fit),
    )];
    if t.shots == Shots::Exact {
        checks.push(Check::new(
            "exact round-trip fidelity",
            report.min_fidelity >= 0.999,
            format!("min {:.6} >= 0.999", report.min_fidelity),
        ));
    } else {
        checks.push(Check::new(
            "mean fidelity",
            true,
            format!("{:.4} with seed {}", report.mean_fidelity, t.seed),
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qumem").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_reach_the_config() {
        let cli = parse(&["rc", "mnist", "--encoding", "coherent", "--feedback", "off", "--shots", "250"]);
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!(cfg.mnist.encoding, Encoding::Coherent);
        assert!(!cfg.mnist.reservoir.feedback);
        assert_eq!(cfg.mnist.reservoir.shots, Shots::Sampled(250));
        let cli = parse(&["hysteresis", "--law", "lowpass", "--seed", "4"]);
        assert_eq!(resolve_config(&cli).unwrap().hysteresis.law, LawKind::Lowpass);
        assert!(Cli::try_parse_from(["qumem", "rc", "digits"]).is_err());
        assert!(Cli::try_parse_from(["qumem", "tomography", "--shots", "many"]).is_err());
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, r#"{"nope": 1}"#).unwrap();
        let code = |args: Vec<OsString>| main_with_args(args);
        let os = |v: &[&str]| v.iter().map(OsString::from).collect::<Vec<_>>();
        let out = dir.path().join("o");
        let out = out.to_str().unwrap();
        assert_eq!(
            code(os(&["qumem", "purity-map", "--config", bad.to_str().unwrap(), "--out", out])),
            ExitCode::from(2)
        );
        assert_eq!(code(os(&["qumem", "purity-map", "--bogus"])), ExitCode::from(2));
        let missing = dir.path().join("nothing");
        let cfg = dir.path().join("cfg.json");
        std::fs::write(
            &cfg,
            format!(r#"{{"mnist": {{"data": {{"dir": "{}"}}}}}}"#, missing.display()),
        )
        .unwrap();
        assert_eq!(
            code(os(&["qumem", "rc", "mnist", "--config", cfg.to_str().unwrap(), "--out", out])),
            ExitCode::from(3)
        );
        assert_eq!(code(os(&["qumem", "purity-map", "--out", out, "--check"])), ExitCode::SUCCESS);
    }

    #[test]
    fn purity_map_grid() {
        let csv = purity_map_csv(101);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 102);
        assert!(lines.iter().all(|l| l.split(',').count() == 102));
        assert!(lines[1].starts_with("0,1.000000000000"));
        let last: Vec<&str> = lines[101].split(',').collect();
        assert_eq!(last[51], "0.500000000000");
    }

    #[test]
    fn hysteresis_command_writes_panels() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.hysteresis.periods = 2;
        let checks = cmd_hysteresis(&cfg, dir.path()).unwrap();
        let csvs = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
            .count();
        assert_eq!(csvs, 6);
        assert!(dir.path().join("hysteresis_summary.json").is_file());
        assert_eq!(checks.len(), 8);
    }

    #[test]
    fn tomography_command_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.tomography.shots = Shots::Sampled(10_000);
        cmd_tomography(&cfg, a.path()).unwrap();
        cmd_tomography(&cfg, b.path()).unwrap();
        let read = |d: &Path| std::fs::read(d.join("tomography_report.json")).unwrap();
        assert_eq!(read(a.path()), read(b.path()));
        let text = String::from_utf8(read(a.path())).unwrap();
        assert!(text.contains("\"seed\": 5"));
    }

    #[test]
    fn exact_tomography_checks_pass() {
        let dir = tempfile::tempdir().unwrap();
        let checks = cmd_tomography(&ExperimentConfig::default(), dir.path()).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }
}
