//! Closed-loop time-domain simulation of the memristor under a sinusoidal
//! photon-number drive, with a model of the coincidence-counting electronics.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json};
use crate::memristor::{estimate_n_in, MemristorState, UpdateLaw};

/// Drive `⟨n_in(t)⟩ = sin²(π t / T_osc)` sampled every `dt` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub t_osc: f64,
    pub n_periods: usize,
    pub dt: f64,
}

impl DriveConfig {
    /// `dt = T_osc / 1000`.
    pub fn new(t_osc: f64, n_periods: usize) -> Self {
        Self {
            t_osc,
            n_periods,
            dt: t_osc / 1000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_osc > 0.0) || !(self.dt > 0.0) {
            return Err(Error::Config("T_osc and dt must be positive".into()));
        }
        if self.dt > self.t_osc / 200.0 {
            return Err(Error::Config(format!(
                "dt = {} is too coarse for T_osc = {} (need dt <= T_osc/200)",
                self.dt, self.t_osc
            )));
        }
        if self.n_periods == 0 {
            return Err(Error::Config("need at least one drive period".into()));
        }
        Ok(())
    }

    pub fn n_in(&self, t: f64) -> f64 {
        (PI * t / self.t_osc).sin().powi(2)
    }

    pub fn steps_per_period(&self) -> usize {
        (self.t_osc / self.dt).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_period() * self.n_periods
    }
}

/// Photon-counting noise model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// The detector reports the exact expected rate.
    Exact,
    /// Poisson pulse trains smoothed by an RC filter.
    Poisson { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// Coincidence rate for one photon per time slot, counts/s.
    pub max_rate: f64,
    /// RC filter time constant, seconds.
    pub rc: f64,
    pub noise: Noise,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            max_rate: 3e4,
            rc: 0.1,
            noise: Noise::Exact,
        }
    }
}

impl DetectionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.max_rate > 0.0) || !(self.rc > 0.0) {
            return Err(Error::Config("max_rate and rc must be positive".into()));
        }
        Ok(())
    }
}

/// Turns a true count rate into the normalised signal seen by the controller.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectionConfig,
    filtered: f64,
    rng: Option<ChaCha8Rng>,
    last_counts: u64,
}

impl Detector {
    pub fn new(config: DetectionConfig) -> Result<Self> {
        config.validate()?;
        let rng = match config.noise {
            Noise::Exact => None,
            Noise::Poisson { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Ok(Self {
            config,
            filtered: 0.0,
            rng,
            last_counts: 0,
        })
    }

    /// Counts drawn during the most recent call (zero in exact mode).
    pub fn last_counts(&self) -> u64 {
        self.last_counts
    }

    /// Filtered rate estimate in units of `max_rate`, after `dt` seconds at `true_rate`.
    pub fn estimate(&mut self, true_rate: f64, dt: f64) -> Result<f64> {
        if true_rate < 0.0 || true_rate > self.config.max_rate * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(format!(
                "rate {true_rate} outside [0, {}]",
                self.config.max_rate
            )));
        }
        let Some(rng) = self.rng.as_mut() else {
            return Ok(true_rate / self.config.max_rate);
        };
        let mean = true_rate * dt;
        let counts = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::OutOfRange(e.to_string()))?
                .sample(rng) as u64
        } else {
            0
        };
        self.last_counts = counts;
        let instant = counts as f64 / dt;
        self.filtered += (instant - self.filtered) * (1.0 - (-dt / self.config.rc).exp());
        Ok(self.filtered / self.config.max_rate)
    }
}

/// One recorded sample of the loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub n_in: f64,
    pub n_out: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub law: UpdateLaw,
    pub drive: DriveConfig,
    pub detection: DetectionConfig,
    /// Integration window `T` for the windowed law.
    pub window: Option<f64>,
    /// Mean feedback-port counts collected per RC time constant (Poisson mode).
    pub mean_counts_per_rc: Option<f64>,
}

/// Time series of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub meta: TraceMeta,
}

/// Which limit a windowed memristor operates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    LowFreq,
    Intermediate,
    HighFreq,
}

pub fn classify_regime(window: f64, t_osc: f64) -> Result<Regime> {
    if !(window > 0.0) || !(t_osc > 0.0) {
        return Err(Error::OutOfRange("T and T_osc must be positive".into()));
    }
    Ok(if window <= t_osc / 20.0 {
        Regime::LowFreq
    } else if window >= t_osc {
        Regime::HighFreq
    } else {
        Regime::Intermediate
    })
}

/// `⟨n_out⟩ = ⟨n_in⟩ - ⟨n_in⟩²`, the slow-drive limit.
pub fn low_freq_limit(n_in: f64) -> f64 {
    n_in - n_in * n_in
}

/// `⟨n_out⟩ = 0.5⟨n_in⟩`, the fast-drive limit.
pub fn high_freq_limit(n_in: f64) -> f64 {
    0.5 * n_in
}

/// Runs the loop: drive → feedback-port detection → `n_in` estimate → memristor update.
///
/// `memristor` carries the update law. Each step records `n_out = (1 - R)·n_in`
/// with the freshly updated `R`.
pub fn run_closed_loop(drive: &DriveConfig, memristor: MemristorState, detection: &DetectionConfig) -> Result<Trace> {
    drive.validate()?;
    detection.validate()?;
    let window = match memristor.law() {
        UpdateLaw::Windowed { window } => Some(window),
        _ => None,
    };
    if let (Some(window), Noise::Poisson { .. }) = (window, detection.noise) {
        if detection.rc >= window {
            return Err(Error::Config(format!(
                "RC = {} s must be shorter than the integration window T = {window} s",
                detection.rc
            )));
        }
    }
    let mut memristor = memristor;
    let mut detector = Detector::new(*detection)?;
    let steps = drive.total_steps();
    let mut rows = Vec::with_capacity(steps);
    let mut counts = 0u64;
    for k in 1..=steps {
        let t = k as f64 * drive.dt;
        let n_in = drive.n_in(t);
        let r_prev = memristor.reflectivity();
        let rate = n_in * r_prev * detection.max_rate;
        let n_meas = detector.estimate(rate, drive.dt)?;
        counts += detector.last_counts();
        let estimate = estimate_n_in(n_meas, r_prev)?;
        let r = memristor.update(t, estimate)?;
        rows.push(TraceRow {
            t,
            n_in,
            n_out: (1.0 - r) * n_in,
            r,
        });
    }
    let duration = steps as f64 * drive.dt;
    let mean_counts_per_rc = match detection.noise {
        Noise::Poisson { .. } => Some(counts as f64 / duration * detection.rc),
        Noise::Exact => None,
    };
    Ok(Trace {
        rows,
        meta: TraceMeta {
            law: memristor.law(),
            drive: *drive,
            detection: *detection,
            window,
            mean_counts_per_rc,
        },
    })
}

/// Loop in which the controller sets `R = ⟨n_in⟩` directly and only the
/// phase shifters' first-order response (cutoff `f_cut`) provides memory.
pub fn run_lpf_loop(drive: &DriveConfig, f_cut: f64, detection: &DetectionConfig) -> Result<Trace> {
    run_closed_loop(drive, MemristorState::lowpass(f_cut)?, detection)
}

impl Trace {
    /// Rows after discarding the first `periods` drive periods.
    pub fn after_warmup(&self, periods: usize) -> &[TraceRow] {
        let skip = (self.meta.drive.steps_per_period() * periods).min(self.rows.len());
        &self.rows[skip..]
    }

    /// Steady-state rows: everything after one warm-up period (or all rows for a single-period run).
    pub fn steady_state(&self) -> &[TraceRow] {
        if self.meta.drive.n_periods > 1 {
            self.after_warmup(1)
        } else {
            &self.rows
        }
    }

    /// RMS of `n_out - f(n_in)` over the steady-state rows.
    pub fn rms_deviation(&self, f: impl Fn(f64) -> f64) -> f64 {
        rms(self.steady_state(), f)
    }

    pub fn low_freq_rms(&self) -> f64 {
        self.rms_deviation(low_freq_limit)
    }

    pub fn high_freq_rms(&self) -> f64 {
        self.rms_deviation(high_freq_limit)
    }

    /// Largest `n_out` seen while `n_in <= threshold` in steady state.
    pub fn max_output_near_origin(&self, threshold: f64) -> f64 {
        self.steady_state()
            .iter()
            .filter(|r| r.n_in <= threshold)
            .map(|r| r.n_out)
            .fold(0.0, f64::max)
    }

    /// Pinched when `n_out <= tol` wherever `n_in <= tol`.
    pub fn is_pinched(&self, tol: f64) -> bool {
        self.max_output_near_origin(tol) <= tol
    }

    /// Area enclosed by the `(n_in, n_out)` orbit over the last full period (shoelace).
    pub fn orbit_area(&self) -> f64 {
        let per = self.meta.drive.steps_per_period();
        let n = self.rows.len();
        if n < per || per < 3 {
            return 0.0;
        }
        let last = &self.rows[n - per..];
        let mut twice = 0.0;
        for (i, a) in last.iter().enumerate() {
            let b = &last[(i + 1) % per];
            twice += a.n_in * b.n_out - b.n_in * a.n_out;
        }
        0.5 * twice.abs()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,n_in,n_out,R\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:.6},{:.9},{:.9},{:.9}", r.t, r.n_in, r.n_out, r.r);
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.json` (metadata) into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_atomic(&dir.join(format!("{stem}.csv")), self.to_csv().as_bytes())?;
        write_json(&dir.join(format!("{stem}.json")), &self.meta)
    }
}

fn rms(rows: &[TraceRow], f: impl Fn(f64) -> f64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let sum: f64 = rows.iter().map(|r| (r.n_out - f(r.n_in)).powi(2)).sum();
    (sum / rows.len() as f64).sqrt()
}
