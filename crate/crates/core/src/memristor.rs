//! The photonic quantum memristor: a tunable beam splitter whose reflectivity
//! is driven by photon detection at its feedback port.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{lift_unitary, CMatrix, CVector, ModeUnitary, OccupationBasis, QuantumState, STATE_TOL};

/// Lower bound kept on the reflectivity so the `n_meas / R` estimator stays finite.
pub const R_MIN: f64 = 1e-3;

/// Vacuum/one-photon qubit `α|0⟩ + β|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitInput {
    alpha: Complex64,
    beta: Complex64,
}

impl QubitInput {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("|α|² + |β|² = {norm}")));
        }
        Ok(Self { alpha, beta })
    }

    /// Real non-negative amplitudes with `|β|² = beta2`.
    pub fn from_beta2(beta2: f64) -> Result<Self> {
        check_unit("|β|²", beta2)?;
        Ok(Self {
            alpha: Complex64::from((1.0 - beta2).sqrt()),
            beta: Complex64::from(beta2.sqrt()),
        })
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    /// `⟨n_in⟩ = |β|²`.
    pub fn mean_photons(&self) -> f64 {
        self.beta.norm_sqr()
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

/// Reflectivity of an ideal Mach–Zehnder with internal phase `θ`.
pub fn mz_reflectivity(theta: f64) -> f64 {
    0.5 * (1.0 + theta.cos())
}

/// `⟨n_out⟩ = (1 - R)⟨n_in⟩` at the output port.
pub fn output_expectation(n_in: f64, reflectivity: f64) -> Result<f64> {
    check_unit("n_in", n_in)?;
    check_unit("R", reflectivity)?;
    Ok((1.0 - reflectivity) * n_in)
}

/// Directional coupler that leaks a fraction `η` into the wrong port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakyCoupler {
    eta: f64,
}

impl LeakyCoupler {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::OutOfRange(format!("leakage factor {eta} outside [0, 0.5)")));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// `⟨n_out⟩ = [ηR + (1-η)(1-R)]⟨n_in⟩`.
pub fn leaky_output_expectation(n_in: f64, reflectivity: f64, coupler: LeakyCoupler) -> Result<f64> {
    check_unit("n_in", n_in)?;
    check_unit("R", reflectivity)?;
    let eta = coupler.eta;
    Ok((eta * reflectivity + (1.0 - eta) * (1.0 - reflectivity)) * n_in)
}

/// Joint state of output mode C and feedback mode D after the beam splitter,
/// for the single-rail input `α|0⟩ + β|1⟩` on the input port.
///
/// Basis: vacuum-augmented two-mode basis `(0,0), (1,0), (0,1)` over `(C, D)`.
pub fn joint_state_single_rail(q: QubitInput, reflectivity: f64) -> Result<QuantumState> {
    check_unit("R", reflectivity)?;
    let basis = Arc::new(OccupationBasis::up_to(2, 1)?);
    let mut amps = CVector::zeros(3);
    amps[basis.index_of(&[0, 0]).expect("vacuum")] = q.alpha;
    amps[basis.index_of(&[1, 0]).expect("one photon")] = q.beta;
    let input = QuantumState::pure(basis.clone(), amps)?;
    let lifted = lift_unitary(&ModeUnitary::coupler(reflectivity), &basis)?;
    input.apply(&lifted)
}

/// Joint state of modes A, B, C for the dual-rail qubit `α|1⟩_A + β|1⟩_B`,
/// with the beam splitter acting between B and the feedback mode C.
///
/// Basis: the one-photon, three-mode basis.
pub fn joint_state_dual_rail(q: QubitInput, reflectivity: f64) -> Result<QuantumState> {
    check_unit("R", reflectivity)?;
    let basis = Arc::new(OccupationBasis::enumerate(3, 1)?);
    let mut amps = CVector::zeros(3);
    amps[basis.index_of(&[1, 0, 0]).expect("mode A")] = q.alpha;
    amps[basis.index_of(&[0, 1, 0]).expect("mode B")] = q.beta;
    let input = QuantumState::pure(basis.clone(), amps)?;
    let u = ModeUnitary::embed(3, 1, 2, &ModeUnitary::coupler(reflectivity))?;
    input.apply(&lift_unitary(&u, &basis)?)
}

/// Reduced state of the output mode, in the basis `|0⟩, |1⟩`:
/// `[[|α|² + |β|²R, αβ̄√(1-R)], [ᾱβ√(1-R), |β|²(1-R)]]`.
pub fn output_state_single_rail(q: QubitInput, reflectivity: f64) -> Result<QuantumState> {
    check_unit("R", reflectivity)?;
    let (a, b) = (q.alpha, q.beta);
    let b2 = b.norm_sqr();
    let t = (1.0 - reflectivity).sqrt();
    let coh = a * b.conj() * t;
    let rho = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::from(a.norm_sqr() + b2 * reflectivity),
            coh,
            coh.conj(),
            Complex64::from(b2 * (1.0 - reflectivity)),
        ],
    );
    QuantumState::density(Arc::new(OccupationBasis::up_to(1, 1)?), rho)
}

/// Reduced dual-rail state of modes A, B in the basis `|00⟩, |10⟩, |01⟩`:
/// `diag(|β|²R, |α|², |β|²(1-R))` with coherence `αβ̄√(1-R)` between the
/// two one-photon states.
pub fn output_state_dual_rail(q: QubitInput, reflectivity: f64) -> Result<QuantumState> {
    check_unit("R", reflectivity)?;
    let (a, b) = (q.alpha, q.beta);
    let b2 = b.norm_sqr();
    let coh = a * b.conj() * (1.0 - reflectivity).sqrt();
    let zero = Complex64::from(0.0);
    let rho = CMatrix::from_row_slice(
        3,
        3,
        &[
            Complex64::from(b2 * reflectivity),
            zero,
            zero,
            zero,
            Complex64::from(a.norm_sqr()),
            coh,
            zero,
            coh.conj(),
            Complex64::from(b2 * (1.0 - reflectivity)),
        ],
    );
    QuantumState::density(Arc::new(OccupationBasis::up_to(2, 1)?), rho)
}

/// `1 - 2|β|⁴R(1-R)`: the purity of the single-rail output state.
pub fn purity_closed_form(beta2: f64, reflectivity: f64) -> f64 {
    1.0 - 2.0 * beta2 * beta2 * reflectivity * (1.0 - reflectivity)
}

/// `1 - 2|β|²R(1 - |β|²R)`: the purity of the dual-rail output state.
pub fn purity_dual_rail_closed_form(beta2: f64, reflectivity: f64) -> f64 {
    let p = beta2 * reflectivity;
    1.0 - 2.0 * p * (1.0 - p)
}

/// Recovers `⟨n_in⟩` from the mean count at the feedback port, `n_meas / R_prev`,
/// clamped to `[0, 1]`.
pub fn estimate_n_in(n_meas: f64, r_prev: f64) -> Result<f64> {
    if !(r_prev >= R_MIN) {
        return Err(Error::OutOfRange(format!("previous reflectivity {r_prev} below {R_MIN}")));
    }
    Ok((n_meas / r_prev).clamp(0.0, 1.0))
}

/// How the reflectivity responds to the estimated input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum UpdateLaw {
    /// `R = 0.5 + (1/T)∫_{t-T}^{t} (n_in - 0.5) dτ` over a sliding window of width `T` seconds.
    Windowed { window: f64 },
    /// `R` tracks `n_in` through a first-order low-pass with cutoff `f_cut` Hz.
    LowPass { f_cut: f64 },
    /// `R` never changes.
    Frozen,
}

/// Reflectivity plus whatever history its update law needs.
#[derive(Debug, Clone, PartialEq)]
pub struct MemristorState {
    reflectivity: f64,
    law: UpdateLaw,
    // (timestamp, n_in, Δt) of each sample still inside the window
    samples: VecDeque<(f64, f64, f64)>,
    integral: f64,
    last_time: f64,
}

impl MemristorState {
    /// Starts at `R = 0.5` with the clock at `t = 0`.
    pub fn new(law: UpdateLaw) -> Result<Self> {
        Self::with_reflectivity(law, 0.5)
    }

    pub fn with_reflectivity(law: UpdateLaw, reflectivity: f64) -> Result<Self> {
        match law {
            UpdateLaw::Windowed { window } if !(window > 0.0) => {
                return Err(Error::Config(format!("integration window {window} must be positive")))
            }
            UpdateLaw::LowPass { f_cut } if !(f_cut > 0.0) => {
                return Err(Error::Config(format!("cutoff frequency {f_cut} must be positive")))
            }
            _ => {}
        }
        check_unit("R", reflectivity)?;
        Ok(Self {
            reflectivity: reflectivity.max(R_MIN),
            law,
            samples: VecDeque::new(),
            integral: 0.0,
            last_time: 0.0,
        })
    }

    pub fn windowed(window: f64) -> Result<Self> {
        Self::new(UpdateLaw::Windowed { window })
    }

    pub fn lowpass(f_cut: f64) -> Result<Self> {
        Self::new(UpdateLaw::LowPass { f_cut })
    }

    pub fn frozen(reflectivity: f64) -> Result<Self> {
        Self::with_reflectivity(UpdateLaw::Frozen, reflectivity)
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn law(&self) -> UpdateLaw {
        self.law
    }

    /// Number of samples currently held in the integration window.
    pub fn window_len(&self) -> usize {
        self.samples.len()
    }

    /// Clears history and returns to `R = 0.5` at `t = 0` (frozen devices keep their `R`).
    pub fn reset(&mut self) {
        self.samples.clear();
        self.integral = 0.0;
        self.last_time = 0.0;
        if self.law != UpdateLaw::Frozen {
            self.reflectivity = 0.5;
        }
    }

    /// Feeds the sample `n_in` observed at time `t` and returns the new `R`.
    pub fn update(&mut self, t: f64, n_in: f64) -> Result<f64> {
        if t < self.last_time {
            return Err(Error::OutOfRange(format!(
                "timestamp {t} precedes previous sample at {}",
                self.last_time
            )));
        }
        let dt = t - self.last_time;
        self.last_time = t;
        match self.law {
            UpdateLaw::Windowed { window } => self.update_windowed(t, n_in, dt, window),
            UpdateLaw::LowPass { f_cut } => {
                let gain = 1.0 - (-2.0 * std::f64::consts::PI * f_cut * dt).exp();
                self.reflectivity += (n_in - self.reflectivity) * gain;
            }
            UpdateLaw::Frozen => {}
        }
        self.reflectivity = self.reflectivity.clamp(R_MIN, 1.0);
        Ok(self.reflectivity)
    }

    fn update_windowed(&mut self, t: f64, n_in: f64, dt: f64, window: f64) {
        self.samples.push_back((t, n_in, dt));
        self.integral += (n_in - 0.5) * dt;
        let horizon = t - window + 1e-9 * window;
        while let Some(&(ts, n, d)) = self.samples.front() {
            if ts > horizon {
                break;
            }
            self.integral -= (n - 0.5) * d;
            self.samples.pop_front();
        }
        if self.samples.len().is_multiple_of(1024) {
            // resum now and then so the running total does not drift
            self.integral = self.samples.iter().map(|&(_, n, d)| (n - 0.5) * d).sum();
        }
        self.reflectivity = 0.5 + self.integral / window;
    }
}

/// Doped/undoped semiconductor junction memristor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalMemristorState {
    /// Doped-region thickness, metres.
    pub w: f64,
    /// Junction thickness, metres.
    pub d: f64,
    pub r_low: f64,
    pub r_high: f64,
    /// Ion mobility constant.
    pub mu: f64,
}

impl ClassicalMemristorState {
    pub fn new(w: f64, d: f64, r_low: f64, r_high: f64, mu: f64) -> Result<Self> {
        if !(d > 0.0) || !(0.0..=d).contains(&w) {
            return Err(Error::OutOfRange(format!("need 0 <= w <= D, got w={w}, D={d}")));
        }
        if !(r_low < r_high) {
            return Err(Error::OutOfRange(format!("need R_low < R_high, got {r_low} >= {r_high}")));
        }
        Ok(Self { w, d, r_low, r_high, mu })
    }

    pub fn resistance(&self) -> f64 {
        let x = self.w / self.d;
        self.r_low * x + self.r_high * (1.0 - x)
    }

    /// Applies current `i` for `dt` seconds: returns the voltage at the start
    /// of the step and advances `w`, clamped to `[0, D]`.
    pub fn step(&mut self, i: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::OutOfRange(format!("time step {dt} must be positive")));
        }
        let v = self.resistance() * i;
        self.w = (self.w + self.mu * self.r_high / self.d * i * dt).clamp(0.0, self.d);
        Ok(v)
    }
}
