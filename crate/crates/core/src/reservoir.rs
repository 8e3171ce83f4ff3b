//! Memristor-based quantum reservoir: encode → random mesh → memristor bank
//! → random mesh → Fock-basis measurement, with the memristors' reflectivities
//! carrying memory from one input to the next.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::{
    lift_unitary, sample_counts_with, CMatrix, CVector, ModeUnitary, OccupationBasis, QuantumState, Representation,
};
use crate::memristor::{estimate_n_in, MemristorState, UpdateLaw};

/// How output probabilities are obtained at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Sampled(u64),
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => write!(f, "exact"),
            Shots::Sampled(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for Shots {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(n) if n > 0 => Ok(Shots::Sampled(n)),
            _ => Err(Error::Config(format!("shots must be 'exact' or a positive integer, got '{s}'"))),
        }
    }
}

impl Serialize for Shots {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Sampled(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("shots must be positive")),
            Raw::Count(n) => Ok(Shots::Sampled(n)),
            Raw::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Reservoir hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReservoirConfig {
    pub modes: usize,
    pub photons: usize,
    pub mesh_seed: u64,
    pub shots: Shots,
    pub shots_seed: u64,
    /// Memristor memory length in steps.
    pub window: usize,
    /// When false the memristors stay at `R = 0.5`.
    pub feedback: bool,
    /// Keep memristor history across sequences instead of resetting per sequence.
    pub carry_over: bool,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            modes: 9,
            photons: 3,
            mesh_seed: 1,
            shots: Shots::Sampled(1000),
            shots_seed: 7,
            window: 12,
            feedback: true,
            carry_over: false,
        }
    }
}

impl ReservoirConfig {
    pub fn memristors(&self) -> usize {
        self.modes / 3
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes < 3 {
            return Err(Error::Config(format!("need at least 3 modes, got {}", self.modes)));
        }
        if self.photons == 0 {
            return Err(Error::Config("need at least one photon".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("memristor window must be at least one step".into()));
        }
        Ok(())
    }
}

/// Where an encoded state came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Quantum,
    /// All-zero vector replaced by the first basis state.
    ZeroFallback,
    CoherentMixture,
}

#[derive(Debug, Clone)]
pub struct EncodedInput {
    pub state: QuantumState,
    pub provenance: Provenance,
}

/// `|q⟩ = Σ_j v_j |j⟩ / ‖v‖₂` on the first `n` basis states.
///
/// An all-zero vector maps to the first basis state, flagged as a fallback.
pub fn amplitude_encode(v: &[f64], basis: &Arc<OccupationBasis>) -> Result<EncodedInput> {
    if v.len() > basis.len() {
        return Err(Error::InvalidDimension(format!(
            "vector of length {} does not fit in {} basis states",
            v.len(),
            basis.len()
        )));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(EncodedInput {
            state: QuantumState::basis_state(basis.clone(), 0)?,
            provenance: Provenance::ZeroFallback,
        });
    }
    let mut amps = CVector::zeros(basis.len());
    for (a, x) in amps.iter_mut().zip(v) {
        *a = Complex64::from(x / norm);
    }
    Ok(EncodedInput {
        state: QuantumState::pure(basis.clone(), amps)?,
        provenance: Provenance::Quantum,
    })
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 1..n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// Coherent state `e^{-k²/2} Σ_n kⁿ/√n! |n⟩` truncated to `d` basis states
/// and renormalised. Also returns the norm² kept by the truncation.
pub fn truncated_coherent(k: f64, d: usize) -> (CVector, f64) {
    let mut v = CVector::zeros(d);
    if k == 0.0 {
        v[0] = Complex64::from(1.0);
        return (v, 1.0);
    }
    let lf = ln_factorials(d);
    let logs: Vec<f64> = (0..d).map(|n| -k * k / 2.0 + n as f64 * k.ln() - 0.5 * lf[n]).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (a, l) in v.iter_mut().zip(&logs) {
        *a = Complex64::from((l - top).exp());
    }
    let kept_log = 2.0 * top + v.norm_squared().ln();
    let norm = v.norm();
    v /= Complex64::from(norm);
    (v, kept_log.exp().min(1.0))
}

/// Mixture `C Σ_j v_j |ψ_j⟩⟨ψ_j|` of truncated coherent states with amplitude
/// `k = j`, normalised to unit trace after truncation.
pub fn coherent_encode(v: &[f64], basis: &Arc<OccupationBasis>) -> Result<EncodedInput> {
    if let Some(x) = v.iter().find(|x| **x < 0.0 || !x.is_finite()) {
        return Err(Error::OutOfRange(format!("mixture weight {x} is negative")));
    }
    let d = basis.len();
    let mut parts = Vec::new();
    for (j, &w) in v.iter().enumerate() {
        if w > 0.0 {
            let (psi, kept) = truncated_coherent(j as f64, d);
            let weight = w * kept;
            if weight > 0.0 {
                parts.push((weight, psi));
            }
        }
    }
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    if parts.is_empty() || !(total > 0.0) {
        return Err(Error::InvalidState("coherent mixture has no weight".into()));
    }
    for (w, _) in parts.iter_mut() {
        *w /= total;
    }
    Ok(EncodedInput {
        state: QuantumState::ensemble(basis.clone(), parts)?,
        provenance: Provenance::CoherentMixture,
    })
}

/// Rectangular nearest-neighbour mesh of depth `m`; coupler `k` in layer order
/// gets `(R, φ)` from `params`.
pub fn mesh_from_parameters(m: usize, params: &[(f64, f64)]) -> Result<ModeUnitary> {
    if m < 2 {
        return Err(Error::InvalidDimension(format!("a mesh needs at least 2 modes, got {m}")));
    }
    let slots = mesh_slots(m);
    if params.len() != slots.len() {
        return Err(Error::DimensionMismatch {
            expected: slots.len(),
            actual: params.len(),
        });
    }
    let mut u = ModeUnitary::identity(m);
    for (&a, &(r, phi)) in slots.iter().zip(params) {
        let layer = ModeUnitary::embed(m, a, a + 1, &ModeUnitary::phased_coupler(r, phi))?;
        u = u.then(&layer);
    }
    Ok(u)
}

/// First mode of every coupler in the mesh, layer by layer.
fn mesh_slots(m: usize) -> Vec<usize> {
    (0..m).flat_map(|layer| (layer % 2..m - 1).step_by(2)).collect()
}

/// Random mesh with `R ~ U[0,1]` and `φ ~ U[0, 2π)` per coupler.
pub fn build_mesh(m: usize, seed: u64) -> Result<ModeUnitary> {
    if m < 2 {
        return Err(Error::InvalidDimension(format!("a mesh needs at least 2 modes, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<(f64, f64)> = mesh_slots(m)
        .iter()
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>() * std::f64::consts::TAU))
        .collect();
    mesh_from_parameters(m, &params)
}

/// Action of a two-mode unitary on modes `(a, b)` of a Fock basis, stored as
/// the groups of basis states it mixes.
#[derive(Debug, Clone)]
struct TwoModeAction {
    a: usize,
    b: usize,
    // indices ordered by decreasing occupation of mode a; group photon count = len - 1
    groups: Vec<Vec<usize>>,
    max_photons: usize,
}

impl TwoModeAction {
    fn new(basis: &OccupationBasis, a: usize, b: usize) -> Self {
        let mut map: std::collections::HashMap<Vec<u8>, Vec<(u8, usize)>> = std::collections::HashMap::new();
        for (i, occ) in basis.states().enumerate() {
            let mut rest = occ.to_vec();
            let total = rest[a] + rest[b];
            rest[a] = 0;
            rest[b] = total;
            map.entry(rest).or_default().push((occ[a], i));
        }
        let mut groups: Vec<Vec<usize>> = map
            .into_values()
            .map(|mut g| {
                g.sort_by_key(|x| std::cmp::Reverse(x.0));
                g.into_iter().map(|(_, i)| i).collect()
            })
            .filter(|g: &Vec<usize>| g.len() > 1)
            .collect();
        groups.sort();
        let max_photons = groups.iter().map(|g| g.len() - 1).max().unwrap_or(0);
        Self { a, b, groups, max_photons }
    }

    /// Lifted blocks for each photon number `0..=max_photons`.
    fn blocks(&self, u: &ModeUnitary) -> Result<Vec<CMatrix>> {
        (0..=self.max_photons)
            .map(|n| lift_unitary(u, &OccupationBasis::enumerate(2, n)?))
            .collect()
    }

    fn apply(&self, blocks: &[CMatrix], v: &mut CVector) {
        let mut scratch = [Complex64::from(0.0); 8];
        for g in &self.groups {
            let blk = &blocks[g.len() - 1];
            for (r, slot) in scratch.iter_mut().enumerate().take(g.len()) {
                *slot = g.iter().enumerate().map(|(c, &idx)| blk[(r, c)] * v[idx]).sum();
            }
            for (r, &idx) in g.iter().enumerate() {
                v[idx] = scratch[r];
            }
        }
    }
}

fn apply_dense(u: &CMatrix, v: &CVector) -> CVector {
    let mut out = CVector::zeros(u.nrows());
    for (j, x) in v.iter().enumerate() {
        if *x != Complex64::from(0.0) {
            out.axpy(*x, &u.column(j), Complex64::from(1.0));
        }
    }
    out
}

fn components(state: &QuantumState) -> Vec<(f64, CVector)> {
    match state.representation() {
        Representation::Pure(v) => vec![(1.0, v.clone())],
        Representation::Ensemble(parts) => parts.clone(),
        Representation::Density(rho) => {
            // spectral decomposition into pure components
            let eig = nalgebra::SymmetricEigen::new((rho + rho.adjoint()) * Complex64::from(0.5));
            eig.eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &l)| l > 1e-14)
                .map(|(i, &l)| (l, eig.eigenvectors.column(i).into_owned()))
                .collect()
        }
    }
}

fn probabilities(parts: &[(f64, CVector)], d: usize) -> Vec<f64> {
    let mut probs = vec![0.0; d];
    for (w, v) in parts {
        for (p, z) in probs.iter_mut().zip(v.iter()) {
            *p += w * z.norm_sqr();
        }
    }
    probs
}

/// Output of one reservoir step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Fock-basis probabilities after the output mesh (empty if not requested).
    pub probs: Vec<f64>,
    /// Mean photon number on each feedback rail, as used by the update law.
    pub feedback: Vec<f64>,
}

/// A running reservoir instance.
#[derive(Debug, Clone)]
pub struct Reservoir {
    config: ReservoirConfig,
    basis: Arc<OccupationBasis>,
    mesh_in: ModeUnitary,
    mesh_out: ModeUnitary,
    u_in: CMatrix,
    u_out: CMatrix,
    rails: Vec<TwoModeAction>,
    feedback_occupation: Vec<Vec<f64>>,
    memristors: Vec<MemristorState>,
    rng: ChaCha8Rng,
    step_index: u64,
}

impl Reservoir {
    pub fn new(config: ReservoirConfig) -> Result<Self> {
        config.validate()?;
        let basis = Arc::new(OccupationBasis::enumerate(config.modes, config.photons)?);
        let mesh_in = build_mesh(config.modes, config.mesh_seed)?;
        let mesh_out = build_mesh(config.modes, config.mesh_seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?;
        let u_in = lift_unitary(&mesh_in, &basis)?;
        let u_out = lift_unitary(&mesh_out, &basis)?;
        let m_count = config.memristors();
        let rails = (0..m_count)
            .map(|i| TwoModeAction::new(&basis, 3 * i + 1, 3 * i + 2))
            .collect();
        let feedback_occupation = (0..m_count)
            .map(|i| basis.states().map(|occ| f64::from(occ[3 * i + 2])).collect())
            .collect();
        let memristors = Self::fresh_memristors(&config)?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.shots_seed),
            config,
            basis,
            mesh_in,
            mesh_out,
            u_in,
            u_out,
            rails,
            feedback_occupation,
            memristors,
            step_index: 0,
        })
    }

    fn fresh_memristors(config: &ReservoirConfig) -> Result<Vec<MemristorState>> {
        (0..config.memristors())
            .map(|_| {
                if config.feedback {
                    MemristorState::new(UpdateLaw::Windowed {
                        window: config.window as f64,
                    })
                } else {
                    MemristorState::frozen(0.5)
                }
            })
            .collect()
    }

    pub fn config(&self) -> &ReservoirConfig {
        &self.config
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }

    pub fn mesh_in(&self) -> &ModeUnitary {
        &self.mesh_in
    }

    pub fn mesh_out(&self) -> &ModeUnitary {
        &self.mesh_out
    }

    pub fn reflectivities(&self) -> Vec<f64> {
        self.memristors.iter().map(MemristorState::reflectivity).collect()
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    /// Overrides the memristor bank, e.g. to freeze it at chosen reflectivities.
    pub fn set_memristors(&mut self, memristors: Vec<MemristorState>) -> Result<()> {
        if memristors.len() != self.config.memristors() {
            return Err(Error::DimensionMismatch {
                expected: self.config.memristors(),
                actual: memristors.len(),
            });
        }
        self.memristors = memristors;
        Ok(())
    }

    /// Restarts the sampling RNG on an independent stream, so examples can be
    /// processed in any order or on any thread with the same draws.
    pub fn set_stream(&mut self, stream: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(self.config.shots_seed);
        self.rng.set_stream(stream);
    }

    /// Clears memristor history and the step counter. The sampling RNG keeps running.
    pub fn reset(&mut self) -> Result<()> {
        self.memristors = Self::fresh_memristors(&self.config)?;
        self.step_index = 0;
        Ok(())
    }

    /// Applies every memristor's Mach–Zehnder between its through and feedback
    /// rails. The feedback rail then continues into the output mesh, so the map
    /// is unitary. Returns the new state and the mean photon number on each
    /// feedback rail.
    pub fn memristor_layer(&self, state: &QuantumState) -> Result<(QuantumState, Vec<f64>)> {
        self.memristor_layer_at(state, &self.reflectivities())
    }

    /// As [`Reservoir::memristor_layer`] with explicit reflectivities.
    pub fn memristor_layer_at(&self, state: &QuantumState, reflectivities: &[f64]) -> Result<(QuantumState, Vec<f64>)> {
        if reflectivities.len() != self.rails.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rails.len(),
                actual: reflectivities.len(),
            });
        }
        if state.dim() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                actual: state.dim(),
            });
        }
        let blocks = self.layer_blocks(reflectivities)?;
        let next = match state.representation() {
            Representation::Pure(v) => {
                let mut v = v.clone();
                self.apply_layer(&blocks, &mut v);
                Representation::Pure(v)
            }
            Representation::Ensemble(parts) => Representation::Ensemble(
                parts
                    .iter()
                    .map(|(w, v)| {
                        let mut v = v.clone();
                        self.apply_layer(&blocks, &mut v);
                        (*w, v)
                    })
                    .collect(),
            ),
            Representation::Density(rho) => {
                let layer = self.layer_unitary_at(reflectivities)?;
                let lifted = lift_unitary(&layer, &self.basis)?;
                Representation::Density(&lifted * rho * lifted.adjoint())
            }
        };
        let next = QuantumState::from_parts(self.basis.clone(), next);
        let probs = next.fock_probabilities();
        let feedback = self.feedback_means(&probs);
        Ok((next, feedback))
    }

    /// The memristor layer as a mode unitary.
    pub fn layer_unitary(&self) -> Result<ModeUnitary> {
        self.layer_unitary_at(&self.reflectivities())
    }

    fn layer_unitary_at(&self, reflectivities: &[f64]) -> Result<ModeUnitary> {
        let mut u = ModeUnitary::identity(self.config.modes);
        for (rail, &r) in self.rails.iter().zip(reflectivities) {
            let mz = ModeUnitary::embed(self.config.modes, rail.a, rail.b, &ModeUnitary::coupler(r))?;
            u = u.then(&mz);
        }
        Ok(u)
    }

    fn layer_blocks(&self, reflectivities: &[f64]) -> Result<Vec<Vec<CMatrix>>> {
        self.rails
            .iter()
            .zip(reflectivities)
            .map(|(rail, &r)| rail.blocks(&ModeUnitary::coupler(r)))
            .collect()
    }

    fn apply_layer(&self, blocks: &[Vec<CMatrix>], v: &mut CVector) {
        for (rail, blk) in self.rails.iter().zip(blocks) {
            rail.apply(blk, v);
        }
    }

    fn feedback_means(&self, probs: &[f64]) -> Vec<f64> {
        self.feedback_occupation
            .iter()
            .map(|occ| occ.iter().zip(probs).map(|(n, p)| n * p).sum())
            .collect()
    }

    fn empirical(&mut self, probs: &[f64], shots: u64) -> Result<Vec<f64>> {
        let total: f64 = probs.iter().sum();
        let normalised: Vec<f64> = probs.iter().map(|p| (p / total).max(0.0)).collect();
        let counts = sample_counts_with(&normalised, shots, &mut self.rng)?;
        Ok(counts.iter().map(|&c| c as f64 / shots as f64).collect())
    }

    /// One input through the reservoir. With `with_output == false` the output
    /// mesh and its measurement are skipped, only the memristors advance.
    fn advance(&mut self, mid: Vec<(f64, CVector)>, with_output: bool) -> Result<StepOutput> {
        let d = self.basis.len();
        let blocks = self.layer_blocks(&self.reflectivities())?;
        let mut mid = mid;
        for (_, v) in mid.iter_mut() {
            self.apply_layer(&blocks, v);
        }
        let mid_probs = probabilities(&mid, d);
        let feedback = match self.config.shots {
            Shots::Exact => self.feedback_means(&mid_probs),
            Shots::Sampled(n) => {
                let freq = self.empirical(&mid_probs, n)?;
                self.feedback_means(&freq)
            }
        };
        let probs = if with_output {
            let out: Vec<(f64, CVector)> = mid.iter().map(|(w, v)| (*w, &self.u_out * v)).collect();
            let exact = probabilities(&out, d);
            match self.config.shots {
                Shots::Exact => exact,
                Shots::Sampled(n) => self.empirical(&exact, n)?,
            }
        } else {
            Vec::new()
        };
        self.step_index += 1;
        let t = self.step_index as f64;
        for (mem, fb) in self.memristors.iter_mut().zip(&feedback) {
            let estimate = estimate_n_in(*fb, mem.reflectivity())?;
            mem.update(t, estimate)?;
        }
        Ok(StepOutput { probs, feedback })
    }

    fn encode_in(&self, x: &EncodedInput) -> Result<Vec<(f64, CVector)>> {
        if x.state.dim() != self.basis.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                actual: x.state.dim(),
            });
        }
        Ok(components(&x.state)
            .into_iter()
            .map(|(w, v)| (w, apply_dense(&self.u_in, &v)))
            .collect())
    }

    /// Feeds one input and returns the output probabilities and feedback readings.
    pub fn step(&mut self, x: &EncodedInput) -> Result<StepOutput> {
        let mid = self.encode_in(x)?;
        self.advance(mid, true)
    }

    /// Feeds a sequence and returns the probabilities after the last input.
    /// Memristors are reset first unless `carry_over` is set.
    pub fn run_sequence(&mut self, inputs: &[EncodedInput]) -> Result<Vec<f64>> {
        let Some((last, rest)) = inputs.split_last() else {
            return Err(Error::InvalidDimension("empty input sequence".into()));
        };
        if !self.config.carry_over {
            self.reset()?;
        }
        for x in rest {
            let mid = self.encode_in(x)?;
            self.advance(mid, false)?;
        }
        let mid = self.encode_in(last)?;
        Ok(self.advance(mid, true)?.probs)
    }

    /// Feeds `copies` identical copies of `x`; returns the final probabilities.
    pub fn run_repeated(&mut self, x: &EncodedInput, copies: usize) -> Result<Vec<f64>> {
        if copies == 0 {
            return Err(Error::InvalidDimension("need at least one copy".into()));
        }
        if !self.config.carry_over {
            self.reset()?;
        }
        let mid = self.encode_in(x)?;
        for _ in 1..copies {
            self.advance(mid.clone(), false)?;
        }
        Ok(self.advance(mid, true)?.probs)
    }
}

fn haar_vector(dim: usize, rng: &mut ChaCha8Rng) -> CVector {
    let v = CVector::from_fn(dim, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let norm = v.norm();
    v / Complex64::from(norm)
}

fn embed(basis: &Arc<OccupationBasis>, v: &CVector) -> Result<QuantumState> {
    let mut amps = CVector::zeros(basis.len());
    amps.rows_mut(0, v.len()).copy_from(v);
    QuantumState::pure(basis.clone(), amps)
}

fn check_local_dim(d_loc: usize, basis: &OccupationBasis) -> Result<()> {
    if d_loc == 0 || d_loc * d_loc > basis.len() {
        return Err(Error::InvalidDimension(format!(
            "local dimension {d_loc} squared exceeds {} basis states",
            basis.len()
        )));
    }
    Ok(())
}

/// Haar-random pure state on `C^{d_loc} ⊗ C^{d_loc}`, embedded in the first `d_loc²` basis states.
pub fn sample_entangled(d_loc: usize, basis: &Arc<OccupationBasis>, seed: u64) -> Result<QuantumState> {
    check_local_dim(d_loc, basis)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    embed(basis, &haar_vector(d_loc * d_loc, &mut rng))
}

/// Product of two independent Haar-random `d_loc`-dimensional states.
pub fn sample_separable(d_loc: usize, basis: &Arc<OccupationBasis>, seed: u64) -> Result<QuantumState> {
    check_local_dim(d_loc, basis)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = haar_vector(d_loc, &mut rng);
    let b = haar_vector(d_loc, &mut rng);
    embed(basis, &a.kronecker(&b))
}

/// Schmidt coefficients (descending) of the first `d_loc²` amplitudes viewed
/// as a `d_loc x d_loc` bipartite state.
pub fn schmidt_coefficients(state: &QuantumState, d_loc: usize) -> Result<Vec<f64>> {
    check_local_dim(d_loc, state.basis())?;
    let amps = state
        .amplitudes()
        .ok_or_else(|| Error::InvalidState("Schmidt decomposition needs a pure state".into()))?;
    let m = DMatrix::from_fn(d_loc, d_loc, |i, j| amps[i * d_loc + j]);
    let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn schmidt_rank(state: &QuantumState, d_loc: usize, tol: f64) -> Result<usize> {
    Ok(schmidt_coefficients(state, d_loc)?.iter().filter(|&&s| s > tol).count())
}

/// Entanglement entropy in nats, `-Σ λ ln λ` over squared Schmidt coefficients.
pub fn entanglement_entropy(state: &QuantumState, d_loc: usize) -> Result<f64> {
    Ok(schmidt_coefficients(state, d_loc)?
        .iter()
        .map(|s| s * s)
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.ln())
        .sum())
}
