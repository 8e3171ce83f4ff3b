//! Multimode bosonic Fock-space engine.
//!
//! States live on an [`OccupationBasis`]: an ordered list of occupation
//! vectors over `m` optical modes. A passive linear-optical network is given
//! by its `m x m` mode matrix ([`ModeUnitary`]) and is lifted to the Fock
//! space through matrix permanents, with creation operators transforming as
//! `a_j^† -> Σ_i U_ij a_i^†`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance used for unitarity, normalisation and hermiticity checks.
pub const STATE_TOL: f64 = 1e-10;
/// Smallest eigenvalue a density operator may have before it is rejected.
pub const PSD_TOL: f64 = -1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

/// Ordered list of Fock occupation vectors.
///
/// Within a fixed photon-number sector the order is lexicographic descending,
/// so `(p, 0, .., 0)` comes first and `(0, .., 0, p)` last. Bases spanning
/// several sectors list them by ascending photon number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupationBasis {
    modes: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl OccupationBasis {
    /// All `m`-mode occupations holding exactly `p` photons.
    pub fn enumerate(modes: usize, photons: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidDimension("basis needs at least one mode".into()));
        }
        let photons = u8::try_from(photons)
            .map_err(|_| Error::InvalidDimension(format!("{photons} photons is too many")))?;
        let mut states = Vec::new();
        let mut scratch = vec![0u8; modes];
        fill_sector(&mut scratch, 0, photons, &mut states);
        Ok(Self::from_ordered(modes, states))
    }

    /// Vacuum-augmented basis: every sector from 0 up to `max_photons`.
    pub fn up_to(modes: usize, max_photons: usize) -> Result<Self> {
        let mut states = Vec::new();
        for p in 0..=max_photons {
            states.extend(Self::enumerate(modes, p)?.states);
        }
        Ok(Self::from_ordered(modes, states))
    }

    /// Basis over an explicit list of occupations, re-sorted into canonical order.
    pub fn from_states(modes: usize, mut states: Vec<Vec<u8>>) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidDimension("basis needs at least one mode".into()));
        }
        if states.is_empty() {
            return Err(Error::InvalidDimension("basis needs at least one state".into()));
        }
        if let Some(bad) = states.iter().find(|s| s.len() != modes) {
            return Err(Error::DimensionMismatch {
                expected: modes,
                actual: bad.len(),
            });
        }
        states.sort_by(|a, b| {
            let na: u32 = a.iter().map(|&x| u32::from(x)).sum();
            let nb: u32 = b.iter().map(|&x| u32::from(x)).sum();
            na.cmp(&nb).then_with(|| b.cmp(a))
        });
        states.dedup();
        Ok(Self::from_ordered(modes, states))
    }

    fn from_ordered(modes: usize, states: Vec<Vec<u8>>) -> Self {
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Self {
            modes,
            states,
            index,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn occupation(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn states(&self) -> impl Iterator<Item = &[u8]> {
        self.states.iter().map(Vec::as_slice)
    }

    pub fn photon_number(&self, i: usize) -> usize {
        self.states[i].iter().map(|&n| usize::from(n)).sum()
    }

    /// Checks that every photon-number sector present is complete, which is
    /// what makes the lift of a unitary unitary again.
    fn check_sectors_complete(&self) -> Result<()> {
        let mut counts: HashMap<usize, u64> = HashMap::new();
        for i in 0..self.len() {
            *counts.entry(self.photon_number(i)).or_default() += 1;
        }
        for (p, count) in counts {
            let full = binomial((self.modes + p - 1) as u64, p as u64);
            if count != full {
                return Err(Error::InvalidDimension(format!(
                    "sector with {p} photons holds {count} of {full} states"
                )));
            }
        }
        Ok(())
    }
}

fn fill_sector(scratch: &mut [u8], mode: usize, left: u8, out: &mut Vec<Vec<u8>>) {
    if mode + 1 == scratch.len() {
        scratch[mode] = left;
        out.push(scratch.to_vec());
        return;
    }
    for n in (0..=left).rev() {
        scratch[mode] = n;
        fill_sector(scratch, mode + 1, left - n, out);
    }
}

/// An `m x m` unitary acting on optical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    matrix: CMatrix,
}

impl ModeUnitary {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDimension(format!(
                "mode matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let m = matrix.nrows();
        let defect = (matrix.adjoint() * &matrix - CMatrix::identity(m, m)).camax();
        if defect > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "mode matrix is not unitary (|U^†U - I| = {defect:.3e})"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn identity(modes: usize) -> Self {
        Self {
            matrix: CMatrix::identity(modes, modes),
        }
    }

    /// Two-mode coupler `[[t, i r], [i r, t]]` with `t = sqrt(1-R)`, `r = sqrt(R)`.
    ///
    /// `R` is the probability of crossing from one mode to the other.
    pub fn coupler(reflectivity: f64) -> Self {
        let r = reflectivity.clamp(0.0, 1.0).sqrt();
        let t = (1.0 - reflectivity.clamp(0.0, 1.0)).sqrt();
        Self {
            matrix: CMatrix::from_row_slice(2, 2, &[t.into(), I * r, I * r, t.into()]),
        }
    }

    /// The balanced directional coupler `(1/√2)[[1, i], [i, 1]]`.
    pub fn balanced_coupler() -> Self {
        Self::coupler(0.5)
    }

    /// Phase `e^{iφ}` on the first mode followed by a coupler of reflectivity `R`.
    pub fn phased_coupler(reflectivity: f64, phase: f64) -> Self {
        let shifter = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::from_polar(1.0, phase),
            ONE,
        ]));
        Self {
            matrix: Self::coupler(reflectivity).matrix * shifter,
        }
    }

    /// Places a two-mode unitary on modes `a`, `b` of an `m`-mode identity.
    pub fn embed(modes: usize, a: usize, b: usize, block: &ModeUnitary) -> Result<Self> {
        if block.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: block.dim(),
            });
        }
        if a >= modes || b >= modes || a == b {
            return Err(Error::InvalidDimension(format!(
                "cannot embed on modes ({a}, {b}) of {modes}"
            )));
        }
        let mut matrix = CMatrix::identity(modes, modes);
        let blk = &block.matrix;
        matrix[(a, a)] = blk[(0, 0)];
        matrix[(a, b)] = blk[(0, 1)];
        matrix[(b, a)] = blk[(1, 0)];
        matrix[(b, b)] = blk[(1, 1)];
        Ok(Self { matrix })
    }

    /// `next` applied after `self`.
    pub fn then(&self, next: &ModeUnitary) -> Self {
        Self {
            matrix: &next.matrix * &self.matrix,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// Permanent of a square matrix by Ryser's inclusion–exclusion formula.
pub fn permanent(a: &CMatrix) -> Complex64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "permanent of a non-square matrix");
    if n == 0 {
        return ONE;
    }
    let mut total = ZERO;
    for subset in 1u64..(1 << n) {
        let mut prod = ONE;
        for i in 0..n {
            let row_sum: Complex64 = (0..n)
                .filter(|j| subset & (1 << j) != 0)
                .map(|j| a[(i, j)])
                .sum();
            prod *= row_sum;
        }
        if (n - subset.count_ones() as usize) % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
    total
}

/// Permanent of `U[out, in]`: row `i` repeated `out[i]` times and column `j`
/// repeated `inp[j]` times, evaluated with Ryser's formula over column
/// multiplicities so repeated columns are summed in closed form.
pub fn multiset_permanent(u: &CMatrix, out: &[u8], inp: &[u8]) -> Complex64 {
    let photons: u32 = inp.iter().map(|&x| u32::from(x)).sum();
    let out_photons: u32 = out.iter().map(|&x| u32::from(x)).sum();
    if photons != out_photons {
        return ZERO;
    }
    if photons == 0 {
        return ONE;
    }
    let cols: Vec<(usize, u8)> = inp
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > 0)
        .map(|(j, &s)| (j, s))
        .collect();
    let rows: Vec<(usize, u8)> = out
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0)
        .map(|(i, &t)| (i, t))
        .collect();

    let mut k = vec![0u8; cols.len()];
    let mut total = ZERO;
    loop {
        // advance the mixed-radix counter; k = 0 contributes nothing
        let mut pos = 0;
        loop {
            if pos == k.len() {
                return total;
            }
            if k[pos] < cols[pos].1 {
                k[pos] += 1;
                break;
            }
            k[pos] = 0;
            pos += 1;
        }
        let picked: u32 = k.iter().map(|&x| u32::from(x)).sum();
        let weight: u64 = cols
            .iter()
            .zip(&k)
            .map(|(&(_, s), &kj)| binomial(u64::from(s), u64::from(kj)))
            .product();
        let mut prod = Complex64::new(weight as f64, 0.0);
        for &(i, t) in &rows {
            let row_sum: Complex64 = cols
                .iter()
                .zip(&k)
                .map(|(&(j, _), &kj)| u[(i, j)] * f64::from(kj))
                .sum();
            prod *= row_sum.powu(u32::from(t));
        }
        if (photons - picked) % 2 == 1 {
            total -= prod;
        } else {
            total += prod;
        }
    }
}

/// Lifts a mode unitary to the Fock space spanned by `basis`.
///
/// Entries are `Per(U[t, s]) / sqrt(Π s_j! Π t_i!)`. Pairs of occupations
/// that cannot be connected (different photon counts on some connected block
/// of `U`) are skipped without evaluating a permanent.
pub fn lift_unitary(u: &ModeUnitary, basis: &OccupationBasis) -> Result<CMatrix> {
    if u.dim() != basis.modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.modes(),
            actual: u.dim(),
        });
    }
    basis.check_sectors_complete()?;
    let m = u.dim();
    let mat = u.matrix();

    // connected blocks of the mode graph
    let mut parent: Vec<usize> = (0..m).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..m {
        for j in 0..m {
            if mat[(i, j)] != ZERO {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let block: Vec<usize> = (0..m).map(|x| root(&mut parent, x)).collect();

    let mut groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for (idx, occ) in basis.states().enumerate() {
        let mut signature = vec![0u32; m];
        for (mode, &n) in occ.iter().enumerate() {
            signature[block[mode]] += u32::from(n);
        }
        groups.entry(signature).or_default().push(idx);
    }

    let norms: Vec<f64> = basis
        .states()
        .map(|occ| occ.iter().map(|&n| factorial(n)).product::<f64>().sqrt())
        .collect();
    let d = basis.len();
    let mut lifted = CMatrix::zeros(d, d);
    for members in groups.values() {
        for &row in members {
            for &col in members {
                let per = multiset_permanent(mat, basis.occupation(row), basis.occupation(col));
                lifted[(row, col)] = per / (norms[row] * norms[col]);
            }
        }
    }
    Ok(lifted)
}

/// Internal representation of a [`QuantumState`].
#[derive(Debug, Clone)]
pub enum Representation {
    Pure(CVector),
    Density(CMatrix),
    /// Convex combination `Σ w_k |ψ_k⟩⟨ψ_k|` kept in decomposed form.
    Ensemble(Vec<(f64, CVector)>),
}

/// A normalised pure state or density operator over an occupation basis.
#[derive(Debug, Clone)]
pub struct QuantumState {
    basis: Arc<OccupationBasis>,
    repr: Representation,
}

impl QuantumState {
    pub fn pure(basis: Arc<OccupationBasis>, amplitudes: CVector) -> Result<Self> {
        check_len(&basis, amplitudes.len())?;
        let norm = amplitudes.norm_squared();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("state norm² is {norm}")));
        }
        Ok(Self {
            basis,
            repr: Representation::Pure(amplitudes),
        })
    }

    pub fn density(basis: Arc<OccupationBasis>, rho: CMatrix) -> Result<Self> {
        check_len(&basis, rho.nrows())?;
        check_density(&rho)?;
        Ok(Self {
            basis,
            repr: Representation::Density(rho),
        })
    }

    /// Mixture of pure components. Weights must be non-negative and sum to one.
    pub fn ensemble(basis: Arc<OccupationBasis>, components: Vec<(f64, CVector)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidState("empty ensemble".into()));
        }
        let mut total = 0.0;
        for (w, v) in &components {
            check_len(&basis, v.len())?;
            if *w < 0.0 {
                return Err(Error::InvalidState(format!("negative ensemble weight {w}")));
            }
            if (v.norm_squared() - 1.0).abs() > STATE_TOL {
                return Err(Error::InvalidState("ensemble component not normalised".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("ensemble weights sum to {total}")));
        }
        Ok(Self {
            basis,
            repr: Representation::Ensemble(components),
        })
    }

    pub fn basis_state(basis: Arc<OccupationBasis>, index: usize) -> Result<Self> {
        if index >= basis.len() {
            return Err(Error::InvalidDimension(format!(
                "basis index {index} out of {}",
                basis.len()
            )));
        }
        let mut amps = CVector::zeros(basis.len());
        amps[index] = ONE;
        Ok(Self {
            basis,
            repr: Representation::Pure(amps),
        })
    }

    pub(crate) fn from_parts(basis: Arc<OccupationBasis>, repr: Representation) -> Self {
        Self { basis, repr }
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn amplitudes(&self) -> Option<&CVector> {
        match &self.repr {
            Representation::Pure(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_density(&self) -> CMatrix {
        match &self.repr {
            Representation::Pure(v) => v * v.adjoint(),
            Representation::Density(rho) => rho.clone(),
            Representation::Ensemble(parts) => {
                let d = self.dim();
                parts
                    .iter()
                    .fold(CMatrix::zeros(d, d), |acc, (w, v)| acc + v * v.adjoint() * Complex64::from(*w))
            }
        }
    }

    /// Evolves the state by a Fock-space unitary: `U|ψ⟩` or `UρU^†`.
    pub fn apply(&self, lifted: &CMatrix) -> Result<Self> {
        if lifted.nrows() != self.dim() || lifted.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: lifted.nrows(),
            });
        }
        let repr = match &self.repr {
            Representation::Pure(v) => Representation::Pure(lifted * v),
            Representation::Density(rho) => Representation::Density(lifted * rho * lifted.adjoint()),
            Representation::Ensemble(parts) => {
                Representation::Ensemble(parts.iter().map(|(w, v)| (*w, lifted * v)).collect())
            }
        };
        Ok(Self {
            basis: Arc::clone(&self.basis),
            repr,
        })
    }

    /// Reduced state on `keep_modes`, tracing out the rest.
    ///
    /// The reduced basis holds every occupation of the kept modes that occurs
    /// in the parent basis, in canonical order.
    pub fn partial_trace(&self, keep_modes: &[usize]) -> Result<Self> {
        let m = self.basis.modes();
        let mut keep = keep_modes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() || keep.len() >= m {
            return Err(Error::InvalidDimension(format!(
                "partial trace must keep a non-empty proper subset of {m} modes"
            )));
        }
        if let Some(&bad) = keep.iter().find(|&&k| k >= m) {
            return Err(Error::InvalidDimension(format!("mode {bad} out of {m}")));
        }
        let traced: Vec<usize> = (0..m).filter(|x| !keep.contains(x)).collect();
        let split = |occ: &[u8]| -> (Vec<u8>, Vec<u8>) {
            (
                keep.iter().map(|&k| occ[k]).collect(),
                traced.iter().map(|&k| occ[k]).collect(),
            )
        };

        let parts: Vec<(Vec<u8>, Vec<u8>)> = self.basis.states().map(split).collect();
        let reduced = Arc::new(OccupationBasis::from_states(
            keep.len(),
            parts.iter().map(|(k, _)| k.clone()).collect(),
        )?);
        let kept_index: Vec<usize> = parts
            .iter()
            .map(|(k, _)| reduced.index_of(k).expect("kept occupation in reduced basis"))
            .collect();
        let mut by_env: HashMap<&[u8], Vec<usize>> = HashMap::new();
        for (i, (_, env)) in parts.iter().enumerate() {
            by_env.entry(env.as_slice()).or_default().push(i);
        }

        let rho = self.to_density();
        let dr = reduced.len();
        let mut out = CMatrix::zeros(dr, dr);
        for members in by_env.values() {
            for &i in members {
                for &j in members {
                    out[(kept_index[i], kept_index[j])] += rho[(i, j)];
                }
            }
        }
        Ok(Self {
            basis: reduced,
            repr: Representation::Density(out),
        })
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        match &self.repr {
            Representation::Pure(v) => v.norm_squared().powi(2),
            Representation::Density(rho) => rho.iter().map(|z| z.norm_sqr()).sum(),
            Representation::Ensemble(parts) => {
                let mut total = 0.0;
                for (wa, a) in parts {
                    for (wb, b) in parts {
                        total += wa * wb * a.dotc(b).norm_sqr();
                    }
                }
                total
            }
        }
    }

    /// Diagonal of ρ in the occupation basis.
    pub fn fock_probabilities(&self) -> Vec<f64> {
        match &self.repr {
            Representation::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            Representation::Density(rho) => (0..self.dim()).map(|i| rho[(i, i)].re.max(0.0)).collect(),
            Representation::Ensemble(parts) => {
                let mut probs = vec![0.0; self.dim()];
                for (w, v) in parts {
                    for (p, z) in probs.iter_mut().zip(v.iter()) {
                        *p += w * z.norm_sqr();
                    }
                }
                probs
            }
        }
    }

    /// Expected photon number in one mode.
    pub fn mean_photons(&self, mode: usize) -> f64 {
        self.fock_probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| p * f64::from(self.basis.occupation(i)[mode]))
            .sum()
    }

    /// Expected total photon number.
    pub fn mean_total_photons(&self) -> f64 {
        self.fock_probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| p * self.basis.photon_number(i) as f64)
            .sum()
    }
}

fn check_len(basis: &OccupationBasis, len: usize) -> Result<()> {
    if len != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            actual: len,
        });
    }
    Ok(())
}

/// Checks the density-operator invariants: Hermitian, unit trace, PSD.
pub fn check_density(rho: &CMatrix) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::InvalidDimension("density matrix must be square".into()));
    }
    let herm = (rho - rho.adjoint()).camax();
    if herm > STATE_TOL {
        return Err(Error::InvalidState(format!("not Hermitian (defect {herm:.3e})")));
    }
    let trace = rho.trace();
    if (trace.re - 1.0).abs() > STATE_TOL || trace.im.abs() > STATE_TOL {
        return Err(Error::InvalidState(format!("trace is {trace}")));
    }
    let min_eig = hermitian_eigenvalues(rho).into_iter().fold(f64::INFINITY, f64::min);
    if min_eig < PSD_TOL {
        return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
    }
    Ok(())
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::from(0.5)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    SymmetricEigen::new(hermitize(m)).eigenvalues.iter().copied().collect()
}

/// Principal square root of a positive semidefinite Hermitian matrix.
/// Negative round-off eigenvalues are clipped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(hermitize(m));
    let roots = eig.eigenvalues.map(|l| Complex64::from(l.max(0.0).sqrt()));
    let v = &eig.eigenvectors;
    v * CMatrix::from_diagonal(&roots) * v.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &QuantumState, sigma: &QuantumState) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: sigma.dim(),
        });
    }
    let value = match (rho.representation(), sigma.representation()) {
        (Representation::Pure(a), Representation::Pure(b)) => a.dotc(b).norm_sqr(),
        (Representation::Pure(a), _) => (a.adjoint() * sigma.to_density() * a)[(0, 0)].re,
        (_, Representation::Pure(b)) => (b.adjoint() * rho.to_density() * b)[(0, 0)].re,
        _ => matrix_fidelity(&rho.to_density(), &sigma.to_density()),
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Uhlmann fidelity of two density matrices, without validation or clamping.
pub fn matrix_fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let root = psd_sqrt(rho);
    let inner = &root * sigma * &root;
    let trace: f64 = hermitian_eigenvalues(&inner).into_iter().map(|l| l.max(0.0).sqrt()).sum();
    trace * trace
}

/// Multinomial draw of `shots` outcomes from `probs`, deterministic in `seed`.
pub fn sample_counts(probs: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_counts_with(probs, shots, &mut rng)
}

pub fn sample_counts_with<R: rand::Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Result<Vec<u64>> {
    if let Some(p) = probs.iter().find(|p| **p < 0.0 || !p.is_finite()) {
        return Err(Error::OutOfRange(format!("probability {p} is negative")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::OutOfRange(format!("probabilities sum to {total}")));
    }
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = total;
    for (count, &p) in counts.iter_mut().zip(probs) {
        if remaining == 0 {
            break;
        }
        if mass <= 0.0 {
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q)
                .map_err(|e| Error::OutOfRange(e.to_string()))?
                .sample(rng)
        };
        *count = draw;
        remaining -= draw;
        mass -= p;
    }
    // floating-point leftovers land on the last bin with probability mass
    if remaining > 0 {
        if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
            counts[last] += remaining;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_two_modes_one_photon() {
        let b = OccupationBasis::enumerate(2, 1).unwrap();
        assert_eq!(b.states().collect::<Vec<_>>(), vec![&[1u8, 0][..], &[0, 1][..]]);
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(OccupationBasis::enumerate(9, 3).unwrap().len(), 165);
        let vac = OccupationBasis::enumerate(3, 0).unwrap();
        assert_eq!(vac.len(), 1);
        assert_eq!(vac.occupation(0), &[0, 0, 0]);
        for m in 1..6 {
            for p in 0..5 {
                let b = OccupationBasis::enumerate(m, p).unwrap();
                assert_eq!(b.len() as u64, binomial((m + p - 1) as u64, p as u64));
            }
        }
    }

    #[test]
    fn basis_zero_modes_rejected() {
        assert!(matches!(
            OccupationBasis::enumerate(0, 2),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn basis_order_is_lex_descending() {
        let b = OccupationBasis::enumerate(3, 2).unwrap();
        let states: Vec<_> = b.states().map(<[u8]>::to_vec).collect();
        let mut sorted = states.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        assert_eq!(states, sorted);
        assert_eq!(states[0], vec![2, 0, 0]);
        for i in 0..b.len() {
            assert_eq!(b.index_of(b.occupation(i)), Some(i));
        }
    }

    #[test]
    fn vacuum_augmented_basis_order() {
        let b = OccupationBasis::up_to(2, 1).unwrap();
        assert_eq!(b.states().collect::<Vec<_>>(), vec![&[0u8, 0][..], &[1, 0][..], &[0, 1][..]]);
    }

    #[test]
    fn ryser_matches_known_permanents() {
        let a = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(2., 0.), c(3., 0.), c(4., 0.)]);
        assert_abs_diff_eq!(permanent(&a).re, 10.0, epsilon = 1e-12);
        let ones = CMatrix::from_element(4, 4, ONE);
        assert_abs_diff_eq!(permanent(&ones).re, 24.0, epsilon = 1e-9);
    }

    #[test]
    fn multiset_permanent_agrees_with_expanded_matrix() {
        let u = CMatrix::from_fn(3, 3, |i, j| c(0.3 * i as f64 - 0.1 * j as f64, 0.2 * (i * j) as f64 + 0.05));
        let out = [2u8, 0, 1];
        let inp = [1u8, 1, 1];
        let rows: Vec<usize> = vec![0, 0, 2];
        let cols: Vec<usize> = vec![0, 1, 2];
        let expanded = CMatrix::from_fn(3, 3, |i, j| u[(rows[i], cols[j])]);
        let a = multiset_permanent(&u, &out, &inp);
        let b = permanent(&expanded);
        assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lift_identity_is_identity() {
        let basis = OccupationBasis::enumerate(4, 3).unwrap();
        let lifted = lift_unitary(&ModeUnitary::identity(4), &basis).unwrap();
        assert_abs_diff_eq!((lifted - CMatrix::identity(basis.len(), basis.len())).camax(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn lift_single_photon_is_mode_matrix() {
        let basis = OccupationBasis::enumerate(2, 1).unwrap();
        let bs = ModeUnitary::balanced_coupler();
        let lifted = lift_unitary(&bs, &basis).unwrap();
        assert_abs_diff_eq!((lifted - bs.matrix()).camax(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let basis = Arc::new(OccupationBasis::enumerate(2, 2).unwrap());
        let lifted = lift_unitary(&ModeUnitary::balanced_coupler(), &basis).unwrap();
        let input = QuantumState::basis_state(basis.clone(), basis.index_of(&[1, 1]).unwrap()).unwrap();
        let out = input.apply(&lifted).unwrap();
        let probs = out.fock_probabilities();
        assert_abs_diff_eq!(probs[basis.index_of(&[1, 1]).unwrap()], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(probs[basis.index_of(&[2, 0]).unwrap()], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(probs[basis.index_of(&[0, 2]).unwrap()], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn lift_rejects_mismatch_and_incomplete_basis() {
        let basis = OccupationBasis::enumerate(3, 1).unwrap();
        assert!(matches!(
            lift_unitary(&ModeUnitary::identity(2), &basis),
            Err(Error::DimensionMismatch { .. })
        ));
        let partial = OccupationBasis::from_states(2, vec![vec![1, 0]]).unwrap();
        assert!(lift_unitary(&ModeUnitary::identity(2), &partial).is_err());
    }

    #[test]
    fn mode_unitary_rejects_non_unitary() {
        let m = CMatrix::from_element(2, 2, ONE);
        assert!(ModeUnitary::new(m).is_err());
    }

    #[test]
    fn state_validation() {
        let basis = Arc::new(OccupationBasis::enumerate(2, 1).unwrap());
        assert!(QuantumState::pure(basis.clone(), CVector::from_vec(vec![ONE, ONE])).is_err());
        let not_herm = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0.1, 0.), c(0.2, 0.), c(0.5, 0.)]);
        assert!(QuantumState::density(basis.clone(), not_herm).is_err());
        let negative = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.), ZERO, ZERO, c(-0.5, 0.)]);
        assert!(QuantumState::density(basis, negative).is_err());
    }

    #[test]
    fn purity_of_pure_and_mixed() {
        let basis = Arc::new(OccupationBasis::enumerate(2, 1).unwrap());
        let pure = QuantumState::basis_state(basis.clone(), 1).unwrap();
        assert_abs_diff_eq!(pure.purity(), 1.0, epsilon = 1e-14);
        let mixed = QuantumState::density(basis, CMatrix::identity(2, 2) * c(0.5, 0.)).unwrap();
        assert_abs_diff_eq!(mixed.purity(), 0.5, epsilon = 1e-14);
        assert_eq!(mixed.fock_probabilities(), vec![0.5, 0.5]);
    }

    #[test]
    fn fidelity_basics() {
        let basis = Arc::new(OccupationBasis::enumerate(2, 1).unwrap());
        let a = QuantumState::basis_state(basis.clone(), 0).unwrap();
        let b = QuantumState::basis_state(basis.clone(), 1).unwrap();
        assert_abs_diff_eq!(fidelity(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&a, &b).unwrap(), 0.0, epsilon = 1e-12);
        let rho = QuantumState::density(
            basis.clone(),
            CMatrix::from_row_slice(2, 2, &[c(0.7, 0.), c(0.1, 0.2), c(0.1, -0.2), c(0.3, 0.)]),
        )
        .unwrap();
        let sigma = QuantumState::density(basis.clone(), CMatrix::identity(2, 2) * c(0.5, 0.)).unwrap();
        assert_abs_diff_eq!(fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            fidelity(&rho, &sigma).unwrap(),
            fidelity(&sigma, &rho).unwrap(),
            epsilon = 1e-12
        );
        let other = QuantumState::basis_state(Arc::new(OccupationBasis::enumerate(3, 1).unwrap()), 0).unwrap();
        assert!(fidelity(&a, &other).is_err());
    }

    #[test]
    fn partial_trace_rejects_bad_subsets() {
        let basis = Arc::new(OccupationBasis::enumerate(2, 1).unwrap());
        let s = QuantumState::basis_state(basis, 0).unwrap();
        assert!(s.partial_trace(&[]).is_err());
        assert!(s.partial_trace(&[0, 1]).is_err());
    }

    #[test]
    fn sampling_basics() {
        let counts = sample_counts(&[0.0, 1.0, 0.0], 500, 3).unwrap();
        assert_eq!(counts, vec![0, 500, 0]);
        assert_eq!(sample_counts(&[0.5, 0.5], 1000, 9).unwrap(), sample_counts(&[0.5, 0.5], 1000, 9).unwrap());
        assert!(sample_counts(&[-0.1, 1.1], 10, 0).is_err());
        assert!(sample_counts(&[0.2, 0.2], 10, 0).is_err());
    }

    #[test]
    fn sampling_concentrates() {
        let shots = 1_000_000u64;
        let counts = sample_counts(&[0.5, 0.5], shots, 42).unwrap();
        let sigma = (shots as f64 * 0.25).sqrt();
        assert!((counts[0] as f64 - 500_000.0).abs() < 5.0 * sigma);
        assert_eq!(counts.iter().sum::<u64>(), shots);
    }
}
