//! End-to-end reservoir-computing tasks: encode, run the reservoir, train
//! the readout, report accuracy.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{OccupationBasis, QuantumState};
use crate::mnist::{columns_as_sequence, load_mnist, Image, MnistConfig, MnistSubset};
use crate::readout::{evaluate, train, LabeledExample, Metrics, ReadoutModel, TrainConfig};
use crate::reservoir::{
    amplitude_encode, coherent_encode, sample_entangled, sample_separable, EncodedInput, Provenance, Reservoir,
    ReservoirConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Quantum,
    Coherent,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Quantum => "quantum",
            Encoding::Coherent => "coherent",
        })
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(Encoding::Quantum),
            "coherent" => Ok(Encoding::Coherent),
            _ => Err(Error::Config(format!("unknown encoding '{s}' (quantum|coherent)"))),
        }
    }
}

/// Encodes one image column. A blank column has no coherent mixture either,
/// so both encodings map it to the first basis state, flagged.
pub fn encode(v: &[f64], encoding: Encoding, basis: &Arc<OccupationBasis>) -> Result<EncodedInput> {
    match encoding {
        Encoding::Quantum => amplitude_encode(v, basis),
        Encoding::Coherent if v.iter().all(|&x| x == 0.0) => Ok(EncodedInput {
            state: QuantumState::basis_state(basis.clone(), 0)?,
            provenance: Provenance::ZeroFallback,
        }),
        Encoding::Coherent => coherent_encode(v, basis),
    }
}

/// Runs `jobs` with one reservoir clone per worker, results in job order.
/// Jobs pick their own sampling stream so the worker count does not matter.
fn run_parallel<T, F>(reservoir: &Reservoir, jobs: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Reservoir, usize) -> Result<T> + Sync,
{
    let threads = threads.clamp(1, jobs.max(1));
    let chunk = jobs.div_ceil(threads).max(1);
    let mut results: Vec<Result<Vec<T>>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .step_by(chunk)
            .map(|start| {
                let f = &f;
                let mut res = reservoir.clone();
                scope.spawn(move || {
                    (start..(start + chunk).min(jobs))
                        .map(|i| f(&mut res, i))
                        .collect::<Result<Vec<T>>>()
                })
            })
            .collect();
        results = handles
            .into_iter()
            .map(|h| h.join().expect("reservoir worker panicked"))
            .collect();
    });
    let mut out = Vec::with_capacity(jobs);
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingStats {
    pub inputs: usize,
    pub zero_fallbacks: usize,
}

/// Final reservoir output for every image, with image columns fed left to right.
pub fn mnist_features(
    images: &[Image],
    classes: &[u8],
    reservoir: &Reservoir,
    encoding: Encoding,
    stream_offset: usize,
    threads: usize,
) -> Result<(Vec<LabeledExample>, EncodingStats)> {
    let basis = reservoir.basis().clone();
    let rows = run_parallel(reservoir, images.len(), threads, |res, i| {
        let img = &images[i];
        let seq = columns_as_sequence(&img.pixels)?
            .iter()
            .map(|c| encode(c, encoding, &basis))
            .collect::<Result<Vec<_>>>()?;
        let zeros = seq
            .iter()
            .filter(|x| x.provenance == Provenance::ZeroFallback)
            .count();
        res.set_stream((stream_offset + i) as u64);
        let probs = res.run_sequence(&seq)?;
        let label = classes
            .iter()
            .position(|&d| d == img.label)
            .ok_or_else(|| Error::Data(format!("label {} not among {classes:?}", img.label)))?;
        Ok((LabeledExample::new(probs, label)?, zeros))
    })?;
    let stats = EncodingStats {
        inputs: images.len() * crate::mnist::CROP_COLS,
        zero_fallbacks: rows.iter().map(|r| r.1).sum(),
    };
    Ok((rows.into_iter().map(|r| r.0).collect(), stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnistTaskConfig {
    pub data: MnistConfig,
    pub reservoir: ReservoirConfig,
    pub readout: TrainConfig,
    pub encoding: Encoding,
}

impl Default for MnistTaskConfig {
    fn default() -> Self {
        Self {
            data: MnistConfig::default(),
            reservoir: ReservoirConfig::default(),
            readout: TrainConfig::default(),
            encoding: Encoding::Quantum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntanglementTaskConfig {
    pub d_loc: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub copies: usize,
    pub seed: u64,
    pub reservoir: ReservoirConfig,
    pub readout: TrainConfig,
}

impl Default for EntanglementTaskConfig {
    fn default() -> Self {
        Self {
            d_loc: 12,
            train_per_class: 500,
            test_per_class: 500,
            copies: 100,
            seed: 11,
            reservoir: ReservoirConfig {
                window: 100,
                ..ReservoirConfig::default()
            },
            readout: TrainConfig::default(),
        }
    }
}

/// Everything a task run produces.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub train_features: Vec<LabeledExample>,
    pub test_features: Vec<LabeledExample>,
    pub model: ReadoutModel,
    pub report: TaskReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: String,
    pub classes: Vec<String>,
    pub train: Metrics,
    pub test: Metrics,
    pub epoch_loss: Vec<f64>,
    pub parameters: usize,
    pub encoding: Option<EncodingStats>,
}

fn fit(
    task: &str,
    classes: Vec<String>,
    train_set: Vec<LabeledExample>,
    test_set: Vec<LabeledExample>,
    readout: &TrainConfig,
    encoding: Option<EncodingStats>,
) -> Result<TaskOutcome> {
    let (model, history) = train(&train_set, classes.len(), readout)?;
    let test = evaluate(&model, &test_set)?;
    Ok(TaskOutcome {
        report: TaskReport {
            task: task.into(),
            classes,
            train: history.train,
            test,
            epoch_loss: history.epoch_loss,
            parameters: model.parameter_count(),
            encoding,
        },
        model,
        train_features: train_set,
        test_features: test_set,
    })
}

/// Digit classification on a loaded subset.
pub fn run_mnist_on(subset: &MnistSubset, cfg: &MnistTaskConfig, threads: usize) -> Result<TaskOutcome> {
    let reservoir = Reservoir::new(cfg.reservoir.clone())?;
    let (train_set, s1) = mnist_features(&subset.train, &subset.digits, &reservoir, cfg.encoding, 0, threads)?;
    let (test_set, s2) = mnist_features(
        &subset.test,
        &subset.digits,
        &reservoir,
        cfg.encoding,
        subset.train.len(),
        threads,
    )?;
    let stats = EncodingStats {
        inputs: s1.inputs + s2.inputs,
        zero_fallbacks: s1.zero_fallbacks + s2.zero_fallbacks,
    };
    let classes = subset.digits.iter().map(|d| d.to_string()).collect();
    fit("mnist", classes, train_set, test_set, &cfg.readout, Some(stats))
}

pub fn run_mnist(cfg: &MnistTaskConfig, threads: usize) -> Result<TaskOutcome> {
    let subset = load_mnist(&cfg.data)?;
    run_mnist_on(&subset, cfg, threads)
}

/// Labelled states: class 0 separable, class 1 entangled, interleaved.
pub fn build_entanglement_dataset(
    n_per_class: usize,
    d_loc: usize,
    basis: &Arc<OccupationBasis>,
    seed: u64,
) -> Result<Vec<(QuantumState, usize)>> {
    if n_per_class == 0 {
        return Err(Error::Config("need at least one state per class".into()));
    }
    let mut out = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class as u64 {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(2 * i);
        out.push((sample_separable(d_loc, basis, s)?, 0));
        out.push((sample_entangled(d_loc, basis, s + 1)?, 1));
    }
    Ok(out)
}

/// Reservoir output after `copies` identical presentations of each state.
pub fn entanglement_features(
    states: &[(QuantumState, usize)],
    reservoir: &Reservoir,
    copies: usize,
    stream_offset: usize,
    threads: usize,
) -> Result<Vec<LabeledExample>> {
    run_parallel(reservoir, states.len(), threads, |res, i| {
        let (state, label) = &states[i];
        let x = EncodedInput {
            state: state.clone(),
            provenance: Provenance::Quantum,
        };
        res.set_stream((stream_offset + i) as u64);
        LabeledExample::new(res.run_repeated(&x, copies)?, *label)
    })
}

pub fn run_entanglement(cfg: &EntanglementTaskConfig, threads: usize) -> Result<TaskOutcome> {
    let reservoir = Reservoir::new(cfg.reservoir.clone())?;
    let basis = reservoir.basis().clone();
    let train_states = build_entanglement_dataset(cfg.train_per_class, cfg.d_loc, &basis, cfg.seed)?;
    let test_states = build_entanglement_dataset(cfg.test_per_class, cfg.d_loc, &basis, cfg.seed.wrapping_add(1))?;
    let train_set = entanglement_features(&train_states, &reservoir, cfg.copies, 0, threads)?;
    let test_set = entanglement_features(&test_states, &reservoir, cfg.copies, train_states.len(), threads)?;
    let classes = vec!["separable".into(), "entangled".into()];
    fit("entanglement", classes, train_set, test_set, &cfg.readout, None)
}
