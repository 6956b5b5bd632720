//! Mini-batch Adagrad training with per-epoch validation fidelity.
//!
//! Randomness: parameters are initialized from `RandomSource::new(seed)
//! .fork(INIT_STREAM)`; epoch `e` (1-based) shuffles and draws dropout masks
//! from `.fork(e)`. An interrupted run resumed at epoch `e` therefore
//! continues exactly as an uninterrupted one.

use std::io::Write;

use rand::seq::SliceRandom;

use super::adagrad::adagrad_step;
use super::config::NetworkConfig;
use super::network::{forward, gradients, reshape_input, DropoutMask, Mode, NetworkParams, Sample};
use crate::cholesky::{tau_to_rho, TauVector};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::qcore::{fidelity, DensityMatrix};
use crate::sampling::RandomSource;
use crate::tomography::MeasurementVector;

pub const INIT_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub val_fidelity: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best(&self) -> Option<&EpochStats> {
        self.epochs.iter().max_by(|a, b| a.val_fidelity.total_cmp(&b.val_fidelity))
    }

    /// CSV with columns `epoch,mean_loss,val_mean_fidelity`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "mean_loss", "val_mean_fidelity"])?;
        for e in &self.epochs {
            out.write_record([e.epoch.to_string(), e.mean_loss.to_string(), e.val_fidelity.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Inverse of [`TrainingHistory::write_csv`].
    pub fn read_csv(r: impl std::io::Read) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let header = input.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["epoch", "mean_loss", "val_mean_fidelity"] {
            return Err(Error::Format(format!("unexpected history header {header:?}")));
        }
        let mut epochs = Vec::new();
        for row in input.records() {
            let row = row?;
            let field = |k: usize| row.get(k).ok_or_else(|| Error::Format("short history row".into()));
            let bad = |e: &dyn std::fmt::Display| Error::Format(format!("history row {row:?}: {e}"));
            epochs.push(EpochStats {
                epoch: field(0)?.parse().map_err(|e| bad(&e))?,
                mean_loss: field(1)?.parse().map_err(|e| bad(&e))?,
                val_fidelity: field(2)?.parse().map_err(|e| bad(&e))?,
            });
        }
        Ok(Self { epochs })
    }
}

/// Everything needed to continue training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub current: NetworkParams,
    pub best: NetworkParams,
    pub epochs_completed: usize,
    pub best_epoch: usize,
    pub best_fidelity: f64,
}

impl TrainState {
    pub fn fresh(config: &NetworkConfig) -> Result<Self> {
        let params = NetworkParams::init(config, &mut RandomSource::new(config.seed).fork(INIT_STREAM))?;
        Ok(Self {
            best: params.clone(),
            current: params,
            epochs_completed: 0,
            best_epoch: 0,
            best_fidelity: f64::NEG_INFINITY,
        })
    }
}

/// Converts dataset records into network samples; every record needs a target.
pub fn prepare_samples(ds: &Dataset) -> Result<Vec<Sample>> {
    ds.records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let target = r
                .target
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("record {i} has no tau target")))?;
            Ok(Sample { grid: reshape_input(&r.measurement)?, target: target.values().to_vec() })
        })
        .collect()
}

/// Reconstructed state for one measurement vector.
pub fn infer(params: &NetworkParams, v: &MeasurementVector) -> Result<DensityMatrix> {
    let m = params.config().num_qubits;
    if v.num_qubits() != m {
        return Err(Error::DimensionMismatch(format!(
            "network expects {m}-qubit measurements, got {} qubits",
            v.num_qubits()
        )));
    }
    let out = forward(params, &reshape_input(v)?, Mode::Infer)?;
    tau_to_rho(&TauVector::new(m, out)?)
}

fn infer_grid(params: &NetworkParams, sample: &Sample) -> Result<DensityMatrix> {
    let out = forward(params, &sample.grid, Mode::Infer)?;
    tau_to_rho(&TauVector::new(params.config().num_qubits, out)?)
}

/// Mean fidelity of predictions against the targets' states.
pub fn mean_fidelity(params: &NetworkParams, samples: &[Sample], truths: &[DensityMatrix]) -> Result<f64> {
    let mut total = 0.0;
    for (s, truth) in samples.iter().zip(truths) {
        total += fidelity(&infer_grid(params, s)?, truth)?;
    }
    Ok(total / samples.len() as f64)
}

fn check_datasets(config: &NetworkConfig, train: &Dataset, val: &Dataset) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    for (name, ds) in [("training", train), ("validation", val)] {
        if ds.num_qubits != config.num_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{name} set has {} qubits, network expects {}",
                ds.num_qubits, config.num_qubits
            )));
        }
    }
    Ok(())
}

/// Trains from scratch and returns the parameters of the best validation epoch.
pub fn train(config: &NetworkConfig, train_set: &Dataset, val_set: &Dataset) -> Result<(NetworkParams, TrainingHistory)> {
    let (state, history) = train_resume(TrainState::fresh(config)?, config.max_epochs, train_set, val_set, |_| {})?;
    Ok((state.best, history))
}

/// Runs epochs `state.epochs_completed + 1 ..= max_epochs`, calling
/// `on_epoch` after each.
pub fn train_resume(
    mut state: TrainState,
    max_epochs: usize,
    train_set: &Dataset,
    val_set: &Dataset,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(TrainState, TrainingHistory)> {
    let config = state.current.config().clone();
    config.validate()?;
    check_datasets(&config, train_set, val_set)?;
    let samples = prepare_samples(train_set)?;
    let val_samples = prepare_samples(val_set)?;
    let val_truths = val_set
        .records
        .iter()
        .map(|r| r.target_state().expect("targets checked"))
        .collect::<Result<Vec<_>>>()?;

    let root = RandomSource::new(config.seed);
    let width = config.dense[1];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = TrainingHistory::default();

    for epoch in state.epochs_completed + 1..=max_epochs {
        let mut rng = root.fork(epoch as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            let masks: Vec<DropoutMask> =
                (0..batch.len()).map(|_| DropoutMask::sample(width, config.dropout, &mut rng)).collect();
            let (batch_loss, grads) = gradients(&state.current, &batch, &masks)?;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss in epoch {epoch}")));
            }
            loss_sum += batch_loss * batch.len() as f64;
            adagrad_step(&mut state.current, &grads, config.learning_rate)?;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / samples.len() as f64,
            val_fidelity: mean_fidelity(&state.current, &val_samples, &val_truths)?,
        };
        if stats.val_fidelity > state.best_fidelity {
            state.best_fidelity = stats.val_fidelity;
            state.best_epoch = epoch;
            state.best = state.current.clone();
        }
        state.epochs_completed = epoch;
        on_epoch(&stats);
        history.epochs.push(stats);
    }
    Ok((state, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate;
    use crate::sampling::{Measure, StateEnsembleSpec};

    fn small_config(epochs: usize) -> NetworkConfig {
        NetworkConfig { dense: [32, 16], batch_size: 5, max_epochs: epochs, seed: 3, ..NetworkConfig::new(2) }
    }

    fn data(count: usize, seed: u64) -> Dataset {
        generate(&StateEnsembleSpec { num_qubits: 2, measure: Measure::HilbertSchmidt, count }, seed).unwrap()
    }

    #[test]
    fn overfit_loss_decreases() {
        let cfg = NetworkConfig { dropout: 0.0, ..small_config(50) };
        let ds = data(10, 1);
        let (_, history) = train(&cfg, &ds, &ds).unwrap();
        assert_eq!(history.len(), 50);
        assert!(history.epochs[49].mean_loss < history.epochs[0].mean_loss);
        assert!(history.epochs.iter().all(|e| (0.0..=1.0).contains(&e.val_fidelity)));
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_config(3);
        let (train_set, val_set) = (data(20, 1), data(5, 2));
        let a = train(&cfg, &train_set, &val_set).unwrap();
        let b = train(&cfg, &train_set, &val_set).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resume_continues_identically() {
        let cfg = small_config(4);
        let (train_set, val_set) = (data(20, 1), data(5, 2));
        let (full, full_hist) = train_resume(TrainState::fresh(&cfg).unwrap(), 4, &train_set, &val_set, |_| {}).unwrap();
        let (half, first) = train_resume(TrainState::fresh(&cfg).unwrap(), 2, &train_set, &val_set, |_| {}).unwrap();
        let (rest, second) = train_resume(half, 4, &train_set, &val_set, |_| {}).unwrap();
        assert_eq!(rest, full);
        let joined: Vec<_> = first.epochs.into_iter().chain(second.epochs).collect();
        assert_eq!(joined, full_hist.epochs);
    }

    #[test]
    fn best_epoch_is_returned() {
        let cfg = small_config(5);
        let (train_set, val_set) = (data(20, 1), data(5, 2));
        let (state, history) = train_resume(TrainState::fresh(&cfg).unwrap(), 5, &train_set, &val_set, |_| {}).unwrap();
        let best = history.best().unwrap();
        assert_eq!(state.best_epoch, best.epoch);
        let samples = prepare_samples(&val_set).unwrap();
        let truths: Vec<_> = val_set.records.iter().map(|r| r.target_state().unwrap().unwrap()).collect();
        assert_eq!(mean_fidelity(&state.best, &samples, &truths).unwrap(), best.val_fidelity);
    }

    #[test]
    fn dataset_errors() {
        let cfg = small_config(1);
        let empty = Dataset { records: vec![], ..data(1, 1) };
        assert!(train(&cfg, &empty, &data(2, 2)).is_err());
        let three = generate(&StateEnsembleSpec { num_qubits: 3, measure: Measure::HilbertSchmidt, count: 2 }, 1).unwrap();
        assert!(matches!(train(&cfg, &three, &three), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn untrained_inference_is_physical() {
        let cfg = NetworkConfig::new(2);
        let state = TrainState::fresh(&cfg).unwrap();
        let ds = data(20, 9);
        for r in &ds.records {
            infer(&state.current, &r.measurement).unwrap().validate().unwrap();
        }
        let mut rng = RandomSource::new(4);
        for _ in 0..20 {
            let v: Vec<f64> = (0..36).map(|_| rng.standard_normal()).collect();
            let rho = infer(&state.current, &MeasurementVector::new(2, v).unwrap()).unwrap();
            rho.validate().unwrap();
        }
        let wrong = MeasurementVector::new(3, vec![0.0; 216]).unwrap();
        assert!(matches!(infer(&state.current, &wrong), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn history_csv_schema() {
        let history = TrainingHistory {
            epochs: vec![EpochStats { epoch: 1, mean_loss: 0.5, val_fidelity: 0.75 }],
        };
        let mut out = Vec::new();
        history.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "epoch,mean_loss,val_mean_fidelity\n1,0.5,0.75\n");
        assert_eq!(TrainingHistory::read_csv(out.as_slice()).unwrap(), history);
        assert!(TrainingHistory::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
