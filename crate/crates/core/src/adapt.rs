//! Reconstruction of `n`-qubit states with a network trained on `m >= n`
//! qubits, and the subsystem and padding experiments built on it.
//!
//! Padding appends `m − n` fictitious qubits in the most-significant
//! positions, so joint index `e·6^n + i` pairs extra setting tuple `e` with
//! original index `i`. After inference those qubits are traced out again.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::analytics::{mc_avg_fidelity, mc_avg_fidelity_vs_mixed, Estimate};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::neuralnet::{infer, NetworkParams};
use crate::parallel::map_indexed;
use crate::qcore::{fidelity, tensor_states, trace_leading, DensityMatrix};
use crate::sampling::{Measure, RandomSource};
use crate::tomography::{measure, num_outcomes, MeasurementVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PaddingMode {
    Engineered,
    Zero,
}

impl PaddingMode {
    pub const ALL: [PaddingMode; 2] = [PaddingMode::Engineered, PaddingMode::Zero];

    pub fn name(self) -> &'static str {
        match self {
            PaddingMode::Engineered => "engineered",
            PaddingMode::Zero => "zero",
        }
    }
}

impl fmt::Display for PaddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PaddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "engineered" => Ok(PaddingMode::Engineered),
            "zero" => Ok(PaddingMode::Zero),
            other => Err(Error::InvalidArgument(format!("unknown padding mode {other:?}"))),
        }
    }
}

fn check_target(n: usize, m: usize) -> Result<()> {
    if m < n {
        return Err(Error::DimensionMismatch(format!("cannot pad {n} qubits down to {m}")));
    }
    Ok(())
}

/// Measurement vector of ρ ⊗ (I/2)^{⊗(m−n)} with the mixed qubits leading.
pub fn engineered_pad(v: &MeasurementVector, m: usize) -> Result<MeasurementVector> {
    let n = v.num_qubits();
    check_target(n, m)?;
    let scale = 0.5f64.powi((m - n) as i32);
    let reps = num_outcomes(m - n);
    let mut out = Vec::with_capacity(reps * v.values().len());
    for _ in 0..reps {
        out.extend(v.values().iter().map(|x| x * scale));
    }
    MeasurementVector::new(m, out)
}

/// Like [`engineered_pad`] but with arbitrary single-qubit states for the
/// fictitious qubits; `fillers[0]` becomes qubit 0.
pub fn engineered_pad_with(v: &MeasurementVector, fillers: &[DensityMatrix]) -> Result<MeasurementVector> {
    if let Some(bad) = fillers.iter().find(|f| f.num_qubits() != 1) {
        return Err(Error::DimensionMismatch(format!("padding states must be single-qubit, got {} qubits", bad.num_qubits())));
    }
    let Some((first, rest)) = fillers.split_first() else {
        return Ok(v.clone());
    };
    let extra = rest.iter().fold(first.clone(), |acc, s| tensor_states(&acc, s));
    let weights = measure(&extra);
    let mut out = Vec::with_capacity(weights.values().len() * v.values().len());
    for w in weights.values() {
        out.extend(v.values().iter().map(|x| x * w));
    }
    MeasurementVector::new(v.num_qubits() + fillers.len(), out)
}

/// `v` in the first 6^n slots, zeros elsewhere.
pub fn zero_pad(v: &MeasurementVector, m: usize) -> Result<MeasurementVector> {
    check_target(v.num_qubits(), m)?;
    let mut out = vec![0.0; num_outcomes(m)];
    out[..v.values().len()].copy_from_slice(v.values());
    MeasurementVector::new(m, out)
}

pub fn pad(v: &MeasurementVector, m: usize, mode: PaddingMode) -> Result<MeasurementVector> {
    match mode {
        PaddingMode::Engineered => engineered_pad(v, m),
        PaddingMode::Zero => zero_pad(v, m),
    }
}

/// Infers from an already padded vector and traces out the leading qubits
/// down to `n`.
pub fn reconstruct_padded(params: &NetworkParams, padded: &MeasurementVector, n: usize) -> Result<DensityMatrix> {
    let full = infer(params, padded)?;
    check_target(n, full.num_qubits())?;
    if n == 0 {
        return Err(Error::TraceAll);
    }
    trace_leading(&full, full.num_qubits() - n)
}

/// pad → infer → trace out the appended qubits.
pub fn reconstruct_adaptive(params: &NetworkParams, v: &MeasurementVector, mode: PaddingMode) -> Result<DensityMatrix> {
    let m = params.config().num_qubits;
    if v.num_qubits() > m {
        return Err(Error::DimensionMismatch(format!(
            "{}-qubit measurements exceed the {m}-qubit network",
            v.num_qubits()
        )));
    }
    reconstruct_padded(params, &pad(v, m, mode)?, v.num_qubits())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    /// Fidelity of the full reconstruction and of each leading-qubit trace-down.
    Subsystem,
    /// Fidelity of padded reconstructions of smaller systems.
    Padding,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Subsystem => "fig2",
            Experiment::Padding => "fig3",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub experiment: Experiment,
    pub measure: Measure,
    pub m: usize,
    pub n: usize,
    pub mode: Option<PaddingMode>,
    pub state_id: usize,
    pub fidelity_full: f64,
    /// Entry `k` is the fidelity after tracing out qubits `0..=k`.
    pub fidelity_traces: Vec<f64>,
}

fn truths(ds: &Dataset) -> Result<Vec<DensityMatrix>> {
    ds.records
        .iter()
        .enumerate()
        .map(|(i, r)| r.target_state().unwrap_or_else(|| Err(Error::InvalidArgument(format!("test record {i} has no ground truth")))))
        .collect()
}

/// Per test state: full reconstruction fidelity and the fidelities of
/// Tr₀, Tr₀₁, … against the same trace-downs of the truth.
pub fn subsystem_experiment(params: &NetworkParams, test: &Dataset, workers: usize) -> Result<Vec<ExperimentRecord>> {
    let m = params.config().num_qubits;
    if test.num_qubits != m {
        return Err(Error::DimensionMismatch(format!("{}-qubit test set for a {m}-qubit network", test.num_qubits)));
    }
    let truth = truths(test)?;
    map_indexed(test.len(), workers, |i| {
        let rho = infer(params, &test.records[i].measurement)?;
        let fidelity_full = fidelity(&rho, &truth[i])?;
        let fidelity_traces = (1..m)
            .map(|k| fidelity(&trace_leading(&rho, k)?, &trace_leading(&truth[i], k)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentRecord {
            experiment: Experiment::Subsystem,
            measure: test.measure,
            m,
            n: m,
            mode: None,
            state_id: i,
            fidelity_full,
            fidelity_traces,
        })
    })
}

/// For every network (size m) and every n in 1..=m, reconstructs the n-qubit
/// test set with both padding modes. `tests` must hold one set per n used.
pub fn padding_experiment(networks: &[&NetworkParams], tests: &[Dataset], workers: usize) -> Result<Vec<ExperimentRecord>> {
    let mut records = Vec::new();
    for params in networks {
        let m = params.config().num_qubits;
        for n in 1..=m {
            let test = tests
                .iter()
                .find(|t| t.num_qubits == n)
                .ok_or_else(|| Error::InvalidArgument(format!("no {n}-qubit test set for the {m}-qubit network")))?;
            let truth = truths(test)?;
            for mode in PaddingMode::ALL {
                records.extend(map_indexed(test.len(), workers, |i| {
                    let rho = reconstruct_adaptive(params, &test.records[i].measurement, mode)?;
                    Ok(ExperimentRecord {
                        experiment: Experiment::Padding,
                        measure: test.measure,
                        m,
                        n,
                        mode: Some(mode),
                        state_id: i,
                        fidelity_full: fidelity(&rho, &truth[i])?,
                        fidelity_traces: Vec::new(),
                    })
                })?);
            }
        }
    }
    Ok(records)
}

/// Columns: experiment, measure, m, n, mode, state_id, fidelity_full,
/// fidelity_trace1, … (as many as the longest record needs).
pub fn write_records_csv(records: &[ExperimentRecord], w: impl Write) -> Result<()> {
    let traces = records.iter().map(|r| r.fidelity_traces.len()).max().unwrap_or(0);
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["experiment", "measure", "m", "n", "mode", "state_id", "fidelity_full"].map(String::from).to_vec();
    header.extend((1..=traces).map(|k| format!("fidelity_trace{k}")));
    out.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.experiment.name().to_string(),
            r.measure.name().to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.mode.map_or("none", PaddingMode::name).to_string(),
            r.state_id.to_string(),
            r.fidelity_full.to_string(),
        ];
        row.extend((0..traces).map(|k| r.fidelity_traces.get(k).map_or(String::new(), f64::to_string)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// One plotted curve point.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveSummary {
    pub experiment: String,
    pub measure: Measure,
    pub curve: String,
    /// Network size; `None` for baselines.
    pub m: Option<usize>,
    /// Qubits in the compared state.
    pub n: usize,
    pub estimate: Estimate,
}

/// Curves `full`, `trace1`, … per network size.
pub fn summarize_subsystem(records: &[ExperimentRecord]) -> Vec<CurveSummary> {
    let mut keys: Vec<(Measure, usize)> = records
        .iter()
        .filter(|r| r.experiment == Experiment::Subsystem)
        .map(|r| (r.measure, r.m))
        .collect();
    keys.sort_by_key(|&(measure, m)| (measure.tag(), m));
    keys.dedup();
    let mut out = Vec::new();
    for (measure, m) in keys {
        let group: Vec<&ExperimentRecord> = records
            .iter()
            .filter(|r| r.experiment == Experiment::Subsystem && r.measure == measure && r.m == m)
            .collect();
        let full: Vec<f64> = group.iter().map(|r| r.fidelity_full).collect();
        out.push(CurveSummary { experiment: "fig2".into(), measure, curve: "full".into(), m: Some(m), n: m, estimate: Estimate::from_samples(&full) });
        for k in 1..m {
            let vals: Vec<f64> = group.iter().filter_map(|r| r.fidelity_traces.get(k - 1).copied()).collect();
            out.push(CurveSummary {
                experiment: "fig2".into(),
                measure,
                curve: format!("trace{k}"),
                m: Some(m),
                n: m - k,
                estimate: Estimate::from_samples(&vals),
            });
        }
    }
    out
}

/// One curve per (measure, m, mode), one point per n.
pub fn summarize_padding(records: &[ExperimentRecord]) -> Vec<CurveSummary> {
    let mut keys: Vec<(u32, usize, PaddingMode, usize)> = records
        .iter()
        .filter(|r| r.experiment == Experiment::Padding)
        .filter_map(|r| r.mode.map(|mode| (r.measure.tag(), r.m, mode, r.n)))
        .collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(tag, m, mode, n)| {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.experiment == Experiment::Padding && r.measure.tag() == tag && r.m == m && r.mode == Some(mode) && r.n == n)
                .map(|r| r.fidelity_full)
                .collect();
            CurveSummary {
                experiment: "fig3".into(),
                measure: Measure::from_tag(tag).expect("tag came from a Measure"),
                curve: mode.name().into(),
                m: Some(m),
                n,
                estimate: Estimate::from_samples(&vals),
            }
        })
        .collect()
}

/// `random_pair` and `mixed` baseline points for each qubit count. Qubit
/// count `n` draws pairs from `rng.fork(2n)` and mixed-state comparisons
/// from `rng.fork(2n + 1)`.
pub fn baseline_curves(experiment: &str, measure: Measure, qubits: &[usize], draws: usize, rng: &RandomSource, workers: usize) -> Result<Vec<CurveSummary>> {
    let mut out = Vec::new();
    for &n in qubits {
        let dim = 1usize << n;
        let pair = mc_avg_fidelity(measure, dim, draws, &rng.fork(2 * n as u64), workers)?;
        let mixed = mc_avg_fidelity_vs_mixed(measure, dim, draws, &rng.fork(2 * n as u64 + 1), workers)?;
        for (curve, estimate) in [("random_pair", pair), ("mixed", mixed)] {
            out.push(CurveSummary { experiment: experiment.into(), measure, curve: curve.into(), m: None, n, estimate });
        }
    }
    Ok(out)
}

/// Columns: experiment, measure, curve, m, n, mean, stderr, count.
pub fn write_summary_csv(rows: &[CurveSummary], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["experiment", "measure", "curve", "m", "n", "mean", "stderr", "count"])?;
    for r in rows {
        out.write_record([
            r.experiment.clone(),
            r.measure.name().to_string(),
            r.curve.clone(),
            r.m.map_or(String::new(), |m| m.to_string()),
            r.n.to_string(),
            r.estimate.mean.to_string(),
            r.estimate.stderr.to_string(),
            r.estimate.count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
