use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use toml::Value;

use qrecon::adapt::{
    baseline_curves, engineered_pad_with, padding_experiment, reconstruct_adaptive, reconstruct_padded, subsystem_experiment,
    summarize_padding, summarize_subsystem, write_records_csv, write_summary_csv, CurveSummary, PaddingMode,
};
use qrecon::analytics::closed_form_avg_fidelity_hs;
use qrecon::dataset::{generate as generate_dataset, Dataset, DATASET_VERSION};
use qrecon::neuralnet::checkpoint::CHECKPOINT_VERSION;
use qrecon::neuralnet::{load_checkpoint, save_checkpoint, train_resume, NetworkConfig, Progress, TrainState, TrainingHistory};
use qrecon::qcore::{fidelity, ComplexMatrix, DensityMatrix};
use qrecon::sampling::{Measure, RandomSource, StateEnsembleSpec};
use qrecon::statefile::{save_states, STATE_VERSION};
use qrecon::tomography::SETTING_ORDER_TAG;
use qrecon::cholesky::TAU_LAYOUT_TAG;
use qrecon::Error;

use crate::config::{render, Settings};
use crate::error::CliError;
use crate::{BaselineArgs, Fig2Args, Fig3Args, GenerateArgs, ReconstructArgs, TrainArgs};

const TEST_STREAM: u64 = 0x7E57_0000;
const BASELINE_STREAM: u64 = 0xBA5E_0000;
const BASELINE_QUBITS: [usize; 3] = [1, 2, 3];

fn get<T: Clone>(field: &Option<T>, key: &str) -> Result<T, CliError> {
    Settings::get(field, key)
}

/// Core validation failures of user-supplied settings are usage errors.
fn as_usage<T>(r: qrecon::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        Error::InvalidArgument(msg) => CliError::Usage(msg),
        other => CliError::Core(other),
    })
}

fn measure_of(s: &Settings) -> Result<Measure, CliError> {
    as_usage(get(&s.measure, "measure")?.parse())
}

fn workers_of(s: &Settings) -> Result<usize, CliError> {
    match get(&s.workers, "workers")? {
        0 => Err(CliError::Usage("workers must be >= 1".into())),
        w => Ok(w),
    }
}

fn execution(workers: usize) -> &'static str {
    if workers <= 1 {
        "serial"
    } else {
        "parallel"
    }
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    RandomSource::new(seed).fork(stream).seed()
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_config(path: &Path, command: &str, exec: &str, settings: &Settings, extra: &[(&str, Value)]) -> Result<(), CliError> {
    let mut run: BTreeMap<String, Value> = BTreeMap::new();
    run.insert("command".into(), Value::String(command.into()));
    run.insert("execution".into(), Value::String(exec.into()));
    run.insert("qrecon_version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    run.insert("dataset_format_version".into(), Value::Integer(DATASET_VERSION.into()));
    run.insert("checkpoint_format_version".into(), Value::Integer(CHECKPOINT_VERSION.into()));
    run.insert("state_format_version".into(), Value::Integer(STATE_VERSION.into()));
    run.insert("setting_order_tag".into(), Value::Integer(SETTING_ORDER_TAG.into()));
    run.insert("tau_layout_tag".into(), Value::Integer(TAU_LAYOUT_TAG.into()));
    for (k, v) in extra {
        run.insert((*k).into(), v.clone());
    }
    fs::write(path, render(&run, settings))?;
    Ok(())
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

fn csv_file(path: &Path) -> Result<fs::File, CliError> {
    Ok(fs::File::create(path)?)
}

fn print_summary(rows: &[CurveSummary]) {
    for r in rows {
        let m = r.m.map_or("-".to_string(), |m| m.to_string());
        println!(
            "{:<10} {:<6} {:<12} m={:<2} n={:<2} mean={:.4} stderr={:.4} count={}",
            r.experiment,
            r.measure.name(),
            r.curve,
            m,
            r.n,
            r.estimate.mean,
            r.estimate.stderr,
            r.estimate.count
        );
    }
}

pub fn generate(args: &GenerateArgs, s: &Settings) -> Result<(), CliError> {
    let num_qubits = get(&s.qubits, "qubits")?;
    let count = match s.count {
        Some(c) => c,
        None => get(&s.train_count, "train_count")? + get(&s.val_count, "val_count")?,
    };
    let spec = StateEnsembleSpec { num_qubits, measure: measure_of(s)?, count };
    as_usage(spec.validate())?;
    let seed = get(&s.seed, "seed")?;
    if let Some(parent) = args.out.parent() {
        ensure_dir(parent)?;
    }
    let ds = generate_dataset(&spec, seed)?;
    ds.save(&args.out)?;
    let resolved = Settings { count: Some(count), ..s.clone() };
    let config_path = PathBuf::from(format!("{}.config.toml", args.out.display()));
    write_config(&config_path, "generate", "serial", &resolved, &[("output", path_value(&args.out))])?;
    println!("wrote {count} {}-qubit {} states to {}", num_qubits, spec.measure.name(), args.out.display());
    Ok(())
}

fn network_config(s: &Settings, num_qubits: usize) -> Result<NetworkConfig, CliError> {
    let cfg = NetworkConfig {
        num_qubits,
        filters: get(&s.filters, "filters")?,
        dense: [get(&s.dense1, "dense1")?, get(&s.dense2, "dense2")?],
        dropout: get(&s.dropout, "dropout")?,
        learning_rate: get(&s.learning_rate, "learning_rate")?,
        batch_size: get(&s.batch_size, "batch_size")?,
        max_epochs: get(&s.epochs, "epochs")?,
        seed: get(&s.seed, "seed")?,
    };
    as_usage(cfg.validate())?;
    Ok(cfg)
}

fn resume_state(dir: &Path, num_qubits: usize, epochs: usize) -> Result<(TrainState, TrainingHistory), CliError> {
    let last = load_checkpoint(dir.join("last.ckpt"))?;
    let best = load_checkpoint(dir.join("model.ckpt"))?;
    last.expect_qubits(num_qubits)?;
    best.expect_qubits(num_qubits)?;
    let history = TrainingHistory::read_csv(fs::File::open(dir.join("history.csv"))?)?;
    if history.len() != last.progress.epochs_completed {
        return Err(Error::Format(format!(
            "history has {} rows but the checkpoint completed {} epochs",
            history.len(),
            last.progress.epochs_completed
        ))
        .into());
    }
    if epochs < last.progress.epochs_completed {
        return Err(CliError::Usage(format!(
            "epochs = {epochs} is below the {} epochs already completed",
            last.progress.epochs_completed
        )));
    }
    let (mut current, mut best_params) = (last.params, best.params);
    current.set_max_epochs(epochs);
    best_params.set_max_epochs(epochs);
    let state = TrainState {
        current,
        best: best_params,
        epochs_completed: last.progress.epochs_completed,
        best_epoch: last.progress.best_epoch,
        best_fidelity: last.progress.best_fidelity,
    };
    Ok((state, history))
}

pub fn train(args: &TrainArgs, s: &Settings) -> Result<(), CliError> {
    let workers = workers_of(s)?;
    if workers > 1 {
        eprintln!("note: training always runs serially; --workers only affects experiments");
    }
    let data = Dataset::load(&args.data)?;
    let (train_set, val_set) = match &args.val {
        Some(path) => (data, Dataset::load(path)?),
        None => {
            let held = get(&s.val_count, "val_count")?;
            if held == 0 || held >= data.len() {
                return Err(Error::InvalidArgument(format!(
                    "cannot hold out {held} of {} records for validation",
                    data.len()
                ))
                .into());
            }
            data.split_tail(held)?
        }
    };
    let m = train_set.num_qubits;
    let epochs = get(&s.epochs, "epochs")?;
    let (state, prior) = match &args.resume {
        Some(dir) => resume_state(dir, m, epochs)?,
        None => (as_usage(TrainState::fresh(&network_config(s, m)?))?, TrainingHistory::default()),
    };
    let (state, history) = train_resume(state, epochs, &train_set, &val_set, |e| {
        eprintln!("epoch {:>4}  loss {:.6}  val fidelity {:.4}", e.epoch, e.mean_loss, e.val_fidelity);
    })?;

    ensure_dir(&args.out)?;
    let progress = Progress::of(&state);
    save_checkpoint(&state.best, progress, args.out.join("model.ckpt"))?;
    save_checkpoint(&state.current, progress, args.out.join("last.ckpt"))?;
    let full = TrainingHistory { epochs: prior.epochs.into_iter().chain(history.epochs).collect() };
    full.write_csv(csv_file(&args.out.join("history.csv"))?)?;

    let cfg = state.current.config();
    let resolved = Settings {
        qubits: Some(m),
        epochs: Some(epochs),
        filters: Some(cfg.filters),
        dense1: Some(cfg.dense[0]),
        dense2: Some(cfg.dense[1]),
        dropout: Some(cfg.dropout),
        learning_rate: Some(cfg.learning_rate),
        batch_size: Some(cfg.batch_size),
        seed: Some(cfg.seed),
        measure: Some(train_set.measure.name().into()),
        ..s.clone()
    };
    let mut extra = vec![
        ("train_data", path_value(&args.data)),
        ("train_records", Value::Integer(train_set.len() as i64)),
        ("val_records", Value::Integer(val_set.len() as i64)),
        ("best_epoch", Value::Integer(state.best_epoch as i64)),
    ];
    if let Some(v) = &args.val {
        extra.push(("val_data", path_value(v)));
    }
    if let Some(r) = &args.resume {
        extra.push(("resumed_from", path_value(r)));
    }
    write_config(&args.out.join("config.toml"), "train", "serial", &resolved, &extra)?;
    println!("best epoch {} with validation fidelity {:.4}; wrote {}", state.best_epoch, state.best_fidelity, args.out.display());
    Ok(())
}

fn bloch_state(text: &str) -> Result<DensityMatrix, CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("pad_bloch {text:?}: {e}")))?;
    let [x, y, z] = parts[..] else {
        return Err(CliError::Usage(format!("pad_bloch needs three components, got {text:?}")));
    };
    if x * x + y * y + z * z > 1.0 + 1e-12 {
        return Err(CliError::Usage(format!("pad_bloch {text:?} lies outside the Bloch ball")));
    }
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let m = ComplexMatrix::from_row_slice(2, 2, &[c(0.5 * (1.0 + z), 0.0), c(0.5 * x, -0.5 * y), c(0.5 * x, 0.5 * y), c(0.5 * (1.0 - z), 0.0)]);
    DensityMatrix::new(m).map_err(|e| CliError::Usage(format!("pad_bloch {text:?}: {e}")))
}

pub fn reconstruct(args: &ReconstructArgs, s: &Settings) -> Result<(), CliError> {
    let mode: PaddingMode = as_usage(get(&s.mode, "mode")?.parse())?;
    let filler = s.pad_bloch.as_deref().map(bloch_state).transpose()?;
    if filler.is_some() && mode == PaddingMode::Zero {
        return Err(CliError::Usage("pad_bloch only applies to engineered padding".into()));
    }
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let params = &ckpt.params;
    let m = params.config().num_qubits;
    let input = Dataset::load(&args.input)?;
    let n = input.num_qubits;
    if n > m {
        return Err(Error::DimensionMismatch(format!("{n}-qubit input exceeds the {m}-qubit network")).into());
    }
    let states = input
        .records
        .iter()
        .map(|r| match &filler {
            Some(f) => reconstruct_padded(params, &engineered_pad_with(&r.measurement, &vec![f.clone(); m - n])?, n),
            None => reconstruct_adaptive(params, &r.measurement, mode),
        })
        .collect::<qrecon::Result<Vec<_>>>()?;

    ensure_dir(&args.out)?;
    save_states(&states, args.out.join("states.rho"))?;
    if input.has_targets() {
        let mut out = csv::Writer::from_writer(csv_file(&args.out.join("fidelity.csv"))?);
        out.write_record(["state_id", "fidelity"])?;
        let mut total = 0.0;
        for (i, (rho, r)) in states.iter().zip(&input.records).enumerate() {
            let truth = r.target_state().expect("dataset has targets")?;
            let f = fidelity(rho, &truth)?;
            total += f;
            out.write_record([i.to_string(), f.to_string()])?;
        }
        out.flush()?;
        println!("mean fidelity {:.4} over {} states", total / states.len().max(1) as f64, states.len());
    }
    let resolved = Settings { qubits: Some(n), ..s.clone() };
    write_config(
        &args.out.join("config.toml"),
        "reconstruct",
        "serial",
        &resolved,
        &[("checkpoint", path_value(&args.checkpoint)), ("input", path_value(&args.input)), ("network_qubits", Value::Integer(m as i64))],
    )?;
    println!("wrote {} reconstructed {n}-qubit states to {}", states.len(), args.out.display());
    Ok(())
}

fn test_set(num_qubits: usize, s: &Settings) -> Result<Dataset, CliError> {
    let spec = StateEnsembleSpec { num_qubits, measure: measure_of(s)?, count: get(&s.test_count, "test_count")? };
    as_usage(spec.validate())?;
    Ok(generate_dataset(&spec, derived_seed(get(&s.seed, "seed")?, TEST_STREAM + num_qubits as u64))?)
}

fn write_experiment(
    out: &Path,
    command: &str,
    workers: usize,
    s: &Settings,
    records: &[qrecon::adapt::ExperimentRecord],
    summary: &[CurveSummary],
    extra: &[(&str, Value)],
) -> Result<(), CliError> {
    ensure_dir(out)?;
    write_records_csv(records, csv_file(&out.join("records.csv"))?)?;
    write_summary_csv(summary, csv_file(&out.join("summary.csv"))?)?;
    write_config(&out.join("config.toml"), command, execution(workers), s, extra)?;
    print_summary(summary);
    Ok(())
}

pub fn fig2(args: &Fig2Args, s: &Settings) -> Result<(), CliError> {
    let workers = workers_of(s)?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let m = ckpt.params.config().num_qubits;
    let test = match &args.test {
        Some(path) => Dataset::load(path)?,
        None => test_set(m, s)?,
    };
    let records = subsystem_experiment(&ckpt.params, &test, workers)?;
    let summary = summarize_subsystem(&records);
    let mut extra = vec![("checkpoint", path_value(&args.checkpoint))];
    if let Some(t) = &args.test {
        extra.push(("test_data", path_value(t)));
    }
    write_experiment(&args.out, "experiment fig2", workers, s, &records, &summary, &extra)
}

pub fn fig3(args: &Fig3Args, s: &Settings) -> Result<(), CliError> {
    let workers = workers_of(s)?;
    let ckpts = args.checkpoint.iter().map(load_checkpoint).collect::<qrecon::Result<Vec<_>>>()?;
    let max_m = ckpts.iter().map(|c| c.params.config().num_qubits).max().unwrap_or(0);
    let mut tests: Vec<Dataset> = Vec::new();
    for path in &args.test {
        let ds = Dataset::load(path)?;
        if tests.iter().any(|t| t.num_qubits == ds.num_qubits) {
            return Err(CliError::Usage(format!("two test sets for {} qubits", ds.num_qubits)));
        }
        tests.push(ds);
    }
    for n in 1..=max_m {
        if !tests.iter().any(|t| t.num_qubits == n) {
            tests.push(test_set(n, s)?);
        }
    }
    tests.sort_by_key(|t| t.num_qubits);
    let networks: Vec<_> = ckpts.iter().map(|c| &c.params).collect();
    let records = padding_experiment(&networks, &tests, workers)?;
    let mut summary = summarize_padding(&records);
    let pairs = get(&s.baseline_pairs, "baseline_pairs")?;
    let measures: Vec<Measure> = {
        let mut ms: Vec<Measure> = tests.iter().map(|t| t.measure).collect();
        ms.sort_by_key(|m| m.tag());
        ms.dedup();
        ms
    };
    let seed = get(&s.seed, "seed")?;
    for measure in measures {
        let rng = RandomSource::new(seed).fork(BASELINE_STREAM + measure.tag() as u64);
        let ns: Vec<usize> = (1..=max_m).collect();
        summary.extend(as_usage(baseline_curves("fig3", measure, &ns, pairs, &rng, workers))?);
    }
    let mut extra: Vec<(&str, Value)> =
        vec![("checkpoints", Value::Array(args.checkpoint.iter().map(|p| path_value(p)).collect()))];
    if !args.test.is_empty() {
        extra.push(("test_data", Value::Array(args.test.iter().map(|p| path_value(p)).collect())));
    }
    write_experiment(&args.out, "experiment fig3", workers, s, &records, &summary, &extra)
}

pub fn baselines(args: &BaselineArgs, s: &Settings) -> Result<(), CliError> {
    let workers = workers_of(s)?;
    let pairs = get(&s.baseline_pairs, "baseline_pairs")?;
    let seed = get(&s.seed, "seed")?;
    let mut rows = Vec::new();
    for measure in [Measure::HilbertSchmidt, Measure::Bures] {
        let rng = RandomSource::new(seed).fork(BASELINE_STREAM + measure.tag() as u64);
        rows.extend(as_usage(baseline_curves("baselines", measure, &BASELINE_QUBITS, pairs, &rng, workers))?);
    }
    ensure_dir(&args.out)?;
    write_summary_csv(&rows, csv_file(&args.out.join("baselines.csv"))?)?;

    let mut out = csv::Writer::from_writer(csv_file(&args.out.join("closed_form.csv"))?);
    out.write_record(["dim", "closed_form", "monte_carlo_mean", "monte_carlo_stderr", "consistent"])?;
    for n in BASELINE_QUBITS {
        let dim = 1usize << n;
        let mc = rows
            .iter()
            .find(|r| r.measure == Measure::HilbertSchmidt && r.curve == "random_pair" && r.n == n)
            .expect("baseline rows cover every qubit count")
            .estimate;
        let closed = closed_form_avg_fidelity_hs(dim)?;
        let consistent = (closed - mc.mean).abs() <= 3.0 * mc.stderr;
        out.write_record([dim.to_string(), closed.to_string(), mc.mean.to_string(), mc.stderr.to_string(), consistent.to_string()])?;
        if !consistent {
            eprintln!("note: closed form gives {closed:.4} for N = {dim}, Monte Carlo {:.4} ± {:.4}", mc.mean, mc.stderr);
        }
    }
    out.flush()?;
    write_config(&args.out.join("config.toml"), "baselines", execution(workers), s, &[])?;
    print_summary(&rows);
    Ok(())
}
