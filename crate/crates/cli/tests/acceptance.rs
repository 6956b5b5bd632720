//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! cargo test -p qrecon-cli --test acceptance

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use qrecon::adapt::{engineered_pad, reconstruct_adaptive, subsystem_experiment, summarize_subsystem, PaddingMode};
use qrecon::analytics::{mc_avg_fidelity, mc_avg_fidelity_vs_mixed, Estimate};
use qrecon::cholesky::{rho_to_tau, tau_layout, tau_to_rho};
use qrecon::dataset::{generate, Dataset};
use qrecon::neuralnet::{batch_loss, gradients, infer, train, DropoutMask, NetworkConfig, NetworkParams, Sample};
use qrecon::neuralnet::reshape_input;
use qrecon::qcore::{fidelity, partial_trace, tensor_states, DensityMatrix};
use qrecon::sampling::{sample_hs, Measure, RandomSource, StateEnsembleSpec};
use qrecon::tomography::measure;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(results: &mut Vec<(usize, Outcome)>, id: usize, name: &str, o: Outcome) {
    println!("criterion {id:>2} {:<28} {}  {}", name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    results.push((id, o));
}

// 1 ----------------------------------------------------------------------

struct Baselines {
    hs_pair: [Estimate; 3],
    hs_mixed: [Estimate; 3],
    bures_pair: [Estimate; 2],
    bures_mixed: [Estimate; 2],
}

fn criterion_baselines() -> (Outcome, Baselines) {
    let start = Instant::now();
    let rng = RandomSource::new(2024);
    let pairs = 100_000;
    let hs_pair = [2, 4, 8].map(|d| mc_avg_fidelity(Measure::HilbertSchmidt, d, pairs, &rng.fork(d as u64), 1).unwrap());
    let bures_pair = [2, 4].map(|d| mc_avg_fidelity(Measure::Bures, d, pairs, &rng.fork(100 + d as u64), 1).unwrap());
    let elapsed = start.elapsed().as_secs_f64();
    let hs_mixed = [2, 4, 8].map(|d| mc_avg_fidelity_vs_mixed(Measure::HilbertSchmidt, d, pairs, &rng.fork(200 + d as u64), 1).unwrap());
    let bures_mixed = [2, 4].map(|d| mc_avg_fidelity_vs_mixed(Measure::Bures, d, pairs, &rng.fork(300 + d as u64), 1).unwrap());

    let targets = [0.67, 0.59, 0.57];
    let hs_ok = hs_pair.iter().zip(targets).all(|(e, t)| (e.mean - t).abs() <= 0.01);
    let bures_ok = (bures_pair[0].mean - 0.590).abs() <= 0.01;
    let o = outcome(
        hs_ok && bures_ok && elapsed < 120.0,
        format!(
            "HS N=2/4/8: {:.4}/{:.4}/{:.4}, Bures N=2: {:.4}, {:.1}s",
            hs_pair[0].mean, hs_pair[1].mean, hs_pair[2].mean, bures_pair[0].mean, elapsed
        ),
    );
    (o, Baselines { hs_pair, hs_mixed, bures_pair, bures_mixed })
}

// 2 ----------------------------------------------------------------------

fn criterion_monotonicity() -> Outcome {
    let rng = RandomSource::new(77);
    let mut violations = 0;
    let mut checks = 0;
    let mut worst = f64::NEG_INFINITY;
    for m in [2usize, 3] {
        // every non-empty proper subset of qubits to discard
        let subsets: Vec<Vec<usize>> = (1..(1usize << m) - 1)
            .map(|mask| (0..m).filter(|q| mask >> q & 1 == 1).collect())
            .collect();
        for i in 0..1000u64 {
            let mut r = rng.fork(m as u64 * 10_000 + i);
            let a = sample_hs(m, &mut r).unwrap();
            let b = sample_hs(m, &mut r).unwrap();
            let full = fidelity(&a, &b).unwrap();
            for remove in &subsets {
                let reduced = fidelity(&partial_trace(&a, remove).unwrap(), &partial_trace(&b, remove).unwrap()).unwrap();
                checks += 1;
                worst = worst.max(full - reduced);
                if full > reduced + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations in {checks} checks, max F(full)-F(reduced) = {worst:.3e}"))
}

// 3 ----------------------------------------------------------------------

fn criterion_padding_oracle() -> Outcome {
    let rng = RandomSource::new(31);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..4usize {
        for m in n + 1..=4 {
            for i in 0..100u64 {
                let rho = sample_hs(n, &mut rng.fork((n * 10 + m) as u64 * 1000 + i)).unwrap();
                let padded = engineered_pad(&measure(&rho), m).unwrap();
                let mut extended = rho.clone();
                for _ in n..m {
                    extended = tensor_states(&DensityMatrix::maximally_mixed(1), &extended);
                }
                let oracle = measure(&extended);
                for (a, b) in padded.values().iter().zip(oracle.values()) {
                    worst = worst.max((a - b).abs());
                }
                cases += 1;
            }
        }
    }
    outcome(worst <= 1e-13, format!("{cases} states over 6 (n, m) pairs, max deviation {worst:.2e}"))
}

// 4 ----------------------------------------------------------------------

fn criterion_cholesky() -> Outcome {
    let rng = RandomSource::new(41);
    let mut worst = 0.0f64;
    for m in [2usize, 3] {
        for i in 0..1000u64 {
            let rho = sample_hs(m, &mut rng.fork(m as u64 * 10_000 + i)).unwrap();
            let back = tau_to_rho(&rho_to_tau(&rho).unwrap()).unwrap();
            worst = worst.max(1.0 - fidelity(&back, &rho).unwrap());
        }
    }
    // d = 4: diagonal first, then (re, im) per sub-diagonal by offset, top to bottom
    let mut expected: Vec<(usize, usize, bool)> = (0..4).map(|i| (i, i, false)).collect();
    for offset in 1..4 {
        for col in 0..4 - offset {
            expected.push((col + offset, col, false));
            expected.push((col + offset, col, true));
        }
    }
    let mut positions = vec![(usize::MAX, usize::MAX, false); 16];
    for slot in tau_layout(4).unwrap() {
        positions[slot.re] = (slot.row, slot.col, false);
        if let Some(im) = slot.im {
            positions[im] = (slot.row, slot.col, true);
        }
    }
    let layout_ok = positions == expected;
    outcome(
        worst <= 1e-9 && layout_ok,
        format!("max fidelity deficit {worst:.2e} over 2000 states, d=4 layout {}", if layout_ok { "exact" } else { "WRONG" }),
    )
}

// 5 ----------------------------------------------------------------------

fn criterion_gradients() -> Outcome {
    let cfg = NetworkConfig { filters: 2, dense: [6, 4], ..NetworkConfig::new(2) };
    let mut rng = RandomSource::new(51);
    let mut params = NetworkParams::init(&cfg, &mut rng).unwrap();
    let specs = params.specs().to_vec();
    for spec in specs.iter().filter(|s| s.dims.len() == 1) {
        for v in &mut params.values_mut()[spec.range()] {
            *v = 0.1 * rng.standard_normal();
        }
    }
    let samples: Vec<Sample> = (0..4)
        .map(|_| {
            let rho = sample_hs(2, &mut rng).unwrap();
            Sample { grid: reshape_input(&measure(&rho)).unwrap(), target: rho_to_tau(&rho).unwrap().values().to_vec() }
        })
        .collect();
    let batch: Vec<&Sample> = samples.iter().collect();
    let masks: Vec<DropoutMask> = (0..4).map(|_| DropoutMask::sample(cfg.dense[1], cfg.dropout, &mut rng)).collect();
    let (_, grad) = gradients(&params, &batch, &masks).unwrap();
    let h = 1e-5;
    let mut per_layer: Vec<(String, f64)> = Vec::new();
    let mut worst = 0.0f64;
    for spec in &specs {
        let layer = spec.name.split('.').next().unwrap_or("").to_string();
        let mut layer_worst = 0.0f64;
        for k in spec.range() {
            let mut plus = params.clone();
            plus.values_mut()[k] += h;
            let mut minus = params.clone();
            minus.values_mut()[k] -= h;
            let fd = (batch_loss(&plus, &batch, &masks).unwrap() - batch_loss(&minus, &batch, &masks).unwrap()) / (2.0 * h);
            let scale = grad[k].abs().max(fd.abs());
            if scale > 1e-9 {
                layer_worst = layer_worst.max((grad[k] - fd).abs() / scale);
            }
        }
        worst = worst.max(layer_worst);
        match per_layer.iter_mut().find(|(name, _)| *name == layer) {
            Some(entry) => entry.1 = entry.1.max(layer_worst),
            None => per_layer.push((layer, layer_worst)),
        }
    }
    let detail = per_layer.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(worst <= 1e-4, format!("{} params, max rel error per layer: {detail}", params.len()))
}

// 6-9 --------------------------------------------------------------------

struct Trained {
    params: NetworkParams,
    test_fidelity: Estimate,
    seconds: f64,
}

fn ensemble(m: usize, measure: Measure, count: usize, seed: u64) -> Dataset {
    generate(&StateEnsembleSpec { num_qubits: m, measure, count }, seed).unwrap()
}

fn train_desk(m: usize, measure: Measure) -> Trained {
    let start = Instant::now();
    let base = 1000 * m as u64 + measure.tag() as u64;
    let train_set = ensemble(m, measure, 4000, base + 1);
    let val_set = ensemble(m, measure, 200, base + 2);
    let test_set = ensemble(m, measure, 500, base + 3);
    let cfg = NetworkConfig { max_epochs: 50, seed: base, ..NetworkConfig::new(m) };
    let (params, _) = train(&cfg, &train_set, &val_set).unwrap();
    let fids: Vec<f64> = test_set
        .records
        .iter()
        .map(|r| fidelity(&infer(&params, &r.measurement).unwrap(), &r.target_state().unwrap().unwrap()).unwrap())
        .collect();
    Trained { params, test_fidelity: Estimate::from_samples(&fids), seconds: start.elapsed().as_secs_f64() }
}

fn check_training(t: &Trained, threshold: f64, random_pair: f64, mixed: f64) -> Outcome {
    let f = t.test_fidelity.mean;
    outcome(
        f >= threshold && f > random_pair && f > mixed && t.seconds <= 1200.0,
        format!(
            "test fidelity {f:.4} ± {:.4} (need >= {threshold}, baselines {random_pair:.3}/{mixed:.3}), {:.0}s",
            t.test_fidelity.stderr, t.seconds
        ),
    )
}

fn check_padding(params: &NetworkParams, measure: Measure, random_pair: f64) -> Outcome {
    let test = ensemble(1, measure, 500, 9000 + measure.tag() as u64);
    let mean = |mode| {
        let fids: Vec<f64> = test
            .records
            .iter()
            .map(|r| fidelity(&reconstruct_adaptive(params, &r.measurement, mode).unwrap(), &r.target_state().unwrap().unwrap()).unwrap())
            .collect();
        Estimate::from_samples(&fids).mean
    };
    let (eng, zero) = (mean(PaddingMode::Engineered), mean(PaddingMode::Zero));
    outcome(
        eng - zero >= 0.05 && zero >= random_pair - 0.02,
        format!("n=1 engineered {eng:.4}, zero {zero:.4} (gap {:.1} pp), random pair {random_pair:.4}", 100.0 * (eng - zero)),
    )
}

fn check_subsystem_trend(measure: Measure) -> Outcome {
    let trained = train_desk(3, measure);
    let test = ensemble(3, measure, 500, 8000 + measure.tag() as u64);
    let summary = summarize_subsystem(&subsystem_experiment(&trained.params, &test, 1).unwrap());
    let ok = summary.windows(2).all(|w| {
        let (a, b) = (&w[0].estimate, &w[1].estimate);
        a.mean <= b.mean + 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
    });
    let curve = summary.iter().map(|s| format!("{} {:.4}±{:.4}", s.curve, s.estimate.mean, s.estimate.stderr)).collect::<Vec<_>>().join(", ");
    outcome(ok, format!("m=3: {curve}, {:.0}s", trained.seconds))
}

// 10 ---------------------------------------------------------------------

fn run_cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_qrecon"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn pipeline(dir: &Path) -> bool {
    let steps: [&[&str]; 6] = [
        &["generate", "--qubits", "2", "--count", "300", "--seed", "5", "--out", "data/train.bin"],
        &["generate", "--qubits", "1", "--count", "20", "--seed", "6", "--out", "data/one.bin"],
        &["train", "--data", "data/train.bin", "--val-count", "50", "--epochs", "3", "--seed", "2", "--out", "net"],
        &["reconstruct", "--checkpoint", "net/model.ckpt", "--input", "data/one.bin", "--out", "rec"],
        &["experiment", "fig3", "--checkpoint", "net/model.ckpt", "--test-count", "30", "--baseline-pairs", "500", "--out", "fig3"],
        &["experiment", "fig2", "--checkpoint", "net/model.ckpt", "--test-count", "30", "--out", "fig2"],
    ];
    steps.iter().all(|args| run_cli(dir, args))
}

fn files_under(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if !pipeline(a.path()) || !pipeline(b.path()) {
        return outcome(false, "CLI pipeline failed".into());
    }
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    if fa != fb {
        return outcome(false, "runs produced different file sets".into());
    }
    let differing: Vec<String> = fa
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap())
        .map(|f| f.display().to_string())
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} files byte-identical across two serial runs", fa.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() {
    // the harness is invoked with libtest flags such as --list; only run on a plain invocation
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let mut results = Vec::new();
    let (o, base) = criterion_baselines();
    report(&mut results, 1, "baseline reproduction", o);
    report(&mut results, 2, "monotonicity", criterion_monotonicity());
    report(&mut results, 3, "padding oracle", criterion_padding_oracle());
    report(&mut results, 4, "cholesky roundtrip", criterion_cholesky());
    report(&mut results, 5, "gradient correctness", criterion_gradients());

    let hs = train_desk(2, Measure::HilbertSchmidt);
    report(&mut results, 6, "desk-scale training", check_training(&hs, 0.85, base.hs_pair[1].mean, base.hs_mixed[1].mean));
    report(&mut results, 7, "padding ordering (n=1)", check_padding(&hs.params, Measure::HilbertSchmidt, base.hs_pair[0].mean));
    report(&mut results, 8, "subsystem trend (m=3)", check_subsystem_trend(Measure::HilbertSchmidt));

    let bures = train_desk(2, Measure::Bures);
    let parts = [
        check_training(&bures, 0.80, base.bures_pair[1].mean, base.bures_mixed[1].mean),
        check_padding(&bures.params, Measure::Bures, base.bures_pair[0].mean),
        check_subsystem_trend(Measure::Bures),
    ];
    let pass = parts.iter().all(|p| p.pass);
    let detail = ["6", "7", "8"]
        .iter()
        .zip(&parts)
        .map(|(k, p)| format!("[{k}' {}] {}", if p.pass { "ok" } else { "FAIL" }, p.detail))
        .collect::<Vec<_>>()
        .join(" ");
    report(&mut results, 9, "Bures replication", outcome(pass, detail));
    report(&mut results, 10, "determinism", criterion_determinism());

    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(id, _)| *id).collect();
    println!("acceptance: {} of {} passed in {:.0}s", results.len() - failed.len(), results.len(), start.elapsed().as_secs_f64());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
