//! Acceptance suite: one line per criterion.
//!
//! Runs without the libtest harness so every criterion is evaluated and
//! reported even when an earlier one fails. The process exits nonzero only
//! when a criterion outside `KNOWN_RED` fails.

mod common;

use std::time::{Duration, Instant};

use cogscreen::embeddings::{
    combine_pooled, extract_all_layers_batch, extract_layer_states, pool_mean, EmbeddingConfig, PooledWindow,
    StubBackend, WindowInput,
};
use cogscreen::experiments::{
    best_layer, layer_sweep, plan_outer_folds, run_task_experiment, train_rbf_classifier, Dataset, GridSpace,
    Protocol, SolverOptions,
};
use cogscreen::functionals::{extract_functionals_batch, FunctionalsConfig};
use cogscreen::report::{format_cell, render_results_table};
use cogscreen::scoring::{assign_labels, derive_z_threshold, ScoringConfig, ThresholdInput, ThresholdRule};
use cogscreen::segmentation::segment_cohort;
use cogscreen::synth::{generate_cohort, CohortSpec, SynthCohort};
use cogscreen::{Impairment, Task};
use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Criteria expected to fail; see the project decisions ledger.
const KNOWN_RED: [u32; 1] = [1];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixed_scoring() -> ScoringConfig {
    ScoringConfig { threshold: ThresholdRule::Fixed(-1.2), ..ScoringConfig::default() }
}

// 1: frame count and width of one 10 s window
fn window_contract() -> Outcome {
    let backend = StubBackend::constant(768, 12);
    let samples = vec![0.0f32; 160_000];
    let input = WindowInput { samples: &samples, sample_rate: 16_000, source: "zeros", start_s: 0.0, end_s: 10.0 };
    let states = extract_layer_states(&backend, &input).map_err(|e| e.to_string())?;
    let shapes: Vec<(usize, usize)> = states.iter().map(|m| m.dim()).collect();
    let layers_ok = states.len() == 12 && shapes.iter().all(|s| *s == (449, 768));
    let constant_ok = states.iter().enumerate().all(|(l, m)| m.iter().all(|v| *v == (l + 1) as f32));
    check(
        layers_ok && constant_ok,
        format!("expected 12 x (449, 768), got {} x {:?}", states.len(), shapes.first()),
    )
}

// 2: label splits on the mirrored cohort
fn labeling_splits() -> Outcome {
    let synth = generate_cohort(&CohortSpec::reference(0), &fixed_scoring()).map_err(|e| e.to_string())?;
    let labels = assign_labels(&synth.cohort, &fixed_scoring()).map_err(|e| e.to_string())?;
    let derived = assign_labels(&synth.cohort, &ScoringConfig::default()).map_err(|e| e.to_string())?;
    let got = [labels.split(Task::Skt3), labels.split(Task::Skt7), labels.split(Task::Cerad1)];
    let want = [(54, 47), (50, 51), (50, 51)];
    check(
        got == want,
        format!(
            "non/impaired skt3 {:?} skt7 {:?} cerad1 {:?}; derived threshold {:.3}",
            got[0], got[1], got[2], derived.threshold
        ),
    )
}

/// Scans every midpoint between consecutive distinct concordant z values
/// and keeps the best by (agreement, balance over all subjects, |θ|, θ).
fn midpoint_scan(entries: &[ThresholdInput]) -> Option<f64> {
    let concordant: Vec<&ThresholdInput> = entries.iter().filter(|e| e.skt3 == e.skt7).collect();
    let mut zs: Vec<f64> = concordant.iter().map(|e| e.z).collect();
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    zs.dedup();
    let candidates: Vec<f64> = zs.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect();
    let score = |theta: f64| {
        let agree = concordant.iter().filter(|e| (e.z <= theta) == (e.skt3 == Impairment::Impaired)).count() as i64;
        let below = entries.iter().filter(|e| e.z <= theta).count() as i64;
        let imbalance = (2 * below - entries.len() as i64).abs();
        (agree, -imbalance)
    };
    let top = candidates.iter().map(|&t| score(t)).max()?;
    let tied: Vec<f64> = candidates.into_iter().filter(|&t| score(t) == top).collect();
    let least_abs = tied.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min);
    tied.into_iter().filter(|t| t.abs() == least_abs).reduce(f64::min)
}

// 3: derived threshold vs exhaustive scan
fn threshold_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    let mut undefined = 0;
    for _ in 0..100 {
        let entries: Vec<ThresholdInput> = (0..40)
            .map(|_| {
                let impaired = rng.random_bool(0.5);
                let skt3 = if impaired { Impairment::Impaired } else { Impairment::NonImpaired };
                let skt7 = if rng.random_bool(0.3) { skt3.flipped() } else { skt3 };
                let centre = if impaired { -1.7 } else { -0.5 };
                let z: f64 = centre + rng.sample::<f64, _>(StandardNormal);
                // quantised so ties between subjects occur
                ThresholdInput { skt3, skt7, z: (z * 10.0).round() / 10.0 }
            })
            .collect();
        match (midpoint_scan(&entries), derive_z_threshold(&entries)) {
            (Some(want), Ok(got)) if want == got => {}
            (None, Err(_)) => undefined += 1,
            _ => mismatches += 1,
        }
    }
    check(mismatches == 0, format!("{mismatches} of 100 cohorts disagree ({undefined} undefined on both sides)"))
}

// 4: speaker-disjoint, partitioning fold plans
fn leakage_audit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut leaks = 0;
    let mut broken = 0;
    for plan_no in 0..100 {
        let per_subject = if plan_no % 2 == 0 { 1 } else { 4 };
        let n_subjects = rng.random_range(10..=60);
        let mut subject_labels: Vec<Impairment> = (0..n_subjects)
            .map(|_| if rng.random_bool(0.5) { Impairment::Impaired } else { Impairment::NonImpaired })
            .collect();
        subject_labels[0] = Impairment::Impaired;
        subject_labels[1] = Impairment::NonImpaired;
        let groups: Vec<String> =
            (0..n_subjects * per_subject).map(|i| format!("S{:03}", i / per_subject)).collect();
        let labels: Vec<Impairment> = (0..groups.len()).map(|i| subject_labels[i / per_subject]).collect();
        let plan = plan_outer_folds(&labels, &groups, 5, rng.random()).map_err(|e| e.to_string())?;

        let mut hits = vec![0usize; labels.len()];
        for fold in &plan.folds {
            for &i in &fold.test {
                hits[i] += 1;
            }
            let test_subjects: Vec<&String> = fold.test.iter().map(|&i| &groups[i]).collect();
            if fold.train.iter().any(|&i| test_subjects.contains(&&groups[i])) {
                leaks += 1;
            }
            let mut all: Vec<usize> = fold.train.iter().chain(&fold.test).copied().collect();
            all.sort_unstable();
            if all != (0..labels.len()).collect::<Vec<_>>() {
                broken += 1;
            }
        }
        if plan.folds.len() != 5 || hits.iter().any(|&h| h != 1) {
            broken += 1;
        }
    }
    check(leaks == 0 && broken == 0, format!("{leaks} leaking folds, {broken} non-partitioning plans"))
}

struct Prepared {
    functionals: Dataset,
    build_time: Duration,
}

fn strong_cohort() -> Result<SynthCohort, String> {
    generate_cohort(&CohortSpec::strong(60, 1), &fixed_scoring()).map_err(|e| e.to_string())
}

fn functionals_dataset(synth: &SynthCohort, task: Task) -> Result<Prepared, String> {
    let t = Instant::now();
    let (labels, _) = synth.verify(&fixed_scoring()).map_err(|e| e.to_string())?;
    let segments = segment_cohort(&synth.cohort, &[task], synth.loader()).map_err(|e| e.to_string())?;
    let vectors = extract_functionals_batch(&segments, &FunctionalsConfig::default()).map_err(|e| e.to_string())?;
    let functionals = Dataset::from_vectors(task, &vectors, &labels).map_err(|e| e.to_string())?;
    Ok(Prepared { functionals, build_time: t.elapsed() })
}

// 5: permuted labels stay near chance
fn chance_control(prepared: &Prepared) -> Outcome {
    let ds = &prepared.functionals;
    let grid = GridSpace::default();
    let mut means = Vec::new();
    for rep in 0..20u64 {
        let mut labels = ds.labels.clone();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(1000 + rep));
        let permuted = ds.with_labels(labels).map_err(|e| e.to_string())?;
        let run = run_task_experiment(&permuted, &grid, &Protocol::default(), rep).map_err(|e| e.to_string())?;
        means.push(run.result.mean);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    check((40.0..=60.0).contains(&mean), format!("mean {mean:.1}% over 20 permutations"))
}

// 6: strong effects are recovered, beating a nearest-centroid oracle
fn separability(prepared: &Prepared) -> Outcome {
    let ds = &prepared.functionals;
    let x = &ds.view(None).map_err(|e| e.to_string())?.x;
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let y: Vec<bool> = ds.labels.iter().map(|l| *l == Impairment::Impaired).collect();
    let plan = plan_outer_folds(&ds.labels, &ds.subjects, 5, 0).map_err(|e| e.to_string())?;
    let folds: Vec<(Vec<usize>, Vec<usize>)> = plan.folds.iter().map(|f| (f.train.clone(), f.test.clone())).collect();
    let oracle = common::centroid_cv_accuracy(&rows, &y, &folds);
    if oracle < 85.0 {
        return Err(format!("centroid oracle only {oracle:.1}%; cohort is not separable enough to judge"));
    }
    let run = run_task_experiment(ds, &GridSpace::default(), &Protocol::default(), 0).map_err(|e| e.to_string())?;
    let svm = run.result.mean;
    let table = render_results_table(std::slice::from_ref(&run.result));
    check(
        svm >= 90.0 && svm >= oracle,
        format!("svm {} vs centroid oracle {oracle:.1}%", table.cell(run.result.kind, run.result.task)),
    )
}

// 7: the informative layer is found by the sweep and by inner selection
fn layer_recovery(synth: &SynthCohort) -> Outcome {
    let (labels, _) = synth.verify(&fixed_scoring()).map_err(|e| e.to_string())?;
    let segments = segment_cohort(&synth.cohort, &[Task::Skt7], synth.loader()).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    let mut ok = true;
    for layer in [8, 5] {
        let backend = StubBackend::signal(768, 12, layer);
        let vectors: Vec<_> = extract_all_layers_batch(&segments, &backend, &EmbeddingConfig::default())
            .map_err(|e| e.to_string())?
            .into_iter()
            .flatten()
            .collect();
        let ds = Dataset::from_vectors(Task::Skt7, &vectors, &labels).map_err(|e| e.to_string())?;
        let grid = GridSpace::default();
        let sweep = layer_sweep(&ds, &grid, &Protocol::default(), 0).map_err(|e| e.to_string())?;
        let argmax = best_layer(&sweep);
        let run = run_task_experiment(&ds, &grid, &Protocol::default(), 0).map_err(|e| e.to_string())?;
        let picked = run.result.folds.iter().filter(|f| f.selection.layer == Some(layer)).count();
        ok &= argmax == Some(layer) && picked >= 4;
        details.push(format!("signal {layer}: argmax {argmax:?}, picked in {picked}/5 folds"));
    }
    check(ok, details.join("; "))
}

// 8: trained classifier vs exhaustive dual oracle
fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gammas = [1.0, 0.1, 0.01, 1e-3, 1e-4, 1e-5];
    let cs = [0.1, 1.0, 10.0, 100.0, 1000.0];
    let mut worst = 0.0f64;
    let mut fits = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-3.0..3.0));
        let mut y: Vec<Impairment> = (0..n)
            .map(|_| if rng.random_bool(0.5) { Impairment::Impaired } else { Impairment::NonImpaired })
            .collect();
        y[0] = Impairment::Impaired;
        y[1] = Impairment::NonImpaired;
        let ys: Vec<f64> = y.iter().map(|l| if *l == Impairment::Impaired { 1.0 } else { -1.0 }).collect();
        let probes = Array2::from_shape_fn((n + 3, 2), |(i, j)| if i < n { x[[i, j]] } else { rng.random_range(-4.0..4.0) });
        for &gamma in &gammas {
            for &c in &cs {
                let k: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| kern(x.view(), i, x.view(), j, gamma)).collect()).collect();
                let (alpha, rho) = common::brute_force_dual(&k, &ys, c);
                let model = train_rbf_classifier(x.view(), &y, gamma, c, false, &SolverOptions::default())
                    .map_err(|e| e.to_string())?;
                for p in 0..probes.nrows() {
                    let want: f64 = (0..n).map(|i| alpha[i] * ys[i] * kern(x.view(), i, probes.view(), p, gamma)).sum::<f64>() - rho;
                    worst = worst.max((model.decision(probes.row(p)) - want).abs());
                }
                fits += 1;
            }
        }
    }
    check(worst <= 1e-3, format!("worst decision gap {worst:.2e} over {fits} fits"))
}

fn kern(a: ArrayView2<'_, f64>, i: usize, b: ArrayView2<'_, f64>, j: usize, gamma: f64) -> f64 {
    let d: f64 = a.row(i).iter().zip(b.row(j)).map(|(u, v)| (u - v).powi(2)).sum();
    (-gamma * d).exp()
}

fn relative_gap(a: &[f64], b: &[f64], scale: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(scale)
        .map(|((x, y), s)| (x - y).abs() / s.max(x.abs()).max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

// 9: pooling is order-free and window-associative
fn pooling_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let dim = rng.random_range(1..=16);
        let parts = rng.random_range(1..=5);
        let mats: Vec<Array2<f32>> = (0..parts)
            .map(|_| {
                let rows = rng.random_range(1..=30);
                let offset: f32 = rng.random_range(-50.0..50.0);
                Array2::from_shape_fn((rows, dim), |_| offset + rng.sample::<f32, _>(StandardNormal))
            })
            .collect();
        let views: Vec<ArrayView2<'_, f32>> = mats.iter().map(|m| m.view()).collect();
        let all: Vec<Vec<f32>> = mats.iter().flat_map(|m| m.rows().into_iter().map(|r| r.to_vec())).collect();
        // per-column mean magnitude, the natural scale of the result
        let scale: Vec<f64> = (0..dim).map(|d| all.iter().map(|r| (r[d] as f64).abs()).sum::<f64>() / all.len() as f64).collect();

        let reference = pool_mean(&views).map_err(|e| e.to_string())?;
        let mut shuffled = all.clone();
        shuffled.shuffle(&mut rng);
        let flat: Vec<f32> = shuffled.into_iter().flatten().collect();
        let permuted = Array2::from_shape_vec((all.len(), dim), flat).map_err(|e| e.to_string())?;
        worst = worst.max(relative_gap(&reference, &pool_mean(&[permuted.view()]).map_err(|e| e.to_string())?, &scale));

        let windows: Vec<PooledWindow> = mats
            .iter()
            .map(|m| Ok(PooledWindow { mean: pool_mean(&[m.view()])?, rows: m.nrows() }))
            .collect::<cogscreen::Result<_>>()
            .map_err(|e| e.to_string())?;
        let flat_combined = combine_pooled(&windows).map_err(|e| e.to_string())?;
        worst = worst.max(relative_gap(&reference, &flat_combined.mean, &scale));
        let split = rng.random_range(1..=windows.len());
        let left = combine_pooled(&windows[..split]).map_err(|e| e.to_string())?;
        let nested = if split < windows.len() {
            let right = combine_pooled(&windows[split..]).map_err(|e| e.to_string())?;
            combine_pooled(&[left, right]).map_err(|e| e.to_string())?
        } else {
            left
        };
        if nested.rows != all.len() {
            return Err(format!("nested combine counted {} rows, expected {}", nested.rows, all.len()));
        }
        worst = worst.max(relative_gap(&flat_combined.mean, &nested.mean, &scale));
    }
    check(worst <= 1e-9, format!("worst relative error {worst:.2e} over 1000 inputs"))
}

// 10: table cell convention
fn reporting_fidelity() -> Outcome {
    let cell = format_cell(78.05, 5.44);
    check(cell == "78.1±5.4", format!("format_cell(78.05, 5.44) = {cell:?}"))
}

fn main() {
    let mut results: Vec<(u32, Outcome, Duration)> = Vec::new();
    let mut run = |id: u32, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let outcome = f();
        let elapsed = t.elapsed();
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let note = if outcome.is_err() && KNOWN_RED.contains(&id) { " [known red]" } else { "" };
        println!("criterion {id:>2}: {status} ({detail}) [{:.1} s]{note}", elapsed.as_secs_f64());
        results.push((id, outcome, elapsed));
    };

    run(1, &window_contract);
    run(2, &labeling_splits);
    run(3, &threshold_oracle);
    run(4, &leakage_audit);
    run(8, &solver_oracle);
    run(9, &pooling_algebra);
    run(10, &reporting_fidelity);

    match strong_cohort() {
        Ok(synth) => {
            match functionals_dataset(&synth, Task::Skt3) {
                Ok(prepared) => {
                    println!("(strong cohort functionals built in {:.1} s)", prepared.build_time.as_secs_f64());
                    run(5, &|| chance_control(&prepared));
                    run(6, &|| separability(&prepared));
                }
                Err(e) => {
                    run(5, &|| Err(e.clone()));
                    run(6, &|| Err(e.clone()));
                }
            }
            run(7, &|| layer_recovery(&synth));
        }
        Err(e) => {
            for id in [5, 6, 7] {
                run(id, &|| Err(e.clone()));
            }
        }
    }

    results.sort_by_key(|r| r.0);
    let unexpected: Vec<u32> = results
        .iter()
        .filter(|(id, outcome, _)| outcome.is_err() && !KNOWN_RED.contains(id))
        .map(|r| r.0)
        .collect();
    let passed = results.iter().filter(|r| r.1.is_ok()).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
