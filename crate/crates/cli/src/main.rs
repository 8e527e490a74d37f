//! `cogscreen`: command-line driver for the screening pipeline.
//!
//! Every command reads and writes inside the results directory (`--out`),
//! so a full run is `synth` (or `ingest`), `labels`, `segment`, `extract`,
//! `run`/`sweep` and finally `report`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cogscreen::config::PipelineConfig;
use cogscreen::corpus::{load_audio_with, load_manifest, read_wav, Cohort, Waveform};
use cogscreen::embeddings::{extract_all_layers_batch, extract_embedding_vector, EmbeddingBackend};
use cogscreen::experiments::{
    best_layer, layer_sweep, run_task_experiment, write_run, Dataset, ExperimentResult, LayerScore,
};
use cogscreen::features::{FeatureKind, FeatureStore, FeatureVector};
use cogscreen::functionals::extract_functionals_batch;
use cogscreen::report::{emit_layer_curve, render_results_table};
use cogscreen::scoring::{assign_labels, LabelSet};
use cogscreen::segmentation::{dump_segment, segment_cohort, Segment, SegmentRecord};
use cogscreen::synth::{generate_cohort, CohortSpec};
use cogscreen::Task;

#[derive(Parser)]
#[command(name = "cogscreen", version, about = "Speech-based cognitive impairment screening experiments")]
struct Cli {
    /// Pipeline configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Results directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Seed for synthesis and cross-validation; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a cohort manifest and make it the working cohort.
    Ingest { manifest: PathBuf },
    /// Generate a synthetic cohort and make it the working cohort.
    Synth {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        subjects: Option<usize>,
    },
    /// Derive class labels from raw scores.
    Labels,
    /// Cut sub-test and interview segments out of the session recordings.
    Segment,
    /// Compute features for every segment.
    Extract {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Only this embedding layer (1-based).
        #[arg(long)]
        layer: Option<usize>,
    },
    /// Nested cross-validated classification of one task.
    Run {
        #[arg(long)]
        task: Task,
        #[arg(long, value_enum)]
        kind: Kind,
    },
    /// Accuracy per embedding layer for one task.
    Sweep {
        #[arg(long)]
        task: Task,
    },
    /// Results table and layer curves from everything in the results directory.
    Report,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Reference,
    Strong,
    Null,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Functionals,
    Embedding,
}

impl From<Kind> for FeatureKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Functionals => FeatureKind::Functionals,
            Kind::Embedding => FeatureKind::Embedding,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e
                .chain()
                .find_map(|c| c.downcast_ref::<cogscreen::Error>())
                .is_some_and(cogscreen::Error::is_validation);
            ExitCode::from(if validation { 2 } else { 3 })
        }
    }
}

/// Validation failure raised by the CLI itself (missing prerequisites, bad flags).
fn invalid(message: impl Into<String>) -> anyhow::Error {
    cogscreen::Error::invalid(message).into()
}

struct Workspace {
    out: PathBuf,
    config: PipelineConfig,
}

impl Workspace {
    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn write_json<T: serde::Serialize>(&self, rel: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn read_json<T: serde::de::DeserializeOwned>(&self, rel: &str, made_by: &str) -> Result<T> {
        let path = self.path(rel);
        if !path.exists() {
            return Err(invalid(format!("{} not found; run `cogscreen {made_by}` first", path.display())));
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text).map_err(cogscreen::Error::from)?)
    }

    fn cohort(&self) -> Result<Cohort> {
        self.read_json("cohort.json", "ingest` or `cogscreen synth")
    }

    fn labels(&self) -> Result<LabelSet> {
        self.read_json("labels.json", "labels")
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.experiment.seed = seed;
        config.synth.seed = seed;
    }
    let ws = Workspace { out: cli.out.clone(), config };
    std::fs::create_dir_all(&ws.out).with_context(|| format!("creating {}", ws.out.display()))?;
    ws.write_json("config.json", &ws.config)?;

    match &cli.command {
        Command::Ingest { manifest } => ingest(&ws, manifest),
        Command::Synth { preset, subjects } => synth(&ws, *preset, *subjects),
        Command::Labels => labels(&ws),
        Command::Segment => segment(&ws),
        Command::Extract { kind, layer } => extract(&ws, (*kind).into(), *layer),
        Command::Run { task, kind } => run(&ws, *task, (*kind).into()),
        Command::Sweep { task } => sweep(&ws, *task),
        Command::Report => report(&ws),
    }
}

fn print_cohort(cohort: &Cohort) {
    println!(
        "{} subjects, {} recordings, {} segment spans, mean age {:.1}",
        cohort.subjects.len(),
        cohort.recordings.len(),
        cohort.segment_labels.len(),
        cohort.mean_age()
    );
}

fn ingest(ws: &Workspace, manifest: &Path) -> Result<()> {
    let cohort = load_manifest(manifest)?;
    ws.write_json("cohort.json", &cohort)?;
    print_cohort(&cohort);
    Ok(())
}

fn synth(ws: &Workspace, preset: Option<Preset>, subjects: Option<usize>) -> Result<()> {
    let seed = ws.config.synth.seed;
    let mut spec = match preset {
        None => ws.config.synth.clone(),
        Some(Preset::Reference) => CohortSpec::reference(seed),
        Some(Preset::Strong) => CohortSpec::strong(ws.config.synth.n_subjects, seed),
        Some(Preset::Null) => CohortSpec::null(ws.config.synth.n_subjects, seed),
    };
    if let Some(n) = subjects {
        spec.n_subjects = n;
    }
    let generated = generate_cohort(&spec, &ws.config.scoring)?;
    let dir = ws.path("synth");
    generated.write(&dir)?;
    let (_, oracle) = generated.verify(&ws.config.scoring)?;
    ws.write_json("synth/oracle.json", &oracle)?;
    let cohort = load_manifest(&dir.join("manifest.json"))?;
    ws.write_json("cohort.json", &cohort)?;
    print_cohort(&cohort);
    println!("generator/scorer agreement {:.1} %", 100.0 * oracle.agreement());
    Ok(())
}

fn labels(ws: &Workspace) -> Result<()> {
    let cohort = ws.cohort()?;
    let labels = assign_labels(&cohort, &ws.config.scoring)?;
    ws.write_json("labels.json", &labels)?;
    let csv_path = ws.path("labels.csv");
    let file = std::fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    labels.write_csv(file)?;
    println!("verbal-fluency threshold z = {:.3}", labels.threshold);
    for task in Task::ALL {
        let (non, imp) = labels.split(task);
        println!("{task:<10} {non} non-impaired / {imp} impaired");
    }
    for e in &labels.excluded {
        println!("excluded {}: {}", e.subject_id, e.reason);
    }
    Ok(())
}

fn segment(ws: &Workspace) -> Result<()> {
    let cohort = ws.cohort()?;
    let mode = ws.config.channel_mode;
    let segments = segment_cohort(&cohort, &Task::ALL, |rec| load_audio_with(rec, mode))?;
    let dir = ws.path("segments");
    let records = segments.iter().map(|s| dump_segment(&dir, s)).collect::<cogscreen::Result<Vec<_>>>()?;
    ws.write_json("segments/index.json", &records)?;
    let mut counts: BTreeMap<Task, usize> = BTreeMap::new();
    for s in &segments {
        *counts.entry(s.kind).or_default() += 1;
    }
    for (task, n) in counts {
        println!("{task:<10} {n} segments");
    }
    Ok(())
}

fn load_segments(ws: &Workspace) -> Result<Vec<Segment>> {
    let records: Vec<SegmentRecord> = ws.read_json("segments/index.json", "segment")?;
    records
        .iter()
        .map(|r| {
            let pcm = read_wav(&r.path)?;
            let samples = pcm.channels.into_iter().next().unwrap_or_default();
            Ok(Segment {
                subject_id: r.subject_id.clone(),
                kind: r.kind,
                index: r.index,
                waveform: Waveform::new(samples, pcm.sample_rate),
                offset_s: r.offset_s,
            })
        })
        .collect()
}

fn store_name(kind: FeatureKind, layer: Option<usize>) -> String {
    match layer {
        Some(l) => format!("{kind}_l{l:02}"),
        None => kind.to_string(),
    }
}

fn write_store(ws: &Workspace, vectors: &[FeatureVector], extractor: serde_json::Value) -> Result<String> {
    let store = FeatureStore::from_vectors(vectors, extractor)?;
    let name = store_name(store.sidecar.kind, store.sidecar.layer);
    store.write(&ws.path("features"), &name)?;
    Ok(name)
}

fn extract(ws: &Workspace, kind: FeatureKind, layer: Option<usize>) -> Result<()> {
    let segments = load_segments(ws)?;
    let mut written = Vec::new();
    match kind {
        FeatureKind::Functionals => {
            if layer.is_some() {
                return Err(invalid("--layer applies to embeddings only"));
            }
            let config = &ws.config.functionals;
            let vectors = extract_functionals_batch(&segments, config)?;
            written.push(write_store(ws, &vectors, serde_json::to_value(config)?)?);
        }
        FeatureKind::Embedding => {
            let config = &ws.config.embedding;
            let backend: Box<dyn EmbeddingBackend> = config.backend.build()?;
            let extractor = serde_json::to_value(config)?;
            match layer {
                Some(l) => {
                    let vectors = segments
                        .iter()
                        .map(|s| extract_embedding_vector(s, backend.as_ref(), l, config))
                        .collect::<cogscreen::Result<Vec<_>>>()?;
                    written.push(write_store(ws, &vectors, extractor)?);
                }
                None => {
                    let per_segment = extract_all_layers_batch(&segments, backend.as_ref(), config)?;
                    for l in 0..backend.num_layers() {
                        let vectors: Vec<FeatureVector> = per_segment.iter().map(|v| v[l].clone()).collect();
                        written.push(write_store(ws, &vectors, extractor.clone())?);
                    }
                }
            }
        }
    }
    println!("{} segments -> features/{{{}}}", segments.len(), written.join(","));
    Ok(())
}

fn load_features(ws: &Workspace, kind: FeatureKind) -> Result<Vec<FeatureVector>> {
    let dir = ws.path("features");
    let mut names: Vec<String> = match std::fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".json")).map(str::to_owned))
            .filter(|n| n == &kind.to_string() || n.starts_with(&format!("{kind}_l")))
            .collect(),
        Err(_) => Vec::new(),
    };
    names.sort();
    if names.is_empty() {
        return Err(invalid(format!("no {kind} features in {}; run `cogscreen extract --kind {kind}` first", dir.display())));
    }
    let mut vectors = Vec::new();
    for n in names {
        vectors.extend(FeatureStore::read(&dir, &n)?.to_vectors());
    }
    Ok(vectors)
}

fn dataset(ws: &Workspace, task: Task, kind: FeatureKind) -> Result<Dataset> {
    let labels = ws.labels()?;
    let vectors = load_features(ws, kind)?;
    Ok(Dataset::from_vectors(task, &vectors, &labels)?)
}

fn run(ws: &Workspace, task: Task, kind: FeatureKind) -> Result<()> {
    let ds = dataset(ws, task, kind)?;
    let exp = &ws.config.experiment;
    let outcome = run_task_experiment(&ds, &exp.grid, &exp.protocol, exp.seed)?;
    write_run(&ws.path("runs"), &format!("{task}_{kind}"), &outcome)?;
    let r = &outcome.result;
    println!("{task} {kind}: {} over {} folds", cogscreen::report::format_cell(r.mean, r.std), r.folds.len());
    for f in &r.folds {
        let layer = f.selection.layer.map_or(String::new(), |l| format!(" layer={l}"));
        println!(
            "  fold {}: {:.1} % ({}/{}) gamma={:e} C={:e}{layer}",
            f.fold, f.accuracy, f.correct, f.n_test, f.selection.gamma, f.selection.c
        );
    }
    if let Some(v) = &r.subject_vote {
        println!("  subject vote: {} ({})", cogscreen::report::format_cell(v.mean, v.std), v.note);
    }
    Ok(())
}

fn sweep(ws: &Workspace, task: Task) -> Result<()> {
    let ds = dataset(ws, task, FeatureKind::Embedding)?;
    let exp = &ws.config.experiment;
    let scores = layer_sweep(&ds, &exp.grid, &exp.protocol, exp.seed)?;
    ws.write_json(&format!("sweeps/{task}.json"), &scores)?;
    for s in &scores {
        println!("layer {:>2}: {}", s.layer, cogscreen::report::format_cell(s.mean, s.std));
    }
    if let Some(best) = best_layer(&scores) {
        println!("best layer {best}");
    }
    Ok(())
}

fn json_files(dir: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = match std::fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".json") && keep(n)))
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    Ok(files)
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(cogscreen::Error::from)?)
}

fn report(ws: &Workspace) -> Result<()> {
    let run_files = json_files(&ws.path("runs"), |n| !n.ends_with("_folds.json") && !n.ends_with("_models.json"))?;
    let results = run_files.iter().map(|p| read_json_file::<ExperimentResult>(p)).collect::<Result<Vec<_>>>()?;
    let mut sweeps: BTreeMap<Task, Vec<LayerScore>> = BTreeMap::new();
    for p in json_files(&ws.path("sweeps"), |_| true)? {
        let task: Task = p
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .parse()
            .map_err(|_| invalid(format!("unexpected sweep file {}", p.display())))?;
        sweeps.insert(task, read_json_file(&p)?);
    }
    if results.is_empty() && sweeps.is_empty() {
        return Err(invalid("nothing to report; run `cogscreen run` or `cogscreen sweep` first"));
    }
    let dir = ws.path("report");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    let mut text = String::new();
    if !results.is_empty() {
        let table = render_results_table(&results);
        text = table.to_text();
        write("results.txt", &text)?;
        write("results.csv", &table.to_csv()?)?;
        write("summary.csv", &table.summary_csv()?)?;
    }
    if !sweeps.is_empty() {
        let curve = emit_layer_curve(&sweeps)?;
        write("layer_curve.csv", &curve.csv)?;
        write("layer_curve.svg", &curve.svg)?;
    }
    print!("{text}");
    for (task, scores) in &sweeps {
        if let Some(best) = best_layer(scores) {
            println!("{task}: best layer {best}");
        }
    }
    Ok(())
}
