//! Command implementations behind the `acida` binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use acida::bundle::{load_bundle, save_bundle};
use acida::config::RunConfig;
use acida::domain::{
    split_scenarios, validate_manifest, DatasetManifest, RefResolver, Scenario, SourceRef, SplitTag,
    ValidatedManifest,
};
use acida::embeddings::{CropStage, EmbeddingCache};
use acida::harness::{
    read_raw, report_from_raw, run_benchmark, write_det_plot, write_outputs, Ablation, EvalOptions,
    MetricsReport, ReportContext,
};
use acida::io::read_json;
use acida::pipeline::{train_pipeline, DataSources, Pipeline};
use acida::synth::{gen_benchmark, BenchmarkSummary, SyntheticConfig};
use acida::{Error, ErrorKind, Result};
use clap::{Parser, Subcommand};

/// Environment variable that overrides the embedding cache directory.
pub const CACHE_DIR_ENV: &str = "ACIDA_CACHE_DIR";

#[derive(Parser, Debug)]
#[command(name = "acida", version)]
#[command(about = "Differential morphing attack detection: train, evaluate and report")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic benchmark: three manifests plus the vector store
    GenSynthetic(GenSyntheticArgs),
    /// Train the attempt classifier and both detectors, then write a bundle
    Train(TrainArgs),
    /// Score a test manifest with a bundle and write the report files
    Evaluate(EvaluateArgs),
    /// Recompute the report from a raw scores CSV
    Report(ReportArgs),
    /// Draw the DET plot of a report JSON
    PlotDet(PlotDetArgs),
}

#[derive(clap::Args, Debug)]
pub struct GenSyntheticArgs {
    /// Output directory
    #[arg(short, long)]
    pub out: PathBuf,
    /// Generator settings (TOML); flags override its keys
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Morphing factor; repeat for several
    #[arg(long = "alpha")]
    pub alphas: Vec<f64>,
    /// Number of synthetic identities
    #[arg(long)]
    pub identities: Option<usize>,
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    /// Run configuration (TOML); flags override its keys
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    /// Directory of precomputed vectors
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Output bundle directory
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(clap::Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Directory of precomputed vectors; defaults to the one used in training
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Output directory for report.json, report.txt, raw_scores.csv, det.svg
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// accomplice, criminal or both; all three when omitted
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// full, ida_only, id_only, artifact_only, oracle_ac or bf_route_ida
    #[arg(long, default_value = "full")]
    pub ablation: Ablation,
    /// Number of similarity bins
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(clap::Args, Debug)]
pub struct ReportArgs {
    /// Raw scores CSV written by `evaluate`
    #[arg(long)]
    pub raw: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Bundle whose fusion settings and seed to use; defaults otherwise
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<Scenario>,
    #[arg(long, default_value = "full")]
    pub ablation: Ablation,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(clap::Args, Debug)]
pub struct PlotDetArgs {
    /// Report JSON written by `evaluate` or `report`
    #[arg(long)]
    pub report: PathBuf,
    /// SVG output path
    #[arg(short, long)]
    pub out: PathBuf,
}

/// Process exit code for a failure.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Model => 4,
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(a, out),
        Command::Train(a) => train(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Report(a) => report(a, out),
        Command::PlotDet(a) => plot_det(a, out),
    }
}

fn say(out: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    out.write_all(text.as_ref().as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn load_synthetic_config(path: &Path) -> Result<SyntheticConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn gen_synthetic(args: GenSyntheticArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => load_synthetic_config(p)?,
        None => SyntheticConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if !args.alphas.is_empty() {
        config.alpha_set = args.alphas.clone();
    }
    if let Some(n) = args.identities {
        config.n_identities = n;
    }
    config.validate()?;
    let bench = gen_benchmark(&config)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    bench.write(&args.out)?;
    say(out, render_summary(&bench.summary, &args.out))
}

fn render_summary(summary: &BenchmarkSummary, dir: &Path) -> String {
    let mut s = format!(
        "synthetic benchmark in {} (seed {}, {} identities, d = {}, alpha {:?})\n",
        dir.display(),
        summary.config.seed,
        summary.config.n_identities,
        summary.config.d,
        summary.config.alpha_set,
    );
    s.push_str(&format!(
        "{:<11} {:>8} {:>9} {:>8} {:>10} {:>8} {:>8} {:>8}\n",
        "split", "subjects", "bona fide", "criminal", "accomplice", "cos bf", "cos crim", "cos acc"
    ));
    for sp in &summary.splits {
        s.push_str(&format!(
            "{:<11} {:>8} {:>9} {:>8} {:>10} {:>8.3} {:>8.3} {:>8.3}\n",
            format!("{:?}", sp.split).to_lowercase(),
            sp.subjects,
            sp.bona_fide,
            sp.criminal,
            sp.accomplice,
            sp.mean_cosine_bona_fide,
            sp.mean_cosine_criminal,
            sp.mean_cosine_accomplice,
        ));
    }
    s.push_str(&format!("subject-disjoint splits: {}\n", summary.subject_disjoint));
    s
}

/// Accepts a reference when its vector is in the store or cache, or its image file exists.
struct StoreResolver<'a> {
    provider_id: &'a str,
    sources: &'a DataSources,
}

impl RefResolver for StoreResolver<'_> {
    fn resolves(&self, r: &SourceRef) -> bool {
        let key = r.key();
        if self.sources.store.contains(self.provider_id, &key) || self.sources.cache.contains(self.provider_id, &key) {
            return true;
        }
        match r {
            SourceRef::Embedding(_) => false,
            SourceRef::Image(p) => match &self.sources.image_root {
                Some(root) => root.join(p).is_file(),
                None => Path::new(p).is_file(),
            },
        }
    }
}

fn open_sources(config: &RunConfig, store: Option<&Path>) -> Result<DataSources> {
    let store = match store {
        Some(dir) => EmbeddingCache::open(dir)?,
        None => EmbeddingCache::in_memory(),
    };
    let cache_dir = std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .or_else(|| config.paths.cache_dir.clone());
    let cache = match cache_dir {
        Some(dir) => EmbeddingCache::open(dir)?,
        None => EmbeddingCache::in_memory(),
    };
    Ok(DataSources {
        store: Arc::new(store),
        cache: Arc::new(cache),
        crop_stage: CropStage::Passthrough,
        image_root: config.paths.image_root.clone(),
        artifact_channel: config.artifact_channel.clone(),
    })
}

fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| Error::Config(format!("no {what} given (flag or config paths)")))
}

fn load_manifest(path: &Path, split: SplitTag, config: &RunConfig, sources: &DataSources) -> Result<ValidatedManifest> {
    let manifest = DatasetManifest::load(path, split)?;
    let resolver = StoreResolver {
        provider_id: &config.provider.id,
        sources,
    };
    validate_manifest(manifest, &resolver)
}

pub fn train(args: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    let paths = &mut config.paths;
    paths.train_manifest = Some(required(args.train, &paths.train_manifest, "training manifest")?);
    paths.val_manifest = Some(required(args.val, &paths.val_manifest, "validation manifest")?);
    paths.bundle = Some(required(args.bundle, &paths.bundle, "bundle directory")?);
    if args.store.is_some() {
        paths.store = args.store;
    }
    config.validate()?;

    let sources = open_sources(&config, config.paths.store.as_deref())?;
    let p = &config.paths;
    let train = load_manifest(p.train_manifest.as_ref().unwrap(), SplitTag::Train, &config, &sources)?;
    let val = load_manifest(p.val_manifest.as_ref().unwrap(), SplitTag::Validation, &config, &sources)?;
    let bundle = p.bundle.clone().unwrap();

    let pool = thread_pool(config.jobs)?;
    let pipeline = pool.install(|| train_pipeline(&config, &train, &val, sources))?;
    save_bundle(&pipeline.models, &bundle)?;
    pipeline.sources.cache.flush()?;

    let m = &pipeline.models;
    let (tc, vc) = (train.counts(), val.counts());
    let log = &m.ida.training_log;
    let mut s = format!(
        "trained on {} pairs ({} bona fide, {} criminal, {} accomplice); validation {} pairs\n",
        tc.total(),
        tc.bona_fide,
        tc.criminal,
        tc.accomplice,
        vc.total()
    );
    s.push_str(&format!("provider: {} (d = {})\n", m.provider.id, m.provider.dimension));
    s.push_str(&format!("artifact extractor: {}\n", m.ida.extractor_id));
    s.push_str(&format!(
        "identity-artifact head {:?}: {} epochs, best epoch {}{}\n",
        m.ida.head.architecture(),
        log.epochs.len(),
        log.best_epoch,
        if log.stopped_early { " (stopped early)" } else { "" }
    ));
    if let Some(best) = log.epochs.get(log.best_epoch.saturating_sub(1)) {
        s.push_str(&format!(
            "  train loss {:.4}, validation loss {}\n",
            best.train_loss,
            best.validation_loss.map_or("-".to_string(), |v| format!("{v:.4}"))
        ));
    }
    s.push_str(&format!("bundle written to {}\n", bundle.display()));
    say(out, s)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} workers: {e}")))
}

pub fn evaluate(args: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let models = load_bundle(&args.bundle)?;
    let config = models.config.clone();
    let store = args.store.or_else(|| config.paths.store.clone());
    let sources = open_sources(&config, store.as_deref())?;
    let test_path = required(args.test, &config.paths.test_manifest, "test manifest")?;
    let out_dir = required(args.out, &config.paths.output, "output directory")?;
    let test = load_manifest(&test_path, SplitTag::Test, &config, &sources)?;
    let splits = split_scenarios(&test);
    for s in Scenario::ALL {
        if splits.get(s).is_degenerate() {
            say(out, format!("warning: {s} scenario has a single class; its metrics are omitted\n"))?;
        }
    }

    let pipeline = Pipeline::from_models(models, sources)?;
    let options = EvalOptions {
        ablation: args.ablation,
        scenario: args.scenario,
        bins: args.bins,
    };
    let jobs = args.jobs.unwrap_or(config.jobs);
    let (report, raw) = run_benchmark(&pipeline, &test, &options, jobs)?;
    pipeline.sources.cache.flush()?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    write_outputs(&out_dir, &report, Some(&raw))?;
    say(out, acida::harness::render_text(&report))?;
    say(out, format!("outputs written to {}\n", out_dir.display()))
}

pub fn report(args: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let raw = read_raw(&args.raw)?;
    let ctx = match &args.bundle {
        Some(dir) => {
            let models = load_bundle(dir)?;
            ReportContext {
                fusion: models.config.fusion,
                seed: models.seed,
                similarity_source: models.provider.id.clone(),
                config: Some(models.config),
            }
        }
        None => ReportContext {
            similarity_source: "raw scores".to_string(),
            ..Default::default()
        },
    };
    let options = EvalOptions {
        ablation: args.ablation,
        scenario: args.scenario,
        bins: args.bins,
    };
    let report = report_from_raw(&raw, &options, &ctx)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_outputs(&args.out, &report, None)?;
    say(out, acida::harness::render_text(&report))
}

pub fn plot_det(args: PlotDetArgs, out: &mut dyn Write) -> Result<()> {
    let report: MetricsReport = read_json(&args.report)?;
    write_det_plot(&args.out, &report)?;
    say(out, format!("DET plot written to {}\n", args.out.display()))
}
