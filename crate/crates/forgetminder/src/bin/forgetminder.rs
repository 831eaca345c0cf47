//! Command-line front end. Each subcommand is a thin wrapper over the library
//! and writes a `<out>.config.json` with its resolved arguments so runs can
//! be reproduced exactly.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};

use forgetminder::corpus::{
    build_corpus, kmeans_fit, load_records, pooled_clip_features, save_records, Corpus, Dictionary,
};
use forgetminder::detection::{detect_with_state, DetectOptions, ForgottenReport};
use forgetminder::error::{write_string, Error, Result};
use forgetminder::eval::{evaluate, write_metrics_csv};
use forgetminder::gibbs::{infer, train, write_trace_csv, DictRefs, TrainConfig, TrainedModel};
use forgetminder::model::AssignmentState;
use forgetminder::pipeline::run_pipeline;
use forgetminder::pointing::{monte_carlo, write_mc_csv, PointOptions};
use forgetminder::presets;
use forgetminder::synth::gen_scripted;

#[derive(Parser)]
#[command(name = "forgetminder", version, about = "Activity topic models with forgotten-action detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic activity videos from a named preset scenario.
    Synth(SynthArgs),
    /// Fit word dictionaries to the clip features of a video file.
    BuildDicts(BuildDictsArgs),
    /// Train a topic model on quantized videos.
    Train(TrainArgs),
    /// Assign topics to held-out videos under a trained model.
    Infer(InferArgs),
    /// Detect forgotten actions in held-out videos.
    Detect(DetectArgs),
    /// Score segmentation and detection against ground truth.
    Eval(EvalArgs),
    /// Monte Carlo run of the pan/tilt pointing simulation.
    PointSim(PointSimArgs),
    /// Run synth, dictionaries, training, detection and evaluation end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// Preset scenario name (office-synthetic or kitchen-synthetic).
    #[arg(long)]
    preset: String,
    /// How many videos to generate.
    #[arg(long)]
    videos: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Video id prefix.
    #[arg(long, default_value = "video")]
    prefix: String,
    /// Output video file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct BuildDictsArgs {
    /// Input video file (JSON).
    #[arg(long)]
    videos: PathBuf,
    #[arg(long, default_value_t = 120)]
    dict_size: usize,
    #[arg(long, default_value_t = 20)]
    clip_len: usize,
    #[arg(long, default_value_t = 20)]
    step: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output human-channel dictionary.
    #[arg(long)]
    out_human: PathBuf,
    /// Output object-channel dictionary.
    #[arg(long)]
    out_object: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    videos: PathBuf,
    #[arg(long)]
    human_dict: PathBuf,
    #[arg(long)]
    object_dict: PathBuf,
    #[arg(long, default_value_t = 20)]
    clip_len: usize,
    #[arg(long, default_value_t = 20)]
    step: usize,
    /// Number of action topics.
    #[arg(long)]
    k: usize,
    /// Number of object topics.
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 5)]
    mh_proposals: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop the pairwise gap factor (plain-LDA variant).
    #[arg(long, default_value_t = false)]
    ablate_time: bool,
    /// Zero the off-diagonal of the stick covariance each refit.
    #[arg(long, default_value_t = false)]
    ablate_correlation: bool,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-iteration diagnostics CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    videos: PathBuf,
    /// Defaults to the dictionary recorded in the model, relative to it.
    #[arg(long)]
    human_dict: Option<PathBuf>,
    #[arg(long)]
    object_dict: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output assignment file (JSON, one entry per video).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    videos: PathBuf,
    #[arg(long)]
    human_dict: Option<PathBuf>,
    #[arg(long)]
    object_dict: Option<PathBuf>,
    /// Minimum appearance score to call an action forgotten.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for per-video report JSON files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Labeled test videos.
    #[arg(long)]
    videos: PathBuf,
    #[arg(long)]
    human_dict: Option<PathBuf>,
    #[arg(long)]
    object_dict: Option<PathBuf>,
    /// Assignment file from `infer`.
    #[arg(long)]
    states: PathBuf,
    /// Directory of detection reports; omit to skip detection accuracies.
    #[arg(long)]
    reports_dir: Option<PathBuf>,
    /// Output metrics CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PointSimArgs {
    #[arg(long, default_value_t = 1000)]
    scenes: usize,
    /// Perturbation of the normalized homography entries per iteration.
    #[arg(long, default_value_t = 0.01)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0.5)]
    gain: f64,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output per-scene CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PipelineArgs {
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop the pairwise gap factor (plain-LDA variant).
    #[arg(long, default_value_t = false)]
    ablate_time: bool,
    /// Zero the off-diagonal of the stick covariance each refit.
    #[arg(long, default_value_t = false)]
    ablate_correlation: bool,
    /// Output directory for every artifact of the run.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::BuildDicts(a) => build_dicts(a),
        Command::Train(a) => do_train(a),
        Command::Infer(a) => do_infer(a),
        Command::Detect(a) => do_detect(a),
        Command::Eval(a) => do_eval(a),
        Command::PointSim(a) => point_sim(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn write_resolved_config<T: Serialize>(args: &T, out: &Path) -> Result<()> {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".config.json");
    let path = out.with_file_name(name);
    write_string(
        &path,
        &serde_json::to_string_pretty(args).expect("args serialize"),
    )
}

fn preset_by_name(name: &str) -> Result<presets::Preset> {
    presets::by_name(name).ok_or_else(|| {
        let known: Vec<&str> = presets::all().iter().map(|p| p.name).collect();
        Error::invalid(format!(
            "unknown preset {name:?}; available: {}",
            known.join(", ")
        ))
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let preset = preset_by_name(&a.preset)?;
    let records = gen_scripted(&preset.scenario, a.videos, a.seed, &a.prefix)?;
    save_records(&records, &a.out)?;
    write_resolved_config(&a, &a.out)?;
    println!("wrote {} videos to {}", records.len(), a.out.display());
    Ok(())
}

fn build_dicts(a: BuildDictsArgs) -> Result<()> {
    let records = load_records(&a.videos)?;
    let (human, object) = pooled_clip_features(&records, a.clip_len, a.step)?;
    let human_dict = kmeans_fit(&human, a.dict_size, a.seed, 50)?;
    let object_dict = kmeans_fit(&object, a.dict_size, a.seed.wrapping_add(1), 50)?;
    human_dict.save(&a.out_human)?;
    object_dict.save(&a.out_object)?;
    write_resolved_config(&a, &a.out_human)?;
    println!(
        "built dictionaries: {} human words, {} object words",
        human_dict.len(),
        object_dict.len()
    );
    Ok(())
}

fn load_corpus(
    videos: &Path,
    human_dict: &Path,
    object_dict: &Path,
    clip_len: usize,
    step: usize,
) -> Result<Corpus> {
    let records = load_records(videos)?;
    let human = Dictionary::load(human_dict)?;
    let object = Dictionary::load(object_dict)?;
    build_corpus(&records, &human, &object, clip_len, step)
}

fn do_train(a: TrainArgs) -> Result<()> {
    let corpus = load_corpus(&a.videos, &a.human_dict, &a.object_dict, a.clip_len, a.step)?;
    let mut cfg = TrainConfig::new(a.k, a.p);
    cfg.iters = a.iters;
    cfg.burn_in = a.burn_in;
    cfg.mh_proposals_per_doc = a.mh_proposals;
    cfg.seed = a.seed;
    cfg.ablate_time = a.ablate_time;
    cfg.ablate_correlation = a.ablate_correlation;
    let (mut model, trace) = train(&corpus, &cfg)?;
    model.dict_refs = DictRefs {
        human: a.human_dict.display().to_string(),
        object: a.object_dict.display().to_string(),
        clip_len: a.clip_len,
        step: a.step,
    };
    model.save(&a.out)?;
    if let Some(trace_path) = &a.trace {
        write_trace_csv(&trace, trace_path)?;
    }
    write_resolved_config(&a, &a.out)?;
    let last = trace.last().expect("at least one iteration");
    println!(
        "trained {} topics on {} videos; final loglik {:.3}, accept rate {:.3}",
        cfg.k,
        corpus.docs.len(),
        last.loglik,
        last.mh_accept_rate
    );
    Ok(())
}

/// Resolves a dictionary path: an explicit flag wins, otherwise the path
/// recorded in the model, taken relative to the model file's directory.
fn resolve_dict(flag: &Option<PathBuf>, recorded: &str, model_path: &Path) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p.clone());
    }
    if recorded.is_empty() {
        return Err(Error::invalid(
            "model does not record a dictionary path; pass --human-dict/--object-dict",
        ));
    }
    let rec = PathBuf::from(recorded);
    if rec.is_absolute() {
        return Ok(rec);
    }
    Ok(model_path.parent().unwrap_or(Path::new(".")).join(rec))
}

fn load_model_and_corpus(
    model_path: &Path,
    videos: &Path,
    human_flag: &Option<PathBuf>,
    object_flag: &Option<PathBuf>,
) -> Result<(TrainedModel, Corpus)> {
    let model = TrainedModel::load(model_path)?;
    let human = resolve_dict(human_flag, &model.dict_refs.human, model_path)?;
    let object = resolve_dict(object_flag, &model.dict_refs.object, model_path)?;
    let corpus = load_corpus(
        videos,
        &human,
        &object,
        model.dict_refs.clip_len,
        model.dict_refs.step,
    )?;
    Ok((model, corpus))
}

fn do_infer(a: InferArgs) -> Result<()> {
    let (model, corpus) = load_model_and_corpus(&a.model, &a.videos, &a.human_dict, &a.object_dict)?;
    let states = infer_all(&model, &corpus, a.iters, a.seed)?;
    write_string(
        &a.out,
        &serde_json::to_string(&states).expect("states serialize"),
    )?;
    write_resolved_config(&a, &a.out)?;
    println!("inferred assignments for {} videos", states.len());
    Ok(())
}

fn infer_all(
    model: &TrainedModel,
    corpus: &Corpus,
    iters: usize,
    seed: u64,
) -> Result<Vec<AssignmentState>> {
    corpus
        .docs
        .iter()
        .enumerate()
        .map(|(i, doc)| infer(model, doc, iters, seed.wrapping_add(i as u64)))
        .collect()
}

fn do_detect(a: DetectArgs) -> Result<()> {
    let (model, corpus) = load_model_and_corpus(&a.model, &a.videos, &a.human_dict, &a.object_dict)?;
    let opts = DetectOptions {
        threshold: a.threshold,
        infer_iters: a.iters,
        seed: a.seed,
    };
    let mut forgotten = 0usize;
    for (i, doc) in corpus.docs.iter().enumerate() {
        let state = infer(&model, doc, a.iters, a.seed.wrapping_add(i as u64))?;
        let report = detect_with_state(&model, doc, &state, &opts)?;
        if matches!(report.verdict, forgetminder::detection::Verdict::Forgotten) {
            forgotten += 1;
        }
        report.save(&a.out_dir.join(format!("{}.json", doc.video_id)))?;
    }
    write_resolved_config(&a, &a.out_dir.join("detect"))?;
    println!(
        "detected forgotten actions in {forgotten} of {} videos",
        corpus.docs.len()
    );
    Ok(())
}

fn do_eval(a: EvalArgs) -> Result<()> {
    let (model, corpus) = load_model_and_corpus(&a.model, &a.videos, &a.human_dict, &a.object_dict)?;
    let body = forgetminder::error::read_to_string(&a.states)?;
    let states: Vec<AssignmentState> = forgetminder::error::from_json_str(&body, &a.states)?;
    let reports: Vec<ForgottenReport> = match &a.reports_dir {
        None => Vec::new(),
        Some(dir) => corpus
            .docs
            .iter()
            .map(|doc| ForgottenReport::load(&dir.join(format!("{}.json", doc.video_id))))
            .collect::<Result<Vec<_>>>()?,
    };
    let metrics = evaluate(&model, &corpus, &states, &reports)?;
    write_metrics_csv(&metrics, &a.out)?;
    write_resolved_config(&a, &a.out)?;
    println!(
        "frame accuracy {:.3}, segment accuracy {:.3}, segment AP {:.3}",
        metrics.frame_acc, metrics.seg_acc, metrics.seg_ap
    );
    if let Some(fa) = metrics.fa_acc {
        println!("forgotten-action accuracy {fa:.3}");
    }
    if let Some(fo) = metrics.fo_acc {
        println!("forgotten-object accuracy {fo:.3}");
    }
    Ok(())
}

fn point_sim(a: PointSimArgs) -> Result<()> {
    let opts = PointOptions {
        gain: a.gain,
        noise_sd: a.noise_sd,
        max_iters: a.max_iters,
        ..Default::default()
    };
    let summary = monte_carlo(a.scenes, &opts, a.seed)?;
    write_mc_csv(&summary, &a.out)?;
    write_resolved_config(&a, &a.out)?;
    println!(
        "{} of {} scenes converged ({:.1}%)",
        summary.converged,
        summary.scenes,
        100.0 * summary.rate
    );
    Ok(())
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let mut preset = preset_by_name(&a.preset)?;
    preset.train.ablate_time = a.ablate_time;
    preset.train.ablate_correlation = a.ablate_correlation;
    let outputs = run_pipeline(&preset, a.seed, &a.out_dir)?;
    let m = &outputs.metrics;
    println!(
        "pipeline {} done: frame accuracy {:.3}, segment accuracy {:.3}",
        preset.name, m.frame_acc, m.seg_acc
    );
    if let Some(fa) = m.fa_acc {
        println!("forgotten-action accuracy {fa:.3}");
    }
    if let Some(fo) = m.fo_acc {
        println!("forgotten-object accuracy {fo:.3}");
    }
    Ok(())
}
