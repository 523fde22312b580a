//! `cellpatch`: nuclei detection, patch featurization, image-graph
//! construction and GCN training from the command line.
//!
//! Exit status is 0 on success, 1 when inputs or configuration are invalid
//! and 2 when a run fails for any other reason.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cellpatch::detection::{GrayImage, ResponseThreshold};
use cellpatch::gcn::{evaluate, train, Checkpoint};
use cellpatch::image_graph::{load_graphs, save_graphs};
use cellpatch::pipeline::{
    build_graphs, detect_slide, featurize_all, load_features, load_pointsets, load_slides, run_experiment,
    save_features, save_pointsets, synth_dataset, write_outputs, ExperimentConfig,
};
use cellpatch::pipeline::synth::render_slide;

#[derive(Parser, Debug)]
#[command(name = "cellpatch", version, about = "Cell-graph patch features and slide-level GCN classification")]
struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for synthesis, fold assignment and training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic slides as point-set CSV, optionally rendered to PGM images.
    Synth(SynthArgs),
    /// Detect nuclei in slide images and write point-set CSV.
    Detect(DetectArgs),
    /// Compute patch feature vectors from point-set CSV.
    Featurize(FeaturizeArgs),
    /// Link patches of each slide into an image graph (JSON lines).
    BuildGraph(BuildGraphArgs),
    /// Train a classifier on image graphs.
    Train(TrainArgs),
    /// Evaluate a trained classifier on image graphs.
    Eval(EvalArgs),
    /// Run the full cross-validation experiment.
    Run(RunArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output point-set CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    slides_per_class: Option<usize>,
    /// Also render each slide to `<dir>/<slide_id>.pgm` and write `<dir>/manifest.csv`.
    #[arg(long)]
    images: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectionOverrides {
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// Response threshold as a fraction of the image maximum.
    #[arg(long, conflicts_with = "absolute_threshold")]
    relative_threshold: Option<f64>,
    #[arg(long)]
    absolute_threshold: Option<f64>,
    #[arg(long)]
    merge_radius: Option<f64>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Manifest CSV with `slide_id,label,path` rows.
    #[arg(long, conflicts_with = "image")]
    manifest: Option<PathBuf>,
    /// A single image (use with --slide-id and --label).
    #[arg(long, requires_all = ["slide_id", "label"])]
    image: Option<PathBuf>,
    #[arg(long)]
    slide_id: Option<String>,
    #[arg(long)]
    label: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    detection: DetectionOverrides,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    #[arg(long)]
    pointsets: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    cell_graph_radius: Option<f64>,
}

#[derive(Args, Debug)]
struct BuildGraphArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    similarity_threshold: Option<f64>,
    #[arg(long)]
    min_nuclei: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainOverrides {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    graphs: PathBuf,
    /// Output checkpoint (JSON).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    train: TrainOverrides,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    graphs: PathBuf,
    /// Write the evaluation as JSON here as well as printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Directory for report.json, summary.csv, summary.txt and timings.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    pointsets: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    slides_per_class: Option<usize>,
    #[arg(long)]
    cell_graph_radius: Option<f64>,
    #[arg(long)]
    similarity_threshold: Option<f64>,
    #[arg(long)]
    min_nuclei: Option<usize>,
    #[command(flatten)]
    detection: DetectionOverrides,
    #[command(flatten)]
    train: TrainOverrides,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl DetectionOverrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.tiling.patch_size, self.patch_size);
        set(&mut cfg.tiling.stride, self.stride);
        set(&mut cfg.detection.merge_radius, self.merge_radius);
        if let Some(f) = self.relative_threshold {
            cfg.detection.threshold = ResponseThreshold::RelativeToMax(f);
        }
        if let Some(t) = self.absolute_threshold {
            cfg.detection.threshold = ResponseThreshold::Absolute(t);
        }
    }
}

impl TrainOverrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        set(&mut cfg.train.epochs, self.epochs);
        set(&mut cfg.train.learning_rate, self.learning_rate);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.dropout_p, self.dropout);
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn cmd_synth(mut cfg: ExperimentConfig, args: &SynthArgs) -> Result<()> {
    set(&mut cfg.data.slides_per_class, args.slides_per_class);
    cfg.data.synthetic.validate()?;
    let records = synth_dataset(cfg.data.slides_per_class, &cfg.data.synthetic, cfg.seed)?;
    save_pointsets(&args.out, &records)?;
    if let Some(dir) = &args.images {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut manifest = String::from("slide_id,label,path\n");
        for r in &records {
            let name = format!("{}.pgm", r.slide_id);
            render_slide(r, cfg.data.blob_sigma, cfg.data.blob_depth)?.save_pgm(&dir.join(&name))?;
            manifest.push_str(&format!("{},{},{}\n", r.slide_id, r.label, name));
        }
        let path = dir.join("manifest.csv");
        std::fs::write(&path, manifest).with_context(|| format!("writing {}", path.display()))?;
    }
    log::info!("wrote {} slides to {}", records.len(), args.out.display());
    Ok(())
}

fn cmd_detect(mut cfg: ExperimentConfig, args: &DetectArgs) -> Result<()> {
    args.detection.apply(&mut cfg);
    cfg.validate()?;
    let records = if let Some(m) = &args.manifest {
        cfg.data.image_manifest = Some(m.clone());
        load_slides(&cfg)?
    } else if let Some(img) = &args.image {
        let id = args.slide_id.as_deref().unwrap_or_default();
        let label = args.label.unwrap_or_default();
        if label >= cfg.class_names.len() {
            return Err(cellpatch::Error::InvalidInput(format!("label {label} outside configured classes")).into());
        }
        let image = GrayImage::load(img)?;
        vec![detect_slide(
            &image,
            id,
            label,
            &img.display().to_string(),
            cfg.tiling.patch_size,
            cfg.tiling.stride,
            &cfg.detection.bank()?,
            &cfg.detection.params(),
        )?]
    } else {
        return Err(cellpatch::Error::InvalidInput("give --manifest or --image".into()).into());
    };
    save_pointsets(&args.out, &records)?;
    log::info!(
        "detected {} nuclei across {} slides",
        records.iter().map(|r| r.nuclei_count()).sum::<usize>(),
        records.len()
    );
    Ok(())
}

fn cmd_featurize(mut cfg: ExperimentConfig, args: &FeaturizeArgs) -> Result<()> {
    set(&mut cfg.graph.cell_graph_radius, args.cell_graph_radius);
    cfg.validate()?;
    let records = load_pointsets(&args.pointsets)?;
    for r in &records {
        r.validate(cfg.class_names.len())?;
    }
    let features = featurize_all(&records, cfg.graph.cell_graph_radius)?;
    save_features(&args.out, &features)?;
    Ok(())
}

fn cmd_build_graph(mut cfg: ExperimentConfig, args: &BuildGraphArgs) -> Result<()> {
    set(&mut cfg.graph.similarity_threshold, args.similarity_threshold);
    set(&mut cfg.graph.min_nuclei, args.min_nuclei);
    cfg.validate()?;
    let features = load_features(&args.features)?;
    let graphs = build_graphs(&features, cfg.graph.similarity_threshold, cfg.graph.min_nuclei)?;
    save_graphs(&args.out, &graphs)?;
    Ok(())
}

fn cmd_train(mut cfg: ExperimentConfig, args: &TrainArgs) -> Result<()> {
    args.train.apply(&mut cfg);
    cfg.validate()?;
    let graphs = load_graphs(&args.graphs)?;
    if graphs.is_empty() {
        return Err(cellpatch::Error::InvalidInput(format!("{} holds no graphs", args.graphs.display())).into());
    }
    let mut tc = cfg.train.clone();
    tc.classes.get_or_insert(cfg.class_names.len());
    let outcome = train(&graphs, &tc)?;
    if let Some(last) = outcome.history.last() {
        log::info!("epoch {}: loss {:.6}, accuracy {:.4}", last.epoch, last.loss, last.accuracy);
    }
    Checkpoint::new(outcome.classifier, tc, cfg.class_names.clone()).save(&args.out)?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.model)?;
    let graphs = load_graphs(&args.graphs)?;
    let eval = evaluate(&ckpt.classifier, &graphs)?;
    let json = serde_json::to_string_pretty(&eval)?;
    if let Some(p) = &args.out {
        std::fs::write(p, &json).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("accuracy {:.4} on {} graphs", eval.accuracy, graphs.len());
    let width = ckpt.class_names.iter().map(String::len).max().unwrap_or(4).max(4);
    print!("{:<width$}", "");
    for c in &ckpt.class_names {
        print!(" {c:>width$}");
    }
    println!();
    for (c, row) in ckpt.class_names.iter().zip(&eval.confusion) {
        print!("{c:<width$}");
        for v in row {
            print!(" {v:>width$}");
        }
        println!();
    }
    Ok(())
}

fn cmd_run(mut cfg: ExperimentConfig, args: &RunArgs) -> Result<()> {
    set(&mut cfg.folds, args.folds);
    set(&mut cfg.data.slides_per_class, args.slides_per_class);
    set(&mut cfg.graph.cell_graph_radius, args.cell_graph_radius);
    set(&mut cfg.graph.similarity_threshold, args.similarity_threshold);
    set(&mut cfg.graph.min_nuclei, args.min_nuclei);
    if args.pointsets.is_some() {
        cfg.data.pointsets = args.pointsets.clone();
    }
    if args.manifest.is_some() {
        cfg.data.image_manifest = args.manifest.clone();
    }
    if args.out_dir.is_some() {
        cfg.output_dir = args.out_dir.clone();
    }
    args.detection.apply(&mut cfg);
    args.train.apply(&mut cfg);
    let outcome = run_experiment(&cfg)?;
    print!("{}", outcome.report.summary_text());
    if let Some(dir) = &cfg.output_dir {
        write_outputs(dir, &outcome)?;
        log::info!("wrote report to {}", dir.display());
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!(cellpatch::Error::InvalidInput("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(cfg, a),
        Command::Detect(a) => cmd_detect(cfg, a),
        Command::Featurize(a) => cmd_featurize(cfg, a),
        Command::BuildGraph(a) => cmd_build_graph(cfg, a),
        Command::Train(a) => cmd_train(cfg, a),
        Command::Eval(a) => cmd_eval(a),
        Command::Run(a) => cmd_run(cfg, a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err
        .chain()
        .filter_map(|e| e.downcast_ref::<cellpatch::Error>())
        .any(cellpatch::Error::is_validation);
    if validation {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
