//! `emre` — batch pipeline for common-ground analysis of multimodal
//! referring expressions: ingest a dataset export, trace per-video
//! common-ground updates, train embeddings, assemble feature matrices, and
//! train/evaluate the judgment classifier over ablation presets.

mod pipeline;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use emre_core::dataset::{validate, write_csv};
use emre_core::error::Error;
use emre_core::eval::{
    build_samples, crossvalidate, ordering_checks, report, run_ablations, table_presets,
    EvalConfig, QuintileRule, ResultsTable,
};
use emre_core::features::{AblationSpec, DependenceFilter, FeatureGroup, ModalitySubset};
use emre_core::nn::{init_model, save_model, train};
use emre_core::parser::{build_lexicon, parse_re, Lexicon};
use emre_core::synth::{generate, SynthConfig};
use emre_core::trace::build_trace;

use pipeline::{
    artifact_dir, build_extractor, feature_headers, DataSource, Manifest, PipelineConfig,
};

#[derive(Parser)]
#[command(
    name = "emre",
    version,
    about = "Common-ground analysis of multimodal referring expressions"
)]
struct Cli {
    /// JSON config file with pipeline defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and caches.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset export (CSV/TSV with header).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Input format: csv or tsv.
    #[arg(long)]
    format: Option<String>,
    /// JSON column-mapping config.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Feature groups, comma separated: raw,formal,se.
    #[arg(long, default_value = "raw,formal,se")]
    groups: String,
    /// Record subset: all, language, or ensemble.
    #[arg(long, default_value = "all")]
    subset: String,
    /// Feature dependence filter: all or linguistic.
    #[arg(long, default_value = "all")]
    filter: String,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Batch size.
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a dataset export; print a summary.
    Ingest(DataArgs),
    /// Emit the t0/t1/t2 update trace of one record as JSON.
    Trace {
        record_id: String,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Common-ground inspection commands.
    Cg {
        #[command(subcommand)]
        command: CgCommand,
    },
    /// Parse an utterance into its structured form.
    Parse {
        /// The utterance to parse.
        #[arg(long)]
        utterance: String,
        #[command(flatten)]
        data: DataArgs,
        /// Load the lexicon from JSON instead of inducing it from data.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Export the dataset-induced lexicon as JSON.
    Lexicon {
        #[command(flatten)]
        data: DataArgs,
        /// Output file (default <out>/lexicon/lexicon.json).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Embedding commands.
    Embed {
        #[command(subcommand)]
        command: EmbedCommand,
    },
    /// Write the feature matrix and schema for one ablation spec.
    Featurize {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Train the judgment classifier on all samples and save the model.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// 7-fold cross-validation of one ablation spec.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Run a preset results table (1, 2, or 3).
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        /// Which preset table to run.
        #[arg(long)]
        table: u8,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Render a saved results table.
    Report {
        /// results_table JSON produced by `ablate` or `evaluate`.
        #[arg(long)]
        results: PathBuf,
    },
    /// Generate a synthetic dataset export.
    Synth {
        /// Number of videos.
        #[arg(long, default_value_t = 200)]
        videos: usize,
        /// Output CSV (default <out>/synth/synthetic.csv).
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CgCommand {
    /// Emit the t0/t1/t2 update trace of one record as JSON.
    Trace {
        record_id: String,
        #[command(flatten)]
        data: DataArgs,
    },
}

#[derive(Subcommand)]
enum EmbedCommand {
    /// Train Skip-Gram vectors over the dataset vocabulary.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Training epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
}

/// Print to stdout, treating a closed pipe (e.g. `emre trace | head`) as a
/// clean exit.
fn emit(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
    {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

fn parse_groups(s: &str) -> Result<BTreeSet<FeatureGroup>, Error> {
    let mut groups = BTreeSet::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let g = match part {
            "raw" => FeatureGroup::Raw,
            "se" | "embedding" | "embeddings" => FeatureGroup::Embedding,
            "formal" => FeatureGroup::Formal,
            other => {
                return Err(Error::Config(format!(
                    "unknown feature group \"{other}\" (raw, formal, se)"
                )))
            }
        };
        groups.insert(g);
    }
    if groups.is_empty() {
        return Err(Error::Config("no feature groups selected".into()));
    }
    Ok(groups)
}

fn parse_spec(spec: &SpecArgs) -> Result<AblationSpec, Error> {
    let groups = parse_groups(&spec.groups)?;
    let subset = match spec.subset.as_str() {
        "all" => ModalitySubset::All,
        "language" | "language_only" => ModalitySubset::LanguageOnly,
        "ensemble" | "ensemble_only" => ModalitySubset::EnsembleOnly,
        other => {
            return Err(Error::Config(format!(
                "unknown subset \"{other}\" (all, language, ensemble)"
            )))
        }
    };
    let filter = match spec.filter.as_str() {
        "all" => DependenceFilter::All,
        "linguistic" | "linguistic_only" => DependenceFilter::LinguisticOnly,
        other => {
            return Err(Error::Config(format!(
                "unknown filter \"{other}\" (all, linguistic)"
            )))
        }
    };
    let s: AblationSpec = AblationSpec::new(&groups.iter().copied().collect::<Vec<_>>())
        .with_subset(subset)
        .with_filter(filter);
    s.validate()?;
    Ok(s)
}

fn load_lexicon_arg(
    path: &Option<PathBuf>,
    data: &DataArgs,
    cfg: &PipelineConfig,
) -> Result<Lexicon, Error> {
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)?;
        return Ok(serde_json::from_str(&text)?);
    }
    let source = DataSource::resolve(
        cfg,
        data.data.clone(),
        data.format.clone(),
        data.mapping.clone(),
    )?;
    let ds = source.load()?;
    let (lexicon, unknown) = build_lexicon(&ds)?;
    if !unknown.is_empty() {
        log::warn!("unclassified utterance tokens: {unknown:?}");
    }
    Ok(lexicon)
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);

    match cli.command {
        Command::Ingest(data) => {
            let source = DataSource::resolve(&cfg, data.data, data.format, data.mapping)?;
            let ds = source.load()?;
            let report = validate(&ds);
            println!(
                "records: {}\nobjects: {}\nvocabulary: {}\nviolations: {}",
                ds.records.len(),
                ds.object_inventory.len(),
                ds.term_vocabulary.len(),
                report.violations.len()
            );
            Ok(())
        }
        Command::Trace { record_id, data }
        | Command::Cg {
            command: CgCommand::Trace { record_id, data },
        } => {
            let source = DataSource::resolve(&cfg, data.data, data.format, data.mapping)?;
            let ds = source.load()?;
            let record = ds
                .record(&record_id)
                .ok_or_else(|| Error::Config(format!("no record with id \"{record_id}\"")))?;
            let (lexicon, _) = build_lexicon(&ds)?;
            let trace = build_trace(record, &lexicon)?;
            let doc = serde_json::json!({
                "video_id": record.video_id,
                "modality": record.modality,
                "configuration": trace.act.configuration(),
                "events": trace.state.timeline,
                "state": trace.state,
            });
            emit(&format!("{}\n", serde_json::to_string_pretty(&doc)?));
            Ok(())
        }
        Command::Parse {
            utterance,
            data,
            lexicon,
        } => {
            let lexicon = load_lexicon_arg(&lexicon, &data, &cfg)?;
            let parse = parse_re(&utterance, &lexicon)?;
            emit(&format!("{}\n", serde_json::to_string_pretty(&parse)?));
            Ok(())
        }
        Command::Lexicon { data, file } => {
            let source = DataSource::resolve(&cfg, data.data, data.format, data.mapping)?;
            let ds = source.load()?;
            let (lexicon, unknown) = build_lexicon(&ds)?;
            let path = match file {
                Some(p) => p,
                None => artifact_dir(&out, "lexicon")?.join("lexicon.json"),
            };
            std::fs::write(&path, serde_json::to_string_pretty(&lexicon)?)?;
            println!("lexicon written to {}", path.display());
            if !unknown.is_empty() {
                println!(
                    "unclassified tokens: {}",
                    unknown.into_iter().collect::<Vec<_>>().join(" ")
                );
            }
            Ok(())
        }
        Command::Embed {
            command: EmbedCommand::Train { data, epochs },
        } => {
            let source = DataSource::resolve(&cfg, data.data, data.format, data.mapping)?;
            let ds = source.load()?;
            let mut sg_cfg = cfg.skipgram_config(seed);
            if let Some(e) = epochs {
                sg_cfg.epochs = e;
            }
            let dir = artifact_dir(&out, "embed")?;
            let (wv, cache_path, cached) = pipeline::ensure_vectors(&source, &ds, &sg_cfg, &out)?;
            let vectors_path = dir.join("vectors.json");
            emre_core::embeddings::save_vectors(&wv, &vectors_path)?;
            let mut manifest = Manifest::new("embed", seed, serde_json::to_value(&sg_cfg)?);
            manifest.source_inputs(&source)?;
            manifest.output(&vectors_path)?;
            manifest.write(&dir)?;
            let first = wv.training_meta.epoch_loss.first().copied().unwrap_or(0.0);
            let last = wv.training_meta.epoch_loss.last().copied().unwrap_or(0.0);
            println!(
                "vocabulary {} dim {} epochs {} loss {:.4} -> {:.4}{}",
                wv.table.len(),
                wv.dim,
                sg_cfg.epochs,
                first,
                last,
                if cached { " (cached)" } else { "" }
            );
            println!(
                "vectors written to {} (cache {})",
                vectors_path.display(),
                cache_path.display()
            );
            Ok(())
        }
        Command::Featurize { data, spec } => {
            let source = DataSource::resolve(&cfg, data.data, data.format, data.mapping)?;
            let ds = source.load()?;
            let spec = parse_spec(&spec)?;
            let sg_cfg = cfg.skipgram_config(seed);
            let (extractor, _, _) =
                build_extractor(&source, &ds, std::slice::from_ref(&spec), &sg_cfg, &out)?;
            let dir = artifact_dir(&out, "featurize")?;

            let headers = feature_headers(&extractor, &spec);
            let mut csv = String::from("video_id,");
            csv.push_str(&headers.join(","));
            csv.push('\n');
            for rec in ds.records.iter().filter(|r| spec.includes_record(r)) {
                let fv = extractor.assemble(rec, &spec)?;
                let _ = write!(csv, "{}", rec.video_id);
                for v in &fv.values {
                    let _ = write!(csv, ",{v}");
                }
                csv.push('\n');
            }
            let matrix_path = dir.join("features.csv");
            std::fs::write(&matrix_path, csv)?;
            let schema_path = dir.join("schema.json");
            std::fs::write(
                &schema_path,
                serde_json::to_string_pretty(&extractor.schema)?,
            )?;

            let mut manifest = Manifest::new("featurize", seed, serde_json::to_value(&spec)?);
            manifest.source_inputs(&source)?;
            manifest.output(&matrix_path)?;
            manifest.output(&schema_path)?;
            manifest.write(&dir)?;
            println!(
                "feature matrix {} ({} columns) written to {}",
                spec.label(),
                headers.len(),
                matrix_path.display()
            );
            Ok(())
        }
        Command::Train {
            data,
            spec,
            train: train_args,
        } => {
            let source = DataSource::resolve(&cfg, data.data, data.format, data.mapping)?;
            let ds = source.load()?;
            let spec = parse_spec(&spec)?;
            let sg_cfg = cfg.skipgram_config(seed);
            let (extractor, _, _) =
                build_extractor(&source, &ds, std::slice::from_ref(&spec), &sg_cfg, &out)?;
            let mut train_cfg = cfg.train_config(seed);
            if let Some(e) = train_args.epochs {
                train_cfg.epochs = e;
            }
            if let Some(b) = train_args.batch {
                train_cfg.batch_size = b;
            }

            let samples = build_samples(&ds, &extractor, &spec)?;
            if samples.is_empty() {
                return Err(Error::Config("no records match the requested modality subset".into()));
            }
            let mut inputs = Vec::new();
            let mut targets = Vec::new();
            for s in &samples {
                for &score in &s.scores {
                    inputs.push(s.features.clone());
                    let mut t = vec![0.0; emre_core::nn::NUM_CLASSES];
                    t[(score - 1) as usize] = 1.0;
                    targets.push(t);
                }
            }
            let mut model = init_model(samples[0].features.len(), seed)?;
            let report = train(&mut model, &inputs, &targets, &train_cfg)?;

            let dir = artifact_dir(&out, "train")?;
            let model_path = dir.join("model.bin");
            save_model(&model, &model_path)?;
            let history_path = dir.join("loss_history.json");
            std::fs::write(&history_path, serde_json::to_string(&report.epoch_loss)?)?;

            let mut manifest = Manifest::new(
                "train",
                seed,
                serde_json::json!({ "spec": spec, "train": train_cfg }),
            );
            manifest.source_inputs(&source)?;
            manifest.output(&model_path)?;
            manifest.output(&history_path)?;
            manifest.write(&dir)?;
            println!(
                "trained on {} samples for {} epochs (final loss {:.4}); model at {}",
                inputs.len(),
                train_cfg.epochs,
                report.epoch_loss.last().unwrap(),
                model_path.display()
            );
            Ok(())
        }
        Command::Evaluate {
            data,
            spec,
            train: train_args,
        } => {
            let source = DataSource::resolve(&cfg, data.data, data.format, data.mapping)?;
            let ds = source.load()?;
            let spec = parse_spec(&spec)?;
            let sg_cfg = cfg.skipgram_config(seed);
            let (extractor, _, _) =
                build_extractor(&source, &ds, std::slice::from_ref(&spec), &sg_cfg, &out)?;
            let mut train_cfg = cfg.train_config(seed);
            if let Some(e) = train_args.epochs {
                train_cfg.epochs = e;
            }
            if let Some(b) = train_args.batch {
                train_cfg.batch_size = b;
            }
            let eval_cfg = EvalConfig {
                train: train_cfg,
                quintile_rule: QuintileRule::MedianQuintile,
                parallel: true,
            };
            let samples = build_samples(&ds, &extractor, &spec)?;
            let result = crossvalidate(&samples, &eval_cfg)?;
            println!(
                "{}: mean {:.4} sigma {:.4} over {} videos",
                spec.label(),
                result.mean,
                result.sigma,
                samples.len()
            );
            for (i, acc) in result.fold_accuracy.iter().enumerate() {
                println!("fold {i}: {acc:.4}");
            }

            let dir = artifact_dir(&out, "evaluate")?;
            let results_path = dir.join("result.json");
            std::fs::write(
                &results_path,
                serde_json::to_string_pretty(&serde_json::json!({
                    "spec": spec, "result": result, "seed": seed,
                }))?,
            )?;
            let mut manifest = Manifest::new(
                "evaluate",
                seed,
                serde_json::json!({ "spec": spec, "train": eval_cfg.train }),
            );
            manifest.source_inputs(&source)?;
            manifest.output(&results_path)?;
            manifest.write(&dir)?;
            Ok(())
        }
        Command::Ablate {
            data,
            table,
            train: train_args,
        } => {
            let source = DataSource::resolve(&cfg, data.data, data.format, data.mapping)?;
            let ds = source.load()?;
            let specs = table_presets(table)?;
            let sg_cfg = cfg.skipgram_config(seed);
            let (extractor, _, _) = build_extractor(&source, &ds, &specs, &sg_cfg, &out)?;
            let mut train_cfg = cfg.train_config(seed);
            if let Some(e) = train_args.epochs {
                train_cfg.epochs = e;
            }
            if let Some(b) = train_args.batch {
                train_cfg.batch_size = b;
            }
            let eval_cfg = EvalConfig {
                train: train_cfg,
                quintile_rule: QuintileRule::MedianQuintile,
                parallel: true,
            };
            let results = run_ablations(&ds, &extractor, &specs, &eval_cfg)?;

            print!("{}", report(&results));
            for (name, ok) in ordering_checks(&results) {
                println!(
                    "ordering: {name}: {}",
                    if ok { "holds" } else { "violated" }
                );
            }

            let dir = artifact_dir(&out, "ablate")?;
            let json_path = dir.join(format!("results_table_{table}.json"));
            std::fs::write(&json_path, serde_json::to_string_pretty(&results)?)?;
            let csv_path = dir.join(format!("results_table_{table}.csv"));
            std::fs::write(&csv_path, results.to_csv())?;
            let report_path = dir.join(format!("results_table_{table}.txt"));
            std::fs::write(&report_path, report(&results))?;

            let mut manifest = Manifest::new(
                "ablate",
                seed,
                serde_json::json!({ "table": table, "train": eval_cfg.train }),
            );
            manifest.source_inputs(&source)?;
            manifest.output(&json_path)?;
            manifest.output(&csv_path)?;
            manifest.output(&report_path)?;
            manifest.write(&dir)?;
            Ok(())
        }
        Command::Report { results } => {
            let text = std::fs::read_to_string(&results)?;
            let table: ResultsTable = serde_json::from_str(&text)?;
            print!("{}", report(&table));
            for (name, ok) in ordering_checks(&table) {
                println!(
                    "ordering: {name}: {}",
                    if ok { "holds" } else { "violated" }
                );
            }
            Ok(())
        }
        Command::Synth { videos, file } => {
            let ds = generate(&SynthConfig { videos, seed });
            let path = match file {
                Some(p) => p,
                None => artifact_dir(&out, "synth")?.join("synthetic.csv"),
            };
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            write_csv(&ds, &path)?;
            let dir = path
                .parent()
                .unwrap_or(std::path::Path::new("."))
                .to_path_buf();
            let mut manifest = Manifest::new(
                "synth",
                seed,
                serde_json::json!({ "videos": videos, "seed": seed }),
            );
            manifest.output(&path)?;
            manifest.write(&dir)?;
            println!(
                "synthetic dataset ({videos} videos) written to {}",
                path.display()
            );
            Ok(())
        }
    }
}

fn error_category(e: &Error) -> &'static str {
    match e {
        Error::Schema(_) => "schema",
        Error::Validation(_) => "validation",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
        Error::UnknownEntity(_) => "unknown-entity",
        Error::State(_) => "state",
        Error::Formula(_) => "formula",
        Error::MalformedAct(_) => "malformed-act",
        Error::Lexicon(_) => "lexicon",
        Error::Parse(_) => "parse",
        Error::Alignment(_) => "alignment",
        Error::Resolution(_) => "resolution",
        Error::Lookup(_) => "lookup",
        Error::Config(_) => "config",
        Error::Numerical(_) => "numerical",
    }
}

fn main() {
    env_logger::init();
    // Usage problems are config failures (exit 1); exit 2 is reserved for
    // runtime numerical failures. --help and --version stay exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {}: {e}", error_category(&e));
        std::process::exit(if e.is_numerical() { 2 } else { 1 });
    }
}
