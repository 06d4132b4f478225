//! Command-line entry point: `score`, `metaeval`, `dnli`, and `probe`
//! subcommands over JSONL datasets, with record/replay transcripts and a
//! manifest written alongside every output for reproducible runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use q2::backends::http::HttpClient;
use q2::backends::transcript::{Transcript, TranscriptMode};
use q2::backends::Backends;
use q2::baselines::{self, BaselineMetric, BleuSmoothing};
use q2::dataset::load_dataset;
use q2::error::Q2Error;
use q2::metaeval::{
    bootstrap_system_eval, classify_at_threshold, dnli_evaluate, histogram, length_stats,
    pearson, pr_curve, random_knowledge_probe, spearman, write_bootstrap_csv, write_histogram_csv,
    write_pr_csv, BootstrapConfig, BootstrapMetric, ProbeMode,
};
use q2::pipeline::{Decoding, EvalConfig, EvalMode, Variant};
use q2::report::{read_report, write_report, ReportFormat};
use q2::scoring::{score_dataset, score_system, FallbackOrientation, ResponseScore};
use q2::types::{Dataset, GoldLabel, SourceFormat};

const EXIT_GENERIC: u8 = 1;
const EXIT_MISSING_FILE: u8 = 3;
const EXIT_REPLAY_MISS: u8 = 4;
const EXIT_BAD_INPUT: u8 = 5;

#[derive(Parser)]
#[command(name = "q2", version, about = "Factual consistency evaluation for knowledge-grounded dialogue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a dataset and write a per-response report.
    Score(ScoreArgs),
    /// Validate response scores against gold labels and human ratings.
    Metaeval(MetaevalArgs),
    /// Zero-shot consistency accuracy on premise/hypothesis pairs.
    Dnli(DnliArgs),
    /// Dataset probes: random-knowledge permutation, length stats, histograms.
    Probe(ProbeArgs),
}

#[derive(Args, Clone)]
struct BackendArgs {
    /// Use the in-repo deterministic mock backends.
    #[arg(long)]
    mocks: bool,
    /// Flat key=value backend config file (endpoint, bertscore).
    #[arg(long)]
    backends: Option<PathBuf>,
    /// Transcript file for record/replay of backend calls.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long, default_value = "passthrough")]
    transcript_mode: TranscriptMode,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat key=value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    beam_size: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    decoding: Option<Decoding>,
    #[arg(long)]
    no_personal_filter: bool,
    #[arg(long)]
    dnli_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Require strict string equality in the round-trip check.
    #[arg(long)]
    roundtrip_strict: bool,
    /// End-to-end fallback NLI orientation.
    #[arg(long)]
    fallback_orientation: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "wow_annotated")]
    format: SourceFormat,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "jsonl")]
    report_format: ReportFormat,
    /// Comma-separated baselines: overlap,bleu,e2e,bertscore.
    #[arg(long, value_delimiter = ',')]
    baselines: Vec<BaselineMetric>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "wow")]
    mode: String,
    #[command(flatten)]
    backend_args: BackendArgs,
    #[command(flatten)]
    config_args: ConfigArgs,
}

#[derive(Args)]
struct MetaevalArgs {
    /// JSONL report produced by `score`.
    #[arg(long)]
    scores: PathBuf,
    /// Dataset with gold labels / human scores, joined by example id.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "wow_annotated")]
    format: SourceFormat,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// PR-curve CSV output path.
    #[arg(long)]
    pr_out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pr_steps: usize,
    /// Run the bootstrap system-level evaluation (pairs contexts by
    /// dialogue_id, one consistent and one inconsistent response each).
    #[arg(long)]
    bootstrap: bool,
    #[arg(long)]
    bootstrap_out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.1, 0.15, 0.2, 0.25])]
    c_values: Vec<f64>,
    #[arg(long, default_value_t = 350)]
    sample_size: usize,
    #[arg(long, default_value_t = 1000)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Manifest output path (defaults next to --pr-out or the scores file).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct DnliArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "dnli")]
    format: SourceFormat,
    #[command(flatten)]
    backend_args: BackendArgs,
    #[command(flatten)]
    config_args: ConfigArgs,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(subcommand)]
    kind: ProbeKind,
}

#[derive(Subcommand)]
enum ProbeKind {
    /// Permute knowledge across examples and rescore.
    RandomKnowledge {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "wow_annotated")]
        format: SourceFormat,
        #[arg(long, default_value = "cross")]
        probe_mode: ProbeMode,
        #[command(flatten)]
        backend_args: BackendArgs,
        #[command(flatten)]
        config_args: ConfigArgs,
    },
    /// Average response length per gold label.
    LengthStats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "wow_annotated")]
        format: SourceFormat,
    },
    /// Score-distribution histogram CSV from a report.
    Histogram {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

fn parse_flat_config(path: &Path) -> Result<BTreeMap<String, String>, Q2Error> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| Q2Error::io(path.display().to_string(), e))?;
    let mut map = BTreeMap::new();
    for (idx, raw) in content.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Q2Error::Parse {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        map.insert(
            key.trim().to_string(),
            value.trim().trim_matches('"').to_string(),
        );
    }
    Ok(map)
}

/// Resolves an evaluation config with precedence flags > config file > defaults.
fn resolve_config(args: &ConfigArgs, mode: EvalMode) -> Result<EvalConfig, Q2Error> {
    let mut config = match mode {
        EvalMode::Wow => EvalConfig::default(),
        EvalMode::Dnli => EvalConfig::new_dnli(),
    };
    if let Some(path) = &args.config {
        let file = parse_flat_config(path)?;
        let bad = |key: &str, v: &str| {
            Q2Error::Validation(format!("config key `{key}` has invalid value `{v}`"))
        };
        for (key, value) in &file {
            match key.as_str() {
                "top_n" => config.top_n = value.parse().map_err(|_| bad(key, value))?,
                "beam_size" => config.beam_size = value.parse().map_err(|_| bad(key, value))?,
                "variant" => config.variant = value.parse().map_err(|_| bad(key, value))?,
                "decoding" => config.decoding = value.parse().map_err(|_| bad(key, value))?,
                "personal_filter" => {
                    config.personal_filter = value.parse().map_err(|_| bad(key, value))?
                }
                "dnli_threshold" => {
                    config.dnli_threshold = value.parse().map_err(|_| bad(key, value))?
                }
                "seed" => config.seed = value.parse().map_err(|_| bad(key, value))?,
                "roundtrip_strict" => {
                    config.roundtrip_strict = value.parse().map_err(|_| bad(key, value))?
                }
                "fallback_orientation" => {
                    config.fallback_orientation = parse_orientation(value)?
                }
                other => {
                    return Err(Q2Error::Validation(format!(
                        "unknown config key `{other}`"
                    )))
                }
            }
        }
    }
    if let Some(v) = args.top_n {
        config.top_n = v;
    }
    if let Some(v) = args.beam_size {
        config.beam_size = v;
    }
    if let Some(v) = args.variant {
        config.variant = v;
    }
    if let Some(v) = args.decoding {
        config.decoding = v;
    }
    if args.no_personal_filter {
        config.personal_filter = false;
    }
    if let Some(v) = args.dnli_threshold {
        config.dnli_threshold = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if args.roundtrip_strict {
        config.roundtrip_strict = true;
    }
    if let Some(v) = &args.fallback_orientation {
        config.fallback_orientation = parse_orientation(v)?;
    }
    Ok(config.normalized())
}

fn parse_orientation(value: &str) -> Result<FallbackOrientation, Q2Error> {
    match value {
        "knowledge_premise" | "knowledge-premise" => Ok(FallbackOrientation::KnowledgePremise),
        "knowledge_hypothesis" | "knowledge-hypothesis" => {
            Ok(FallbackOrientation::KnowledgeHypothesis)
        }
        other => Err(Q2Error::Validation(format!(
            "unknown fallback orientation `{other}`"
        ))),
    }
}

struct ResolvedBackends {
    backends: Backends,
    transcript: Option<(Arc<Transcript>, PathBuf)>,
}

impl ResolvedBackends {
    /// Persists a recording transcript; no-op for replay/passthrough.
    fn finish(&self) -> Result<(), Q2Error> {
        if let Some((transcript, path)) = &self.transcript {
            if transcript.mode() == TranscriptMode::Record {
                transcript.save(path)?;
            }
        }
        Ok(())
    }
}

fn resolve_backends(args: &BackendArgs) -> Result<ResolvedBackends, Q2Error> {
    let live = if args.mocks {
        Some(Backends::mocks())
    } else if let Some(path) = &args.backends {
        let file = parse_flat_config(path)?;
        let endpoint = file.get("endpoint").ok_or_else(|| {
            Q2Error::Validation("backend config needs an `endpoint` key".into())
        })?;
        let with_bertscore = file
            .get("bertscore")
            .map(|v| v == "true")
            .unwrap_or(false);
        Some(HttpClient::new(endpoint).into_backends(with_bertscore))
    } else {
        None
    };

    match (&args.transcript, live) {
        (None, Some(backends)) => Ok(ResolvedBackends {
            backends,
            transcript: None,
        }),
        (None, None) => Err(Q2Error::Validation(
            "no backends configured: pass --mocks, --backends, or a replay --transcript".into(),
        )),
        (Some(path), live) => {
            let mode = args.transcript_mode;
            if mode == TranscriptMode::Replay {
                let transcript = Arc::new(Transcript::load(path, mode)?);
                let backends = match live {
                    Some(b) => b.with_transcript(Arc::clone(&transcript)),
                    None => Backends::replay_only(Arc::clone(&transcript)),
                };
                Ok(ResolvedBackends {
                    backends,
                    transcript: Some((transcript, path.clone())),
                })
            } else {
                let live = live.ok_or_else(|| {
                    Q2Error::Validation(format!(
                        "{mode:?} transcript mode needs live backends (--mocks or --backends)"
                    ))
                })?;
                let transcript = Arc::new(if path.exists() {
                    Transcript::load(path, mode)?
                } else {
                    Transcript::new(mode)
                });
                Ok(ResolvedBackends {
                    backends: live.with_transcript(Arc::clone(&transcript)),
                    transcript: Some((transcript, path.clone())),
                })
            }
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

fn file_hash(path: &Path) -> Option<String> {
    std::fs::read(path).ok().map(|bytes| sha256_hex(&bytes))
}

fn write_manifest(
    path: &Path,
    command: &str,
    config: &serde_json::Value,
    seed: u64,
    transcript: Option<&Path>,
) -> Result<(), Q2Error> {
    let manifest = json!({
        "command": command,
        "config": config,
        "config_hash": sha256_hex(serde_json::to_string(config).unwrap().as_bytes()),
        "seed": seed,
        "transcript": transcript.map(|p| p.display().to_string()),
        "transcript_hash": transcript.and_then(file_hash),
    });
    std::fs::write(path, serde_json::to_string_pretty(&manifest).unwrap() + "\n")
        .map_err(|e| Q2Error::io(path.display().to_string(), e))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn run_score(args: &ScoreArgs) -> Result<(), Q2Error> {
    let mode = match args.mode.as_str() {
        "wow" => EvalMode::Wow,
        "dnli" => EvalMode::Dnli,
        other => return Err(Q2Error::Validation(format!("unknown mode `{other}`"))),
    };
    let config = resolve_config(&args.config_args, mode)?;
    let dataset = load_dataset(&args.dataset, args.format)?;
    let resolved = resolve_backends(&args.backend_args)?;

    let scores = score_dataset(&dataset.examples, &config, &resolved.backends, args.workers)?;
    write_report(&scores, &args.out, args.report_format)?;

    if !scores.is_empty() {
        let system = score_system(&scores)?;
        println!(
            "q2 system={:.6} responses={} coverage={:.4} no_answer_rate={:.4}",
            system.value, system.response_count, system.question_coverage, system.no_answer_rate
        );
    } else {
        println!("q2 system=n/a responses=0");
    }

    for metric in &args.baselines {
        match metric {
            BaselineMetric::OverlapF1 => {
                let mean = mean(dataset.examples.iter().map(|ex| {
                    baselines::overlap_f1(&ex.response, &ex.knowledge)
                }));
                println!("baseline overlap_f1={mean:.6}");
            }
            BaselineMetric::Bleu => {
                let responses: Vec<String> =
                    dataset.examples.iter().map(|e| e.response.clone()).collect();
                let knowledges: Vec<String> =
                    dataset.examples.iter().map(|e| e.knowledge.clone()).collect();
                let score = baselines::bleu(&responses, &knowledges, BleuSmoothing::default())?;
                println!("baseline bleu={score:.6}");
            }
            BaselineMetric::E2eNli => {
                let mut sum = 0.0;
                for ex in &dataset.examples {
                    sum += baselines::e2e_nli_baseline(
                        &ex.response,
                        &ex.knowledge,
                        resolved.backends.nli.as_ref(),
                    )?;
                }
                println!("baseline e2e_nli={:.6}", sum / dataset.len().max(1) as f64);
            }
            BaselineMetric::Bertscore => {
                let scorer = resolved.backends.bertscore.as_deref();
                let mut sum = 0.0;
                let mut counted = 0usize;
                let mut skipped = false;
                for ex in &dataset.examples {
                    match baselines::bertscore(&ex.response, &ex.knowledge, scorer)? {
                        Some(v) => {
                            sum += v;
                            counted += 1;
                        }
                        None => skipped = true,
                    }
                }
                if skipped || counted == 0 {
                    eprintln!("warning: bertscore backend not configured, metric skipped");
                } else {
                    println!("baseline bertscore={:.6}", sum / counted as f64);
                }
            }
        }
    }

    resolved.finish()?;
    let config_value = serde_json::to_value(&config).unwrap();
    write_manifest(
        &manifest_path(&args.out),
        "score",
        &config_value,
        config.seed,
        args.backend_args.transcript.as_deref(),
    )
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let collected: Vec<f64> = values.collect();
    if collected.is_empty() {
        return 0.0;
    }
    collected.iter().sum::<f64>() / collected.len() as f64
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"))
}

fn run_metaeval(args: &MetaevalArgs) -> Result<(), Q2Error> {
    let scores = read_report(&args.scores)?;
    let dataset = load_dataset(&args.dataset, args.format)?;
    let by_id: BTreeMap<&str, &ResponseScore> = scores
        .iter()
        .map(|s| (s.example_id.as_str(), s))
        .collect();

    let mut labeled: Vec<(f64, GoldLabel)> = Vec::new();
    let mut human_pairs: Vec<(f64, f64)> = Vec::new();
    for ex in &dataset.examples {
        let Some(score) = by_id.get(ex.id.as_str()) else {
            continue;
        };
        if let Some(gold) = ex.gold_label {
            labeled.push((score.value, gold));
        }
        if let Some(human) = ex.human_score {
            human_pairs.push((score.value, human));
        }
    }

    if !labeled.is_empty() {
        let (xs, ls): (Vec<f64>, Vec<GoldLabel>) = labeled.iter().copied().unzip();
        let report = classify_at_threshold(&xs, &ls, args.threshold)?;
        println!(
            "threshold={} accuracy={:.6} consistent_precision={} consistent_recall={} inconsistent_precision={} inconsistent_recall={}",
            args.threshold,
            report.accuracy,
            fmt_opt(report.consistent.precision),
            fmt_opt(report.consistent.recall),
            fmt_opt(report.inconsistent.precision),
            fmt_opt(report.inconsistent.recall),
        );
        if let Some(pr_out) = &args.pr_out {
            let thresholds: Vec<f64> = (0..=args.pr_steps)
                .map(|i| i as f64 / args.pr_steps as f64)
                .collect();
            let points = pr_curve(&xs, &ls, &thresholds)?;
            write_pr_csv(&points, pr_out)?;
        }
    }

    if human_pairs.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = human_pairs.iter().copied().unzip();
        println!(
            "human_spearman={} human_pearson={}",
            fmt_opt(spearman(&xs, &ys)?),
            fmt_opt(pearson(&xs, &ys)?)
        );
    }

    if args.bootstrap {
        let metric = paired_metric(&dataset, &by_id)?;
        let config = BootstrapConfig {
            c_values: args.c_values.clone(),
            sample_size: args.sample_size,
            repeats: args.repeats,
            seed: args.seed,
        };
        let result = bootstrap_system_eval(&[metric], &config)?;
        for m in &result.per_metric {
            println!(
                "bootstrap metric={} avg={} ci_lower={} ci_upper={} undefined={}",
                m.metric,
                fmt_opt(m.avg_correlation),
                fmt_opt(m.ci_lower),
                fmt_opt(m.ci_upper),
                m.undefined_repeats
            );
        }
        if let Some(out) = &args.bootstrap_out {
            write_bootstrap_csv(&result, out)?;
        }
    }

    let manifest = args.manifest.clone().unwrap_or_else(|| {
        manifest_path(args.pr_out.as_deref().unwrap_or(&args.scores))
    });
    let config_value = json!({
        "threshold": args.threshold,
        "pr_steps": args.pr_steps,
        "bootstrap": args.bootstrap,
        "c_values": args.c_values,
        "sample_size": args.sample_size,
        "repeats": args.repeats,
    });
    write_manifest(&manifest, "metaeval", &config_value, args.seed, None)
}

/// Pairs contexts by dialogue_id, requiring one consistent and one
/// inconsistent gold-labeled response each.
fn paired_metric(
    dataset: &Dataset,
    by_id: &BTreeMap<&str, &ResponseScore>,
) -> Result<BootstrapMetric, Q2Error> {
    let mut contexts: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for ex in &dataset.examples {
        let (Some(dialogue), Some(gold), Some(score)) = (
            ex.dialogue_id.as_deref(),
            ex.gold_label,
            by_id.get(ex.id.as_str()),
        ) else {
            continue;
        };
        let entry = contexts.entry(dialogue).or_insert((None, None));
        match gold {
            GoldLabel::Consistent => entry.0 = Some(score.value),
            GoldLabel::Inconsistent => entry.1 = Some(score.value),
        }
    }
    let pairs: Vec<(f64, f64)> = contexts
        .values()
        .filter_map(|&(c, i)| Some((c?, i?)))
        .collect();
    if pairs.is_empty() {
        return Err(Q2Error::Precondition(
            "bootstrap needs contexts with both a consistent and an inconsistent response \
             (dialogue_id + gold_label)"
                .into(),
        ));
    }
    Ok(BootstrapMetric {
        name: "q2".into(),
        pairs,
    })
}

fn run_dnli(args: &DnliArgs) -> Result<(), Q2Error> {
    let config = resolve_config(&args.config_args, EvalMode::Dnli)?;
    let dataset = load_dataset(&args.dataset, args.format)?;
    let resolved = resolve_backends(&args.backend_args)?;
    let accuracy = dnli_evaluate(&dataset, &config, &resolved.backends)?;
    println!(
        "dnli accuracy={:.6} pairs={} threshold={}",
        accuracy,
        dataset.len(),
        config.dnli_threshold
    );
    resolved.finish()
}

fn run_probe(args: &ProbeArgs) -> Result<(), Q2Error> {
    match &args.kind {
        ProbeKind::RandomKnowledge {
            dataset,
            format,
            probe_mode,
            backend_args,
            config_args,
        } => {
            let config = resolve_config(config_args, EvalMode::Wow)?;
            let dataset = load_dataset(dataset, *format)?;
            let resolved = resolve_backends(backend_args)?;
            let result = random_knowledge_probe(
                &dataset,
                *probe_mode,
                config.seed,
                &config,
                &resolved.backends,
            )?;
            println!(
                "probe random_knowledge q2={:.6} no_answer_rate={:.6}",
                result.q2, result.no_answer_rate
            );
            resolved.finish()
        }
        ProbeKind::LengthStats { dataset, format } => {
            let dataset = load_dataset(dataset, *format)?;
            let stats = length_stats(&dataset)?;
            for (label, s) in stats {
                println!(
                    "length_stats label={label} count={} avg_characters={:.4} avg_tokens={:.4}",
                    s.count, s.avg_characters, s.avg_tokens
                );
            }
            Ok(())
        }
        ProbeKind::Histogram { scores, out, bins } => {
            let scores = read_report(scores)?;
            let values: Vec<f64> = scores.iter().map(|s| s.value).collect();
            let bins = histogram(&values, *bins)?;
            write_histogram_csv(&bins, out)?;
            println!("histogram written to {}", out.display());
            Ok(())
        }
    }
}

fn exit_code_for(err: &Q2Error) -> u8 {
    match err {
        Q2Error::Io { .. } => EXIT_MISSING_FILE,
        Q2Error::CacheMiss { .. } => EXIT_REPLAY_MISS,
        Q2Error::Parse { .. } | Q2Error::Schema { .. } | Q2Error::Validation(_) => EXIT_BAD_INPUT,
        Q2Error::Example { source, .. } => exit_code_for(source),
        _ => EXIT_GENERIC,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Score(args) => run_score(args),
        Command::Metaeval(args) => run_metaeval(args),
        Command::Dnli(args) => run_dnli(args),
        Command::Probe(args) => run_probe(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}
