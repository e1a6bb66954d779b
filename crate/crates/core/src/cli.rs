//! Command-line interface. `main.rs` only parses arguments and reports
//! errors; everything else lives here so it can be tested in-process.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::alignment::{to_alignment_json, AlignmentHierarchy};
use crate::audio::{encode_wav, GridParams, TimeSpan, WavEncoding};
use crate::corpus::{load_alignment, load_wav, train_from_manifest, Manifest, TrainConfig};
use crate::editor::{apply, diff, sweep, Condition, EditScript, EmotionSel, Selector};
use crate::eval::{evaluate_pair, parse_runs_csv, trend_analysis, ExpectedSigns};
use crate::features::{feature_names, Analyzer, FeatureConfig};
use crate::hed::{parse_hed, serialize_hed, HedExtractor, HedFormat, HedMatrix, ModelBank};
use crate::ranker::{Hyper, Level, PairCaps};
use crate::service::{serve, ServeConfig};
use crate::synth::{generate_corpus, CorpusSpec, Synthesizer, Voice, WordSpec};
use crate::Error;

/// Environment variable overriding the model-bank directory.
pub const MODELS_ENV: &str = "EMOEDIT_MODELS";

#[derive(Debug, Parser)]
#[command(name = "emoedit", version, about = "Hierarchical emotion-intensity extraction and editing")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Worker threads for per-utterance and per-segment work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Analysis frame length in milliseconds.
    #[arg(long, global = true, default_value_t = 25.0)]
    pub frame_ms: f64,
    /// Analysis hop in milliseconds.
    #[arg(long, global = true, default_value_t = 10.0)]
    pub hop_ms: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one ranker per (emotion, level) from a corpus manifest.
    Train(TrainArgs),
    /// Extract a HED matrix from audio and its alignment.
    Extract(ExtractArgs),
    /// Apply an edit script to a HED file.
    Edit(EditArgs),
    /// Convert a HED file between CSV and JSON.
    Export(ExportArgs),
    /// Write the minimal edit script turning one HED file into another.
    Diff(DiffArgs),
    /// Write one edited HED file per intensity value.
    Sweep(SweepArgs),
    /// HED operations (aliases of `extract` and `edit`).
    #[command(subcommand)]
    Hed(HedCommand),
    /// Objective evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run the HTTP editing service.
    Serve(ServeArgs),
    /// Dump the 88-dimensional feature vectors of every segment at one level.
    Features(FeaturesArgs),
    /// Synthetic speech for tests and demos.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Subcommand)]
pub enum HedCommand {
    Extract(ExtractArgs),
    Edit(EditArgs),
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// MCD, frame disturbance and pitch/energy distortion of a test waveform against a reference.
    Metrics(MetricsArgs),
    /// Intensity-trend analysis over a runs table.
    Trends(TrendsArgs),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Generate a synthetic emotional corpus with manifest.
    Corpus(CorpusArgs),
    /// Render a waveform driven by a HED file.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output model-bank directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated emotions to train (default: every non-neutral label).
    #[arg(long, value_delimiter = ',')]
    pub emotions: Option<Vec<String>>,
    #[arg(long, default_value = "Neutral")]
    pub neutral: String,
    /// Keep at most N utterances per (speaker, emotion).
    #[arg(long)]
    pub per_speaker: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub c_ordered: f64,
    #[arg(long, default_value_t = 0.1)]
    pub c_similar: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Cap on ordered pairs per model (0 = no cap).
    #[arg(long, default_value_t = 5000)]
    pub max_ordered: usize,
    /// Cap on similar pairs per model (0 = no cap).
    #[arg(long, default_value_t = 5000)]
    pub max_similar: usize,
    /// Also write the training report here (`-` for stdout).
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// Alignment as `.json` or `.TextGrid` (tiers `words` and `phones`).
    #[arg(long)]
    pub alignment: PathBuf,
    #[arg(long, env = MODELS_ENV)]
    pub models: PathBuf,
    /// Output path, `-` for stdout.
    #[arg(long, default_value = "-")]
    pub out: String,
    /// csv or json (default: from the output extension, csv for stdout).
    #[arg(long)]
    pub format: Option<HedFormat>,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long, default_value = "-")]
    pub out: String,
    #[arg(long)]
    pub format: Option<HedFormat>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "-")]
    pub out: String,
    #[arg(long)]
    pub format: Option<HedFormat>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long)]
    pub to: PathBuf,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Control segments: utterance|word|phoneme|wp (or U, W, P, WP).
    #[arg(long, alias = "condition")]
    pub level: Condition,
    /// all, word:N, phoneme:N or range:A..B (half-open).
    #[arg(long, default_value = "all", value_parser = parse_selector)]
    pub selector: Selector,
    /// Emotion label or `all`.
    #[arg(long)]
    pub emotion: String,
    /// Comma-separated intensities.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: HedFormat,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct TrendsArgs {
    /// CSV with columns condition,emotion,intensity,duration_s,pitch_mean_hz,pitch_std_hz,energy_mean_db,energy_std_db.
    #[arg(long)]
    pub runs: PathBuf,
    /// Expected-sign table (JSON); defaults to the built-in table.
    #[arg(long)]
    pub expected: Option<PathBuf>,
    /// Trend report JSON.
    #[arg(long, default_value = "-")]
    pub out: String,
    /// Heatmap CSV (emotion × feature rows, one rho column per condition).
    #[arg(long)]
    pub heatmap: Option<String>,
    /// Text rendering of the condition grid.
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Model bank; without one the service answers uploads with 503.
    #[arg(long, env = MODELS_ENV)]
    pub models: Option<PathBuf>,
    #[arg(long)]
    pub persist_dir: Option<PathBuf>,
    /// Allowed CORS origin (default: any).
    #[arg(long)]
    pub cors_origin: Option<String>,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// Without an alignment the whole file is one utterance segment.
    #[arg(long)]
    pub alignment: Option<PathBuf>,
    #[arg(long, default_value = "utterance")]
    pub level: Level,
    #[arg(long, default_value = "-")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub speakers: usize,
    #[arg(long, default_value_t = 6)]
    pub per_emotion: usize,
    #[arg(long, value_delimiter = ',', default_value = "Neutral,Angry,Happy,Sad")]
    pub emotions: Vec<String>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub hed: PathBuf,
    /// Output WAV (16-bit PCM).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the rendered alignment (JSON).
    #[arg(long)]
    pub alignment_out: Option<PathBuf>,
    #[arg(long, default_value_t = 130.0)]
    pub f0: f64,
}

pub fn parse_selector(s: &str) -> Result<Selector, String> {
    let s = s.trim();
    if s == "all" {
        return Ok(Selector::All);
    }
    let (kind, arg) = s.split_once(':').ok_or_else(|| format!("bad selector {s:?}"))?;
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("bad index {x:?} in selector {s:?}"));
    match kind {
        "word" => Ok(Selector::Word(num(arg)?)),
        "phoneme" => Ok(Selector::Phoneme(num(arg)?)),
        "range" => {
            let (a, b) = arg.split_once("..").ok_or_else(|| format!("range must be A..B, got {arg:?}"))?;
            Ok(Selector::Range { start: num(a)?, end: num(b)? })
        }
        _ => Err(format!("unknown selector kind {kind:?}")),
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes to a file, or stdout for `-`.
fn write_out(out: &str, bytes: &[u8]) -> Result<(), Error> {
    if out == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|e| Error::io("<stdout>", e))
    } else {
        let p = Path::new(out);
        if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(p, bytes).map_err(|e| Error::io(p, e))
    }
}

fn out_format(out: &str, explicit: Option<HedFormat>) -> HedFormat {
    explicit.unwrap_or_else(|| if out == "-" { HedFormat::Csv } else { HedFormat::from_path(Path::new(out)) })
}

fn read_hed(path: &Path) -> Result<HedMatrix, Error> {
    Ok(parse_hed(&read_text(path)?, HedFormat::from_path(path))?)
}

fn analyzer(g: &GlobalOpts) -> Result<Analyzer, Error> {
    let config = FeatureConfig {
        grid: GridParams { frame_length_ms: g.frame_ms, hop_ms: g.hop_ms, ..GridParams::default() },
        ..FeatureConfig::default()
    };
    Ok(Analyzer::new(config)?)
}

fn cap(n: usize) -> Option<usize> {
    (n > 0).then_some(n)
}

fn json_pretty<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<(), Error> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Usage(e.to_string()))?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let g = &cli.global;
    match cli.command {
        Command::Train(a) => cmd_train(g, a),
        Command::Extract(a) | Command::Hed(HedCommand::Extract(a)) => cmd_extract(g, a),
        Command::Edit(a) | Command::Hed(HedCommand::Edit(a)) => cmd_edit(a),
        Command::Export(a) => {
            let m = read_hed(&a.input)?;
            write_out(&a.out, serialize_hed(&m, out_format(&a.out, a.format)).as_bytes())
        }
        Command::Diff(a) => {
            let script = diff(&read_hed(&a.from)?, &read_hed(&a.to)?)?;
            write_out(&a.out, format!("{}\n", script.to_json()).as_bytes())
        }
        Command::Sweep(a) => cmd_sweep(a),
        Command::Eval(EvalCommand::Metrics(a)) => {
            let an = analyzer(g)?;
            let r = load_wav(&a.reference)?;
            let t = load_wav(&a.test)?;
            write_out(&a.out, &json_pretty(&evaluate_pair(&an, &r, &t)?))
        }
        Command::Eval(EvalCommand::Trends(a)) => cmd_trends(a),
        Command::Serve(a) => cmd_serve(g, a),
        Command::Features(a) => cmd_features(g, a),
        Command::Synth(SynthCommand::Corpus(a)) => {
            let spec = CorpusSpec {
                speakers: a.speakers,
                utterances_per_emotion: a.per_emotion,
                emotions: a.emotions,
                seed: a.seed,
                ..CorpusSpec::default()
            };
            let m = generate_corpus(&a.out, &spec, &Synthesizer::default()).map_err(|e| Error::io(&a.out, e))?;
            log::info!("wrote {} utterances to {}", m.entries.len(), a.out.display());
            Ok(())
        }
        Command::Synth(SynthCommand::Render(a)) => cmd_render(a),
    }
}

fn cmd_train(g: &GlobalOpts, a: TrainArgs) -> Result<(), Error> {
    let config = TrainConfig {
        neutral: a.neutral,
        emotions: a.emotions,
        per_speaker: a.per_speaker,
        seed: a.seed,
        hyper: Hyper { c_ordered: a.c_ordered, c_similar: a.c_similar, tol: a.tol, max_iter: a.max_iter },
        caps: PairCaps { max_ordered: cap(a.max_ordered), max_similar: cap(a.max_similar) },
    };
    let manifest = Manifest::load(&a.manifest)?;
    let (bank, report) = train_from_manifest(&manifest, &analyzer(g)?, &config)?;
    bank.save_dir(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let report_json = json_pretty(&report);
    let path = a.out.join("training_report.json");
    std::fs::write(&path, &report_json).map_err(|e| Error::io(&path, e))?;
    if let Some(r) = a.report {
        write_out(&r, &report_json)?;
    }
    for m in &report.models {
        log::info!(
            "{} {}: {} samples, accuracy {:.4}, objective {:.6}, converged {}",
            m.emotion,
            m.level,
            m.samples,
            m.train.ordering_accuracy,
            m.train.objective,
            m.train.converged
        );
    }
    Ok(())
}

fn cmd_extract(g: &GlobalOpts, a: ExtractArgs) -> Result<(), Error> {
    let bank = ModelBank::load_dir(&a.models)?;
    let an = analyzer(g)?;
    let w = load_wav(&a.wav)?;
    let h = load_alignment(&a.alignment)?;
    let m = HedExtractor { analyzer: &an, bank: &bank, parallel: true }.extract(&w, &h)?;
    write_out(&a.out, serialize_hed(&m, out_format(&a.out, a.format)).as_bytes())
}

fn cmd_edit(a: EditArgs) -> Result<(), Error> {
    let m = read_hed(&a.input)?;
    let script = EditScript::from_json(&read_text(&a.script)?)?;
    let out = apply(&m, &script)?;
    write_out(&a.out, serialize_hed(&out, out_format(&a.out, a.format)).as_bytes())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Error> {
    let m = read_hed(&a.input)?;
    let emotion = EmotionSel::from(a.emotion.as_str());
    let outs = sweep(&m, a.level, &a.selector, &emotion, &a.values)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("hed").trim_end_matches(".hed");
    let ext = match a.format {
        HedFormat::Csv => "csv",
        HedFormat::Json => "json",
    };
    for (m, v) in outs.iter().zip(&a.values) {
        let path = a.out_dir.join(format!("{stem}_{}_{}_{v}.{ext}", a.level, a.emotion));
        std::fs::write(&path, serialize_hed(m, a.format)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn cmd_trends(a: TrendsArgs) -> Result<(), Error> {
    let runs = parse_runs_csv(&read_text(&a.runs)?)?;
    let expected = match &a.expected {
        Some(p) => ExpectedSigns::from_json(&read_text(p)?)?,
        None => ExpectedSigns::default(),
    };
    let report = trend_analysis(&runs, &expected);
    write_out(&a.out, &json_pretty(&report))?;
    if let Some(h) = &a.heatmap {
        write_out(h, report.heatmap_csv().as_bytes())?;
    }
    if let Some(gp) = &a.grid {
        write_out(gp, report.render_grid().as_bytes())?;
    }
    Ok(())
}

fn cmd_serve(g: &GlobalOpts, a: ServeArgs) -> Result<(), Error> {
    let bank = match &a.models {
        Some(dir) => Some(ModelBank::load_dir(dir)?),
        None => {
            log::warn!("no model bank given; uploads will be refused with 503");
            None
        }
    };
    let an = analyzer(g)?;
    let config = ServeConfig {
        addr: SocketAddr::new(a.host, a.port),
        persist_dir: a.persist_dir,
        cors_origin: a.cors_origin,
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| Error::io("<runtime>", e))?;
    rt.block_on(serve(config, bank, an))
}

fn cmd_features(g: &GlobalOpts, a: FeaturesArgs) -> Result<(), Error> {
    let an = analyzer(g)?;
    let w = load_wav(&a.wav)?;
    let spans: Vec<(String, TimeSpan)> = match &a.alignment {
        Some(p) => {
            let h: AlignmentHierarchy = load_alignment(p)?;
            match a.level {
                Level::Utterance => vec![(h.utterance.label.clone(), h.utterance.span())],
                Level::Word => h.words.iter().map(|s| (s.label.clone(), s.span())).collect(),
                Level::Phoneme => h.phonemes.iter().map(|s| (s.label.clone(), s.span())).collect(),
            }
        }
        None => vec![(String::new(), TimeSpan::new(0.0, w.duration_s()))],
    };
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["label".to_string(), "start_s".into(), "end_s".into()];
    header.extend(feature_names());
    out.write_record(&header).expect("in-memory write");
    for (label, span) in spans {
        let v = an.extract(&w, span)?;
        let mut rec = vec![label, span.start.to_string(), span.end.to_string()];
        rec.extend(v.as_slice().iter().map(|x| x.to_string()));
        out.write_record(&rec).expect("in-memory write");
    }
    write_out(&a.out, &out.into_inner().expect("in-memory flush"))
}

fn cmd_render(a: RenderArgs) -> Result<(), Error> {
    let m = read_hed(&a.hed)?;
    let words: Vec<WordSpec> = (0..m.word_count())
        .filter(|&w| !m.phonemes_of_word(w).is_empty())
        .map(|w| WordSpec {
            label: format!("w{w}"),
            phonemes: m.phonemes_of_word(w).map(|p| m.phoneme_labels()[p].clone()).collect(),
        })
        .collect();
    if words.len() != m.word_count() {
        return Err(Error::Usage("render needs every word index to have phonemes".into()));
    }
    let r = Synthesizer::default().render_hed(&words, &Voice { f0_hz: a.f0, ..Voice::default() }, &m);
    std::fs::write(&a.out, encode_wav(&r.waveform, WavEncoding::Pcm16)).map_err(|e| Error::io(&a.out, e))?;
    if let Some(p) = &a.alignment_out {
        std::fs::write(p, to_alignment_json(&r.alignment)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn selectors() {
        assert_eq!(parse_selector("all").unwrap(), Selector::All);
        assert_eq!(parse_selector("word:3").unwrap(), Selector::Word(3));
        assert_eq!(parse_selector("range:1..4").unwrap(), Selector::Range { start: 1, end: 4 });
        assert!(parse_selector("word:x").is_err());
        assert!(parse_selector("syllable:1").is_err());
    }

    #[test]
    fn sweep_accepts_level_names() {
        let cli = Cli::try_parse_from([
            "emoedit", "sweep", "--in", "a.csv", "--level", "word", "--emotion", "Happy", "--values", "0,0.5,1",
            "--out-dir", "o",
        ])
        .unwrap();
        match cli.command {
            Command::Sweep(s) => {
                assert_eq!(s.level, Condition::W);
                assert_eq!(s.values, vec![0.0, 0.5, 1.0]);
            }
            other => panic!("{other:?}"),
        }
    }
}
