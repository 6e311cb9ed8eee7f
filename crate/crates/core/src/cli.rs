//! Command-line front end. Failures print `<CODE>: <message>` on stderr
//! and exit with status 1.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::analysis::{self, compression_ratio, length_distribution, token_usage};
use crate::bpe::{train_with, TokenId, Tokenizer, TrainStrategy};
use crate::codec::io::{load_encoded, save_encoded, write_spans_jsonl, EncodedFormat};
use crate::codec::Trie;
use crate::error::{Error, Result};
use crate::preprocess::{preprocess_record, PreprocessConfig, Reservoir};
use crate::quantizer::{concat_corpus, desymbolize, symbolize, NormalizationParams};
use crate::sampler::{
    extract_features, fit_cluster_model, read_manifest, stratified_sample, write_manifest,
    SamplerConfig,
};
use crate::sequence::{assemble, read_jsonl, write_jsonl, QaPair, SpecialTokens, TrainingRecord, VocabInfo};
use crate::signal_io::{load_record, save_record, EcgRecord, RecordFormat};

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (tokenizer format ecg-byte v1)");
pub const LOG_ENV: &str = "ECG_BYTE_LOG";
const BATCH: usize = 256;

#[derive(Debug, Parser)]
#[command(name = "ecg-byte", version = VERSION, about = "BPE tokenization toolkit for ECG signals")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, denoise, downsample and window raw records; estimate global percentiles.
    Preprocess(PreprocessArgs),
    /// Pick a representative subset by clustering morphological features.
    Sample(SampleArgs),
    /// Learn merges from the records listed in a manifest.
    Train(TrainArgs),
    /// Tokenize records with a trained tokenizer.
    Encode(EncodeArgs),
    /// Turn encoded ids back into records.
    Decode(DecodeArgs),
    /// Token usage, length distribution and compression reports.
    Stats(StatsArgs),
    /// Build language-model training sequences from encoded ECGs and Q/A ids.
    Assemble(AssembleArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub keep_full: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample rate assumed for CSV inputs.
    #[arg(long, default_value_t = 500.0)]
    pub fs: f32,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Manifest path; the JSON summary goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::sampler::DEFAULT_K_MAX)]
    pub k_max: usize,
    #[arg(long, default_value_t = crate::sampler::DEFAULT_VARIANCE_TARGET)]
    pub variance: f64,
    #[arg(long, default_value_t = 250.0)]
    pub fs: f32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub percentiles: PathBuf,
    #[arg(long, default_value_t = 3500)]
    pub num_merges: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// recount or incremental.
    #[arg(long, default_value = "recount")]
    pub strategy: TrainStrategy,
    #[arg(long, default_value_t = 250.0)]
    pub fs: f32,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub tokenizer: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub percentiles: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-record span files under `<out>.spans/`.
    #[arg(long, default_value_t = false)]
    pub spans: bool,
    /// text or bin (default: from the output extension).
    #[arg(long)]
    pub format: Option<FormatArg>,
    #[arg(long, default_value_t = 250.0)]
    pub fs: f32,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub tokenizer: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub percentiles: PathBuf,
    /// Record shape as `CxT`, e.g. 12x500.
    #[arg(long)]
    pub shape: Shape,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<FormatArg>,
    #[arg(long, default_value_t = 250.0)]
    pub fs: f32,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Encoded ids file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<FormatArg>,
    #[arg(long, default_value_t = analysis::DEFAULT_LENGTH_BIN)]
    pub bin_width: usize,
    /// Symbols per encoded record, for the compression ratio.
    #[arg(long, default_value_t = 6000)]
    pub symbols_per_record: usize,
    /// With --record and --percentiles: write mapping_lead<N>.csv.
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub percentiles: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub lead: usize,
    #[arg(long, default_value_t = 250.0)]
    pub fs: f32,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    #[arg(long)]
    pub encoded: PathBuf,
    /// JSON lines `{"question":[ids],"answer":[ids]}`, one per encoded record.
    #[arg(long)]
    pub qa: PathBuf,
    #[arg(long)]
    pub text_vocab_size: TokenId,
    /// ECG vocabulary size (256 + merges).
    #[arg(long, default_value_t = 3756)]
    pub ecg_vocab_size: TokenId,
    #[arg(long)]
    pub bos: Option<TokenId>,
    #[arg(long)]
    pub sig_start: Option<TokenId>,
    #[arg(long)]
    pub sig_end: Option<TokenId>,
    #[arg(long)]
    pub eos: Option<TokenId>,
    #[arg(long)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FormatArg {
    Text,
    Bin,
}

fn encoded_format(arg: Option<FormatArg>, path: &Path) -> EncodedFormat {
    match arg {
        Some(FormatArg::Text) => EncodedFormat::Text,
        Some(FormatArg::Bin) => EncodedFormat::Bin,
        None => EncodedFormat::from_path(path),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape(pub usize, pub usize);

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (c, t) = s.split_once(['x', 'X']).ok_or("expected CxT")?;
        let c = c.trim().parse().map_err(|_| "bad lead count")?;
        let t = t.trim().parse().map_err(|_| "bad sample count")?;
        if c == 0 || t == 0 {
            return Err("shape must be positive".into());
        }
        Ok(Shape(c, t))
    }
}

/// Record files in `path` (sorted by name), or `path` itself.
pub fn list_records(path: &Path, csv_fs: f32) -> Result<Vec<(PathBuf, RecordFormat)>> {
    if path.is_file() {
        let fmt = RecordFormat::from_path(path, csv_fs)
            .ok_or_else(|| Error::BadFormat(format!("{}: unknown record extension", path.display())))?;
        return Ok(vec![(path.to_path_buf(), fmt)]);
    }
    let mut out: Vec<(PathBuf, RecordFormat)> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| RecordFormat::from_path(&p, csv_fs).map(|f| (p, f)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    if out.is_empty() {
        return Err(Error::EmptyInput("no .csv/.ecgb records found"));
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "record".into(), |s| s.to_string_lossy().into_owned())
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_preprocess(a: &PreprocessArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => PreprocessConfig::read(p)?,
        None => PreprocessConfig::default(),
    };
    if let Some(k) = a.keep_full {
        cfg.keep_full = k;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let files = list_records(&a.input, a.fs)?;
    create_dir(&a.out)?;
    let mut reservoir = Reservoir::new(cfg.sample_budget, cfg.seed);
    let mut written = 0usize;
    for batch in files.chunks(BATCH) {
        let results: Vec<Vec<EcgRecord>> = batch
            .par_iter()
            .map(|(p, f)| preprocess_record(&load_record(p, *f)?, &cfg))
            .collect::<Result<_>>()?;
        for ((path, _), segments) in batch.iter().zip(results) {
            let name = stem(path);
            for (k, seg) in segments.iter().enumerate() {
                let file = if cfg.keep_full {
                    format!("{name}.ecgb")
                } else {
                    format!("{name}_{k:04}.ecgb")
                };
                save_record(seg, &a.out.join(file), RecordFormat::Bin)?;
                reservoir.extend_from_record(seg);
                written += 1;
            }
        }
    }
    let stats = reservoir.into_stats()?;
    let params = NormalizationParams::new(stats.p1, stats.p99)?;
    params.save(&a.out.join("percentiles.txt"))?;
    write_file(&a.out.join("preprocess.conf"), cfg.to_kv_string())?;
    log::info!(
        "preprocessed {} inputs into {written} records; p1={} p99={}",
        files.len(),
        stats.p1,
        stats.p99
    );
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let files = list_records(&a.input, a.fs)?;
    let features = files
        .par_iter()
        .enumerate()
        .map(|(i, (p, f))| extract_features(&load_record(p, *f)?, i))
        .collect::<Result<Vec<_>>>()?;
    let cfg = SamplerConfig {
        variance_target: a.variance,
        k_max: a.k_max,
        seed: a.seed,
    };
    let model = fit_cluster_model(&features, &cfg)?;
    let picked = stratified_sample(model.assignments(), a.count, a.seed)?;
    let ids: Vec<String> = picked
        .iter()
        .map(|&i| files[i].0.to_string_lossy().into_owned())
        .collect();
    write_manifest(&ids, &a.out)?;
    let summary = serde_json::to_string_pretty(&model.summary()).expect("serializable summary");
    write_file(&a.out.with_extension("summary.json"), summary + "\n")?;
    log::info!("k={} method={:?}; sampled {}", model.k(), model.method(), picked.len());
    Ok(())
}

/// Manifest entries resolve against the working directory first, then
/// against the manifest's own directory.
fn resolve_entry(entry: &str, manifest: &Path) -> PathBuf {
    let p = PathBuf::from(entry);
    if p.is_absolute() || p.exists() {
        return p;
    }
    manifest.parent().map_or(p.clone(), |d| d.join(&p))
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let params = NormalizationParams::load(&a.percentiles)?;
    let entries = read_manifest(&a.manifest)?;
    if entries.is_empty() {
        return Err(Error::EmptyInput("manifest lists no records"));
    }
    let files: Vec<(PathBuf, RecordFormat)> = entries
        .iter()
        .map(|e| {
            let p = resolve_entry(e, &a.manifest);
            RecordFormat::from_path(&p, a.fs)
                .map(|f| (p.clone(), f))
                .ok_or_else(|| Error::BadFormat(format!("{}: unknown record extension", p.display())))
        })
        .collect::<Result<_>>()?;
    let sequences: Vec<_> = files
        .par_iter()
        .map(|(p, f)| Ok(symbolize(&load_record(p, *f)?, &params)))
        .collect::<Result<_>>()?;
    let corpus = concat_corpus(&sequences);
    let out = train_with(corpus.as_bytes(), a.num_merges, params.alphabet_size, a.strategy)?;
    out.tokenizer.save(&a.out)?;
    log::info!(
        "{} merges; {} symbols -> {} tokens",
        out.tokenizer.num_merges(),
        corpus.len(),
        out.ids.len()
    );
    Ok(())
}

fn cmd_encode(a: &EncodeArgs) -> Result<()> {
    let tok = Tokenizer::load(&a.tokenizer)?;
    let params = NormalizationParams::load(&a.percentiles)?;
    let trie = Trie::build(&tok)?;
    let files = list_records(&a.input, a.fs)?;
    let spans_dir = with_suffix(&a.out, ".spans");
    if a.spans {
        create_dir(&spans_dir)?;
    }
    let mut encoded = Vec::with_capacity(files.len());
    for batch in files.chunks(BATCH) {
        let results: Vec<Vec<TokenId>> = batch
            .par_iter()
            .map(|(p, f)| {
                let symbols = symbolize(&load_record(p, *f)?, &params);
                if a.spans {
                    let spans = trie.encode_with_spans(symbols.as_bytes());
                    let path = spans_dir.join(format!("{}.jsonl", stem(p)));
                    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    let mut w = BufWriter::new(file);
                    write_spans_jsonl(&mut w, &spans)
                        .and_then(|_| w.flush())
                        .map_err(|e| Error::io(&path, e))?;
                    Ok(spans.into_iter().map(|s| s.id).collect())
                } else {
                    Ok(trie.encode(symbols.as_bytes()))
                }
            })
            .collect::<Result<_>>()?;
        encoded.extend(results);
    }
    save_encoded(&a.out, &encoded, encoded_format(a.format, &a.out))?;
    log::info!("encoded {} records", encoded.len());
    Ok(())
}

fn cmd_decode(a: &DecodeArgs) -> Result<()> {
    let tok = Tokenizer::load(&a.tokenizer)?;
    let params = NormalizationParams::load(&a.percentiles)?;
    let records = load_encoded(&a.input, encoded_format(a.format, &a.input))?;
    create_dir(&a.out)?;
    let shape = (a.shape.0, a.shape.1);
    records.par_iter().enumerate().try_for_each(|(i, ids)| {
        let symbols = tok.decode(ids)?;
        let rec = desymbolize(&symbols, &params, shape, a.fs)?;
        save_record(&rec, &a.out.join(format!("record_{i:06}.ecgb")), RecordFormat::Bin)
    })?;
    log::info!("decoded {} records", records.len());
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let records = load_encoded(&a.input, encoded_format(a.format, &a.input))?;
    create_dir(&a.out)?;
    let usage = token_usage(records.iter().map(Vec::as_slice));
    let lengths: Vec<usize> = records.iter().map(Vec::len).collect();
    let dist = length_distribution(&lengths, a.bin_width)?;

    let mut buf = Vec::new();
    analysis::write_usage_csv(&mut buf, &usage).expect("writing to memory");
    write_file(&a.out.join("usage.csv"), &buf)?;
    buf.clear();
    analysis::write_lengths_csv(&mut buf, dist.as_ref()).expect("writing to memory");
    write_file(&a.out.join("lengths.csv"), &buf)?;

    let tokens = usage.total() as usize;
    let ratio = if tokens > 0 {
        Some(compression_ratio(a.symbols_per_record * records.len(), tokens)?)
    } else {
        None
    };
    let summary = serde_json::json!({
        "records": records.len(),
        "tokens": tokens,
        "distinct_ids": usage.counts().len(),
        "min_len": dist.as_ref().map(|d| d.min),
        "max_len": dist.as_ref().map(|d| d.max),
        "mean_len": dist.as_ref().map(|d| d.mean),
        "compression_ratio": ratio,
    });
    write_file(
        &a.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;

    if let (Some(tp), Some(rp), Some(pp)) = (&a.tokenizer, &a.record, &a.percentiles) {
        let tok = Tokenizer::load(tp)?;
        let params = NormalizationParams::load(pp)?;
        let fmt = RecordFormat::from_path(rp, a.fs)
            .ok_or_else(|| Error::BadFormat(format!("{}: unknown record extension", rp.display())))?;
        let rec = load_record(rp, fmt)?;
        let spans = Trie::build(&tok)?.encode_with_spans(symbolize(&rec, &params).as_bytes());
        let rows = analysis::export_mapping(&rec, &spans, &params, a.lead)?;
        buf.clear();
        analysis::write_mapping_csv(&mut buf, &rows).expect("writing to memory");
        write_file(&a.out.join(format!("mapping_lead{}.csv", a.lead)), &buf)?;
    }
    Ok(())
}

fn cmd_assemble(a: &AssembleArgs) -> Result<()> {
    let encoded = load_encoded(&a.encoded, encoded_format(a.format, &a.encoded))?;
    let qa_file = fs::File::open(&a.qa).map_err(|e| Error::io(&a.qa, e))?;
    let qa: Vec<QaPair> = read_jsonl(BufReader::new(qa_file))?;
    if qa.len() != encoded.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} Q/A lines", encoded.len()),
            found: qa.len().to_string(),
        });
    }
    let d = SpecialTokens::after(a.text_vocab_size, a.ecg_vocab_size);
    let special = SpecialTokens {
        bos: a.bos.unwrap_or(d.bos),
        sig_start: a.sig_start.unwrap_or(d.sig_start),
        sig_end: a.sig_end.unwrap_or(d.sig_end),
        eos: a.eos.unwrap_or(d.eos),
    };
    let vocab = VocabInfo::new(a.text_vocab_size, a.ecg_vocab_size, special)?;
    let out: Vec<TrainingRecord> = encoded
        .iter()
        .zip(&qa)
        .map(|(ecg, p)| assemble(ecg, &p.question, &p.answer, &vocab).map(|l| TrainingRecord::from(&l)))
        .collect::<Result<_>>()?;
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &out).expect("writing to memory");
    write_file(&a.out, buf)
}

pub fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::InvalidParameter("--jobs must be positive".into()));
        }
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Preprocess(a) => cmd_preprocess(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Train(a) => cmd_train(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Assemble(a) => cmd_assemble(a),
    }
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("E_INVALID_ARG: {}", first.trim_start_matches("error: "));
            return 1;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}: {}", e.code(), e.to_string().replace('\n', " "));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_parsing() {
        assert_eq!("12x500".parse::<Shape>().unwrap(), Shape(12, 500));
        assert!("12".parse::<Shape>().is_err());
        assert!("0x5".parse::<Shape>().is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn train_defaults() {
        let cli = Cli::try_parse_from([
            "ecg-byte", "train", "--manifest", "m", "--percentiles", "p", "--out", "t",
        ])
        .unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!(t.num_merges, 3500);
        assert_eq!(t.strategy, TrainStrategy::Recount);
    }
}
