//! `psi-cli`: encrypt private sets, compare key files, run the rectangle
//! demo, benchmarks, and brute-force attack experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3
//! resource-guard refusal.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nsum_psi::{
    attack_s1, attack_s2, compare, encrypt_parallel, false_positive_rate, make_position_hash,
    sample_synthetic_map, table_entry_estimate, tokenize, AttackError, AttackResult,
    CompareError, ElementId, ElementMap, EncryptError, MapError, MatchReport, PrivateSet,
    ShapeError, SumTable, DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_TABLE_CAP,
};
use psi_cli::bench::{run_confidence, run_size_bench, BenchError, ConfidenceConfig, SizeBenchConfig};
use psi_cli::demo::{run_demo, DemoConfig, DemoError};
use psi_cli::keyfile::{self, KeyFileError};
use psi_cli::sidecar::{self, SidecarError};

#[derive(Parser)]
#[command(name = "psi-cli", version, about = "Encrypt-once fuzzy private set intersection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encrypt a message or id list into a shareable key file plus a private
    /// index sidecar.
    Encrypt(EncryptArgs),
    /// Compare your key file against a counterparty's and report scores.
    Compare(CompareArgs),
    /// Run the rectangle-world demo end to end, writing grid artifacts.
    DemoShapes(DemoArgs),
    /// Benchmark key counts and timings, or run the confidence experiment.
    Bench(BenchArgs),
    /// Brute-force a published key file against a map or hashed grid.
    Attack(AttackArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KeyFormat {
    Text,
    Packed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Human,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum HashMode {
    /// Flat priors over the hash range.
    Uniform,
    /// Mass piled at both ends of the range, flattening pair sums.
    EdgeWeighted,
}

impl From<HashMode> for nsum_psi::HashDistribution {
    fn from(mode: HashMode) -> Self {
        match mode {
            HashMode::Uniform => nsum_psi::HashDistribution::Uniform,
            HashMode::EdgeWeighted => nsum_psi::HashDistribution::EdgeWeighted,
        }
    }
}

#[derive(Args)]
struct EncryptArgs {
    /// Map file: one record per line, "token v1 v2 ...".
    #[arg(long)]
    map: PathBuf,
    /// Message to tokenize (whitespace split, shell-style quotes, lowercased).
    #[arg(long, conflicts_with_all = ["ids", "ids_file"])]
    message: Option<String>,
    /// Comma-separated element ids, taken verbatim.
    #[arg(long, value_delimiter = ',', conflicts_with = "ids_file")]
    ids: Vec<String>,
    /// File with one element id per line.
    #[arg(long)]
    ids_file: Option<PathBuf>,
    /// Security level n: keys are sums over n distinct elements.
    #[arg(long, default_value_t = 2)]
    level: u8,
    /// Stopword tokens to ignore.
    #[arg(long, value_delimiter = ',')]
    stopwords: Vec<String>,
    /// Output key file.
    #[arg(long)]
    out: PathBuf,
    /// Private sidecar path; defaults to "<out>.idx".
    #[arg(long)]
    index_out: Option<PathBuf>,
    /// Key file encoding.
    #[arg(long, value_enum, default_value_t = KeyFormat::Text)]
    format: KeyFormat,
    /// Worker threads for the tuple enumeration.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Your key file (text or packed).
    #[arg(long)]
    keys: PathBuf,
    /// Your private sidecar from `encrypt`.
    #[arg(long)]
    index: PathBuf,
    /// The counterparty's key file (text or packed).
    #[arg(long)]
    their_keys: PathBuf,
    /// Level to assume for their file when it is text; defaults to yours.
    #[arg(long)]
    their_level: Option<u8>,
    /// High-confidence overlap threshold.
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    threshold: f64,
    /// Report encoding on stdout.
    #[arg(long, value_enum, default_value_t = ReportFormat::Human)]
    report: ReportFormat,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 10)]
    n_colonies: usize,
    #[arg(long, default_value_t = 50)]
    world_dim: u32,
    #[arg(long, default_value_t = 5)]
    min_dim: u32,
    #[arg(long, default_value_t = 10)]
    max_dim: u32,
    #[arg(long, default_value_t = 100_000_000)]
    i_max: u64,
    #[arg(long, default_value_t = 2)]
    level: u8,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Position-hash value distribution.
    #[arg(long, value_enum, default_value_t = HashMode::Uniform)]
    hash_distribution: HashMode,
    /// Directory for the PGM and CSV artifacts.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Load the map from a file instead of sampling a synthetic one.
    #[arg(long)]
    map_file: Option<PathBuf>,
    /// Synthetic map size.
    #[arg(long, default_value_t = 10_000)]
    synthetic_words: usize,
    /// Synthetic omega set size range.
    #[arg(long, default_value_t = 1)]
    omega_min: usize,
    #[arg(long, default_value_t = 3)]
    omega_max: usize,
    /// Synthetic value ceiling.
    #[arg(long, default_value_t = 16_000_000)]
    i_max: u64,
    /// Levels to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1u8, 2, 3])]
    levels: Vec<u8>,
    /// Message sizes to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 6, 8, 10])]
    word_counts: Vec<usize>,
    /// Trials per (level, word_count) cell.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Worker threads for the parallel-encryption column.
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Run the confidence experiment instead of the size/timing sweep.
    #[arg(long)]
    confidence: bool,
    /// Confidence mode: number of message pairs.
    #[arg(long, default_value_t = 300)]
    pairs: usize,
    /// Confidence mode: words per message.
    #[arg(long, default_value_t = 10)]
    words: usize,
    /// Confidence mode: planted shared words cycle through 0..=max_shared.
    #[arg(long, default_value_t = 5)]
    max_shared: usize,
    /// Confidence mode: overlap threshold for the summary.
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
    threshold: f64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    /// Published key file to attack.
    #[arg(long)]
    keys: PathBuf,
    /// Attack level; must match the key file. Levels 3 and up are refused
    /// with a cost estimate.
    #[arg(long)]
    level: u8,
    /// Attack a word map.
    #[arg(long, conflicts_with_all = ["grid_dim", "hash_seed"])]
    map: Option<PathBuf>,
    /// Attack a hashed grid of this dimension.
    #[arg(long, requires = "hash_seed")]
    grid_dim: Option<u32>,
    /// Seed of the shared position hash.
    #[arg(long)]
    hash_seed: Option<u64>,
    /// Hash ceiling for the grid domain.
    #[arg(long, default_value_t = 100_000_000)]
    i_max: u64,
    /// Entry cap for the sum table.
    #[arg(long, default_value_t = DEFAULT_TABLE_CAP)]
    cap: u64,
    /// Optional ground-truth file, one identifier per line.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Report CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    fn guard(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl From<MapError> for CliError {
    fn from(err: MapError) -> Self {
        match err {
            MapError::ZeroCeiling
            | MapError::ZeroWorldDim
            | MapError::HashDomainTooSmall { .. }
            | MapError::HashSamplingExhausted { .. }
            | MapError::BadOmegaSizeRange { .. }
            | MapError::UnclosedQuote
            | MapError::EmptyElementId
            | MapError::InvalidElementId(_) => CliError::usage(err.to_string()),
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<EncryptError> for CliError {
    fn from(err: EncryptError) -> Self {
        match err {
            EncryptError::LevelZero
            | EncryptError::NoWorkers
            | EncryptError::KeyOverflow { .. }
            | EncryptError::TooFewElements { .. } => CliError::usage(err.to_string()),
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<CompareError> for CliError {
    fn from(err: CompareError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<KeyFileError> for CliError {
    fn from(err: KeyFileError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<SidecarError> for CliError {
    fn from(err: SidecarError) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<AttackError> for CliError {
    fn from(err: AttackError) -> Self {
        match err {
            AttackError::TableTooLarge { .. } => CliError::guard(err.to_string()),
            _ => CliError::data(err.to_string()),
        }
    }
}

impl From<ShapeError> for CliError {
    fn from(err: ShapeError) -> Self {
        match err {
            ShapeError::NoColonies
            | ShapeError::BadSizeBounds { .. }
            | ShapeError::WorldTooSmall { .. }
            | ShapeError::PackingFailed { .. } => CliError::usage(err.to_string()),
            ShapeError::Map(inner) => inner.into(),
            ShapeError::Encrypt(inner) => inner.into(),
            ShapeError::Compare(inner) => inner.into(),
            ShapeError::DimensionMismatch { .. } => CliError::data(err.to_string()),
        }
    }
}

impl From<DemoError> for CliError {
    fn from(err: DemoError) -> Self {
        match err {
            DemoError::Map(inner) => inner.into(),
            DemoError::Shape(inner) => inner.into(),
            DemoError::Attack(inner) => inner.into(),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(err: BenchError) -> Self {
        match err {
            BenchError::WordCountBelowLevel { .. }
            | BenchError::MapTooSmall { .. }
            | BenchError::EmptyPlan => CliError::usage(err.to_string()),
            BenchError::Encrypt(inner) => inner.into(),
            BenchError::Compare(inner) => inner.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::data(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::data(err.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Encrypt(args) => cmd_encrypt(args),
        Command::Compare(args) => cmd_compare(args),
        Command::DemoShapes(args) => cmd_demo_shapes(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Attack(args) => cmd_attack(args),
    }
}

fn parse_ids(tokens: &[String]) -> Result<Vec<ElementId>, CliError> {
    tokens
        .iter()
        .map(|t| ElementId::new(t.trim()).map_err(CliError::from))
        .collect()
}

fn cmd_encrypt(args: EncryptArgs) -> Result<(), CliError> {
    let stopwords = parse_ids(&args.stopwords)?;
    let map = ElementMap::load_file(&args.map, &stopwords)?;

    let ids: Vec<ElementId> = if let Some(message) = &args.message {
        tokenize(message)?
    } else if let Some(path) = &args.ids_file {
        let text = fs::read_to_string(path)?;
        parse_ids(&text.lines().map(str::to_string).collect::<Vec<_>>())?
    } else if !args.ids.is_empty() {
        parse_ids(&args.ids)?
    } else {
        return Err(CliError::usage("provide --message, --ids, or --ids-file"));
    };

    let set = PrivateSet::resolve(&map, &ids);
    if !set.dropped().is_empty() {
        let dropped: Vec<&str> = set.dropped().iter().map(ElementId::as_str).collect();
        eprintln!("note: {} token(s) resolved to nothing and were dropped: {}",
            dropped.len(), dropped.join(" "));
    }
    if set.len() < args.level as usize {
        let dropped: Vec<&str> = set.dropped().iter().map(ElementId::as_str).collect();
        return Err(CliError::usage(format!(
            "message resolves to {} usable element(s), fewer than level {}; dropped: [{}]",
            set.len(),
            args.level,
            dropped.join(" ")
        )));
    }

    let (encrypted, index) = encrypt_parallel(&set, args.level, args.workers)?;
    match args.format {
        KeyFormat::Text => keyfile::write_text_file(&args.out, encrypted.keys())?,
        KeyFormat::Packed => keyfile::write_packed_file(&args.out, encrypted.level(), encrypted.keys())?,
    }
    let index_path = args
        .index_out
        .unwrap_or_else(|| PathBuf::from(format!("{}.idx", args.out.display())));
    sidecar::write_sidecar_file(&index_path, &set, &encrypted, &index)?;

    println!(
        "encrypted {} element(s) at level {}: {} keys -> {} (index: {})",
        set.len(),
        encrypted.level(),
        encrypted.len(),
        args.out.display(),
        index_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    element: &'a str,
    score: f64,
}

fn render_report(
    report: &MatchReport,
    my_key_count: usize,
    their_key_count: usize,
    threshold: f64,
    format: ReportFormat,
    mut out: Box<dyn Write>,
) -> Result<(), CliError> {
    match format {
        ReportFormat::Human => {
            writeln!(out, "my keys:           {my_key_count}")?;
            writeln!(out, "their keys:        {their_key_count}")?;
            writeln!(out, "common keys:       {}", report.common_keys.len())?;
            writeln!(out, "overlap fraction:  {:.6}", report.my_overlap_fraction)?;
            writeln!(
                out,
                "high confidence:   {} (threshold {})",
                if report.high_confidence { "yes" } else { "no" },
                threshold
            )?;
            writeln!(out, "recovered values:  {}", report.recovered_values.len())?;
            writeln!(out, "element scores:")?;
            for (id, score) in &report.element_scores {
                writeln!(out, "  {id} {score:.4}")?;
            }
        }
        ReportFormat::Json => {
            let summary = serde_json::json!({
                "type": "summary",
                "my_keys": my_key_count,
                "their_keys": their_key_count,
                "common_keys": report.common_keys.len(),
                "overlap_fraction": report.my_overlap_fraction,
                "high_confidence": report.high_confidence,
                "threshold": threshold,
                "recovered_values": report.recovered_values.len(),
            });
            writeln!(out, "{summary}")?;
            for (id, score) in &report.element_scores {
                let row = serde_json::json!({
                    "type": "element",
                    "element": id.as_str(),
                    "score": score,
                });
                writeln!(out, "{row}")?;
            }
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            for (id, score) in &report.element_scores {
                writer.serialize(ScoreRow { element: id.as_str(), score: *score })?;
            }
            writer.flush()?;
        }
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let sidecar = sidecar::read_sidecar_file(&args.index)?;
    let mine = keyfile::read_any_file(&args.keys, sidecar.level)?;
    if mine.level() != sidecar.level {
        return Err(CliError::data(format!(
            "key file level {} does not match sidecar level {}",
            mine.level(),
            sidecar.level
        )));
    }
    if mine.len() != sidecar.index.len()
        || mine.keys().iter().any(|&k| sidecar.index.posting(k).is_none())
    {
        return Err(CliError::data("sidecar index does not cover the key file".to_string()));
    }
    let their_level = args.their_level.unwrap_or(sidecar.level);
    let theirs = keyfile::read_any_file(&args.their_keys, their_level)?;

    let report = compare(&sidecar.set, &mine, &sidecar.index, &theirs, args.threshold)?;

    if let Some(path) = &args.out {
        let file = Box::new(BufWriter::new(File::create(path)?));
        render_report(&report, mine.len(), theirs.len(), args.threshold, args.report, file)?;
    }
    render_report(
        &report,
        mine.len(),
        theirs.len(),
        args.threshold,
        args.report,
        Box::new(std::io::stdout().lock()),
    )
}

fn write_pgm_file(path: &Path, grid: &nsum_psi::CandidateGrid) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    grid.write_pgm(&mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ColonyScoreRow {
    colony: usize,
    x: u32,
    y: u32,
    width: u32,
    height: u32,
    score: f64,
}

fn cmd_demo_shapes(args: DemoArgs) -> Result<(), CliError> {
    let cfg = DemoConfig {
        n_colonies: args.n_colonies,
        world_dim: args.world_dim,
        min_dim: args.min_dim,
        max_dim: args.max_dim,
        i_max: args.i_max,
        level: args.level,
        seed: args.seed,
        distribution: args.hash_distribution.into(),
    };
    let demo = run_demo(&cfg)?;
    fs::create_dir_all(&args.out_dir)?;

    write_pgm_file(&args.out_dir.join("raw.pgm"), &demo.raw)?;
    write_pgm_file(&args.out_dir.join("filtered.pgm"), &demo.filtered)?;
    write_pgm_file(&args.out_dir.join("truth.pgm"), &demo.truth)?;
    write_pgm_file(&args.out_dir.join("attack.pgm"), &demo.attack)?;

    let mut cells = BufWriter::new(File::create(args.out_dir.join("cells.csv"))?);
    nsum_psi::write_cell_csv(&mut cells, &demo.raw, &demo.filtered, &demo.truth)?;
    cells.flush()?;

    let mut scores = csv::Writer::from_path(args.out_dir.join("colony_scores.csv"))?;
    for (k, (colony, score)) in
        demo.my_world.colonies().iter().zip(&demo.colony_scores).enumerate()
    {
        scores.serialize(ColonyScoreRow {
            colony: k + 1,
            x: colony.x,
            y: colony.y,
            width: colony.width,
            height: colony.height,
            score: *score,
        })?;
    }
    scores.flush()?;

    println!(
        "demo (dim {}, {} colonies/side, level {}): truth {} cells, raw {} cells, \
         filtered {} cells, attack flags {} cells; artifacts in {}",
        args.world_dim,
        args.n_colonies,
        args.level,
        demo.truth.flag_count(),
        demo.raw.flag_count(),
        demo.filtered.flag_count(),
        demo.attack.flag_count(),
        args.out_dir.display()
    );
    Ok(())
}

fn csv_sink(out: Option<&PathBuf>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let map = match &args.map_file {
        Some(path) => ElementMap::load_file(path, &[])?,
        None => sample_synthetic_map(
            args.synthetic_words,
            (args.omega_min, args.omega_max),
            args.i_max,
            args.seed,
        )?,
    };

    if args.confidence {
        let cfg = ConfidenceConfig {
            pairs: args.pairs,
            words_per_message: args.words,
            level: args.levels.first().copied().unwrap_or(2),
            threshold: args.threshold,
            max_shared: args.max_shared,
            seed: args.seed.wrapping_add(1),
        };
        let records = run_confidence(&map, &cfg)?;
        let above: Vec<_> =
            records.iter().filter(|r| r.overlap_fraction > args.threshold).collect();
        let clean = above.iter().filter(|r| r.false_positive_count == 0).count();
        let mut writer = csv_sink(args.out.as_ref())?;
        for record in &records {
            writer.serialize(record)?;
        }
        writer.flush()?;
        eprintln!(
            "confidence: {} pairs, {} above the {} overlap threshold, {} of those free of \
             false positives",
            records.len(),
            above.len(),
            args.threshold,
            clean
        );
    } else {
        let cfg = SizeBenchConfig {
            levels: args.levels.clone(),
            word_counts: args.word_counts.clone(),
            trials: args.trials,
            workers: args.workers,
            seed: args.seed.wrapping_add(1),
        };
        let cells = run_size_bench(&map, &cfg)?;
        let mut writer = csv_sink(args.out.as_ref())?;
        for cell in &cells {
            writer.serialize(cell)?;
        }
        writer.flush()?;
        eprintln!("bench: {} cells over {} trials each", cells.len(), args.trials);
    }
    Ok(())
}

#[derive(Serialize)]
struct AttackRow<'a> {
    identifier: &'a str,
    flagged: u8,
    truth: Option<u8>,
}

fn load_truth(path: &Path) -> Result<BTreeSet<ElementId>, CliError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(|line| ElementId::new(line).map_err(CliError::from))
        .collect()
}

fn write_attack_report(
    domain: &[ElementId],
    result: &AttackResult,
    truth: Option<&BTreeSet<ElementId>>,
    out: Option<&PathBuf>,
) -> Result<(), CliError> {
    let mut writer = csv_sink(out)?;
    let flagged: BTreeSet<&ElementId> = result.candidates.known().collect();
    for id in domain {
        writer.serialize(AttackRow {
            identifier: id.as_str(),
            flagged: u8::from(flagged.contains(id)),
            truth: truth.map(|t| u8::from(t.contains(id))),
        })?;
    }
    writer.flush()?;
    Ok(())
}

fn cmd_attack(args: AttackArgs) -> Result<(), CliError> {
    if args.level >= 3 {
        // Estimate the tabulation cost before refusing, so the message says
        // what it would take.
        let total_values = if let Some(path) = &args.map {
            ElementMap::load_file(path, &[])?.total_value_count()
        } else if let Some(dim) = args.grid_dim {
            u64::from(dim) * u64::from(dim)
        } else {
            return Err(CliError::usage("provide --map or --grid-dim/--hash-seed"));
        };
        let estimate = table_entry_estimate(total_values, args.level);
        return Err(CliError::guard(format!(
            "level {} attack refused: a sum table over {} values would hold about {} entries \
             (cap {}); levels 3 and up are not tabulated",
            args.level, total_values, estimate, args.cap
        )));
    }

    let keys = keyfile::read_any_file(&args.keys, args.level)?;
    let truth = args.truth.as_ref().map(|p| load_truth(p)).transpose()?;

    let (domain, result): (Vec<ElementId>, AttackResult) = if let Some(path) = &args.map {
        let map = ElementMap::load_file(path, &[])?;
        let result = match args.level {
            1 => attack_s1(&keys, &map)?,
            2 => {
                let table = SumTable::from_map(&map, args.cap)?;
                attack_s2(&keys, &table)?
            }
            _ => return Err(CliError::usage("attack level must be 1 or 2")),
        };
        (map.ids().cloned().collect(), result)
    } else if let (Some(dim), Some(hash_seed)) = (args.grid_dim, args.hash_seed) {
        let hash = make_position_hash(dim, args.i_max, hash_seed)?;
        let table = SumTable::from_hash(&hash, args.cap)?;
        if args.level != 2 {
            return Err(CliError::usage("grid attacks are pairwise; use --level 2"));
        }
        let result = attack_s2(&keys, &table)?;
        let domain = (1..=(dim as usize * dim as usize)).map(ElementId::from).collect();
        (domain, result)
    } else {
        return Err(CliError::usage("provide --map or --grid-dim/--hash-seed"));
    };

    let candidate_count = result.candidates.count();
    eprintln!(
        "attack flagged {} of {} identifiers ({:.1}%)",
        candidate_count,
        domain.len(),
        100.0 * candidate_count as f64 / domain.len().max(1) as f64
    );
    if let Some(truth) = &truth {
        eprintln!(
            "false-positive rate vs supplied truth: {:.4}",
            false_positive_rate(&result, truth)
        );
    }
    write_attack_report(&domain, &result, truth.as_ref(), args.out.as_ref())
}
