//! The `links` command line: `cluster`, `generate`, `evaluate` and `tune`.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors.

use crate::clusterer::{restore_with_dimension, ClusterError, LinksClusterer};
use crate::eval::{match_labels, tune_grid, TuningGrid};
use crate::hypersphere::{
    generate_labeled_stream, generate_separated, theta_mode, CenterLayout, GenerativeParams,
    UnitVector,
};
use crate::records::{
    is_comment, parse_record, write_output, write_record, Format, OutputRecord, StreamRecord,
};
use crate::thresholds::LinksConfig;
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Default `T_c`: the member-to-centre cosine for N = 128, σ = 0.05.
pub const DEFAULT_TC: f64 = 0.86;
/// Default `T_s`.
pub const DEFAULT_TS: f64 = 0.6;
/// Default `T_p`.
pub const DEFAULT_TP: f64 = 0.9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "links", version, about = "Online clustering of unit vectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assign each input vector to a cluster as it arrives.
    Cluster(ClusterArgs),
    /// Write a labeled synthetic stream.
    Generate(GenerateArgs),
    /// Cluster a labeled stream and report matched accuracy.
    Evaluate(EvaluateArgs),
    /// Grid-search thresholds on a labeled stream.
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Record format.
    #[arg(long, default_value = "jsonl")]
    pub format: Format,
    /// Read records from this file instead of standard input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Abort on the first malformed record and reject vectors that are not unit length.
    #[arg(long)]
    pub strict: bool,
    /// Require every vector to have this dimension.
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Cluster similarity threshold T_c.
    #[arg(long)]
    pub tc: Option<f64>,
    /// Subcluster similarity threshold T_s.
    #[arg(long)]
    pub ts: Option<f64>,
    /// Pair similarity maximum T_p.
    #[arg(long)]
    pub tp: Option<f64>,
    /// Use the raw size thresholds instead of the interpolated ones.
    #[arg(long)]
    pub no_anisotropy: bool,
    /// Seed stored with the clusterer state.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ThresholdArgs {
    fn config(&self, dimension: usize, strict: bool) -> LinksConfig {
        LinksConfig {
            cluster_threshold: self.tc.unwrap_or(DEFAULT_TC),
            subcluster_threshold: self.ts.unwrap_or(DEFAULT_TS),
            pair_max: self.tp.unwrap_or(DEFAULT_TP),
            dimension,
            use_anisotropy: !self.no_anisotropy,
            strict_unit_norm: strict,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[command(flatten)]
    pub input: InputArgs,
    /// Resume from this snapshot; its configuration is used.
    #[arg(long)]
    pub snapshot_in: Option<PathBuf>,
    /// Write the final state here at end of stream.
    #[arg(long)]
    pub snapshot_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Angular spread of each cluster, radians.
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 20)]
    pub clusters: usize,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Center placement: uniform or simplex.
    #[arg(long, default_value = "uniform")]
    pub layout: CenterLayout,
    /// Regenerate until all center pairs are more than this multiple of θ_c apart.
    #[arg(long)]
    pub min_separation: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub max_attempts: u32,
    #[arg(long, default_value = "jsonl")]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Comma-separated T_c candidates.
    #[arg(long, value_delimiter = ',', required = true)]
    pub tc_grid: Vec<f64>,
    /// Comma-separated T_s candidates.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ts_grid: Vec<f64>,
    /// Comma-separated T_p candidates.
    #[arg(long, value_delimiter = ',', default_value = "0.9")]
    pub tp_grid: Vec<f64>,
    #[arg(long)]
    pub no_anisotropy: bool,
    #[command(flatten)]
    pub input: InputArgs,
    /// Write the accuracy table (CSV) here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(format!("i/o error: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Cluster(a) => cmd_cluster(&a, stdin, stdout, stderr),
        Command::Generate(a) => cmd_generate(&a, stdout),
        Command::Evaluate(a) => cmd_evaluate(&a, stdin, stdout, stderr),
        Command::Tune(a) => cmd_tune(&a, stdin, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_DATA
        }
    }
}

fn open_input<'a>(
    path: &Option<PathBuf>,
    stdin: &'a mut dyn BufRead,
) -> CliResult<Box<dyn BufRead + 'a>> {
    match path {
        Some(p) => {
            let f = File::open(p)
                .map_err(|e| CliError::Data(format!("cannot open {}: {e}", p.display())))?;
            Ok(Box::new(BufReader::new(f)))
        }
        None => Ok(Box::new(stdin)),
    }
}

/// Reads records line by line, enforcing one dimension per stream and the
/// strict/lenient policy for malformed lines.
struct RecordReader<'a> {
    input: Box<dyn BufRead + 'a>,
    format: Format,
    strict: bool,
    dimension: Option<usize>,
    line_no: usize,
    skipped: usize,
    buf: String,
}

impl<'a> RecordReader<'a> {
    fn new(input: Box<dyn BufRead + 'a>, args: &InputArgs) -> Self {
        RecordReader {
            input,
            format: args.format,
            strict: args.strict,
            dimension: args.dim,
            line_no: 0,
            skipped: 0,
            buf: String::new(),
        }
    }

    /// Logs a bad record; an error in strict mode.
    fn reject(&mut self, line: usize, msg: &str, stderr: &mut dyn Write) -> CliResult<()> {
        if self.strict {
            return Err(CliError::Data(format!("line {line}: {msg}")));
        }
        writeln!(stderr, "warning: line {line}: {msg} (skipped)")?;
        self.skipped += 1;
        Ok(())
    }

    fn next_record(&mut self, stderr: &mut dyn Write) -> CliResult<Option<(usize, StreamRecord)>> {
        loop {
            self.buf.clear();
            self.line_no += 1;
            let n = match self.input.read_line(&mut self.buf) {
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                    let line = self.line_no;
                    self.reject(line, "line is not valid UTF-8", stderr)?;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            if n == 0 {
                return Ok(None);
            }
            if is_comment(&self.buf) {
                continue;
            }
            let line = self.line_no;
            let rec = match parse_record(self.buf.trim_end_matches(['\n', '\r']), self.format) {
                Ok(r) => r,
                Err(e) => {
                    self.reject(line, &e.to_string(), stderr)?;
                    continue;
                }
            };
            match self.dimension {
                Some(d) if d != rec.vector.len() => {
                    let msg = format!("expected dimension {d}, found {}", rec.vector.len());
                    self.reject(line, &msg, stderr)?;
                    continue;
                }
                Some(_) => {}
                None => self.dimension = Some(rec.vector.len()),
            }
            return Ok(Some((line, rec)));
        }
    }

    fn report_skipped(&self, stderr: &mut dyn Write) -> io::Result<()> {
        if self.skipped > 0 {
            writeln!(stderr, "skipped {} malformed record(s)", self.skipped)?;
        }
        Ok(())
    }
}

fn check_matches(name: &str, flag: Option<f64>, stored: f64) -> CliResult<()> {
    match flag {
        Some(v) if v != stored => Err(CliError::Usage(format!(
            "--{name} {v} conflicts with the snapshot value {stored}"
        ))),
        _ => Ok(()),
    }
}

fn load_snapshot(path: &Path, args: &ClusterArgs) -> CliResult<LinksClusterer> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let clusterer = match args.input.dim {
        Some(d) => restore_with_dimension(&text, d),
        None => crate::clusterer::restore(&text),
    }
    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let cfg = clusterer.config();
    let t = &args.thresholds;
    check_matches("tc", t.tc, cfg.cluster_threshold)?;
    check_matches("ts", t.ts, cfg.subcluster_threshold)?;
    check_matches("tp", t.tp, cfg.pair_max)?;
    if t.no_anisotropy && cfg.use_anisotropy {
        return Err(CliError::Usage(
            "--no-anisotropy conflicts with the snapshot configuration".into(),
        ));
    }
    Ok(clusterer)
}

fn new_clusterer(t: &ThresholdArgs, dimension: usize, strict: bool) -> CliResult<LinksClusterer> {
    let c = LinksClusterer::new(t.config(dimension, strict)).map_err(|e| match e {
        ClusterError::Config(errs) => CliError::Usage(errs.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    Ok(c.with_seed(t.seed.unwrap_or(0)))
}

fn validate_flags(t: &ThresholdArgs, strict: bool) -> CliResult<()> {
    // Dimension is not known yet; check everything else up front.
    t.config(2, strict)
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn cmd_cluster(
    args: &ClusterArgs,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<()> {
    let mut clusterer = match &args.snapshot_in {
        Some(path) => Some(load_snapshot(path, args)?),
        None => {
            validate_flags(&args.thresholds, args.input.strict)?;
            args.input
                .dim
                .map(|d| new_clusterer(&args.thresholds, d, args.input.strict))
                .transpose()?
        }
    };
    let mut reader = RecordReader::new(open_input(&args.input.input, stdin)?, &args.input);
    if let Some(c) = &clusterer {
        reader.dimension = Some(c.config().dimension);
    }
    let format = args.input.format;
    while let Some((line, rec)) = reader.next_record(stderr)? {
        let c = match &mut clusterer {
            Some(c) => c,
            None => clusterer.insert(new_clusterer(
                &args.thresholds,
                rec.vector.len(),
                args.input.strict,
            )?),
        };
        let index = c.ingested_count();
        let result = match c.add_raw(&rec.vector) {
            Ok(r) => r,
            Err(e) => {
                reader.reject(line, &e.to_string(), stderr)?;
                continue;
            }
        };
        let out = OutputRecord {
            id: rec.id.unwrap_or_else(|| index.to_string()),
            cluster: result.cluster_id.0,
            action: result.action,
        };
        write_output(stdout, format, &out)?;
        stdout.flush()?;
    }
    reader.report_skipped(stderr)?;
    if let Some(path) = &args.snapshot_out {
        match &clusterer {
            Some(c) => std::fs::write(path, c.snapshot_json() + "\n")
                .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?,
            None => writeln!(
                stderr,
                "warning: empty stream and no --dim; no snapshot written"
            )?,
        }
    }
    Ok(())
}

fn cmd_generate(args: &GenerateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let params = GenerativeParams {
        dimension: args.dim,
        sigma: args.sigma,
        num_clusters: args.clusters,
        points_per_cluster: args.points,
        seed: args.seed,
        layout: args.layout,
    };
    let stream = match args.min_separation {
        Some(factor) => {
            let theta_c =
                theta_mode(args.dim, args.sigma).map_err(|e| CliError::Usage(e.to_string()))?;
            generate_separated(&params, factor * theta_c, args.max_attempts)
        }
        None => generate_labeled_stream(&params),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut file_out;
    let out: &mut dyn Write = match &args.output {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::Data(format!("cannot create {}: {e}", p.display())))?;
            file_out = BufWriter::new(f);
            &mut file_out
        }
        None => stdout,
    };
    let p = &stream.params;
    writeln!(
        out,
        "# links generate dim={} sigma={} clusters={} points={} seed={} layout={}",
        p.dimension, p.sigma, p.num_clusters, p.points_per_cluster, p.seed, p.layout
    )?;
    for (i, point) in stream.records.iter().enumerate() {
        let rec = StreamRecord {
            id: Some(i.to_string()),
            vector: point.vector.as_slice().to_vec(),
            label: Some(point.label.to_string()),
        };
        write_record(out, args.format, &rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Records with dense label indices, and the label names in index order.
type Labeled = (Vec<(usize, UnitVector)>, Vec<String>);

/// Reads a whole labeled stream, mapping label strings to dense indices.
fn read_labeled(
    input: &InputArgs,
    stdin: &mut dyn BufRead,
    stderr: &mut dyn Write,
) -> CliResult<Labeled> {
    let mut reader = RecordReader::new(open_input(&input.input, stdin)?, input);
    let mut raw = Vec::new();
    while let Some((line, rec)) = reader.next_record(stderr)? {
        let Some(label) = rec.label else {
            return Err(CliError::Data(format!("line {line}: record has no label")));
        };
        let v = if input.strict {
            UnitVector::strict(&rec.vector)
        } else {
            UnitVector::new(&rec.vector)
        };
        match v {
            Ok(v) => raw.push((label, v)),
            Err(e) => reader.reject(line, &e.to_string(), stderr)?,
        }
    }
    reader.report_skipped(stderr)?;
    let names: Vec<String> = {
        let mut n: Vec<String> = raw.iter().map(|(l, _)| l.clone()).collect();
        n.sort();
        n.dedup();
        n
    };
    let index: BTreeMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let stream = raw
        .iter()
        .map(|(l, v)| (index[l.as_str()], v.clone()))
        .collect();
    Ok((stream, names))
}

fn cmd_evaluate(
    args: &EvaluateArgs,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<()> {
    validate_flags(&args.thresholds, args.input.strict)?;
    let (stream, names) = read_labeled(&args.input, stdin, stderr)?;
    if stream.is_empty() {
        return Err(CliError::Data("no records to evaluate".into()));
    }
    let dimension = stream[0].1.dimension();
    let mut clusterer = new_clusterer(&args.thresholds, dimension, args.input.strict)?;
    let mut predicted = Vec::with_capacity(stream.len());
    for (_, x) in &stream {
        let r = clusterer
            .add_vector(x)
            .map_err(|e| CliError::Data(e.to_string()))?;
        predicted.push(r.cluster_id);
    }
    let truth: Vec<usize> = stream.iter().map(|(l, _)| *l).collect();
    let report = match_labels(&predicted, &truth).map_err(|e| CliError::Data(e.to_string()))?;
    let stats = clusterer.stats();
    writeln!(stdout, "records: {}", report.total)?;
    writeln!(stdout, "correct: {}", report.correct)?;
    writeln!(stdout, "accuracy: {}", report.accuracy)?;
    writeln!(stdout, "clusters: {}", stats.clusters)?;
    writeln!(stdout, "subclusters: {}", stats.subclusters)?;
    writeln!(stdout, "true_clusters: {}", names.len())?;
    Ok(())
}

fn cmd_tune(
    args: &TuneArgs,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<()> {
    let (stream, _) = read_labeled(&args.input, stdin, stderr)?;
    if stream.is_empty() {
        return Err(CliError::Data("no records to tune on".into()));
    }
    let base = LinksConfig {
        cluster_threshold: DEFAULT_TC,
        subcluster_threshold: DEFAULT_TS,
        pair_max: DEFAULT_TP,
        dimension: stream[0].1.dimension(),
        use_anisotropy: !args.no_anisotropy,
        strict_unit_norm: args.input.strict,
    };
    let grid = TuningGrid {
        t_c: args.tc_grid.clone(),
        t_s: args.ts_grid.clone(),
        t_p: args.tp_grid.clone(),
        base,
    };
    let report = tune_grid(&grid, &stream).map_err(|e| CliError::Usage(e.to_string()))?;
    for s in &report.skipped {
        writeln!(
            stderr,
            "skipped T_c={} T_s={} T_p={}: {}",
            s.t_c, s.t_s, s.t_p, s.reason
        )?;
    }
    writeln!(stdout, "T_c,T_s,T_p,accuracy,clusters_found,best")?;
    for (i, row) in report.rows.iter().enumerate() {
        writeln!(
            stdout,
            "{},{},{},{},{},{}",
            row.t_c,
            row.t_s,
            row.t_p,
            row.accuracy,
            row.clusters_found,
            if i == report.best { "*" } else { "" }
        )?;
    }
    let best = report.best_row();
    writeln!(
        stdout,
        "best: T_c={} T_s={} T_p={} accuracy={}",
        best.t_c, best.t_s, best.t_p, best.accuracy
    )?;
    if let Some(path) = &args.table {
        let f = File::create(path)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))?;
        report
            .write_csv(BufWriter::new(f))
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(())
}
