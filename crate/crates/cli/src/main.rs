//! `mdiqds`: simulate the three-party network, compute key rates and
//! distil signature parameters.
//!
//! Every run with `--out DIR` writes its fully resolved configuration to
//! `DIR/config.json` (replayable with `--config`) and a `manifest.json`.

mod jobs;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mdiqds::counts::{CountTable, Link};
use mdiqds::keyrate::{rate_sweep, sweep_csv, SweepPoint};
use mdiqds::netsim::{key_outcome, simulate, KeyOutcome, RunConfig};
use mdiqds::qds::{distil, distil_table, extract_blocks, QdsOutcome, QdsReport, UnreadPool};

use jobs::{read_config, read_preset, Kind, QdsJob, Reference, SweepJob};

#[derive(Parser)]
#[command(name = "mdiqds", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the three-party network and analyse every link.
    Simulate(Common),
    /// Key length of a count table (`--counts`), otherwise a rate sweep.
    Keyrate {
        #[command(flatten)]
        common: Common,
        /// Count table, JSON or CSV by extension.
        #[arg(long, value_name = "PATH")]
        counts: Option<PathBuf>,
    },
    /// Signature parameters from block-level figures or a count table.
    Qds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        counts: Option<PathBuf>,
    },
    /// Secure key rate versus distance.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON or TOML config file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in config: published-mdi, published-qkd (qds), hardware (sweep, keyrate),
    /// desk (simulate).
    #[arg(long, value_name = "NAME", conflicts_with = "config")]
    preset: Option<String>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Write outputs to this directory instead of stdout.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl Common {
    fn load<T: serde::de::DeserializeOwned>(&self, kind: Kind) -> Result<Option<T>> {
        match (&self.config, &self.preset) {
            (Some(path), _) => read_config(path).map(Some),
            (None, Some(name)) => read_preset(name, kind).map(Some),
            (None, None) => Ok(None),
        }
    }
}

/// Where results go: files under `--out`, or stdout.
struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Sink {
            dir: dir.map(Path::to_path_buf),
        })
    }

    /// Writes a side file; dropped when printing to stdout.
    fn file(&self, name: &str, contents: &str) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            std::fs::write(&path, contents)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }

    /// The main result: a file under `--out`, otherwise stdout.
    fn primary(&self, name: &str, contents: &str) -> Result<()> {
        if self.dir.is_some() {
            self.file(name, contents)
        } else {
            print!("{contents}");
            Ok(())
        }
    }

    /// Human-readable notes: stdout when results go to files, else stderr.
    fn note(&self, text: &str) {
        if self.dir.is_some() {
            print!("{text}");
        } else {
            eprint!("{text}");
        }
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct CliManifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<&'a Path>,
    config: &'a C,
}

fn write_config<C: Serialize>(
    sink: &Sink,
    command: &'static str,
    counts: Option<&Path>,
    config: &C,
) -> Result<()> {
    sink.file("config.json", &json(config)?)?;
    sink.file(
        "manifest.json",
        &json(&CliManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            counts,
            config,
        })?,
    )
}

fn cmd_simulate(common: &Common) -> Result<()> {
    let mut config: RunConfig = match common.load(Kind::Simulate)? {
        Some(c) => c,
        None => read_preset("desk", Kind::Simulate)?,
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    config.validate().context("invalid run config")?;
    let sim = simulate(&config)?;
    let report = &sim.report;
    let format = common.format.unwrap_or(Format::Json);
    let sink = Sink::new(common.out.as_deref())?;

    sink.file("config.json", &json(&config)?)?;
    sink.file("manifest.json", &json(&report.manifest)?)?;
    sink.file("pools.json", &json(&report.pools)?)?;
    for (link, table) in &report.tables {
        let body = match format {
            Format::Json => json(table)?,
            Format::Csv => table.to_csv()?,
        };
        sink.file(&format!("counts_{link}.{}", format.ext()), &body)?;
    }
    match format {
        Format::Json => sink.primary("report.json", &json(report)?)?,
        Format::Csv => {
            let mut all = String::new();
            for (i, table) in report.tables.values().enumerate() {
                let csv = table.to_csv()?;
                let body = if i == 0 {
                    csv.as_str()
                } else {
                    csv.split_once('\n').map_or("", |(_, rest)| rest)
                };
                all.push_str(body);
            }
            sink.primary("counts.csv", &all)?;
            sink.file("report.json", &json(report)?)?;
        }
    }

    let mut text = String::new();
    for (link, table) in &report.tables {
        let detected: u64 = table.entries().map(|(_, _, r)| r.detected).sum();
        write!(
            text,
            "{link}: {} sent, {detected} detected",
            table.total_sent()
        )?;
        if let Some(k) = report.keys.get(link) {
            match k {
                KeyOutcome::Key(k) => write!(text, ", key {} bits", k.secure_bits)?,
                KeyOutcome::NoKey { .. } => text.push_str(", no key"),
            }
        }
        if let Some(q) = report.qds.get(link) {
            match q.report() {
                Some(r) => write!(text, ", {} signatures", r.n_signatures)?,
                None => text.push_str(", no positive QDS rate"),
            }
        }
        text.push('\n');
    }
    sink.note(&text);
    Ok(())
}

fn sweep_job(common: &Common) -> Result<SweepJob> {
    let mut job: SweepJob = common.load(Kind::Sweep)?.unwrap_or_default();
    if let Some(seed) = common.seed {
        job.settings.seed = seed;
    }
    Ok(job)
}

fn run_sweep(common: &Common, job: &SweepJob, command: &'static str) -> Result<()> {
    let mut points: Vec<SweepPoint> = Vec::new();
    for &mode in &job.modes {
        points.extend(rate_sweep(
            &job.channel,
            &job.intensities,
            &job.distances,
            mode,
            &job.security,
            &job.settings,
        )?);
    }
    let format = common.format.unwrap_or(Format::Csv);
    let sink = Sink::new(common.out.as_deref())?;
    write_config(&sink, command, None, job)?;
    let body = match format {
        Format::Csv => sweep_csv(&points)?,
        Format::Json => json(&points)?,
    };
    sink.primary(&format!("sweep.{}", format.ext()), &body)?;
    let failed = points.iter().filter(|p| p.note.is_some()).count();
    if failed > 0 {
        sink.note(&format!(
            "{failed} of {} points gave no key\n",
            points.len()
        ));
    }
    Ok(())
}

fn read_table(path: &Path) -> Result<CountTable> {
    let table = if path.extension().is_some_and(|e| e == "csv") {
        let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        CountTable::read_csv(f)
    } else {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        CountTable::from_json(&text)
    };
    table.map_err(|e| anyhow!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct KeyReport {
    link: Link,
    mode: mdiqds::counts::Mode,
    elapsed_s: f64,
    outcome: KeyOutcome,
}

fn cmd_keyrate(common: &Common, counts: Option<&Path>) -> Result<()> {
    let job = sweep_job(common)?;
    let Some(path) = counts else {
        return run_sweep(common, &job, "keyrate");
    };
    let table = read_table(path)?;
    let elapsed = match job.elapsed_s {
        Some(t) => t,
        None => table.total_sent() as f64 / job.channel.clock_rate_hz / job.settings.duty,
    };
    let outcome = key_outcome(&table, &job.intensities, &job.security, elapsed)?;
    let report = KeyReport {
        link: table.link,
        mode: table.link.mode(),
        elapsed_s: elapsed,
        outcome,
    };
    let format = common.format.unwrap_or(Format::Csv);
    let sink = Sink::new(common.out.as_deref())?;
    write_config(&sink, "keyrate", Some(path), &job)?;
    let body = match format {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut w = csv_writer();
            w.write_record([
                "link",
                "mode",
                "secure_bits",
                "leak_ec_bits",
                "delta_bits",
                "elapsed_s",
                "rate_bps",
                "note",
            ])?;
            let (bits, leak, delta, rate, note) = match &report.outcome {
                KeyOutcome::Key(k) => (
                    k.secure_bits,
                    k.leak_ec_bits,
                    k.delta_bits,
                    k.rate_bps,
                    String::new(),
                ),
                KeyOutcome::NoKey { reason } => (0, 0, 0, 0.0, reason.clone()),
            };
            w.write_record([
                report.link.to_string(),
                report.mode.to_string(),
                bits.to_string(),
                leak.to_string(),
                delta.to_string(),
                elapsed.to_string(),
                rate.to_string(),
                note,
            ])?;
            String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?
        }
    };
    sink.primary(&format!("key.{}", format.ext()), &body)?;
    if let KeyOutcome::NoKey { reason } = &report.outcome {
        sink.note(&format!("no key: {reason}\n"));
    }
    Ok(())
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

#[derive(Serialize)]
struct QdsRun<'a> {
    link: Link,
    outcome: &'a QdsOutcome,
    /// Blocks actually laid out over the pool by the extraction step.
    #[serde(skip_serializing_if = "Option::is_none")]
    extracted_blocks: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<Reference>,
}

fn summary_row(text: &mut String, name: &str, computed: String, reference: Option<String>) {
    let _ = writeln!(
        text,
        "  {name:<28} {computed:>14}  {}",
        reference
            .map(|r| format!("(reference {r})"))
            .unwrap_or_default()
    );
}

fn qds_summary(link: Link, outcome: &QdsOutcome, reference: Option<&Reference>) -> String {
    let mut text = String::new();
    let r: &QdsReport = match outcome {
        QdsOutcome::Secure(r) => r,
        QdsOutcome::Insecure { reason } => {
            let _ = writeln!(text, "{link}: no positive QDS rate ({reason})");
            return text;
        }
    };
    let _ = writeln!(text, "{link}: secure signatures");
    let reference = reference.copied().unwrap_or_default();
    let prob = |x: f64| format!("{x:.4}");
    summary_row(&mut text, "p_E", prob(r.p_e.get()), reference.p_e.map(prob));
    summary_row(
        &mut text,
        "E_sig upper bound",
        prob(r.e_sig_upper.get()),
        reference.e_sig_upper.map(prob),
    );
    summary_row(
        &mut text,
        "s_a",
        prob(r.s_auth.get()),
        reference.s_auth.map(prob),
    );
    summary_row(
        &mut text,
        "s_v",
        prob(r.s_ver.get()),
        reference.s_ver.map(prob),
    );
    summary_row(
        &mut text,
        "L_sig",
        r.l_sig.to_string(),
        reference.l_sig.map(|l| format!("{l:.0}")),
    );
    summary_row(
        &mut text,
        "signatures",
        r.n_signatures.to_string(),
        reference.n_signatures.map(|n| n.to_string()),
    );
    let secs = |t: f64| {
        if t < 1.0 {
            format!("{:.1} ms", t * 1e3)
        } else {
            format!("{t:.2} s")
        }
    };
    summary_row(
        &mut text,
        "time per signature",
        secs(r.avg_time_per_signature_s),
        reference.avg_time_per_signature_s.map(secs),
    );
    let log10 = |ln: f64| format!("1e{:.0}", ln / std::f64::consts::LN_10);
    summary_row(&mut text, "P_rep", log10(r.ln_p_rep), None);
    summary_row(&mut text, "P_hab", log10(r.ln_p_hab), None);
    summary_row(&mut text, "P_for", log10(r.ln_p_for), None);
    summary_row(
        &mut text,
        "total failure",
        format!("{:.2e}", r.total_failure),
        None,
    );
    text
}

fn cmd_qds(common: &Common, counts: Option<&Path>) -> Result<()> {
    let table = counts.map(read_table).transpose()?;
    let mut job: QdsJob = match (common.load(Kind::Qds)?, &table) {
        (Some(j), _) => j,
        (None, Some(t)) => QdsJob::for_link(t.link),
        (None, None) => bail!("qds needs --preset, --config or --counts"),
    };
    if let Some(seed) = common.seed {
        job.seed = seed;
    }
    let params = job.params();
    let outcome = match &table {
        Some(t) => {
            job.link = t.link;
            let fc = job.from_counts;
            let total = fc.total_time_s.unwrap_or(t.total_sent() as f64 / 1e9);
            distil_table(
                t,
                &job.intensities,
                &params,
                fc.test_fraction,
                fc.c_sig,
                total,
                fc.duty_fraction,
            )?
        }
        None => {
            let inputs = job
                .inputs
                .ok_or_else(|| anyhow!("qds config has neither [inputs] nor --counts"))?;
            distil(&inputs, &params)?
        }
    };
    let extracted_blocks = match outcome.report() {
        Some(r) => {
            let pool = UnreadPool(r.inputs.pool_len);
            let ex = extract_blocks(&pool, job.link, r.params.c_test, r.params.c_sig, job.seed)?;
            Some(ex.n_blocks())
        }
        None => None,
    };
    let run = QdsRun {
        link: job.link,
        outcome: &outcome,
        extracted_blocks,
        reference: job.reference,
    };
    let format = common.format.unwrap_or(Format::Json);
    let sink = Sink::new(common.out.as_deref())?;
    write_config(&sink, "qds", counts, &job)?;
    let summary = qds_summary(job.link, &outcome, job.reference.as_ref());
    sink.file("summary.txt", &summary)?;
    let body = match format {
        Format::Json => json(&run)?,
        Format::Csv => {
            let mut w = csv_writer();
            w.write_record(["quantity", "value"])?;
            match outcome.report() {
                Some(r) => {
                    let rows: [(&str, String); 10] = [
                        ("p_e", r.p_e.get().to_string()),
                        ("e_sig_upper", r.e_sig_upper.get().to_string()),
                        ("s_auth", r.s_auth.get().to_string()),
                        ("s_ver", r.s_ver.get().to_string()),
                        ("l_sig", r.l_sig.to_string()),
                        ("n_signatures", r.n_signatures.to_string()),
                        (
                            "avg_time_per_signature_s",
                            r.avg_time_per_signature_s.to_string(),
                        ),
                        ("ln_p_rep", r.ln_p_rep.to_string()),
                        ("ln_p_hab", r.ln_p_hab.to_string()),
                        ("ln_p_for", r.ln_p_for.to_string()),
                    ];
                    for (k, v) in rows {
                        w.write_record([k, v.as_str()])?;
                    }
                }
                None => w.write_record(["status", "insecure"])?,
            }
            String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?
        }
    };
    sink.primary(&format!("qds.{}", format.ext()), &body)?;
    sink.note(&summary);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Keyrate { common, counts } => cmd_keyrate(common, counts.as_deref()),
        Command::Qds { common, counts } => cmd_qds(common, counts.as_deref()),
        Command::Sweep(c) => {
            let job = sweep_job(c)?;
            run_sweep(c, &job, "sweep")
        }
    }
}
