use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use campsim::harness::{
    gen_synthetic, lcp_replay, parse_trace, run_simulation, toggle_rows, trace_stats, write_report_files,
    write_trace, LcpSection, PageCodecKind, SimConfig, SynthKind, SynthParams, ToggleRow, TraceFormat,
};
use campsim::lcp::LcpGeometry;
use campsim::toggles::{EcMetric, EcParams, McLayout};

#[derive(Parser)]
#[command(name = "campsim", version, about = "Compressed cache, memory and link simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct TraceArgs {
    /// Trace file.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value = "text")]
    format: TraceFormat,
    /// Line size of a binary trace.
    #[arg(long, default_value_t = 64)]
    line_size: usize,
}

impl TraceArgs {
    fn load(&self) -> Result<Vec<campsim::harness::TraceRecord>> {
        parse_trace(&self.trace, self.format, self.line_size)
            .with_context(|| format!("reading {}", self.trace.display()))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a trace under a JSON config and print the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        trace: TraceArgs,
        /// Write <name>.json and <name>.csv here instead of printing JSON.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        name: String,
        /// Print CSV instead of JSON.
        #[arg(long)]
        csv: bool,
    },
    /// Generate a synthetic trace.
    Gen {
        #[arg(long)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "text")]
        format: TraceFormat,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON file with generator parameters; flags below override it.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        accesses: Option<usize>,
        #[arg(long)]
        line_size: Option<usize>,
        #[arg(long)]
        footprint: Option<usize>,
        #[arg(long)]
        write_fraction: Option<f64>,
    },
    /// Compressibility and reuse statistics of a trace.
    Stats {
        #[command(flatten)]
        trace: TraceArgs,
    },
    /// Replay a trace against compressed main memory.
    Lcp {
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long, default_value = "bdi")]
        codec: String,
        #[arg(long, default_value_t = 512)]
        md_entries: usize,
        #[arg(long)]
        z_bits: bool,
    },
    /// Per-line energy-control decisions as CSV.
    Toggles {
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long, default_value_t = 32)]
        flit_bytes: usize,
        #[arg(long, default_value = "ed")]
        metric: EcMetric,
        #[arg(long, default_value_t = 0.0)]
        bu: f64,
        #[arg(long, default_value_t = 0.5)]
        bu_threshold: f64,
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        #[arg(long, default_value = "consolidated")]
        layout: String,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    writeln!(io::stdout().lock(), "{text}")?;
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run {
            config,
            trace,
            out_dir,
            name,
            csv,
        } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg = SimConfig::from_json(&text)?;
            let report = run_simulation(&cfg, &trace.load()?)?;
            match out_dir {
                Some(dir) => {
                    let (j, c) = write_report_files(&dir, &name, &report)?;
                    eprintln!("wrote {} and {}", j.display(), c.display());
                }
                None if csv => write!(io::stdout().lock(), "{}", report.to_csv())?,
                None => writeln!(io::stdout().lock(), "{}", report.to_json())?,
            }
        }
        Cmd::Gen {
            kind,
            out,
            format,
            seed,
            params,
            accesses,
            line_size,
            footprint,
            write_fraction,
        } => {
            let mut p = match params {
                Some(path) => serde_json::from_str(&fs::read_to_string(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => SynthParams::default(),
            };
            p.accesses = accesses.unwrap_or(p.accesses);
            p.line_size = line_size.unwrap_or(p.line_size);
            p.footprint_lines = footprint.unwrap_or(p.footprint_lines);
            p.write_fraction = write_fraction.unwrap_or(p.write_fraction);
            let records = gen_synthetic(kind, &p, seed)?;
            write_trace(&out, format, &records).with_context(|| format!("writing {}", out.display()))?;
        }
        Cmd::Stats { trace } => print_json(&trace_stats(&trace.load()?))?,
        Cmd::Lcp {
            trace,
            codec,
            md_entries,
            z_bits,
        } => {
            let codec = match codec.as_str() {
                "bdi" => PageCodecKind::Bdi,
                "trim" => PageCodecKind::Trim,
                other => anyhow::bail!("unknown page codec {other:?} (expected bdi or trim)"),
            };
            let records = trace.load()?;
            let section = LcpSection {
                geometry: LcpGeometry {
                    line_size: records.first().map_or(trace.line_size, |r| r.data.line_size()),
                    z_bits,
                    ..LcpGeometry::default()
                },
                codec,
                md_entries,
            };
            print_json(&lcp_replay(&records, &section)?)?;
        }
        Cmd::Toggles {
            trace,
            flit_bytes,
            metric,
            bu,
            bu_threshold,
            weight,
            layout,
        } => {
            let layout = match layout.as_str() {
                "consolidated" => McLayout::Consolidated,
                "scattered" => McLayout::Scattered,
                other => anyhow::bail!("unknown layout {other:?} (expected consolidated or scattered)"),
            };
            let params = EcParams {
                metric,
                bu_threshold,
                energy_weight: weight,
            };
            let rows = toggle_rows(&trace.load()?, flit_bytes, params, bu, layout)?;
            let mut out = io::BufWriter::new(io::stdout().lock());
            writeln!(out, "{}", ToggleRow::CSV_HEADER)?;
            for r in rows {
                writeln!(out, "{}", r.to_csv())?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe on stdout (e.g. `| head`) is not a failure
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
