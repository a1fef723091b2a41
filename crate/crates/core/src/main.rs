use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use indexmap::IndexMap;

use mycofreq::error::{Error, Result};
use mycofreq::netsim::{simulate, Terminal};
use mycofreq::pipeline::{
    emit_report, ingest_csv_path, run_mixing, run_sweep, write_recording, ExperimentConfig, Format,
    Report,
};
use mycofreq::signal::{
    add_endogenous_noise, synthesize, EndogenousNoiseSpec, WaveformKind, WaveformSpec,
};
use mycofreq::spectral::analyze;

#[derive(Parser)]
#[command(
    name = "mycofreq",
    version,
    about = "Frequency-response and distortion analysis of nonlinear conductive networks"
)]
struct Cli {
    /// Experiment configuration (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "csv")]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a drive waveform as CSV.
    Synth {
        #[arg(long, default_value = "sine")]
        kind: WaveformKind,
        #[arg(long)]
        freq: f64,
        #[arg(long, default_value_t = 10.0)]
        vpp: f64,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
        #[arg(long, default_value_t = 0.0)]
        offset: f64,
        /// RMS of added band-limited background activity.
        #[arg(long, default_value_t = 0.0)]
        noise_rms: f64,
    },
    /// Drive one path of the network with a sine and write the channels.
    Simulate {
        #[arg(long)]
        freq: f64,
        #[arg(long, default_value = "path1")]
        path: String,
        /// Record length in seconds; defaults to the configured periods.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Harmonic analysis of every channel of a recording.
    Analyze {
        input: PathBuf,
        /// Fundamental frequency in Hz.
        #[arg(long)]
        f0: f64,
        #[arg(long)]
        resample: bool,
    },
    /// Fuzzy label of THD values given in percent.
    Classify {
        #[arg(required = true, allow_negative_numbers = true)]
        thd_percent: Vec<f64>,
    },
    /// Dual-path mixing experiment.
    Mix,
    /// Frequency sweep over the configured paths.
    Sweep,
    /// Validate and regularize a logger CSV.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        resample: bool,
    },
}

fn parse_terminal(s: &str) -> Result<Terminal> {
    match s.to_ascii_lowercase().as_str() {
        "path1" | "1" | "input1" => Ok(Terminal::Input1),
        "path2" | "2" | "input2" => Ok(Terminal::Input2),
        other => Err(Error::invalid(format!("unknown path '{other}'"))),
    }
}

fn output(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let mut out = output(cli)?;
    match &cli.command {
        Command::Synth {
            kind,
            freq,
            vpp,
            dt,
            duration,
            phase,
            offset,
            noise_rms,
        } => {
            let spec = WaveformSpec {
                kind: *kind,
                frequency_hz: *freq,
                amplitude_vpp: *vpp,
                phase_rad: *phase,
                dc_offset_v: *offset,
            };
            let mut ts = synthesize(&spec, *dt, *duration)?;
            if *noise_rms > 0.0 {
                let noise = EndogenousNoiseSpec {
                    rms_v: *noise_rms,
                    seed: cfg.seed,
                    ..Default::default()
                };
                ts = add_endogenous_noise(&ts, &noise)?;
            }
            write_recording(&mut out, &IndexMap::from([("v".to_string(), ts)]))?;
        }
        Command::Simulate {
            freq,
            path,
            duration,
        } => {
            let terminal = parse_terminal(path)?;
            let duration = duration.unwrap_or(cfg.periods / freq);
            let drive = synthesize(
                &WaveformSpec::sine(*freq, cfg.drive_vpp_v),
                cfg.sim.dt_s,
                duration,
            )?;
            let channels = simulate(
                &cfg.topology(),
                &BTreeMap::from([(terminal, drive)]),
                &cfg.sim,
            )?;
            let rec = channels
                .into_iter()
                .enumerate()
                .map(|(i, ts)| (format!("ch{i}"), ts))
                .collect();
            write_recording(&mut out, &rec)?;
        }
        Command::Analyze {
            input,
            f0,
            resample,
        } => {
            let rec = ingest_csv_path(input, *resample)?;
            let opts = cfg.analysis.options();
            let reports = rec
                .iter()
                .map(|(name, ts)| {
                    analyze(ts, *f0, &opts)
                        .map(|r| (name.clone(), r))
                        .map_err(|e| e.context(format!("channel '{name}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            emit_report(&Report::Harmonics(&reports), cli.format, &mut out)?;
        }
        Command::Classify { thd_percent } => {
            let results: Vec<_> = thd_percent
                .iter()
                .map(|x| (*x, cfg.fuzzy.classify(*x)))
                .collect();
            match cli.format {
                Format::Json => {
                    let rows: Vec<_> = results
                        .iter()
                        .map(|(x, c)| serde_json::json!({ "thd_percent": x, "classification": c }))
                        .collect();
                    serde_json::to_writer_pretty(&mut out, &rows)?;
                    writeln!(out)?;
                }
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(&mut out);
                    let mut header = vec!["thd_percent".to_string(), "label".into()];
                    header.extend(cfg.fuzzy.labels().map(String::from));
                    w.write_record(&header)?;
                    for (x, c) in &results {
                        let mut row = vec![x.to_string(), c.label.clone()];
                        row.extend(c.memberships.values().map(f64::to_string));
                        w.write_record(&row)?;
                    }
                    w.flush()?;
                }
            }
        }
        Command::Mix => {
            let res = run_mixing(&cfg)?;
            emit_report(&Report::Mixing(&res), cli.format, &mut out)?;
        }
        Command::Sweep => {
            let res = run_sweep(&cfg)?;
            emit_report(&Report::Sweep(&res), cli.format, &mut out)?;
        }
        Command::Ingest { input, resample } => {
            let rec = ingest_csv_path(input, *resample)?;
            write_recording(&mut out, &rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
