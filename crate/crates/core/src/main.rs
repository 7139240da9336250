use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use blindsim::attack::feasible;
use blindsim::detector::{calibrate_responsivity, DetectorModel, PRESET_NAMES};
use blindsim::harness::{run_session_full, sweep, write_csv, Scenario};

#[derive(Parser)]
#[command(name = "blindsim", version, about = "BB84 detector-blinding attack simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one session from a scenario file and print the report as JSON.
    Run {
        scenario: PathBuf,
        /// Override the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the report JSON here instead of stdout.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write a per-slot event trace as line-delimited JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write the public transcript as line-delimited JSON.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Sweep one scenario parameter over a list of values, writing CSV.
    Sweep {
        scenario: PathBuf,
        /// Dotted path of the field to vary, e.g. attack.cw_power.
        #[arg(long)]
        param: String,
        /// Comma-separated list of values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the attack-feasibility margin report for a detector pair.
    Feasibility {
        /// "clavis2", "qpn5505", or a scenario file.
        target: String,
    },
    /// Print the calibrated linear-mode responsivity of a detector preset.
    Calibrate {
        /// One of the named presets, e.g. clavis2-det0.
        preset: String,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn detector_pair(system: &str) -> blindsim::Result<Vec<DetectorModel>> {
    let names: [&str; 2] = match system {
        "clavis2" => ["clavis2-det0", "clavis2-det1"],
        "qpn5505" => ["qpn5505-det0", "qpn5505-det1"],
        other => return Err(blindsim::Error::UnknownPreset(other.to_string())),
    };
    names.iter().map(|n| DetectorModel::preset(n)).collect()
}

fn run(cli: Cli) -> blindsim::Result<()> {
    match cli.command {
        Command::Run { scenario, seed, report, trace, transcript } => {
            let mut sc = Scenario::from_file(&scenario)?;
            if let Some(seed) = seed {
                sc.seed = seed;
            }
            let out = run_session_full(&sc, trace.is_some())?;
            let json = serde_json::to_string_pretty(&out.report)?;
            match report {
                Some(path) => {
                    File::create(path)?.write_all(json.as_bytes())?;
                }
                None => println!("{json}"),
            }
            if let Some(path) = trace {
                let mut w = BufWriter::new(File::create(path)?);
                for event in &out.trace {
                    serde_json::to_writer(&mut w, event)?;
                    w.write_all(b"\n")?;
                }
            }
            if let Some(path) = transcript {
                out.transcript.write_jsonl(BufWriter::new(File::create(path)?))?;
            }
        }
        Command::Sweep { scenario, param, values, out } => {
            let sc = Scenario::from_file(&scenario)?;
            let rows = sweep(&sc, &param, &values)?;
            write_csv(&rows, BufWriter::new(File::create(out)?))?;
        }
        Command::Feasibility { target } => {
            let detectors = if target.ends_with(".toml") || std::path::Path::new(&target).is_file() {
                let sc = Scenario::from_file(std::path::Path::new(&target))?;
                let (d0, d1) = sc.build_detectors()?;
                vec![d0, d1]
            } else {
                detector_pair(&target)?
            };
            let thresholds: Vec<_> = detectors.iter().map(|d| d.thresholds).collect();
            println!("{}", feasible(&thresholds));
        }
        Command::Calibrate { preset } => {
            let d = DetectorModel::preset(&preset).map_err(|e| {
                eprintln!("available presets: {}", PRESET_NAMES.join(", "));
                e
            })?;
            let r = calibrate_responsivity(d.thresholds.p_blind, &d.elec);
            println!(
                "{preset}: p_blind = {:.1} µW, R_bias = {:.0} Ω, excess bias = {:.2} V, responsivity = {:.3} A/W",
                d.thresholds.p_blind * 1e6,
                d.elec.r_bias,
                d.elec.geiger_excess(),
                r
            );
        }
    }
    Ok(())
}
