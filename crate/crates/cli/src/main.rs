use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crossing_core::checker::{
    check, check_all, check_run_validity, tightness_witness, PropertyGroup, Verdict,
};
use crossing_core::crossing::{Params, Regime};
use crossing_core::fuzz::{generate_case, FuzzConfig};
use crossing_core::scenario::{load_scenario, Scenario};
use crossing_core::trace::{emit_trace, parse_trace};
use crossing_core::value::{format_rational, parse_rational, Rational};

const VIOLATION: u8 = 1;
const INPUT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "crossing",
    version,
    about = "Build and check railroad crossing runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the run of a scenario and write its trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Trace destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the run of a scenario and check it.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "all")]
        properties: Vec<Property>,
        /// Also write the trace, with verdicts, here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Generate seeded scenarios and check every property on each.
    Fuzz {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: u64,
        /// Largest number of tracks per case.
        #[arg(long, default_value_t = 4)]
        tracks: usize,
        #[arg(long, default_value = "120", value_parser = rational)]
        horizon: Rational,
    },
    /// Build a run showing a liveness constant cannot be lowered to C.
    Tightness {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        part: u8,
        #[arg(long, value_parser = rational)]
        c: Rational,
        /// dclose,dopen,dmin,dmax
        #[arg(long, default_value = "1,2,4,6")]
        params: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a run from a trace and check it.
    VerifyTrace {
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Safety,
    Liveness,
    Lemmas,
    Regular,
    All,
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// An input problem; reported on stderr with exit code 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn read(path: &Path) -> Result<Vec<u8>, InputError> {
    fs::read(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), InputError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| InputError(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn scenario(path: &Path) -> Result<Scenario, InputError> {
    load_scenario(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn groups(props: &[Property]) -> Vec<PropertyGroup> {
    let mut out = Vec::new();
    for p in props {
        match p {
            Property::All => out.extend(PropertyGroup::ALL),
            Property::Safety => out.push(PropertyGroup::Safety),
            Property::Liveness => out.push(PropertyGroup::Liveness),
            Property::Lemmas => out.push(PropertyGroup::Lemmas),
            Property::Regular => out.push(PropertyGroup::Regular),
        }
    }
    out
}

fn report(verdicts: &[Verdict]) -> u8 {
    for v in verdicts {
        println!("{v}");
    }
    if verdicts.iter().any(Verdict::failed) {
        VIOLATION
    } else {
        0
    }
}

fn params_arg(text: &str) -> Result<Params, InputError> {
    let parts: Vec<Rational> = text
        .split(',')
        .map(|s| parse_rational(s.trim()))
        .collect::<Result<_, _>>()?;
    let [dclose, dopen, dmin, dmax]: [Rational; 4] = parts
        .try_into()
        .map_err(|_| InputError("--params needs dclose,dopen,dmin,dmax".into()))?;
    Ok(Params::new(dclose, dopen, dmin, dmax)?)
}

fn fuzz(seed: u64, count: u64, config: &FuzzConfig) -> Result<u8, InputError> {
    let wide = AtomicU64::new(0);
    let failure = (0..count).into_par_iter().find_map_first(|i| {
        let case = generate_case(seed, i, config);
        if case.params.regime() == Regime::Wide {
            wide.fetch_add(1, Ordering::Relaxed);
        }
        let outcome = case
            .build()
            .map_err(|e| e.to_string())
            .and_then(|(run, _)| check_all(&run).map_err(|e| e.to_string()));
        match outcome {
            Ok(vs) if !vs.iter().any(Verdict::failed) => None,
            Ok(vs) => Some((
                i,
                case,
                vs.into_iter().filter(Verdict::failed).collect(),
                None,
            )),
            Err(e) => Some((i, case, Vec::new(), Some(e))),
        }
    });
    if let Some((i, case, verdicts, error)) = failure {
        println!("case {i} of seed {seed} fails:");
        println!("{}", case.to_json());
        if let Some(e) = error {
            println!("error: {e}");
        }
        report(&verdicts);
        return Ok(VIOLATION);
    }
    let wide = wide.into_inner();
    println!(
        "{count} cases passed ({wide} with WaitTime >= dopen, {} below)",
        count - wide
    );
    Ok(0)
}

fn tightness(part: u8, c: &Rational, params: &str, out: Option<&Path>) -> Result<u8, InputError> {
    let w = tightness_witness(part, &params_arg(params)?, c)?;
    println!(
        "part {part}: params {}, c = {}, delay = {}, time scale {}",
        w.params,
        format_rational(&w.c),
        format_rational(&w.delta),
        format_rational(&w.scale)
    );
    let verdicts = [w.safety.clone(), w.liveness.clone(), w.strengthened.clone()];
    report(&verdicts);
    if let Some(p) = out {
        write_or_print(Some(p), &emit_trace(&w.run, Some(&verdicts)))?;
    }
    let as_claimed = !w.safety.failed() && !w.liveness.failed() && w.strengthened.failed();
    Ok(if as_claimed { 0 } else { VIOLATION })
}

fn run(cli: Cli) -> Result<u8, InputError> {
    match cli.command {
        Command::Simulate {
            scenario: path,
            out,
        } => {
            let (run, _) = scenario(&path)?.build()?;
            write_or_print(out.as_deref(), &emit_trace(&run, None))?;
            Ok(0)
        }
        Command::Check {
            scenario: path,
            properties,
            trace,
        } => {
            let (run, _) = scenario(&path)?.build()?;
            let verdicts = check(&run, &groups(&properties))?;
            if let Some(p) = trace {
                write_or_print(Some(&p), &emit_trace(&run, Some(&verdicts)))?;
            }
            Ok(report(&verdicts))
        }
        Command::Fuzz {
            seed,
            count,
            tracks,
            horizon,
        } => {
            if tracks == 0 {
                return Err(InputError("--tracks must be at least 1".into()));
            }
            let config = FuzzConfig {
                max_tracks: tracks,
                horizon,
                ..FuzzConfig::default()
            };
            fuzz(seed, count, &config)
        }
        Command::Tightness {
            part,
            c,
            params,
            out,
        } => tightness(part, &c, &params, out.as_deref()),
        Command::VerifyTrace { trace } => {
            let text = String::from_utf8(read(&trace)?)?;
            let run =
                parse_trace(&text).map_err(|e| InputError(format!("{}: {e}", trace.display())))?;
            let validity = check_run_validity(&run);
            if validity.failed() {
                return Ok(report(&[validity]));
            }
            match check_all(&run) {
                Ok(verdicts) => Ok(report(&verdicts)),
                Err(e) => {
                    println!("{e}");
                    Ok(VIOLATION)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
