mod args;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use walkport_core::measure::Mode;
use walkport_core::protocol::{self, ProtocolConfig, SecretSpec, FIDELITY_TOL};
use walkport_core::security::{self, Party, SecurityScenario, DEFAULT_PHASES, SECURITY_TOL};
use walkport_core::suite;
use walkport_core::Error;

use args::{Cli, Command, RunArgs, SecretArgs, SecurityArgs, VerifyArgs};
use report::{CheckRow, RunReport, ScenarioSelection, SecurityReport, VerifyReport};

const ALL_REMAINING: &str = "ALL_REMAINING";

enum Failure {
    /// Bad flags or a configuration the model does not admit: exit 2.
    Usage(String),
    /// A check ran and did not hold, or the simulator itself failed: exit 1.
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidScenario(_)
            | Error::UnnormalizedSecret(_)
            | Error::InvalidShape(_)
            | Error::Parse(_) => Failure::Usage(e.to_string()),
            other => Failure::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Failed(format!("writing report: {e}"))
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Security(a) => security(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("WALKPORT_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("WALKPORT_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn secret_from(a: &SecretArgs) -> Result<SecretSpec, Failure> {
    let s = if a.normalize {
        SecretSpec::normalized(a.alpha, a.beta)
    } else {
        SecretSpec::new(a.alpha, a.beta)
    };
    s.map_err(|e| match e {
        Error::UnnormalizedSecret(_) => Failure::Usage(format!("{e} (pass --normalize to rescale)")),
        other => other.into(),
    })
}

fn emit<T: Serialize>(report: &T, out: Option<&std::path::Path>) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(report).map_err(|e| Failure::Failed(e.to_string()))?;
    match out {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{json}")?;
        }
    }
    Ok(())
}

fn run(a: RunArgs) -> Outcome {
    let start = Instant::now();
    let mut config = ProtocolConfig::new(a.n, a.m, a.variant.into())?.with_rz_correction(a.rz_correction)?;
    if let Some(j) = a.corrected_receiver {
        config = config.with_corrected_receiver(j)?;
    }
    let secret = secret_from(&a.secret)?;
    let mode: Mode = a.mode.into();
    let result = protocol::run_protocol(&config, &secret, mode, a.seed)?;
    let circuit = if a.dump_circuit {
        Some(protocol::circuit(&config)?)
    } else {
        None
    };
    let mut report = RunReport::new(&result, mode, a.seed, FIDELITY_TOL, circuit.as_ref());
    report.wall_time = start.elapsed().as_secs_f64();
    emit(&report, a.out.as_deref())?;
    eprintln!(
        "{} n={} m={} {}: {} outcomes, min fidelity {:.15}, total probability {:.15}",
        if report.aggregate.pass { "PASS" } else { "FAIL" },
        config.n,
        config.m,
        config.variant,
        report.aggregate.outcome_count,
        report.aggregate.min_fidelity,
        report.aggregate.total_probability,
    );
    Ok(report.aggregate.pass)
}

fn verify(a: VerifyArgs) -> Outcome {
    let start = Instant::now();
    let shapes: Vec<[usize; 2]> = if a.all {
        (1..=3).flat_map(|n| (2..=4).map(move |m| [n, m])).collect()
    } else {
        // clap guarantees both are present without --all
        let (n, m) = (a.n.unwrap_or_default(), a.m.unwrap_or_default());
        ProtocolConfig::new(n, m, protocol::Variant::Homogeneous)?;
        vec![[n, m]]
    };
    let secrets = suite::seeded_secrets(a.secrets, a.seed);
    let mut checks = Vec::new();
    for &[n, m] in &shapes {
        checks.extend(suite::verify_shape(n, m, &secrets)?);
    }
    let failure = suite::first_failure(&checks).map(|c| format!("{} (n={}, m={})", c.name, c.n, c.m));
    let report = VerifyReport {
        command: "verify",
        tool: report::Tool::current(),
        shapes,
        secrets: secrets.len(),
        seed: a.seed,
        checks: checks.iter().map(CheckRow::from).collect(),
        pass: failure.is_none(),
        first_failure: failure,
        wall_time: start.elapsed().as_secs_f64(),
    };
    emit(&report, a.out.as_deref())?;
    match &report.first_failure {
        None => eprintln!(
            "PASS {} checks over {} shapes",
            report.checks.len(),
            report.shapes.len()
        ),
        Some(name) => {
            let c = suite::first_failure(&checks).expect("failure recorded");
            eprintln!("FAIL {name}: worst {:e} against tolerance {:e}", c.worst, c.tolerance);
        }
    }
    Ok(report.pass)
}

fn parse_probe(raw: &[String]) -> Result<Vec<Party>, Failure> {
    if raw.iter().any(|p| p == ALL_REMAINING) {
        return Err(Failure::Usage(
            "--probe ALL_REMAINING is not a valid scenario: the parties who have not measured \
             jointly hold a pure state that still carries the secret, so the probe must be a \
             strict subset of them"
                .into(),
        ));
    }
    raw.iter()
        .map(|p| {
            p.parse::<Party>()
                .map_err(|e| Failure::Usage(format!("--probe {p:?}: {e}")))
        })
        .collect()
}

fn sender_subsets(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1..1u32 << n)
        .map(|mask| (1..=n).filter(|i| mask >> (i - 1) & 1 == 1).collect())
        .collect();
    out.sort_by_key(Vec::len);
    out
}

fn security(a: SecurityArgs) -> Outcome {
    let start = Instant::now();
    let config = ProtocolConfig::new(a.n, a.m, a.variant.into())?;
    let secret = secret_from(&a.secret)?;
    let probe = a.probe.as_deref().map(parse_probe).transpose()?;
    let scenarios: Vec<SecurityScenario> = match (&a.measured, &probe) {
        (Some(set), Some(p)) => vec![SecurityScenario::new(config.clone(), secret, set, p)?],
        (None, Some(p)) => {
            let found: Vec<_> = sender_subsets(config.n)
                .into_iter()
                .filter_map(|set| SecurityScenario::new(config.clone(), secret, &set, p).ok())
                .collect();
            if found.is_empty() {
                return Err(Failure::Usage(format!(
                    "no measured sender set leaves the probe {} as a strict subset of the remaining parties",
                    p.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
                )));
            }
            found
        }
        (measured, None) => {
            security::enumerate_scenarios(&config, &secret, measured.clone().map(|s| vec![s]), a.max_probe_size)?
        }
    };
    if scenarios.is_empty() {
        return Err(Failure::Usage("the selection contains no scenarios".into()));
    }
    let sweep = security::run_scenarios(&config, &scenarios, &DEFAULT_PHASES)?;
    let selection = ScenarioSelection {
        measured: a.measured.clone(),
        probe,
        max_probe_size: a.max_probe_size,
    };
    let mut report = SecurityReport::new(&sweep, &secret, selection, &DEFAULT_PHASES, SECURITY_TOL, a.details);
    report.wall_time = start.elapsed().as_secs_f64();
    emit(&report, a.out.as_deref())?;
    eprintln!(
        "{} n={} m={} {}: {} of {} scenarios leak the phase, worst deviation {:.3e}",
        if report.pass { "PASS" } else { "FAIL" },
        config.n,
        config.m,
        config.variant,
        report.failed,
        report.scenario_count,
        report.worst_deviation,
    );
    for row in report.scenarios.iter().filter(|r| !r.pass).take(5) {
        let probe: Vec<String> = row.probe.iter().map(ToString::to_string).collect();
        eprintln!(
            "  measured {:?} probe {}: deviation {:.3e}",
            row.measured,
            probe.join(","),
            row.worst_deviation
        );
    }
    Ok(report.pass)
}
