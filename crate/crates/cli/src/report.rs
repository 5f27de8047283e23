//! JSON reports. Everything except `wall_time` is a function of the flags.

use num_complex::Complex64 as C64;
use serde::Serialize;
use walkport_core::measure::{Mode, OutcomeLabel};
use walkport_core::protocol::{Circuit, ProtocolConfig, RunResult, SecretSpec};
use walkport_core::security::{Party, SweepReport};
use walkport_core::suite::Check;
use walkport_core::walk::StepSpec;

pub const TOOL: &str = "walkport";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Tool {
    pub fn current() -> Self {
        Self {
            name: TOOL,
            version: VERSION,
        }
    }
}

#[derive(Serialize)]
pub struct Secret {
    pub alpha: C64,
    pub beta: C64,
}

impl From<&SecretSpec> for Secret {
    fn from(s: &SecretSpec) -> Self {
        Self {
            alpha: s.alpha(),
            beta: s.beta(),
        }
    }
}

#[derive(Serialize)]
pub struct Step {
    pub active_coin: usize,
    pub shifted_walker: usize,
    pub coin: String,
}

impl From<&StepSpec> for Step {
    fn from(s: &StepSpec) -> Self {
        Self {
            active_coin: s.active_coin,
            shifted_walker: s.shifted_walker,
            coin: s.coin_rule.to_string(),
        }
    }
}

#[derive(Serialize)]
pub struct CircuitDump {
    pub stage_one: Vec<Step>,
    pub stage_two: Vec<Step>,
}

impl From<&Circuit> for CircuitDump {
    fn from(c: &Circuit) -> Self {
        Self {
            stage_one: c.stage_one.iter().map(Step::from).collect(),
            stage_two: c.stage_two.iter().map(Step::from).collect(),
        }
    }
}

#[derive(Serialize)]
pub struct Outcome {
    pub p1: OutcomeLabel,
    pub p: Vec<u8>,
    pub c: Vec<u8>,
}

#[derive(Serialize)]
pub struct OutcomeRow {
    pub outcome: Outcome,
    pub probability: f64,
    pub omega: u8,
    /// One operation per receiver, receiver 1 first.
    pub plan: Vec<String>,
    pub fidelity: f64,
}

#[derive(Serialize)]
pub struct Aggregate {
    pub outcome_count: usize,
    pub min_fidelity: f64,
    pub total_probability: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub tool: Tool,
    pub config: ProtocolConfig,
    pub secret: Secret,
    pub mode: Mode,
    pub seed: u64,
    pub outcomes: Vec<OutcomeRow>,
    pub aggregate: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitDump>,
    pub wall_time: f64,
}

impl RunReport {
    pub fn new(result: &RunResult, mode: Mode, seed: u64, tolerance: f64, circuit: Option<&Circuit>) -> Self {
        let outcomes = result
            .outcomes
            .iter()
            .map(|o| OutcomeRow {
                outcome: Outcome {
                    p1: o.outcome.p1,
                    p: o.outcome.p.clone(),
                    c: o.outcome.c.clone(),
                },
                probability: o.outcome.prob,
                omega: o.plan.omega,
                plan: o.plan.ops.iter().map(ToString::to_string).collect(),
                fidelity: o.fidelity,
            })
            .collect();
        Self {
            command: "run",
            tool: Tool::current(),
            config: result.config.clone(),
            secret: Secret::from(&result.secret),
            mode,
            seed,
            outcomes,
            aggregate: Aggregate {
                outcome_count: result.outcomes.len(),
                min_fidelity: result.min_fidelity,
                total_probability: result.total_probability,
                tolerance,
                pass: result.passed(),
            },
            circuit: circuit.map(CircuitDump::from),
            wall_time: 0.0,
        }
    }
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub tool: Tool,
    pub shapes: Vec<[usize; 2]>,
    pub secrets: usize,
    pub seed: u64,
    pub checks: Vec<CheckRow>,
    pub first_failure: Option<String>,
    pub pass: bool,
    pub wall_time: f64,
}

/// [`Check`] without its timing, which would break determinism.
#[derive(Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub n: usize,
    pub m: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl From<&Check> for CheckRow {
    fn from(c: &Check) -> Self {
        Self {
            name: c.name,
            n: c.n,
            m: c.m,
            worst: c.worst,
            tolerance: c.tolerance,
            passed: c.passed,
        }
    }
}

#[derive(Serialize)]
pub struct ScenarioSelection {
    /// `None` means every nonempty subset of the senders.
    pub measured: Option<Vec<usize>>,
    /// `None` means every strict subset of the remaining parties.
    pub probe: Option<Vec<Party>>,
    pub max_probe_size: Option<usize>,
}

#[derive(Serialize)]
pub struct ScenarioRow {
    pub measured: Vec<usize>,
    pub probe: Vec<Party>,
    pub worst_deviation: f64,
    pub worst_coherence: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct SecurityReport {
    pub command: &'static str,
    pub tool: Tool,
    pub config: ProtocolConfig,
    pub secret: Secret,
    pub scenario: ScenarioSelection,
    pub phases: Vec<f64>,
    pub tolerance: f64,
    pub scenario_count: usize,
    pub failed: usize,
    pub worst_deviation: f64,
    pub worst_coherence: f64,
    pub worst_sector_error: f64,
    pub pass: bool,
    /// Failing scenarios, or every scenario with `--details`.
    pub scenarios: Vec<ScenarioRow>,
    pub wall_time: f64,
}

impl SecurityReport {
    pub fn new(
        sweep: &SweepReport,
        secret: &SecretSpec,
        scenario: ScenarioSelection,
        phases: &[f64],
        tolerance: f64,
        details: bool,
    ) -> Self {
        let scenarios = sweep
            .scenarios
            .iter()
            .filter(|r| details || !r.pass)
            .map(|r| ScenarioRow {
                measured: r.measured.clone(),
                probe: r.probe.clone(),
                worst_deviation: r.worst_deviation,
                worst_coherence: r.worst_coherence,
                pass: r.pass,
            })
            .collect();
        Self {
            command: "security",
            tool: Tool::current(),
            config: sweep.config.clone(),
            secret: Secret::from(secret),
            scenario,
            phases: phases.to_vec(),
            tolerance,
            scenario_count: sweep.scenario_count,
            failed: sweep.failed,
            worst_deviation: sweep.worst_deviation,
            worst_coherence: sweep.worst_coherence,
            worst_sector_error: sweep.worst_sector_error,
            pass: sweep.pass,
            scenarios,
            wall_time: 0.0,
        }
    }
}
