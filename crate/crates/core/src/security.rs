//! What a subset of participants can learn about the secret once some of the
//! senders have measured.
//!
//! The residual after a partial measurement is linear in the secret, so it
//! splits as `α|ψ₀⟩ + β|ψ₁⟩`. A probe's reduced state then decomposes into
//! the two sector blocks (weights `|α|²‖ψ₀‖²` and `|β|²‖ψ₁‖²`) plus a cross
//! term proportional to `αβ*`. Only the cross term sees the relative phase,
//! so a probe is phase blind exactly when its cross term vanishes.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{partial_trace, DensityMatrix, Slot, StateVector};
use crate::measure::{MeasurementBasis, OutcomeLabel, PROB_TOL};
use crate::protocol::{evolve, prepare_shared_secret, sender_bases, ProtocolConfig, SecretSpec};

/// Entrywise tolerance for phase blindness and sector weights.
pub const SECURITY_TOL: f64 = 1e-10;

pub const DEFAULT_PHASES: [f64; 5] = [0.0, FRAC_PI_4, FRAC_PI_2, PI, 2.1];

/// A participant. Both indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Sender(usize),
    Receiver(usize),
}

impl Party {
    /// Registers held: a sender owns its walker's position and first coin,
    /// a receiver one coin of walker 0.
    pub fn slots(self, n: usize) -> Vec<Slot> {
        match self {
            Party::Sender(i) => vec![Slot::Position(i - 1), Slot::Coin(i - 1)],
            Party::Receiver(j) => vec![Slot::Coin(n + j - 1)],
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Sender(i) => write!(f, "s{i}"),
            Party::Receiver(j) => write!(f, "r{j}"),
        }
    }
}

impl FromStr for Party {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("party `{s}`: expected s<i> or r<j>"));
        let (kind, idx) = s.split_at_checked(1).ok_or_else(bad)?;
        let idx: usize = idx.parse().map_err(|_| bad())?;
        if idx == 0 {
            return Err(bad());
        }
        match kind {
            "s" | "S" => Ok(Party::Sender(idx)),
            "r" | "R" => Ok(Party::Receiver(idx)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Party {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Party {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Every participant, senders first.
pub fn all_parties(n: usize, m: usize) -> Vec<Party> {
    (1..=n).map(Party::Sender).chain((1..=m).map(Party::Receiver)).collect()
}

#[derive(Clone, Debug)]
pub struct SecurityScenario {
    config: ProtocolConfig,
    secret: SecretSpec,
    measured: BTreeSet<usize>,
    probe: Vec<Party>,
}

impl SecurityScenario {
    /// `measured` are 1-based sender indices. The probe must be a nonempty
    /// strict subset of the participants who have not measured: the whole
    /// remaining group holds a pure state that still carries the secret.
    pub fn new(config: ProtocolConfig, secret: SecretSpec, measured: &[usize], probe: &[Party]) -> Result<Self> {
        config.validate()?;
        let (n, m) = (config.n, config.m);
        let measured: BTreeSet<usize> = measured.iter().copied().collect();
        if let Some(&i) = measured.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::InvalidScenario(format!("measured sender s{i} outside 1..={n}")));
        }
        let mut probe = probe.to_vec();
        probe.sort();
        probe.dedup();
        let remaining = remaining_parties(n, m, &measured);
        if probe.is_empty() {
            return Err(Error::InvalidScenario("probe subset is empty".into()));
        }
        if let Some(p) = probe.iter().find(|p| !remaining.contains(p)) {
            return Err(Error::InvalidScenario(format!(
                "{p} is not among the remaining participants"
            )));
        }
        if probe.len() == remaining.len() {
            return Err(Error::InvalidScenario(format!(
                "probe covers all {} remaining participants; their joint state is pure and still \
                 carries the secret, so only strict subsets are meaningful",
                remaining.len()
            )));
        }
        Ok(Self {
            config,
            secret,
            measured,
            probe,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn secret(&self) -> &SecretSpec {
        &self.secret
    }

    pub fn measured(&self) -> Vec<usize> {
        self.measured.iter().copied().collect()
    }

    pub fn probe(&self) -> &[Party] {
        &self.probe
    }

    pub fn remaining(&self) -> Vec<Party> {
        remaining_parties(self.config.n, self.config.m, &self.measured)
    }

    fn probe_slots(&self) -> Vec<Slot> {
        self.probe.iter().flat_map(|p| p.slots(self.config.n)).collect()
    }
}

impl fmt::Display for SecurityScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        write!(
            f,
            "({},{}) {} measured={{{}}} probe={{{}}}",
            self.config.n,
            self.config.m,
            self.config.variant,
            join(self.measured.iter().map(|i| format!("s{i}")).collect()),
            join(self.probe.iter().map(|p| p.to_string()).collect()),
        )
    }
}

fn remaining_parties(n: usize, m: usize, measured: &BTreeSet<usize>) -> Vec<Party> {
    all_parties(n, m)
        .into_iter()
        .filter(|p| !matches!(p, Party::Sender(i) if measured.contains(i)))
        .collect()
}

/// Bases of the measured senders in protocol order.
fn measured_bases(config: &ProtocolConfig, measured: &BTreeSet<usize>) -> Result<Vec<MeasurementBasis>> {
    let all = sender_bases(config)?;
    Ok(measured
        .iter()
        .flat_map(|&i| all[2 * (i - 1)..2 * i].to_vec())
        .collect())
}

fn project(psi: &StateVector, basis: &MeasurementBasis, k: usize) -> Result<StateVector> {
    let v = &basis.vectors[k];
    psi.contract_slot(basis.slot, |x| {
        v.iter()
            .find(|(y, _)| *y == x)
            .map(|(_, a)| a.conj())
            .unwrap_or_default()
    })
}

/// One outcome of a partial measurement, kept split by secret branch.
#[derive(Clone, Debug)]
pub struct PartialOutcome {
    pub labels: Vec<OutcomeLabel>,
    pub probability: f64,
    /// Unnormalized `|ψ₀⟩` and `|ψ₁⟩` (from `|0…0⟩` and `|1…1⟩`).
    pub branches: [StateVector; 2],
}

impl PartialOutcome {
    /// `α|ψ₀⟩ + e^{iφ}β|ψ₁⟩`, unnormalized.
    pub fn combined(&self, secret: &SecretSpec, phi: f64) -> Result<StateVector> {
        self.branches[0]
            .scale(secret.alpha())
            .add(&self.branches[1].scale(secret.beta() * C64::from_polar(1.0, phi)))
    }

    /// Normalized conditional state.
    pub fn state(&self, secret: &SecretSpec) -> Result<StateVector> {
        self.combined(secret, 0.0)?.normalize()
    }
}

fn split_outcomes(
    config: &ProtocolConfig,
    measured: &BTreeSet<usize>,
    secret: &SecretSpec,
) -> Result<Vec<PartialOutcome>> {
    let (n, m) = (config.n, config.m);
    let zero = SecretSpec::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))?;
    let one = SecretSpec::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))?;
    let psi0 = evolve(config, &prepare_shared_secret(&zero, n, m)?)?;
    let psi1 = evolve(config, &prepare_shared_secret(&one, n, m)?)?;
    let bases = measured_bases(config, measured)?;

    let mut frontier = vec![(Vec::new(), [psi0, psi1])];
    for basis in &bases {
        let mut next = Vec::new();
        for (labels, [a, b]) in frontier {
            for (k, &label) in basis.labels.iter().enumerate() {
                let pa = project(&a, basis, k)?;
                let pb = project(&b, basis, k)?;
                if pa.norm_sqr() + pb.norm_sqr() < PROB_TOL {
                    continue;
                }
                let mut l: Vec<OutcomeLabel> = labels.clone();
                l.push(label);
                next.push((l, [pa, pb]));
            }
        }
        frontier = next;
    }
    let mut out = Vec::new();
    for (labels, branches) in frontier {
        let o = PartialOutcome {
            labels,
            probability: 0.0,
            branches,
        };
        let probability = o.combined(secret, 0.0)?.norm_sqr();
        if probability >= PROB_TOL {
            out.push(PartialOutcome { probability, ..o });
        }
    }
    Ok(out)
}

/// Every outcome of the measured senders' own bases, with the conditional
/// state of the remaining registers. With nobody measured this is the
/// evolved state itself.
pub fn residual_after_partial_measurement(
    scenario: &SecurityScenario,
) -> Result<Vec<(Vec<OutcomeLabel>, f64, StateVector)>> {
    split_outcomes(&scenario.config, &scenario.measured, &scenario.secret)?
        .into_iter()
        .map(|o| Ok((o.labels.clone(), o.probability, o.state(&scenario.secret)?)))
        .collect()
}

fn reduced(o: &PartialOutcome, secret: &SecretSpec, phi: f64, keep: &[Slot]) -> Result<(DensityMatrix, f64)> {
    let psi = o.combined(secret, phi)?;
    let w = psi.norm_sqr();
    Ok((partial_trace(&psi, keep)?, w))
}

/// Findings for one outcome.
#[derive(Clone, Debug, Serialize)]
pub struct OutcomeCheck {
    pub labels: Vec<OutcomeLabel>,
    pub probability: f64,
    /// Largest entrywise change of the probe state over the phase set.
    pub deviation: f64,
    /// Largest entry of the `αβ*` cross term in the probe state.
    pub coherence: f64,
    /// Weights of the `α` and `β` sectors.
    pub sector_weights: [f64; 2],
    pub sector_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub measured: Vec<usize>,
    pub probe: Vec<Party>,
    pub outcomes: Vec<OutcomeCheck>,
    pub worst_deviation: f64,
    pub worst_coherence: f64,
    pub worst_sector_error: f64,
    pub pass: bool,
}

impl ScenarioReport {
    /// Summary without the per-outcome list.
    pub fn brief(&self) -> Self {
        Self {
            outcomes: Vec::new(),
            ..self.clone()
        }
    }
}

fn check_outcome(o: &PartialOutcome, secret: &SecretSpec, keep: &[Slot], phases: &[f64]) -> Result<OutcomeCheck> {
    let (base, norm0) = reduced(o, secret, 0.0, keep)?;
    let mut deviation: f64 = 0.0;
    for &phi in phases {
        let (rho, _) = reduced(o, secret, phi, keep)?;
        deviation = deviation.max(rho.max_abs_diff(&base)?);
    }

    // ρ̃(φ) = A + e^{-iφ}B + e^{iφ}B†, so B = [ρ̃(0) − ρ̃(π) + i(ρ̃(π/2) − ρ̃(3π/2))] / 4
    let quarter: Vec<(DensityMatrix, f64)> = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]
        .iter()
        .map(|&phi| reduced(o, secret, phi, keep))
        .collect::<Result<_>>()?;
    let labels: BTreeSet<_> = quarter.iter().flat_map(|(r, _)| r.labels().to_vec()).collect();
    let entry = |k: usize, r, c| quarter[k].0.entry(r, c) * quarter[k].1;
    let mut coherence: f64 = 0.0;
    for r in &labels {
        for c in &labels {
            let b = (entry(0, r, c) - entry(2, r, c) + C64::i() * (entry(1, r, c) - entry(3, r, c))) / (4.0 * norm0);
            coherence = coherence.max(b.norm());
        }
    }

    let w0 = secret.alpha().norm_sqr() * o.branches[0].norm_sqr() / norm0;
    let w1 = secret.beta().norm_sqr() * o.branches[1].norm_sqr() / norm0;
    let sector_error = (w0 - secret.alpha().norm_sqr())
        .abs()
        .max((w1 - secret.beta().norm_sqr()).abs());
    Ok(OutcomeCheck {
        labels: o.labels.clone(),
        probability: o.probability,
        deviation,
        coherence,
        sector_weights: [w0, w1],
        sector_error,
    })
}

/// Phase blindness, cross-term size and sector weights of the probe's
/// reduced state, for every outcome of the measured senders.
pub fn phase_blindness_check(scenario: &SecurityScenario, phases: &[f64]) -> Result<ScenarioReport> {
    let keep = scenario.probe_slots();
    let outcomes: Vec<OutcomeCheck> = split_outcomes(&scenario.config, &scenario.measured, &scenario.secret)?
        .iter()
        .map(|o| check_outcome(o, &scenario.secret, &keep, phases))
        .collect::<Result<_>>()?;
    let worst = |f: fn(&OutcomeCheck) -> f64| outcomes.iter().map(f).fold(0.0, f64::max);
    let worst_deviation = worst(|o| o.deviation);
    let worst_coherence = worst(|o| o.coherence);
    let worst_sector_error = worst(|o| o.sector_error);
    Ok(ScenarioReport {
        measured: scenario.measured(),
        probe: scenario.probe.clone(),
        pass: worst_deviation <= SECURITY_TOL && worst_sector_error <= SECURITY_TOL,
        outcomes,
        worst_deviation,
        worst_coherence,
        worst_sector_error,
    })
}

/// Nonempty subsets of `items`, smallest first.
fn subsets<T: Clone>(items: &[T], max_size: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = (1..1usize << items.len())
        .map(|mask| {
            (0..items.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| items[i].clone())
                .collect::<Vec<T>>()
        })
        .filter(|s| s.len() <= max_size)
        .collect();
    out.sort_by_key(|s| s.len());
    out
}

/// Every valid scenario with the given measured sets (all nonempty subsets
/// of the senders when `None`) and every strict probe subset up to
/// `max_probe_size` parties.
pub fn enumerate_scenarios(
    config: &ProtocolConfig,
    secret: &SecretSpec,
    measured: Option<Vec<Vec<usize>>>,
    max_probe_size: Option<usize>,
) -> Result<Vec<SecurityScenario>> {
    config.validate()?;
    let senders: Vec<usize> = (1..=config.n).collect();
    let measured = measured.unwrap_or_else(|| subsets(&senders, config.n));
    let mut out = Vec::new();
    for set in measured {
        let remaining = remaining_parties(config.n, config.m, &set.iter().copied().collect());
        let cap = max_probe_size.unwrap_or(usize::MAX).min(remaining.len() - 1);
        for probe in subsets(&remaining, cap) {
            out.push(SecurityScenario::new(config.clone(), *secret, &set, &probe)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub config: ProtocolConfig,
    pub scenario_count: usize,
    pub failed: usize,
    pub worst_deviation: f64,
    pub worst_coherence: f64,
    pub worst_sector_error: f64,
    /// Per scenario, without per-outcome detail.
    pub scenarios: Vec<ScenarioReport>,
    pub pass: bool,
}

pub fn run_scenarios(config: &ProtocolConfig, scenarios: &[SecurityScenario], phases: &[f64]) -> Result<SweepReport> {
    let reports: Vec<ScenarioReport> = scenarios
        .par_iter()
        .map(|s| phase_blindness_check(s, phases).map(|r| r.brief()))
        .collect::<Result<_>>()?;
    let worst = |f: fn(&ScenarioReport) -> f64| reports.iter().map(f).fold(0.0, f64::max);
    let failed = reports.iter().filter(|r| !r.pass).count();
    Ok(SweepReport {
        config: config.clone(),
        scenario_count: reports.len(),
        failed,
        worst_deviation: worst(|r| r.worst_deviation),
        worst_coherence: worst(|r| r.worst_coherence),
        worst_sector_error: worst(|r| r.worst_sector_error),
        pass: failed == 0,
        scenarios: reports,
    })
}

/// All nonempty measured-sender subsets, all strict probe subsets up to
/// `max_subset_size` parties.
pub fn sweep_all_subsets(
    config: &ProtocolConfig,
    secret: &SecretSpec,
    max_subset_size: Option<usize>,
) -> Result<SweepReport> {
    let scenarios = enumerate_scenarios(config, secret, None, max_subset_size)?;
    run_scenarios(config, &scenarios, &DEFAULT_PHASES)
}
