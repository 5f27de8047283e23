//! Acceptance criteria. One PASS/FAIL line per criterion.
//!
//! Criterion 8 fails for the homogeneous protocol: some strict sub-parties
//! keep an `αβ*` cross term once other senders have measured. It is listed in
//! `KNOWN_FINDINGS` and the run exits 0 only when the failures are exactly
//! that list, so a new failure or a finding that starts passing both break
//! the build. `WALKPORT_ACCEPTANCE_STRICT=1` turns every FAIL into a nonzero
//! exit.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rayon::prelude::*;
use walkport_core::hilbert::{BasisState, Slot};
use walkport_core::measure::{
    build_delta, build_lambda_h, build_lambda_p, build_theta, measure_sequence, OutcomeLabel,
};
use walkport_core::protocol::{evolve, prepare_shared_secret, sender_bases, ProtocolConfig, SecretSpec, Variant};
use walkport_core::security::{self, SecurityScenario, SECURITY_TOL};
use walkport_core::suite::{self, seeded_secrets, IDENTITY_TOL, STATE_TOL};
use walkport_core::{partial_trace, Result, C64};

const SECRETS: usize = 100;
const SEED: u64 = 2024;
const KNOWN_FINDINGS: [usize; 1] = [8];

/// Largest probability defect seen by any enumerated run.
static PROB_DEFECT: Mutex<f64> = Mutex::new(0.0);

fn note_defect(d: f64) {
    let mut g = PROB_DEFECT.lock().unwrap();
    *g = g.max(d);
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn worst_over<F>(secrets: &[SecretSpec], f: F) -> Result<f64>
where
    F: Fn(&SecretSpec) -> Result<f64> + Sync + Send,
{
    let v: Vec<f64> = secrets.par_iter().map(f).collect::<Result<_>>()?;
    Ok(v.into_iter().fold(0.0, f64::max))
}

fn c1(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for m in 2..=4 {
            for v in Variant::ALL {
                worst = worst.max(worst_over(secrets, |s| suite::evolution_error(n, m, v, s))?);
            }
        }
    }
    outcome(
        worst <= STATE_TOL,
        format!("max 1-F = {worst:.2e} over n 1..3, m 2..4, both variants"),
    )
}

fn c2(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for m in 2..=3 {
            worst = worst.max(worst_over(secrets, |s| {
                let (f, p) = suite::position_dependent_error(n, m, s)?;
                note_defect(p);
                Ok(f)
            })?);
        }
    }
    outcome(worst <= STATE_TOL, format!("max 1-F = {worst:.2e}"))
}

fn c3(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut worst_rz: f64 = 0.0;
    for n in 1..=3 {
        for m in 2..=3 {
            for rz in [false, true] {
                let w = worst_over(secrets, |s| {
                    let (f, p) = suite::homogeneous_error(n, m, rz, s)?;
                    note_defect(p);
                    Ok(f)
                })?;
                if rz {
                    worst_rz = worst_rz.max(w);
                } else {
                    worst = worst.max(w);
                }
            }
        }
    }
    outcome(
        worst <= STATE_TOL && worst_rz <= STATE_TOL,
        format!("max 1-F = {worst:.2e} (flip), {worst_rz:.2e} (rotation), every corrected receiver"),
    )
}

fn c4(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for m in 2..=3 {
            for (v, rz) in [
                (Variant::PositionDependent, false),
                (Variant::Homogeneous, false),
                (Variant::Homogeneous, true),
            ] {
                worst = worst.max(worst_over(secrets, |s| suite::reconstruction_error(n, m, v, rz, s))?);
            }
        }
    }
    outcome(
        worst <= STATE_TOL,
        format!("max 1-F = {worst:.2e}, every designated receiver and helper result"),
    )
}

fn c5(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut bad = 0;
    let mut cases = 0;
    for m in 2..=5 {
        bad += suite::perm_sum_split_mismatches(m)?;
        cases += m + 1;
        for n in 1..=3 {
            for s in &secrets[..4] {
                bad += suite::regrouping_mismatches(n, m, s)?;
                cases += 3;
            }
        }
    }
    outcome(bad == 0, format!("{bad} of {cases} multiset equalities differ"))
}

fn c6(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for n in 1..=2 {
        for m in 2..=4 {
            worst = worst.max(worst_over(&secrets[..10], |s| suite::swap_error(n, m, s))?);
        }
    }
    outcome(
        worst <= IDENTITY_TOL,
        format!("max |Δ| = {worst:.2e} over all receiver pairs, m 2..4"),
    )
}

fn c7(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for m in 2..=5 {
        worst = worst.max(worst_over(secrets, |s| suite::minus_parity_error(m, s))?);
    }
    outcome(worst <= IDENTITY_TOL, format!("max |Δ| = {worst:.2e}, m 2..5"))
}

fn c8(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut pass = true;
    for (n, m) in [(2, 2), (3, 2), (2, 3)] {
        for v in Variant::ALL {
            let cfg = ProtocolConfig::new(n, m, v)?;
            let mut failed = 0;
            let mut total = 0;
            let mut worst_dev: f64 = 0.0;
            let mut worst_sector: f64 = 0.0;
            let mut example = None;
            for s in secrets {
                let rep = security::sweep_all_subsets(&cfg, s, None)?;
                failed += rep.failed;
                total += rep.scenario_count;
                worst_dev = worst_dev.max(rep.worst_deviation);
                worst_sector = worst_sector.max(rep.worst_sector_error);
                if example.is_none() {
                    example = rep.scenarios.iter().find(|r| !r.pass).map(|r| {
                        let probe: Vec<String> = r.probe.iter().map(|p| p.to_string()).collect();
                        format!(" e.g. measured {:?} probe {{{}}}", r.measured, probe.join(","))
                    });
                }
            }
            pass &= failed == 0;
            lines.push(format!(
                "({n},{m}) {v}: {failed}/{total} scenarios not phase blind, worst dev {worst_dev:.2e}, \
                 sector err {worst_sector:.2e}{}",
                example.unwrap_or_default()
            ));
        }
    }

    // measured {s2}, probe {r1,r2}: (I₄ + |01⟩⟨10| + |10⟩⟨01|)/4 for every outcome
    let cfg = ProtocolConfig::new(2, 2, Variant::Homogeneous)?;
    let r = |j| security::Party::Receiver(j);
    let sc = SecurityScenario::new(cfg, secrets[0], &[2], &[r(1), r(2)])?;
    let key = |x: u8| BasisState::new(vec![], vec![x >> 1, x & 1]);
    let mut worst: f64 = 0.0;
    for (_, _, psi) in security::residual_after_partial_measurement(&sc)? {
        let rho = partial_trace(&psi, &[Slot::Coin(2), Slot::Coin(3)])?;
        for a in 0..4u8 {
            for b in 0..4u8 {
                let want = if a == b || (a, b) == (1, 2) || (a, b) == (2, 1) {
                    0.25
                } else {
                    0.0
                };
                worst = worst.max((rho.entry(&key(a), &key(b)) - C64::new(want, 0.0)).norm());
            }
        }
    }
    pass &= worst <= SECURITY_TOL;
    lines.push(format!(
        "(2,2) reduced receiver state vs (I4+|01><10|+|10><01|)/4: max |Δ| = {worst:.2e}"
    ));
    outcome(pass, lines.join("\n      "))
}

/// Outcome labels keyed by the slot they were measured on.
type JointKey = Vec<(Slot, OutcomeLabel)>;

fn c9(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    for v in Variant::ALL {
        let cfg = ProtocolConfig::new(2, 2, v)?;
        let bases = sender_bases(&cfg)?;
        for s in &secrets[..10] {
            let psi = evolve(&cfg, &prepare_shared_secret(s, 2, 2)?)?;
            let mut reference: Option<BTreeMap<JointKey, (f64, _)>> = None;
            for order in (0..bases.len()).permutations(bases.len()) {
                let permuted: Vec<_> = order.iter().map(|&i| bases[i].clone()).collect();
                let dist: BTreeMap<_, _> = measure_sequence(&psi, &permuted)?
                    .into_iter()
                    .map(|b| {
                        let mut key: Vec<(Slot, OutcomeLabel)> =
                            permuted.iter().map(|p| p.slot).zip(b.labels.iter().copied()).collect();
                        key.sort();
                        (key, (b.probability, b.residual))
                    })
                    .collect();
                match &reference {
                    None => reference = Some(dist),
                    Some(r) => {
                        mismatched += r.len().abs_diff(dist.len());
                        for (k, (p, res)) in &dist {
                            match r.get(k) {
                                Some((p0, res0)) => {
                                    worst = worst.max((p - p0).abs()).max(res.max_abs_diff(res0)?);
                                }
                                None => mismatched += 1,
                            }
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst <= STATE_TOL && mismatched == 0,
        format!("24 orders, max |Δ| = {worst:.2e}, {mismatched} unmatched outcomes"),
    )
}

fn c10(secrets: &[SecretSpec]) -> Result<Outcome> {
    let mut step: f64 = 0.0;
    let mut basis: f64 = 0.0;
    for n in 1..=3 {
        for m in 2..=4 {
            for v in Variant::ALL {
                step = step.max(worst_over(&secrets[..10], |s| suite::step_norm_error(n, m, v, s))?);
            }
        }
    }
    for m in 2..=5 {
        basis = basis.max(suite::basis_unitarity_error(m)?);
        for b in [build_lambda_h(m)?, build_lambda_p(m)?] {
            basis = basis.max(b.gram_error());
        }
    }
    basis = basis
        .max(build_theta().unitarity_error())
        .max(build_delta().unitarity_error());
    let defect = *PROB_DEFECT.lock().unwrap();
    outcome(
        step <= IDENTITY_TOL && basis <= IDENTITY_TOL && defect <= STATE_TOL,
        format!("step |Δnorm| {step:.2e}, basis error {basis:.2e}, probability defect {defect:.2e}"),
    )
}

fn main() {
    let secrets = seeded_secrets(SECRETS, SEED);
    let random = &secrets[2..];
    type Criterion<'a> = (&'a str, Duration, Box<dyn Fn() -> Result<Outcome> + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("1 closed forms", Duration::from_secs(10), Box::new(|| c1(&secrets))),
        (
            "2 position-dependent teleportation",
            Duration::from_secs(30),
            Box::new(|| c2(&secrets)),
        ),
        (
            "3 homogeneous teleportation",
            Duration::from_secs(60),
            Box::new(|| c3(&secrets)),
        ),
        ("4 secret recovery", Duration::from_secs(30), Box::new(|| c4(&secrets))),
        (
            "5 permutation-sum identities",
            Duration::from_secs(5),
            Box::new(|| c5(random)),
        ),
        ("6 receiver exchange", Duration::from_secs(5), Box::new(|| c6(random))),
        (
            "7 minus-parity rewrite",
            Duration::from_secs(5),
            Box::new(|| c7(&secrets)),
        ),
        (
            "8 security sweep",
            Duration::from_secs(120),
            Box::new(|| c8(&random[..3])),
        ),
        ("9 measurement order", Duration::from_secs(10), Box::new(|| c9(random))),
        (
            "10 unitarity and completeness",
            Duration::from_secs(10),
            Box::new(|| c10(random)),
        ),
    ];
    let mut failed = Vec::new();
    for (number, (name, budget, run)) in (1..).zip(criteria) {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let slow = elapsed > budget;
        let ok = pass && !slow;
        if !ok {
            failed.push(number);
        }
        println!(
            "{} criterion {name} [{:.2}s / {}s{}]\n      {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if slow { ", over budget" } else { "" },
        );
    }
    println!("{} of 10 criteria passed", 10 - failed.len());
    let strict = std::env::var("WALKPORT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed != KNOWN_FINDINGS {
        println!("failures {failed:?} differ from the known findings {KNOWN_FINDINGS:?}");
        std::process::exit(1);
    }
    println!("failures match the known findings {KNOWN_FINDINGS:?}");
    if strict {
        std::process::exit(1);
    }
}
