//! Named identity checks run by `verify`: simulator against the closed forms
//! and the dense pipeline, the permutation-sum identities, receiver exchange
//! symmetry, the `|−⟩`-parity rewrite, correction and decoding.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::hilbert::{fidelity, StateVector, SystemShape};
use crate::measure::{build_delta, build_lambda_h, build_lambda_p, build_theta, Mode};
use crate::oracle::{self, dense, PlusMinus};
use crate::protocol::{
    circuit, evolve, prepare_shared_secret, reconstruct_all, run_protocol, Layout, ProtocolConfig, SecretSpec, Variant,
};
use crate::walk::apply_steps;

/// Fidelity and amplitude checks.
pub const STATE_TOL: f64 = 1e-10;
/// Exact-rewrite checks.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub n: usize,
    pub m: usize,
    /// Worst error seen (`1 − fidelity`, an amplitude difference, or a count
    /// of mismatched multisets).
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

/// `count` Haar-random secrets from a fixed seed, preceded by `|0⟩` and `|1⟩`.
pub fn seeded_secrets(count: usize, seed: u64) -> Vec<SecretSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = [
        SecretSpec::new(1.0.into(), 0.0.into()),
        SecretSpec::new(0.0.into(), 1.0.into()),
    ];
    basis
        .into_iter()
        .map(|s| s.expect("basis secrets are normalized"))
        .chain((0..count).map(|_| SecretSpec::random(&mut rng)))
        .collect()
}

fn infidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok((1.0 - fidelity(a, b)?).abs())
}

/// `1 − F` between the simulated output and the closed form.
pub fn evolution_error(n: usize, m: usize, variant: Variant, secret: &SecretSpec) -> Result<f64> {
    let cfg = ProtocolConfig::new(n, m, variant)?;
    let sim = evolve(&cfg, &prepare_shared_secret(secret, n, m)?)?;
    let closed = match variant {
        Variant::Homogeneous => oracle::closed_form_h(n, m, secret)?,
        Variant::PositionDependent => oracle::closed_form_p(n, m, secret)?,
    };
    infidelity(&sim, &closed)
}

/// Largest `1 − F` of a corrected output against `α|0…0⟩ + β|1…1⟩`, and the
/// probability defect.
pub fn position_dependent_error(n: usize, m: usize, secret: &SecretSpec) -> Result<(f64, f64)> {
    let cfg = ProtocolConfig::new(n, m, Variant::PositionDependent)?;
    let run = run_protocol(&cfg, secret, Mode::Enumerate, 0)?;
    let ghz = oracle::ghz_state(&cfg.shape()?, secret)?;
    let mut worst: f64 = 0.0;
    for o in &run.outcomes {
        worst = worst.max(infidelity(&o.corrected, &ghz)?);
    }
    Ok((worst, (run.total_probability - 1.0).abs()))
}

/// Largest `1 − F` against the corrected target over every choice of the
/// corrected receiver, and the probability defect.
pub fn homogeneous_error(n: usize, m: usize, rz: bool, secret: &SecretSpec) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for j in 1..=m {
        let cfg = ProtocolConfig::new(n, m, Variant::Homogeneous)?
            .with_corrected_receiver(j)?
            .with_rz_correction(rz)?;
        let run = run_protocol(&cfg, secret, Mode::Enumerate, 0)?;
        worst = worst.max(1.0 - run.min_fidelity);
        defect = defect.max((run.total_probability - 1.0).abs());
    }
    Ok((worst, defect))
}

/// Largest `1 − F` between a decoded qubit and the secret, every outcome,
/// every designated receiver, every helper result.
pub fn reconstruction_error(n: usize, m: usize, variant: Variant, rz: bool, secret: &SecretSpec) -> Result<f64> {
    let cfg = ProtocolConfig::new(n, m, variant)?.with_rz_correction(rz)?;
    let shape = cfg.shape()?;
    let mut worst: f64 = 0.0;
    for o in run_protocol(&cfg, secret, Mode::Enumerate, 0)?.outcomes {
        let layout = Layout::for_outcome(&cfg, &o.outcome);
        for d in 1..=m {
            let want = secret.qubit(&shape, n + d - 1)?;
            for r in reconstruct_all(&o.corrected, &layout, d)? {
                worst = worst.max(infidelity(&want, &r.qubit)?);
            }
        }
    }
    Ok(worst)
}

/// Number of `(m, k)` for which a permutation sum differs from its split by
/// the last qubit.
pub fn perm_sum_split_mismatches(m: usize) -> Result<usize> {
    let mut bad = 0;
    for k in 0..=m {
        let whole = oracle::perm_sum(k, m)?.strings;
        let mut parts = Vec::new();
        if k < m {
            parts.extend(oracle::perm_sum(k, m - 1)?.append(0));
        }
        if k > 0 {
            parts.extend(oracle::perm_sum(k - 1, m - 1)?.append(1));
        }
        let mut a = whole.clone();
        a.sort();
        parts.sort();
        bad += (a != parts) as usize;
    }
    Ok(bad)
}

/// Number of failed multiset equalities among: flat sum vs parity split and
/// flat sum vs regrouped sum.
pub fn regrouping_mismatches(n: usize, m: usize, secret: &SecretSpec) -> Result<usize> {
    let flat = oracle::closed_form_h_terms(n, m, secret)?;
    let (even, odd) = oracle::closed_form_h_parity_split(n, m, secret)?;
    let regrouped = oracle::closed_form_h_reordered_terms(n, m, secret)?;
    let groups = oracle::closed_form_h_groups(n, m, secret)?.concat();
    Ok([
        oracle::same_multiset(&flat, &[even, odd].concat()),
        oracle::same_multiset(&flat, &regrouped),
        oracle::same_multiset(&flat, &groups),
    ]
    .iter()
    .filter(|ok| !**ok)
    .count())
}

/// Largest amplitude change when two receiver coins of a simulated
/// homogeneous residual are exchanged.
pub fn swap_error(n: usize, m: usize, secret: &SecretSpec) -> Result<f64> {
    let cfg = ProtocolConfig::new(n, m, Variant::Homogeneous)?;
    let mut worst: f64 = 0.0;
    for o in run_protocol(&cfg, secret, Mode::Enumerate, 0)?.outcomes {
        for a in n..n + m {
            for b in a + 1..n + m {
                worst = worst.max(o.residual.max_abs_diff(&o.residual.swap_coins(a, b)?)?);
            }
        }
    }
    Ok(worst)
}

/// Largest amplitude difference between the `|−⟩`-parity rewrite and
/// `α|0…0⟩ + β|1…1⟩`.
pub fn minus_parity_error(m: usize, secret: &SecretSpec) -> Result<f64> {
    let shape = SystemShape::new(1, m)?;
    let lhs = oracle::minus_parity_expansion(&shape, secret, PlusMinus::Standard)?;
    lhs.max_abs_diff(&oracle::ghz_state(&shape, secret)?)
}

/// Largest `1 − F` between the sparse and dense pipelines' corrected states,
/// plus the number of outcomes whose probability or `ω` disagree.
pub fn dense_error(n: usize, m: usize, variant: Variant, rz: bool, secret: &SecretSpec) -> Result<(f64, usize)> {
    let cfg = ProtocolConfig::new(n, m, variant)?.with_rz_correction(rz)?;
    let sparse = run_protocol(&cfg, secret, Mode::Enumerate, 0)?.outcomes;
    let brute = dense::run(&cfg, secret)?;
    let mut worst: f64 = 0.0;
    let mut mismatched = sparse.len().abs_diff(brute.len());
    for d in &brute {
        let hit = sparse
            .iter()
            .find(|o| (o.outcome.p1.branch, o.outcome.p1.index) == d.p1 && o.outcome.p == d.p && o.outcome.c == d.c);
        match hit {
            Some(o) => {
                if (o.outcome.prob - d.prob).abs() > STATE_TOL || o.plan.omega != d.omega {
                    mismatched += 1;
                }
                worst = worst.max(infidelity(&o.corrected, &d.corrected)?);
            }
            None => mismatched += 1,
        }
    }
    Ok((worst, mismatched))
}

/// Largest norm change over every stage-one and stage-two step, applied in
/// sequence to the prepared state.
pub fn step_norm_error(n: usize, m: usize, variant: Variant, secret: &SecretSpec) -> Result<f64> {
    let cfg = ProtocolConfig::new(n, m, variant)?;
    let c = circuit(&cfg)?;
    let mut psi = prepare_shared_secret(secret, n, m)?;
    let mut worst: f64 = 0.0;
    for step in c.stage_one.iter().chain(&c.stage_two) {
        let next = apply_steps(&psi, std::slice::from_ref(step))?;
        worst = worst.max((next.norm() - psi.norm()).abs());
        psi = next;
    }
    Ok(worst)
}

/// Largest deviation from unitarity over every measurement basis.
pub fn basis_unitarity_error(m: usize) -> Result<f64> {
    let bases = [build_lambda_h(m)?, build_lambda_p(m)?, build_theta(), build_delta()];
    Ok(bases.iter().map(|b| b.unitarity_error()).fold(0.0, f64::max))
}

fn timed<F>(name: &'static str, n: usize, m: usize, tolerance: f64, f: F) -> Result<Check>
where
    F: FnOnce() -> Result<f64>,
{
    let start = Instant::now();
    let worst = f()?;
    Ok(Check {
        name,
        n,
        m,
        worst,
        tolerance,
        passed: worst <= tolerance,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn fold<T, F>(secrets: &[SecretSpec], f: F) -> Result<f64>
where
    F: Fn(&SecretSpec) -> Result<T>,
    T: Into<f64>,
{
    let mut worst: f64 = 0.0;
    for s in secrets {
        worst = worst.max(f(s)?.into());
    }
    Ok(worst)
}

/// Every check at one shape. The dense comparison is skipped above `m = 4`.
pub fn verify_shape(n: usize, m: usize, secrets: &[SecretSpec]) -> Result<Vec<Check>> {
    ProtocolConfig::new(n, m, Variant::Homogeneous)?;
    let v = Variant::ALL;
    let mut out = vec![
        timed("evolution_homogeneous", n, m, STATE_TOL, || {
            fold(secrets, |s| evolution_error(n, m, v[0], s))
        })?,
        timed("evolution_position_dependent", n, m, STATE_TOL, || {
            fold(secrets, |s| evolution_error(n, m, v[1], s))
        })?,
        timed("step_norms", n, m, IDENTITY_TOL, || {
            fold(secrets, |s| {
                Ok(step_norm_error(n, m, v[0], s)?.max(step_norm_error(n, m, v[1], s)?))
            })
        })?,
        timed("basis_unitarity", n, m, IDENTITY_TOL, || basis_unitarity_error(m))?,
        timed("perm_sum_split", n, m, 0.0, || Ok(perm_sum_split_mismatches(m)? as f64))?,
        timed("regrouping", n, m, 0.0, || {
            fold(secrets, |s| Ok(regrouping_mismatches(n, m, s)? as f64))
        })?,
        timed("minus_parity_rewrite", n, m, IDENTITY_TOL, || {
            fold(secrets, |s| minus_parity_error(m, s))
        })?,
        timed("receiver_exchange", n, m, IDENTITY_TOL, || {
            fold(secrets, |s| swap_error(n, m, s))
        })?,
        timed("correction_position_dependent", n, m, STATE_TOL, || {
            fold(secrets, |s| {
                let (f, p) = position_dependent_error(n, m, s)?;
                Ok(f.max(p))
            })
        })?,
        timed("correction_homogeneous", n, m, STATE_TOL, || {
            fold(secrets, |s| {
                let (f, p) = homogeneous_error(n, m, false, s)?;
                Ok(f.max(p))
            })
        })?,
        timed("correction_homogeneous_rz", n, m, STATE_TOL, || {
            fold(secrets, |s| {
                let (f, p) = homogeneous_error(n, m, true, s)?;
                Ok(f.max(p))
            })
        })?,
        timed("reconstruction", n, m, STATE_TOL, || {
            fold(secrets, |s| {
                Ok(reconstruction_error(n, m, v[0], false, s)?.max(reconstruction_error(n, m, v[1], false, s)?))
            })
        })?,
    ];
    if m <= 4 {
        out.push(timed("dense_oracle", n, m, STATE_TOL, || {
            let s = secrets.last().copied().unwrap_or_else(|| seeded_secrets(1, 0)[2]);
            let mut worst: f64 = 0.0;
            for (variant, rz) in [(v[0], false), (v[0], true), (v[1], false)] {
                let (f, bad) = dense_error(n, m, variant, rz, &s)?;
                worst = worst.max(f).max(bad as f64);
            }
            Ok(worst)
        })?);
    }
    Ok(out)
}

/// [`verify_shape`] over `1..=max_n` × `2..=max_m`.
pub fn verify_all(max_n: usize, max_m: usize, secrets: &[SecretSpec]) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for m in 2..=max_m {
            out.extend(verify_shape(n, m, secrets)?);
        }
    }
    Ok(out)
}

pub fn first_failure(checks: &[Check]) -> Option<&Check> {
    checks.iter().find(|c| !c.passed)
}
