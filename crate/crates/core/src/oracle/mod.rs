//! Closed-form constructors for the evolved and measured states, built
//! directly from their formulas and never from the simulator, plus a dense
//! brute-force pipeline in [`dense`].
//!
//! The printed per-outcome receiver forms are kept alongside the derived ones
//! in [`printed`]; they agree with the simulation only where the
//! prefix-weight phases vanish.

pub mod dense;
pub mod printed;

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{BasisState, StateVector, SystemShape};
use crate::measure::{family_bounds, OutcomeLabel, OutcomeRecord};
use crate::protocol::{class_angle, compute_omega, ProtocolConfig, SecretSpec, Variant};

/// Unmerged list of basis terms.
pub type Terms = Vec<(BasisState, C64)>;

/// Sorts terms into a canonical order so two multisets compare with `==`.
pub fn sorted_terms(mut t: Terms) -> Terms {
    t.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| a.1.re.total_cmp(&b.1.re))
            .then_with(|| a.1.im.total_cmp(&b.1.im))
    });
    t
}

/// Exact multiset equality of two term lists.
pub fn same_multiset(a: &Terms, b: &Terms) -> bool {
    sorted_terms(a.clone()) == sorted_terms(b.clone())
}

/// Symmetric sum of all `m`-bit strings with `k` ones, unit amplitudes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationSum {
    pub ones: usize,
    pub total: usize,
    /// Bit strings, qubit 0 first, in ascending binary order.
    pub strings: Vec<Vec<u8>>,
}

impl PermutationSum {
    /// Each string extended by one trailing bit.
    pub fn append(&self, bit: u8) -> Vec<Vec<u8>> {
        self.strings
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.push(bit);
                s
            })
            .collect()
    }

    /// As a state on the receiver coins of `shape`.
    pub fn state(&self, shape: &SystemShape) -> Result<StateVector> {
        receiver_state(shape, |bits| {
            if self.strings.iter().any(|s| s == bits) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

pub fn perm_sum(k: usize, m: usize) -> Result<PermutationSum> {
    if k > m {
        return Err(Error::PermutationRange { k, m });
    }
    let strings = (0..1u64 << m)
        .filter(|x| x.count_ones() as usize == k)
        .map(|x| (0..m).map(|i| ((x >> (m - 1 - i)) & 1) as u8).collect())
        .collect();
    Ok(PermutationSum {
        ones: k,
        total: m,
        strings,
    })
}

fn all_strings(m: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1u64 << m).map(move |x| (0..m).map(|i| ((x >> (m - 1 - i)) & 1) as u8).collect())
}

fn weight(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b == 1).count()
}

/// State on the receiver coins with amplitude `f(bits)` per string.
pub fn receiver_state<F>(shape: &SystemShape, f: F) -> Result<StateVector>
where
    F: Fn(&[u8]) -> C64,
{
    let terms: Terms = all_strings(shape.m())
        .map(|b| {
            let a = f(&b);
            (BasisState::new(vec![], b), a)
        })
        .collect();
    StateVector::from_terms(shape, &shape.receiver_slots(), terms)
}

/// `m_k = m + 1 − 2k`.
fn lead_position(m: usize, k: usize) -> i32 {
    m as i32 + 1 - 2 * k as i32
}

/// Full-system basis state of one secret branch: walker 0 at `lead`, the other
/// walkers at ±1, first coins all equal to the branch bit.
fn branch_key(n: usize, lead: i32, beta: bool, receivers: Vec<u8>) -> BasisState {
    let side = if beta { -1 } else { 1 };
    let mut positions = vec![side; n];
    positions[0] = lead;
    let mut coins = vec![beta as u8; n];
    coins.extend(receivers);
    BasisState::new(positions, coins)
}

/// Homogeneous-variant output with unit coefficients per term, as a flat sum
/// over `k` of both branches times the weight-`k` permutation sum.
pub fn closed_form_h_terms(n: usize, m: usize, secret: &SecretSpec) -> Result<Terms> {
    let mut out = Vec::new();
    for k in 0..=m {
        for bits in perm_sum(k, m)?.strings {
            out.push((branch_key(n, lead_position(m, k), false, bits.clone()), secret.alpha()));
            out.push((branch_key(n, lead_position(m, k + 1), true, bits), secret.beta()));
        }
    }
    Ok(out)
}

pub fn closed_form_h_unnormalized(n: usize, m: usize, secret: &SecretSpec) -> Result<StateVector> {
    let shape = SystemShape::new(n, m)?;
    StateVector::from_terms(&shape, &shape.all_slots(), closed_form_h_terms(n, m, secret)?)
}

pub fn closed_form_h(n: usize, m: usize, secret: &SecretSpec) -> Result<StateVector> {
    closed_form_h_unnormalized(n, m, secret)?.normalize()
}

/// The same terms split by the parity of `k`: even part, odd part.
pub fn closed_form_h_parity_split(n: usize, m: usize, secret: &SecretSpec) -> Result<(Terms, Terms)> {
    let (mp, mpp) = (m / 2, (m - 1) / 2);
    let (a, b) = (secret.alpha(), secret.beta());
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for k in 0..=mp {
        for s in perm_sum(2 * k, m)?.strings {
            even.push((branch_key(n, lead_position(m, 2 * k), false, s), a));
        }
        for s in perm_sum(2 * k, m)?.strings {
            odd.push((branch_key(n, lead_position(m, 2 * k + 1), true, s), b));
        }
    }
    for k in 0..=mpp {
        for s in perm_sum(2 * k + 1, m)?.strings {
            even.push((branch_key(n, lead_position(m, 2 * k + 2), true, s), b));
        }
        for s in perm_sum(2 * k + 1, m)?.strings {
            odd.push((branch_key(n, lead_position(m, 2 * k + 1), false, s), a));
        }
    }
    Ok((even, odd))
}

/// The four groups of the last-coin regrouping, each an α half followed by a
/// β half.
pub fn closed_form_h_groups(n: usize, m: usize, secret: &SecretSpec) -> Result<[Terms; 4]> {
    let (mp, mpp) = (m / 2, (m - 1) / 2);
    let (a, b) = (secret.alpha(), secret.beta());
    let l = m - 1;
    let add = |out: &mut Terms, lead: usize, beta: bool, ones: usize, last: u8| -> Result<()> {
        let amp = if beta { b } else { a };
        for s in perm_sum(ones, l)?.append(last) {
            out.push((branch_key(n, lead_position(m, lead), beta, s), amp));
        }
        Ok(())
    };
    let mut g: [Terms; 4] = Default::default();
    for k in 0..=mpp {
        add(&mut g[0], 2 * k, false, 2 * k, 0)?;
    }
    for k in 0..=mpp {
        add(&mut g[0], 2 * k + 2, true, 2 * k, 1)?;
    }
    for k in 1..=mp {
        add(&mut g[1], 2 * k, false, 2 * k - 1, 1)?;
    }
    for k in 0..mp {
        add(&mut g[1], 2 * k + 2, true, 2 * k + 1, 0)?;
    }
    for k in 0..mp {
        add(&mut g[2], 2 * k + 1, false, 2 * k + 1, 0)?;
    }
    for k in 1..=mp {
        add(&mut g[2], 2 * k + 1, true, 2 * k - 1, 1)?;
    }
    for k in 0..=mpp {
        add(&mut g[3], 2 * k + 1, false, 2 * k, 1)?;
    }
    for k in 0..=mpp {
        add(&mut g[3], 2 * k + 1, true, 2 * k, 0)?;
    }
    Ok(g)
}

pub fn closed_form_h_reordered_terms(n: usize, m: usize, secret: &SecretSpec) -> Result<Terms> {
    Ok(closed_form_h_groups(n, m, secret)?.into_iter().flatten().collect())
}

pub fn closed_form_h_reordered(n: usize, m: usize, secret: &SecretSpec) -> Result<StateVector> {
    let shape = SystemShape::new(n, m)?;
    StateVector::from_terms(&shape, &shape.all_slots(), closed_form_h_reordered_terms(n, m, secret)?)?.normalize()
}

/// Position-dependent output: both branches pushed to the ends of the line.
pub fn closed_form_p(n: usize, m: usize, secret: &SecretSpec) -> Result<StateVector> {
    let shape = SystemShape::new(n, m)?;
    let top = m as i32 + 1;
    StateVector::from_terms(
        &shape,
        &shape.all_slots(),
        [
            (branch_key(n, top, false, vec![0; m]), secret.alpha()),
            (branch_key(n, -top, true, vec![1; m]), secret.beta()),
        ],
    )?
    .normalize()
}

/// `α|0…0⟩ + β|1…1⟩` on the receiver coins.
pub fn ghz_state(shape: &SystemShape, secret: &SecretSpec) -> Result<StateVector> {
    let m = shape.m();
    receiver_state(shape, |bits| match weight(bits) {
        0 => secret.alpha(),
        w if w == m => secret.beta(),
        _ => C64::new(0.0, 0.0),
    })
}

/// Homogeneous-variant receiver state after the senders measure, before any
/// correction. Class `0s` keeps even-weight α and odd-weight β strings, class
/// `1t` the opposite, each string carrying the Fourier phase of the walker-0
/// site it came from.
pub fn homogeneous_residual(
    shape: &SystemShape,
    class: OutcomeLabel,
    omega: u8,
    secret: &SecretSpec,
) -> Result<StateVector> {
    let (mp, mppp) = family_bounds(shape.m());
    let sign = if omega == 1 { -1.0 } else { 1.0 };
    let (a, b) = (secret.alpha(), secret.beta() * sign);
    let phase =
        |half_steps: usize, period: usize| C64::from_polar(1.0, PI * (half_steps * class.index) as f64 / period as f64);
    receiver_state(shape, |bits| {
        let k = weight(bits);
        match (class.branch, k % 2) {
            (0, 0) => a * phase(k, mppp + 1),
            (0, _) => b * phase(k + 1, mppp + 1),
            (_, 1) => a * phase(k - 1, mp + 1),
            (_, _) => b * phase(k, mp + 1),
        }
    })
}

/// Receivers' normalized state before correction.
pub fn expected_receiver_state(
    shape: &SystemShape,
    variant: Variant,
    outcome: &OutcomeRecord,
    secret: &SecretSpec,
) -> Result<StateVector> {
    let omega = compute_omega(variant, outcome);
    match variant {
        Variant::PositionDependent => {
            let flipped = if omega == 1 {
                secret.with_beta_phase(PI)
            } else {
                *secret
            };
            ghz_state(shape, &flipped)?.normalize()
        }
        Variant::Homogeneous => homogeneous_residual(shape, outcome.p1, omega, secret)?.normalize(),
    }
}

/// Receivers' normalized state after the configured correction.
pub fn expected_corrected_state(
    config: &ProtocolConfig,
    outcome: &OutcomeRecord,
    secret: &SecretSpec,
) -> Result<StateVector> {
    let shape = config.shape()?;
    match config.variant {
        Variant::PositionDependent => ghz_state(&shape, secret)?.normalize(),
        Variant::Homogeneous => {
            let j = config.corrected_receiver - 1;
            let theta = class_angle(config.m, outcome.p1);
            let base = homogeneous_residual(&shape, outcome.p1, 0, secret)?;
            let corrected = receiver_state(&shape, |bits| {
                if config.rz_correction {
                    let a = base.amplitude(&BasisState::new(vec![], bits.to_vec()));
                    if bits[j] == 1 {
                        a * C64::from_polar(1.0, -theta)
                    } else {
                        a
                    }
                } else {
                    let mut src = bits.to_vec();
                    src[j] ^= 1;
                    base.amplitude(&BasisState::new(vec![], src))
                }
            })?;
            corrected.normalize()
        }
    }
}

/// Sign convention for `|±⟩` in the shared-secret rewrite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlusMinus {
    /// `(|0⟩ ± |1⟩)/√2`.
    Standard,
    /// `(|1⟩ ± |0⟩)/√2`, as used for the first-coin basis.
    CoinBasis,
}

/// `Σ_j even P[|−⟩^j |+⟩^{m−1−j}] |φ⟩ + Σ_j odd P[…] σ_z|φ⟩`, normalized.
pub fn minus_parity_expansion(shape: &SystemShape, secret: &SecretSpec, convention: PlusMinus) -> Result<StateVector> {
    let m = shape.m();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // ⟨x|±⟩
    let local = |minus: bool, x: u8| -> f64 {
        let (first, second) = match convention {
            PlusMinus::Standard => (0u8, 1u8),
            PlusMinus::CoinBasis => (1u8, 0u8),
        };
        if x == first {
            h
        } else if x == second {
            if minus {
                -h
            } else {
                h
            }
        } else {
            0.0
        }
    };
    let mut acc = receiver_state(shape, |_| C64::new(0.0, 0.0))?;
    for signs in all_strings(m - 1) {
        let odd = weight(&signs) % 2 == 1;
        let last_beta = if odd { -secret.beta() } else { secret.beta() };
        let part = receiver_state(shape, |bits| {
            let prefix: f64 = signs.iter().zip(bits).map(|(&s, &x)| local(s == 1, x)).product();
            let last = if bits[m - 1] == 0 { secret.alpha() } else { last_beta };
            last * prefix
        })?;
        acc = acc.add(&part)?;
    }
    acc.normalize()
}
