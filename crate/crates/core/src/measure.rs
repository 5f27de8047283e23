//! Single-register measurement bases and projective measurement of the sender
//! registers, either by exhaustive branch enumeration or by seeded sampling.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Slot, StateVector};

/// Branches with smaller probability are treated as impossible.
pub const PROB_TOL: f64 = 1e-12;

/// Outcome label of one basis vector. Two-valued bases use `branch` as the bit
/// and leave `index` at 0; the walker-0 Fourier basis uses `branch` 0 for the
/// dotted family and 1 for the double-dotted one, with `index` the Fourier
/// index within that family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutcomeLabel {
    pub branch: u8,
    pub index: usize,
}

impl OutcomeLabel {
    pub fn bit(b: u8) -> Self {
        Self { branch: b, index: 0 }
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.branch, self.index)
    }
}

/// `⌊m/2⌋`, `⌊(m−1)/2⌋ + 1`: the largest index in each Fourier family.
pub fn family_bounds(m: usize) -> (usize, usize) {
    (m / 2, (m - 1) / 2 + 1)
}

/// Orthonormal vectors on one register's local space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementBasis {
    pub slot: Slot,
    /// Sparse local amplitudes `(value, amplitude)` per vector.
    pub vectors: Vec<Vec<(i32, C64)>>,
    pub labels: Vec<OutcomeLabel>,
}

impl MeasurementBasis {
    /// The same vectors on another register of the same kind.
    pub fn on(mut self, slot: Slot) -> Result<Self> {
        if slot.is_position() != self.slot.is_position() {
            return Err(Error::BasisCoverage(format!(
                "cannot move a {} basis onto {slot}",
                self.slot
            )));
        }
        self.slot = slot;
        Ok(self)
    }

    /// Values any vector touches.
    pub fn support(&self) -> BTreeSet<i32> {
        self.vectors.iter().flatten().map(|(x, _)| *x).collect()
    }

    fn overlap(a: &[(i32, C64)], b: &[(i32, C64)]) -> C64 {
        let bm: BTreeMap<i32, C64> = b.iter().copied().collect();
        a.iter().filter_map(|(x, u)| bm.get(x).map(|v| u.conj() * v)).sum()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn gram_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((Self::overlap(a, b) - target).norm());
            }
        }
        worst
    }

    /// Deviation of the change-of-basis matrix (vectors as columns over the
    /// basis support) from unitarity; infinite if it is not square.
    pub fn unitarity_error(&self) -> f64 {
        let support: Vec<i32> = self.support().into_iter().collect();
        if support.len() != self.vectors.len() {
            return f64::INFINITY;
        }
        let col = |v: &Vec<(i32, C64)>, x: i32| v.iter().find(|(y, _)| *y == x).map(|(_, a)| *a).unwrap_or_default();
        let mut worst = self.gram_error();
        for &x in &support {
            for &y in &support {
                let s: C64 = self.vectors.iter().map(|v| col(v, x) * col(v, y).conj()).sum();
                let target = if x == y { 1.0 } else { 0.0 };
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }

    fn bra(&self, k: usize) -> impl Fn(i32) -> C64 + '_ {
        move |x| {
            self.vectors[k]
                .iter()
                .find(|(y, _)| *y == x)
                .map(|(_, a)| a.conj())
                .unwrap_or_default()
        }
    }
}

fn two_vector(slot: Slot, up: i32, down: i32) -> MeasurementBasis {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    MeasurementBasis {
        slot,
        vectors: vec![vec![(up, h), (down, h)], vec![(up, h), (down, -h)]],
        labels: vec![OutcomeLabel::bit(0), OutcomeLabel::bit(1)],
    }
}

fn fourier_family(top: i32, count: usize, branch: u8) -> Vec<(Vec<(i32, C64)>, OutcomeLabel)> {
    let norm = 1.0 / (count as f64).sqrt();
    (0..count)
        .map(|s| {
            let v = (0..count)
                .map(|l| {
                    let phase = -2.0 * PI * (l * s) as f64 / count as f64;
                    (top - 4 * l as i32, C64::from_polar(norm, phase))
                })
                .collect();
            (v, OutcomeLabel { branch, index: s })
        })
        .collect()
}

/// Fourier basis on walker 0 for the homogeneous protocol: the dotted family
/// over `m+1−4l` and the double-dotted family over `m−1−4l`.
pub fn build_lambda_h(m: usize) -> Result<MeasurementBasis> {
    if m < 2 {
        return Err(Error::InvalidShape(format!("need at least two receivers, got {m}")));
    }
    let (mp, mppp) = family_bounds(m);
    let m = m as i32;
    let (vectors, labels) = fourier_family(m + 1, mppp + 1, 0)
        .into_iter()
        .chain(fourier_family(m - 1, mp + 1, 1))
        .unzip();
    Ok(MeasurementBasis {
        slot: Slot::Position(0),
        vectors,
        labels,
    })
}

/// `(|m+1⟩ ± |−(m+1)⟩)/√2` on walker 0, plus ↦ 0.
pub fn build_lambda_p(m: usize) -> Result<MeasurementBasis> {
    if m < 2 {
        return Err(Error::InvalidShape(format!("need at least two receivers, got {m}")));
    }
    let top = m as i32 + 1;
    Ok(two_vector(Slot::Position(0), top, -top))
}

/// `(|1⟩ ± |−1⟩)/√2` on a secondary walker (walker 1 by default).
pub fn build_theta() -> MeasurementBasis {
    two_vector(Slot::Position(1), 1, -1)
}

/// `(|1⟩ ± |0⟩)/√2` on a first coin (coin 0 by default).
pub fn build_delta() -> MeasurementBasis {
    two_vector(Slot::Coin(0), 1, 0)
}

/// `(|0⟩ ± |1⟩)/√2` on a coin.
pub fn build_x_basis(coin: usize) -> MeasurementBasis {
    two_vector(Slot::Coin(coin), 0, 1)
}

/// Computational basis on a coin.
pub fn build_z_basis(coin: usize) -> MeasurementBasis {
    let one = C64::new(1.0, 0.0);
    MeasurementBasis {
        slot: Slot::Coin(coin),
        vectors: vec![vec![(0, one)], vec![(1, one)]],
        labels: vec![OutcomeLabel::bit(0), OutcomeLabel::bit(1)],
    }
}

/// One measurement branch: label, probability relative to the input norm, and
/// the normalized state on the remaining registers.
#[derive(Clone, Debug)]
pub struct Branch {
    pub label: OutcomeLabel,
    pub probability: f64,
    pub residual: StateVector,
}

/// Projects one register onto every basis vector. Fails if the state has
/// weight on a value the basis does not span.
pub fn measure_slot(psi: &StateVector, basis: &MeasurementBasis) -> Result<Vec<Branch>> {
    let support = basis.support();
    for x in psi.support_values(basis.slot)? {
        if !support.contains(&x) {
            return Err(Error::BasisIncomplete {
                slot: basis.slot,
                value: x,
            });
        }
    }
    let total = psi.norm_sqr();
    if total < PROB_TOL {
        return Err(Error::ZeroNorm);
    }
    let mut out = Vec::new();
    for (k, &label) in basis.labels.iter().enumerate() {
        let projected = psi.contract_slot(basis.slot, basis.bra(k))?;
        let p = projected.norm_sqr() / total;
        if p > PROB_TOL {
            out.push(Branch {
                label,
                probability: p,
                residual: projected.normalize()?,
            });
        }
    }
    Ok(out)
}

/// Joint outcome of a measurement sequence; labels follow the order of the
/// bases given.
#[derive(Clone, Debug)]
pub struct JointBranch {
    pub labels: Vec<OutcomeLabel>,
    pub probability: f64,
    pub residual: StateVector,
}

/// Measures the registers one after another, enumerating every branch.
pub fn measure_sequence(psi: &StateVector, bases: &[MeasurementBasis]) -> Result<Vec<JointBranch>> {
    let Some((first, rest)) = bases.split_first() else {
        return Ok(vec![JointBranch {
            labels: vec![],
            probability: 1.0,
            residual: psi.clone(),
        }]);
    };
    let branches = measure_slot(psi, first)?;
    let nested: Vec<Vec<JointBranch>> = branches
        .par_iter()
        .map(|b| {
            let tail = measure_sequence(&b.residual, rest)?;
            Ok(tail
                .into_iter()
                .map(|t| {
                    let mut labels = Vec::with_capacity(bases.len());
                    labels.push(b.label);
                    labels.extend(t.labels);
                    JointBranch {
                        labels,
                        probability: b.probability * t.probability,
                        residual: t.residual,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Draws one branch of a measurement sequence.
pub fn sample_sequence<R: Rng>(psi: &StateVector, bases: &[MeasurementBasis], rng: &mut R) -> Result<JointBranch> {
    let mut labels = Vec::with_capacity(bases.len());
    let mut probability = 1.0;
    let mut state = psi.clone();
    for basis in bases {
        let branches = measure_slot(&state, basis)?;
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        let mut r = rng.gen::<f64>() * total;
        let mut pick = branches.len() - 1;
        for (i, b) in branches.iter().enumerate() {
            if r < b.probability {
                pick = i;
                break;
            }
            r -= b.probability;
        }
        let b = branches.into_iter().nth(pick).expect("at least one branch");
        labels.push(b.label);
        probability *= b.probability;
        state = b.residual;
    }
    Ok(JointBranch {
        labels,
        probability,
        residual: state,
    })
}

/// The senders' classical results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    /// Walker 0's result.
    pub p1: OutcomeLabel,
    /// Bits of walkers `1..n`.
    pub p: Vec<u8>,
    /// Bits of first coins `0..n`.
    pub c: Vec<u8>,
    pub prob: f64,
}

impl OutcomeRecord {
    fn key(&self) -> (OutcomeLabel, &[u8], &[u8]) {
        (self.p1, &self.p, &self.c)
    }
}

impl fmt::Display for OutcomeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits = |v: &[u8]| v.iter().map(|b| b.to_string()).collect::<String>();
        write!(f, "p1={} p={} c={}", self.p1, bits(&self.p), bits(&self.c))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Enumerate,
    Sample,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enumerate" => Ok(Mode::Enumerate),
            "sample" => Ok(Mode::Sample),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

fn check_sender_coverage(psi: &StateVector, bases: &[MeasurementBasis]) -> Result<()> {
    let n = psi.shape().n();
    let want: BTreeSet<Slot> = (0..n).flat_map(|i| [Slot::Position(i), Slot::Coin(i)]).collect();
    let got: Vec<Slot> = bases.iter().map(|b| b.slot).collect();
    let got_set: BTreeSet<Slot> = got.iter().copied().collect();
    if got.len() != got_set.len() || got_set != want {
        return Err(Error::BasisCoverage(format!(
            "expected one basis for each of {want:?}, got {got:?}"
        )));
    }
    Ok(())
}

fn to_record(bases: &[MeasurementBasis], labels: &[OutcomeLabel], prob: f64, n: usize) -> OutcomeRecord {
    let mut p1 = OutcomeLabel::bit(0);
    let mut p = vec![0; n.saturating_sub(1)];
    let mut c = vec![0; n];
    for (b, l) in bases.iter().zip(labels) {
        match b.slot {
            Slot::Position(0) => p1 = *l,
            Slot::Position(i) => p[i - 1] = l.branch,
            Slot::Coin(i) => c[i] = l.branch,
        }
    }
    OutcomeRecord { p1, p, c, prob }
}

/// Measures all `2n` sender registers in the given order. Enumerate mode
/// returns every possible outcome sorted by label; sample mode returns one,
/// drawn with a generator seeded by `seed`.
pub fn measure_all(
    psi: &StateVector,
    bases: &[MeasurementBasis],
    mode: Mode,
    seed: u64,
) -> Result<Vec<(OutcomeRecord, StateVector)>> {
    check_sender_coverage(psi, bases)?;
    let n = psi.shape().n();
    let joint = match mode {
        Mode::Enumerate => measure_sequence(psi, bases)?,
        Mode::Sample => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            vec![sample_sequence(psi, bases, &mut rng)?]
        }
    };
    let mut out: Vec<(OutcomeRecord, StateVector)> = joint
        .into_iter()
        .map(|j| (to_record(bases, &j.labels, j.probability, n), j.residual))
        .collect();
    out.sort_by(|a, b| a.0.key().cmp(&b.0.key()));
    Ok(out)
}
