//! Coin operators, conditional shifts and the two evolution stages.
//!
//! A coin bit of 0 moves its walker one site right, a bit of 1 one site left.
//! Stage one flips first coin `i` and shifts walker `i`; stage two runs through
//! the receiver coins in ascending order, each one flipping and then shifting
//! walker 0.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{BasisState, Slot, StateVector, SystemShape};

const UNITARY_TOL: f64 = 1e-12;

/// A 2×2 complex matrix, row-major: `self.0[out][in]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Unitary2(pub [[C64; 2]; 2]);

impl Unitary2 {
    /// Checked constructor.
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        let u = Self(m);
        let dev = u.unitarity_error();
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(u)
    }

    pub fn identity() -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self([[l, o], [o, l]])
    }

    pub fn hadamard() -> Self {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        Self([[h, h], [h, -h]])
    }

    pub fn pauli_x() -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self([[o, l], [l, o]])
    }

    pub fn pauli_z() -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self([[l, o], [o, -l]])
    }

    /// `diag(1, e^{iθ})`.
    pub fn rz(theta: f64) -> Self {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        Self([[l, o], [o, C64::from_polar(1.0, theta)]])
    }

    /// Matrix product `self · rhs` (rhs acts first).
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[C64::default(); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self(out)
    }

    pub fn adjoint(&self) -> Self {
        let a = &self.0;
        Self([[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]])
    }

    /// Largest entry of `|U†U − I|`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let id = Self::identity();
        p.0.iter()
            .flatten()
            .zip(id.0.iter().flatten())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_error() <= UNITARY_TOL
    }

    /// Applies to a column vector `(a0, a1)`.
    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let u = &self.0;
        [u[0][0] * v[0] + u[0][1] * v[1], u[1][0] * v[0] + u[1][1] * v[1]]
    }
}

/// Position-keyed coin table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionTable {
    pub entries: BTreeMap<i32, Unitary2>,
    /// Used for positions missing from `entries`; `None` rejects them.
    pub default: Option<Unitary2>,
}

impl PositionTable {
    pub fn new(entries: BTreeMap<i32, Unitary2>, default: Option<Unitary2>) -> Result<Self> {
        for u in entries.values().chain(default.iter()) {
            if !u.is_unitary() {
                return Err(Error::NotUnitary(u.unitarity_error()));
            }
        }
        Ok(Self { entries, default })
    }

    pub fn lookup(&self, x: i32) -> Result<&Unitary2> {
        self.entries
            .get(&x)
            .or(self.default.as_ref())
            .ok_or(Error::MissingCoinEntry(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "table", rename_all = "snake_case")]
pub enum CoinRule {
    Identity,
    Hadamard,
    PauliX,
    PauliZ,
    /// Any fixed single-qubit unitary.
    Fixed(Unitary2),
    /// Unitary chosen by the current position of the walker the coin drives.
    PositionDependent(PositionTable),
}

impl CoinRule {
    fn constant(&self) -> Option<Unitary2> {
        match self {
            CoinRule::Identity => Some(Unitary2::identity()),
            CoinRule::Hadamard => Some(Unitary2::hadamard()),
            CoinRule::PauliX => Some(Unitary2::pauli_x()),
            CoinRule::PauliZ => Some(Unitary2::pauli_z()),
            CoinRule::Fixed(u) => Some(*u),
            CoinRule::PositionDependent(_) => None,
        }
    }
}

impl fmt::Display for CoinRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoinRule::Identity => write!(f, "I"),
            CoinRule::Hadamard => write!(f, "H"),
            CoinRule::PauliX => write!(f, "X"),
            CoinRule::PauliZ => write!(f, "Z"),
            CoinRule::Fixed(_) => write!(f, "U"),
            CoinRule::PositionDependent(t) => {
                write!(f, "C(")?;
                for (i, (x, u)) in t.entries.iter().enumerate() {
                    let name = if *u == Unitary2::identity() {
                        "I"
                    } else if *u == Unitary2::pauli_x() {
                        "X"
                    } else {
                        "U"
                    };
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}:{name}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Applies `u` to one coin of every term.
pub fn apply_single_qubit(psi: &StateVector, coin: usize, u: &Unitary2) -> Result<StateVector> {
    apply_coin_with(psi, coin, |_| Ok(*u))
}

fn apply_coin_with<F>(psi: &StateVector, coin: usize, select: F) -> Result<StateVector>
where
    F: Fn(&BasisState) -> Result<Unitary2>,
{
    let slot = Slot::Coin(coin);
    let idx = psi.slot_index(slot).ok_or(Error::MissingRegister(slot))?;
    let cidx = idx - psi.slots().iter().filter(|s| s.is_position()).count();
    psi.map_terms(|key, amp| {
        let u = select(key)?;
        let b = key.coins[cidx] as usize;
        Ok((0..2u8)
            .filter_map(|out| {
                let c = u.0[out as usize][b];
                (c.norm() > 0.0).then(|| {
                    let mut k = key.clone();
                    k.coins[cidx] = out;
                    (k, c * amp)
                })
            })
            .collect())
    })
}

/// Transforms the bit in coin `coin` by `rule`. Position-dependent rules read
/// the position of the walker that coin drives.
pub fn apply_coin(psi: &StateVector, coin: usize, rule: &CoinRule) -> Result<StateVector> {
    match rule.constant() {
        Some(u) => apply_single_qubit(psi, coin, &u),
        None => {
            let CoinRule::PositionDependent(table) = rule else {
                unreachable!()
            };
            let walker = psi.shape().coin_owner(coin);
            let pslot = Slot::Position(walker);
            if psi.slot_index(pslot).is_none() {
                return Err(Error::MissingRegister(pslot));
            }
            apply_coin_with(psi, coin, |key| {
                let x = psi.value_of(key, pslot).expect("position slot present");
                table.lookup(x).copied()
            })
        }
    }
}

/// Moves `walker` by +1 where coin `coin` reads 0 and by −1 where it reads 1.
pub fn apply_conditional_shift(psi: &StateVector, walker: usize, coin: usize) -> Result<StateVector> {
    let pslot = Slot::Position(walker);
    let cslot = Slot::Coin(coin);
    let pidx = psi.slot_index(pslot).ok_or(Error::MissingRegister(pslot))?;
    let cidx = psi.slot_index(cslot).ok_or(Error::MissingRegister(cslot))?;
    let cidx = cidx - psi.slots().iter().filter(|s| s.is_position()).count();
    let bound = psi.shape().bound(walker);
    psi.map_terms(|key, amp| {
        let step = if key.coins[cidx] == 0 { 1 } else { -1 };
        let position = key.positions[pidx] + step;
        if position.abs() > bound {
            return Err(Error::PositionOverflow {
                walker,
                position,
                bound,
            });
        }
        let mut k = key.clone();
        k.positions[pidx] = position;
        Ok(vec![(k, amp)])
    })
}

/// One coin-then-shift sub-step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSpec {
    pub active_coin: usize,
    pub shifted_walker: usize,
    pub coin_rule: CoinRule,
}

impl StepSpec {
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        let flipped = apply_coin(psi, self.active_coin, &self.coin_rule)?;
        apply_conditional_shift(&flipped, self.shifted_walker, self.active_coin)
    }
}

/// Stage one: first coin `i` drives walker `i`, one rule per walker.
pub fn stage_one_steps(shape: &SystemShape, rules: &[CoinRule]) -> Result<Vec<StepSpec>> {
    if rules.len() != shape.n() {
        return Err(Error::RuleCount {
            expected: shape.n(),
            got: rules.len(),
        });
    }
    Ok(rules
        .iter()
        .enumerate()
        .map(|(i, r)| StepSpec {
            active_coin: i,
            shifted_walker: i,
            coin_rule: r.clone(),
        })
        .collect())
}

/// Stage two: receiver coins in ascending order, all driving walker 0.
pub fn stage_two_steps(shape: &SystemShape, rules: &[CoinRule]) -> Result<Vec<StepSpec>> {
    if rules.len() != shape.m() {
        return Err(Error::RuleCount {
            expected: shape.m(),
            got: rules.len(),
        });
    }
    Ok(rules
        .iter()
        .enumerate()
        .map(|(j, r)| StepSpec {
            active_coin: shape.n() + j,
            shifted_walker: 0,
            coin_rule: r.clone(),
        })
        .collect())
}

pub fn apply_steps(psi: &StateVector, steps: &[StepSpec]) -> Result<StateVector> {
    steps.iter().try_fold(psi.clone(), |acc, s| s.apply(&acc))
}

pub fn stage_one(psi: &StateVector, rules: &[CoinRule]) -> Result<StateVector> {
    apply_steps(psi, &stage_one_steps(psi.shape(), rules)?)
}

pub fn stage_two(psi: &StateVector, rules: &[CoinRule]) -> Result<StateVector> {
    apply_steps(psi, &stage_two_steps(psi.shape(), rules)?)
}

/// Stage two with the receiver sub-steps taken in `order` (a permutation of
/// `0..m`).
pub fn stage_two_ordered(psi: &StateVector, rules: &[CoinRule], order: &[usize]) -> Result<StateVector> {
    let steps = stage_two_steps(psi.shape(), rules)?;
    let mut seen = vec![false; steps.len()];
    for &j in order {
        if j >= steps.len() || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidConfig(format!(
                "{order:?} is not a permutation of receivers"
            )));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidConfig(format!(
            "{order:?} is not a permutation of receivers"
        )));
    }
    order.iter().try_fold(psi.clone(), |acc, &j| steps[j].apply(&acc))
}

pub fn identity_rules(count: usize) -> Vec<CoinRule> {
    vec![CoinRule::Identity; count]
}

pub fn hadamard_rules(count: usize) -> Vec<CoinRule> {
    vec![CoinRule::Hadamard; count]
}

/// Receiver coin `j` (1-based) gets `{j ↦ I, −j ↦ X}` with no default.
pub fn position_dependent_rules(m: usize) -> Vec<CoinRule> {
    (1..=m as i32)
        .map(|j| {
            let entries = BTreeMap::from([(j, Unitary2::identity()), (-j, Unitary2::pauli_x())]);
            CoinRule::PositionDependent(PositionTable { entries, default: None })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::tensor_product;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn pc(shape: &SystemShape, x: i32, a0: C64, a1: C64) -> StateVector {
        // walker 0 at x, receiver coin n (the first one) in a0|0⟩+a1|1⟩
        tensor_product(
            &StateVector::position_ket(shape, 0, x).unwrap(),
            &StateVector::coin_ket(shape, shape.n(), a0, a1).unwrap(),
        )
        .unwrap()
    }

    fn key(x: i32, b: u8) -> BasisState {
        BasisState::new(vec![x], vec![b])
    }

    #[test]
    fn standard_gates_are_unitary() {
        for u in [
            Unitary2::identity(),
            Unitary2::hadamard(),
            Unitary2::pauli_x(),
            Unitary2::pauli_z(),
            Unitary2::rz(0.7),
        ] {
            assert!(u.is_unitary());
        }
        let bad = [[c(1.0), c(1.0)], [c(0.0), c(1.0)]];
        assert!(matches!(Unitary2::new(bad), Err(Error::NotUnitary(_))));
        // ZX acts as X first
        let zx = Unitary2::pauli_z().mul(&Unitary2::pauli_x());
        assert_eq!(zx.apply([c(1.0), c(0.0)]), [c(0.0), c(-1.0)]);
    }

    #[test]
    fn hadamard_on_zero() {
        let s = SystemShape::new(1, 2).unwrap();
        let psi = StateVector::coin_ket(&s, 0, c(1.0), c(0.0)).unwrap();
        let out = apply_coin(&psi, 0, &CoinRule::Hadamard).unwrap();
        let h = FRAC_1_SQRT_2;
        assert!((out.amplitude(&BasisState::new(vec![], vec![0])) - c(h)).norm() < 1e-15);
        assert!((out.amplitude(&BasisState::new(vec![], vec![1])) - c(h)).norm() < 1e-15);
    }

    #[test]
    fn identity_rule_is_a_no_op() {
        let s = SystemShape::new(1, 2).unwrap();
        let psi = pc(&s, -2, C64::new(0.3, 0.1), C64::new(0.0, -0.9));
        assert_eq!(apply_coin(&psi, 1, &CoinRule::Identity).unwrap(), psi);
    }

    #[test]
    fn position_dependent_coin_flips_only_the_left_branch() {
        let s = SystemShape::new(1, 2).unwrap();
        let (alpha, beta) = (c(0.6), c(0.8));
        let psi = pc(&s, 1, alpha, c(0.0)).add(&pc(&s, -1, beta, c(0.0))).unwrap();
        let rule = position_dependent_rules(2).remove(0);
        let out = apply_coin(&psi, 1, &rule).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.amplitude(&key(1, 0)), alpha);
        assert_eq!(out.amplitude(&key(-1, 1)), beta);
    }

    #[test]
    fn position_dependent_coin_rejects_unlisted_positions() {
        let s = SystemShape::new(1, 2).unwrap();
        let psi = pc(&s, 0, c(1.0), c(0.0));
        let rule = position_dependent_rules(2).remove(0);
        assert_eq!(apply_coin(&psi, 1, &rule).unwrap_err(), Error::MissingCoinEntry(0));
        let with_default = CoinRule::PositionDependent(PositionTable {
            entries: BTreeMap::new(),
            default: Some(Unitary2::pauli_x()),
        });
        let out = apply_coin(&psi, 1, &with_default).unwrap();
        assert_eq!(out.amplitude(&key(0, 1)), c(1.0));
    }

    #[test]
    fn shift_directions() {
        let s = SystemShape::new(1, 2).unwrap();
        let up = apply_conditional_shift(&pc(&s, 0, c(1.0), c(0.0)), 0, 1).unwrap();
        assert_eq!(up.amplitude(&key(1, 0)), c(1.0));
        let twice = apply_conditional_shift(&up, 0, 1).unwrap();
        assert_eq!(twice.amplitude(&key(2, 0)), c(1.0));
        let (alpha, beta) = (c(0.6), c(-0.8));
        let split = apply_conditional_shift(&pc(&s, 0, alpha, beta), 0, 1).unwrap();
        assert_eq!(split.amplitude(&key(1, 0)), alpha);
        assert_eq!(split.amplitude(&key(-1, 1)), beta);
    }

    #[test]
    fn shift_past_the_bound_is_an_error() {
        let s = SystemShape::new(1, 2).unwrap();
        let psi = pc(&s, 3, c(1.0), c(0.0));
        assert_eq!(
            apply_conditional_shift(&psi, 0, 1).unwrap_err(),
            Error::PositionOverflow {
                walker: 0,
                position: 4,
                bound: 3
            }
        );
    }

    #[test]
    fn rule_counts_are_checked() {
        let s = SystemShape::new(2, 3).unwrap();
        assert_eq!(
            stage_one_steps(&s, &identity_rules(3)).unwrap_err(),
            Error::RuleCount { expected: 2, got: 3 }
        );
        assert_eq!(
            stage_two_steps(&s, &hadamard_rules(2)).unwrap_err(),
            Error::RuleCount { expected: 3, got: 2 }
        );
        let steps = stage_two_steps(&s, &hadamard_rules(3)).unwrap();
        assert_eq!(
            steps
                .iter()
                .map(|st| (st.active_coin, st.shifted_walker))
                .collect::<Vec<_>>(),
            vec![(2, 0), (3, 0), (4, 0)]
        );
    }

    #[test]
    fn bad_order_is_rejected() {
        let s = SystemShape::new(1, 2).unwrap();
        let psi = pc(&s, 0, c(1.0), c(0.0));
        let psi = tensor_product(&psi, &StateVector::coin_ket(&s, 0, c(1.0), c(0.0)).unwrap()).unwrap();
        let psi = tensor_product(&psi, &StateVector::coin_ket(&s, 2, c(1.0), c(0.0)).unwrap()).unwrap();
        assert!(stage_two_ordered(&psi, &hadamard_rules(2), &[0, 0]).is_err());
        assert!(stage_two_ordered(&psi, &hadamard_rules(2), &[1]).is_err());
        assert!(stage_two_ordered(&psi, &hadamard_rules(2), &[1, 0]).is_ok());
    }

    #[test]
    fn coin_rule_serializes_with_kind_tag() {
        let json = serde_json::to_string(&CoinRule::Hadamard).unwrap();
        assert_eq!(json, r#"{"kind":"hadamard"}"#);
        let back: CoinRule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, CoinRule::Hadamard);
        let pd = position_dependent_rules(2).remove(1);
        let round: CoinRule = serde_json::from_str(&serde_json::to_string(&pd).unwrap()).unwrap();
        assert_eq!(round, pd);
        assert_eq!(pd.to_string(), "C(-2:X,2:I)");
    }

    /// Plain one-walker, one-coin walk for `t` steps.
    fn walk_t_steps(t: usize, rule: &CoinRule) -> StateVector {
        let s = SystemShape::with_bounds(1, 2, vec![t as i32 + 3]).unwrap();
        let mut psi = tensor_product(
            &StateVector::position_ket(&s, 0, 0).unwrap(),
            &StateVector::coin_ket(&s, 0, c(1.0), c(0.0)).unwrap(),
        )
        .unwrap();
        for _ in 0..t {
            psi = apply_coin(&psi, 0, rule).unwrap();
            psi = apply_conditional_shift(&psi, 0, 0).unwrap();
        }
        psi
    }

    fn distribution(psi: &StateVector) -> BTreeMap<i32, f64> {
        let mut d = BTreeMap::new();
        for (k, a) in psi.iter() {
            *d.entry(k.positions[0]).or_insert(0.0) += a.norm_sqr();
        }
        d
    }

    #[test]
    fn hadamard_walk_small_times() {
        let d1 = distribution(&walk_t_steps(1, &CoinRule::Hadamard));
        assert_eq!(d1.keys().copied().collect::<Vec<_>>(), vec![-1, 1]);
        assert!(d1.values().all(|p| (p - 0.5).abs() < 1e-12));

        let d2 = distribution(&walk_t_steps(2, &CoinRule::Hadamard));
        for (x, p) in [(-2, 0.25), (0, 0.5), (2, 0.25)] {
            assert!((d2[&x] - p).abs() < 1e-12);
        }

        // with coin |0⟩ the third step already drifts to the right
        let d3 = distribution(&walk_t_steps(3, &CoinRule::Hadamard));
        for (x, p) in [(-3, 0.125), (-1, 0.125), (1, 0.625), (3, 0.125)] {
            assert!((d3[&x] - p).abs() < 1e-12, "x={x}");
        }

        let d10 = distribution(&walk_t_steps(10, &CoinRule::Hadamard));
        assert!((d10.values().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(d10.keys().all(|x| x % 2 == 0));
    }

    #[test]
    fn identity_walk_is_ballistic() {
        let psi = walk_t_steps(5, &CoinRule::Identity);
        assert_eq!(psi.len(), 1);
        assert_eq!(psi.amplitude(&key(5, 0)), c(1.0));
    }
}
