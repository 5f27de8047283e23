//! Basis indexing, sparse state vectors and reduced density matrices over the
//! composite walker/coin space.
//!
//! The system holds `n` walkers and `n + m` coins. Coins `0..n` are the first
//! coins of each walker; coins `n..n + m` are the extra coins of walker 0, one
//! per receiver. A [`StateVector`] may cover only some of these registers (a
//! factor of a product state, or the residual left after measurement), so every
//! vector carries the ordered list of [`Slot`]s it is defined on.
//!
//! Canonical ordering: position slots first (by walker), then coin slots (by
//! coin index). [`Slot`]'s derived `Ord` realizes exactly this order, and a
//! [`BasisState`] stores its `positions` and `coins` in that order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Amplitudes with magnitude below this are dropped from the support.
pub const PRUNE_TOL: f64 = 1e-14;

/// Default tolerance for state comparisons.
pub const COMPARE_TOL: f64 = 1e-10;

/// One register of the composite system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    /// Position register of walker `i` (0-based).
    Position(usize),
    /// Coin `c` (0-based; `c < n` are first coins, `c >= n` receiver coins).
    Coin(usize),
}

impl Slot {
    pub fn is_position(self) -> bool {
        matches!(self, Slot::Position(_))
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Position(i) => write!(f, "p{i}"),
            Slot::Coin(c) => write!(f, "c{c}"),
        }
    }
}

/// Walker/coin counts and the position range of every walker.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SystemShape {
    n: usize,
    m: usize,
    bounds: Vec<i32>,
}

impl SystemShape {
    /// The protocol shape: walker 0 ranges over `[-(m+1), m+1]`, the others
    /// over `[-1, 1]`.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        let mut bounds = vec![1; n];
        if let Some(first) = bounds.first_mut() {
            *first = m as i32 + 1;
        }
        Self::with_bounds(n, m, bounds)
    }

    /// A shape with wider position ranges, e.g. for free multi-step walks.
    pub fn with_bounds(n: usize, m: usize, bounds: Vec<i32>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidShape("need at least one walker".into()));
        }
        if m < 2 {
            return Err(Error::InvalidShape(format!("need at least two receivers, got {m}")));
        }
        if bounds.len() != n {
            return Err(Error::InvalidShape(format!(
                "expected {n} position bounds, got {}",
                bounds.len()
            )));
        }
        if bounds[0] < m as i32 + 1 {
            return Err(Error::InvalidShape(format!(
                "walker 0 needs range >= {}, got {}",
                m + 1,
                bounds[0]
            )));
        }
        if bounds[1..].iter().any(|&b| b < 1) {
            return Err(Error::InvalidShape("secondary walkers need range >= 1".into()));
        }
        Ok(Self { n, m, bounds })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coin_count(&self) -> usize {
        self.n + self.m
    }

    pub fn bound(&self, walker: usize) -> i32 {
        self.bounds[walker]
    }

    pub fn contains(&self, slot: Slot) -> bool {
        match slot {
            Slot::Position(i) => i < self.n,
            Slot::Coin(c) => c < self.coin_count(),
        }
    }

    /// Walker whose position a coin shifts: first coins belong to their own
    /// walker, receiver coins to walker 0.
    pub fn coin_owner(&self, coin: usize) -> usize {
        if coin < self.n {
            coin
        } else {
            0
        }
    }

    pub fn receiver_coin(&self, j: usize) -> Slot {
        Slot::Coin(self.n + j)
    }

    pub fn all_slots(&self) -> Vec<Slot> {
        (0..self.n)
            .map(Slot::Position)
            .chain((0..self.coin_count()).map(Slot::Coin))
            .collect()
    }

    pub fn receiver_slots(&self) -> Vec<Slot> {
        (0..self.m).map(|j| self.receiver_coin(j)).collect()
    }

    /// Every value a slot's local register can hold.
    pub fn local_values(&self, slot: Slot) -> Vec<i32> {
        match slot {
            Slot::Position(i) => (-self.bounds[i]..=self.bounds[i]).collect(),
            Slot::Coin(_) => vec![0, 1],
        }
    }

    fn admits(&self, slot: Slot, value: i32) -> bool {
        match slot {
            Slot::Position(i) => value.abs() <= self.bounds[i],
            Slot::Coin(_) => value == 0 || value == 1,
        }
    }
}

/// One computational-basis configuration of the slots a state is defined on.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisState {
    pub positions: Vec<i32>,
    pub coins: Vec<u8>,
}

impl BasisState {
    pub fn new(positions: Vec<i32>, coins: Vec<u8>) -> Self {
        Self { positions, coins }
    }

    /// Values in canonical slot order.
    fn values(&self) -> impl Iterator<Item = i32> + '_ {
        self.positions
            .iter()
            .copied()
            .chain(self.coins.iter().map(|&b| b as i32))
    }

    fn from_values(npos: usize, values: &[i32]) -> Self {
        Self {
            positions: values[..npos].to_vec(),
            coins: values[npos..].iter().map(|&v| v as u8).collect(),
        }
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|")?;
        for (k, x) in self.positions.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        if !self.positions.is_empty() && !self.coins.is_empty() {
            write!(f, ";")?;
        }
        for b in &self.coins {
            write!(f, "{b}")?;
        }
        write!(f, "⟩")
    }
}

/// Sparse superposition over [`BasisState`]s of a fixed list of slots.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    shape: SystemShape,
    slots: Vec<Slot>,
    amps: BTreeMap<BasisState, C64>,
}

impl StateVector {
    /// The zero vector over `slots`.
    pub fn zero(shape: &SystemShape, slots: &[Slot]) -> Result<Self> {
        let mut sorted = slots.to_vec();
        sorted.sort();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::OverlappingSlots(w[0]));
            }
        }
        if let Some(&bad) = sorted.iter().find(|s| !shape.contains(**s)) {
            return Err(Error::UnknownSlot(bad));
        }
        Ok(Self {
            shape: shape.clone(),
            slots: sorted,
            amps: BTreeMap::new(),
        })
    }

    /// Builds a state from (possibly repeated) terms; repeated basis states
    /// accumulate.
    pub fn from_terms<I>(shape: &SystemShape, slots: &[Slot], terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BasisState, C64)>,
    {
        let mut psi = Self::zero(shape, slots)?;
        for (key, amp) in terms {
            psi.validate_key(&key)?;
            *psi.amps.entry(key).or_default() += amp;
        }
        psi.prune();
        Ok(psi)
    }

    pub fn basis(shape: &SystemShape, slots: &[Slot], state: BasisState) -> Result<Self> {
        Self::from_terms(shape, slots, [(state, C64::new(1.0, 0.0))])
    }

    /// `|x⟩` on the position register of `walker`.
    pub fn position_ket(shape: &SystemShape, walker: usize, x: i32) -> Result<Self> {
        Self::basis(shape, &[Slot::Position(walker)], BasisState::new(vec![x], vec![]))
    }

    /// `a0|0⟩ + a1|1⟩` on a single coin.
    pub fn coin_ket(shape: &SystemShape, coin: usize, a0: C64, a1: C64) -> Result<Self> {
        let slot = [Slot::Coin(coin)];
        Self::from_terms(
            shape,
            &slot,
            [
                (BasisState::new(vec![], vec![0]), a0),
                (BasisState::new(vec![], vec![1]), a1),
            ],
        )
    }

    fn validate_key(&self, key: &BasisState) -> Result<()> {
        let npos = self.position_count();
        if key.positions.len() != npos || key.coins.len() != self.slots.len() - npos {
            return Err(Error::MalformedBasisState(format!(
                "{key} does not fit {} slots",
                self.slots.len()
            )));
        }
        for (slot, v) in self.slots.iter().zip(key.values()) {
            if !self.shape.admits(*slot, v) {
                return Err(Error::MalformedBasisState(format!(
                    "value {v} is out of range for {slot}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn from_map(shape: SystemShape, slots: Vec<Slot>, amps: BTreeMap<BasisState, C64>) -> Self {
        let mut psi = Self { shape, slots, amps };
        psi.prune();
        psi
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() >= PRUNE_TOL);
    }

    pub fn shape(&self) -> &SystemShape {
        &self.shape
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisState, &C64)> {
        self.amps.iter()
    }

    pub fn amplitude(&self, key: &BasisState) -> C64 {
        self.amps.get(key).copied().unwrap_or_default()
    }

    fn position_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_position()).count()
    }

    /// Index of `slot` within the canonical value list, if present.
    pub(crate) fn slot_index(&self, slot: Slot) -> Option<usize> {
        self.slots.iter().position(|&s| s == slot)
    }

    /// Value held by `slot` in `key`.
    pub fn value_of(&self, key: &BasisState, slot: Slot) -> Option<i32> {
        let idx = self.slot_index(slot)?;
        let npos = self.position_count();
        Some(if idx < npos {
            key.positions[idx]
        } else {
            key.coins[idx - npos] as i32
        })
    }

    /// Distinct values `slot` takes across the support.
    pub fn support_values(&self, slot: Slot) -> Result<BTreeSet<i32>> {
        if self.slot_index(slot).is_none() {
            return Err(Error::MissingRegister(slot));
        }
        Ok(self.amps.keys().filter_map(|k| self.value_of(k, slot)).collect())
    }

    /// Rewrites every term through `f`, which returns the new key and a
    /// multiplier. Keys stay on the same slots; collisions accumulate.
    pub(crate) fn map_terms<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&BasisState, C64) -> Result<Vec<(BasisState, C64)>>,
    {
        let mut out: BTreeMap<BasisState, C64> = BTreeMap::new();
        for (k, &a) in &self.amps {
            for (nk, na) in f(k, a)? {
                *out.entry(nk).or_default() += na;
            }
        }
        Ok(Self::from_map(self.shape.clone(), self.slots.clone(), out))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&self) -> Result<Self> {
        let norm = self.norm();
        if norm < PRUNE_TOL {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scale(C64::new(1.0 / norm, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Self {
        let amps = self.amps.iter().map(|(k, a)| (k.clone(), a * c)).collect();
        Self::from_map(self.shape.clone(), self.slots.clone(), amps)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        let mut amps = self.amps.clone();
        for (k, a) in &other.amps {
            *amps.entry(k.clone()).or_default() += a;
        }
        Ok(Self::from_map(self.shape.clone(), self.slots.clone(), amps))
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape || self.slots != other.slots {
            return Err(Error::ShapeMismatch);
        }
        Ok(())
    }

    /// Largest entrywise amplitude difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_space(other)?;
        let keys: BTreeSet<&BasisState> = self.amps.keys().chain(other.amps.keys()).collect();
        Ok(keys
            .into_iter()
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(0.0, f64::max))
    }

    /// Contracts `slot` against a local bra given as `x -> ⟨v|x⟩`; the result
    /// lives on the remaining slots and is not renormalized.
    pub fn contract_slot<F>(&self, slot: Slot, bra: F) -> Result<Self>
    where
        F: Fn(i32) -> C64,
    {
        let idx = self.slot_index(slot).ok_or(Error::MissingRegister(slot))?;
        let slots: Vec<Slot> = self.slots.iter().copied().filter(|&s| s != slot).collect();
        let npos = slots.iter().filter(|s| s.is_position()).count();
        let mut out: BTreeMap<BasisState, C64> = BTreeMap::new();
        for (k, &a) in &self.amps {
            let mut values: Vec<i32> = k.values().collect();
            let x = values.remove(idx);
            let c = bra(x);
            if c.norm() == 0.0 {
                continue;
            }
            *out.entry(BasisState::from_values(npos, &values)).or_default() += c * a;
        }
        Ok(Self::from_map(self.shape.clone(), slots, out))
    }

    /// Exchanges the contents of two coin registers.
    pub fn swap_coins(&self, a: usize, b: usize) -> Result<Self> {
        let ia = self
            .slot_index(Slot::Coin(a))
            .ok_or(Error::MissingRegister(Slot::Coin(a)))?;
        let ib = self
            .slot_index(Slot::Coin(b))
            .ok_or(Error::MissingRegister(Slot::Coin(b)))?;
        let npos = self.position_count();
        self.map_terms(|k, amp| {
            let mut k = k.clone();
            k.coins.swap(ia - npos, ib - npos);
            Ok(vec![(k, amp)])
        })
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.amps.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, a)) in self.amps.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.4}{:+.4}i){k}", a.re, a.im)?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct TermRecord<'a> {
    positions: &'a [i32],
    coins: &'a [u8],
    re: f64,
    im: f64,
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.amps.len()))?;
        for (k, a) in &self.amps {
            seq.serialize_element(&TermRecord {
                positions: &k.positions,
                coins: &k.coins,
                re: a.re,
                im: a.im,
            })?;
        }
        seq.end()
    }
}

/// `a ⊗ b` for states on disjoint slots of the same system.
pub fn tensor_product(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch);
    }
    if let Some(&s) = a.slots.iter().find(|s| b.slots.contains(s)) {
        return Err(Error::OverlappingSlots(s));
    }
    let mut slots: Vec<Slot> = a.slots.iter().chain(&b.slots).copied().collect();
    slots.sort();
    let npos = slots.iter().filter(|s| s.is_position()).count();
    // source of each merged slot: (from_a, index within that factor)
    let origin: Vec<(bool, usize)> = slots
        .iter()
        .map(|s| match a.slot_index(*s) {
            Some(i) => (true, i),
            None => (false, b.slot_index(*s).unwrap()),
        })
        .collect();

    let mut amps = BTreeMap::new();
    for (ka, &xa) in &a.amps {
        let va: Vec<i32> = ka.values().collect();
        for (kb, &xb) in &b.amps {
            let vb: Vec<i32> = kb.values().collect();
            let values: Vec<i32> = origin
                .iter()
                .map(|&(from_a, i)| if from_a { va[i] } else { vb[i] })
                .collect();
            amps.insert(BasisState::from_values(npos, &values), xa * xb);
        }
    }
    Ok(StateVector::from_map(a.shape.clone(), slots, amps))
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    a.check_same_space(b)?;
    Ok(a.amps
        .iter()
        .filter_map(|(k, x)| b.amps.get(k).map(|y| x.conj() * y))
        .sum())
}

/// `|⟨a|b⟩| / (‖a‖‖b‖)`: insensitive to global phase and normalization.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    let denom = a.norm() * b.norm();
    if denom < PRUNE_TOL {
        return Err(Error::ZeroNorm);
    }
    Ok(inner_product(a, b)?.norm() / denom)
}

/// Reduced density matrix of `psi` on `keep`, normalized to unit trace.
pub fn partial_trace(psi: &StateVector, keep: &[Slot]) -> Result<DensityMatrix> {
    let mut keep: Vec<Slot> = keep.to_vec();
    keep.sort();
    keep.dedup();
    if keep.is_empty() || keep.len() >= psi.slots.len() {
        return Err(Error::InvalidTraceSubset);
    }
    let kept_idx: Vec<usize> = keep
        .iter()
        .map(|&s| psi.slot_index(s).ok_or(Error::MissingRegister(s)))
        .collect::<Result<_>>()?;
    let traced_idx: Vec<usize> = (0..psi.slots.len()).filter(|i| !kept_idx.contains(i)).collect();
    let npos_kept = keep.iter().filter(|s| s.is_position()).count();

    // traced configuration -> list of (kept label, amplitude)
    let mut groups: BTreeMap<Vec<i32>, Vec<(BasisState, C64)>> = BTreeMap::new();
    let mut labels: BTreeSet<BasisState> = BTreeSet::new();
    for (k, &a) in &psi.amps {
        let values: Vec<i32> = k.values().collect();
        let kept: Vec<i32> = kept_idx.iter().map(|&i| values[i]).collect();
        let traced: Vec<i32> = traced_idx.iter().map(|&i| values[i]).collect();
        let label = BasisState::from_values(npos_kept, &kept);
        labels.insert(label.clone());
        groups.entry(traced).or_default().push((label, a));
    }
    let labels: Vec<BasisState> = labels.into_iter().collect();
    let index: BTreeMap<&BasisState, usize> = labels.iter().enumerate().map(|(i, l)| (l, i)).collect();

    let dim = labels.len();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for terms in groups.values() {
        for (li, ai) in terms {
            for (lj, aj) in terms {
                rho[(index[li], index[lj])] += ai * aj.conj();
            }
        }
    }
    let tr = rho.trace().re;
    if tr < PRUNE_TOL {
        return Err(Error::ZeroNorm);
    }
    rho /= C64::new(tr, 0.0);
    Ok(DensityMatrix {
        subsystem: keep,
        labels,
        matrix: rho,
    })
}

/// Density matrix over a subsystem, indexed by the basis labels that occur in
/// its support.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    subsystem: Vec<Slot>,
    labels: Vec<BasisState>,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(subsystem: Vec<Slot>, labels: Vec<BasisState>, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != labels.len() || matrix.ncols() != labels.len() {
            return Err(Error::ShapeMismatch);
        }
        Ok(Self {
            subsystem,
            labels,
            matrix,
        })
    }

    pub fn subsystem(&self) -> &[Slot] {
        &self.subsystem
    }

    pub fn labels(&self) -> &[BasisState] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// `⟨row|ρ|col⟩`; zero for labels outside the support.
    pub fn entry(&self, row: &BasisState, col: &BasisState) -> C64 {
        let i = self.labels.iter().position(|l| l == row);
        let j = self.labels.iter().position(|l| l == col);
        match (i, j) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => C64::default(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let diff = &self.matrix - self.matrix.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        // symmetrize first so round-off cannot leak into the eigensolver
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Hermitian within 1e-12, eigenvalues >= -1e-10, unit trace within 1e-12.
    pub fn is_valid_state(&self) -> bool {
        let tr = self.trace();
        self.hermiticity_error() <= 1e-12
            && (tr.re - 1.0).abs() <= 1e-12
            && tr.im.abs() <= 1e-12
            && self.eigenvalues().iter().all(|&e| e >= -1e-10)
    }

    /// Largest entrywise difference over the union of both label sets.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.subsystem != other.subsystem {
            return Err(Error::ShapeMismatch);
        }
        let labels: BTreeSet<&BasisState> = self.labels.iter().chain(&other.labels).collect();
        let mut worst: f64 = 0.0;
        for r in &labels {
            for c in &labels {
                worst = worst.max((self.entry(r, c) - other.entry(r, c)).norm());
            }
        }
        Ok(worst)
    }
}
