//! Brute-force reference: a dense amplitude array over every register, local
//! operators assembled as explicit Kronecker products, and measurement by
//! contraction with independently written bras.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{BasisState, Slot, StateVector, SystemShape};
use crate::protocol::{ProtocolConfig, SecretSpec, Variant};

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// Dense vector over the listed slots, first slot most significant.
#[derive(Clone, Debug)]
pub struct DenseState {
    shape: SystemShape,
    slots: Vec<Slot>,
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl DenseState {
    fn local_dim(shape: &SystemShape, slot: Slot) -> usize {
        match slot {
            Slot::Position(i) => 2 * shape.bound(i) as usize + 1,
            Slot::Coin(_) => 2,
        }
    }

    fn local_index(shape: &SystemShape, slot: Slot, value: i32) -> usize {
        match slot {
            Slot::Position(i) => (value + shape.bound(i)) as usize,
            Slot::Coin(_) => value as usize,
        }
    }

    fn local_value(shape: &SystemShape, slot: Slot, idx: usize) -> i32 {
        match slot {
            Slot::Position(i) => idx as i32 - shape.bound(i),
            Slot::Coin(_) => idx as i32,
        }
    }

    pub fn zeros(shape: &SystemShape, slots: &[Slot]) -> Self {
        let dims: Vec<usize> = slots.iter().map(|&s| Self::local_dim(shape, s)).collect();
        let total = dims.iter().product();
        Self {
            shape: shape.clone(),
            slots: slots.to_vec(),
            dims,
            amps: vec![zero(); total],
        }
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    fn factor(&self, slot: Slot) -> Result<usize> {
        self.slots
            .iter()
            .position(|&s| s == slot)
            .ok_or(Error::MissingRegister(slot))
    }

    fn flat_index(&self, values: &[i32]) -> usize {
        let strides = self.strides();
        self.slots
            .iter()
            .zip(values)
            .zip(&strides)
            .map(|((&s, &v), st)| Self::local_index(&self.shape, s, v) * st)
            .sum()
    }

    pub fn set(&mut self, values: &[i32], amp: C64) {
        let i = self.flat_index(values);
        self.amps[i] = amp;
    }

    pub fn from_sparse(psi: &StateVector) -> Self {
        let mut d = Self::zeros(psi.shape(), psi.slots());
        for (k, a) in psi.iter() {
            let values: Vec<i32> = k
                .positions
                .iter()
                .copied()
                .chain(k.coins.iter().map(|&b| b as i32))
                .collect();
            d.set(&values, *a);
        }
        d
    }

    pub fn to_sparse(&self) -> Result<StateVector> {
        let strides = self.strides();
        let npos = self.slots.iter().filter(|s| s.is_position()).count();
        let terms = self
            .amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(flat, a)| {
                let values: Vec<i32> = self
                    .slots
                    .iter()
                    .zip(&strides)
                    .zip(&self.dims)
                    .map(|((&s, st), d)| Self::local_value(&self.shape, s, (flat / st) % d))
                    .collect();
                let key = BasisState::new(
                    values[..npos].to_vec(),
                    values[npos..].iter().map(|&v| v as u8).collect(),
                );
                (key, *a)
            });
        StateVector::from_terms(&self.shape, &self.slots, terms.collect::<Vec<_>>())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies `op` to the listed registers (first one most significant in
    /// `op`'s index).
    pub fn apply_local(&mut self, targets: &[Slot], op: &DMatrix<C64>) -> Result<()> {
        let strides = self.strides();
        let idx: Vec<usize> = targets.iter().map(|&s| self.factor(s)).collect::<Result<_>>()?;
        let local_dims: Vec<usize> = idx.iter().map(|&f| self.dims[f]).collect();
        let dim: usize = local_dims.iter().product();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(Error::ShapeMismatch);
        }
        // offset of each local basis index
        let offsets: Vec<usize> = (0..dim)
            .map(|mut l| {
                let mut off = 0;
                for k in (0..idx.len()).rev() {
                    off += (l % local_dims[k]) * strides[idx[k]];
                    l /= local_dims[k];
                }
                off
            })
            .collect();
        let mut local = DVector::<C64>::zeros(dim);
        for base in 0..self.amps.len() {
            if idx.iter().any(|&f| !(base / strides[f]).is_multiple_of(self.dims[f])) {
                continue;
            }
            for (l, off) in offsets.iter().enumerate() {
                local[l] = self.amps[base + off];
            }
            let out = op * &local;
            for (l, off) in offsets.iter().enumerate() {
                self.amps[base + off] = out[l];
            }
        }
        Ok(())
    }

    /// Contracts one register with `bra` (given as the ket; it is conjugated
    /// here) and drops it.
    pub fn contract(&self, slot: Slot, ket: &DVector<C64>) -> Result<DenseState> {
        let f = self.factor(slot)?;
        let strides = self.strides();
        let slots: Vec<Slot> = self.slots.iter().copied().filter(|&s| s != slot).collect();
        let mut out = DenseState::zeros(&self.shape, &slots);
        let out_strides = out.strides();
        for (flat, a) in self.amps.iter().enumerate() {
            if a.norm() == 0.0 {
                continue;
            }
            let x = (flat / strides[f]) % self.dims[f];
            let c = ket[x].conj();
            if c.norm() == 0.0 {
                continue;
            }
            let mut target = 0;
            let mut o = 0;
            for (k, (&st, &d)) in strides.iter().zip(&self.dims).enumerate() {
                if k == f {
                    continue;
                }
                target += ((flat / st) % d) * out_strides[o];
                o += 1;
            }
            out.amps[target] += c * a;
        }
        Ok(out)
    }

    fn scale(&mut self, s: f64) {
        for a in &mut self.amps {
            *a *= s;
        }
    }
}

/// Truncated right shift on `2b+1` sites.
pub fn shift_matrix(bound: i32) -> DMatrix<C64> {
    let d = 2 * bound as usize + 1;
    DMatrix::from_fn(d, d, |r, c| if r == c + 1 { one() } else { zero() })
}

fn projector(bit: usize) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |r, c| if r == bit && c == bit { one() } else { zero() })
}

/// `S ⊗ |0⟩⟨0| + S† ⊗ |1⟩⟨1|` on (position, coin).
pub fn conditional_shift_matrix(bound: i32) -> DMatrix<C64> {
    let s = shift_matrix(bound);
    s.kronecker(&projector(0)) + s.adjoint().kronecker(&projector(1))
}

pub fn matrix2(u: [[C64; 2]; 2]) -> DMatrix<C64> {
    DMatrix::from_fn(2, 2, |r, c| u[r][c])
}

pub fn hadamard() -> DMatrix<C64> {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    matrix2([[h, h], [h, -h]])
}

pub fn pauli_x() -> DMatrix<C64> {
    matrix2([[zero(), one()], [one(), zero()]])
}

pub fn pauli_z() -> DMatrix<C64> {
    matrix2([[one(), zero()], [zero(), -one()]])
}

/// `Σ_x |x⟩⟨x| ⊗ C(x)` on (position, coin), with the identity where the
/// table has no entry (those sites carry no amplitude when it is applied).
pub fn position_controlled(bound: i32, table: &[(i32, DMatrix<C64>)]) -> DMatrix<C64> {
    let d = 2 * bound as usize + 1;
    let mut out = DMatrix::<C64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        let x = i as i32 - bound;
        let site = DMatrix::from_fn(d, d, |r, c| if r == i && c == i { one() } else { zero() });
        let coin = table
            .iter()
            .find(|(y, _)| *y == x)
            .map(|(_, u)| u.clone())
            .unwrap_or_else(|| DMatrix::identity(2, 2));
        out += site.kronecker(&coin);
    }
    out
}

/// Evolved full-system state, built from scratch.
pub fn evolve(config: &ProtocolConfig, secret: &SecretSpec) -> Result<DenseState> {
    let (n, m) = (config.n, config.m);
    let shape = SystemShape::new(n, m)?;
    let mut d = DenseState::zeros(&shape, &shape.all_slots());
    let mut zeros = vec![0; 2 * n + m];
    d.set(&zeros, secret.alpha());
    for v in &mut zeros[n..2 * n] {
        *v = 1;
    }
    d.set(&zeros, secret.beta());

    for i in 0..n {
        d.apply_local(&[Slot::Coin(i)], &DMatrix::identity(2, 2))?;
        d.apply_local(
            &[Slot::Position(i), Slot::Coin(i)],
            &conditional_shift_matrix(shape.bound(i)),
        )?;
    }
    let b0 = shape.bound(0);
    for j in 0..m {
        let coin = Slot::Coin(n + j);
        match config.variant {
            Variant::Homogeneous => d.apply_local(&[coin], &hadamard())?,
            Variant::PositionDependent => {
                let k = j as i32 + 1;
                let table = [(k, DMatrix::identity(2, 2)), (-k, pauli_x())];
                d.apply_local(&[Slot::Position(0), coin], &position_controlled(b0, &table))?;
            }
        }
        d.apply_local(&[Slot::Position(0), coin], &conditional_shift_matrix(b0))?;
    }
    Ok(d)
}

fn site_vector(bound: i32, amps: &[(i32, C64)]) -> DVector<C64> {
    let mut v = DVector::zeros(2 * bound as usize + 1);
    for &(x, a) in amps {
        v[(x + bound) as usize] += a;
    }
    v
}

/// Walker-0 bras with their labels `(branch, index)`.
pub fn lead_kets(config: &ProtocolConfig) -> Vec<((u8, usize), DVector<C64>)> {
    let m = config.m as i32;
    let bound = m + 1;
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    match config.variant {
        Variant::PositionDependent => vec![
            ((0, 0), site_vector(bound, &[(bound, h), (-bound, h)])),
            ((1, 0), site_vector(bound, &[(bound, h), (-bound, -h)])),
        ],
        Variant::Homogeneous => {
            let mut out = Vec::new();
            let count_dot = ((m - 1) / 2 + 2) as usize;
            let count_ddot = (m / 2 + 1) as usize;
            for (branch, top, count) in [(0u8, m + 1, count_dot), (1u8, m - 1, count_ddot)] {
                for s in 0..count {
                    let amps: Vec<(i32, C64)> = (0..count)
                        .map(|l| {
                            let ang = -2.0 * PI * (l * s) as f64 / count as f64;
                            (top - 4 * l as i32, C64::from_polar(1.0 / (count as f64).sqrt(), ang))
                        })
                        .collect();
                    out.push(((branch, s), site_vector(bound, &amps)));
                }
            }
            out
        }
    }
}

/// One enumerated outcome of the dense pipeline.
#[derive(Clone, Debug)]
pub struct DenseOutcome {
    pub p1: (u8, usize),
    pub p: Vec<u8>,
    pub c: Vec<u8>,
    pub prob: f64,
    pub omega: u8,
    /// Normalized receiver state after correction.
    pub corrected: StateVector,
}

/// Evolve, contract every sender register against every bra, correct.
pub fn run(config: &ProtocolConfig, secret: &SecretSpec) -> Result<Vec<DenseOutcome>> {
    let (n, m) = (config.n, config.m);
    let evolved = evolve(config, secret)?;
    let total = evolved.norm_sqr();
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let theta_bras = [site_vector(1, &[(1, h), (-1, h)]), site_vector(1, &[(1, h), (-1, -h)])];
    let mut delta_bras = [DVector::zeros(2), DVector::zeros(2)];
    delta_bras[0][1] = h;
    delta_bras[0][0] = h;
    delta_bras[1][1] = h;
    delta_bras[1][0] = -h;

    let mut out = Vec::new();
    for (label, lead) in lead_kets(config) {
        let after_lead = evolved.contract(Slot::Position(0), &lead)?;
        for pbits in 0..1usize << (n - 1) {
            for cbits in 0..1usize << n {
                let p: Vec<u8> = (0..n - 1).map(|i| ((pbits >> i) & 1) as u8).collect();
                let c: Vec<u8> = (0..n).map(|i| ((cbits >> i) & 1) as u8).collect();
                let mut st = after_lead.clone();
                for (i, &b) in p.iter().enumerate() {
                    st = st.contract(Slot::Position(i + 1), &theta_bras[b as usize])?;
                }
                for (i, &b) in c.iter().enumerate() {
                    st = st.contract(Slot::Coin(i), &delta_bras[b as usize])?;
                }
                let prob = st.norm_sqr() / total;
                if prob < 1e-12 {
                    continue;
                }
                let helpers: u32 = p.iter().chain(&c).map(|&b| b as u32).sum();
                let omega = match config.variant {
                    Variant::Homogeneous => helpers % 2,
                    Variant::PositionDependent => (helpers + label.0 as u32) % 2,
                } as u8;
                let j = config.corrected_receiver - 1;
                for r in 0..m {
                    let coin = Slot::Coin(n + r);
                    let op = match (config.variant, r == j) {
                        (Variant::Homogeneous, true) if config.rz_correction => {
                            let period = if label.0 == 0 { (m - 1) / 2 + 2 } else { m / 2 + 1 };
                            let theta = 2.0 * PI * label.1 as f64 / period as f64;
                            let rz = matrix2([[one(), zero()], [zero(), C64::from_polar(1.0, -theta)]]);
                            if omega == 1 {
                                rz * pauli_z()
                            } else {
                                rz
                            }
                        }
                        (Variant::Homogeneous, true) => {
                            if omega == 1 {
                                pauli_z() * pauli_x()
                            } else {
                                pauli_x()
                            }
                        }
                        (Variant::Homogeneous, false) | (Variant::PositionDependent, true) => {
                            if omega == 1 {
                                pauli_z()
                            } else {
                                DMatrix::identity(2, 2)
                            }
                        }
                        (Variant::PositionDependent, false) => DMatrix::identity(2, 2),
                    };
                    st.apply_local(&[coin], &op)?;
                }
                let norm = st.norm_sqr().sqrt();
                st.scale(1.0 / norm);
                out.push(DenseOutcome {
                    p1: label,
                    p,
                    c,
                    prob,
                    omega,
                    corrected: st.to_sparse()?,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_shift_is_unitary_inside_the_box() {
        let e = conditional_shift_matrix(3);
        // columns that do not fall off the edge keep unit norm
        let d = 7;
        for x in 0..d {
            for b in 0..2 {
                let col = e.column(2 * x + b);
                let edge = (b == 0 && x == d - 1) || (b == 1 && x == 0);
                let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum();
                assert_eq!(norm, if edge { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn round_trip_through_sparse() {
        let shape = SystemShape::new(2, 2).unwrap();
        let psi = crate::oracle::closed_form_h(2, 2, &SecretSpec::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap())
            .unwrap();
        let d = DenseState::from_sparse(&psi);
        assert_eq!(d.len(), 7 * 3 * 16);
        let back = d.to_sparse().unwrap();
        assert!(back.max_abs_diff(&psi).unwrap() < 1e-15);
        assert_eq!(back.shape(), &shape);
    }

    #[test]
    fn two_by_two_position_dependent_run() {
        let cfg = ProtocolConfig::new(2, 2, Variant::PositionDependent).unwrap();
        let secret = SecretSpec::new(C64::new(0.6, 0.0), C64::new(0.8, 0.0)).unwrap();
        let out = run(&cfg, &secret).unwrap();
        assert_eq!(out.len(), 16);
        let total: f64 = out.iter().map(|o| o.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let target = crate::oracle::ghz_state(&SystemShape::new(2, 2).unwrap(), &secret).unwrap();
        for o in &out {
            assert!((crate::hilbert::fidelity(&o.corrected, &target).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
