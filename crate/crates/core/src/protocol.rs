//! The two teleportation protocols end to end: shared-secret preparation, the
//! walk stages, sender measurements, parity, receiver corrections, and
//! decoding of the secret from the receivers' joint state.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{fidelity, tensor_product, BasisState, Slot, StateVector, SystemShape};
use crate::measure::{
    build_delta, build_lambda_h, build_lambda_p, build_theta, build_x_basis, build_z_basis, family_bounds, measure_all,
    measure_sequence, MeasurementBasis, Mode, OutcomeLabel, OutcomeRecord,
};
use crate::oracle;
use crate::walk::{
    apply_single_qubit, hadamard_rules, identity_rules, position_dependent_rules, stage_one, stage_one_steps,
    stage_two, stage_two_steps, CoinRule, StepSpec, Unitary2,
};

/// Fidelity threshold for a verified outcome.
pub const FIDELITY_TOL: f64 = 1e-10;

const SECRET_TOL: f64 = 1e-12;

/// The logical qubit `α|0⟩ + β|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecretSpec {
    alpha: C64,
    beta: C64,
}

impl SecretSpec {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > SECRET_TOL {
            return Err(Error::UnnormalizedSecret(norm));
        }
        Ok(Self { alpha, beta })
    }

    /// Rescales to unit norm first.
    pub fn normalized(alpha: C64, beta: C64) -> Result<Self> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if norm < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            alpha: alpha / norm,
            beta: beta / norm,
        })
    }

    /// Haar-random qubit.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u: f64 = rng.gen();
        let (a, b): (f64, f64) = (rng.gen::<f64>() * 2.0 * PI, rng.gen::<f64>() * 2.0 * PI);
        Self {
            alpha: C64::from_polar(u.sqrt(), a),
            beta: C64::from_polar((1.0 - u).sqrt(), b),
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    /// `β → e^{iφ}β`.
    pub fn with_beta_phase(&self, phi: f64) -> Self {
        Self {
            alpha: self.alpha,
            beta: self.beta * C64::from_polar(1.0, phi),
        }
    }

    /// `α|0⟩ + β|1⟩` on one coin.
    pub fn qubit(&self, shape: &SystemShape, coin: usize) -> Result<StateVector> {
        StateVector::coin_ket(shape, coin, self.alpha, self.beta)
    }
}

impl fmt::Display for SecretSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({:.4}{:+.4}i)|0⟩ + ({:.4}{:+.4}i)|1⟩",
            self.alpha.re, self.alpha.im, self.beta.re, self.beta.im
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Hadamard receiver coins.
    Homogeneous,
    /// Position-keyed receiver coins.
    PositionDependent,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Homogeneous, Variant::PositionDependent];

    pub fn receiver_rules(self, m: usize) -> Vec<CoinRule> {
        match self {
            Variant::Homogeneous => hadamard_rules(m),
            Variant::PositionDependent => position_dependent_rules(m),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Homogeneous => "homogeneous",
            Variant::PositionDependent => "position-dependent",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(Variant::Homogeneous),
            "position-dependent" => Ok(Variant::PositionDependent),
            other => Err(Error::Parse(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n: usize,
    pub m: usize,
    pub variant: Variant,
    /// 1-based receiver that carries the non-`Z` part of the correction.
    pub corrected_receiver: usize,
    /// Replace the `X` correction by `R_z(−θ)` (homogeneous variant only).
    #[serde(default)]
    pub rz_correction: bool,
}

impl ProtocolConfig {
    /// Defaults the corrected receiver to the last one.
    pub fn new(n: usize, m: usize, variant: Variant) -> Result<Self> {
        let cfg = Self {
            n,
            m,
            variant,
            corrected_receiver: m,
            rz_correction: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_corrected_receiver(mut self, j: usize) -> Result<Self> {
        self.corrected_receiver = j;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rz_correction(mut self, on: bool) -> Result<Self> {
        self.rz_correction = on;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(Error::InvalidConfig("m must be at least 2".into()));
        }
        if !(1..=self.m).contains(&self.corrected_receiver) {
            return Err(Error::InvalidConfig(format!(
                "corrected receiver {} is outside 1..={}",
                self.corrected_receiver, self.m
            )));
        }
        if self.rz_correction && self.variant != Variant::Homogeneous {
            return Err(Error::InvalidConfig(
                "the rotation correction only applies to the homogeneous variant".into(),
            ));
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<SystemShape> {
        SystemShape::new(self.n, self.m)
    }
}

/// `⊗|0⟩_p ⊗ (α|0…0⟩ + β|1…1⟩)_first coins ⊗ |0…0⟩_receiver coins`.
pub fn prepare_shared_secret(secret: &SecretSpec, n: usize, m: usize) -> Result<StateVector> {
    let shape = SystemShape::new(n, m)?;
    let firsts: Vec<Slot> = (0..n).map(Slot::Coin).collect();
    let shared = StateVector::from_terms(
        &shape,
        &firsts,
        [
            (BasisState::new(vec![], vec![0; n]), secret.alpha),
            (BasisState::new(vec![], vec![1; n]), secret.beta),
        ],
    )?;
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let mut psi = (1..n).try_fold(StateVector::position_ket(&shape, 0, 0)?, |acc, i| {
        tensor_product(&acc, &StateVector::position_ket(&shape, i, 0)?)
    })?;
    psi = tensor_product(&psi, &shared)?;
    for j in 0..m {
        psi = tensor_product(&psi, &StateVector::coin_ket(&shape, n + j, one, zero)?)?;
    }
    Ok(psi)
}

/// Both walk stages: identity first coins, then the variant's receiver coins.
pub fn evolve(config: &ProtocolConfig, psi: &StateVector) -> Result<StateVector> {
    let mid = stage_one(psi, &identity_rules(config.n))?;
    stage_two(&mid, &config.variant.receiver_rules(config.m))
}

/// Serializable step list of both stages.
#[derive(Clone, Debug, Serialize)]
pub struct Circuit {
    pub stage_one: Vec<StepSpec>,
    pub stage_two: Vec<StepSpec>,
}

pub fn circuit(config: &ProtocolConfig) -> Result<Circuit> {
    let shape = config.shape()?;
    Ok(Circuit {
        stage_one: stage_one_steps(&shape, &identity_rules(config.n))?,
        stage_two: stage_two_steps(&shape, &config.variant.receiver_rules(config.m))?,
    })
}

/// Per-sender bases, sender by sender: walker position then first coin.
pub fn sender_bases(config: &ProtocolConfig) -> Result<Vec<MeasurementBasis>> {
    let lead = match config.variant {
        Variant::Homogeneous => build_lambda_h(config.m)?,
        Variant::PositionDependent => build_lambda_p(config.m)?,
    };
    let mut bases = vec![lead, build_delta()];
    for i in 1..config.n {
        bases.push(build_theta().on(Slot::Position(i))?);
        bases.push(build_delta().on(Slot::Coin(i))?);
    }
    Ok(bases)
}

/// Parity of the helper results. Walker 0's result only counts for the
/// position-dependent variant, where it is a single bit.
pub fn compute_omega(variant: Variant, outcome: &OutcomeRecord) -> u8 {
    let helpers = outcome.p.iter().chain(&outcome.c).map(|&b| b as u32).sum::<u32>();
    let lead = match variant {
        Variant::Homogeneous => 0,
        Variant::PositionDependent => outcome.p1.branch as u32,
    };
    ((helpers + lead) % 2) as u8
}

/// Rotation angle of a homogeneous-variant outcome class:
/// `2πs/(m‴+1)` for the dotted family, `2πt/(m′+1)` for the other.
pub fn class_angle(m: usize, label: OutcomeLabel) -> f64 {
    let (mp, mppp) = family_bounds(m);
    let period = if label.branch == 0 { mppp + 1 } else { mp + 1 };
    2.0 * PI * label.index as f64 / period as f64
}

/// Single-receiver correction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReceiverOp {
    I,
    Z,
    X,
    /// `σ_z σ_x`: `X` acts first.
    ZX,
    /// `R_z(θ)`.
    Rz(f64),
    /// `R_z(θ) σ_z`: `Z` acts first.
    RzZ(f64),
}

impl ReceiverOp {
    pub fn unitary(self) -> Unitary2 {
        match self {
            ReceiverOp::I => Unitary2::identity(),
            ReceiverOp::Z => Unitary2::pauli_z(),
            ReceiverOp::X => Unitary2::pauli_x(),
            ReceiverOp::ZX => Unitary2::pauli_z().mul(&Unitary2::pauli_x()),
            ReceiverOp::Rz(t) => Unitary2::rz(t),
            ReceiverOp::RzZ(t) => Unitary2::rz(t).mul(&Unitary2::pauli_z()),
        }
    }
}

impl fmt::Display for ReceiverOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReceiverOp::I => write!(f, "I"),
            ReceiverOp::Z => write!(f, "Z"),
            ReceiverOp::X => write!(f, "X"),
            ReceiverOp::ZX => write!(f, "ZX"),
            ReceiverOp::Rz(t) => write!(f, "Rz({t:.4})"),
            ReceiverOp::RzZ(t) => write!(f, "Rz({t:.4})Z"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionPlan {
    pub omega: u8,
    pub ops: Vec<ReceiverOp>,
}

/// Pauli corrections. Homogeneous: receiver `j` takes `σ_z^ω σ_x`, the others
/// `σ_z^ω`. Position-dependent: receiver `j` takes `σ_z^ω`, the others nothing.
pub fn correction_plan(
    variant: Variant,
    m: usize,
    outcome: &OutcomeRecord,
    corrected_receiver: usize,
) -> CorrectionPlan {
    let omega = compute_omega(variant, outcome);
    let z = if omega == 1 { ReceiverOp::Z } else { ReceiverOp::I };
    let ops = (1..=m)
        .map(|j| match (variant, j == corrected_receiver) {
            (Variant::Homogeneous, true) => {
                if omega == 1 {
                    ReceiverOp::ZX
                } else {
                    ReceiverOp::X
                }
            }
            (Variant::Homogeneous, false) => z,
            (Variant::PositionDependent, true) => z,
            (Variant::PositionDependent, false) => ReceiverOp::I,
        })
        .collect();
    CorrectionPlan { omega, ops }
}

/// Homogeneous alternative: receiver `j` takes `R_z(−θ) σ_z^ω`, the others
/// `σ_z^ω`.
pub fn rz_correction_plan(m: usize, outcome: &OutcomeRecord, corrected_receiver: usize) -> CorrectionPlan {
    let omega = compute_omega(Variant::Homogeneous, outcome);
    let theta = class_angle(m, outcome.p1);
    let ops = (1..=m)
        .map(|j| match (j == corrected_receiver, omega) {
            (true, 1) => ReceiverOp::RzZ(-theta),
            (true, _) => ReceiverOp::Rz(-theta),
            (false, 1) => ReceiverOp::Z,
            (false, _) => ReceiverOp::I,
        })
        .collect();
    CorrectionPlan { omega, ops }
}

pub fn plan_for(config: &ProtocolConfig, outcome: &OutcomeRecord) -> CorrectionPlan {
    if config.rz_correction {
        rz_correction_plan(config.m, outcome, config.corrected_receiver)
    } else {
        correction_plan(config.variant, config.m, outcome, config.corrected_receiver)
    }
}

/// Applies each receiver's operator to its coin.
pub fn apply_plan(state: &StateVector, plan: &CorrectionPlan) -> Result<StateVector> {
    let n = state.shape().n();
    plan.ops.iter().enumerate().try_fold(state.clone(), |acc, (j, op)| {
        if *op == ReceiverOp::I {
            Ok(acc)
        } else {
            apply_single_qubit(&acc, n + j, &op.unitary())
        }
    })
}

/// One enumerated (or sampled) outcome of a protocol run.
#[derive(Clone, Debug, Serialize)]
pub struct OutcomeResult {
    pub outcome: OutcomeRecord,
    pub plan: CorrectionPlan,
    pub residual: StateVector,
    pub corrected: StateVector,
    pub target: StateVector,
    pub fidelity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    pub config: ProtocolConfig,
    pub secret: SecretSpec,
    pub outcomes: Vec<OutcomeResult>,
    pub min_fidelity: f64,
    pub total_probability: f64,
}

impl RunResult {
    pub fn passed(&self) -> bool {
        self.min_fidelity >= 1.0 - FIDELITY_TOL
    }
}

/// Prepares, evolves, measures every sender register and corrects. Each
/// corrected receiver state is compared with the closed-form target.
pub fn run_protocol(config: &ProtocolConfig, secret: &SecretSpec, mode: Mode, seed: u64) -> Result<RunResult> {
    config.validate()?;
    let psi = evolve(config, &prepare_shared_secret(secret, config.n, config.m)?)?;
    let branches = measure_all(&psi, &sender_bases(config)?, mode, seed)?;
    let outcomes: Vec<OutcomeResult> = branches
        .into_par_iter()
        .map(|(outcome, residual)| {
            let plan = plan_for(config, &outcome);
            let corrected = apply_plan(&residual, &plan)?;
            let target = oracle::expected_corrected_state(config, &outcome, secret)?;
            let fidelity = fidelity(&target, &corrected)?;
            Ok(OutcomeResult {
                outcome,
                plan,
                residual,
                corrected,
                target,
                fidelity,
            })
        })
        .collect::<Result<_>>()?;
    let min_fidelity = outcomes.iter().map(|o| o.fidelity).fold(f64::INFINITY, f64::min);
    let total_probability = outcomes.iter().map(|o| o.outcome.prob).sum();
    Ok(RunResult {
        config: config.clone(),
        secret: *secret,
        outcomes,
        min_fidelity,
        total_probability,
    })
}

/// How the secret sits in a corrected receiver state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Layout {
    /// `α|0…0⟩ + β|1…1⟩`.
    Ghz,
    /// Corrected homogeneous-variant output of the given outcome class.
    Homogeneous {
        m: usize,
        class: OutcomeLabel,
        /// 1-based.
        corrected_receiver: usize,
        rz: bool,
    },
}

impl Layout {
    pub fn for_outcome(config: &ProtocolConfig, outcome: &OutcomeRecord) -> Self {
        match config.variant {
            Variant::PositionDependent => Layout::Ghz,
            Variant::Homogeneous => Layout::Homogeneous {
                m: config.m,
                class: outcome.p1,
                corrected_receiver: config.corrected_receiver,
                rz: config.rz_correction,
            },
        }
    }
}

/// Helpers (every receiver except `designated`, 1-based) measure and report
/// `helper_bits` in ascending receiver order; the designated receiver then
/// undoes the residual operator. Returns its normalized qubit.
pub fn reconstruct_secret(
    state: &StateVector,
    layout: &Layout,
    designated: usize,
    helper_bits: &[u8],
) -> Result<StateVector> {
    let shape = state.shape().clone();
    let m = shape.m();
    if !(1..=m).contains(&designated) {
        return Err(Error::InvalidConfig(format!(
            "designated receiver {designated} outside 1..={m}"
        )));
    }
    if helper_bits.len() != m - 1 {
        return Err(Error::InvalidConfig(format!(
            "expected {} helper bits, got {}",
            m - 1,
            helper_bits.len()
        )));
    }
    let helpers: Vec<usize> = (1..=m).filter(|&j| j != designated).collect();
    let mut qubit = state.clone();
    for (&j, &bit) in helpers.iter().zip(helper_bits) {
        let coin = shape.n() + j - 1;
        let basis = match layout {
            Layout::Ghz => build_x_basis(coin),
            Layout::Homogeneous { .. } => build_z_basis(coin),
        };
        let k = basis
            .labels
            .iter()
            .position(|l| l.branch == bit)
            .ok_or(Error::ImpossibleOutcome)?;
        let projected = qubit.contract_slot(Slot::Coin(coin), |x| {
            basis.vectors[k]
                .iter()
                .find(|(y, _)| *y == x)
                .map(|(_, a)| a.conj())
                .unwrap_or_default()
        })?;
        if projected.norm_sqr() < 1e-20 {
            return Err(Error::ImpossibleOutcome);
        }
        qubit = projected;
    }
    let coin = shape.n() + designated - 1;
    let decode = decoding_unitary(layout, designated, helper_bits, &helpers);
    apply_single_qubit(&qubit, coin, &decode)?.normalize()
}

fn decoding_unitary(layout: &Layout, designated: usize, bits: &[u8], helpers: &[usize]) -> Unitary2 {
    let parity: u32 = bits.iter().map(|&b| b as u32).sum();
    match *layout {
        Layout::Ghz => {
            if parity % 2 == 1 {
                Unitary2::pauli_z()
            } else {
                Unitary2::identity()
            }
        }
        Layout::Homogeneous {
            m,
            class,
            corrected_receiver,
            rz,
        } => {
            let theta = class_angle(m, class);
            // parity of the other receivers before the correction
            let flipped = !rz && helpers.contains(&corrected_receiver);
            let even = (parity + flipped as u32).is_multiple_of(2);
            let rotated = (class.branch == 0) == even;
            let residual = if rotated {
                Unitary2::rz(theta)
            } else {
                Unitary2::pauli_x()
            };
            let applied = match (designated == corrected_receiver, rz) {
                (false, _) => Unitary2::identity(),
                (true, false) => Unitary2::pauli_x(),
                (true, true) => Unitary2::rz(-theta),
            };
            applied.mul(&residual).adjoint()
        }
    }
}

/// One helper outcome of [`reconstruct_all`].
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub helper_bits: Vec<u8>,
    pub probability: f64,
    pub qubit: StateVector,
}

/// Every helper outcome with nonzero probability and the decoded qubit.
pub fn reconstruct_all(state: &StateVector, layout: &Layout, designated: usize) -> Result<Vec<Reconstruction>> {
    let shape = state.shape();
    let helpers: Vec<usize> = (1..=shape.m()).filter(|&j| j != designated).collect();
    let bases: Vec<MeasurementBasis> = helpers
        .iter()
        .map(|&j| {
            let coin = shape.n() + j - 1;
            match layout {
                Layout::Ghz => build_x_basis(coin),
                Layout::Homogeneous { .. } => build_z_basis(coin),
            }
        })
        .collect();
    let coin = shape.n() + designated - 1;
    measure_sequence(&state.normalize()?, &bases)?
        .into_iter()
        .map(|b| {
            let bits: Vec<u8> = b.labels.iter().map(|l| l.branch).collect();
            let decode = decoding_unitary(layout, designated, &bits, &helpers);
            Ok(Reconstruction {
                qubit: apply_single_qubit(&b.residual, coin, &decode)?.normalize()?,
                helper_bits: bits,
                probability: b.probability,
            })
        })
        .collect()
}
