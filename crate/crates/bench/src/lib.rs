//! Fixtures shared by the benches in `benches/`.

use walkport_core::protocol::{ProtocolConfig, SecretSpec, Variant};
use walkport_core::C64;

/// Shapes benchmarked for every operation, smallest first.
pub const SHAPES: [(usize, usize); 4] = [(1, 2), (2, 2), (2, 4), (3, 4)];

pub fn secret() -> SecretSpec {
    SecretSpec::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).expect("unit norm")
}

pub fn config(n: usize, m: usize, variant: Variant) -> ProtocolConfig {
    ProtocolConfig::new(n, m, variant).expect("benchmark shapes are valid")
}
