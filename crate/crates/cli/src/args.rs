use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use walkport_core::measure::Mode;
use walkport_core::protocol::Variant;

#[derive(Parser, Debug)]
#[command(
    name = "walkport",
    version,
    about = "Quantum-walk teleportation of a shared secret from n senders to m receivers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the protocol and check every corrected receiver state.
    Run(RunArgs),
    /// Check the simulator against the closed forms and identities.
    Verify(VerifyArgs),
    /// Phase-blindness sweep over measured senders and probe subsets.
    Security(SecurityArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum VariantArg {
    Homogeneous,
    PositionDependent,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Homogeneous => Variant::Homogeneous,
            VariantArg::PositionDependent => Variant::PositionDependent,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Enumerate,
    Sample,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Enumerate => Mode::Enumerate,
            ModeArg::Sample => Mode::Sample,
        }
    }
}

/// `RE,IM`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let (re, im) = s.split_once(',').ok_or_else(|| format!("expected RE,IM, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let z = C64::new(num(re)?, num(im)?);
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(z)
}

#[derive(Args, Debug, Clone)]
pub struct SecretArgs {
    /// Amplitude of |0⟩ as RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "0.6,0")]
    pub alpha: C64,
    /// Amplitude of |1⟩ as RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "0,0.8")]
    pub beta: C64,
    /// Rescale α, β to unit norm instead of rejecting them.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub secret: SecretArgs,
    #[arg(long, value_enum, default_value = "enumerate")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receiver (1-based) that takes the non-Z correction; defaults to m.
    #[arg(long)]
    pub corrected_receiver: Option<usize>,
    /// Homogeneous variant: undo the outcome rotation with R_z(−θ) instead of X.
    #[arg(long)]
    pub rz_correction: bool,
    /// Include the step list of both walk stages in the report.
    #[arg(long)]
    pub dump_circuit: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, required_unless_present = "all")]
    pub n: Option<usize>,
    #[arg(long, required_unless_present = "all")]
    pub m: Option<usize>,
    /// Every shape with n ≤ 3 and m ≤ 4.
    #[arg(long, conflicts_with_all = ["n", "m"])]
    pub all: bool,
    /// Random secrets per check, on top of |0⟩ and |1⟩.
    #[arg(long, default_value_t = 4)]
    pub secrets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SecurityArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, value_enum)]
    pub variant: VariantArg,
    #[command(flatten)]
    pub secret: SecretArgs,
    /// Senders (1-based) who measure; every nonempty subset when omitted.
    #[arg(long, value_delimiter = ',')]
    pub measured: Option<Vec<usize>>,
    /// Probe parties such as r1,s2, or ALL_REMAINING; every strict subset
    /// when omitted.
    #[arg(long, value_delimiter = ',')]
    pub probe: Option<Vec<String>>,
    /// Largest probe subset to enumerate.
    #[arg(long, conflicts_with = "probe")]
    pub max_probe_size: Option<usize>,
    /// Keep per-scenario rows in the report.
    #[arg(long)]
    pub details: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
