use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative loss: {0} dB")]
    NegativeLoss(f64),

    #[error("negative gain: {0} dB")]
    NegativeGain(f64),

    #[error("amplifier applied to a quantum-level frame (slot {0})")]
    AmplifyQuantumFrame(u64),

    #[error("eve intercept applied to a classical frame (slot {0})")]
    InterceptClassicalFrame(u64),

    #[error("unknown detector preset '{0}'")]
    UnknownPreset(String),

    #[error("invalid detector parameters: {0}")]
    InvalidDetector(String),

    #[error("thermal sub-model is disabled")]
    ThermalDisabled,

    #[error("attack infeasible: max P_always = {max_always_uw:.1} uW >= 2*min P_never = {twice_min_never_uw:.1} uW")]
    Infeasible {
        max_always_uw: f64,
        twice_min_never_uw: f64,
    },

    #[error("rate-starved attack: eve click rate {eve_rate}/2 < expected bob rate {expected_rate}")]
    RateStarved { eve_rate: f64, expected_rate: f64 },

    #[error("mismatched slot counts: alice {alice} vs bob {bob}")]
    SlotCountMismatch { alice: usize, bob: usize },

    #[error("empty sifted key")]
    EmptySiftedKey,

    #[error("QBER {qber:.4} at or above abort threshold {threshold:.4}")]
    QberAbort { qber: f64, threshold: f64 },

    #[error("privacy amplification output length {out_len} exceeds key length {key_len}")]
    OutputTooLong { out_len: usize, key_len: usize },

    #[error("toeplitz seed length {got}, need {need}")]
    BadSeedLength { got: usize, need: usize },

    #[error("transcript incomplete: missing {0}")]
    TruncatedTranscript(&'static str),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("empty sweep grid")]
    EmptySweepGrid,

    #[error("unknown sweep parameter path '{0}'")]
    UnknownSweepParam(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
