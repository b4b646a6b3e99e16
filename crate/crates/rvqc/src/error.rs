//! Error type shared across the codec toolkit.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("empty signal")]
    EmptySignal,

    #[error("non-finite samples in signal")]
    NonFiniteSignal,

    #[error("empty mel band: {n_mels} mels cannot be filled from {bins} bins")]
    EmptyMelBand { n_mels: usize, bins: usize },

    #[error("silent input: {0}")]
    SilentInput(&'static str),

    #[error("input shorter than one frame: {len} samples < stride {stride}")]
    InputShorterThanFrame { len: usize, stride: usize },

    #[error("input too short for scale: {len} samples < window {window}")]
    InputTooShortForScale { len: usize, window: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("discriminator output structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("bad magic: expected \"RVQC\"")]
    BadMagic,

    #[error("unsupported bitstream version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated payload: need {expected} bytes, have {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("oversized code value {code} for {bits}-bit field")]
    OversizedCode { code: u32, bits: u8 },

    #[error("model mismatch: bitstream was produced by a different model")]
    ModelMismatch,

    #[error("config hash mismatch: checkpoint does not match expected config")]
    ConfigHashMismatch,

    #[error("checkpoint missing tensor {0}")]
    MissingTensor(String),

    #[error("manifest error at line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("manifest invalid: {0}")]
    ManifestInvalid(String),

    #[error("mismatched evaluation sets: {0}")]
    MismatchedSets(String),

    #[error("unsupported WAV format: {0}")]
    UnsupportedWav(String),

    #[error("training diverged: {0} consecutive non-finite steps")]
    Diverged(usize),

    #[error("file {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<CodecError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("safetensors error: {0}")]
    SafeTensors(#[from] safetensors::SafeTensorError),
}

impl CodecError {
    /// Attach a file path to an error for better CLI diagnostics.
    pub fn for_file(self, path: impl Into<PathBuf>) -> Self {
        CodecError::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CodecError>;
