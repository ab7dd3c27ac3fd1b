use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid body model: {0}")]
    InvalidModel(String),
    #[error("pose has {found} joints, model expects {expected}")]
    JointCountMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate at joint {joint}")]
    NonFiniteCoordinate { joint: usize },
    #[error("sequence needs at least 2 frames, got {0}")]
    SequenceTooShort(usize),
    #[error("stride must be at least 1")]
    InvalidStride,
    #[error("degenerate (collinear) triplet")]
    DegenerateTriplet,
    #[error("singular homography (|det| = {0:e})")]
    SingularHomography(f64),
    #[error("no eigenvalue pair with |a + b| above threshold")]
    NumericalDegeneracy,
    #[error("only {valid} of {total} triplets valid, {required} required")]
    TooFewValidTriplets {
        valid: usize,
        total: usize,
        required: usize,
    },
    #[error("every triplet is masked")]
    AllTripletsMasked,
    #[error("error vector has {found} entries, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("alignment index ({target}, {reference}) out of range ({target_len}, {reference_len})")]
    IndexMismatch {
        target: usize,
        reference: usize,
        target_len: usize,
        reference_len: usize,
    },
    #[error("invalid alignment path: {0}")]
    InvalidAlignment(String),
    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),
    #[error("tau must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("empty group")]
    EmptyGroup,
    #[error("no other action groups")]
    NoOtherGroups,
    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),
    #[error("invalid objective parameter: {0}")]
    InvalidParameter(String),
    #[error("reference database is empty")]
    EmptyDatabase,
    #[error("no reference entry could be scored")]
    NoScoredEntries,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("invalid camera rig: {0}")]
    InvalidRig(String),
    #[error("procedural action needs at least 8 frames, got {0}")]
    TooFewFrames(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
