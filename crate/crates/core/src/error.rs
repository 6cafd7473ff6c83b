use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("operands belong to different fields or truncation orders")]
    DescriptorMismatch,
    #[error("invalid field descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("unsupported order {0}")]
    UnsupportedOrder(u64),
    #[error("valuations differ: {0} vs {1}")]
    ValuationMismatch(String, String),
    #[error("jet is not a unit")]
    NotAUnit,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("axiom violation ({axiom}): {witness}")]
    AxiomViolation { axiom: &'static str, witness: String },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("plane has no coordinates (not constructed)")]
    NotConstructed,
    #[error("profile does not have exactly two minimizers")]
    NotTwoMinimizers,
    #[error("zero entry where a nonzero residue is required")]
    ZeroEntry,
    #[error("zero gauge scalar")]
    ZeroScalar,
    #[error("not a zero rectangle")]
    NotAZeroRectangle,
    #[error("residue model zero pattern disagrees with incidence at ({0}, {1})")]
    ZeroPatternMismatch(usize, usize),
    #[error("truncation too shallow to decide the leading coefficient")]
    TruncationTooShallow,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid choice: {0}")]
    InvalidChoice(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("model rank {0} exceeds 3")]
    RankTooHigh(usize),
    #[error("not a cycle: {0}")]
    NotACycle(String),
    #[error("invalid chart data: {0}")]
    InvalidChartData(String),
    #[error("chart is active: {0}")]
    ChartActive(String),
    #[error("charts do not overlap")]
    NoOverlap,
    #[error("overlap point lies on a base column")]
    OverlapOnBaseColumn,
    #[error("no valid bridge lines")]
    NoValidBridge,
    #[error("search exhausted")]
    SearchExhausted,
    #[error("scan too large for q={0}; pass the long-run flag")]
    ScanTooLarge(usize),
    #[error("rectangle is not degenerate")]
    NotDegenerate,
    #[error("characteristic 3: assertions are informational only")]
    CharThree,
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
