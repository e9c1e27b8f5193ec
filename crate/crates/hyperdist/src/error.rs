//! Error types shared across the workbench.

use std::fmt;

/// Errors raised while parsing expression source text.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseError {
    /// Unexpected character or token; `pos` is a byte offset into the source.
    Syntax { pos: usize, message: String },
    /// Identifier that is neither a coordinate, an alias, nor `omega`.
    UnknownIdentifier { pos: usize, name: String },
    /// Coordinate index larger than the ambient dimension.
    CoordinateOutOfRange { pos: usize, index: usize, dimension: usize },
    /// `^` with a non-integer exponent.
    NonIntegerExponent { pos: usize, literal: String },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { pos, message } => write!(f, "syntax error at byte {pos}: {message}"),
            ParseError::UnknownIdentifier { pos, name } => {
                write!(f, "unknown identifier `{name}` at byte {pos}")
            }
            ParseError::CoordinateOutOfRange { pos, index, dimension } => write!(
                f,
                "coordinate x{index} at byte {pos} exceeds dimension {dimension}"
            ),
            ParseError::NonIntegerExponent { pos, literal } => {
                write!(f, "non-integer exponent `{literal}` at byte {pos}")
            }
        }
    }
}

impl std::error::Error for ParseError {}

/// Errors raised during numeric evaluation of expressions and nets.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// Point lies outside the net's domain box.
    OutsideDomain { point: Vec<f64>, axis: usize },
    /// A quotient (or negative power) hit a zero denominator with a nonzero numerator.
    DivisionByZero,
    /// Quadrature could not reach its tolerance within the node cap.
    ResolutionInsufficient { requested: usize, cap: usize, discrepancy: f64, threshold: f64 },
    /// Omega below 1 or not finite.
    BadOmega(f64),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::OutsideDomain { point, axis } => {
                write!(f, "point {point:?} outside domain on axis {}", axis + 1)
            }
            EvalError::DivisionByZero => write!(f, "division by zero"),
            EvalError::ResolutionInsufficient { requested, cap, discrepancy, threshold } => write!(
                f,
                "resolution insufficient: {requested} nodes (cap {cap}), doubling discrepancy {discrepancy:.3e} >= {threshold:.3e}; the requested omega exceeds desk scale for this integrand"
            ),
            EvalError::BadOmega(w) => write!(f, "omega must be finite and >= 1, got {w}"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Errors from test-function construction and pairing-level analyses.
#[derive(Debug, Clone, PartialEq)]
pub enum PairingError {
    /// Test-function support sticks out of the ambient domain.
    SupportOutsideDomain { axis: usize },
    /// Support verification failed: the expression does not vanish on the boundary shell.
    SupportLeak { value: f64, at: Vec<f64> },
    /// Normalization integral too far from 1 after scaling.
    NormalizationFailed { integral: f64 },
    /// Operation requires a battery of a different kind.
    WrongBatteryKind { expected: &'static str },
    /// Indicator probes cannot be differentiated.
    IndicatorDifferentiated,
    /// Too few samples to classify growth.
    TooFewSamples { got: usize, need: usize },
    /// Precondition `f in D'(Omega)` failed.
    NotSDistribution { probe: String },
    Eval(EvalError),
}

impl fmt::Display for PairingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairingError::SupportOutsideDomain { axis } => {
                write!(f, "test-function support exceeds the ambient domain on axis {}", axis + 1)
            }
            PairingError::SupportLeak { value, at } => {
                write!(f, "expression does not vanish outside its support: |{value:.3e}| at {at:?}")
            }
            PairingError::NormalizationFailed { integral } => {
                write!(f, "normalization failed, integral = {integral:.12e}")
            }
            PairingError::WrongBatteryKind { expected } => write!(f, "expected a {expected} battery"),
            PairingError::IndicatorDifferentiated => {
                write!(f, "indicator probes cannot be differentiated")
            }
            PairingError::TooFewSamples { got, need } => {
                write!(f, "too few samples: got {got}, need at least {need}")
            }
            PairingError::NotSDistribution { probe } => {
                write!(f, "net is not an S-distribution (probe {probe} pairs unbounded)")
            }
            PairingError::Eval(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PairingError {}

impl From<EvalError> for PairingError {
    fn from(e: EvalError) -> Self {
        PairingError::Eval(e)
    }
}

/// Errors from the decomposition pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum StructureError {
    /// The domain must be an open box for anti-derivative corrections.
    DomainNotBox,
    /// phi0 placement impossible (unbounded axis without a finite support hint).
    UnboundedAxis { axis: usize },
    /// K touches the boundary of the domain; no room to inflate.
    NoInflationRoom { axis: usize },
    /// Order estimation exceeded m_max.
    OrderExceedsMax { m_max: usize },
    /// primitive_order_zero requires estimated order zero.
    OrderNotZero { estimated: usize },
    /// Slice points violate the minimum-separation guard.
    SliceSeparation { min_gap: f64, required: f64 },
    /// Mollified slice margin violation.
    SliceMargin { center: f64, margin: f64 },
    /// Vandermonde solve residual too large.
    SolveResidual { residual: f64 },
    /// Point-value extraction at a point where f is not S-continuous.
    NotSContinuous { point: Vec<f64> },
    /// A serialized decomposition failed to parse.
    BadSerialization(String),
    Pairing(PairingError),
    Eval(EvalError),
}

impl fmt::Display for StructureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureError::DomainNotBox => write!(f, "domain must be an open box"),
            StructureError::UnboundedAxis { axis } => {
                write!(f, "axis {} is unbounded and no phi0 placement was given", axis + 1)
            }
            StructureError::NoInflationRoom { axis } => write!(
                f,
                "K touches the domain boundary on axis {}; shrink K before decomposing",
                axis + 1
            ),
            StructureError::OrderExceedsMax { m_max } => {
                write!(f, "estimated order exceeds m_max = {m_max}")
            }
            StructureError::OrderNotZero { estimated } => {
                write!(f, "primitive_order_zero requires order 0, estimated {estimated}")
            }
            StructureError::SliceSeparation { min_gap, required } => {
                write!(f, "slice points too close: gap {min_gap:.4e} < required {required:.4e}")
            }
            StructureError::SliceMargin { center, margin } => {
                write!(f, "slice center {center} closer than {margin} to the domain boundary")
            }
            StructureError::SolveResidual { residual } => {
                write!(f, "Vandermonde solve residual {residual:.3e} too large")
            }
            StructureError::NotSContinuous { point } => {
                write!(f, "net is not S-continuous at {point:?}")
            }
            StructureError::BadSerialization(msg) => {
                write!(f, "bad decomposition serialization: {msg}")
            }
            StructureError::Pairing(e) => write!(f, "{e}"),
            StructureError::Eval(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for StructureError {}

impl From<PairingError> for StructureError {
    fn from(e: PairingError) -> Self {
        StructureError::Pairing(e)
    }
}

impl From<EvalError> for StructureError {
    fn from(e: EvalError) -> Self {
        StructureError::Eval(e)
    }
}

/// Configuration-file and key-validation errors.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io(String),
    BadLine { line: usize, content: String },
    UnknownKey { line: usize, key: String },
    BadValue { line: usize, key: String, value: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config i/o error: {e}"),
            ConfigError::BadLine { line, content } => {
                write!(f, "config line {line} is not `key = value`: {content}")
            }
            ConfigError::UnknownKey { line, key } => write!(f, "unknown config key `{key}` on line {line}"),
            ConfigError::BadValue { line, key, value } => {
                write!(f, "bad value `{value}` for `{key}` on line {line}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}
