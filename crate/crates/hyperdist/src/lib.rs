//! A symbolic-numeric workbench for omega-parametrized nets of smooth
//! functions: the computable model of nonstandard representatives of
//! Schwartz distributions.
//!
//! A net is an expression over coordinates, the asymptotic parameter
//! `omega`, elementary functions, bump primitives, and anti-derivative
//! nodes, together with an open box domain. The crate provides
//!
//! - an expression language closed under exact partial differentiation
//!   ([`expr`]),
//! - resolution-aware quadrature over boxes and along axes ([`quad`]),
//! - asymptotic classification along a geometric omega grid: infinitesimal /
//!   finite / infinite, standard parts, S-continuity moduli ([`net`]),
//! - test-function batteries, distributional pairing, and the two order
//!   estimators ([`pairing`]),
//! - the constructive decompositions: corrected anti-derivatives, order
//!   reduction, bounded and S-continuous primitives, local structure,
//!   mollified-slice Vandermonde reconstruction, zero-representative
//!   decompositions, and point values ([`structure`]).
//!
//! Every asymptotic verdict is a finite surrogate for a quantifier over a
//! genuinely infinite parameter; reports carry the probe batteries and grids
//! used so the soundness caveat is explicit.

pub mod config;
pub mod error;
pub mod expr;
pub mod net;
pub mod pairing;
pub mod quad;
pub mod structure;

pub use config::RunConfig;
pub use expr::{parse, DomainBox, Expression, NetFunction};
pub use net::{classify_growth, s_modulus, GrowthClass, GrowthLabel, NetConfig, OmegaGrid};
pub use pairing::{
    build_test_function, dprime_close, estimate_distributional_order, estimate_s_order,
    is_s_distribution, pair, ProbeBattery, TestFunction, TestFunctionSpec,
};
pub use quad::{CompactBox, Quadrature, QuadratureConfig};
pub use structure::{
    corrected_antiderivative, local_structure, mollified_slice, point_value,
    primitive_order_zero, reduce_order, vandermonde_reconstruct, zero_local_structure,
    Decomposition, DecompositionMode, MultiIndex,
};
