//! Exact conversions from other model families into circuits: matrix product
//! states, hypercomplex circuits, PSD quadratic forms, squared neural families,
//! and the expansion of monotone circuits into sums of squares.

pub mod hypercomplex;
pub mod mps;
pub mod psd;
pub mod snefy;
pub mod unroll;

pub use hypercomplex::{complex_decompose, hypercomplex_decompose, Hyper, HyperCircuit, HyperUnit, Side};
pub use mps::{born, mps_to_circuit, Core, Mps};
pub use psd::{psd_to_socs, socs_to_psd, PsdModel};
pub use snefy::{snefy_components, snefy_to_socs, Activation, BaseMeasure, SnefySpec, Statistic};
pub use unroll::{unroll_to_sos, DEFAULT_UNROLL_CAP};
