//! Probabilistic circuits with real, complex and hypercomplex parameters.
//!
//! The crate covers the circuit IR and its structural checks, evaluation in
//! linear and log semirings, the product/squaring algebra for compatible
//! circuits, sums of compatible squares, tensorized architectures and their
//! training, exact reductions from other model families, and brute-force
//! oracles used to validate all of the above.

pub mod circuit;
pub mod cjson;
pub mod compose;
pub mod constructions;
pub mod error;
pub mod eval;
pub mod input;
pub mod logc;
pub mod oracle;
pub mod params;
pub mod reductions;
pub mod region;
pub mod scope;
pub mod tape;
pub mod tensorized;
pub mod training;
pub mod variable;

pub use circuit::{Circuit, CircuitBuilder, Field, Unit, UnitId, UnitKind};
pub use error::{Error, Result};
pub use input::InputFunction;
pub use logc::LogC;
pub use num_complex::Complex64 as C64;
pub use scope::Scope;
pub use variable::{Domain, Variable};
