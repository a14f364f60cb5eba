//! Exact symbolic engine for finitely presented difference fields.
//!
//! Layers, bottom up: exact arithmetic ([`rat`], [`poly`], [`ratfunc`],
//! [`linalg`], [`relations`], [`circle`]), difference presentations
//! ([`difference`]), twisted σ-Artin–Schreier solving and certification
//! ([`sas`]), independent n-systems ([`systems`]), additive characters
//! ([`amalgamation`]) and the height-4 counterexample ([`counterexample`]).

pub mod amalgamation;
pub mod circle;
pub mod counterexample;
pub mod difference;
pub mod error;
pub mod linalg;
pub mod poly;
pub mod rat;
pub mod ratfunc;
pub mod relations;
pub mod sas;
pub mod systems;

pub use circle::CircleValue;
pub use difference::{Element, GenKind, GeneratorSpec, Presentation, PresentationError};
pub use error::ExactError;
pub use poly::{MPoly, Monomial, VarId};
pub use rat::Rat;
pub use ratfunc::{normalize, RatFunc};
pub use relations::{integer_relations, linear_relations};
