//! Exact symbolic toolkit for Lie point symmetries of PDE systems and for
//! building nonlocally related systems (potential, intermediate and inverse
//! potential systems) from conservation laws and point symmetries.
//!
//! All arithmetic is exact: coefficients are arbitrary-precision rationals and
//! expressions are kept as rational functions over a basis of atoms (symbols,
//! jet coordinates, opaque constitutive functions and elementary functions).

pub mod construct;
pub mod detsys;
pub mod dsl;
pub mod error;
pub mod expr;
pub mod jet;
pub mod linalg;
pub mod transform;
pub mod vfield;

pub use error::{Error, Result};
pub use expr::{parse, Atom, AtomKind, Expr, Name, Poly, Rf, Symbol};
pub use jet::{JetSpace, PdeSystem};
pub use vfield::{ProlongedField, SymmetryVerdict, VectorField};
