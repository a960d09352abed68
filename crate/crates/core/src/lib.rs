//! Two-dimensional projective connections with a projective symmetry.
//!
//! The crate is organised bottom-up: [`jet`] and [`expr`] provide exact
//! derivatives of closed-form fields, [`geometry`] builds Christoffel symbols,
//! the metrizability system, Benenti and Killing tensors on top of them,
//! [`catalog`] ships the normal-form metrics, [`metrization`] handles the
//! linear action of a projective vector field on the solution space, and
//! [`dynamics`] integrates geodesics and the quotient ODE.

pub mod catalog;
pub mod complex;
pub mod dynamics;
pub mod expr;
pub mod geometry;
pub mod jet;
pub mod metrization;
pub mod scalar;
pub mod special;

pub use expr::{CExpr, Expr};
pub use geometry::{Chart, Metric2, Point, ProjConn, QuadraticForm2, SigmaField, VectorField2};
pub use jet::{Jet, Scalar2Jet};
pub use scalar::Scalar;
