//! Geometry of regular second-order Lagrangians on the second-order tangent
//! bundle T²M: canonical semispray, the metric-compatible nonlinear
//! connection, dynamical covariant derivatives and Craig–Synge trajectories,
//! all computed from exact Taylor-jet derivatives of the Lagrangian.
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix `f64`.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod calculus;
pub mod connection;
pub mod diffeo;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod jet;
pub mod lagrangian;
pub mod linalg;
pub mod model;
pub mod registry;
pub mod scalar;
pub mod semi_riemannian;
pub mod semispray;

pub use bundle::{Block, Coord, CotangentVecT2M, Jet2Point, TangentVecT2M};
pub use calculus::{FieldExpr, PartialRequest, ScalarField};
pub use error::{Error, Result};
pub use expr::{parse_expression, Expr};
pub use jet::TaylorJet;
pub use lagrangian::{LagrangianSpec, Metric, TwoForm};
pub use linalg::Mat;
pub use model::PointModel;
pub use scalar::{Real, Scalar};
pub use semi_riemannian::SemiRiemannianSpec;

pub type Point = Jet2Point<f64>;
pub type Jet = TaylorJet<f64>;
pub type Matrix = Mat<f64>;
