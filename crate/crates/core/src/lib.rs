//! Numerics for multilinear embedding inequalities of fractional sparse
//! operators.
//!
//! The library is organized around five layers:
//!
//! * [`dyadic`] — exact geometry of cubes from the shifted dyadic grids
//!   (one-third translates), with rational corners and integer index
//!   arithmetic for containment and refinement.
//! * [`weights`] — weight families (Lebesgue, power, modified power,
//!   grid-sampled) with closed-form or adaptive cube measures, the power
//!   comparability diagnostic and Muckenhoupt constant estimation.
//! * [`sparse`] — sparse families with exceptional-set assignment and
//!   certification, kernel maps, evaluation of the multilinear form and
//!   the positive sparse operator, and the weighted dyadic maximal
//!   operator.
//! * [`embedding`] — the sufficient-condition constants for the embedding
//!   inequality (supremum and series variants, plain and theta-averaged),
//!   empirical verification with extremizer search, and the power-weight
//!   diagnostics.
//! * [`bessel`] — the Bessel kernel via its subordination integral, decay
//!   bound checks, the scale-dependent constant `A0(lambda)` and the
//!   constructive selection of `lambda0` behind infinitesimal relative
//!   bounds.

pub mod bessel;
pub mod dyadic;
pub mod embedding;
pub mod mesh;
pub mod quad;
pub mod sparse;
pub mod weights;

pub use dyadic::{DyadicCube, GridId, Window};
pub use embedding::EmbeddingProblem;
pub use mesh::{CellBox, Mesh, TestFunction};
pub use sparse::{KernelMap, SparseFamily};
pub use weights::Weight;
