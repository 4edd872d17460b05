//! Numerical geometry of the three-dimensional Heisenberg group.
//!
//! The crate implements, with verified tolerances:
//!
//! * the group in its polarized and symmetric coordinate models, with
//!   homogeneous dilations and the integer lattice ([`group`]);
//! * the left-invariant frame, its cometric, and bracket-generation
//!   diagnostics ([`frame`], [`flows`]);
//! * the Carnot-Carathéodory distance and the Riemannian contraction
//!   distance, each computed by two independent routes (closed-form
//!   geodesic shooting and constrained control optimization), plus the
//!   empirical square-root comparison constant between them ([`geodesic`],
//!   [`distance`]);
//! * isometries, finite group actions, scaling conjugation, coset
//!   transversals of the dilated lattice, and minimax fixed points
//!   ([`isometry`], [`coset`], [`fixed_point`]);
//! * voxel set machinery with a binary dump format ([`voxel`]);
//! * Dirichlet cells for the lattice action and fundamental-set
//!   verification ([`orbit`], [`dirichlet`]);
//! * the self-similar tile of the dilation-translation iterated function
//!   system and its tiling diagnostics ([`ifs`]);
//! * the Haar-type multiresolution analysis built on that tile, with Gram
//!   Riesz bounds, level projections, and an orthogonal wavelet bank
//!   ([`mra`]).

pub mod coset;
pub mod dirichlet;
pub mod distance;
pub mod error;
pub mod fixed_point;
pub mod flows;
pub mod frame;
pub mod geodesic;
pub mod group;
pub mod ifs;
pub mod isometry;
pub mod mra;
pub mod optimize;
pub mod orbit;
pub mod path;
pub mod voxel;

pub use error::{HeisError, Result};
pub use group::{GroupPoint, LatticePoint, Model};
