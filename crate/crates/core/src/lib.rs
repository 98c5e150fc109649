//! Twisted Selberg zeta functions of Schottky groups.
//!
//! The crate computes Fredholm determinants of twisted transfer operators on
//! Schottky disk systems, locates their zeros (the resonances of the
//! associated convex cocompact hyperbolic surfaces and of their finite
//! regular covers), measures Cayley-graph expansion of finite quotients, and
//! checks the word-operator decay estimates that control new zeros of covers.
//!
//! Module map:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`schottky`] | Möbius maps, Schottky data, reduced words, limit points, primitive classes |
//! | [`thermo`] | Topological pressure, Hausdorff dimension, RPF eigenfunction, normalized weights |
//! | [`groups`] | Finite groups, homomorphisms, unitary representations, expansion constants |
//! | [`wordops`] | Word-summed representation operators and their spectral closed forms |
//! | [`transfer`] | Collocation transfer matrices, Fredholm determinants, eigenfunctions |
//! | [`zeta`] | Euler products, zero counting and location, cover scans |

pub mod cheb;
pub mod error;
pub mod groups;
pub mod linalg;
pub mod quad;
pub mod schottky;
pub mod thermo;
pub mod transfer;
pub mod wordops;
pub mod zeta;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use groups::{FiniteGroup, GroupHom, GroupSpec, Twist, UnitaryRep};
pub use schottky::{LimitPoint, Mobius, PrimitiveClass, ReducedWord, SchottkyData, SurfaceConfig};
pub use transfer::{Discretization, EigenfunctionSample, TransferMatrix};
pub use zeta::{ResonanceReport, ScanRectangle};
