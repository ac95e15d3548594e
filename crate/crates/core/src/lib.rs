//! Numerical laboratory for circle actions of Fuchsian groups: harmonic fiber
//! measures on suspension foliations, the averaged circle connection and its
//! curvature, translation-number Euler numbers, and the attendant
//! Gauss–Bonnet, Milnor–Wood, and rigidity checks at desk scale.

pub mod circle;
pub mod connection;
pub mod error;
pub mod field;
pub mod gauss_bonnet;
pub mod geom;
pub mod group;
pub mod io;
pub mod mesh;
pub mod pipeline;
pub mod rigidity;
pub mod tolerances;

pub use circle::{euler_number, translation_number, CircleLift, Representation};
pub use error::LabError;
pub use field::FiberMeasureField;
pub use geom::{hyperbolic_distance, mobius_apply, poisson_kernel, DiskPoint, MoebiusElement};
pub use group::SurfaceGroup;
pub use mesh::{build_mesh, horocircle_family, HyperbolicMesh};
