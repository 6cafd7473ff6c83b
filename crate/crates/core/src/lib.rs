//! Finite projective planes, tropical 4x4 minors and residue-level identities
//! for rank-3 lifts of incidence matrices.

pub mod census;
pub mod error;
pub mod gf;
pub mod holonomy;
pub mod patterns;
pub mod perm;
pub mod plane;
pub mod report;
pub mod residue;
pub mod tropical;

pub use error::{Error, Result};
pub use gf::{Elem, Field, FieldDescriptor, FieldElement, Jet, Matrix, Valuation};
pub use plane::{build_pg2, nonincidence_graph, ProjectivePlane, ZeroGraph};
pub use report::{CheckReport, Expected, Source, Status};
pub use residue::{canonical_residue_model, ResidueModel};
pub use tropical::{Pattern4, TropicalProfile};
