//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use tplab_core::{build_pg2, canonical_residue_model, ProjectivePlane, ResidueModel};

pub fn plane(q: usize) -> Arc<ProjectivePlane> {
    build_pg2(q).expect("supported order")
}

pub fn model(q: usize) -> ResidueModel {
    canonical_residue_model(&plane(q)).expect("constructed plane")
}
