//! Constructions of concrete networks.

mod cmo;
mod conv;
mod random;
mod trianglefree;

pub use cmo::{build_cmo, build_cmo_with_block, build_leaf_cmo, cmo_from_rows, cmo_rows, leaf_cmo_with_block, CmoRows};
pub use conv::{build_baseline_spn, build_conv_spqn, ConvLayerSpec, ConvNetSpec};
pub use random::random_cmo_network;
pub use trianglefree::{build_trianglefree_spqn, edge_index, is_triangle_free};
