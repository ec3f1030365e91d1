//! EMD approximations: Sinkhorn, sliced Wasserstein, tree Wasserstein,
//! FlowTree and Fast FlowTree.

mod sinkhorn;
mod sliced;
mod tree;

pub use sinkhorn::{
    round_to_polytope, sinkhorn, sinkhorn_with_cost, SinkhornParams, SinkhornResult,
    LOG_DOMAIN_RATIO,
};
pub use sliced::{projection_direction, swd, DEFAULT_PROJECTIONS};
pub use tree::{
    ancestor_columns, ancestor_matrix, augmented_tree_matching, bottom_up_tree_matching,
    fast_flowtree, fast_flowtree_sets, flowtree, support_cost, twd, twd_classes, twd_closed_form,
    TreeFlow,
};
