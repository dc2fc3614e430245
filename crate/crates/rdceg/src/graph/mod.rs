//! Event trees, hued trees and RDCEGs, and the transformations between them.

pub mod dot;
pub mod iso;
pub mod rdceg;
pub mod staging;
pub mod tree;

pub use rdceg::{
    build_rdceg, passage_slices, positions_from_staging, PassageSlice, Position, PositionId, Rdceg,
    RdcegEdge, SliceDecomposition,
};
pub use staging::{Clustering, HuedTree, Staging};
pub use tree::{
    modify_tree, EdgeId, EventTree, ModifiedTree, SituationProbs, TreeBuilder, TreeEdge, Vertex,
    VertexId,
};
