pub mod affine;
pub mod axisset;
pub mod fixpoint;
mod hull;
pub mod lpsolve;
pub mod netgraph;
pub mod polytope;
pub mod reachability;
