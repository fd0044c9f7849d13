//! Generation and analysis of a class of recursively built regular
//! interconnection networks: alternating group graphs, k-ary n-cubes,
//! split-stars and bubble-sort star graphs.
//!
//! The library constructs, for any three vertices of such a network, the
//! maximum number of internally disjoint trees connecting them (trees that
//! pairwise share exactly the three chosen vertices and no edge), verifies
//! the construction independently, and cross-checks against an exhaustive
//! search oracle on small instances.

pub mod error;
pub mod graph;
pub mod families;
pub mod menger;
pub mod oracle;
pub mod packing;

pub use error::Error;
pub use graph::{Graph, VertexSet};
