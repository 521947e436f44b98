//! Structure of the coefficient matrix: the graph of its off-diagonal
//! support, distances, power graphs, neighborhoods, connected-subset
//! enumeration, block symmetrization and the small/large entry split.

mod coeff;
mod graph;
mod split;

pub use coeff::{CoeffMatrix, GenSpec, GENERATOR_NAMES, SYMMETRY_TOL};
pub use graph::{
    build_graph, connected_subset_bound, distances, enumerate_connected_subsets, neighborhood, pattern_graph,
    power_graph, GraphView, HopDistances, ENUMERATION_BUDGET, UNREACHABLE,
};
pub use split::{m_of, symmetrize, truncation_split, TruncationSplit};
