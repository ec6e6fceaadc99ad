//! Tabular POMDPs, exact belief tracking, simulation, L-step windows, and the
//! brute-force history-tree oracles every learned component is checked against.

mod belief;
mod fixtures;
mod model;
mod oracle;
mod simulate;
mod window;

pub use belief::BeliefVector;
pub use model::TabularPomdp;
pub use oracle::{
    decodability_gap, exact_value_iteration, ExactValues, HistoryNode, HistoryTree, ValueTarget,
    WindowBeliefs, DEFAULT_NODE_BUDGET,
};
pub use simulate::{sample_episode, Simulator, Trajectory};
pub use window::Window;
