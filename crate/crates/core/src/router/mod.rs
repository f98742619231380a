//! Two-stage probabilistic routing over the eight expert slots.

mod gumbel;
mod network;
mod state;

pub use gumbel::{floored_ln, gumbel_from_noise, gumbel_select, sample_gumbel, GumbelSample, LOG_ZERO_FLOOR};
pub use network::{
    entropy_graph, expected_loss_graph, gumbel_noise, gumbel_weights_graph, mixture_graph, one_hot_weights,
    router_inputs, states_from_graph, Router, RouterConfig, RouterInputs, RoutingGraph,
};
pub use state::{
    argmax, entropy, entropy_penalty, expected_loss, joint_pmf, soft_predict, JointPmf, RoutingMode, RoutingState,
    SIMPLEX_TOLERANCE,
};
