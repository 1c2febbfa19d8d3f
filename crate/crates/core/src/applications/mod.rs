//! Reductions of Nash games and mixed variational inequalities to equilibrium problems,
//! and the built-in problem registry.

mod mvip;
mod nash;
mod registry;

pub use mvip::{build_mvip_bifunction, mvip_direct_oracle, MVIProblem};
pub use nash::{
    best_response_oracle, build_nep_bifunction, pseudosubgradient_gr, NashProblem, Player,
};
pub use registry::{
    builtin, example51, example51_strategy_set, mvip_linear, prox_quadratic, quadratic_game,
    Builtin, BUILTIN_NAMES,
};
