//! Priors, conjugate posterior updates and closed-form model scores.

pub mod observation;
pub mod params;
pub mod phantom;
pub mod score;

pub use observation::{
    accumulate_observation, sufficient_stats, PathObservation, PathStep, SufficientStats, Terminal,
};
pub use params::{
    censor_ig, joint_density, update_dirichlet, update_ig, DirichletParams, IgParams,
};
pub use phantom::{phantom_priors, PhantomPriors};
pub use score::{log_bayes_factor, log_marginal_likelihood, ClusterCell, ScoredModel, StageCell};
