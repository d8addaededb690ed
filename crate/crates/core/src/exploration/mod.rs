//! Candidate generation: simulated annealing (baseline) and the
//! reinforcement-learning explorer.

mod episodes;
mod net;
mod ppo;
mod sa;

pub use episodes::{apply_actions, run_episodes, sample_actions, EpisodeBatch};
pub use net::{ActorCritic, Forward, NetShape};
pub use ppo::{
    compute_gae, flatten_trajectories, ppo_loss, ppo_loss_and_grad, ppo_update, Adam, Agent,
    LossCoefficients, LossParts, Minibatch, PpoParams, PpoStats, Trajectory,
};
pub use sa::{accept_probability, sa_search, SaParams};
