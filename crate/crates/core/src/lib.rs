//! Simulation and analysis toolkit for multi-agent debate versus majority voting.
//!
//! Every agent is a Dirichlet-compound-multinomial (DCM) process: it holds a
//! Dirichlet belief `α`, draws `θ ~ Dirichlet(α)` and answers `y ~ Categorical(θ)`.
//! Debate rounds update `α` by adding the count vector of the answers the agent
//! observed from its neighbours. Answer indices and agent indices are 1-based
//! throughout the public API; the correct answer is index 1 unless configured
//! otherwise.
//!
//! Module map:
//!
//! * [`belief`]: belief vectors, sampling and conjugate updates.
//! * [`topology`]: communication graphs and neighbour sets.
//! * [`debate`]: the simultaneous-talk protocol and interventions.
//! * [`voting`]: plurality aggregation and L1 deviation.
//! * [`bounds`]: closed-form success bounds and the exhaustive margin predicate.
//! * [`montecarlo`]: trial runner, martingale trace, bound dominance and sweeps.

pub mod belief;
pub mod bounds;
pub mod debate;
mod error;
pub mod montecarlo;
pub mod rng;
pub mod stats;
pub mod topology;
pub mod voting;

pub use belief::{BeliefVector, CountVector, ThetaVector};
pub use debate::{DebateConfig, Intervention, RoundTranscript};
pub use error::{Error, Result};
pub use montecarlo::{ExperimentSpec, TrialSummary};
pub use rng::RngStream;
pub use topology::{Topology, TopologyKind};
pub use voting::{TieBreak, VoteTally};
