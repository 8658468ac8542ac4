//! Communication graphs. Every neighbour set contains the agent itself.
//!
//! * `FullyConnected`: `N(i) = {1, ..., N}`.
//! * `Ring { degree }`: self plus `degree / 2` agents on each side, wrapping.
//! * `Star { hub }`: the hub sees everyone; every other agent sees the hub and itself.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyKind {
    #[default]
    FullyConnected,
    Ring { degree: usize },
    Star { hub: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    kind: TopologyKind,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    pub fn build(kind: TopologyKind, n_agents: usize) -> Result<Self> {
        if n_agents == 0 {
            return param("topology needs at least one agent");
        }
        let neighbors = match kind {
            TopologyKind::FullyConnected => {
                let all: Vec<usize> = (1..=n_agents).collect();
                vec![all; n_agents]
            }
            TopologyKind::Ring { degree } => {
                if degree == 0 || degree % 2 != 0 {
                    return param(format!("ring degree must be even and positive, got {degree}"));
                }
                if degree >= n_agents {
                    return param(format!(
                        "ring degree {degree} must be smaller than the agent count {n_agents}"
                    ));
                }
                let half = degree / 2;
                (0..n_agents)
                    .map(|i| {
                        let mut set: Vec<usize> = (0..=2 * half)
                            .map(|off| (i + n_agents + off - half) % n_agents + 1)
                            .collect();
                        set.sort_unstable();
                        set
                    })
                    .collect()
            }
            TopologyKind::Star { hub } => {
                if hub == 0 || hub > n_agents {
                    return param(format!("star hub {hub} outside 1..={n_agents}"));
                }
                (1..=n_agents)
                    .map(|i| {
                        if i == hub {
                            (1..=n_agents).collect()
                        } else {
                            let mut set = vec![hub, i];
                            set.sort_unstable();
                            set
                        }
                    })
                    .collect()
            }
        };
        Ok(Self { kind, neighbors })
    }

    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn n_agents(&self) -> usize {
        self.neighbors.len()
    }

    /// `N(i)` in ascending order, 1-based.
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        if i == 0 || i > self.neighbors.len() {
            return param(format!("agent {i} outside 1..={}", self.neighbors.len()));
        }
        Ok(&self.neighbors[i - 1])
    }

    /// True when every neighbour set has the same size.
    pub fn is_regular(&self) -> bool {
        let d = self.neighbors[0].len();
        self.neighbors.iter().all(|n| n.len() == d)
    }

    pub(crate) fn neighbor_sets(&self) -> &[Vec<usize>] {
        &self.neighbors
    }
}
