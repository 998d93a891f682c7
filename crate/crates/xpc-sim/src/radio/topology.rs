//! Multi-hop radio topology: nodes, directed link qualities, and
//! deterministic (seeded) generation.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Hard cap on topology size. Cohort membership travels in a 64-bit flag
/// field, one bit per node, so larger networks are out of scope.
pub const MAX_NODES: usize = 64;

/// How many incremented sub-seeds the random-geometric generator tries
/// before giving up on producing a connected graph.
pub const CONNECT_RETRY_BUDGET: u64 = 32;

/// Identifies one radio node within a topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Directed link quality from a sender to a receiver.
#[derive(Debug, Clone, Copy)]
pub struct LinkQuality {
    /// Packet reception ratio in [0, 1] on a clear channel.
    pub base_prr: f64,
    /// Relative received signal strength in dB at the receiver, fixed for
    /// the lifetime of the topology. The capture rule compares these.
    pub rssi_margin_db: f64,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology needs at least 2 and at most {MAX_NODES} nodes, got {0}")]
    BadNodeCount(usize),
    #[error("host id {0} is not a node of the topology")]
    BadHost(NodeId),
    #[error("link ({0}, {1}) is invalid: {2}")]
    BadLink(NodeId, NodeId, String),
    #[error("explicit topology is not connected from the host")]
    ExplicitDisconnected,
    #[error("random-geometric generator produced no connected graph in {0} attempts (radius too small?)")]
    Unconnectable(u64),
}

/// A connected multi-hop radio network.
///
/// Links are stored per ordered (sender, receiver) pair: `base_prr` is
/// symmetric, the RSSI margin is drawn independently per direction.
#[derive(Debug, Clone)]
pub struct Topology {
    n: usize,
    host: NodeId,
    links: Vec<Option<LinkQuality>>,
    positions: Option<Vec<(f64, f64)>>,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn host(&self) -> NodeId {
        self.host
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n as u16).map(NodeId)
    }

    /// Directed link from `sender` to `receiver`, if they are in range.
    pub fn link(&self, sender: NodeId, receiver: NodeId) -> Option<LinkQuality> {
        self.links[sender.index() * self.n + receiver.index()]
    }

    pub fn are_neighbors(&self, a: NodeId, b: NodeId) -> bool {
        self.link(a, b).is_some()
    }

    pub fn neighbors(&self, of: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(move |&n| self.link(of, n).is_some())
    }

    pub fn degree(&self, of: NodeId) -> usize {
        self.neighbors(of).count()
    }

    pub fn positions(&self) -> Option<&[(f64, f64)]> {
        self.positions.as_deref()
    }

    /// True if every node is reachable from the host.
    pub fn is_connected(&self) -> bool {
        self.reachable_from(self.host, &BTreeSet::new()).len() == self.n
    }

    /// BFS reachability from `start`, ignoring nodes in `excluded` as relays
    /// and as targets. Used by jammer-removal analyses.
    pub fn reachable_from(&self, start: NodeId, excluded: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        if excluded.contains(&start) {
            return seen;
        }
        let mut queue = VecDeque::new();
        seen.insert(start);
        queue.push_back(start);
        while let Some(cur) = queue.pop_front() {
            for next in self.neighbors(cur) {
                if !excluded.contains(&next) && seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Assembles a topology from explicit directed parts. Intended for tests
    /// and small hand-built scenarios where exact PRR/RSSI values matter.
    pub fn from_parts(
        n: usize,
        host: NodeId,
        directed_links: &[(NodeId, NodeId, LinkQuality)],
    ) -> Result<Self, TopologyError> {
        if n < 2 || n > MAX_NODES {
            return Err(TopologyError::BadNodeCount(n));
        }
        if host.index() >= n {
            return Err(TopologyError::BadHost(host));
        }
        let mut links = vec![None; n * n];
        for &(a, b, q) in directed_links {
            if a == b {
                return Err(TopologyError::BadLink(a, b, "self-link".into()));
            }
            if a.index() >= n || b.index() >= n {
                return Err(TopologyError::BadLink(a, b, "node out of range".into()));
            }
            if !(0.0..=1.0).contains(&q.base_prr) {
                return Err(TopologyError::BadLink(a, b, "base_prr outside [0,1]".into()));
            }
            links[a.index() * n + b.index()] = Some(q);
        }
        let topo = Topology {
            n,
            host,
            links,
            positions: None,
        };
        if !topo.is_connected() {
            return Err(TopologyError::ExplicitDisconnected);
        }
        Ok(topo)
    }
}

/// One undirected link of an explicit topology spec. The RSSI margins for
/// the two directions are drawn from the build seed.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ExplicitLink {
    pub a: u16,
    pub b: u16,
    pub prr: f64,
}

/// Declarative description of a topology, either an explicit link list or a
/// seeded random-geometric generator.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TopologySpec {
    Explicit {
        nodes: u16,
        host: u16,
        links: Vec<ExplicitLink>,
        #[serde(default)]
        seed: u64,
    },
    RandomGeometric {
        nodes: u16,
        host: u16,
        radius: f64,
        seed: u64,
        /// PRR of a zero-length link.
        #[serde(default = "default_prr_near")]
        prr_near: f64,
        /// PRR of a link at exactly `radius` distance.
        #[serde(default = "default_prr_far")]
        prr_far: f64,
    },
}

fn default_prr_near() -> f64 {
    0.99
}

fn default_prr_far() -> f64 {
    0.85
}

/// Builds a connected topology from a spec. Deterministic given the seed;
/// the random-geometric generator retries with incremented sub-seeds until
/// connected, up to [`CONNECT_RETRY_BUDGET`].
pub fn build_topology(spec: &TopologySpec) -> Result<Topology, TopologyError> {
    match spec {
        TopologySpec::Explicit {
            nodes,
            host,
            links,
            seed,
        } => build_explicit(*nodes as usize, NodeId(*host), links, *seed),
        TopologySpec::RandomGeometric {
            nodes,
            host,
            radius,
            seed,
            prr_near,
            prr_far,
        } => build_random_geometric(
            *nodes as usize,
            NodeId(*host),
            *radius,
            *seed,
            *prr_near,
            *prr_far,
        ),
    }
}

fn draw_rssi(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.0..6.0)
}

fn build_explicit(
    n: usize,
    host: NodeId,
    links: &[ExplicitLink],
    seed: u64,
) -> Result<Topology, TopologyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directed = Vec::with_capacity(links.len() * 2);
    for l in links {
        let (a, b) = (NodeId(l.a), NodeId(l.b));
        directed.push((
            a,
            b,
            LinkQuality {
                base_prr: l.prr,
                rssi_margin_db: draw_rssi(&mut rng),
            },
        ));
        directed.push((
            b,
            a,
            LinkQuality {
                base_prr: l.prr,
                rssi_margin_db: draw_rssi(&mut rng),
            },
        ));
    }
    Topology::from_parts(n, host, &directed)
}

fn build_random_geometric(
    n: usize,
    host: NodeId,
    radius: f64,
    seed: u64,
    prr_near: f64,
    prr_far: f64,
) -> Result<Topology, TopologyError> {
    if n < 2 || n > MAX_NODES {
        return Err(TopologyError::BadNodeCount(n));
    }
    if host.index() >= n {
        return Err(TopologyError::BadHost(host));
    }
    for attempt in 0..CONNECT_RETRY_BUDGET {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let positions: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
            .collect();
        let mut links = vec![None; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (xi, yi) = positions[i];
                let (xj, yj) = positions[j];
                let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                if d <= radius {
                    // PRR falls off quadratically with distance; RSSI is an
                    // independent per-direction draw since signal strength on
                    // real deployments correlates only loosely with range.
                    let prr = prr_near - (prr_near - prr_far) * (d / radius).powi(2);
                    links[i * n + j] = Some(LinkQuality {
                        base_prr: prr,
                        rssi_margin_db: draw_rssi(&mut rng),
                    });
                }
            }
        }
        let topo = Topology {
            n,
            host,
            links,
            positions: Some(positions),
        };
        if topo.is_connected() {
            return Ok(topo);
        }
    }
    Err(TopologyError::Unconnectable(CONNECT_RETRY_BUDGET))
}
