//! Deterministic, seeded model of a multi-hop low-power radio network:
//! topology with per-link loss, capture-effect reception rules, and
//! pluggable interference generators.

pub mod interference;
pub mod reception;
pub mod topology;

pub use interference::{
    interference_active, InterferenceKind, InterferenceParams, InterferenceProfile,
};
pub use reception::{
    reception_outcome, Reception, SimClock, Transmission, CAPTURE_MARGIN_DB, CAPTURE_OFFSET_US,
    CONSTRUCTIVE_OFFSET_US,
};
pub use topology::{
    build_topology, ExplicitLink, LinkQuality, NodeId, Topology, TopologyError, TopologySpec,
    MAX_NODES,
};
