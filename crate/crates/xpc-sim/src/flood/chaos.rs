//! Chaos-style best-effort all-to-all aggregation: nodes gossip a shared
//! packet, set their bit in its flags field, merge votes, and rely on the
//! capture effect to resolve concurrent distinct aggregates.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use super::glossy::FloodResult;
use crate::radio::{
    reception_outcome, InterferenceProfile, NodeId, Reception, SimClock, Topology, Transmission,
};

/// Timing and behavior knobs of one Chaos round.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ChaosParams {
    /// Length of one gossip micro-slot (packet airtime plus processing).
    pub microslot_us: u64,
    /// Dead time at round start consumed by callback processing before any
    /// useful micro-slot runs.
    pub gap_us: u64,
    /// Consecutive micro-slots without new information anywhere before the
    /// round stops early.
    pub quiet_threshold: u32,
    /// Probability that a node which just merged new information transmits
    /// in the next micro-slot.
    pub tx_prob_fresh: f64,
    /// Probability that a node with nothing new transmits anyway.
    pub tx_prob_idle: f64,
}

impl Default for ChaosParams {
    fn default() -> Self {
        ChaosParams {
            microslot_us: 4_000,
            gap_us: 8_000,
            quiet_threshold: 3,
            tx_prob_fresh: 0.75,
            tx_prob_idle: 0.10,
        }
    }
}

/// The shared Chaos packet: one flag bit per cohort node, the vote byte of
/// every flagged node, and the host's proposed value echoed along.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChaosAggregate {
    cohort_size: u16,
    /// Bit i set iff cohort node i's contribution is merged in.
    pub flags: u64,
    votes: Vec<u8>,
    pub proposed_value: Vec<u8>,
}

impl ChaosAggregate {
    pub fn new(cohort_size: u16, proposed_value: Vec<u8>) -> Self {
        assert!(cohort_size as usize <= 64, "flag field holds at most 64 bits");
        ChaosAggregate {
            cohort_size,
            flags: 0,
            votes: vec![0; cohort_size as usize],
            proposed_value,
        }
    }

    pub fn cohort_size(&self) -> u16 {
        self.cohort_size
    }

    /// Merges one node's own vote byte into the packet.
    pub fn set_contribution(&mut self, index: usize, vote: u8) {
        assert!(index < self.cohort_size as usize, "flag index out of range");
        self.flags |= 1 << index;
        self.votes[index] = vote;
    }

    pub fn has_bit(&self, index: usize) -> bool {
        self.flags & (1 << index) != 0
    }

    pub fn vote(&self, index: usize) -> Option<u8> {
        self.has_bit(index).then(|| self.votes[index])
    }

    pub fn set_count(&self) -> u32 {
        self.flags.count_ones()
    }

    pub fn is_full(&self) -> bool {
        self.set_count() as u16 == self.cohort_size
    }

    /// Flagged (index, vote byte) pairs in ascending index order.
    pub fn contributions(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        (0..self.cohort_size as usize).filter_map(|i| self.vote(i).map(|v| (i, v)))
    }
}

/// Joins two aggregates: flags OR together, vote bytes come from whichever
/// side has the node's bit set. Commutative, associative, idempotent.
///
/// Panics if the aggregates disagree on cohort size or proposed value
/// (caller bug: those are fixed within a phase).
pub fn merge_aggregate(a: &ChaosAggregate, b: &ChaosAggregate) -> ChaosAggregate {
    assert_eq!(
        a.cohort_size, b.cohort_size,
        "merging aggregates of different cohort sizes"
    );
    assert_eq!(
        a.proposed_value, b.proposed_value,
        "merging aggregates of different proposed values"
    );
    let mut out = a.clone();
    out.flags |= b.flags;
    for i in 0..b.cohort_size as usize {
        if b.has_bit(i) && !a.has_bit(i) {
            out.votes[i] = b.votes[i];
        }
    }
    out
}

/// Runs one slotted Chaos round over the nodes in `aggregates` (the synced
/// participants plus the initiator), mutating their aggregates in place so
/// a later round can resume exactly where this one stopped.
///
/// Every micro-slot, each node transmits with `tx_prob_fresh` if it merged
/// something new in the previous micro-slot (everyone counts as fresh at
/// round start) and `tx_prob_idle` otherwise; the rest listen. Receivers
/// merge whatever the capture/constructive rules let them decode. The round
/// stops when the slot budget is spent or no node anywhere has seen new
/// information for `quiet_threshold` consecutive micro-slots.
pub fn chaos_round(
    topo: &Topology,
    profile: &InterferenceProfile,
    params: &ChaosParams,
    initiator: NodeId,
    slot_ms: u32,
    aggregates: &mut BTreeMap<NodeId, ChaosAggregate>,
    t: SimClock,
    rng: &mut impl Rng,
) -> FloodResult<ChaosAggregate> {
    let slot_us = slot_ms as u64 * 1000;
    let nodes: Vec<NodeId> = aggregates.keys().copied().collect();
    let mut fresh: BTreeSet<NodeId> = nodes.iter().copied().collect();
    let mut reached: BTreeSet<NodeId> = BTreeSet::new();
    reached.insert(initiator);

    let mut quiet = 0u32;
    let mut microslots = 0u64;
    while params.gap_us + (microslots + 1) * params.microslot_us <= slot_us {
        if quiet >= params.quiet_threshold {
            break;
        }
        let t_slot = t.advanced(params.gap_us + microslots * params.microslot_us);
        microslots += 1;

        let mut transmitters = Vec::new();
        for &node in &nodes {
            let p = if fresh.contains(&node) {
                params.tx_prob_fresh
            } else {
                params.tx_prob_idle
            };
            if rng.random_bool(p) {
                transmitters.push(node);
            }
        }
        // Snapshot payloads: all transmissions in a micro-slot carry the
        // transmitter's aggregate as of the slot start.
        let snapshot: Vec<(NodeId, ChaosAggregate)> = transmitters
            .iter()
            .map(|&n| (n, aggregates[&n].clone()))
            .collect();

        let mut now_fresh = BTreeSet::new();
        for &receiver in &nodes {
            if transmitters.contains(&receiver) {
                continue;
            }
            let concurrent: Vec<Transmission<'_, ChaosAggregate>> = snapshot
                .iter()
                .filter(|(s, _)| topo.are_neighbors(*s, receiver))
                .map(|(s, agg)| Transmission {
                    sender: *s,
                    payload: agg,
                    offset_us: 0.0,
                })
                .collect();
            if concurrent.is_empty() {
                continue;
            }
            if let Reception::Received { tx_index } =
                reception_outcome(topo, profile, receiver, &concurrent, t_slot, rng)
            {
                let incoming = concurrent[tx_index].payload;
                let mine = aggregates.get_mut(&receiver).unwrap();
                let merged = merge_aggregate(mine, incoming);
                reached.insert(receiver);
                if merged.flags != mine.flags {
                    now_fresh.insert(receiver);
                }
                *mine = merged;
            }
        }

        if now_fresh.is_empty() {
            quiet += 1;
        } else {
            quiet = 0;
        }
        fresh = now_fresh;
    }

    let elapsed_us = if microslots == 0 {
        0
    } else {
        params.gap_us + microslots * params.microslot_us
    };
    FloodResult {
        reached,
        final_payload: aggregates[&initiator].clone(),
        elapsed_us,
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_aggregate() -> impl Strategy<Value = ChaosAggregate> {
        (proptest::collection::vec(proptest::option::of(0u8..=255), 8)).prop_map(|votes| {
            let mut a = ChaosAggregate::new(8, vec![0xC0]);
            for (i, v) in votes.into_iter().enumerate() {
                if let Some(v) = v {
                    a.set_contribution(i, v);
                }
            }
            a
        })
    }

    proptest! {
        /// merge forms a join-semilattice: commutative, associative,
        /// idempotent.
        #[test]
        fn merge_semilattice(a in arb_aggregate(), b in arb_aggregate(), c in arb_aggregate()) {
            prop_assert_eq!(merge_aggregate(&a, &b).flags, merge_aggregate(&b, &a).flags);
            prop_assert_eq!(
                merge_aggregate(&merge_aggregate(&a, &b), &c),
                merge_aggregate(&a, &merge_aggregate(&b, &c))
            );
            prop_assert_eq!(merge_aggregate(&a, &a), a.clone());
            // Monotone: the join never loses a bit from either side.
            let m = merge_aggregate(&a, &b);
            prop_assert_eq!(m.flags & a.flags, a.flags);
            prop_assert_eq!(m.flags & b.flags, b.flags);
        }
    }
}
