//! TDMA round machinery: control packets, slot schedules, retransmission
//! scheduling, and the channel abstraction a round runs over (the real
//! radio model or a scripted stand-in for tests).

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;

use crate::flood::{chaos_round, glossy_flood, ChaosAggregate, ChaosParams, GlossyParams};
use crate::radio::{InterferenceProfile, NodeId, SimClock, Topology};

/// Which dissemination backend a round's data slots use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    Glossy,
    Chaos,
}

/// Reply-bearing protocol phase labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PhaseTag {
    P1,
    P2,
    P3,
}

impl PhaseTag {
    pub fn index(self) -> usize {
        match self {
            PhaseTag::P1 => 0,
            PhaseTag::P2 => 1,
            PhaseTag::P3 => 2,
        }
    }
}

/// The data-slot layout of one round.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RoundSchedule {
    pub n_slots: u16,
    /// Slot owners in transmission order; no duplicates. Empty only for
    /// the terminal round.
    pub slot_assignment: Vec<NodeId>,
    pub slot_duration_ms: u32,
    pub period_ms: u32,
}

impl RoundSchedule {
    pub fn full(cohort: &[NodeId], slot_duration_ms: u32, period_ms: u32) -> Self {
        RoundSchedule {
            n_slots: cohort.len() as u16,
            slot_assignment: cohort.to_vec(),
            slot_duration_ms,
            period_ms,
        }
    }

    pub fn empty(slot_duration_ms: u32, period_ms: u32) -> Self {
        RoundSchedule {
            n_slots: 0,
            slot_assignment: Vec::new(),
            slot_duration_ms,
            period_ms,
        }
    }

    pub fn is_empty_round(&self) -> bool {
        self.n_slots == 0
    }
}

/// Schedules exactly the missing repliers, in ascending node order.
pub fn make_retransmission_schedule(
    missing: &BTreeSet<NodeId>,
    base: &RoundSchedule,
) -> RoundSchedule {
    debug_assert!(!missing.is_empty(), "retransmission round needs missing nodes");
    RoundSchedule {
        n_slots: missing.len() as u16,
        slot_assignment: missing.iter().copied().collect(),
        slot_duration_ms: base.slot_duration_ms,
        period_ms: base.period_ms,
    }
}

/// The per-round packet the host floods first: schedule, protocol message,
/// proposed value (the two user-byte sections), and the backend selector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ControlPacket {
    pub schedule: RoundSchedule,
    pub message: u8,
    pub proposed_value: Vec<u8>,
    pub primitive: Primitive,
    pub phase_tag: PhaseTag,
    pub round_index: u32,
}

/// What one round's communication produced, as observed at the host.
#[derive(Debug, Clone)]
pub struct RoundResult {
    pub control_received_by: BTreeSet<NodeId>,
    pub replies: Vec<(NodeId, u8)>,
    pub elapsed_ms: f64,
}

/// A transport for one round: who decodes the control flood, and which
/// reply bytes make it back to the host through the data slots.
pub trait RoundChannel {
    /// Floods the control packet from the host; returns the cohort subset
    /// that decoded it.
    fn control_flood(&mut self, t: SimClock, ctrl: &ControlPacket) -> BTreeSet<NodeId>;

    /// Runs the round's data portion. `offers` maps each synced node to the
    /// reply byte it stands ready to transmit. Returns the replies the host
    /// collected, in ascending node order.
    fn data_exchange(
        &mut self,
        t: SimClock,
        ctrl: &ControlPacket,
        offers: &BTreeMap<NodeId, u8>,
    ) -> Vec<(NodeId, u8)>;
}

/// The radio-backed transport: control packets and Glossy replies travel as
/// floods, Chaos rounds gossip a shared aggregate with per-node caches so a
/// later round resumes where the last one stopped.
pub struct RadioChannel<'a> {
    topo: &'a Topology,
    profile: InterferenceProfile,
    control_params: GlossyParams,
    data_params: GlossyParams,
    chaos_params: ChaosParams,
    cohort: Vec<NodeId>,
    rng: ChaCha8Rng,
    /// Chaos resumption state, keyed per node; invalidated when the phase
    /// (control message) changes.
    chaos_cache: BTreeMap<NodeId, ChaosAggregate>,
    cache_key: Option<(PhaseTag, u8)>,
    last_control_rx: BTreeSet<NodeId>,
}

impl<'a> RadioChannel<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        topo: &'a Topology,
        profile: InterferenceProfile,
        control_params: GlossyParams,
        data_params: GlossyParams,
        chaos_params: ChaosParams,
        cohort: Vec<NodeId>,
        rng: ChaCha8Rng,
    ) -> Self {
        RadioChannel {
            topo,
            profile,
            control_params,
            data_params,
            chaos_params,
            cohort,
            rng,
            chaos_cache: BTreeMap::new(),
            cache_key: None,
            last_control_rx: BTreeSet::new(),
        }
    }

    fn cohort_index(&self, node: NodeId) -> usize {
        self.cohort
            .binary_search(&node)
            .expect("reply from a node outside the cohort")
    }

    /// Nodes that relay floods: everything except jammers.
    fn flood_relays(&self) -> BTreeSet<NodeId> {
        self.topo
            .nodes()
            .filter(|&n| !self.profile.is_jammer(n))
            .collect()
    }

    /// Per-node Chaos flag bitmaps, for monotonicity checks.
    pub fn chaos_flags(&self) -> BTreeMap<NodeId, u64> {
        self.chaos_cache.iter().map(|(k, v)| (*k, v.flags)).collect()
    }
}

impl RoundChannel for RadioChannel<'_> {
    fn control_flood(&mut self, t: SimClock, ctrl: &ControlPacket) -> BTreeSet<NodeId> {
        let relays = self.flood_relays();
        let payload = (ctrl.round_index, ctrl.message);
        let res = glossy_flood(
            self.topo,
            &self.profile,
            self.topo.host(),
            &payload,
            &self.control_params,
            &relays,
            t,
            &mut self.rng,
        );
        let rx: BTreeSet<NodeId> = res
            .reached
            .into_iter()
            .filter(|n| self.cohort.binary_search(n).is_ok())
            .collect();
        self.last_control_rx = rx.clone();
        rx
    }

    fn data_exchange(
        &mut self,
        t: SimClock,
        ctrl: &ControlPacket,
        offers: &BTreeMap<NodeId, u8>,
    ) -> Vec<(NodeId, u8)> {
        match ctrl.primitive {
            Primitive::Glossy => {
                let mut relays: BTreeSet<NodeId> = self.last_control_rx.clone();
                relays.insert(self.topo.host());
                let slot_us = ctrl.schedule.slot_duration_ms as u64 * 1000;
                let mut replies = Vec::new();
                for (k, &owner) in ctrl.schedule.slot_assignment.iter().enumerate() {
                    let Some(&byte) = offers.get(&owner) else {
                        continue; // silent slot: owner missed the control packet
                    };
                    let t_slot = t.advanced(k as u64 * slot_us);
                    let payload = (ctrl.round_index, owner, byte);
                    let params = GlossyParams {
                        slot_us,
                        ..self.data_params
                    };
                    let res = glossy_flood(
                        self.topo,
                        &self.profile,
                        owner,
                        &payload,
                        &params,
                        &relays,
                        t_slot,
                        &mut self.rng,
                    );
                    if res.reached.contains(&self.topo.host()) {
                        replies.push((owner, byte));
                    }
                }
                replies.sort_by_key(|&(n, _)| n);
                replies
            }
            Primitive::Chaos => {
                let key = (ctrl.phase_tag, ctrl.message);
                if self.cache_key != Some(key) {
                    self.chaos_cache.clear();
                    self.cache_key = Some(key);
                }
                let host = self.topo.host();
                let cohort_size = self.cohort.len() as u16;
                // Active set: the host plus every synced node, each seeded
                // with its own contribution on top of any resumed state.
                let mut active: BTreeMap<NodeId, ChaosAggregate> = BTreeMap::new();
                let fresh = || ChaosAggregate::new(cohort_size, ctrl.proposed_value.clone());
                active.insert(
                    host,
                    self.chaos_cache.get(&host).cloned().unwrap_or_else(fresh),
                );
                for (&node, &byte) in offers {
                    let mut agg = self.chaos_cache.get(&node).cloned().unwrap_or_else(fresh);
                    let idx = self.cohort_index(node);
                    agg.set_contribution(idx, byte);
                    active.insert(node, agg);
                }
                let res = chaos_round(
                    self.topo,
                    &self.profile,
                    &self.chaos_params,
                    host,
                    ctrl.schedule.slot_duration_ms,
                    &mut active,
                    t,
                    &mut self.rng,
                );
                for (node, agg) in active {
                    self.chaos_cache.insert(node, agg);
                }
                res.final_payload
                    .contributions()
                    .map(|(idx, byte)| (self.cohort[idx], byte))
                    .collect()
            }
        }
    }
}

/// A channel driven by closures, for tests, the model-checking harness and
/// offline exploration: the first closure picks who decodes each control
/// packet, the second picks which offered replies reach the host.
pub struct ScriptedChannel<C, D>
where
    C: FnMut(&ControlPacket) -> BTreeSet<NodeId>,
    D: FnMut(&ControlPacket, &BTreeMap<NodeId, u8>) -> Vec<(NodeId, u8)>,
{
    pub on_control: C,
    pub on_data: D,
}

impl<C, D> RoundChannel for ScriptedChannel<C, D>
where
    C: FnMut(&ControlPacket) -> BTreeSet<NodeId>,
    D: FnMut(&ControlPacket, &BTreeMap<NodeId, u8>) -> Vec<(NodeId, u8)>,
{
    fn control_flood(&mut self, _t: SimClock, ctrl: &ControlPacket) -> BTreeSet<NodeId> {
        (self.on_control)(ctrl)
    }

    fn data_exchange(
        &mut self,
        _t: SimClock,
        ctrl: &ControlPacket,
        offers: &BTreeMap<NodeId, u8>,
    ) -> Vec<(NodeId, u8)> {
        (self.on_data)(ctrl, offers)
    }
}

/// A lossless scripted channel: every control packet decodes everywhere,
/// every scheduled reply arrives.
pub fn perfect_channel(
    cohort: Vec<NodeId>,
) -> ScriptedChannel<
    impl FnMut(&ControlPacket) -> BTreeSet<NodeId>,
    impl FnMut(&ControlPacket, &BTreeMap<NodeId, u8>) -> Vec<(NodeId, u8)>,
> {
    let all: BTreeSet<NodeId> = cohort.into_iter().collect();
    ScriptedChannel {
        on_control: move |_ctrl| all.clone(),
        on_data: |ctrl, offers: &BTreeMap<NodeId, u8>| match ctrl.primitive {
            Primitive::Glossy => ctrl
                .schedule
                .slot_assignment
                .iter()
                .filter_map(|n| offers.get(n).map(|&b| (*n, b)))
                .collect(),
            Primitive::Chaos => offers.iter().map(|(&n, &b)| (n, b)).collect(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retransmission_schedule_lists_missing_in_order() {
        let base = RoundSchedule::full(&[NodeId(1), NodeId(2), NodeId(3), NodeId(4)], 10, 1000);
        let missing: BTreeSet<NodeId> = [NodeId(4), NodeId(3)].into_iter().collect();
        let s = make_retransmission_schedule(&missing, &base);
        assert_eq!(s.n_slots, 2);
        assert_eq!(s.slot_assignment, vec![NodeId(3), NodeId(4)]);
        assert_eq!(s.slot_duration_ms, 10);
    }

    #[test]
    fn retransmission_can_cover_the_whole_cohort() {
        let cohort = vec![NodeId(1), NodeId(2), NodeId(3)];
        let base = RoundSchedule::full(&cohort, 50, 1000);
        let missing: BTreeSet<NodeId> = cohort.iter().copied().collect();
        let s = make_retransmission_schedule(&missing, &base);
        assert_eq!(s.n_slots, 3);
        assert_eq!(s.slot_assignment, cohort);
    }

    #[test]
    fn singleton_retransmission() {
        let base = RoundSchedule::full(&[NodeId(7)], 10, 1000);
        let missing: BTreeSet<NodeId> = [NodeId(7)].into_iter().collect();
        let s = make_retransmission_schedule(&missing, &base);
        assert_eq!(s.n_slots, 1);
        assert_eq!(s.slot_assignment, vec![NodeId(7)]);
    }
}
