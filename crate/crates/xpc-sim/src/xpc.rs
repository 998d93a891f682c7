//! Host and participant callback state machines: retransmission counting,
//! duplicate-reply guarding, and timeout-abort behavior, parameterized by a
//! pluggable commit protocol.

use std::collections::BTreeSet;

use crate::protocol::{Decision, HostProto, PartProto, ProtocolKind, Vote};
use crate::radio::NodeId;

// Reply-byte wire table (bit-exact).
pub const REPLY_VOTE_YES: u8 = 0x01;
pub const REPLY_VOTE_NO: u8 = 0x02;
pub const REPLY_ACK_PRECOMMIT: u8 = 0x03;
pub const REPLY_HAVE_COMMITTED: u8 = 0x04;
pub const REPLY_DO_ABORT: u8 = 0x0F;

// Host-message wire table (bit-exact).
pub const MSG_VOTE_REQUEST: u8 = 0x11;
pub const MSG_PRE_COMMIT: u8 = 0x12;
pub const MSG_DO_COMMIT: u8 = 0x13;
pub const MSG_DO_ABORT: u8 = 0x1F;

/// Framework-level configuration of one transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct XpcConfig {
    /// Participant count, excluding the host (its own vote is implicit).
    pub cohort_nodes: u16,
    /// Retransmission limit per phase.
    pub timeout_retx: u32,
    /// Data-slot duration handed to the dissemination backend (the Chaos
    /// slot length; Glossy slots are radio parameters).
    pub slot_duration_ms: u32,
    /// Application time between transactions. Excluded from latency.
    pub period_ms: u32,
}

impl XpcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.cohort_nodes == 0 {
            return Err("cohort must have at least one participant".into());
        }
        if self.timeout_retx == 0 {
            return Err("timeout_retx must be at least 1".into());
        }
        if self.slot_duration_ms == 0 {
            return Err("slot duration must be positive".into());
        }
        Ok(())
    }
}

/// The host's bookkeeping for the current state: which cohort nodes have
/// replied, how many rounds the state has consumed, and whether a veto
/// (NO vote or abort echo) arrived.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HostState {
    pub state: HostProto,
    pub mess: u8,
    pub retr_cnt: u32,
    pub reply_num: u16,
    /// Bit i set iff cohort node i replied in the current state.
    pub replied: u64,
    pub veto_seen: bool,
    /// Set once the host exits by exhausting its retransmission budget.
    pub timed_out: Option<Decision>,
    /// Whether the terminal state was reached through the abort path.
    pub aborted_path: bool,
}

impl HostState {
    pub fn new(kind: ProtocolKind) -> Self {
        // The transaction bootstrap performs the Propose transition so the
        // first control packet already carries the vote request.
        let state = HostProto::initial(kind).transition(false).await_form();
        HostState {
            mess: state.message(),
            state,
            retr_cnt: 0,
            reply_num: 0,
            replied: 0,
            veto_seen: false,
            timed_out: None,
            aborted_path: false,
        }
    }

    pub fn has_replied(&self, cohort_index: usize) -> bool {
        self.replied & (1 << cohort_index) != 0
    }

    pub fn decision(&self) -> Decision {
        if let Some(d) = self.timed_out {
            return d;
        }
        if self.aborted_path {
            Decision::Aborted
        } else {
            Decision::Committed
        }
    }
}

/// What the host schedules after finishing a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundPlan {
    /// Same state, retransmission round for the missing repliers.
    Retransmit { missing: BTreeSet<NodeId> },
    /// State advanced; a fresh full round for the new state. Carries how
    /// many rounds the finished state used, for metrics.
    Advance { completed_attempts: u32 },
    /// Protocol complete; schedule the terminal empty round.
    Finish { message: u8, completed_attempts: u32 },
    /// Retransmission budget exhausted; abort via the terminal empty round.
    Timeout { message: u8 },
}

/// End-of-round host callback: counts the finished round, times out past
/// the retransmission limit, advances the protocol when every reply is in,
/// and prepares the next control message.
///
/// `retx_limit` is the effective limit for the dissemination mode (one
/// less than configured for Hybrid, which spends its first attempt on
/// Chaos).
pub fn host_on_round_finished(
    h: &mut HostState,
    cohort: &[NodeId],
    retx_limit: u32,
) -> RoundPlan {
    h.retr_cnt += 1;
    if h.retr_cnt > retx_limit {
        // Alg-order: the timeout check precedes the all-replied check.
        h.timed_out = Some(if h.state.commit_decided() {
            Decision::TimeoutCommitted
        } else {
            Decision::TimeoutAborted
        });
        return RoundPlan::Timeout { message: MSG_DO_ABORT };
    }
    if h.reply_num as usize == cohort.len() {
        let completed_attempts = h.retr_cnt;
        let veto = h.veto_seen && h.state.veto_sensitive();
        let decided = h.state.transition(veto);
        if decided.is_abort() {
            h.aborted_path = true;
        }
        let next = decided.await_form();
        if next.is_done() {
            return RoundPlan::Finish {
                message: h.mess,
                completed_attempts,
            };
        }
        h.state = next;
        h.mess = next.message();
        h.retr_cnt = 0;
        h.reply_num = 0;
        h.replied = 0;
        h.veto_seen = false;
        RoundPlan::Advance { completed_attempts }
    } else {
        let missing = cohort
            .iter()
            .enumerate()
            .filter(|(i, _)| !h.has_replied(*i))
            .map(|(_, &n)| n)
            .collect();
        RoundPlan::Retransmit { missing }
    }
}

/// Per-reply host callback. The first reply from each node in each state is
/// processed; duplicates are ignored. NO votes and abort echoes register as
/// vetoes while the outcome is still open.
pub fn host_on_slot_post(h: &mut HostState, cohort_index: usize, reply: u8) {
    if h.has_replied(cohort_index) {
        return;
    }
    h.replied |= 1 << cohort_index;
    h.reply_num += 1;
    if h.state.veto_sensitive() && matches!(reply, REPLY_VOTE_NO | REPLY_DO_ABORT) {
        h.veto_seen = true;
    }
}

/// One participant's framework state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParticipantState {
    pub node: NodeId,
    pub state: PartProto,
    pub prev_state: PartProto,
    /// Reply byte offered in this node's data slots; None until the first
    /// control packet is decoded.
    pub mess: Option<u8>,
    pub retr_cnt: u32,
    /// Set when the local retransmission timeout fired.
    pub timed_out: Option<Decision>,
}

impl ParticipantState {
    pub fn new(node: NodeId, kind: ProtocolKind) -> Self {
        let state = PartProto::initial(kind);
        ParticipantState {
            node,
            state,
            prev_state: state,
            mess: None,
            retr_cnt: 0,
            timed_out: None,
        }
    }

    /// Final classification once the transaction's rounds stop.
    pub fn decision(&self) -> Decision {
        if let Some(d) = self.timed_out {
            return d;
        }
        self.state.end_of_run_decision()
    }
}

/// Control-decode participant callback: counts the control packet toward
/// the local timeout, resolves the timeout if the budget is exhausted, then
/// lets the protocol process the host message. The counter resets whenever
/// the message caused a state change. Terminal nodes only refresh their
/// reply byte.
pub fn participant_on_ctrl_slot_post(
    p: &mut ParticipantState,
    message: u8,
    vote: Vote,
    retx_limit: u32,
) {
    if p.state.is_terminal() {
        let (state, reply) = p.state.transition(message, vote);
        p.state = state;
        p.mess = Some(reply);
        return;
    }
    p.retr_cnt += 1;
    if p.retr_cnt > retx_limit {
        let (state, reply, decision) = p.state.timeout();
        p.prev_state = p.state;
        p.state = state;
        p.mess = Some(reply);
        p.timed_out = Some(decision);
        return;
    }
    p.prev_state = p.state;
    let (state, reply) = p.state.transition(message, vote);
    p.state = state;
    p.mess = Some(reply);
    if p.state != p.prev_state {
        p.retr_cnt = 0;
    }
}

/// Slot-start participant callback: the node transmits its current reply
/// iff it owns the Glossy slot; in Chaos rounds every synced node
/// contributes unconditionally.
pub fn participant_on_slot_pre(p: &ParticipantState, slot_owner: NodeId) -> Option<u8> {
    if p.node == slot_owner {
        p.mess
    } else {
        None
    }
}
