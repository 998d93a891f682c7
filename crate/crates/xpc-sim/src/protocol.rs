//! Reference two-phase and three-phase commit state machines, expressed as
//! pure transition tables over the wire-byte vocabulary in [`crate::xpc`].

use std::str::FromStr;

use crate::radio::NodeId;
use crate::round::PhaseTag;
use crate::xpc::{
    MSG_DO_ABORT, MSG_DO_COMMIT, MSG_PRE_COMMIT, MSG_VOTE_REQUEST, REPLY_ACK_PRECOMMIT,
    REPLY_DO_ABORT, REPLY_HAVE_COMMITTED, REPLY_VOTE_NO, REPLY_VOTE_YES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    #[serde(rename = "2pc")]
    TwoPc,
    #[serde(rename = "3pc")]
    ThreePc,
}

impl ProtocolKind {
    /// Reply-bearing phases: vote and commit, plus pre-commit for 3PC.
    pub fn phases(self) -> usize {
        match self {
            ProtocolKind::TwoPc => 2,
            ProtocolKind::ThreePc => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::TwoPc => "2pc",
            ProtocolKind::ThreePc => "3pc",
        }
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "2pc" => Ok(ProtocolKind::TwoPc),
            "3pc" => Ok(ProtocolKind::ThreePc),
            other => Err(format!("unknown protocol '{other}' (expected 2pc|3pc)")),
        }
    }
}

/// How one node's transaction ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Committed,
    Aborted,
    TimeoutAborted,
    TimeoutCommitted,
}

impl Decision {
    pub fn is_timeout(self) -> bool {
        matches!(self, Decision::TimeoutAborted | Decision::TimeoutCommitted)
    }
}

/// A participant's configured vote on the proposed value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vote {
    Yes,
    No,
}

impl Vote {
    pub fn reply_byte(self) -> u8 {
        match self {
            Vote::Yes => REPLY_VOTE_YES,
            Vote::No => REPLY_VOTE_NO,
        }
    }
}

// ---------------------------------------------------------------------------
// Host side
// ---------------------------------------------------------------------------

/// Host states of two-phase commit. `Propose`, `Commit` and `Done` are
/// decision points; replies are collected in the `Await*` states and the
/// abort phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TwoPcState {
    Propose,
    AwaitVotes,
    Commit,
    AwaitHaveCommitted,
    Done,
    Abort,
}

/// Host states of three-phase commit; `PreCommit` is the extra decision
/// point between the vote and commit phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThreePcState {
    Propose,
    AwaitVotes,
    PreCommit,
    AwaitAcks,
    Commit,
    AwaitHaveCommitted,
    Done,
    Abort,
}

/// Advances the 2PC host once every expected reply is in. `veto` is true
/// if any NO vote (or abort echo) was processed in the current state.
pub fn twopc_host_transition(state: TwoPcState, veto: bool) -> TwoPcState {
    use TwoPcState::*;
    match state {
        Propose => AwaitVotes,
        AwaitVotes => {
            if veto {
                Abort
            } else {
                Commit
            }
        }
        Commit | AwaitHaveCommitted => Done,
        Abort => Done,
        Done => Done,
    }
}

pub fn threepc_host_transition(state: ThreePcState, veto: bool) -> ThreePcState {
    use ThreePcState::*;
    match state {
        Propose => AwaitVotes,
        AwaitVotes => {
            if veto {
                Abort
            } else {
                PreCommit
            }
        }
        PreCommit | AwaitAcks => {
            if veto {
                Abort
            } else {
                Commit
            }
        }
        Commit | AwaitHaveCommitted => Done,
        Abort => Done,
        Done => Done,
    }
}

/// Host state machine dispatcher shared by the round engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HostProto {
    Two(TwoPcState),
    Three(ThreePcState),
}

impl HostProto {
    pub fn initial(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::TwoPc => HostProto::Two(TwoPcState::Propose),
            ProtocolKind::ThreePc => HostProto::Three(ThreePcState::Propose),
        }
    }

    pub fn transition(self, veto: bool) -> Self {
        match self {
            HostProto::Two(s) => HostProto::Two(twopc_host_transition(s, veto)),
            HostProto::Three(s) => HostProto::Three(threepc_host_transition(s, veto)),
        }
    }

    /// Maps a decision state to the state in which its replies are
    /// collected (Commit decided ⇒ awaiting HAVE_COMMITTED, and so on).
    pub fn await_form(self) -> Self {
        match self {
            HostProto::Two(TwoPcState::Propose) => HostProto::Two(TwoPcState::AwaitVotes),
            HostProto::Two(TwoPcState::Commit) => HostProto::Two(TwoPcState::AwaitHaveCommitted),
            HostProto::Three(ThreePcState::Propose) => HostProto::Three(ThreePcState::AwaitVotes),
            HostProto::Three(ThreePcState::PreCommit) => HostProto::Three(ThreePcState::AwaitAcks),
            HostProto::Three(ThreePcState::Commit) => {
                HostProto::Three(ThreePcState::AwaitHaveCommitted)
            }
            other => other,
        }
    }

    /// Control-packet message disseminated while in this state.
    pub fn message(self) -> u8 {
        match self {
            HostProto::Two(TwoPcState::AwaitVotes) | HostProto::Three(ThreePcState::AwaitVotes) => {
                MSG_VOTE_REQUEST
            }
            HostProto::Three(ThreePcState::PreCommit) | HostProto::Three(ThreePcState::AwaitAcks) => {
                MSG_PRE_COMMIT
            }
            HostProto::Two(TwoPcState::Commit)
            | HostProto::Two(TwoPcState::AwaitHaveCommitted)
            | HostProto::Three(ThreePcState::Commit)
            | HostProto::Three(ThreePcState::AwaitHaveCommitted) => MSG_DO_COMMIT,
            HostProto::Two(TwoPcState::Abort) | HostProto::Three(ThreePcState::Abort) => {
                MSG_DO_ABORT
            }
            // Propose/Done never label a reply-bearing round; the engine
            // substitutes the final decision message for the empty round.
            _ => MSG_DO_ABORT,
        }
    }

    /// Tag of the reply-bearing phase this state represents, if any.
    pub fn phase_tag(self) -> Option<PhaseTag> {
        match self {
            HostProto::Two(TwoPcState::AwaitVotes) | HostProto::Three(ThreePcState::AwaitVotes) => {
                Some(PhaseTag::P1)
            }
            HostProto::Three(ThreePcState::AwaitAcks) => Some(PhaseTag::P2),
            HostProto::Two(TwoPcState::AwaitHaveCommitted) => Some(PhaseTag::P2),
            HostProto::Three(ThreePcState::AwaitHaveCommitted) => Some(PhaseTag::P3),
            _ => None,
        }
    }

    pub fn is_done(self) -> bool {
        matches!(
            self,
            HostProto::Two(TwoPcState::Done) | HostProto::Three(ThreePcState::Done)
        )
    }

    pub fn is_abort(self) -> bool {
        matches!(
            self,
            HostProto::Two(TwoPcState::Abort) | HostProto::Three(ThreePcState::Abort)
        )
    }

    /// True once the host has irrevocably decided to commit.
    pub fn commit_decided(self) -> bool {
        matches!(
            self,
            HostProto::Two(TwoPcState::Commit)
                | HostProto::Two(TwoPcState::AwaitHaveCommitted)
                | HostProto::Three(ThreePcState::Commit)
                | HostProto::Three(ThreePcState::AwaitHaveCommitted)
        )
    }

    /// Vetoes only matter while the outcome is still open.
    pub fn veto_sensitive(self) -> bool {
        matches!(
            self,
            HostProto::Two(TwoPcState::AwaitVotes)
                | HostProto::Three(ThreePcState::AwaitVotes)
                | HostProto::Three(ThreePcState::AwaitAcks)
        )
    }

    pub fn abort_state(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::TwoPc => HostProto::Two(TwoPcState::Abort),
            ProtocolKind::ThreePc => HostProto::Three(ThreePcState::Abort),
        }
    }
}

// ---------------------------------------------------------------------------
// Participant side
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TwoPcPart {
    Idle,
    Voted,
    Committed,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThreePcPart {
    Idle,
    Voted,
    PreCommitted,
    Committed,
    Aborted,
}

/// Applies one decoded host message to a 2PC participant. Returns the new
/// state and the reply byte the node will offer in its next data slot.
/// Committed and Aborted are terminal: later messages re-send the same
/// reply but never reverse the local outcome.
pub fn twopc_participant_transition(state: TwoPcPart, msg: u8, vote: Vote) -> (TwoPcPart, u8) {
    use TwoPcPart::*;
    match (state, msg) {
        (Committed, _) => (Committed, REPLY_HAVE_COMMITTED),
        (Aborted, _) => (Aborted, REPLY_DO_ABORT),
        (_, MSG_VOTE_REQUEST) => (Voted, vote.reply_byte()),
        (_, MSG_DO_COMMIT) => (Committed, REPLY_HAVE_COMMITTED),
        (_, MSG_DO_ABORT) => (Aborted, REPLY_DO_ABORT),
        (s, _) => (s, REPLY_DO_ABORT),
    }
}

pub fn threepc_participant_transition(state: ThreePcPart, msg: u8, vote: Vote) -> (ThreePcPart, u8) {
    use ThreePcPart::*;
    match (state, msg) {
        (Committed, _) => (Committed, REPLY_HAVE_COMMITTED),
        (Aborted, _) => (Aborted, REPLY_DO_ABORT),
        (_, MSG_VOTE_REQUEST) => (Voted, vote.reply_byte()),
        (_, MSG_PRE_COMMIT) => (PreCommitted, REPLY_ACK_PRECOMMIT),
        (_, MSG_DO_COMMIT) => (Committed, REPLY_HAVE_COMMITTED),
        (_, MSG_DO_ABORT) => (Aborted, REPLY_DO_ABORT),
        (s, _) => (s, REPLY_DO_ABORT),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PartProto {
    Two(TwoPcPart),
    Three(ThreePcPart),
}

impl PartProto {
    pub fn initial(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::TwoPc => PartProto::Two(TwoPcPart::Idle),
            ProtocolKind::ThreePc => PartProto::Three(ThreePcPart::Idle),
        }
    }

    pub fn transition(self, msg: u8, vote: Vote) -> (Self, u8) {
        match self {
            PartProto::Two(s) => {
                let (s, r) = twopc_participant_transition(s, msg, vote);
                (PartProto::Two(s), r)
            }
            PartProto::Three(s) => {
                let (s, r) = threepc_participant_transition(s, msg, vote);
                (PartProto::Three(s), r)
            }
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            PartProto::Two(TwoPcPart::Committed)
                | PartProto::Two(TwoPcPart::Aborted)
                | PartProto::Three(ThreePcPart::Committed)
                | PartProto::Three(ThreePcPart::Aborted)
        )
    }

    /// Resolves a local retransmission timeout: abort, unless a 3PC node
    /// already passed the pre-commit gate, in which case it commits.
    pub fn timeout(self) -> (Self, u8, Decision) {
        match self {
            PartProto::Three(ThreePcPart::PreCommitted) => (
                PartProto::Three(ThreePcPart::Committed),
                REPLY_HAVE_COMMITTED,
                Decision::TimeoutCommitted,
            ),
            PartProto::Two(_) => (
                PartProto::Two(TwoPcPart::Aborted),
                REPLY_DO_ABORT,
                Decision::TimeoutAborted,
            ),
            PartProto::Three(_) => (
                PartProto::Three(ThreePcPart::Aborted),
                REPLY_DO_ABORT,
                Decision::TimeoutAborted,
            ),
        }
    }

    /// Classifies the node when a transaction's round sequence ends while
    /// it is still undecided (it never heard the outcome).
    pub fn end_of_run_decision(self) -> Decision {
        match self {
            PartProto::Two(TwoPcPart::Committed) | PartProto::Three(ThreePcPart::Committed) => {
                Decision::Committed
            }
            PartProto::Two(TwoPcPart::Aborted) | PartProto::Three(ThreePcPart::Aborted) => {
                Decision::Aborted
            }
            PartProto::Three(ThreePcPart::PreCommitted) => Decision::TimeoutCommitted,
            _ => Decision::TimeoutAborted,
        }
    }
}

/// Per-node decisions plus round accounting for one finished transaction.
#[derive(Debug, Clone)]
pub struct TransactionOutcome {
    pub host: Decision,
    pub participants: Vec<(NodeId, Decision)>,
    pub rounds_used: u32,
}

impl TransactionOutcome {
    pub fn decisions(&self) -> impl Iterator<Item = Decision> + '_ {
        std::iter::once(self.host).chain(self.participants.iter().map(|&(_, d)| d))
    }

    pub fn any_timeout(&self) -> bool {
        self.decisions().any(|d| d.is_timeout())
    }

    pub fn all_committed(&self) -> bool {
        self.decisions().all(|d| d == Decision::Committed)
    }

    pub fn all_aborted(&self) -> bool {
        self.decisions().all(|d| d == Decision::Aborted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twopc_unanimous_yes_commits() {
        assert_eq!(
            twopc_host_transition(TwoPcState::AwaitVotes, false),
            TwoPcState::Commit
        );
        assert_eq!(
            HostProto::Two(TwoPcState::Commit).await_form().message(),
            MSG_DO_COMMIT
        );
    }

    #[test]
    fn twopc_any_no_aborts() {
        assert_eq!(
            twopc_host_transition(TwoPcState::AwaitVotes, true),
            TwoPcState::Abort
        );
        assert_eq!(HostProto::Two(TwoPcState::Abort).message(), MSG_DO_ABORT);
    }

    #[test]
    fn twopc_all_have_committed_is_terminal() {
        assert_eq!(
            twopc_host_transition(TwoPcState::AwaitHaveCommitted, false),
            TwoPcState::Done
        );
    }

    #[test]
    fn threepc_vote_then_ack_then_commit() {
        assert_eq!(
            threepc_host_transition(ThreePcState::AwaitVotes, false),
            ThreePcState::PreCommit
        );
        assert_eq!(
            HostProto::Three(ThreePcState::PreCommit).await_form().message(),
            MSG_PRE_COMMIT
        );
        assert_eq!(
            threepc_host_transition(ThreePcState::AwaitAcks, false),
            ThreePcState::Commit
        );
        assert_eq!(
            threepc_host_transition(ThreePcState::AwaitHaveCommitted, false),
            ThreePcState::Done
        );
    }

    #[test]
    fn participant_vote_request_yields_vote() {
        let (s, r) = twopc_participant_transition(TwoPcPart::Idle, MSG_VOTE_REQUEST, Vote::Yes);
        assert_eq!((s, r), (TwoPcPart::Voted, REPLY_VOTE_YES));
        let (s, r) = twopc_participant_transition(TwoPcPart::Idle, MSG_VOTE_REQUEST, Vote::No);
        assert_eq!((s, r), (TwoPcPart::Voted, REPLY_VOTE_NO));
    }

    #[test]
    fn participant_commit_and_abort_paths() {
        let (s, r) = twopc_participant_transition(TwoPcPart::Voted, MSG_DO_COMMIT, Vote::Yes);
        assert_eq!((s, r), (TwoPcPart::Committed, REPLY_HAVE_COMMITTED));
        let (s, r) = twopc_participant_transition(TwoPcPart::Voted, MSG_DO_ABORT, Vote::Yes);
        assert_eq!((s, r), (TwoPcPart::Aborted, REPLY_DO_ABORT));
    }

    #[test]
    fn committed_participant_ignores_late_abort() {
        let (s, r) = twopc_participant_transition(TwoPcPart::Committed, MSG_DO_ABORT, Vote::Yes);
        assert_eq!((s, r), (TwoPcPart::Committed, REPLY_HAVE_COMMITTED));
    }

    #[test]
    fn threepc_precommit_ack_and_timeout_sides() {
        let (s, r) = threepc_participant_transition(ThreePcPart::Voted, MSG_PRE_COMMIT, Vote::Yes);
        assert_eq!((s, r), (ThreePcPart::PreCommitted, REPLY_ACK_PRECOMMIT));

        // Timeout past the pre-commit gate commits locally.
        let (s, r, d) = PartProto::Three(ThreePcPart::PreCommitted).timeout();
        assert_eq!(s, PartProto::Three(ThreePcPart::Committed));
        assert_eq!(r, REPLY_HAVE_COMMITTED);
        assert_eq!(d, Decision::TimeoutCommitted);

        // Timeout before it aborts.
        let (s, _, d) = PartProto::Three(ThreePcPart::Voted).timeout();
        assert_eq!(s, PartProto::Three(ThreePcPart::Aborted));
        assert_eq!(d, Decision::TimeoutAborted);
    }
}
