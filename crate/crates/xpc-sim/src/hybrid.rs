//! The Hybrid dissemination policy: Chaos for the first attempt of every
//! phase, Glossy floods for the retransmissions, with the attempt budget
//! bounded so the Chaos round replaces one Glossy attempt.

use std::collections::BTreeSet;
use std::str::FromStr;

use crate::flood::ChaosAggregate;
use crate::radio::NodeId;
use crate::round::{PhaseTag, Primitive};
use crate::xpc::XpcConfig;

/// Which dissemination policy a transaction runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Glossy,
    Chaos,
    Hybrid,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Glossy => "glossy",
            Mode::Chaos => "chaos",
            Mode::Hybrid => "hybrid",
        }
    }

    /// Effective retransmission limit fed into the host/participant timeout
    /// checks. Hybrid runs one Chaos attempt plus `retx − 1` Glossy floods,
    /// so its limit is one lower than configured.
    pub fn effective_retx_limit(self, cfg: &XpcConfig) -> u32 {
        match self {
            Mode::Glossy | Mode::Chaos => cfg.timeout_retx,
            Mode::Hybrid => cfg.timeout_retx.saturating_sub(1),
        }
    }

    /// Backend used by a given attempt of a phase under this mode.
    pub fn primitive_for(self, phase: PhaseTag, attempt: u32, cfg: &XpcConfig) -> Primitive {
        match self {
            Mode::Glossy => Primitive::Glossy,
            Mode::Chaos => Primitive::Chaos,
            Mode::Hybrid => match select_primitive(phase, attempt, cfg) {
                AttemptDecision::Run(plan) => plan.primitive,
                // The engine's retransmission-limit check fires before this
                // attempt would run; mapping it to Glossy keeps the function
                // total.
                AttemptDecision::Timeout => Primitive::Glossy,
            },
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "glossy" => Ok(Mode::Glossy),
            "chaos" => Ok(Mode::Chaos),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(format!(
                "unknown primitive '{other}' (expected glossy|chaos|hybrid)"
            )),
        }
    }
}

/// One planned dissemination attempt under the Hybrid policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttemptPlan {
    pub phase: PhaseTag,
    pub attempt: u32,
    pub primitive: Primitive,
    /// Chaos slot budget; only the first attempt carries one.
    pub chaos_slot_ms: Option<u32>,
}

/// Outcome of planning an attempt: run it, or signal that the phase's
/// budget is exhausted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttemptDecision {
    Run(AttemptPlan),
    Timeout,
}

/// Hybrid's per-attempt choice: attempt 0 is one Chaos round of the
/// configured slot duration, attempts 1 through `timeout_retx − 1` are
/// Glossy retransmission floods, and reaching `timeout_retx` times the
/// phase out.
pub fn select_primitive(phase: PhaseTag, attempt: u32, cfg: &XpcConfig) -> AttemptDecision {
    if attempt >= cfg.timeout_retx {
        return AttemptDecision::Timeout;
    }
    if attempt == 0 {
        AttemptDecision::Run(AttemptPlan {
            phase,
            attempt,
            primitive: Primitive::Chaos,
            chaos_slot_ms: Some(cfg.slot_duration_ms),
        })
    } else {
        AttemptDecision::Run(AttemptPlan {
            phase,
            attempt,
            primitive: Primitive::Glossy,
            chaos_slot_ms: None,
        })
    }
}

/// Unpacks a finished Chaos aggregate into per-node reply events plus the
/// set of cohort nodes still missing, which seeds the Glossy
/// retransmission schedule.
pub fn translate_packet(
    aggregate: &ChaosAggregate,
    cohort: &[NodeId],
) -> (Vec<(NodeId, u8)>, BTreeSet<NodeId>) {
    assert_eq!(
        aggregate.cohort_size() as usize,
        cohort.len(),
        "aggregate sized for a different cohort"
    );
    let replies: Vec<(NodeId, u8)> = aggregate
        .contributions()
        .map(|(idx, byte)| (cohort[idx], byte))
        .collect();
    let missing = cohort
        .iter()
        .enumerate()
        .filter(|(i, _)| !aggregate.has_bit(*i))
        .map(|(_, &n)| n)
        .collect();
    (replies, missing)
}
