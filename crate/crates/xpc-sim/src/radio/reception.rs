//! Per-receiver reception outcome for concurrent transmissions:
//! constructive interference for identical packets, the capture effect for
//! distinct ones, and jammer blanking on top of both.

use rand::Rng;

use super::interference::{interference_active, InterferenceProfile};
use super::topology::{NodeId, Topology};

/// Minimum signal-strength advantage for the capture effect.
pub const CAPTURE_MARGIN_DB: f64 = 3.0;

/// Identical packets arriving within this window decode as one.
pub const CONSTRUCTIVE_OFFSET_US: f64 = 0.5;

/// Maximum arrival offset under which capture can still occur.
pub const CAPTURE_OFFSET_US: f64 = 160.0;

/// Simulation time since transaction start, in integer microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct SimClock {
    pub now_us: u64,
}

impl SimClock {
    pub fn from_ms(ms: u64) -> Self {
        SimClock { now_us: ms * 1000 }
    }

    pub fn advanced(self, by_us: u64) -> Self {
        SimClock {
            now_us: self.now_us + by_us,
        }
    }
}

/// One concurrent transmission as observed at a receiver.
#[derive(Debug, Clone, Copy)]
pub struct Transmission<'a, P> {
    pub sender: NodeId,
    pub payload: &'a P,
    /// Relative arrival time at the receiver; sub-microsecond precision
    /// matters for the constructive-interference window.
    pub offset_us: f64,
}

/// What the receiver decoded, if anything. `tx_index` points into the
/// transmission slice passed to [`reception_outcome`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reception {
    Received { tx_index: usize },
    Lost,
}

/// Decides whether `receiver` decodes anything out of `transmissions` at
/// time `t`. Decision order:
///
/// 1. an active jammer neighbor blanks the channel outright;
/// 2. identical payloads within 0.5 µs of each other combine into one
///    transmission, received with the strongest link's PRR;
/// 3. differing payloads within 160 µs: the strongest sender captures the
///    channel iff it clears every other sender by at least 3 dB, again
///    subject to its link PRR;
/// 4. otherwise the slot is lost.
///
/// Panics if `transmissions` is empty or a sender is not a neighbor of the
/// receiver (caller bugs).
pub fn reception_outcome<P: PartialEq>(
    topo: &Topology,
    profile: &InterferenceProfile,
    receiver: NodeId,
    transmissions: &[Transmission<'_, P>],
    t: SimClock,
    rng: &mut impl Rng,
) -> Reception {
    assert!(
        !transmissions.is_empty(),
        "reception_outcome called with no concurrent transmissions"
    );
    let links: Vec<_> = transmissions
        .iter()
        .map(|tx| {
            topo.link(tx.sender, receiver).unwrap_or_else(|| {
                panic!("sender {} is not a neighbor of receiver {receiver}", tx.sender)
            })
        })
        .collect();

    // Rule 1: jammer blanking beats everything else.
    let jammed = profile
        .jammer_ids()
        .any(|j| topo.are_neighbors(j, receiver) && interference_active(profile, j, t));
    if jammed {
        return Reception::Lost;
    }

    let strongest = (0..transmissions.len())
        .max_by(|&a, &b| {
            links[a]
                .rssi_margin_db
                .partial_cmp(&links[b].rssi_margin_db)
                .unwrap()
        })
        .unwrap();
    let max_offset_gap = pairwise_offset_span(transmissions);
    let all_identical = transmissions
        .iter()
        .all(|tx| tx.payload == transmissions[0].payload);

    let effective_prr = (links[strongest].base_prr * profile.prr_scale()).clamp(0.0, 1.0);

    // Rule 2: constructive interference.
    if all_identical && max_offset_gap <= CONSTRUCTIVE_OFFSET_US {
        return bernoulli(rng, effective_prr, strongest);
    }

    // Rule 3: capture of the strongest distinct packet.
    if !all_identical && max_offset_gap <= CAPTURE_OFFSET_US {
        let captures = (0..transmissions.len()).all(|i| {
            i == strongest
                || links[strongest].rssi_margin_db - links[i].rssi_margin_db >= CAPTURE_MARGIN_DB
        });
        if captures {
            return bernoulli(rng, effective_prr, strongest);
        }
    }

    Reception::Lost
}

fn pairwise_offset_span<P>(transmissions: &[Transmission<'_, P>]) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for tx in transmissions {
        min = min.min(tx.offset_us);
        max = max.max(tx.offset_us);
    }
    max - min
}

fn bernoulli(rng: &mut impl Rng, prr: f64, tx_index: usize) -> Reception {
    if rng.random_bool(prr) {
        Reception::Received { tx_index }
    } else {
        Reception::Lost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::topology::LinkQuality;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_sender_topo(rssi_a: f64, rssi_b: f64, prr: f64) -> Topology {
        // receiver 0, senders 1 and 2
        Topology::from_parts(
            3,
            NodeId(0),
            &[
                (NodeId(1), NodeId(0), LinkQuality { base_prr: prr, rssi_margin_db: rssi_a }),
                (NodeId(0), NodeId(1), LinkQuality { base_prr: prr, rssi_margin_db: rssi_a }),
                (NodeId(2), NodeId(0), LinkQuality { base_prr: prr, rssi_margin_db: rssi_b }),
                (NodeId(0), NodeId(2), LinkQuality { base_prr: prr, rssi_margin_db: rssi_b }),
            ],
        )
        .unwrap()
    }

    fn txs<'a>(payloads: [&'a u8; 2], offsets: [f64; 2]) -> [Transmission<'a, u8>; 2] {
        [
            Transmission { sender: NodeId(1), payload: payloads[0], offset_us: offsets[0] },
            Transmission { sender: NodeId(2), payload: payloads[1], offset_us: offsets[1] },
        ]
    }

    #[test]
    fn identical_payloads_within_half_microsecond_combine() {
        let topo = two_sender_topo(4.0, 2.0, 1.0);
        let profile = InterferenceProfile::quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = 7u8;
        let r = reception_outcome(
            &topo,
            &profile,
            NodeId(0),
            &txs([&p, &p], [0.0, 0.3]),
            SimClock::default(),
            &mut rng,
        );
        assert!(matches!(r, Reception::Received { .. }));
    }

    #[test]
    fn capture_needs_three_db_margin() {
        let profile = InterferenceProfile::quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = (1u8, 2u8);

        // 5 dB margin, 100 µs offset: stronger packet captured.
        let topo = two_sender_topo(5.5, 0.5, 1.0);
        let r = reception_outcome(
            &topo,
            &profile,
            NodeId(0),
            &txs([&a, &b], [0.0, 100.0]),
            SimClock::default(),
            &mut rng,
        );
        assert_eq!(r, Reception::Received { tx_index: 0 });

        // 1 dB margin: lost, deterministically.
        let topo = two_sender_topo(3.0, 2.0, 1.0);
        for seed in 0..32 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = reception_outcome(
                &topo,
                &profile,
                NodeId(0),
                &txs([&a, &b], [0.0, 100.0]),
                SimClock::default(),
                &mut rng,
            );
            assert_eq!(r, Reception::Lost);
        }
    }

    /// With perfect links and a valid capture configuration, reception is
    /// certain no matter how many trials run.
    #[test]
    fn capture_probability_is_exactly_one_with_perfect_prr() {
        let topo = two_sender_topo(6.0, 1.0, 1.0);
        let profile = InterferenceProfile::quiet();
        let (a, b) = (1u8, 2u8);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5_000 {
            let r = reception_outcome(
                &topo,
                &profile,
                NodeId(0),
                &txs([&a, &b], [0.0, 159.0]),
                SimClock::default(),
                &mut rng,
            );
            assert_eq!(r, Reception::Received { tx_index: 0 });
        }
    }

    /// An always-on jammer neighbor blanks the receiver regardless of link
    /// quality: rule precedence.
    #[test]
    fn active_jammer_neighbor_always_wins() {
        // receiver 0, sender 1, jammer 2 adjacent to 0
        let topo = Topology::from_parts(
            3,
            NodeId(0),
            &[
                (NodeId(1), NodeId(0), LinkQuality { base_prr: 1.0, rssi_margin_db: 5.0 }),
                (NodeId(0), NodeId(1), LinkQuality { base_prr: 1.0, rssi_margin_db: 5.0 }),
                (NodeId(2), NodeId(0), LinkQuality { base_prr: 1.0, rssi_margin_db: 5.0 }),
                (NodeId(0), NodeId(2), LinkQuality { base_prr: 1.0, rssi_margin_db: 5.0 }),
            ],
        )
        .unwrap();
        let profile = InterferenceProfile::microwave_with_phases(20, 1.0, &[(NodeId(2), 0)]);
        let p = 9u8;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for ms in 0..200 {
            let r = reception_outcome(
                &topo,
                &profile,
                NodeId(0),
                &[Transmission { sender: NodeId(1), payload: &p, offset_us: 0.0 }],
                SimClock::from_ms(ms),
                &mut rng,
            );
            assert_eq!(r, Reception::Lost);
        }
    }

    #[test]
    #[should_panic(expected = "no concurrent transmissions")]
    fn empty_transmission_list_is_a_contract_violation() {
        let topo = two_sender_topo(1.0, 1.0, 1.0);
        let profile = InterferenceProfile::quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let _ = reception_outcome::<u8>(
            &topo,
            &profile,
            NodeId(0),
            &[],
            SimClock::default(),
            &mut rng,
        );
    }
}
