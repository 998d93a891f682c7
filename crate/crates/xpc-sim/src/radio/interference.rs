//! Channel disturbance generators: background-noise PRR scaling and
//! JamLab-style active jammers (periodic microwave, bursty WiFi).

use std::str::FromStr;

use rand::Rng;

use super::reception::SimClock;
use super::topology::NodeId;

/// The four interference environments the harness can run under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceKind {
    /// Night-time background noise; clean channel.
    Low,
    /// Day-time background noise, modeled as a multiplicative PRR scale.
    High,
    /// Emulated non-saturated WiFi traffic: bursty on/off jamming.
    Wifi,
    /// Emulated microwave-oven interference: periodic duty-cycled jamming.
    Microwave,
}

impl InterferenceKind {
    pub fn uses_jammers(self) -> bool {
        matches!(self, InterferenceKind::Wifi | InterferenceKind::Microwave)
    }

    pub fn name(self) -> &'static str {
        match self {
            InterferenceKind::Low => "low",
            InterferenceKind::High => "high",
            InterferenceKind::Wifi => "wifi",
            InterferenceKind::Microwave => "microwave",
        }
    }
}

impl FromStr for InterferenceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(InterferenceKind::Low),
            "high" => Ok(InterferenceKind::High),
            "wifi" => Ok(InterferenceKind::Wifi),
            "microwave" => Ok(InterferenceKind::Microwave),
            other => Err(format!(
                "unknown interference kind '{other}' (expected low|high|wifi|microwave)"
            )),
        }
    }
}

/// Tunable knobs of the disturbance generators. Defaults are simulator
/// choices, not measured values, and every one is config-overridable.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct InterferenceParams {
    /// PRR multiplier under High interference (Low is always 1.0).
    pub high_prr_scale: f64,
    /// Microwave on/off cycle length.
    pub microwave_period_ms: u32,
    /// Fraction of each microwave period spent jamming, in [0, 1].
    pub microwave_duty: f64,
    /// Mean of the exponential idle gap between WiFi bursts.
    pub wifi_idle_mean_ms: f64,
    /// Fixed WiFi burst length.
    pub wifi_burst_ms: f64,
}

impl Default for InterferenceParams {
    fn default() -> Self {
        InterferenceParams {
            high_prr_scale: 0.9,
            microwave_period_ms: 20,
            microwave_duty: 0.5,
            wifi_idle_mean_ms: 20.0,
            wifi_burst_ms: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Jammer {
    id: NodeId,
    /// Microwave: phase offset into the period, drawn per run.
    phase_us: u64,
    /// WiFi: pre-generated [start, end) jamming intervals, sorted.
    bursts: Vec<(u64, u64)>,
}

/// One fully-instantiated channel disturbance for a single run: kind,
/// PRR scale, and per-jammer on/off timelines derived from the run seed.
#[derive(Debug, Clone)]
pub struct InterferenceProfile {
    kind: InterferenceKind,
    prr_scale: f64,
    period_us: u64,
    duty: f64,
    jammers: Vec<Jammer>,
}

impl InterferenceProfile {
    /// Instantiates a profile for one run. `horizon_us` bounds the WiFi
    /// timeline pre-generation and must cover the whole transaction.
    pub fn build(
        kind: InterferenceKind,
        params: &InterferenceParams,
        jammer_ids: &[NodeId],
        horizon_us: u64,
        rng: &mut impl Rng,
    ) -> Self {
        let period_us = params.microwave_period_ms as u64 * 1000;
        let jammers = if kind.uses_jammers() {
            jammer_ids
                .iter()
                .map(|&id| {
                    let phase_us = rng.random_range(0..period_us.max(1));
                    let bursts = if kind == InterferenceKind::Wifi {
                        wifi_bursts(params, horizon_us, rng)
                    } else {
                        Vec::new()
                    };
                    Jammer { id, phase_us, bursts }
                })
                .collect()
        } else {
            Vec::new()
        };
        let prr_scale = match kind {
            InterferenceKind::High => params.high_prr_scale,
            _ => 1.0,
        };
        InterferenceProfile {
            kind,
            prr_scale,
            period_us,
            duty: params.microwave_duty,
            jammers,
        }
    }

    /// Clean channel, no jammers. Handy default for tests.
    pub fn quiet() -> Self {
        InterferenceProfile {
            kind: InterferenceKind::Low,
            prr_scale: 1.0,
            period_us: 20_000,
            duty: 0.5,
            jammers: Vec::new(),
        }
    }

    /// Test constructor: microwave jammers with explicit phase offsets.
    pub fn microwave_with_phases(
        period_ms: u32,
        duty: f64,
        jammers: &[(NodeId, u64)],
    ) -> Self {
        InterferenceProfile {
            kind: InterferenceKind::Microwave,
            prr_scale: 1.0,
            period_us: period_ms as u64 * 1000,
            duty,
            jammers: jammers
                .iter()
                .map(|&(id, phase_us)| Jammer {
                    id,
                    phase_us,
                    bursts: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn kind(&self) -> InterferenceKind {
        self.kind
    }

    /// Multiplicative PRR factor applied to every link (1.0 except High).
    pub fn prr_scale(&self) -> f64 {
        self.prr_scale
    }

    pub fn jammer_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.jammers.iter().map(|j| j.id)
    }

    pub fn is_jammer(&self, node: NodeId) -> bool {
        self.jammers.iter().any(|j| j.id == node)
    }

    fn jammer(&self, node: NodeId) -> Option<&Jammer> {
        self.jammers.iter().find(|j| j.id == node)
    }
}

fn wifi_bursts(params: &InterferenceParams, horizon_us: u64, rng: &mut impl Rng) -> Vec<(u64, u64)> {
    let idle_mean = params.wifi_idle_mean_ms * 1000.0;
    let burst = (params.wifi_burst_ms * 1000.0) as u64;
    let mut out = Vec::new();
    let mut t = 0u64;
    while t < horizon_us {
        let u: f64 = rng.random_range(0.0..1.0);
        let idle = (-idle_mean * (1.0 - u).ln()) as u64;
        t = t.saturating_add(idle);
        let end = t.saturating_add(burst);
        out.push((t, end));
        t = end;
    }
    out
}

/// Is `jammer` actively blanking its neighborhood at time `t`?
///
/// Low/High never activate (they act through the PRR scale); Microwave is
/// on for the first `duty` fraction of each period (per-jammer phase);
/// WiFi is on during its pre-generated bursts.
pub fn interference_active(profile: &InterferenceProfile, jammer: NodeId, t: SimClock) -> bool {
    let Some(j) = profile.jammer(jammer) else {
        return false;
    };
    match profile.kind {
        InterferenceKind::Low | InterferenceKind::High => false,
        InterferenceKind::Microwave => {
            let pos = (t.now_us + j.phase_us) % profile.period_us;
            (pos as f64) < profile.duty * profile.period_us as f64
        }
        InterferenceKind::Wifi => {
            // Bursts are sorted and disjoint.
            match j.bursts.binary_search_by(|&(start, _)| start.cmp(&t.now_us)) {
                Ok(_) => true,
                Err(0) => false,
                Err(i) => t.now_us < j.bursts[i - 1].1,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn clock(ms: u64) -> SimClock {
        SimClock { now_us: ms * 1000 }
    }

    #[test]
    fn microwave_duty_window() {
        let p = InterferenceProfile::microwave_with_phases(20, 0.5, &[(NodeId(3), 0)]);
        assert!(interference_active(&p, NodeId(3), clock(5)));
        assert!(!interference_active(&p, NodeId(3), clock(15)));
    }

    #[test]
    fn low_and_high_never_activate() {
        let params = InterferenceParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for kind in [InterferenceKind::Low, InterferenceKind::High] {
            let p = InterferenceProfile::build(kind, &params, &[NodeId(1)], 1_000_000, &mut rng);
            for ms in 0..100 {
                assert!(!interference_active(&p, NodeId(1), clock(ms)));
            }
        }
        let low = InterferenceProfile::build(
            InterferenceKind::Low,
            &params,
            &[],
            1_000_000,
            &mut rng,
        );
        let high = InterferenceProfile::build(
            InterferenceKind::High,
            &params,
            &[],
            1_000_000,
            &mut rng,
        );
        assert_eq!(low.prr_scale(), 1.0);
        assert_eq!(high.prr_scale(), 0.9);
    }

    #[test]
    fn wifi_trace_reproducible_from_seed() {
        let params = InterferenceParams::default();
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            InterferenceProfile::build(
                InterferenceKind::Wifi,
                &params,
                &[NodeId(2)],
                2_000_000,
                &mut rng,
            )
        };
        let (a, b) = (build(), build());
        for us in (0..2_000_000).step_by(137) {
            let t = SimClock { now_us: us };
            assert_eq!(
                interference_active(&a, NodeId(2), t),
                interference_active(&b, NodeId(2), t)
            );
        }
    }

    /// On-time fraction over many periods converges to the duty cycle.
    #[test]
    fn microwave_periodicity_matches_duty() {
        let duty = 0.5;
        let p = InterferenceProfile::microwave_with_phases(20, duty, &[(NodeId(0), 7_321)]);
        let periods = 200u64;
        let step_us = 50u64;
        let total = periods * 20_000 / step_us;
        let mut on = 0u64;
        for i in 0..total {
            if interference_active(&p, NodeId(0), SimClock { now_us: i * step_us }) {
                on += 1;
            }
        }
        let frac = on as f64 / total as f64;
        assert!((frac - duty).abs() <= 1.0 / periods as f64 + 0.005, "frac {frac}");
    }
}
