//! Machine-readable run statistics: one self-describing JSON object per run.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use housekit_core::sim::SimStats;

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StageRecord {
    pub stage: u32,
    pub rounds: u64,
    pub messages: u64,
    pub cycles_found: usize,
    pub cycle_lengths: Vec<usize>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatsRecord {
    pub algorithm: String,
    pub n: usize,
    pub seed: u64,
    pub rounds: u64,
    pub messages: u64,
    pub stages: usize,
    pub per_stage: Vec<StageRecord>,
    pub wall_time_ms: f64,
    /// Digest of the message delivery trace, hex-encoded.
    pub trace_digest: String,
}

impl StatsRecord {
    pub fn new(
        algorithm: &str,
        n: usize,
        seed: u64,
        stats: &SimStats,
        trace_digest: u64,
        wall: Duration,
    ) -> Self {
        Self {
            algorithm: algorithm.to_string(),
            n,
            seed,
            rounds: stats.rounds,
            messages: stats.messages,
            stages: stats.per_stage.len(),
            per_stage: stats
                .per_stage
                .iter()
                .map(|s| StageRecord {
                    stage: s.stage,
                    rounds: s.rounds,
                    messages: s.messages,
                    cycles_found: s.cycles_found,
                    cycle_lengths: s.cycle_lengths.clone(),
                })
                .collect(),
            wall_time_ms: wall.as_secs_f64() * 1e3,
            trace_digest: format!("{trace_digest:016x}"),
        }
    }
}
