use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Work done by one decode (or a sum over several).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostCounters {
    pub nmt_distribution_calls: u64,
    pub qe_extend_calls: u64,
    pub merged_evaluations: u64,
    /// Seconds. Informational only; never compared in tests.
    pub wall_time: f64,
}

impl AddAssign<&CostCounters> for CostCounters {
    fn add_assign(&mut self, other: &CostCounters) {
        self.nmt_distribution_calls += other.nmt_distribution_calls;
        self.qe_extend_calls += other.qe_extend_calls;
        self.merged_evaluations += other.merged_evaluations;
        self.wall_time += other.wall_time;
    }
}

impl CostCounters {
    /// Same counts with the wall time zeroed, for reproducibility checks.
    pub fn without_time(&self) -> CostCounters {
        CostCounters {
            wall_time: 0.0,
            ..self.clone()
        }
    }
}
