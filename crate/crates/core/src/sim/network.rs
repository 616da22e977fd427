use serde::{Deserialize, Serialize};

use crate::membership::ProcessId;

/// Affine latency with independent loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkParams {
    pub base_latency_ms: f64,
    pub per_byte_ms: f64,
    pub loss_prob: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self { base_latency_ms: 1.5, per_byte_ms: 0.005, loss_prob: 0.0 }
    }
}

impl NetworkParams {
    /// Delivery delay in seconds for a message of `size_bytes`.
    pub fn latency(&self, size_bytes: u64) -> f64 {
        (self.base_latency_ms + self.per_byte_ms * size_bytes as f64) / 1000.0
    }
}

/// Reachability as an equivalence relation: processes with the same class id
/// can talk to each other.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    class: Vec<u32>,
}

impl Partition {
    pub fn healed(processes: usize) -> Self {
        Self { class: vec![0; processes] }
    }

    /// Each listed group becomes its own class; everyone unlisted shares class 0.
    /// An empty list heals the network.
    pub fn from_groups(processes: usize, groups: &[Vec<ProcessId>]) -> Self {
        let mut class = vec![0; processes];
        for (g, members) in groups.iter().enumerate() {
            for &p in members {
                if p < processes {
                    class[p] = g as u32 + 1;
                }
            }
        }
        Self { class }
    }

    pub fn connected(&self, a: ProcessId, b: ProcessId) -> bool {
        self.class.get(a) == self.class.get(b)
    }

    pub fn is_healed(&self) -> bool {
        self.class.windows(2).all(|w| w[0] == w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_formula() {
        let net = NetworkParams::default();
        assert!((net.latency(1000) - 0.0065).abs() < 1e-15);
        assert!((net.latency(0) - 0.0015).abs() < 1e-15);
    }

    #[test]
    fn partition_classes() {
        let p = Partition::from_groups(6, &[vec![0, 1, 2]]);
        assert!(p.connected(0, 2));
        assert!(p.connected(3, 5));
        assert!(!p.connected(0, 3));
        assert!(!p.is_healed());
        assert!(Partition::from_groups(6, &[]).is_healed());
        let q = Partition::from_groups(4, &[vec![0], vec![1]]);
        assert!(!q.connected(0, 1));
        assert!(q.connected(2, 3));
    }
}
