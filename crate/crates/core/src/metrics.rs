use std::ops::{Add, AddAssign};
use std::time::{Duration, Instant};

/// Per-call cost counters.
///
/// `element_reads` counts array cells touched (reads, and for builds the
/// cells written), `node_hops` counts transitions between tree nodes, and
/// `bytes` carries a structure footprint where one is meaningful. Counters
/// are returned by value from each operation; nothing is accumulated in
/// shared state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpMetrics {
    pub wall_ns: u64,
    pub element_reads: u64,
    pub node_hops: u64,
    pub bytes: u64,
}

impl OpMetrics {
    pub fn with_wall(mut self, elapsed: Duration) -> Self {
        self.wall_ns = elapsed.as_nanos().min(u64::MAX as u128) as u64;
        self
    }

    /// The same counters with the wall clock zeroed, for determinism checks.
    pub fn counters(&self) -> OpMetrics {
        OpMetrics { wall_ns: 0, ..*self }
    }
}

impl Add for OpMetrics {
    type Output = OpMetrics;

    fn add(self, rhs: OpMetrics) -> OpMetrics {
        OpMetrics {
            wall_ns: self.wall_ns + rhs.wall_ns,
            element_reads: self.element_reads + rhs.element_reads,
            node_hops: self.node_hops + rhs.node_hops,
            bytes: self.bytes + rhs.bytes,
        }
    }
}

impl AddAssign for OpMetrics {
    fn add_assign(&mut self, rhs: OpMetrics) {
        *self = *self + rhs;
    }
}

/// Runs `f` and stamps the elapsed wall time onto the metrics it returns.
pub(crate) fn timed<T>(f: impl FnOnce() -> (T, OpMetrics)) -> (T, OpMetrics) {
    let start = Instant::now();
    let (value, metrics) = f();
    (value, metrics.with_wall(start.elapsed()))
}
