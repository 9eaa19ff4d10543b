//! Time sources for the ledgers.
//!
//! Two clocks feed the timing ledgers. The *counted* clock converts
//! deterministic work counters (Dijkstra relaxations, branch-and-bound nodes,
//! QUBO entries written) into milliseconds through a fixed [`CostModel`], so
//! reports are byte-identical across runs. The *measured* clock uses wall time
//! for embedding and per-thread CPU time for the classical solver.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClockMode {
    #[default]
    Counted,
    Measured,
}

/// Nanoseconds charged per unit of counted work.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub embed_ns_per_op: f64,
    pub bnb_ns_per_node: f64,
    pub constraint_ns_per_edge: f64,
    pub qubo_ns_per_entry: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        // Calibrated against release builds on a commodity x86-64 core.
        CostModel {
            embed_ns_per_op: 12.0,
            bnb_ns_per_node: 60.0,
            constraint_ns_per_edge: 25.0,
            qubo_ns_per_entry: 30.0,
        }
    }
}

impl CostModel {
    pub fn ms(units: u64, ns_per_unit: f64) -> f64 {
        units as f64 * ns_per_unit * 1e-6
    }
}

/// Where a processor-time reading came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeSource {
    ThreadCpu,
    Wall,
}

/// CPU time consumed by the calling thread, or `None` where unsupported.
pub fn thread_cpu_time() -> Option<Duration> {
    #[cfg(unix)]
    {
        let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
        // SAFETY: `ts` is a valid, writable timespec.
        let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
        if rc == 0 {
            return Some(Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32));
        }
        None
    }
    #[cfg(not(unix))]
    {
        None
    }
}

/// Processor-time stopwatch: per-thread CPU time when available, else wall time.
pub struct CpuStopwatch {
    cpu_start: Option<Duration>,
    wall_start: Instant,
}

impl CpuStopwatch {
    pub fn start() -> Self {
        CpuStopwatch { cpu_start: thread_cpu_time(), wall_start: Instant::now() }
    }

    pub fn elapsed_ms(&self) -> (f64, TimeSource) {
        match (self.cpu_start, thread_cpu_time()) {
            (Some(a), Some(b)) => ((b.saturating_sub(a)).as_secs_f64() * 1e3, TimeSource::ThreadCpu),
            _ => (self.wall_start.elapsed().as_secs_f64() * 1e3, TimeSource::Wall),
        }
    }
}
