//! Work instrumentation shared by the integration, water-filling and
//! profiling layers. Counts are in evaluation and cell units, never time.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default quadrature cell ceiling, `2^26`.
pub const DEFAULT_MAX_CELLS: u64 = 1 << 26;

/// Environment variable that overrides [`DEFAULT_MAX_CELLS`] in the CLI.
pub const MAX_CELLS_ENV: &str = "CAPCERT_MAX_CELLS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest cell count a single quadrature may use.
    pub max_cells: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_cells: DEFAULT_MAX_CELLS }
    }
}

#[derive(Debug, Default)]
struct Counters {
    psd_evals: AtomicU64,
    quadrature_cells: AtomicU64,
    max_precision: AtomicU64,
    bisection_iters: AtomicU64,
}

/// Cheaply cloneable handle on a set of work counters.
#[derive(Debug, Clone, Default)]
pub struct WorkMeter {
    counters: Arc<Counters>,
    limits: Limits,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounts {
    pub psd_evals: u64,
    pub quadrature_cells: u64,
    pub max_precision_requested: u64,
    pub bisection_iters: u64,
}

impl WorkMeter {
    pub fn new(limits: Limits) -> Self {
        WorkMeter { counters: Arc::default(), limits }
    }

    pub fn limits(&self) -> Limits {
        self.limits
    }

    pub fn add_psd_evals(&self, n: u64) {
        self.counters.psd_evals.fetch_add(n, Ordering::Relaxed);
    }

    pub fn add_cells(&self, n: u64) {
        self.counters.quadrature_cells.fetch_add(n, Ordering::Relaxed);
    }

    pub fn note_precision(&self, bits: u64) {
        self.counters.max_precision.fetch_max(bits, Ordering::Relaxed);
    }

    pub fn add_bisection_iter(&self) {
        self.counters.bisection_iters.fetch_add(1, Ordering::Relaxed);
    }

    /// Fails with [`Error::CellLimit`] if `cells` exceeds the ceiling.
    pub fn check_cells(&self, cells: &num_bigint::BigInt) -> Result<u64> {
        use num_traits::ToPrimitive;
        match cells.to_u64() {
            Some(c) if c <= self.limits.max_cells => Ok(c),
            _ => Err(Error::CellLimit { requested: cells.to_string(), limit: self.limits.max_cells }),
        }
    }

    pub fn counts(&self) -> WorkCounts {
        let c = &self.counters;
        WorkCounts {
            psd_evals: c.psd_evals.load(Ordering::Relaxed),
            quadrature_cells: c.quadrature_cells.load(Ordering::Relaxed),
            max_precision_requested: c.max_precision.load(Ordering::Relaxed),
            bisection_iters: c.bisection_iters.load(Ordering::Relaxed),
        }
    }
}
