//! Certified computation of Gaussian-channel capacity and water-filling
//! allocations from computable noise spectra.

pub mod cfunc;
pub mod creal;
pub mod dyadic;
pub mod elementary;
pub mod error;
pub mod profiler;
pub mod rational;
pub mod rigorint;
pub mod rigorlog;
pub mod waterfill;
pub mod work;

pub use cfunc::{CFunc, CertifyOutcome};
pub use creal::{CReal, GapOrdering, PositiveWitness};
pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use rigorlog::LogWindow;
pub use profiler::{Target, WorkReport};
pub use waterfill::{CapacityResult, ChannelSpec, DiscretizationResult, Regime, WaterLevel};
pub use work::{Limits, WorkCounts, WorkMeter};
