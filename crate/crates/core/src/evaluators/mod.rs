//! Continuous-time evaluators: the Lindblad baseline, the piecewise jump
//! series (Volterra and Monte Carlo), the memory-kernel residual, the
//! collision-model limit study and a trace-distance witness.

mod kernel;
mod limit;
mod lindblad;
mod piecewise;
mod witness;

pub use kernel::{memory_kernel_residual, KernelResidual};
pub use limit::{cm_limit_comparison, LimitOptions, LimitRow, LimitTable};
pub use lindblad::{dyson_markovian, lindblad_evolve, DysonResult, JumpOperator, LindbladSpec};
pub use piecewise::{
    mc_piecewise, volterra_piecewise, volterra_piecewise_with, GridPropagator, MapFamily, McResult, PiecewiseSpec,
    PreparedFamily, VolterraOptions, VolterraResult, WeightOrdering, RENORMALIZATION_WARNING,
};
pub use witness::{blp_witness_scan, WitnessScan, REVIVAL_TOLERANCE};
