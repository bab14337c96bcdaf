//! Numerical laboratory for Hadamard instability of initially elliptic
//! first-order systems: majoring series, weighted oscillatory spaces,
//! propagator bounds, a Picard solver for the high-frequency ansatz and the
//! Gevrey/L² metrology of the resulting instability ratio.

pub mod analytic_fit;
pub mod constants;
pub mod error;
pub mod experiment;
pub mod fixed_point;
pub mod majorant;
pub mod metrology;
pub mod propagator;
pub mod series;
pub mod spaces;
pub mod spectrum;
pub mod symbol;
pub mod trig;

pub use error::{Error, Result};
pub use experiment::{run_scenario, ScenarioConfig, ScenarioOutcome, SweepRow};
pub use series::{ps_derive, ps_mul, MultiIndex, PowerSeries, SampledSeries, TimeGrid, C64};
pub use spaces::{RateCase, Space, SpaceNormParams, TimeBudget};
pub use spectrum::{classify, RateFunction, SymbolReport, SymbolSpectrum, SymbolTolerances};
pub use symbol::{PolyMatrix, SymbolFamily};
pub use trig::{OscSlice, TrigSeries};
