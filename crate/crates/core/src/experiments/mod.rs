//! Monte Carlo harness, scenario presets and theory-vs-simulation reports.

mod compare;
mod monte_carlo;
mod scenario;

pub use compare::{compare_theory_simulation, empirical_step_threshold, TheoryComparison, ThresholdSearch};
pub use monte_carlo::{run_monte_carlo, tail_window, MsdReport, TheoryColumn, VariantTrace};
pub use scenario::*;

use crate::algorithms::AlgorithmVariant;
use crate::error::{Error, Result};
use crate::network::{validate_combiner, CombinationMatrix, Topology};
use crate::signal::SignalProfile;
use crate::system::SystemSchedule;

/// MSD above which a trial counts as divergent.
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Reported value for an exactly zero MSD.
pub const DB_FLOOR: f64 = -320.0;

/// `10 log10(x)` floored at [`DB_FLOOR`]. NaN stays NaN.
pub fn to_db(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    if x > 0.0 {
        (10.0 * x.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVariant {
    pub label: String,
    pub variant: AlgorithmVariant,
}

/// A full Monte Carlo experiment. Every variant sees the same data within
/// a trial, and trial `t` draws from substreams keyed by
/// `(master_seed, t, node, role)`.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub topology: Topology,
    pub combiner: CombinationMatrix,
    pub profile: SignalProfile,
    pub taps: usize,
    pub system: SystemSchedule,
    pub variants: Vec<LabeledVariant>,
    pub iterations: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub divergence_threshold: f64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.topology.node_count();
        if self.profile.node_count() != n {
            return Err(Error::DimensionMismatch {
                what: "signal profile nodes",
                expected: n,
                got: self.profile.node_count(),
            });
        }
        let report = validate_combiner(&self.combiner, &self.topology)?;
        if !report.is_valid() {
            return Err(Error::invalid("combiner", report.to_string()));
        }
        if self.system.taps() != self.taps {
            return Err(Error::DimensionMismatch {
                what: "true vector taps",
                expected: self.taps,
                got: self.system.taps(),
            });
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("variants", "at least one variant is required"));
        }
        for v in &self.variants {
            v.variant.params.validate()?;
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be positive"));
        }
        if !(self.divergence_threshold > 0.0) {
            return Err(Error::invalid("divergence_threshold", "must be positive"));
        }
        Ok(())
    }

    /// Copy that runs only variant `index`.
    pub fn single(&self, index: usize) -> Result<ExperimentSpec> {
        let v = self
            .variants
            .get(index)
            .ok_or_else(|| Error::invalid("variant", format!("index {index} out of range")))?;
        Ok(ExperimentSpec {
            variants: vec![v.clone()],
            ..self.clone()
        })
    }
}
