//! Piecewise-constant unknown system `w_o(i)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub start: usize,
    pub weights: Vec<f64>,
}

/// A sequence of true vectors, each active from its `start` iteration until
/// the next stage begins.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSchedule {
    taps: usize,
    stages: Vec<Stage>,
}

impl SystemSchedule {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::invalid("stages", "at least one stage is required"))?;
        if first.start != 0 {
            return Err(Error::invalid("stages", "the first stage must start at iteration 0"));
        }
        let taps = first.weights.len();
        if taps == 0 {
            return Err(Error::invalid("stages", "true vector must have at least one tap"));
        }
        for pair in stages.windows(2) {
            if pair[1].start <= pair[0].start {
                return Err(Error::invalid("stages", "start iterations must be strictly increasing"));
            }
        }
        for s in &stages {
            if s.weights.len() != taps {
                return Err(Error::DimensionMismatch {
                    what: "stage weight length",
                    expected: taps,
                    got: s.weights.len(),
                });
            }
            if s.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::invalid("stages", "true weights must be finite"));
            }
        }
        Ok(SystemSchedule { taps, stages })
    }

    pub fn fixed(weights: Vec<f64>) -> Result<Self> {
        SystemSchedule::new(vec![Stage { start: 0, weights }])
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn is_fixed(&self) -> bool {
        self.stages.len() == 1
    }

    /// Index of the stage active at `iteration`.
    pub fn stage_index(&self, iteration: usize) -> usize {
        self.stages.partition_point(|s| s.start <= iteration) - 1
    }

    pub fn at(&self, iteration: usize) -> &[f64] {
        &self.stages[self.stage_index(iteration)].weights
    }

    /// `[start, end)` of stage `idx`, where the last stage ends at
    /// `iterations`.
    pub fn stage_range(&self, idx: usize, iterations: usize) -> std::ops::Range<usize> {
        let start = self.stages[idx].start;
        let end = self
            .stages
            .get(idx + 1)
            .map_or(iterations, |s| s.start)
            .min(iterations);
        start..end
    }
}
