//! Stacked network operators for the ATC moment recursions.

use nalgebra::{DMatrix, DVector};

use crate::algorithms::{AlgorithmVariant, Attractor, Strategy};
use crate::error::{Error, Result};
use crate::network::CombinationMatrix;
use crate::signal::SignalProfile;

/// Largest `N * M` accepted by the transient recursion.
pub const TRANSIENT_SIZE_LIMIT: usize = 256;

/// Block operators of the stacked ATC recursion, all `MN x MN`.
///
/// Node `k` occupies rows `k*M .. (k+1)*M`. The combine step of ATC maps
/// the stacked intermediates `phi` to `w = P phi`; since node `k` averages
/// with column `k` of the combiner, `P = combinerᵀ ⊗ I_M`.
#[derive(Debug, Clone)]
pub struct StackedOperators {
    pub nodes: usize,
    pub taps: usize,
    pub attractor: Attractor,
    pub reweight_scale: f64,
    pub step_size: f64,
    pub leak: f64,
    pub attractor_strength: f64,
    pub combine: DMatrix<f64>,
    pub step: DMatrix<f64>,
    pub leak_blk: DMatrix<f64>,
    pub attractor_blk: DMatrix<f64>,
    /// `E[U_iᵀ U_i]`
    pub input_cov: DMatrix<f64>,
    /// `E[U_iᵀ v_i v_iᵀ U_i]`
    pub noise_cov: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StackedOperators {
    /// Builds the operators for an ATC variant.
    ///
    /// Colored profiles use the per-node variance after coloring on the
    /// diagonal of `E[UᵀU]`; the tap correlations are ignored there.
    pub fn new(
        combiner: &CombinationMatrix,
        profile: &SignalProfile,
        taps: usize,
        variant: &AlgorithmVariant,
    ) -> Result<Self> {
        if variant.strategy != Strategy::Atc {
            return Err(Error::UnsupportedTheory);
        }
        variant.params.validate()?;
        let nodes = combiner.node_count();
        if profile.node_count() != nodes {
            return Err(Error::DimensionMismatch {
                what: "signal profile nodes",
                expected: nodes,
                got: profile.node_count(),
            });
        }
        if taps == 0 {
            return Err(Error::invalid("taps", "must be at least 1"));
        }
        let size = nodes * taps;
        if size > TRANSIENT_SIZE_LIMIT {
            return Err(Error::TooLarge {
                what: "N*M for the moment recursion",
                size,
                limit: TRANSIENT_SIZE_LIMIT,
            });
        }

        let eye_m = DMatrix::<f64>::identity(taps, taps);
        let eye = DMatrix::<f64>::identity(size, size);
        let combine = combiner.as_matrix().transpose().kronecker(&eye_m);
        let p = &variant.params;
        let rho = variant.effective_rho();
        let per_tap = |f: &dyn Fn(usize) -> f64| {
            DMatrix::from_diagonal(&DVector::from_fn(size, |r, _| f(r / taps)))
        };
        let step = &eye * p.step_size;
        let leak_blk = &eye * p.leak;
        let attractor_blk = &eye * rho;
        let input_cov = per_tap(&|k| profile.effective_input_variance(k));
        let noise_cov = per_tap(&|k| profile.effective_input_variance(k) * profile.noise_variances()[k]);

        let pt = combine.transpose();
        let a = (&eye - &input_cov * step.transpose()) * &pt;
        let b = leak_blk.transpose() * step.transpose() * &pt;
        let c = step.transpose() * &pt;
        let d = attractor_blk.transpose() * &pt;

        Ok(StackedOperators {
            nodes,
            taps,
            attractor: variant.attractor,
            reweight_scale: p.reweight_scale,
            step_size: p.step_size,
            leak: p.leak,
            attractor_strength: rho,
            combine,
            step,
            leak_blk,
            attractor_blk,
            input_cov,
            noise_cov,
            a,
            b,
            c,
            d,
        })
    }

    /// `N * M`
    pub fn size(&self) -> usize {
        self.nodes * self.taps
    }

    /// Stacks `w_o` once per node.
    pub fn stacked_target(&self, w_o: &[f64]) -> Result<DVector<f64>> {
        if w_o.len() != self.taps {
            return Err(Error::DimensionMismatch {
                what: "true vector length",
                expected: self.taps,
                got: w_o.len(),
            });
        }
        Ok(DVector::from_fn(self.size(), |r, _| w_o[r % self.taps]))
    }

    /// `g(w_o)` stacked per node.
    pub fn attractor_at(&self, w_opt: &DVector<f64>) -> DVector<f64> {
        w_opt.map(|x| crate::algorithms::attractor_value(x, self.attractor, self.reweight_scale))
    }
}
