//! Mean and mean-square recursions of the stacked weight error.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use super::linalg::ensure_finite;
use super::moments::{attractor_moments, AttractorMoments};
use super::operators::StackedOperators;
use crate::error::{Error, Result};

/// Tolerance below zero that variance extraction clamps instead of failing.
pub const VARIANCE_TOL: f64 = 1e-9;

/// First and second moments of the stacked weight error
/// `w_opt - w` at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalMoments {
    pub nodes: usize,
    pub taps: usize,
    pub mean_err: DVector<f64>,
    pub second_moment: DMatrix<f64>,
    pub w_opt: DVector<f64>,
}

impl GlobalMoments {
    /// Moments of a zero-initialized network: the error equals `w_opt`
    /// deterministically.
    pub fn zero_start(ops: &StackedOperators, w_o: &[f64]) -> Result<Self> {
        let w_opt = ops.stacked_target(w_o)?;
        Ok(GlobalMoments {
            nodes: ops.nodes,
            taps: ops.taps,
            mean_err: w_opt.clone(),
            second_moment: &w_opt * w_opt.transpose(),
            w_opt,
        })
    }

    pub fn size(&self) -> usize {
        self.nodes * self.taps
    }

    /// `Tr(W) / N`
    pub fn msd(&self) -> f64 {
        self.second_moment.trace() / self.nodes as f64
    }

    /// Per-coefficient variances from the diagonal of the second moment.
    pub fn coefficient_variances(&self) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.size());
        for r in 0..self.size() {
            let v = self.second_moment[(r, r)] - self.mean_err[r] * self.mean_err[r];
            if v < -VARIANCE_TOL {
                return Err(Error::NegativeVariance {
                    node: r / self.taps,
                    tap: r % self.taps,
                    value: v,
                });
            }
            out[r] = v.max(0.0);
        }
        Ok(out)
    }

    /// `E[w]`
    pub fn mean_weight(&self) -> DVector<f64> {
        &self.w_opt - &self.mean_err
    }

    fn check(&self, ops: &StackedOperators) -> Result<()> {
        let n = ops.size();
        for (what, got) in [
            ("mean error length", self.mean_err.len()),
            ("second moment rows", self.second_moment.nrows()),
            ("second moment cols", self.second_moment.ncols()),
            ("stacked target length", self.w_opt.len()),
        ] {
            if got != n {
                return Err(Error::DimensionMismatch { what, expected: n, got });
            }
        }
        Ok(())
    }

    fn attractor_stats(&self, ops: &StackedOperators) -> Result<Vec<AttractorMoments>> {
        let var = self.coefficient_variances()?;
        Ok((0..self.size())
            .map(|r| attractor_moments(ops.attractor, ops.reweight_scale, self.w_opt[r], self.mean_err[r], var[r]))
            .collect())
    }
}

/// `E[g(w)]` per coefficient under the Gaussian model.
pub fn expected_attractor(moments: &GlobalMoments, ops: &StackedOperators) -> Result<DVector<f64>> {
    let stats = moments.attractor_stats(ops)?;
    Ok(DVector::from_iterator(stats.len(), stats.iter().map(|s| s.g)))
}

/// One step of the mean recursion; returns the new `E[w_opt - w]`.
pub fn mean_step(moments: &GlobalMoments, ops: &StackedOperators) -> Result<DVector<f64>> {
    moments.check(ops)?;
    let eg = expected_attractor(moments, ops)?;
    Ok(mean_update(moments, ops, &eg))
}

fn mean_update(moments: &GlobalMoments, ops: &StackedOperators, eg: &DVector<f64>) -> DVector<f64> {
    let ew = moments.mean_weight();
    ops.a.tr_mul(&moments.mean_err) + ops.b.tr_mul(&ew) + ops.d.tr_mul(eg)
}

/// Expectations of the attractor products entering the second moment.
struct AttractorProducts {
    eg: DVector<f64>,
    /// `E[g gᵀ]`
    gg: DMatrix<f64>,
    /// `E[w gᵀ]`
    wg: DMatrix<f64>,
}

fn attractor_products(moments: &GlobalMoments, ops: &StackedOperators) -> Result<AttractorProducts> {
    let stats = moments.attractor_stats(ops)?;
    let n = stats.len();
    let eg = DVector::from_iterator(n, stats.iter().map(|s| s.g));
    let ew = DVector::from_iterator(n, stats.iter().map(|s| s.mean_weight));
    // Off-diagonal entries factor; the diagonal keeps the exact moments.
    let mut gg = &eg * eg.transpose();
    let mut wg = &ew * eg.transpose();
    for (r, s) in stats.iter().enumerate() {
        gg[(r, r)] = s.g_squared;
        wg[(r, r)] = s.w_times_g;
    }
    Ok(AttractorProducts { eg, gg, wg })
}

/// One step of the second-moment recursion without the final
/// symmetrization.
pub fn mean_square_step_raw(moments: &GlobalMoments, ops: &StackedOperators) -> Result<DMatrix<f64>> {
    moments.check(ops)?;
    let prod = attractor_products(moments, ops)?;
    Ok(second_moment_update(moments, ops, &prod))
}

fn second_moment_update(moments: &GlobalMoments, ops: &StackedOperators, prod: &AttractorProducts) -> DMatrix<f64> {
    let (a, b, c, d) = (&ops.a, &ops.b, &ops.c, &ops.d);
    let w = &moments.second_moment;
    let m = &moments.mean_err;
    let wo = &moments.w_opt;
    let sandwich = |l: &DMatrix<f64>, x: &DMatrix<f64>, r: &DMatrix<f64>| l.tr_mul(x) * r;

    // E[w wᵀ], E[w_err wᵀ], E[w_err gᵀ]
    let ww = wo * wo.transpose() - wo * m.transpose() - m * wo.transpose() + w;
    let ew = m * wo.transpose() - w;
    let eg = wo * prod.eg.transpose() - &prod.wg;

    let mut out = sandwich(a, w, a);
    out += sandwich(b, &ww, b);
    out += sandwich(c, &ops.noise_cov, c);
    let has_attractor = d.iter().any(|&x| x != 0.0);
    if has_attractor {
        out += sandwich(d, &prod.gg, d);
    }
    out += sandwich(a, &ew, b);
    out += sandwich(b, &ew.transpose(), a);
    if has_attractor {
        out += sandwich(a, &eg, d);
        out += sandwich(b, &prod.wg, d);
        out += sandwich(d, &eg.transpose(), a);
        out += sandwich(d, &prod.wg.transpose(), b);
    }
    out
}

/// One step of the second-moment recursion, symmetrized.
pub fn mean_square_step(moments: &GlobalMoments, ops: &StackedOperators) -> Result<DMatrix<f64>> {
    let raw = mean_square_step_raw(moments, ops)?;
    let sym = (&raw + raw.transpose()) * 0.5;
    ensure_finite(&sym, "second moment")?;
    Ok(sym)
}

/// Advances both moments by one iteration.
pub fn advance(moments: &GlobalMoments, ops: &StackedOperators) -> Result<GlobalMoments> {
    moments.check(ops)?;
    let prod = attractor_products(moments, ops)?;
    let mean_err = mean_update(moments, ops, &prod.eg);
    let raw = second_moment_update(moments, ops, &prod);
    let second_moment = (&raw + raw.transpose()) * 0.5;
    ensure_finite(&second_moment, "second moment")?;
    if mean_err.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("mean error"));
    }
    Ok(GlobalMoments {
        mean_err,
        second_moment,
        ..moments.clone()
    })
}

/// Predicted learning curve. Entry `i` is the state after `i + 1` updates,
/// aligned with Monte Carlo traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryTrace {
    pub msd: Vec<f64>,
    /// Per-iteration mean error, present when requested.
    pub mean_err: Option<Vec<DVector<f64>>>,
    pub last: GlobalMoments,
}

impl TheoryTrace {
    /// CSV with columns `iteration,msd_db` plus `mean_err_<node>_<tap>`
    /// (1-based) when mean errors were recorded.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "iteration,msd_db")?;
        if self.mean_err.is_some() {
            for k in 0..self.last.nodes {
                for m in 0..self.last.taps {
                    write!(out, ",mean_err_{}_{}", k + 1, m + 1)?;
                }
            }
        }
        writeln!(out)?;
        for (i, msd) in self.msd.iter().enumerate() {
            write!(out, "{},{}", i, crate::experiments::to_db(*msd))?;
            if let Some(means) = &self.mean_err {
                for x in means[i].iter() {
                    write!(out, ",{x:e}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Iterates the moment recursions `iterations` times from a zero start.
pub fn transient(ops: &StackedOperators, w_o: &[f64], iterations: usize, record_means: bool) -> Result<TheoryTrace> {
    let mut state = GlobalMoments::zero_start(ops, w_o)?;
    let mut msd = Vec::with_capacity(iterations);
    let mut means = record_means.then(|| Vec::with_capacity(iterations));
    for _ in 0..iterations {
        state = advance(&state, ops)?;
        msd.push(state.msd());
        if let Some(m) = means.as_mut() {
            m.push(state.mean_err.clone());
        }
    }
    Ok(TheoryTrace {
        msd,
        mean_err: means,
        last: state,
    })
}
