//! Closed-form steady-state network MSD.
//!
//! In steady state the attractor is frozen at its value on the true vector,
//! `g_o = g(w_o)`, so `E[g gᵀ] ≈ g_o g_oᵀ`, `E[err gᵀ] ≈ E[err] g_oᵀ` and
//! `E[w gᵀ] ≈ E[w] g_oᵀ`. The second moment then solves a linear system in
//! `vec(W)` with the operator `I - (A - B)ᵀ ⊗ (A - B)ᵀ`.

use nalgebra::{DMatrix, DVector};

use super::linalg::{trace_via_vec, unvec, vec};
use super::operators::StackedOperators;
use super::stability::error_spectral_radius;
use crate::error::{Error, Result};

/// Largest `N * M` accepted by the closed form; the solve is over
/// `(NM)^2` unknowns.
pub const STEADY_STATE_SIZE_LIMIT: usize = 64;

/// Steady-state mean error and second moment.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub mean_err: DVector<f64>,
    pub second_moment: DMatrix<f64>,
    pub msd: f64,
}

fn kron_apply(left: &DMatrix<f64>, right: &DMatrix<f64>, x: &DMatrix<f64>) -> DVector<f64> {
    // (Lᵀ ⊗ Rᵀ) vec(X) = vec(Rᵀ X L)
    vec(&(right.tr_mul(x) * left))
}

fn precheck(ops: &StackedOperators) -> Result<()> {
    let n = ops.size();
    if n > STEADY_STATE_SIZE_LIMIT {
        return Err(Error::TooLarge {
            what: "N*M for the closed-form steady state",
            size: n,
            limit: STEADY_STATE_SIZE_LIMIT,
        });
    }
    let radius = error_spectral_radius(ops)?;
    if radius >= 1.0 || !radius.is_finite() {
        return Err(Error::Unstable {
            spectral_radius: radius * radius,
        });
    }
    Ok(())
}

fn steady_mean(ops: &StackedOperators, w_opt: &DVector<f64>, g_o: &DVector<f64>) -> Result<DVector<f64>> {
    let n = ops.size();
    let eye = DMatrix::<f64>::identity(n, n);
    let lhs = &eye - ops.a.transpose() + ops.b.transpose();
    let rhs = ops.b.tr_mul(w_opt) + ops.d.tr_mul(g_o);
    lhs.lu().solve(&rhs).ok_or(Error::Singular("steady-state mean system"))
}

/// `(I - (A-B)ᵀ ⊗ (A-B)ᵀ)^-1 r` reshaped into a matrix.
fn solve_homogeneous(ops: &StackedOperators, r: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = ops.size();
    let at = ops.a.transpose();
    let bt = ops.b.transpose();
    let eye = DMatrix::<f64>::identity(n * n, n * n);
    let op = eye - at.kronecker(&at) - bt.kronecker(&bt) + bt.kronecker(&at) + at.kronecker(&bt);
    let x = op.lu().solve(r).ok_or(Error::Singular("steady-state second-moment operator"))?;
    unvec(&x, n)
}

fn finish(ops: &StackedOperators, mean_err: DVector<f64>, r: DVector<f64>) -> Result<SteadyState> {
    let w = solve_homogeneous(ops, &r)?;
    let eye = DMatrix::<f64>::identity(ops.size(), ops.size());
    let msd = trace_via_vec(&eye, &w)? / ops.nodes as f64;
    if !msd.is_finite() {
        return Err(Error::NonFinite("steady-state MSD"));
    }
    Ok(SteadyState {
        mean_err,
        second_moment: w,
        msd,
    })
}

/// General path, valid for any attractor.
pub fn steady_state_general(ops: &StackedOperators, w_o: &[f64]) -> Result<SteadyState> {
    precheck(ops)?;
    let w_opt = ops.stacked_target(w_o)?;
    let g_o = ops.attractor_at(&w_opt);
    let m = steady_mean(ops, &w_opt, &g_o)?;
    let ew = &w_opt - &m;
    let (a, b, c, d) = (&ops.a, &ops.b, &ops.c, &ops.d);

    let ww_known = &w_opt * w_opt.transpose() - &w_opt * m.transpose() - &m * w_opt.transpose();
    let err_w_known = &m * w_opt.transpose();
    let err_g = &m * g_o.transpose();
    let w_g = &ew * g_o.transpose();

    let mut r = kron_apply(b, b, &ww_known);
    r += kron_apply(c, c, &ops.noise_cov);
    r += kron_apply(d, d, &(&g_o * g_o.transpose()));
    r += kron_apply(b, a, &err_w_known);
    r += kron_apply(d, a, &err_g);
    r += kron_apply(a, b, &err_w_known.transpose());
    r += kron_apply(d, b, &w_g);
    r += kron_apply(a, d, &err_g.transpose());
    r += kron_apply(b, d, &w_g.transpose());
    finish(ops, m, r)
}

/// Reduced path for the leaky algorithm without attractor.
pub fn steady_state_leaky(ops: &StackedOperators, w_o: &[f64]) -> Result<SteadyState> {
    if ops.attractor_strength != 0.0 {
        return Err(Error::invalid("attractor_strength", "the reduced path requires no attractor"));
    }
    precheck(ops)?;
    let w_opt = ops.stacked_target(w_o)?;
    let n = ops.size();
    let eye = DMatrix::<f64>::identity(n, n);
    let lhs = &eye - ops.a.transpose() + ops.b.transpose();
    let m = lhs
        .lu()
        .solve(&ops.b.tr_mul(&w_opt))
        .ok_or(Error::Singular("steady-state mean system"))?;
    let (a, b, c) = (&ops.a, &ops.b, &ops.c);
    let wo_m = &w_opt * m.transpose();
    let m_wo = &m * w_opt.transpose();
    let mut r = kron_apply(b, b, &(&w_opt * w_opt.transpose()));
    r -= kron_apply(b, b, &wo_m);
    r -= kron_apply(b, b, &m_wo);
    r += kron_apply(b, a, &m_wo);
    r += kron_apply(c, c, &ops.noise_cov);
    r += kron_apply(a, b, &wo_m);
    finish(ops, m, r)
}

/// Steady-state MSD, using the reduced path when no attractor is active.
pub fn steady_state_msd(ops: &StackedOperators, w_o: &[f64]) -> Result<f64> {
    let s = if ops.attractor_strength == 0.0 {
        steady_state_leaky(ops, w_o)?
    } else {
        steady_state_general(ops, w_o)?
    };
    Ok(s.msd)
}
