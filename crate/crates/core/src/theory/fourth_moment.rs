//! `E[(UᵀU) ⊗ (UᵀU)]` for the block-diagonal stacked regressor matrix.
//!
//! Entry `(a*MN + c, b*MN + d)` holds `E[X_ab X_cd]` with `X = UᵀU`. Only
//! pairs where `a, b` share a node and `c, d` share a node are nonzero.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::{seeded, StreamRole};
use crate::signal::{Coloring, SignalProfile};

/// Analytic value for white Gaussian regressors with per-node variances.
pub fn gaussian_fourth_moment(variances: &[f64], taps: usize) -> DMatrix<f64> {
    let n = variances.len() * taps;
    let mut out = DMatrix::zeros(n * n, n * n);
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    for (k, &sk) in variances.iter().enumerate() {
        for (l, &sl) in variances.iter().enumerate() {
            for i in 0..taps {
                for j in 0..taps {
                    for p in 0..taps {
                        for q in 0..taps {
                            let value = if k == l {
                                // Isserlis for one node's i.i.d. taps
                                sk * sk * (delta(i, j) * delta(p, q) + delta(i, p) * delta(j, q) + delta(i, q) * delta(j, p))
                            } else {
                                sk * sl * delta(i, j) * delta(p, q)
                            };
                            if value != 0.0 {
                                let (a, b) = (k * taps + i, k * taps + j);
                                let (c, d) = (l * taps + p, l * taps + q);
                                out[(a * n + c, b * n + d)] = value;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Sample mean of `(UᵀU) ⊗ (UᵀU)` over `samples` windows drawn from each
/// node's delay line. Works for colored inputs too.
pub fn sampled_fourth_moment(profile: &SignalProfile, taps: usize, samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    if samples == 0 || taps == 0 {
        return Err(Error::invalid("samples", "need at least one sample and one tap"));
    }
    let nodes = profile.node_count();
    let n = nodes * taps;
    let mut rng = seeded(seed, StreamRole::Sampler);
    let mut streams: Vec<_> = (0..nodes).map(|k| profile.stream(k, taps)).collect();
    let burn_in = match profile.coloring() {
        Coloring::White => taps,
        Coloring::Ar1 { pole } => taps + (50.0 / (1.0 - pole.abs())).ceil() as usize,
    };
    for s in streams.iter_mut() {
        for _ in 0..burn_in {
            s.next_regressor(&mut rng);
        }
    }
    let mut acc = DMatrix::<f64>::zeros(n * n, n * n);
    let mut u = vec![0.0; n];
    for _ in 0..samples {
        for (k, s) in streams.iter_mut().enumerate() {
            // fresh non-overlapping window
            for _ in 0..taps - 1 {
                s.next_regressor(&mut rng);
            }
            u[k * taps..(k + 1) * taps].copy_from_slice(s.next_regressor(&mut rng));
        }
        for k in 0..nodes {
            for l in 0..nodes {
                for i in 0..taps {
                    for j in 0..taps {
                        let (a, b) = (k * taps + i, k * taps + j);
                        let x_ab = u[a] * u[b];
                        for p in 0..taps {
                            for q in 0..taps {
                                let (c, d) = (l * taps + p, l * taps + q);
                                acc[(a * n + c, b * n + d)] += x_ab * u[c] * u[d];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(acc / samples as f64)
}
