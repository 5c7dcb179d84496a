//! Step-size bounds for mean and mean-square convergence.

use nalgebra::DMatrix;
use serde::Serialize;

use super::fourth_moment::{gaussian_fourth_moment, sampled_fourth_moment};
use super::linalg::{real_eigenvalues, spectral_radius, symmetric_max_eigenvalue};
use super::operators::StackedOperators;
use crate::error::{Error, Result};
use crate::signal::{Coloring, SignalProfile};

/// Where `E[(UᵀU) ⊗ (UᵀU)]` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FourthMomentSource {
    /// Closed form; requires white inputs.
    Analytic,
    /// Sample mean over this many windows.
    Sampled { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBounds {
    pub mean_bound: f64,
    pub ms_bound: f64,
    pub combined: f64,
}

/// Evaluates the step-size bounds for the leak in `ops` and the inputs in
/// `profile`.
///
/// The mean-square bound is `min(1 / lambda_max(J^-1 K), 1 / lambda_H)`
/// where `lambda_H` is the largest positive real eigenvalue of
/// `[[J/2, -K/2], [I, 0]]`; a branch without a positive eigenvalue
/// contributes `+inf`.
pub fn stability_bounds(ops: &StackedOperators, profile: &SignalProfile, source: FourthMomentSource) -> Result<StabilityBounds> {
    let n = ops.size();
    let lambda_max = symmetric_max_eigenvalue(&ops.input_cov);
    let mean_bound = (2.0 - ops.leak) / lambda_max;

    let fourth = match source {
        FourthMomentSource::Analytic => {
            if profile.coloring() != Coloring::White {
                return Err(Error::invalid(
                    "fourth_moment",
                    "the analytic fourth moment needs white inputs; use the sampled estimator",
                ));
            }
            gaussian_fourth_moment(profile.input_variances(), ops.taps)
        }
        FourthMomentSource::Sampled { samples, seed } => sampled_fourth_moment(profile, ops.taps, samples, seed)?,
    };

    let eye = DMatrix::<f64>::identity(n, n);
    let leak = &ops.leak_blk;
    let s = &ops.input_cov;
    let k = fourth + leak.kronecker(leak) + leak.kronecker(s) + s.kronecker(leak);
    let j = eye.kronecker(s) + s.kronecker(&eye) + leak.kronecker(&eye) + eye.kronecker(leak);

    // J and K only couple index pairs inside the same pair of nodes, so both
    // eigenproblems split over the connected blocks of their sparsity.
    let mut jk_max = f64::NEG_INFINITY;
    let mut h_max = f64::NEG_INFINITY;
    for block in coupled_blocks(&j, &k) {
        let jb = j.select_rows(&block).select_columns(&block);
        let kb = k.select_rows(&block).select_columns(&block);
        let jk = jb.clone().lu().solve(&kb).ok_or(Error::Singular("J"))?;
        jk_max = real_eigenvalues(&jk)?.into_iter().fold(jk_max, f64::max);
        let h = companion(&jb, &kb);
        h_max = real_eigenvalues(&h)?.into_iter().filter(|&x| x > 0.0).fold(h_max, f64::max);
    }
    let first = if jk_max > 0.0 { 1.0 / jk_max } else { f64::INFINITY };
    let second = if h_max > 0.0 { 1.0 / h_max } else { f64::INFINITY };

    let ms_bound = first.min(second);
    Ok(StabilityBounds {
        mean_bound,
        ms_bound,
        combined: mean_bound.min(ms_bound),
    })
}

/// `[[J/2, -K/2], [I, 0]]`
pub fn companion(j: &DMatrix<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&(j * 0.5));
    h.view_mut((0, n), (n, n)).copy_from(&(k * -0.5));
    h.view_mut((n, 0), (n, n)).fill_with_identity();
    h
}

/// Index sets of the connected components of the joint sparsity pattern of
/// `j` and `k`. Permuting to these blocks is a similarity, so the spectra of
/// `J^-1 K` and of the companion matrix are the unions over blocks.
fn coupled_blocks(j: &DMatrix<f64>, k: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = j.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in 0..n {
        for r in 0..n {
            if j[(r, c)] != 0.0 || k[(r, c)] != 0.0 {
                let (a, b) = (root(&mut parent, r), root(&mut parent, c));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Same first branch through a Cholesky similarity: `J^-1 K` shares its
/// spectrum with the symmetric `L^-1 K L^-T`.
pub fn jk_max_eigenvalue_symmetric(j: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<f64> {
    let chol = j.clone().cholesky().ok_or(Error::Singular("J"))?;
    let l = chol.l();
    let y = l.solve_lower_triangular(k).ok_or(Error::Singular("J"))?;
    let m = l
        .solve_lower_triangular(&y.transpose())
        .ok_or(Error::Singular("J"))?;
    Ok(symmetric_max_eigenvalue(&m))
}

/// Spectral radius of `A - B`; the homogeneous part of the second-moment
/// recursion is `(A - B)ᵀ ⊗ (A - B)ᵀ`, whose radius is the square of this.
pub fn error_spectral_radius(ops: &StackedOperators) -> Result<f64> {
    spectral_radius(&(&ops.a - &ops.b))
}

/// The second-moment recursion is stable when the homogeneous operator
/// contracts.
pub fn is_mean_square_stable(ops: &StackedOperators) -> Result<bool> {
    Ok(error_spectral_radius(ops)? < 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{AlgorithmVariant, Attractor, HyperParams, Strategy};
    use crate::network::CombinationMatrix;

    fn ops(nodes: usize, taps: usize, leak: f64, s: f64) -> (StackedOperators, SignalProfile) {
        let v = AlgorithmVariant::new(Strategy::Atc, Attractor::None, HyperParams::new(0.01, leak, 0.0, 1.0).unwrap());
        let prof = SignalProfile::uniform(nodes, s, 0.01).unwrap();
        (StackedOperators::new(&CombinationMatrix::identity(nodes), &prof, taps, &v).unwrap(), prof)
    }

    #[test]
    fn single_tap_bounds() {
        let (o, p) = ops(1, 1, 0.0, 2.0);
        let b = stability_bounds(&o, &p, FourthMomentSource::Analytic).unwrap();
        assert_eq!(b.mean_bound, 1.0);
        // 1 - 2 mu s + 3 mu^2 s^2 < 1  <=>  mu < 2 / (3 s)
        assert!((b.ms_bound - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(b.combined, b.ms_bound);
    }

    #[test]
    fn leaky_mean_bound() {
        let (o, p) = ops(1, 1, 0.002, 1.5);
        let b = stability_bounds(&o, &p, FourthMomentSource::Analytic).unwrap();
        assert!((b.mean_bound - 1.998 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn block_split_matches_full_companion() {
        let v = AlgorithmVariant::new(Strategy::Atc, Attractor::None, HyperParams::new(0.01, 0.3, 0.0, 1.0).unwrap());
        let prof = SignalProfile::new(vec![0.4, 1.3], vec![0.01, 0.01], Coloring::White).unwrap();
        let o = StackedOperators::new(&CombinationMatrix::identity(2), &prof, 2, &v).unwrap();
        let n = o.size();
        let eye = DMatrix::<f64>::identity(n, n);
        let (s, g) = (&o.input_cov, &o.leak_blk);
        let k = gaussian_fourth_moment(prof.input_variances(), 2) + g.kronecker(g) + g.kronecker(s) + s.kronecker(g);
        let j = eye.kronecker(s) + s.kronecker(&eye) + g.kronecker(&eye) + eye.kronecker(g);
        let mut full = real_eigenvalues(&companion(&j, &k)).unwrap();
        let mut split: Vec<f64> = coupled_blocks(&j, &k)
            .iter()
            .flat_map(|b| real_eigenvalues(&companion(&j.select_rows(b).select_columns(b), &k.select_rows(b).select_columns(b))).unwrap())
            .collect();
        assert!(coupled_blocks(&j, &k).len() > 1);
        full.sort_by(f64::total_cmp);
        split.sort_by(f64::total_cmp);
        assert_eq!(full.len(), split.len());
        for (x, y) in full.iter().zip(&split) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_route_agrees() {
        let (o, _) = ops(2, 2, 0.01, 0.7);
        let n = o.size();
        let eye = DMatrix::<f64>::identity(n, n);
        let s = &o.input_cov;
        let g = &o.leak_blk;
        let k = gaussian_fourth_moment(&[0.7, 0.7], 2) + g.kronecker(g) + g.kronecker(s) + s.kronecker(g);
        let j = eye.kronecker(s) + s.kronecker(&eye) + g.kronecker(&eye) + eye.kronecker(g);
        let general = real_eigenvalues(&j.clone().lu().solve(&k).unwrap())
            .unwrap()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let sym = jk_max_eigenvalue_symmetric(&j, &k).unwrap();
        assert!((general - sym).abs() < 1e-10 * sym);
    }
}
