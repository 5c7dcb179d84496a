//! Regressors, noise and desired signals for the linear data model
//! `d_k(i) = u_{k,i} w_o + v_k(i)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, StreamRole};

/// Input coloring applied to the white Gaussian drive of every node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Coloring {
    #[default]
    White,
    /// `y(i) = x(i) + pole * y(i-1)`, i.e. `G(z) = 1 / (1 - pole z^-1)`.
    /// The output is not renormalized, so its variance is
    /// `sigma^2 / (1 - pole^2)`.
    Ar1 { pole: f64 },
}

/// Per-node input and noise variances plus the input coloring.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalProfile {
    input_variances: Vec<f64>,
    noise_variances: Vec<f64>,
    coloring: Coloring,
}

impl SignalProfile {
    pub fn new(input_variances: Vec<f64>, noise_variances: Vec<f64>, coloring: Coloring) -> Result<Self> {
        if input_variances.len() != noise_variances.len() {
            return Err(Error::DimensionMismatch {
                what: "noise variances vs input variances",
                expected: input_variances.len(),
                got: noise_variances.len(),
            });
        }
        if input_variances.is_empty() {
            return Err(Error::invalid("input_variances", "empty profile"));
        }
        if let Some(v) = input_variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("input_variances", format!("{v} is not strictly positive")));
        }
        if let Some(v) = noise_variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("noise_variances", format!("{v} is not strictly positive")));
        }
        if let Coloring::Ar1 { pole } = coloring {
            if !(pole.abs() < 1.0) {
                return Err(Error::invalid("pole", format!("|{pole}| must be < 1")));
            }
        }
        Ok(SignalProfile {
            input_variances,
            noise_variances,
            coloring,
        })
    }

    /// Same variances for every node.
    pub fn uniform(nodes: usize, input_variance: f64, noise_variance: f64) -> Result<Self> {
        SignalProfile::new(vec![input_variance; nodes], vec![noise_variance; nodes], Coloring::White)
    }

    pub fn with_coloring(self, coloring: Coloring) -> Result<Self> {
        SignalProfile::new(self.input_variances, self.noise_variances, coloring)
    }

    pub fn node_count(&self) -> usize {
        self.input_variances.len()
    }

    pub fn input_variances(&self) -> &[f64] {
        &self.input_variances
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    pub fn coloring(&self) -> Coloring {
        self.coloring
    }

    /// Variance of the samples entering the delay line at node `k`, after
    /// coloring.
    pub fn effective_input_variance(&self, k: usize) -> f64 {
        match self.coloring {
            Coloring::White => self.input_variances[k],
            Coloring::Ar1 { pole } => self.input_variances[k] / (1.0 - pole * pole),
        }
    }

    pub fn stream(&self, k: usize, taps: usize) -> RegressorStream {
        RegressorStream::new(taps, self.input_variances[k], self.coloring)
    }
}

/// Draws per-node variances uniformly from `input_range` and `noise_range`.
pub fn sample_profile(
    n: usize,
    input_range: (f64, f64),
    noise_range: (f64, f64),
    seed: u64,
) -> Result<SignalProfile> {
    for (name, (lo, hi)) in [("input_range", input_range), ("noise_range", noise_range)] {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid(name, format!("[{lo}, {hi}] must satisfy 0 < lo <= hi")));
        }
    }
    let mut rng = seeded(seed, StreamRole::Profile);
    let mut draw = |(lo, hi): (f64, f64)| {
        let u: f64 = rng.random();
        lo + (hi - lo) * u
    };
    let inputs: Vec<f64> = (0..n).map(|_| draw(input_range)).collect();
    let noises: Vec<f64> = (0..n).map(|_| draw(noise_range)).collect();
    SignalProfile::new(inputs, noises, Coloring::White)
}

/// Tapped delay line producing `u_{k,i} = [u(i), u(i-1), ..., u(i-M+1)]`.
#[derive(Debug, Clone)]
pub struct RegressorStream {
    taps: usize,
    std_dev: f64,
    pole: f64,
    last: f64,
    // Each sample is written twice, `taps` apart, so the current window is
    // always the contiguous slice `line[head..head + taps]`.
    line: Vec<f64>,
    head: usize,
}

impl RegressorStream {
    pub fn new(taps: usize, variance: f64, coloring: Coloring) -> Self {
        let pole = match coloring {
            Coloring::White => 0.0,
            Coloring::Ar1 { pole } => pole,
        };
        RegressorStream {
            taps,
            std_dev: variance.sqrt(),
            pole,
            last: 0.0,
            line: vec![0.0; 2 * taps],
            head: 0,
        }
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Current window without advancing.
    pub fn window(&self) -> &[f64] {
        &self.line[self.head..self.head + self.taps]
    }

    /// Pushes one new (possibly colored) sample and returns the window.
    pub fn next_regressor<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        let z: f64 = rng.sample(StandardNormal);
        let x = self.std_dev * z;
        let y = x + self.pole * self.last;
        self.last = y;
        if self.taps > 0 {
            self.head = if self.head == 0 { self.taps - 1 } else { self.head - 1 };
            self.line[self.head] = y;
            self.line[self.head + self.taps] = y;
        }
        self.window()
    }
}

/// `u . w_o + v` with `v ~ N(0, noise_std^2)`. One normal draw is consumed
/// even when `noise_std` is zero.
pub fn desired_sample<R: Rng + ?Sized>(u: &[f64], w_o: &[f64], noise_std: f64, rng: &mut R) -> Result<f64> {
    if u.len() != w_o.len() {
        return Err(Error::DimensionMismatch {
            what: "regressor vs true vector length",
            expected: w_o.len(),
            got: u.len(),
        });
    }
    let z: f64 = rng.sample(StandardNormal);
    Ok(dot(u, w_o) + noise_std * z)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, SimRng};
    use rand::SeedableRng;

    #[test]
    fn first_window_is_zero_padded() {
        let mut rng = SimRng::seed_from_u64(5);
        let mut probe = SimRng::seed_from_u64(5);
        let x0: f64 = probe.sample(StandardNormal);
        let mut s = RegressorStream::new(4, 1.0, Coloring::White);
        assert_eq!(s.window(), &[0.0; 4]);
        assert_eq!(s.next_regressor(&mut rng), &[x0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn shifting_property() {
        let mut rng = SimRng::seed_from_u64(1);
        let mut s = RegressorStream::new(5, 2.0, Coloring::Ar1 { pole: 0.5 });
        let mut prev = s.next_regressor(&mut rng).to_vec();
        for _ in 0..50 {
            let cur = s.next_regressor(&mut rng).to_vec();
            assert_eq!(&cur[1..], &prev[..4]);
            prev = cur;
        }
    }

    #[test]
    fn zero_pole_matches_white() {
        let mut a = RegressorStream::new(3, 1.3, Coloring::White);
        let mut b = RegressorStream::new(3, 1.3, Coloring::Ar1 { pole: 0.0 });
        let mut ra = substream(4, 0, 0, StreamRole::Input);
        let mut rb = substream(4, 0, 0, StreamRole::Input);
        for _ in 0..100 {
            assert_eq!(a.next_regressor(&mut ra), b.next_regressor(&mut rb));
        }
    }

    #[test]
    fn desired_sample_noise_free() {
        let mut rng = SimRng::seed_from_u64(0);
        let d = desired_sample(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], 0.0, &mut rng).unwrap();
        assert_eq!(d, 0.0);
        let d = desired_sample(&[1.0, 1.0], &[1.0, 1.0], 0.0, &mut rng).unwrap();
        assert_eq!(d, 2.0);
        assert!(desired_sample(&[1.0], &[1.0, 2.0], 0.0, &mut rng).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(SignalProfile::new(vec![1.0], vec![0.0], Coloring::White).is_err());
        assert!(SignalProfile::new(vec![0.0], vec![0.1], Coloring::White).is_err());
        assert!(SignalProfile::new(vec![1.0], vec![0.1], Coloring::Ar1 { pole: 1.0 }).is_err());
        assert!(SignalProfile::new(vec![1.0, 1.0], vec![0.1], Coloring::White).is_err());
        assert!(sample_profile(3, (0.0, 1.0), (0.1, 0.2), 1).is_err());
        assert!(sample_profile(3, (2.0, 1.0), (0.1, 0.2), 1).is_err());
    }

    #[test]
    fn degenerate_ranges_and_determinism() {
        let p = sample_profile(6, (1.0, 1.0), (0.01, 0.01), 3).unwrap();
        assert!(p.input_variances().iter().all(|&v| v == 1.0));
        assert!(p.noise_variances().iter().all(|&v| v == 0.01));
        assert_eq!(
            sample_profile(6, (0.5, 1.5), (0.01, 0.1), 9).unwrap(),
            sample_profile(6, (0.5, 1.5), (0.01, 0.1), 9).unwrap()
        );
        let p = sample_profile(20, (0.5, 1.5), (0.01, 0.1), 42).unwrap();
        assert!(p.input_variances().iter().all(|&v| (0.5..=1.5).contains(&v)));
        assert!(p.noise_variances().iter().all(|&v| (0.01..=0.1).contains(&v)));
    }
}
