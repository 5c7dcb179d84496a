//! The diffusion update shared by every algorithm in the family.
//!
//! One adaptation step at node `k` is
//!
//! ```text
//! phi_k = (1 - mu*gamma) w_k + mu u_kᵀ (d_k - u_k w_k) - rho g(w_k)
//! ```
//!
//! and one combination step is `w_k = sum_l a[l, k] phi_l`. Adapt-then-combine
//! (ATC) runs adaptation first, combine-then-adapt (CTA) the other way round,
//! in which case the adaptation (and the attractor) acts on the combined
//! estimate. Setting `gamma = 0` removes the leak, and the attractor kind
//! selects plain, zero-attracting or reweighted zero-attracting updates.
//!
//! | leak | attractor | name |
//! |------|-----------|------|
//! | 0    | none      | DLMS |
//! | > 0  | none      | leaky DLMS |
//! | 0    | ZA / RZA  | ZA / RZA DLMS |
//! | > 0  | ZA / RZA  | LZA / LRZA-DLMS |

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::CombinationMatrix;
use crate::rng::{substream, SimRng, StreamRole};
use crate::signal::{desired_sample, dot, RegressorStream, SignalProfile};
use crate::system::SystemSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Atc,
    Cta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attractor {
    None,
    /// `sign(w)`
    Za,
    /// `sign(w) / (1 + eps |w|)`
    Rza,
}

/// Step size `mu`, leak `gamma`, attractor strength `rho` and reweighting
/// scale `eps`.
///
/// `rho` is the attractor weight as it appears in the update. For the
/// reweighted attractor derived from the log-sum penalty
/// `rho' * sum log(1 + |w| / eps')`, the update uses `rho = mu rho' / eps'`
/// and `eps = 1 / eps'`; see [`HyperParams::from_log_sum`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub step_size: f64,
    pub leak: f64,
    pub attractor_strength: f64,
    pub reweight_scale: f64,
}

impl HyperParams {
    pub fn new(step_size: f64, leak: f64, attractor_strength: f64, reweight_scale: f64) -> Result<Self> {
        let p = HyperParams {
            step_size,
            leak,
            attractor_strength,
            reweight_scale,
        };
        p.validate()?;
        Ok(p)
    }

    /// Maps log-sum penalty parameters `(rho', eps')` onto update parameters.
    pub fn from_log_sum(step_size: f64, leak: f64, rho_prime: f64, eps_prime: f64) -> Result<Self> {
        if !(eps_prime > 0.0) {
            return Err(Error::invalid("eps_prime", "must be positive"));
        }
        HyperParams::new(step_size, leak, step_size * rho_prime / eps_prime, 1.0 / eps_prime)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("mu", format!("{} must be > 0", self.step_size)));
        }
        if !(self.leak >= 0.0 && self.leak.is_finite()) {
            return Err(Error::invalid("gamma", format!("{} must be >= 0", self.leak)));
        }
        if !(self.attractor_strength >= 0.0 && self.attractor_strength.is_finite()) {
            return Err(Error::invalid("rho", format!("{} must be >= 0", self.attractor_strength)));
        }
        if !(self.reweight_scale > 0.0 && self.reweight_scale.is_finite()) {
            return Err(Error::invalid("eps", format!("{} must be > 0", self.reweight_scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmVariant {
    pub strategy: Strategy,
    pub attractor: Attractor,
    pub params: HyperParams,
}

impl AlgorithmVariant {
    pub fn new(strategy: Strategy, attractor: Attractor, params: HyperParams) -> Self {
        AlgorithmVariant {
            strategy,
            attractor,
            params,
        }
    }

    /// The `rho` that actually enters the update (zero without attractor).
    pub fn effective_rho(&self) -> f64 {
        match self.attractor {
            Attractor::None => 0.0,
            _ => self.params.attractor_strength,
        }
    }

    pub fn is_leaky(&self) -> bool {
        self.params.leak > 0.0
    }
}

impl fmt::Display for AlgorithmVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let strategy = match self.strategy {
            Strategy::Atc => "ATC",
            Strategy::Cta => "CTA",
        };
        let name = match (self.is_leaky(), self.attractor) {
            (false, Attractor::None) => " DLMS",
            (true, Attractor::None) => " leaky DLMS",
            (false, Attractor::Za) => " ZA DLMS",
            (false, Attractor::Rza) => " RZA DLMS",
            (true, Attractor::Za) => "-LZA-DLMS",
            (true, Attractor::Rza) => "-LRZA-DLMS",
        };
        write!(f, "{strategy}{name}")
    }
}

/// `sign` with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub fn attractor_value(x: f64, kind: Attractor, eps: f64) -> f64 {
    match kind {
        Attractor::None => 0.0,
        Attractor::Za => sign(x),
        Attractor::Rza => sign(x) / (1.0 + eps * x.abs()),
    }
}

/// Elementwise `g(w)`.
pub fn zero_attractor(w: &[f64], kind: Attractor, eps: f64) -> Vec<f64> {
    w.iter().map(|&x| attractor_value(x, kind, eps)).collect()
}

/// Regressors (node-major, `N * M`) and desired samples (`N`) for one
/// iteration.
#[derive(Debug, Clone, Copy)]
pub struct StepData<'a> {
    pub regressors: &'a [f64],
    pub desired: &'a [f64],
}

/// Estimates `w_{k,i}` and intermediates `phi_{k,i}` of every node, stored
/// node-major. Both start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    nodes: usize,
    taps: usize,
    weights: Vec<f64>,
    intermediates: Vec<f64>,
    iteration: usize,
}

impl NetworkState {
    pub fn zeros(nodes: usize, taps: usize) -> Self {
        NetworkState {
            nodes,
            taps,
            weights: vec![0.0; nodes * taps],
            intermediates: vec![0.0; nodes * taps],
            iteration: 0,
        }
    }

    pub fn from_weights(nodes: usize, taps: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != nodes * taps {
            return Err(Error::DimensionMismatch {
                what: "initial weights",
                expected: nodes * taps,
                got: weights.len(),
            });
        }
        Ok(NetworkState {
            nodes,
            taps,
            weights,
            intermediates: vec![0.0; nodes * taps],
            iteration: 0,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Number of completed steps.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_weights(&self, k: usize) -> &[f64] {
        &self.weights[k * self.taps..(k + 1) * self.taps]
    }

    pub fn intermediates(&self) -> &[f64] {
        &self.intermediates
    }

    /// `(1/N) sum_k ||w_o - w_k||^2`.
    pub fn msd(&self, w_o: &[f64]) -> f64 {
        let total: f64 = self
            .weights
            .chunks_exact(self.taps)
            .map(|w| w.iter().zip(w_o).map(|(a, b)| (b - a) * (b - a)).sum::<f64>())
            .sum();
        total / self.nodes as f64
    }

    fn check(&self, combiner: &CombinationMatrix, data: &StepData<'_>) -> Result<()> {
        let (n, m) = (self.nodes, self.taps);
        if combiner.node_count() != n {
            return Err(Error::DimensionMismatch {
                what: "combiner size",
                expected: n,
                got: combiner.node_count(),
            });
        }
        if data.regressors.len() != n * m {
            return Err(Error::DimensionMismatch {
                what: "regressor block",
                expected: n * m,
                got: data.regressors.len(),
            });
        }
        if data.desired.len() != n {
            return Err(Error::DimensionMismatch {
                what: "desired samples",
                expected: n,
                got: data.desired.len(),
            });
        }
        Ok(())
    }

    /// Adapt-then-combine: every node adapts from `w_{k,i-1}` into
    /// `phi_{k,i}`, then every node combines its neighbors' `phi`.
    pub fn atc_step(&mut self, combiner: &CombinationMatrix, variant: &AlgorithmVariant, data: StepData<'_>) -> Result<()> {
        self.check(combiner, &data)?;
        let m = self.taps;
        for k in 0..self.nodes {
            adapt(
                &self.weights[k * m..(k + 1) * m],
                &mut self.intermediates[k * m..(k + 1) * m],
                &data.regressors[k * m..(k + 1) * m],
                data.desired[k],
                variant,
            );
        }
        combine(combiner, &self.intermediates, &mut self.weights, m);
        self.finish()
    }

    /// Combine-then-adapt: `phi_{k,i}` is the neighborhood average of
    /// `w_{l,i-1}`, and the adaptation (attractor included) acts on `phi`.
    pub fn cta_step(&mut self, combiner: &CombinationMatrix, variant: &AlgorithmVariant, data: StepData<'_>) -> Result<()> {
        self.check(combiner, &data)?;
        let m = self.taps;
        combine(combiner, &self.weights, &mut self.intermediates, m);
        for k in 0..self.nodes {
            adapt(
                &self.intermediates[k * m..(k + 1) * m],
                &mut self.weights[k * m..(k + 1) * m],
                &data.regressors[k * m..(k + 1) * m],
                data.desired[k],
                variant,
            );
        }
        self.finish()
    }

    pub fn step(&mut self, combiner: &CombinationMatrix, variant: &AlgorithmVariant, data: StepData<'_>) -> Result<()> {
        match variant.strategy {
            Strategy::Atc => self.atc_step(combiner, variant, data),
            Strategy::Cta => self.cta_step(combiner, variant, data),
        }
    }

    fn finish(&mut self) -> Result<()> {
        let iteration = self.iteration;
        self.iteration += 1;
        if self.weights.iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(Error::Diverged { iteration })
        }
    }
}

fn adapt(from: &[f64], to: &mut [f64], u: &[f64], d: f64, variant: &AlgorithmVariant) {
    let p = &variant.params;
    let mu = p.step_size;
    let shrink = 1.0 - mu * p.leak;
    let rho = variant.effective_rho();
    let scaled_error = mu * (d - dot(u, from));
    for ((t, &w), &x) in to.iter_mut().zip(from).zip(u) {
        *t = shrink * w + scaled_error * x - rho * attractor_value(w, variant.attractor, p.reweight_scale);
    }
}

fn combine(combiner: &CombinationMatrix, from: &[f64], to: &mut [f64], taps: usize) {
    let a = combiner.as_matrix();
    let n = a.ncols();
    for k in 0..n {
        let out = &mut to[k * taps..(k + 1) * taps];
        out.fill(0.0);
        for l in 0..n {
            let weight = a[(l, k)];
            if weight != 0.0 {
                for (o, &x) in out.iter_mut().zip(&from[l * taps..(l + 1) * taps]) {
                    *o += weight * x;
                }
            }
        }
    }
}

/// Per-trial data source: one delay line and one noise generator per node,
/// all derived from `(master_seed, trial)`.
#[derive(Debug, Clone)]
pub struct TrialSource {
    streams: Vec<RegressorStream>,
    input_rngs: Vec<SimRng>,
    noise_rngs: Vec<SimRng>,
    noise_std: Vec<f64>,
    taps: usize,
}

impl TrialSource {
    pub fn new(profile: &SignalProfile, taps: usize, master_seed: u64, trial: u64) -> Self {
        let n = profile.node_count();
        TrialSource {
            streams: (0..n).map(|k| profile.stream(k, taps)).collect(),
            input_rngs: (0..n)
                .map(|k| substream(master_seed, trial, k as u64, StreamRole::Input))
                .collect(),
            noise_rngs: (0..n)
                .map(|k| substream(master_seed, trial, k as u64, StreamRole::Noise))
                .collect(),
            noise_std: profile.noise_variances().iter().map(|v| v.sqrt()).collect(),
            taps,
        }
    }

    /// Draws the next `(u_{k,i}, d_k(i))` for all nodes.
    pub fn fill(&mut self, w_o: &[f64], regressors: &mut [f64], desired: &mut [f64]) -> Result<()> {
        let m = self.taps;
        for k in 0..self.streams.len() {
            let u = self.streams[k].next_regressor(&mut self.input_rngs[k]);
            regressors[k * m..(k + 1) * m].copy_from_slice(u);
            desired[k] = desired_sample(u, w_o, self.noise_std[k], &mut self.noise_rngs[k])?;
        }
        Ok(())
    }
}

/// Everything needed to run one variant over one seeded data realization.
#[derive(Debug, Clone, Copy)]
pub struct TrialSpec<'a> {
    pub combiner: &'a CombinationMatrix,
    pub profile: &'a SignalProfile,
    pub system: &'a SystemSchedule,
    pub variant: &'a AlgorithmVariant,
    pub iterations: usize,
    pub master_seed: u64,
    pub trial: u64,
    pub record_history: bool,
    /// Also flag divergence when the MSD exceeds this value.
    pub divergence_threshold: Option<f64>,
}

/// Weights of every node after every iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightHistory {
    pub nodes: usize,
    pub taps: usize,
    pub snapshots: Vec<Vec<f64>>,
}

impl WeightHistory {
    /// CSV with columns `iteration,node,tap_index,weight_value`; node and tap
    /// indices are 1-based, iterations 0-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "iteration,node,tap_index,weight_value")?;
        for (i, snap) in self.snapshots.iter().enumerate() {
            for k in 0..self.nodes {
                for m in 0..self.taps {
                    writeln!(out, "{i},{},{},{:e}", k + 1, m + 1, snap[k * self.taps + m])?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    /// Network MSD after each iteration; truncated at divergence.
    pub msd: Vec<f64>,
    pub diverged_at: Option<usize>,
    pub history: Option<WeightHistory>,
}

impl TrialTrace {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

pub fn run_trial(spec: &TrialSpec<'_>) -> Result<TrialTrace> {
    let n = spec.profile.node_count();
    let m = spec.system.taps();
    if spec.combiner.node_count() != n {
        return Err(Error::DimensionMismatch {
            what: "combiner vs profile node count",
            expected: n,
            got: spec.combiner.node_count(),
        });
    }
    spec.variant.params.validate()?;
    let mut source = TrialSource::new(spec.profile, m, spec.master_seed, spec.trial);
    let mut state = NetworkState::zeros(n, m);
    let mut regressors = vec![0.0; n * m];
    let mut desired = vec![0.0; n];
    let mut msd = Vec::with_capacity(spec.iterations);
    let mut history = spec.record_history.then(|| WeightHistory {
        nodes: n,
        taps: m,
        snapshots: Vec::with_capacity(spec.iterations),
    });
    let mut diverged_at = None;
    for i in 0..spec.iterations {
        let w_o = spec.system.at(i);
        source.fill(w_o, &mut regressors, &mut desired)?;
        let data = StepData {
            regressors: &regressors,
            desired: &desired,
        };
        match state.step(spec.combiner, spec.variant, data) {
            Ok(()) => {}
            Err(Error::Diverged { .. }) => {
                diverged_at = Some(i);
                break;
            }
            Err(e) => return Err(e),
        }
        let value = state.msd(w_o);
        if !value.is_finite() || spec.divergence_threshold.is_some_and(|t| value > t) {
            diverged_at = Some(i);
            break;
        }
        msd.push(value);
        if let Some(h) = history.as_mut() {
            h.snapshots.push(state.weights().to_vec());
        }
    }
    Ok(TrialTrace {
        msd,
        diverged_at,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_uniform_combiner, Topology};

    fn params(mu: f64, gamma: f64, rho: f64, eps: f64) -> HyperParams {
        HyperParams::new(mu, gamma, rho, eps).unwrap()
    }

    #[test]
    fn attractor_examples() {
        assert_eq!(zero_attractor(&[-2.0, 0.0, 3.0], Attractor::Za, 1.0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(zero_attractor(&[1.0], Attractor::Rza, 1.0), vec![0.5]);
        assert_eq!(zero_attractor(&[-0.25], Attractor::Rza, 1.0), vec![-0.8]);
        assert_eq!(zero_attractor(&[4.0], Attractor::None, 1.0), vec![0.0]);
    }

    #[test]
    fn names_follow_the_summary_table() {
        let p = params(0.01, 0.0, 0.001, 1.0);
        let leaky = params(0.01, 0.002, 0.001, 1.0);
        let name = |s, a, p| AlgorithmVariant::new(s, a, p).to_string();
        assert_eq!(name(Strategy::Atc, Attractor::None, p), "ATC DLMS");
        assert_eq!(name(Strategy::Cta, Attractor::None, leaky), "CTA leaky DLMS");
        assert_eq!(name(Strategy::Atc, Attractor::Rza, p), "ATC RZA DLMS");
        assert_eq!(name(Strategy::Atc, Attractor::Za, leaky), "ATC-LZA-DLMS");
        assert_eq!(name(Strategy::Cta, Attractor::Rza, leaky), "CTA-LRZA-DLMS");
    }

    #[test]
    fn log_sum_mapping() {
        let p = HyperParams::from_log_sum(0.02, 0.0, 0.5, 4.0).unwrap();
        assert!((p.attractor_strength - 0.02 * 0.5 / 4.0).abs() < 1e-18);
        assert_eq!(p.reweight_scale, 0.25);
    }

    #[test]
    fn parameter_validation() {
        assert!(HyperParams::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(HyperParams::new(0.1, -1.0, 0.0, 1.0).is_err());
        assert!(HyperParams::new(0.1, 0.0, -1.0, 1.0).is_err());
        assert!(HyperParams::new(0.1, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn single_node_plain_is_lms() {
        let v = AlgorithmVariant::new(Strategy::Atc, Attractor::None, params(0.1, 0.0, 0.0, 1.0));
        let mut s = NetworkState::from_weights(1, 2, vec![0.5, -0.5]).unwrap();
        let u = [1.0, 2.0];
        let d = [3.0];
        s.atc_step(&CombinationMatrix::identity(1), &v, StepData { regressors: &u, desired: &d })
            .unwrap();
        // e = 3 - (0.5 - 1.0) = 3.5
        assert!((s.weights()[0] - (0.5 + 0.35)).abs() < 1e-15);
        assert!((s.weights()[1] - (-0.5 + 0.7)).abs() < 1e-15);
    }

    #[test]
    fn zero_step_is_pure_averaging() {
        let t = Topology::ring(4).unwrap();
        let c = build_uniform_combiner(&t);
        let w: Vec<f64> = (0..8).map(|x| x as f64).collect();
        let u = vec![1.0; 8];
        let d = vec![5.0; 4];
        // mu = 0 is rejected by HyperParams::new, so build it directly.
        let v = AlgorithmVariant {
            strategy: Strategy::Atc,
            attractor: Attractor::None,
            params: HyperParams {
                step_size: 0.0,
                leak: 0.7,
                attractor_strength: 0.0,
                reweight_scale: 1.0,
            },
        };
        for strategy in [Strategy::Atc, Strategy::Cta] {
            let v = AlgorithmVariant { strategy, ..v };
            let mut s = NetworkState::from_weights(4, 2, w.clone()).unwrap();
            s.step(&c, &v, StepData { regressors: &u, desired: &d }).unwrap();
            for k in 0..4 {
                for m in 0..2 {
                    let expect: f64 = t
                        .neighborhood(k)
                        .iter()
                        .map(|&l| c.weight(l, k) * w[l * 2 + m])
                        .sum();
                    assert!((s.weights()[k * 2 + m] - expect).abs() < 1e-15);
                }
            }
        }
    }

    // N = 2, M = 1, w = [0.5, 0.2], u = [1, 2], d = [1, 1], mu = 0.1,
    // gamma = 0.01, rho = 0.05 (ZA), uniform weights 1/2 everywhere.
    //
    // ATC:  phi_1 = 0.999*0.5 + 0.1*1*(1 - 0.5) - 0.05 = 0.4995
    //       phi_2 = 0.999*0.2 + 0.1*2*(1 - 0.4) - 0.05 = 0.2698
    //       w_1 = w_2 = (0.4995 + 0.2698)/2 = 0.38465
    // CTA:  phi = 0.35 at both nodes
    //       w_1 = 0.999*0.35 + 0.1*(1 - 0.35) - 0.05 = 0.36465
    //       w_2 = 0.999*0.35 + 0.2*(1 - 0.70) - 0.05 = 0.35965
    fn hand_instance() -> (CombinationMatrix, AlgorithmVariant, NetworkState) {
        let t = Topology::from_edges(2, &[(0, 1)]).unwrap();
        let v = AlgorithmVariant::new(Strategy::Atc, Attractor::Za, params(0.1, 0.01, 0.05, 1.0));
        (build_uniform_combiner(&t), v, NetworkState::from_weights(2, 1, vec![0.5, 0.2]).unwrap())
    }

    #[test]
    fn atc_hand_computed_step() {
        let (c, v, mut s) = hand_instance();
        s.atc_step(&c, &v, StepData { regressors: &[1.0, 2.0], desired: &[1.0, 1.0] })
            .unwrap();
        assert!((s.weights()[0] - 0.38465).abs() < 1e-12);
        assert!((s.weights()[1] - 0.38465).abs() < 1e-12);
        assert!((s.intermediates()[0] - 0.4995).abs() < 1e-12);
        assert!((s.intermediates()[1] - 0.2698).abs() < 1e-12);
    }

    #[test]
    fn cta_hand_computed_step() {
        let (c, v, mut s) = hand_instance();
        s.cta_step(&c, &v, StepData { regressors: &[1.0, 2.0], desired: &[1.0, 1.0] })
            .unwrap();
        assert!((s.weights()[0] - 0.36465).abs() < 1e-12);
        assert!((s.weights()[1] - 0.35965).abs() < 1e-12);
    }

    #[test]
    fn dimension_and_divergence_errors() {
        let (c, v, mut s) = hand_instance();
        assert!(matches!(
            s.atc_step(&c, &v, StepData { regressors: &[1.0], desired: &[1.0, 1.0] }),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut s2 = NetworkState::from_weights(2, 1, vec![f64::INFINITY, 0.0]).unwrap();
        assert!(matches!(
            s2.atc_step(&c, &v, StepData { regressors: &[1.0, 2.0], desired: &[1.0, 1.0] }),
            Err(Error::Diverged { iteration: 0 })
        ));
    }

    #[test]
    fn history_csv_layout() {
        let h = WeightHistory {
            nodes: 2,
            taps: 1,
            snapshots: vec![vec![0.5, 0.25]],
        };
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "iteration,node,tap_index,weight_value\n0,1,1,5e-1\n0,2,1,2.5e-1\n");
    }
}
