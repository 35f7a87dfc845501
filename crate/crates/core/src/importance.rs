//! Importance metrics, proxies of the final mismatch probability, the
//! Markov and Chernoff upper bounds, and the Gaussian mismatch estimate.
//!
//! Each proxy has the form `sum_t beta_t p_t` with
//!
//! | proxy    | beta_t              |
//! |----------|---------------------|
//! | Markov   | `alpha_t`           |
//! | Chernoff | `exp(s alpha_t) - 1`|
//! | Gaussian | `alpha_t^2`         |
//!
//! Expectations over inputs are empirical means over the samples behind a
//! [`MarginVector`].

use crate::boost::{MarginVector, TrainedEnsemble};
use crate::error::{check_len, Error, Result};
use crate::mathkit::{compensated_sum, find_root, gaussian_tail, log_sum_exp, RootBracket};
use crate::noise::MismatchProfile;
use crate::sign::Sign;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxyKind {
    Markov,
    Chernoff { s: f64 },
    Gaussian,
}

impl ProxyKind {
    pub fn chernoff(s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Chernoff parameter s must be positive, got {s}"
            )));
        }
        Ok(ProxyKind::Chernoff { s })
    }

    /// `beta(alpha)` for this proxy.
    pub fn metric(&self, alpha: f64) -> f64 {
        match *self {
            ProxyKind::Markov => alpha,
            ProxyKind::Chernoff { s } => (s * alpha).exp_m1(),
            ProxyKind::Gaussian => alpha * alpha,
        }
    }
}

/// Positive importance metrics `beta_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    betas: Vec<f64>,
}

impl ImportanceVector {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidParameter("importance vector is empty".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "importance metrics must be positive, got {b}"
            )));
        }
        Ok(Self { betas })
    }

    pub fn uniform(count: usize) -> Result<Self> {
        Self::new(vec![1.0; count])
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

pub fn importance(ens: &TrainedEnsemble, kind: ProxyKind) -> Result<ImportanceVector> {
    if let ProxyKind::Chernoff { s } = kind {
        ProxyKind::chernoff(s)?;
    }
    ImportanceVector::new(ens.alphas().iter().map(|&a| kind.metric(a)).collect())
}

/// `sum_t beta_t p_t`.
pub fn proxy_value(betas: &ImportanceVector, p: &MismatchProfile) -> Result<f64> {
    check_len(betas.len(), p.len())?;
    Ok(compensated_sum(betas.betas().iter().zip(p.probs()).map(|(b, p)| b * p)))
}

/// Numerator factor of the per-sample Markov bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkovFactor {
    /// `2 p_M / gamma_n`, valid without assumptions on the sign prior.
    #[default]
    Two,
    /// `p_M / gamma_n`, valid only when both clean signs are equiprobable.
    One,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovBound {
    /// Unclamped per-sample bounds; samples with zero margin carry 1.
    pub per_sample: Vec<f64>,
    /// Per-sample bounds clamped to `[0, 1]` for reporting.
    pub per_sample_clamped: Vec<f64>,
    /// Mean of the unclamped per-sample bounds; may exceed 1.
    pub aggregate: f64,
    /// Indices of samples with zero margin (bound is vacuous).
    pub vacuous: Vec<usize>,
}

impl MarkovBound {
    pub fn has_vacuous(&self) -> bool {
        !self.vacuous.is_empty()
    }
}

pub fn markov_bound(margins: &MarginVector, ens: &TrainedEnsemble, p: &MismatchProfile) -> Result<MarkovBound> {
    markov_bound_with(margins, ens, p, MarkovFactor::Two)
}

pub fn markov_bound_with(
    margins: &MarginVector,
    ens: &TrainedEnsemble,
    p: &MismatchProfile,
    factor: MarkovFactor,
) -> Result<MarkovBound> {
    check_len(ens.len(), p.len())?;
    check_len(ens.len(), margins.n_classifiers())?;
    let proxy = proxy_value(&importance(ens, ProxyKind::Markov)?, p)?;
    let scale = match factor {
        MarkovFactor::Two => 2.0,
        MarkovFactor::One => 1.0,
    };
    let mut vacuous = Vec::new();
    let per_sample: Vec<f64> = margins
        .margins()
        .iter()
        .enumerate()
        .map(|(n, &g)| {
            if proxy == 0.0 {
                0.0
            } else if g > 0.0 {
                scale * proxy / g
            } else {
                vacuous.push(n);
                1.0
            }
        })
        .collect();
    if !vacuous.is_empty() {
        log::warn!(
            "{} samples have zero margin; their Markov bound is vacuous",
            vacuous.len()
        );
    }
    let per_sample_clamped = per_sample.iter().map(|b| b.clamp(0.0, 1.0)).collect();
    let aggregate = mean(&per_sample);
    Ok(MarkovBound {
        per_sample,
        per_sample_clamped,
        aggregate,
        vacuous,
    })
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// `h(s) = mean_n exp(-s gamma_n / 2) * exp(sum_t (exp(s alpha_t) - 1) p_t)`.
pub fn chernoff_bound(margins: &MarginVector, ens: &TrainedEnsemble, p: &MismatchProfile, s: f64) -> Result<f64> {
    let obj = ChernoffObjective::new(margins, ens.alphas(), p)?;
    obj.bound(s)
}

/// The Chernoff bound as a function of `s` for fixed margins, coefficients
/// and mismatch probabilities. Evaluated in log space.
#[derive(Debug, Clone)]
pub struct ChernoffObjective {
    margins: Vec<f64>,
    min_margin: f64,
    alphas: Vec<f64>,
    probs: Vec<f64>,
}

/// Cap on the Chernoff parameter when the bound keeps decreasing.
pub const MAX_CHERNOFF_S: f64 = 1e6;

impl ChernoffObjective {
    pub fn new(margins: &MarginVector, alphas: &[f64], p: &MismatchProfile) -> Result<Self> {
        check_len(alphas.len(), p.len())?;
        check_len(alphas.len(), margins.n_classifiers())?;
        Self::from_parts(margins.margins().to_vec(), alphas.to_vec(), p.probs().to_vec())
    }

    pub fn from_parts(margins: Vec<f64>, alphas: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if margins.is_empty() {
            return Err(Error::InvalidParameter("no samples for the Chernoff bound".into()));
        }
        check_len(alphas.len(), probs.len())?;
        let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            margins,
            min_margin,
            alphas,
            probs,
        })
    }

    fn check_s(s: f64) -> Result<()> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Chernoff parameter s must be positive, got {s}"
            )));
        }
        Ok(())
    }

    /// `sum_t (exp(s alpha_t) - 1) p_t`.
    pub fn log_noise_factor(&self, s: f64) -> f64 {
        compensated_sum(
            self.alphas
                .iter()
                .zip(&self.probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, p)| (s * a).exp_m1() * p),
        )
    }

    /// `ln mean_n exp(-s gamma_n / 2)`.
    pub fn log_margin_factor(&self, s: f64) -> f64 {
        let exps: Vec<f64> = self.margins.iter().map(|g| -0.5 * s * g).collect();
        log_sum_exp(&exps) - (self.margins.len() as f64).ln()
    }

    pub fn log_bound(&self, s: f64) -> Result<f64> {
        Self::check_s(s)?;
        Ok(self.log_margin_factor(s) + self.log_noise_factor(s))
    }

    pub fn bound(&self, s: f64) -> Result<f64> {
        Ok(self.log_bound(s)?.exp())
    }

    /// Left side of the stationarity condition
    /// `sum_n (sum_t p_t alpha_t e^{s alpha_t} - gamma_n / 2) e^{-s gamma_n / 2} = 0`,
    /// multiplied by the positive constant `e^{s min_n gamma_n / 2}`.
    /// Same sign as `h'(s)`.
    pub fn stationarity(&self, s: f64) -> f64 {
        let pull = compensated_sum(
            self.alphas
                .iter()
                .zip(&self.probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, p)| (p.ln() + s * a).exp() * a),
        );
        compensated_sum(
            self.margins
                .iter()
                .map(|g| (pull - 0.5 * g) * (-0.5 * s * (g - self.min_margin)).exp()),
        )
    }

    /// Minimizer of `h` over `s >= floor`. Since `h` is convex this is the
    /// root of [`Self::stationarity`] when one exists above `floor`, and
    /// `floor` otherwise.
    pub fn optimal_s(&self, floor: f64) -> Result<f64> {
        Self::check_s(floor)?;
        if self.stationarity(floor) >= 0.0 {
            return Ok(floor);
        }
        let mut lo = floor;
        let mut hi = floor.max(1.0);
        while self.stationarity(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > MAX_CHERNOFF_S {
                log::warn!("Chernoff bound still decreasing at s = {MAX_CHERNOFF_S}; capping");
                return Ok(MAX_CHERNOFF_S);
            }
        }
        if lo == hi {
            return Ok(lo);
        }
        let tol = 1e-14 * hi;
        find_root(|s| self.stationarity(s), RootBracket::new(lo, hi, tol)?)
    }
}

/// Mean and variance of the vote noise `v_n` for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNoiseStats {
    /// `-2 (sum_{T+} alpha_t p_t - sum_{T-} alpha_t p_t)`, sample dependent.
    pub mu_v: f64,
    /// `4 sum_t alpha_t^2 p_t (1 - p_t)`, the same for every sample.
    pub sigma_v_sq: f64,
}

pub fn gaussian_stats(outputs: &[Sign], ens: &TrainedEnsemble, p: &MismatchProfile) -> Result<GaussianNoiseStats> {
    check_len(ens.len(), outputs.len())?;
    check_len(ens.len(), p.len())?;
    Ok(stats_from_parts(outputs, ens.alphas(), p.probs()))
}

fn stats_from_parts(outputs: &[Sign], alphas: &[f64], probs: &[f64]) -> GaussianNoiseStats {
    let mu_v = -2.0
        * compensated_sum(
            outputs
                .iter()
                .zip(alphas.iter().zip(probs))
                .map(|(o, (a, p))| o.value() * a * p),
        );
    GaussianNoiseStats {
        mu_v,
        sigma_v_sq: noise_variance(alphas, probs),
    }
}

fn noise_variance(alphas: &[f64], probs: &[f64]) -> f64 {
    4.0 * compensated_sum(alphas.iter().zip(probs).map(|(a, p)| a * a * p * (1.0 - p)))
}

/// Spread used to standardize the margin in the Gaussian estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimateScale {
    /// `sigma_v`, the standard deviation of the vote noise.
    #[default]
    NoiseStd,
    /// `2 sqrt(p_G)`, its small-`p` approximation through the Gaussian proxy.
    ProxyStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEstimate {
    pub per_sample: Vec<f64>,
    pub aggregate: f64,
}

/// Gaussian-approximation estimate of the mismatch probability.
///
/// For a sample with clean decision `s_n` the vote noise pushes toward the
/// boundary with mean `s_n * mu_v`, so the estimate is
/// `Q((gamma_n + s_n mu_v) / scale)`; noiseless profiles give 0.
pub fn gaussian_estimate(
    margins: &MarginVector,
    ens: &TrainedEnsemble,
    p: &MismatchProfile,
) -> Result<GaussianEstimate> {
    gaussian_estimate_with(margins, ens, p, EstimateScale::default())
}

pub fn gaussian_estimate_with(
    margins: &MarginVector,
    ens: &TrainedEnsemble,
    p: &MismatchProfile,
    scale: EstimateScale,
) -> Result<GaussianEstimate> {
    check_len(ens.len(), p.len())?;
    check_len(ens.len(), margins.n_classifiers())?;
    let proxy = proxy_value(&importance(ens, ProxyKind::Gaussian)?, p)?;
    if proxy == 0.0 {
        return Ok(GaussianEstimate {
            per_sample: vec![0.0; margins.len()],
            aggregate: 0.0,
        });
    }
    let spread = match scale {
        EstimateScale::NoiseStd => noise_variance(ens.alphas(), p.probs()).sqrt(),
        EstimateScale::ProxyStd => 2.0 * proxy.sqrt(),
    };
    let per_sample: Vec<f64> = (0..margins.len())
        .map(|n| {
            let st = stats_from_parts(margins.outputs(n), ens.alphas(), p.probs());
            let toward = margins.signs()[n].value() * st.mu_v;
            gaussian_tail((margins.margins()[n] + toward) / spread)
        })
        .collect();
    let aggregate = mean(&per_sample);
    Ok(GaussianEstimate { per_sample, aggregate })
}
