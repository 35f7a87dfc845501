//! Per-classifier additive Gaussian channels and flip sampling.
//!
//! Base output `f_t` is sent as `f_t * r_t`, received with `z_t ~ N(0, sigma_t^2)`
//! and sliced back to a sign, so it flips with probability `Q(r_t / sigma_t)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boost::{weighted_vote, TrainedEnsemble};
use crate::error::{check_len, Error, Result};
use crate::mathkit::gaussian_tail;
use crate::sign::Sign;

/// Noise standard deviations `sigma_t > 0`, one per base classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseChannelSet {
    sigmas: Vec<f64>,
}

impl NoiseChannelSet {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidParameter("need at least one channel".into()));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be positive, got {s}"
            )));
        }
        Ok(Self { sigmas })
    }

    pub fn uniform(sigma: f64, count: usize) -> Result<Self> {
        Self::new(vec![sigma; count])
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    /// The common sigma when every channel has the same one.
    pub fn common_sigma(&self) -> Option<f64> {
        let first = self.sigmas[0];
        self.sigmas.iter().all(|&s| s == first).then_some(first)
    }
}

/// Transmit amplitudes `r_t >= 0` with `sum r_t^2 <= C`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    amplitudes: Vec<f64>,
    budget: f64,
}

impl PowerAllocation {
    pub fn new(amplitudes: Vec<f64>, budget: f64) -> Result<Self> {
        if !(budget >= 0.0 && budget.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "budget must be nonnegative, got {budget}"
            )));
        }
        if let Some(r) = amplitudes.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be nonnegative, got {r}"
            )));
        }
        let used = power(&amplitudes);
        if used > budget * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "allocation uses power {used}, budget is {budget}"
            )));
        }
        Ok(Self { amplitudes, budget })
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// `sum r_t^2`.
    pub fn power(&self) -> f64 {
        power(&self.amplitudes)
    }

    /// Per-channel `SNR_t = r_t^2 / sigma_t^2` (linear).
    pub fn snr(&self, ch: &NoiseChannelSet) -> Result<Vec<f64>> {
        check_len(self.len(), ch.len())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(ch.sigmas())
            .map(|(r, s)| (r / s).powi(2))
            .collect())
    }

    pub fn snr_db(&self, ch: &NoiseChannelSet) -> Result<Vec<f64>> {
        Ok(self.snr(ch)?.into_iter().map(|s| 10.0 * s.log10()).collect())
    }
}

fn power(amplitudes: &[f64]) -> f64 {
    amplitudes.iter().map(|r| r * r).sum()
}

/// Per-classifier flip probabilities `p_t` in `[0, 1/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchProfile {
    probs: Vec<f64>,
}

impl MismatchProfile {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && **p <= 0.5)) {
            return Err(Error::InvalidParameter(format!(
                "mismatch probability must lie in [0, 0.5], got {p}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn noiseless(count: usize) -> Self {
        Self {
            probs: vec![0.0; count],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_noiseless(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0)
    }
}

/// `p_t = Q(r_t / sigma_t)`.
pub fn mismatch_from_allocation(alloc: &PowerAllocation, ch: &NoiseChannelSet) -> Result<MismatchProfile> {
    check_len(ch.len(), alloc.len())?;
    let probs = alloc
        .amplitudes()
        .iter()
        .zip(ch.sigmas())
        .map(|(r, s)| gaussian_tail(r / s).min(0.5))
        .collect();
    MismatchProfile::new(probs)
}

/// Which base outputs were flipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipPattern {
    pub flips: Vec<bool>,
}

impl FlipPattern {
    pub fn count(&self) -> usize {
        self.flips.iter().filter(|&&f| f).count()
    }

    pub fn apply(&self, outputs: &[Sign]) -> Vec<Sign> {
        outputs
            .iter()
            .zip(&self.flips)
            .map(|(o, &f)| if f { o.flip() } else { *o })
            .collect()
    }
}

/// Counter-based random stream keyed by `(seed, sample, trial)`.
///
/// ChaCha8 keyed by the seed, on stream `sample`, positioned at the first
/// word of `trial`. Each trial consumes exactly `draws_per_trial` 64-bit
/// draws, so the bits a trial sees do not depend on which other
/// `(sample, trial)` pairs were generated before it, or on which thread.
#[derive(Debug, Clone)]
pub struct FlipStream {
    rng: ChaCha8Rng,
    draws_per_trial: usize,
}

impl FlipStream {
    pub fn new(seed: u64, sample: u64, trial: u64, draws_per_trial: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample);
        // two 32-bit words per f64 draw
        rng.set_word_pos(u128::from(trial) * 2 * draws_per_trial as u128);
        Self { rng, draws_per_trial }
    }

    /// Stream for the flip-only sampler: one draw per classifier.
    pub fn for_flips(seed: u64, sample: u64, trial: u64, n_classifiers: usize) -> Self {
        Self::new(seed, sample, trial, n_classifiers)
    }

    pub fn draws_per_trial(&self) -> usize {
        self.draws_per_trial
    }

    #[inline]
    fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Flip pattern for the next trial: `delta_t = 1` with probability `p_t`.
    pub fn next_pattern(&mut self, profile: &MismatchProfile) -> FlipPattern {
        debug_assert_eq!(profile.len(), self.draws_per_trial);
        FlipPattern {
            flips: profile.probs().iter().map(|&p| self.uniform() < p).collect(),
        }
    }

    // Box-Muller; consumes two draws.
    fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Raw 64-bit draw, for callers that need their own distribution.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Flips each base output independently with probability `p_t`.
pub fn sample_noisy_votes(
    outputs: &[Sign],
    profile: &MismatchProfile,
    stream: &mut FlipStream,
) -> Result<(FlipPattern, Vec<Sign>)> {
    check_len(outputs.len(), profile.len())?;
    check_len(outputs.len(), stream.draws_per_trial())?;
    let pattern = stream.next_pattern(profile);
    let noisy = pattern.apply(outputs);
    Ok((pattern, noisy))
}

/// Validation path that simulates the continuous channel
/// `sign(f_t r_t + z_t)` instead of drawing flips at `p_t` directly.
/// The stream must have been created with `2 * T` draws per trial.
pub fn sample_noisy_votes_continuous(
    outputs: &[Sign],
    alloc: &PowerAllocation,
    ch: &NoiseChannelSet,
    stream: &mut FlipStream,
) -> Result<(FlipPattern, Vec<Sign>)> {
    check_len(outputs.len(), alloc.len())?;
    check_len(outputs.len(), ch.len())?;
    check_len(2 * outputs.len(), stream.draws_per_trial())?;
    let noisy: Vec<Sign> = outputs
        .iter()
        .zip(alloc.amplitudes().iter().zip(ch.sigmas()))
        .map(|(f, (r, s))| Sign::of(f.value() * r + s * stream.standard_normal()))
        .collect();
    let flips = outputs.iter().zip(&noisy).map(|(a, b)| a != b).collect();
    Ok((FlipPattern { flips }, noisy))
}

/// Noiseless weighted vote over (possibly corrupted) base outputs.
pub fn noisy_vote(ens: &TrainedEnsemble, noisy_outputs: &[Sign]) -> Result<Sign> {
    check_len(ens.len(), noisy_outputs.len())?;
    Ok(Sign::of_vote(weighted_vote(ens.alphas(), noisy_outputs)))
}
