//! Power allocation across classifiers under a total budget `sum r_t^2 <= C`.
//!
//! For a proxy `sum_t beta_t Q(r_t / sigma_t)` the optimum satisfies
//! `SNR_t = W(beta_t^2 / (8 pi sigma_t^4 nu^2))` where `nu > 0` is the budget
//! multiplier; `nu` is found by bisection on the (decreasing) used power.
//! The Chernoff proxy depends on `s`, so [`allocate_chernoff`] alternates an
//! allocation step and an `s` step until the bound stops improving.

use std::f64::consts::PI;
use std::io::Write;

use crate::boost::{MarginVector, TrainedEnsemble};
use crate::error::{check_len, Error, Result};
use crate::importance::{ChernoffObjective, ImportanceVector};
use crate::mathkit::{compensated_sum, find_root, lambert_w0_from_log, RootBracket};
use crate::noise::{mismatch_from_allocation, MismatchProfile, NoiseChannelSet, PowerAllocation};

/// Total transmit power `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget(f64);

impl Budget {
    pub fn new(total_power: f64) -> Result<Self> {
        if !(total_power > 0.0 && total_power.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power budget must be positive, got {total_power}"
            )));
        }
        Ok(Self(total_power))
    }

    /// Budget whose total SNR `C / noise_power` equals `snr_db` decibels.
    pub fn from_total_snr_db(snr_db: f64, noise_power: f64) -> Result<Self> {
        Self::new(noise_power * 10f64.powf(snr_db / 10.0))
    }

    pub fn total_power(&self) -> f64 {
        self.0
    }
}

pub fn allocate_uniform(budget: Budget, count: usize) -> Result<PowerAllocation> {
    if count == 0 {
        return Err(Error::InvalidParameter("cannot allocate to zero classifiers".into()));
    }
    let r = (budget.0 / count as f64).sqrt();
    PowerAllocation::new(vec![r; count], budget.0)
}

/// Budget multiplier at the optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualState {
    pub nu: f64,
    /// `sum r_t^2 - C` at the returned allocation.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub allocation: PowerAllocation,
    pub dual: DualState,
}

/// Minimizes `sum_t beta_t Q(r_t / sigma_t)` subject to `sum r_t^2 <= C`.
pub fn allocate_kkt(betas: &ImportanceVector, ch: &NoiseChannelSet, budget: Budget) -> Result<KktSolution> {
    check_len(betas.len(), ch.len())?;
    let log_betas: Vec<f64> = betas.betas().iter().map(|b| b.ln()).collect();
    kkt_from_log_betas(&log_betas, ch, budget)
}

/// Used power `sum sigma_t^2 W(...)` at multiplier `exp(log_nu)`, with
/// `log_betas` already shifted so their maximum is 0.
fn used_power(log_betas: &[f64], log_sigmas: &[f64], sigmas: &[f64], log_nu: f64) -> f64 {
    compensated_sum(
        log_betas
            .iter()
            .zip(log_sigmas)
            .zip(sigmas)
            .map(|((lb, ls), s)| s * s * snr_at(*lb, *ls, log_nu)),
    )
}

fn snr_at(log_beta: f64, log_sigma: f64, log_nu: f64) -> f64 {
    let log_arg = 2.0 * log_beta - (8.0 * PI).ln() - 4.0 * log_sigma - 2.0 * log_nu;
    lambert_w0_from_log(log_arg).unwrap_or(0.0)
}

/// KKT allocation for metrics given by their logarithms; large Chernoff
/// metrics overflow `f64` long before their logarithms do.
pub(crate) fn kkt_from_log_betas(log_betas: &[f64], ch: &NoiseChannelSet, budget: Budget) -> Result<KktSolution> {
    check_len(log_betas.len(), ch.len())?;
    if let Some(b) = log_betas.iter().find(|b| b.is_nan() || **b == f64::INFINITY) {
        return Err(Error::InvalidParameter(format!("invalid log importance metric {b}")));
    }
    let shift = log_betas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter("all importance metrics are zero".into()));
    }
    let shifted: Vec<f64> = log_betas.iter().map(|b| b - shift).collect();
    let sigmas = ch.sigmas();
    let log_sigmas: Vec<f64> = sigmas.iter().map(|s| s.ln()).collect();
    let c = budget.0;
    let excess = |log_nu: f64| used_power(&shifted, &log_sigmas, sigmas, log_nu) - c;

    let (mut lo, mut hi) = (0.0, 0.0);
    let mut step = 1.0;
    if excess(0.0) > 0.0 {
        while excess(hi) > 0.0 {
            lo = hi;
            hi += step;
            step *= 2.0;
            if step > 1e4 {
                return Err(Error::Bracket { lo, hi });
            }
        }
    } else {
        while excess(lo) <= 0.0 {
            hi = lo;
            lo -= step;
            step *= 2.0;
            if step > 1e4 {
                return Err(Error::Bracket { lo, hi });
            }
        }
    }
    let log_nu = if lo == hi {
        lo
    } else {
        find_root(excess, RootBracket::new(lo, hi, 1e-13)?)?
    };

    let amplitudes: Vec<f64> = shifted
        .iter()
        .zip(&log_sigmas)
        .zip(sigmas)
        .map(|((lb, ls), s)| s * snr_at(*lb, *ls, log_nu).sqrt())
        .collect();
    let allocation = PowerAllocation::new(amplitudes, c)?;
    let residual = allocation.power() - c;
    Ok(KktSolution {
        allocation,
        dual: DualState {
            nu: (log_nu + shift).exp(),
            residual,
        },
    })
}

/// Stationarity residuals `2 nu r_t - beta_t / (sqrt(2 pi) sigma_t) exp(-r_t^2 / (2 sigma_t^2))`.
pub fn kkt_residuals(
    betas: &ImportanceVector,
    ch: &NoiseChannelSet,
    allocation: &PowerAllocation,
    nu: f64,
) -> Result<Vec<f64>> {
    check_len(betas.len(), ch.len())?;
    check_len(betas.len(), allocation.len())?;
    Ok(betas
        .betas()
        .iter()
        .zip(ch.sigmas())
        .zip(allocation.amplitudes())
        .map(|((b, s), r)| 2.0 * nu * r - b / ((2.0 * PI).sqrt() * s) * (-(r * r) / (2.0 * s * s)).exp())
        .collect())
}

/// Settings of the alternating Chernoff solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffOptions {
    pub s0: f64,
    /// Smallest admissible `s`.
    pub floor: f64,
    pub max_iterations: usize,
    /// Stop when the relative change of the bound falls below this.
    pub tolerance: f64,
}

impl Default for ChernoffOptions {
    fn default() -> Self {
        Self {
            s0: std::f64::consts::LN_2,
            floor: 1e-6,
            max_iterations: 50,
            tolerance: 1e-8,
        }
    }
}

impl ChernoffOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::InvalidParameter(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "s floor must be positive, got {}",
                self.floor
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be nonnegative, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChernoffIterate {
    pub s: f64,
    pub allocation: PowerAllocation,
    pub mismatch: MismatchProfile,
    /// Chernoff bound at the returned `s` and allocation.
    pub bound_value: f64,
    /// Bound after the first allocation step, then after every `s` step.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iterations` ran out before the tolerance was met.
    pub converged: bool,
}

/// `ln(exp(x) - 1)` for `x > 0`.
fn log_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// Alternates an allocation step for `beta_t = exp(s alpha_t) - 1` and an
/// exact minimization over `s`; each step cannot increase the bound.
pub fn allocate_chernoff(
    ens: &TrainedEnsemble,
    margins: &MarginVector,
    ch: &NoiseChannelSet,
    budget: Budget,
    opts: &ChernoffOptions,
) -> Result<ChernoffIterate> {
    opts.validate()?;
    check_len(ens.len(), ch.len())?;
    check_len(ens.len(), margins.n_classifiers())?;
    let alphas = ens.alphas();
    let allocate = |s: f64| -> Result<(PowerAllocation, MismatchProfile)> {
        let log_betas: Vec<f64> = alphas.iter().map(|a| log_expm1(s * a)).collect();
        let sol = kkt_from_log_betas(&log_betas, ch, budget)?;
        let p = mismatch_from_allocation(&sol.allocation, ch)?;
        Ok((sol.allocation, p))
    };

    let mut s = opts.s0;
    let (mut allocation, mut mismatch) = allocate(s)?;
    let mut objective = ChernoffObjective::new(margins, alphas, &mismatch)?;
    let mut history = vec![objective.bound(s)?];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        s = objective.optimal_s(opts.floor)?;
        let h = objective.bound(s)?;
        let prev = *history.last().expect("history starts nonempty");
        history.push(h);
        log::debug!("chernoff iteration {iterations}: s = {s:.6e}, h = {h:.6e}");
        if h == 0.0 || ((prev - h) / h).abs() < opts.tolerance {
            converged = true;
            break;
        }
        let next = allocate(s)?;
        allocation = next.0;
        mismatch = next.1;
        objective = ChernoffObjective::new(margins, alphas, &mismatch)?;
    }
    if !converged {
        log::warn!(
            "Chernoff allocation did not converge in {} iterations",
            opts.max_iterations
        );
    }
    let bound_value = *history.last().expect("history starts nonempty");
    Ok(ChernoffIterate {
        s,
        allocation,
        mismatch,
        bound_value,
        history,
        iterations,
        converged,
    })
}

/// Geometric mean of positive values, computed through logarithms.
pub fn geometric_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("geometric mean of no values".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "geometric mean needs positive values, got {v}"
        )));
    }
    Ok((compensated_sum(values.iter().map(|v| v.ln())) / values.len() as f64).exp())
}

/// `(T/2) exp(-C / (2 T sigma^2)) GM(beta)`: the optimal value of the
/// surrogate proxy `sum_t (beta_t / 2) exp(-r_t^2 / (2 sigma^2))` when every
/// channel receives power, which holds once `C / sigma^2 >= 2 sum_t ln(beta_t / min beta)`.
pub fn geometric_mean_proxy(betas: &ImportanceVector, sigma: f64, budget: Budget) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be positive, got {sigma}"
        )));
    }
    let t = betas.len() as f64;
    Ok(t / 2.0 * (-budget.0 / (2.0 * t * sigma * sigma)).exp() * geometric_mean(betas.betas())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSolution {
    pub allocation: PowerAllocation,
    pub value: f64,
}

/// Minimizes the surrogate proxy `sum_t (beta_t / 2) exp(-r_t^2 / (2 sigma^2))`
/// under the budget. Stationarity gives `r_t^2 / sigma^2 = max(0, 2 ln(beta_t / (4 nu)))`.
pub fn solve_surrogate(betas: &ImportanceVector, sigma: f64, budget: Budget) -> Result<SurrogateSolution> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be positive, got {sigma}"
        )));
    }
    let log_b: Vec<f64> = betas.betas().iter().map(|b| b.ln()).collect();
    let total_snr = budget.0 / (sigma * sigma);
    let snr = |log_4nu: f64| -> Vec<f64> { log_b.iter().map(|lb| (2.0 * (lb - log_4nu)).max(0.0)).collect() };
    let excess = |log_4nu: f64| compensated_sum(snr(log_4nu)) - total_snr;
    let top = log_b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // at log(4 nu) = max ln beta nothing is allocated
    let hi = top;
    let mut lo = top - 1.0;
    let mut step = 1.0;
    while excess(lo) < 0.0 {
        step *= 2.0;
        lo = top - step;
        if step > 1e6 {
            return Err(Error::Bracket { lo, hi });
        }
    }
    let log_4nu = find_root(excess, RootBracket::new(lo, hi, 1e-14 * (1.0 + top.abs()))?)?;
    let snr = snr(log_4nu);
    let amplitudes: Vec<f64> = snr.iter().map(|y| sigma * y.sqrt()).collect();
    let allocation = PowerAllocation::new(amplitudes, budget.0)?;
    let value = compensated_sum(betas.betas().iter().zip(&snr).map(|(b, y)| 0.5 * b * (-0.5 * y).exp()));
    Ok(SurrogateSolution { allocation, value })
}

/// One allocation as written to disk: a `#`-prefixed metadata block followed
/// by CSV records `index,beta,sigma,r,snr_db,p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationTable<'a> {
    pub policy: &'a str,
    /// `None` for policies without importance metrics; written as `nan`.
    pub betas: Option<&'a [f64]>,
    pub channels: &'a NoiseChannelSet,
    pub allocation: &'a PowerAllocation,
    pub mismatch: &'a MismatchProfile,
    pub chernoff_s: Option<f64>,
}

impl AllocationTable<'_> {
    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# policy={}", self.policy)?;
        writeln!(out, "# budget={:.16e}", self.allocation.budget())?;
        if let Some(s) = self.chernoff_s {
            writeln!(out, "# chernoff_s={s:.16e}")?;
        }
        writeln!(out, "index,beta,sigma,r,snr_db,p")?;
        let sigmas = self.channels.sigmas();
        for (t, r) in self.allocation.amplitudes().iter().enumerate() {
            let beta = self.betas.map_or(f64::NAN, |b| b[t]);
            let snr_db = 10.0 * ((r / sigmas[t]).powi(2)).log10();
            writeln!(
                out,
                "{t},{beta:.16e},{:.16e},{r:.16e},{snr_db:.16e},{:.16e}",
                sigmas[t],
                self.mismatch.probs()[t]
            )?;
        }
        Ok(())
    }
}
