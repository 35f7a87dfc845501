//! Mismatch and error measurement, exact for small ensembles and by Monte
//! Carlo otherwise, plus total-SNR sweeps over allocation policies.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::alloc::{allocate_chernoff, allocate_kkt, allocate_uniform, Budget, ChernoffOptions};
use crate::boost::{margins, weighted_vote, MarginVector, TrainedEnsemble};
use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::importance::{gaussian_estimate, importance, markov_bound, ChernoffObjective, ProxyKind};
use crate::mathkit::compensated_sum;
use crate::noise::{mismatch_from_allocation, FlipStream, MismatchProfile, NoiseChannelSet, PowerAllocation};
use crate::sign::{Sign, VOTE_TIE_TOLERANCE};

/// Largest ensemble evaluated by enumerating flip patterns.
pub const MAX_EXACT_CLASSIFIERS: usize = 22;

/// Floor on `s` when minimizing the Chernoff bound for reports.
const REPORT_S_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub p_m: f64,
    pub p_e_clean: f64,
    pub p_e_noisy: f64,
    /// Unclamped aggregate Markov bound on `p_m`.
    pub markov_bound: f64,
    /// Chernoff bound on `p_m`, minimized over `s`.
    pub chernoff_bound: f64,
    pub chernoff_s: f64,
    pub gaussian_estimate: f64,
    pub n_samples: usize,
    /// Flip patterns drawn per sample; 0 for exact evaluation.
    pub n_trials: usize,
    pub method: Method,
    pub ci_halfwidth: Option<f64>,
}

/// Probability that the noisy vote on one sample differs from the clean
/// vote, summed over all flip patterns.
///
/// With `c_t = alpha_t f_t` and `S = sum_t c_t`, flipping the set `F` gives
/// the vote `S - 2 sum_{t in F} c_t`. The classifiers are split in two
/// halves; for each subset of the first half the mass of second-half
/// subsets that turn the vote negative is read off a sorted prefix sum.
pub fn sample_mismatch_exact(alphas: &[f64], outputs: &[Sign], p: &MismatchProfile) -> Result<f64> {
    check_len(alphas.len(), outputs.len())?;
    check_len(alphas.len(), p.len())?;
    let t = alphas.len();
    if t > MAX_EXACT_CLASSIFIERS {
        return Err(Error::TooManyClassifiers {
            got: t,
            max: MAX_EXACT_CLASSIFIERS,
        });
    }
    let clean_sum = weighted_vote(alphas, outputs);
    let clean = Sign::of_vote(clean_sum);
    let contrib: Vec<f64> = alphas.iter().zip(outputs).map(|(a, o)| a * o.value()).collect();
    let half = t / 2;
    let first = subset_table(&contrib[..half], &p.probs()[..half]);
    let mut second = subset_table(&contrib[half..], &p.probs()[half..]);
    second.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut prefix = Vec::with_capacity(second.len() + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for (_, q) in &second {
        acc += q;
        prefix.push(acc);
    }
    let total = acc;

    // noisy vote is negative iff v_b > (S + tol) / 2 - v_a
    let terms = first.iter().map(|(va, qa)| {
        let threshold = 0.5 * (clean_sum + VOTE_TIE_TOLERANCE) - va;
        let idx = second.partition_point(|(vb, _)| *vb <= threshold);
        let below = prefix[idx];
        let mass = match clean {
            Sign::Pos => total - below,
            Sign::Neg => below,
        };
        qa * mass
    });
    Ok(compensated_sum(terms).clamp(0.0, 1.0))
}

/// All `(sum of flipped contributions, probability)` pairs for a block.
fn subset_table(contrib: &[f64], probs: &[f64]) -> Vec<(f64, f64)> {
    let mut table = Vec::with_capacity(1 << contrib.len());
    table.push((0.0, 1.0));
    for (c, p) in contrib.iter().zip(probs) {
        let len = table.len();
        for i in 0..len {
            let (v, q) = table[i];
            table[i] = (v, q * (1.0 - p));
            table.push((v + c, q * p));
        }
    }
    table
}

/// Exact evaluation of one ensemble on labelled data.
pub fn exact_mismatch(
    margins: &MarginVector,
    labels: &[Sign],
    ens: &TrainedEnsemble,
    p: &MismatchProfile,
) -> Result<EvaluationReport> {
    check_len(margins.len(), labels.len())?;
    check_len(ens.len(), margins.n_classifiers())?;
    let per_sample: Vec<f64> = (0..margins.len())
        .into_par_iter()
        .map(|n| sample_mismatch_exact(ens.alphas(), margins.outputs(n), p))
        .collect::<Result<_>>()?;
    let p_m = mean(&per_sample);
    let p_e_noisy = mean(
        &per_sample
            .iter()
            .zip(margins.signs().iter().zip(labels))
            .map(|(pm, (clean, y))| if clean == y { *pm } else { 1.0 - pm })
            .collect::<Vec<_>>(),
    );
    let mut report = bounds_report(margins, labels, ens, p)?;
    report.p_m = p_m;
    report.p_e_noisy = p_e_noisy;
    report.method = Method::Exact;
    Ok(report)
}

/// Report with bounds and clean error filled in; mismatch fields zero.
fn bounds_report(
    margins: &MarginVector,
    labels: &[Sign],
    ens: &TrainedEnsemble,
    p: &MismatchProfile,
) -> Result<EvaluationReport> {
    let markov = markov_bound(margins, ens, p)?;
    let obj = ChernoffObjective::new(margins, ens.alphas(), p)?;
    let chernoff_s = obj.optimal_s(REPORT_S_FLOOR)?;
    let chernoff_bound = obj.bound(chernoff_s)?;
    let gaussian = gaussian_estimate(margins, ens, p)?;
    let wrong = margins.signs().iter().zip(labels).filter(|(a, b)| a != b).count();
    Ok(EvaluationReport {
        p_m: 0.0,
        p_e_clean: wrong as f64 / labels.len() as f64,
        p_e_noisy: 0.0,
        markov_bound: markov.aggregate,
        chernoff_bound,
        chernoff_s,
        gaussian_estimate: gaussian.aggregate,
        n_samples: labels.len(),
        n_trials: 0,
        method: Method::Exact,
        ci_halfwidth: None,
    })
}

fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Monte Carlo evaluation: `trials` flip patterns per sample, drawn from
/// the counter-based stream so results do not depend on thread count.
pub fn montecarlo_eval(
    ds: &Dataset,
    ens: &TrainedEnsemble,
    p: &MismatchProfile,
    trials: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let m = margins(ens, ds)?;
    montecarlo_with_margins(&m, ds.labels(), ens, p, trials, seed)
}

pub fn montecarlo_with_margins(
    margins: &MarginVector,
    labels: &[Sign],
    ens: &TrainedEnsemble,
    p: &MismatchProfile,
    trials: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least one trial".into()));
    }
    check_len(margins.len(), labels.len())?;
    check_len(ens.len(), margins.n_classifiers())?;
    check_len(ens.len(), p.len())?;
    let alphas = ens.alphas();
    let counts: Vec<(u64, u64)> = (0..margins.len())
        .into_par_iter()
        .map(|n| {
            let outputs = margins.outputs(n);
            let clean = margins.signs()[n];
            let label = labels[n];
            let mut stream = FlipStream::for_flips(seed, n as u64, 0, alphas.len());
            let mut noisy = outputs.to_vec();
            let (mut mismatches, mut errors) = (0u64, 0u64);
            for _ in 0..trials {
                let pattern = stream.next_pattern(p);
                for (slot, (o, &f)) in noisy.iter_mut().zip(outputs.iter().zip(&pattern.flips)) {
                    *slot = if f { o.flip() } else { *o };
                }
                let decision = Sign::of_vote(weighted_vote(alphas, &noisy));
                mismatches += u64::from(decision != clean);
                errors += u64::from(decision != label);
            }
            (mismatches, errors)
        })
        .collect();
    let draws = (margins.len() * trials) as f64;
    let p_m = counts.iter().map(|c| c.0).sum::<u64>() as f64 / draws;
    let p_e_noisy = counts.iter().map(|c| c.1).sum::<u64>() as f64 / draws;
    let mut report = bounds_report(margins, labels, ens, p)?;
    report.p_m = p_m;
    report.p_e_noisy = p_e_noisy;
    report.n_trials = trials;
    report.method = Method::MonteCarlo;
    report.ci_halfwidth = Some(1.96 * (p_m * (1.0 - p_m) / draws).sqrt());
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Uniform,
    Markov,
    Chernoff,
    Gaussian,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Uniform, Policy::Markov, Policy::Chernoff, Policy::Gaussian];

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Uniform => "uniform",
            Policy::Markov => "markov",
            Policy::Chernoff => "chernoff",
            Policy::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown policy '{s}'")))
    }
}

/// An allocation chosen by a policy, with what it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyAllocation {
    pub policy: Policy,
    /// Importance metrics, absent for the uniform policy.
    pub betas: Option<Vec<f64>>,
    pub allocation: PowerAllocation,
    pub mismatch: MismatchProfile,
    /// Final `s` of the alternating solver, Chernoff policy only.
    pub chernoff_s: Option<f64>,
}

/// Allocates a budget by one policy. `margins` feed the Chernoff solver.
pub fn allocate_policy(
    policy: Policy,
    ens: &TrainedEnsemble,
    margins: &MarginVector,
    ch: &NoiseChannelSet,
    budget: Budget,
    chernoff: &ChernoffOptions,
) -> Result<PolicyAllocation> {
    check_len(ens.len(), ch.len())?;
    let (betas, allocation, chernoff_s) = match policy {
        Policy::Uniform => (None, allocate_uniform(budget, ens.len())?, None),
        Policy::Markov | Policy::Gaussian => {
            let kind = if policy == Policy::Markov {
                ProxyKind::Markov
            } else {
                ProxyKind::Gaussian
            };
            let betas = importance(ens, kind)?;
            let sol = allocate_kkt(&betas, ch, budget)?;
            (Some(betas.betas().to_vec()), sol.allocation, None)
        }
        Policy::Chernoff => {
            let it = allocate_chernoff(ens, margins, ch, budget, chernoff)?;
            let betas = ens.alphas().iter().map(|a| (it.s * a).exp_m1()).collect();
            (Some(betas), it.allocation, Some(it.s))
        }
    };
    let mismatch = mismatch_from_allocation(&allocation, ch)?;
    Ok(PolicyAllocation {
        policy,
        betas,
        allocation,
        mismatch,
        chernoff_s,
    })
}

/// How mismatch is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Exact when the ensemble is small enough, otherwise Monte Carlo.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Total SNR `C / sigma^2` in dB, strictly increasing.
    pub snr_grid_db: Vec<f64>,
    pub policies: Vec<Policy>,
    pub mode: EvalMode,
    pub trials: usize,
    pub seed: u64,
    pub chernoff: ChernoffOptions,
}

impl SweepConfig {
    pub fn new(snr_grid_db: Vec<f64>, policies: Vec<Policy>) -> Self {
        Self {
            snr_grid_db,
            policies,
            mode: EvalMode::Auto,
            trials: 10_000,
            seed: 0,
            chernoff: ChernoffOptions::default(),
        }
    }
}

/// `start, start + step, ...` up to and including `stop` (within rounding).
pub fn db_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && start <= stop) {
        return Err(Error::InvalidParameter(format!(
            "invalid grid {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub policy: Policy,
    pub snr_total_db: f64,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_CSV_HEADER: &str =
    "policy,snr_total_db,p_m,p_e_clean,p_e_noisy,markov_bound,chernoff_bound,chernoff_s,gaussian_estimate,ci_halfwidth,method";

impl SweepResult {
    pub fn rows_for(&self, policy: Policy) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.policy == policy)
    }

    /// `(snr_total_db, p_e_noisy)` curve of one policy.
    pub fn error_curve(&self, policy: Policy) -> Vec<(f64, f64)> {
        self.rows_for(policy)
            .map(|r| (r.snr_total_db, r.report.p_e_noisy))
            .collect()
    }

    /// Total SNR saved by `policy` relative to `baseline` where the noisy
    /// error first falls to `target`. `None` if either curve never crosses.
    pub fn snr_gain(&self, policy: Policy, baseline: Policy, target: f64) -> Option<f64> {
        let base = crossing_db(&self.error_curve(baseline), target)?;
        let ours = crossing_db(&self.error_curve(policy), target)?;
        Some(base - ours)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        for row in &self.rows {
            let r = &row.report;
            let ci = r.ci_halfwidth.map(|c| format!("{c:.10e}")).unwrap_or_default();
            writeln!(
                out,
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{},{}",
                row.policy,
                row.snr_total_db,
                r.p_m,
                r.p_e_clean,
                r.p_e_noisy,
                r.markov_bound,
                r.chernoff_bound,
                r.chernoff_s,
                r.gaussian_estimate,
                ci,
                r.method.as_str()
            )?;
        }
        Ok(())
    }
}

/// First point where a curve falls to `target`, by linear interpolation
/// between grid points. A curve that starts at or below `target` has no
/// crossing inside the grid.
pub fn crossing_db(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let first = curve.first()?;
    if first.1 <= target {
        return None;
    }
    curve.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        (y0 > target && y1 <= target).then(|| x0 + (y0 - target) / (y0 - y1) * (x1 - x0))
    })
}

/// Evaluates one allocation on labelled data.
pub fn evaluate(
    margins: &MarginVector,
    labels: &[Sign],
    ens: &TrainedEnsemble,
    p: &MismatchProfile,
    mode: EvalMode,
    trials: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    let exact = match mode {
        EvalMode::Exact => true,
        EvalMode::MonteCarlo => false,
        EvalMode::Auto => ens.len() <= MAX_EXACT_CLASSIFIERS,
    };
    if exact {
        exact_mismatch(margins, labels, ens, p)
    } else {
        montecarlo_with_margins(margins, labels, ens, p, trials, seed)
    }
}

/// Runs every policy over the total-SNR grid. Allocations use
/// `allocation_data` (the Chernoff solver needs its margins); reports are
/// measured on `eval_data`. The noise power behind the total SNR is the mean
/// of `sigma_t^2`.
pub fn sweep(
    ens: &TrainedEnsemble,
    allocation_data: &Dataset,
    eval_data: &Dataset,
    ch: &NoiseChannelSet,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if cfg.snr_grid_db.is_empty() {
        return Err(Error::InvalidParameter("SNR grid is empty".into()));
    }
    if cfg.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("SNR grid must be strictly increasing".into()));
    }
    check_len(ens.len(), ch.len())?;
    let alloc_margins = margins(ens, allocation_data)?;
    let eval_margins = margins(ens, eval_data)?;
    let noise_power = compensated_sum(ch.sigmas().iter().map(|s| s * s)) / ch.len() as f64;
    let mut rows = Vec::with_capacity(cfg.policies.len() * cfg.snr_grid_db.len());
    for &policy in &cfg.policies {
        for &db in &cfg.snr_grid_db {
            let budget = Budget::from_total_snr_db(db, noise_power)?;
            let chosen = allocate_policy(policy, ens, &alloc_margins, ch, budget, &cfg.chernoff)?;
            let report = evaluate(
                &eval_margins,
                eval_data.labels(),
                ens,
                &chosen.mismatch,
                cfg.mode,
                cfg.trials,
                cfg.seed,
            )?;
            log::info!(
                "{policy} at {db} dB: p_m = {:.4e}, p_e = {:.4e}",
                report.p_m,
                report.p_e_noisy
            );
            rows.push(SweepRow {
                policy,
                snr_total_db: db,
                report,
            });
        }
    }
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::DecisionStump;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ensemble(alphas: &[f64]) -> TrainedEnsemble {
        let stumps = (0..alphas.len())
            .map(|j| DecisionStump {
                feature_index: j,
                threshold: 0.0,
                polarity: Sign::Pos,
            })
            .collect();
        TrainedEnsemble::new(stumps, alphas.to_vec(), vec![]).unwrap()
    }

    /// Brute-force enumeration over every flip pattern.
    fn brute_force(alphas: &[f64], outputs: &[Sign], p: &[f64]) -> f64 {
        let clean = Sign::of_vote(weighted_vote(alphas, outputs));
        let t = alphas.len();
        let mut total = 0.0;
        for mask in 0u32..(1 << t) {
            let mut prob = 1.0;
            let noisy: Vec<Sign> = (0..t)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        prob *= p[i];
                        outputs[i].flip()
                    } else {
                        prob *= 1.0 - p[i];
                        outputs[i]
                    }
                })
                .collect();
            if Sign::of_vote(weighted_vote(alphas, &noisy)) != clean {
                total += prob;
            }
        }
        total
    }

    struct Instance {
        ens: TrainedEnsemble,
        margins: MarginVector,
        labels: Vec<Sign>,
        p: MismatchProfile,
    }

    fn random_instance(seed: u64, t: usize, n: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..t).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let alphas: Vec<f64> = raw.iter().map(|a| a / total).collect();
        let outputs: Vec<Sign> = (0..n * t)
            .map(|_| if rng.gen_bool(0.7) { Sign::Pos } else { Sign::Neg })
            .collect();
        let labels = (0..n)
            .map(|_| if rng.gen_bool(0.5) { Sign::Pos } else { Sign::Neg })
            .collect();
        let p = (0..t).map(|_| rng.gen_range(0.0..0.5)).collect();
        Instance {
            margins: MarginVector::from_base_outputs(&alphas, outputs).unwrap(),
            ens: ensemble(&alphas),
            labels,
            p: MismatchProfile::new(p).unwrap(),
        }
    }

    #[test]
    fn single_classifier_mismatch_is_p() {
        for p in [0.0, 0.1, 0.37, 0.5] {
            let prof = MismatchProfile::new(vec![p]).unwrap();
            for o in [Sign::Pos, Sign::Neg] {
                assert!((sample_mismatch_exact(&[1.0], &[o], &prof).unwrap() - p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn majority_of_three() {
        let a = [1.0 / 3.0; 3];
        for q in [0.05, 0.2, 0.45] {
            let prof = MismatchProfile::new(vec![q; 3]).unwrap();
            let expected = 3.0 * q * q * (1.0 - q) + q * q * q;
            for o in [Sign::Pos, Sign::Neg] {
                let got = sample_mismatch_exact(&a, &[o; 3], &prof).unwrap();
                assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
            }
        }
    }

    #[test]
    fn ties_follow_the_vote_rule() {
        // alphas (1/2, 1/2) with outputs (+, -): clean sum 0 counts as +1;
        // flipping only the second gives +1 again, only the first gives -1
        let a = [0.5, 0.5];
        let prof = MismatchProfile::new(vec![0.1, 0.3]).unwrap();
        let got = sample_mismatch_exact(&a, &[Sign::Pos, Sign::Neg], &prof).unwrap();
        let expected = brute_force(&a, &[Sign::Pos, Sign::Neg], &[0.1, 0.3]);
        assert!((got - expected).abs() < 1e-15);
        assert!((expected - 0.1 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn exact_matches_brute_force() {
        for seed in 0..40 {
            let t = 1 + (seed as usize % 11);
            let inst = random_instance(seed, t, 6);
            for n in 0..inst.margins.len() {
                let fast = sample_mismatch_exact(inst.ens.alphas(), inst.margins.outputs(n), &inst.p).unwrap();
                let slow = brute_force(inst.ens.alphas(), inst.margins.outputs(n), inst.p.probs());
                assert!((fast - slow).abs() < 1e-13, "seed {seed}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn exact_rejects_large_ensembles() {
        let t = MAX_EXACT_CLASSIFIERS + 1;
        let a = vec![1.0 / t as f64; t];
        let err = sample_mismatch_exact(&a, &vec![Sign::Pos; t], &MismatchProfile::noiseless(t));
        assert!(matches!(err, Err(Error::TooManyClassifiers { .. })));
    }

    #[test]
    fn exact_report_invariants() {
        for seed in 0..30 {
            let inst = random_instance(100 + seed, 8, 25);
            let r = exact_mismatch(&inst.margins, &inst.labels, &inst.ens, &inst.p).unwrap();
            assert!(r.p_e_noisy <= r.p_e_clean + r.p_m + 1e-12);
            assert!(r.markov_bound >= r.p_m - 1e-12);
            assert!(r.chernoff_bound >= r.p_m - 1e-12);
            assert!(r.ci_halfwidth.is_none());
            for v in [r.p_m, r.p_e_clean, r.p_e_noisy] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn montecarlo_noiseless_and_deterministic() {
        let inst = random_instance(9, 5, 20);
        let zero = MismatchProfile::noiseless(5);
        let r = montecarlo_with_margins(&inst.margins, &inst.labels, &inst.ens, &zero, 100, 1).unwrap();
        assert_eq!(r.p_m, 0.0);
        assert_eq!(r.p_e_noisy, r.p_e_clean);
        let a = montecarlo_with_margins(&inst.margins, &inst.labels, &inst.ens, &inst.p, 500, 7).unwrap();
        let b = montecarlo_with_margins(&inst.margins, &inst.labels, &inst.ens, &inst.p, 500, 7).unwrap();
        assert_eq!(a, b);
        assert!(montecarlo_with_margins(&inst.margins, &inst.labels, &inst.ens, &inst.p, 0, 7).is_err());
    }

    #[test]
    fn montecarlo_single_classifier() {
        let ens = ensemble(&[1.0]);
        let m = MarginVector::from_base_outputs(&[1.0], vec![Sign::Pos]).unwrap();
        let p = MismatchProfile::new(vec![0.2]).unwrap();
        let r = montecarlo_with_margins(&m, &[Sign::Pos], &ens, &p, 100_000, 3).unwrap();
        let ci = r.ci_halfwidth.unwrap();
        assert!((r.p_m - 0.2).abs() <= 3.0 * ci, "{} ± {ci}", r.p_m);
    }

    #[test]
    fn montecarlo_agrees_with_exact() {
        let mut within = 0;
        for seed in 0..20 {
            let inst = random_instance(500 + seed, 10, 15);
            let exact = exact_mismatch(&inst.margins, &inst.labels, &inst.ens, &inst.p).unwrap();
            let mc = montecarlo_with_margins(&inst.margins, &inst.labels, &inst.ens, &inst.p, 20_000, seed).unwrap();
            if (mc.p_m - exact.p_m).abs() <= 4.0 * mc.ci_halfwidth.unwrap() {
                within += 1;
            }
        }
        assert!(within >= 19, "{within}/20");
    }

    #[test]
    fn montecarlo_thread_count_invariant() {
        let inst = random_instance(77, 6, 40);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| montecarlo_with_margins(&inst.margins, &inst.labels, &inst.ens, &inst.p, 300, 5).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("bagging".parse::<Policy>().is_err());
    }

    #[test]
    fn grid_construction() {
        assert_eq!(db_grid(0.0, 1.0, 0.5).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(db_grid(0.0, 30.0, 0.5).unwrap().len(), 61);
        assert!(db_grid(1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn crossing_interpolates() {
        let curve = [(0.0, 0.3), (1.0, 0.2), (2.0, 0.05)];
        assert!((crossing_db(&curve, 0.1).unwrap() - (1.0 + 0.1 / 0.15)).abs() < 1e-12);
        assert_eq!(crossing_db(&curve, 0.01), None);
        assert_eq!(crossing_db(&[(0.0, 0.05)], 0.1), None);
    }

    fn toy_data(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let y = if rng.gen_bool(0.5) { Sign::Pos } else { Sign::Neg };
            let shift = y.value() * 0.8;
            rows.push((0..4).map(|_| rng.gen_range(-1.0..1.0) + shift).collect());
            labels.push(y);
        }
        Dataset::new(rows, labels).unwrap()
    }

    #[test]
    fn sweep_rows_and_monotonicity() {
        let train = toy_data(1, 120);
        let test = toy_data(2, 60);
        let ens = crate::boost::train_adaboost(&train, 6).unwrap();
        let ch = NoiseChannelSet::uniform(1.0, ens.len()).unwrap();
        let cfg = SweepConfig::new(db_grid(-5.0, 25.0, 2.5).unwrap(), Policy::ALL.to_vec());
        let res = sweep(&ens, &train, &test, &ch, &cfg).unwrap();
        assert_eq!(res.rows.len(), 4 * cfg.snr_grid_db.len());
        for policy in Policy::ALL {
            let rows: Vec<_> = res.rows_for(policy).collect();
            for w in rows.windows(2) {
                assert!(w[1].snr_total_db > w[0].snr_total_db);
                assert!(w[1].report.p_m <= w[0].report.p_m + 1e-12, "{policy}");
            }
        }
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_CSV_HEADER);
        assert_eq!(text.lines().count(), res.rows.len() + 1);
    }

    #[test]
    fn uniform_policy_allocates_equally() {
        let ens = ensemble(&[0.5, 0.3, 0.2]);
        let m = MarginVector::from_base_outputs(ens.alphas(), vec![Sign::Pos; 3]).unwrap();
        let ch = NoiseChannelSet::uniform(1.0, 3).unwrap();
        let a = allocate_policy(
            Policy::Uniform,
            &ens,
            &m,
            &ch,
            Budget::new(3.0).unwrap(),
            &ChernoffOptions::default(),
        )
        .unwrap();
        assert!(a.allocation.amplitudes().iter().all(|&r| (r - 1.0).abs() < 1e-15));
        assert!(a.betas.is_none());
    }

    #[test]
    fn sweep_rejects_bad_grid() {
        let train = toy_data(1, 40);
        let ens = crate::boost::train_adaboost(&train, 2).unwrap();
        let ch = NoiseChannelSet::uniform(1.0, ens.len()).unwrap();
        let cfg = SweepConfig::new(vec![1.0, 1.0], vec![Policy::Uniform]);
        assert!(sweep(&ens, &train, &train, &ch, &cfg).is_err());
        let cfg = SweepConfig::new(vec![], vec![Policy::Uniform]);
        assert!(sweep(&ens, &train, &train, &ch, &cfg).is_err());
    }
}
