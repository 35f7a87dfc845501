//! AdaBoost with decision stumps, the weighted vote, and per-sample margins.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::data::Dataset;
use crate::error::{check_len, Error, Result};
use crate::sign::Sign;

/// Rounds whose weighted error is at most this are treated as perfect.
const ZERO_ERROR: f64 = 1e-12;

/// One-split threshold classifier: `polarity` if `x[feature] <= threshold`,
/// `-polarity` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionStump {
    pub feature_index: usize,
    pub threshold: f64,
    pub polarity: Sign,
}

impl DecisionStump {
    #[inline]
    pub fn predict(&self, x: &[f64]) -> Sign {
        if x[self.feature_index] <= self.threshold {
            self.polarity
        } else {
            self.polarity.flip()
        }
    }
}

/// Audit record of one boosting round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRound {
    pub weighted_error: f64,
    /// `log((1 - eps) / eps)` before normalization.
    pub raw_alpha: f64,
    /// Sum of data weights after this round's update; absent when the
    /// ensemble was read back from a file.
    pub data_weights_checksum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEnsemble {
    stumps: Vec<DecisionStump>,
    alphas: Vec<f64>,
    rounds: Vec<TrainingRound>,
}

impl TrainedEnsemble {
    /// Validates `T >= 1`, positive coefficients summing to one.
    pub fn new(stumps: Vec<DecisionStump>, alphas: Vec<f64>, rounds: Vec<TrainingRound>) -> Result<Self> {
        if stumps.is_empty() {
            return Err(Error::InvalidParameter("ensemble needs at least one stump".into()));
        }
        check_len(stumps.len(), alphas.len())?;
        if !rounds.is_empty() {
            check_len(stumps.len(), rounds.len())?;
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "coefficients must be positive, got {a}"
            )));
        }
        let total: f64 = alphas.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "coefficients must sum to 1, got {total}"
            )));
        }
        Ok(Self { stumps, alphas, rounds })
    }

    /// Normalizes positive raw coefficients to sum to one.
    pub fn from_raw_coefficients(stumps: Vec<DecisionStump>, raw: &[f64]) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidParameter(
                "raw coefficients must have a positive finite sum".into(),
            ));
        }
        let alphas = raw.iter().map(|a| a / total).collect();
        Self::new(stumps, alphas, Vec::new())
    }

    /// Same stumps with `alpha_t = 1/T` (majority-vote / bagging baseline).
    pub fn with_uniform_coefficients(&self) -> TrainedEnsemble {
        let t = self.len() as f64;
        TrainedEnsemble {
            stumps: self.stumps.clone(),
            alphas: vec![1.0 / t; self.len()],
            rounds: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.stumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stumps.is_empty()
    }

    pub fn stumps(&self) -> &[DecisionStump] {
        &self.stumps
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn rounds(&self) -> &[TrainingRound] {
        &self.rounds
    }

    fn check_dimension(&self, x: &[f64]) -> Result<()> {
        let needed = self.stumps.iter().map(|s| s.feature_index + 1).max().unwrap_or(0);
        if x.len() < needed {
            return Err(Error::LengthMismatch {
                expected: needed,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Outputs `f_t(x)` of every base classifier.
    pub fn base_outputs(&self, x: &[f64]) -> Result<Vec<Sign>> {
        self.check_dimension(x)?;
        Ok(self.stumps.iter().map(|s| s.predict(x)).collect())
    }

    /// Noise-free decision `sign(sum_t alpha_t f_t(x))`, ties voting `+1`.
    pub fn predict(&self, x: &[f64]) -> Result<Sign> {
        let outputs = self.base_outputs(x)?;
        Ok(Sign::of_vote(weighted_vote(&self.alphas, &outputs)))
    }
}

/// `sum_t alpha_t * output_t`, accumulated left to right.
#[inline]
pub fn weighted_vote(alphas: &[f64], outputs: &[Sign]) -> f64 {
    alphas.iter().zip(outputs).fold(0.0, |acc, (a, o)| acc + a * o.value())
}

/// Exhaustive weighted stump search.
///
/// Candidate thresholds per feature are `-inf`, the midpoints between
/// consecutive distinct values, and `+inf`. Among stumps with minimal
/// weighted error the first in `(feature, threshold, polarity)` order wins,
/// with polarity `-1` ordered before `+1`.
pub fn train_stump(ds: &Dataset, weights: &[f64]) -> Result<(DecisionStump, f64)> {
    let search = StumpSearch::new(ds);
    search.best(ds, weights)
}

struct StumpSearch {
    // per feature, row indices sorted by feature value
    order: Vec<Vec<usize>>,
}

impl StumpSearch {
    fn new(ds: &Dataset) -> Self {
        let order = (0..ds.n_features())
            .map(|j| {
                let mut idx: Vec<usize> = (0..ds.n_samples()).collect();
                idx.sort_by(|&a, &b| ds.feature(a, j).total_cmp(&ds.feature(b, j)));
                idx
            })
            .collect();
        Self { order }
    }

    fn best(&self, ds: &Dataset, weights: &[f64]) -> Result<(DecisionStump, f64)> {
        check_len(ds.n_samples(), weights.len())?;
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter(format!("weights must be nonnegative, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights must have a positive sum".into()));
        }
        let (w_pos, w_neg) = ds
            .labels()
            .iter()
            .zip(weights)
            .fold((0.0, 0.0), |(p, n), (l, w)| match l {
                Sign::Pos => (p + w, n),
                Sign::Neg => (p, n + w),
            });
        let tie = ZERO_ERROR * total;

        let mut best: Option<(DecisionStump, f64)> = None;
        let mut consider = |stump: DecisionStump, err: f64| {
            if best.as_ref().is_none_or(|(_, b)| err < *b - tie) {
                best = Some((stump, err));
            }
        };

        for (j, order) in self.order.iter().enumerate() {
            // polarity +1 misclassifies negatives on the left and positives on the right
            let mut left_neg = 0.0;
            let mut left_pos = 0.0;
            let eval = |threshold: f64, left_pos: f64, left_neg: f64, consider: &mut dyn FnMut(DecisionStump, f64)| {
                let err_pos = left_neg + (w_pos - left_pos);
                let err_neg = left_pos + (w_neg - left_neg);
                consider(
                    DecisionStump {
                        feature_index: j,
                        threshold,
                        polarity: Sign::Neg,
                    },
                    err_neg,
                );
                consider(
                    DecisionStump {
                        feature_index: j,
                        threshold,
                        polarity: Sign::Pos,
                    },
                    err_pos,
                );
            };
            eval(f64::NEG_INFINITY, 0.0, 0.0, &mut consider);
            let mut k = 0;
            while k < order.len() {
                let v = ds.feature(order[k], j);
                while k < order.len() && ds.feature(order[k], j) == v {
                    let i = order[k];
                    match ds.label(i) {
                        Sign::Pos => left_pos += weights[i],
                        Sign::Neg => left_neg += weights[i],
                    }
                    k += 1;
                }
                if k < order.len() {
                    let next = ds.feature(order[k], j);
                    eval(0.5 * (v + next), left_pos, left_neg, &mut consider);
                }
            }
            eval(f64::INFINITY, w_pos, w_neg, &mut consider);
        }
        let (stump, err) = best.ok_or_else(|| Error::Internal("empty stump search".into()))?;
        Ok((stump, (err / total).clamp(0.0, 1.0)))
    }
}

/// Trains up to `rounds` boosting rounds and normalizes the coefficients.
///
/// Stops early when a round's weighted error is zero or at least one half;
/// such a round is discarded unless it is the first and perfect, in which
/// case the result is that single stump with coefficient 1.
pub fn train_adaboost(ds: &Dataset, rounds: usize) -> Result<TrainedEnsemble> {
    if rounds < 1 {
        return Err(Error::InvalidParameter("number of rounds must be at least 1".into()));
    }
    let n = ds.n_samples();
    let search = StumpSearch::new(ds);
    let mut weights = vec![1.0 / n as f64; n];
    let mut stumps = Vec::with_capacity(rounds);
    let mut raw = Vec::with_capacity(rounds);
    let mut log = Vec::with_capacity(rounds);

    for t in 0..rounds {
        let (stump, eps) = search.best(ds, &weights)?;
        if eps <= ZERO_ERROR {
            if t == 0 {
                log::info!("round 1 separates the training set; single-stump ensemble");
                return TrainedEnsemble::new(
                    vec![stump],
                    vec![1.0],
                    vec![TrainingRound {
                        weighted_error: 0.0,
                        raw_alpha: f64::INFINITY,
                        data_weights_checksum: Some(weights.iter().sum()),
                    }],
                );
            }
            log::info!("round {} has zero weighted error; stopping", t + 1);
            break;
        }
        if eps >= 0.5 {
            log::info!("round {} has weighted error {eps} >= 0.5; stopping", t + 1);
            break;
        }
        let alpha = ((1.0 - eps) / eps).ln();
        let boost = alpha.exp();
        for (i, w) in weights.iter_mut().enumerate() {
            if stump.predict(ds.row(i)) != ds.label(i) {
                *w *= boost;
            }
        }
        stumps.push(stump);
        raw.push(alpha);
        log.push(TrainingRound {
            weighted_error: eps,
            raw_alpha: alpha,
            data_weights_checksum: Some(weights.iter().sum()),
        });
    }
    if stumps.is_empty() {
        return Err(Error::InvalidData(
            "no decision stump beats chance on the training set".into(),
        ));
    }
    let total: f64 = raw.iter().sum();
    let alphas = raw.iter().map(|a| a / total).collect();
    TrainedEnsemble::new(stumps, alphas, log)
}

/// Clean-ensemble margins `gamma_n = |sum_t alpha_t f_t(x_n)|` with the
/// cached base outputs they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginVector {
    margins: Vec<f64>,
    signs: Vec<Sign>,
    base_outputs: Vec<Sign>,
    n_classifiers: usize,
}

impl MarginVector {
    /// Builds margins from a row-major `N x T` table of base outputs.
    pub fn from_base_outputs(alphas: &[f64], base_outputs: Vec<Sign>) -> Result<Self> {
        let t = alphas.len();
        if t == 0 || !base_outputs.len().is_multiple_of(t) {
            return Err(Error::InvalidParameter(format!(
                "{} outputs do not form rows of length {t}",
                base_outputs.len()
            )));
        }
        let (margins, signs) = base_outputs
            .chunks_exact(t)
            .map(|row| {
                let g = weighted_vote(alphas, row);
                (g.abs(), Sign::of_vote(g))
            })
            .unzip();
        Ok(Self {
            margins,
            signs,
            base_outputs,
            n_classifiers: t,
        })
    }

    pub fn len(&self) -> usize {
        self.margins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.margins.is_empty()
    }

    pub fn n_classifiers(&self) -> usize {
        self.n_classifiers
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    /// Clean decisions `f(x_n)`.
    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn outputs(&self, n: usize) -> &[Sign] {
        &self.base_outputs[n * self.n_classifiers..(n + 1) * self.n_classifiers]
    }
}

pub fn margins(ens: &TrainedEnsemble, ds: &Dataset) -> Result<MarginVector> {
    let mut outputs = Vec::with_capacity(ds.n_samples() * ens.len());
    for x in ds.rows() {
        outputs.extend(ens.base_outputs(x)?);
    }
    MarginVector::from_base_outputs(ens.alphas(), outputs)
}

/// Fraction of samples whose clean decision differs from the label.
pub fn error_rate(ens: &TrainedEnsemble, ds: &Dataset) -> Result<f64> {
    let mut wrong = 0usize;
    for (x, y) in ds.rows().zip(ds.labels()) {
        if ens.predict(x)? != *y {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / ds.n_samples() as f64)
}

const ENSEMBLE_HEADER: &str = "# noisyboost ensemble: T, then feature_index threshold polarity alpha raw_alpha epsilon";

/// Plain-text form: `T` on the first data line, then one round per line.
/// Reals carry 17 significant digits.
pub fn write_ensemble<W: Write>(ens: &TrainedEnsemble, mut out: W) -> std::io::Result<()> {
    out.write_all(ensemble_to_string(ens).as_bytes())
}

pub fn ensemble_to_string(ens: &TrainedEnsemble) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{ENSEMBLE_HEADER}");
    let _ = writeln!(s, "{}", ens.len());
    for (t, stump) in ens.stumps.iter().enumerate() {
        let (raw, eps) = ens
            .rounds
            .get(t)
            .map_or((f64::NAN, f64::NAN), |r| (r.raw_alpha, r.weighted_error));
        let _ = writeln!(
            s,
            "{} {:.16e} {} {:.16e} {:.16e} {:.16e}",
            stump.feature_index,
            stump.threshold,
            stump.polarity.as_i32(),
            ens.alphas[t],
            raw,
            eps
        );
    }
    s
}

pub fn read_ensemble<R: BufRead>(input: R, source: &str) -> Result<TrainedEnsemble> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut declared: Option<usize> = None;
    let mut stumps = Vec::new();
    let mut alphas = Vec::new();
    let mut rounds = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if declared.is_none() {
            let t = fields
                .first()
                .filter(|_| fields.len() == 1)
                .and_then(|f| f.parse::<usize>().ok())
                .ok_or_else(|| parse_err(line_no, format!("expected round count, got '{line}'")))?;
            declared = Some(t);
            continue;
        }
        if fields.len() != 6 {
            return Err(parse_err(line_no, format!("expected 6 fields, got {}", fields.len())));
        }
        let real = |k: usize| {
            fields[k]
                .parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("bad number '{}'", fields[k])))
        };
        let feature_index = fields[0]
            .parse::<usize>()
            .map_err(|_| parse_err(line_no, format!("bad feature index '{}'", fields[0])))?;
        let polarity = fields[2]
            .parse::<i32>()
            .ok()
            .and_then(Sign::from_i32)
            .ok_or_else(|| parse_err(line_no, format!("bad polarity '{}'", fields[2])))?;
        stumps.push(DecisionStump {
            feature_index,
            threshold: real(1)?,
            polarity,
        });
        alphas.push(real(3)?);
        rounds.push(TrainingRound {
            raw_alpha: real(4)?,
            weighted_error: real(5)?,
            data_weights_checksum: None,
        });
    }
    let declared = declared.ok_or_else(|| parse_err(0, "empty ensemble file".into()))?;
    if declared != stumps.len() {
        return Err(parse_err(
            0,
            format!("declared {declared} rounds, found {}", stumps.len()),
        ));
    }
    TrainedEnsemble::new(stumps, alphas, rounds)
}

pub fn ensemble_from_str(s: &str) -> Result<TrainedEnsemble> {
    read_ensemble(s.as_bytes(), "<string>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64], ys: &[i32]) -> Dataset {
        Dataset::new(
            xs.iter().map(|&x| vec![x]).collect(),
            ys.iter().map(|&y| Sign::from_i32(y).unwrap()).collect(),
        )
        .unwrap()
    }

    fn stump(j: usize, th: f64, pol: i32) -> DecisionStump {
        DecisionStump {
            feature_index: j,
            threshold: th,
            polarity: Sign::from_i32(pol).unwrap(),
        }
    }

    // enumerate every candidate stump and return the minimal weighted error
    fn brute_force_min_error(ds: &Dataset, w: &[f64]) -> f64 {
        let total: f64 = w.iter().sum();
        let mut best = f64::INFINITY;
        for j in 0..ds.n_features() {
            let mut vals: Vec<f64> = ds.rows().map(|r| r[j]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let mut ths = vec![f64::NEG_INFINITY, f64::INFINITY];
            ths.extend(vals.windows(2).map(|p| 0.5 * (p[0] + p[1])));
            for th in ths {
                for pol in [-1, 1] {
                    let s = stump(j, th, pol);
                    let err: f64 = (0..ds.n_samples())
                        .filter(|&i| s.predict(ds.row(i)) != ds.label(i))
                        .map(|i| w[i])
                        .sum();
                    best = best.min(err / total);
                }
            }
        }
        best
    }

    #[test]
    fn separable_stump() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0], &[1, 1, -1, -1]);
        let (s, err) = train_stump(&ds, &[0.25; 4]).unwrap();
        assert_eq!(s, stump(0, 2.5, 1));
        assert_eq!(err, 0.0);
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0], &[1, 1, -1, -1]);
        let (s, err) = train_stump(&ds, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(err, 0.0);
        assert_eq!(s.predict(&[3.0]), Sign::Neg);
        assert_eq!(s.predict(&[4.0]), Sign::Neg);
    }

    #[test]
    fn alternating_labels_quarter_error() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0], &[1, -1, 1, -1]);
        let w = [0.25; 4];
        let oracle = brute_force_min_error(&ds, &w);
        assert_eq!(oracle, 0.25);
        let (_, err) = train_stump(&ds, &w).unwrap();
        assert_eq!(err, oracle);
    }

    #[test]
    fn stump_rejects_bad_weights() {
        let ds = line(&[1.0, 2.0], &[1, -1]);
        assert!(train_stump(&ds, &[0.0, 0.0]).is_err());
        assert!(train_stump(&ds, &[-1.0, 2.0]).is_err());
        assert!(train_stump(&ds, &[1.0]).is_err());
    }

    #[test]
    fn separable_data_gives_single_unit_coefficient() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0], &[1, 1, -1, -1]);
        let ens = train_adaboost(&ds, 1).unwrap();
        assert_eq!(ens.alphas(), &[1.0]);
        let ens = train_adaboost(&ds, 5).unwrap();
        assert_eq!(ens.len(), 1);
        assert!(train_adaboost(&ds, 0).is_err());
    }

    #[test]
    fn rounds_record_positive_raw_alphas() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1, -1, 1, -1, -1, 1]);
        let ens = train_adaboost(&ds, 6).unwrap();
        assert!(!ens.rounds().is_empty());
        for r in ens.rounds() {
            assert!(r.weighted_error > 0.0 && r.weighted_error < 0.5);
            assert!(r.raw_alpha > 0.0);
            assert!(r.data_weights_checksum.unwrap() > 0.0);
        }
        let sum: f64 = ens.alphas().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let ens = TrainedEnsemble::new(vec![stump(0, 0.0, 1)], vec![1.0], vec![]).unwrap();
        assert_eq!(ens.predict(&[-1.0]).unwrap(), Sign::Pos);
        assert_eq!(ens.predict(&[1.0]).unwrap(), Sign::Neg);
        assert!(ens.predict(&[]).is_err());

        // outputs (+1, -1): tie votes +1
        let ens = TrainedEnsemble::new(vec![stump(0, 0.0, 1), stump(0, 0.0, -1)], vec![0.5, 0.5], vec![]).unwrap();
        assert_eq!(ens.predict(&[-1.0]).unwrap(), Sign::Pos);

        let a = [0.5, 0.3, 0.2];
        let o = |v: [i32; 3]| v.map(|s| Sign::from_i32(s).unwrap());
        assert_eq!(Sign::of_vote(weighted_vote(&a, &o([-1, 1, 1]))), Sign::Pos);
        assert_eq!(Sign::of_vote(weighted_vote(&a, &o([-1, 1, -1]))), Sign::Neg);
    }

    #[test]
    fn margin_examples() {
        let p = Sign::Pos;
        let n = Sign::Neg;
        let m = MarginVector::from_base_outputs(&[0.5, 0.5], vec![p, p, n, n]).unwrap();
        assert_eq!(m.margins(), &[1.0, 1.0]);
        assert_eq!(m.signs(), &[p, n]);
        let m = MarginVector::from_base_outputs(&[0.7, 0.3], vec![p, n, n, p]).unwrap();
        assert!((m.margins()[0] - 0.4).abs() < 1e-15);
        assert_eq!(m.signs(), &[p, n]);
        assert_eq!(m.outputs(1), &[n, p]);
        assert!(MarginVector::from_base_outputs(&[0.5, 0.5], vec![p, p, p]).is_err());
    }

    #[test]
    fn ensemble_validation() {
        let s = stump(0, 0.0, 1);
        assert!(TrainedEnsemble::new(vec![], vec![], vec![]).is_err());
        assert!(TrainedEnsemble::new(vec![s, s], vec![0.5, 0.6], vec![]).is_err());
        assert!(TrainedEnsemble::new(vec![s, s], vec![1.0, 0.0], vec![]).is_err());
        let e = TrainedEnsemble::from_raw_coefficients(vec![s, s], &[3.0, 1.0]).unwrap();
        assert_eq!(e.alphas(), &[0.75, 0.25]);
        assert_eq!(e.with_uniform_coefficients().alphas(), &[0.5, 0.5]);
    }

    #[test]
    fn text_format_round_trip_and_errors() {
        let ds = line(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1, -1, 1, -1, -1, 1]);
        let ens = train_adaboost(&ds, 4).unwrap();
        let text = ensemble_to_string(&ens);
        let back = ensemble_from_str(&text).unwrap();
        assert_eq!(back.stumps(), ens.stumps());
        assert_eq!(back.alphas(), ens.alphas());
        for (a, b) in back.rounds().iter().zip(ens.rounds()) {
            assert_eq!(a.raw_alpha, b.raw_alpha);
            assert_eq!(a.weighted_error, b.weighted_error);
        }
        assert!(ensemble_from_str("").is_err());
        assert!(ensemble_from_str("2\n0 1 1 1 1 0.1\n").is_err());
        assert!(ensemble_from_str("1\n0 1 2 1 1 0.1\n").is_err());
        assert!(ensemble_from_str("1\n0 1 1 0.5 1 0.1\n").is_err());
        let inf = ensemble_from_str("1\n0 inf -1 1 inf 0\n").unwrap();
        assert_eq!(inf.stumps()[0].threshold, f64::INFINITY);
    }

    fn random_dataset(seed: u64, n: usize, d: usize) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        loop {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| (rng.gen_range(0..8) as f64) * 0.5).collect())
                .collect();
            let labels: Vec<Sign> = rows
                .iter()
                .map(|r| {
                    let noisy = rng.gen_bool(0.2);
                    let s = Sign::of(r[0] - 1.5 + if d > 1 { r[1] - 1.5 } else { 0.0 });
                    if noisy {
                        s.flip()
                    } else {
                        s
                    }
                })
                .collect();
            if let Ok(ds) = Dataset::new(rows, labels) {
                return ds;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn stump_search_matches_brute_force(seed in 0u64..10_000, n in 4usize..30, d in 1usize..4) {
            use rand::{Rng, SeedableRng};
            let ds = random_dataset(seed, n, d);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (s, err) = train_stump(&ds, &w).unwrap();
            let oracle = brute_force_min_error(&ds, &w);
            prop_assert!((err - oracle).abs() < 1e-12);
            let total: f64 = w.iter().sum();
            let direct: f64 = (0..n).filter(|&i| s.predict(ds.row(i)) != ds.label(i)).map(|i| w[i]).sum::<f64>() / total;
            prop_assert!((direct - err).abs() < 1e-12);
        }

        #[test]
        fn training_invariants(seed in 0u64..10_000, rounds in 1usize..12) {
            let ds = random_dataset(seed, 40, 3);
            let ens = train_adaboost(&ds, rounds).unwrap();
            let sum: f64 = ens.alphas().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(ens.alphas().iter().all(|&a| a > 0.0));
            prop_assert!(ens.rounds().iter().all(|r| r.weighted_error < 0.5));
            // normalization leaves decisions unchanged
            let raw: Vec<f64> = ens.rounds().iter().map(|r| r.raw_alpha).collect();
            if raw.iter().all(|a| a.is_finite()) {
                for x in ds.rows() {
                    let outs = ens.base_outputs(x).unwrap();
                    let raw_vote = weighted_vote(&raw, &outs);
                    let norm_vote = weighted_vote(ens.alphas(), &outs);
                    if raw_vote.abs() > 1e-9 {
                        prop_assert_eq!(Sign::of(raw_vote), Sign::of_vote(norm_vote));
                    }
                }
            }
            let m = margins(&ens, &ds).unwrap();
            for (n, x) in ds.rows().enumerate() {
                let g: f64 = ens.alphas().iter().zip(ens.base_outputs(x).unwrap()).map(|(a, o)| a * o.value()).sum();
                prop_assert!((m.margins()[n] - g.abs()).abs() < 1e-12);
                prop_assert!(m.margins()[n] <= 1.0 + 1e-12);
            }
            prop_assert_eq!(train_adaboost(&ds, rounds).unwrap(), ens);
        }
    }
}
