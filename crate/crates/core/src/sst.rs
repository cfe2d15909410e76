//! Bigram baseline segmenter: pointwise mutual information between the two
//! characters at a gap, plus the difference in t-score of the two trigrams
//! straddling it.
//!
//! A gap becomes a boundary when its mutual information is below `theta`
//! and its t-score difference is a sufficiently pronounced local extremum.
//! A gap between loosely bound characters has a low `p(W|D)` and therefore a
//! strongly negative t-score difference, so by default boundaries are sought
//! at local minima ([`DtsExtremum::Minima`]); [`DtsExtremum::Maxima`] applies
//! the same thresholds to local maxima instead. The test lives behind
//! [`ExtremumRule`] so other readings of the extremum thresholds can be
//! swapped in.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::ngram::Corpus;
use crate::sequence::{FlatSegmentation, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    /// Relative frequency.
    Mle,
    /// Add-one-half smoothing.
    Ele,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Mle => "mle",
            Estimator::Ele => "ele",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mle" => Ok(Estimator::Mle),
            "ele" => Ok(Estimator::Ele),
            other => Err(Error::param(format!(
                "unknown estimator {other:?} (mle or ele)"
            ))),
        }
    }
}

/// How raw counts are read back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CountPolicy {
    /// Counts as observed; unseen characters make MLE statistics undefined.
    Exact,
    /// The n-gram table convention: singletons pruned and anything absent
    /// read as one, i.e. every count is at least one.
    #[default]
    FloorAtOne,
}

/// Character unigram and bigram counts from an unsegmented corpus.
#[derive(Debug, Clone)]
pub struct BigramStats {
    unigrams: HashMap<char, u64>,
    bigrams: HashMap<(char, char), u64>,
    total_chars: u64,
    total_bigrams: u64,
    policy: CountPolicy,
}

impl BigramStats {
    pub fn from_sequences(sequences: &[Sequence], policy: CountPolicy) -> Self {
        let mut unigrams = HashMap::new();
        let mut bigrams = HashMap::new();
        let mut total_chars = 0;
        let mut total_bigrams = 0;
        for seq in sequences {
            for &c in seq.iter() {
                *unigrams.entry(c).or_insert(0) += 1;
            }
            for pair in seq.windows(2) {
                *bigrams.entry((pair[0], pair[1])).or_insert(0) += 1;
            }
            total_chars += seq.len() as u64;
            total_bigrams += seq.len().saturating_sub(1) as u64;
        }
        BigramStats {
            unigrams,
            bigrams,
            total_chars,
            total_bigrams,
            policy,
        }
    }

    pub fn from_corpus(corpus: &Corpus, policy: CountPolicy) -> Self {
        Self::from_sequences(&corpus.sequences, policy)
    }

    pub fn policy(&self) -> CountPolicy {
        self.policy
    }

    pub fn total_chars(&self) -> u64 {
        self.total_chars
    }

    pub fn total_bigrams(&self) -> u64 {
        self.total_bigrams
    }

    /// Distinct characters observed.
    pub fn alphabet_size(&self) -> usize {
        self.unigrams.len()
    }

    /// Distinct bigrams observed.
    pub fn bigram_types(&self) -> usize {
        self.bigrams.len()
    }

    pub fn unigram_count(&self, c: char) -> u64 {
        let raw = self.unigrams.get(&c).copied().unwrap_or(0);
        match self.policy {
            CountPolicy::Exact => raw,
            CountPolicy::FloorAtOne => raw.max(1),
        }
    }

    pub fn bigram_count(&self, a: char, b: char) -> u64 {
        let raw = self.bigrams.get(&(a, b)).copied().unwrap_or(0);
        match self.policy {
            CountPolicy::Exact => raw,
            CountPolicy::FloorAtOne => raw.max(1),
        }
    }

    /// Probability view under an estimator.
    pub fn under(&self, estimator: Estimator) -> Probabilities<'_> {
        Probabilities {
            stats: self,
            estimator,
        }
    }
}

/// A conditional probability together with its binomial variance estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conditional {
    pub p: f64,
    pub var: f64,
}

/// Difference in t-score at one gap. `degenerate` is set when a term was
/// replaced by 0 because of a zero variance or missing context character.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dts {
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Probabilities<'a> {
    stats: &'a BigramStats,
    estimator: Estimator,
}

impl Probabilities<'_> {
    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    fn defined_unigram(&self, c: char) -> Result<u64> {
        let n = self.stats.unigram_count(c);
        if n == 0 && self.estimator == Estimator::Mle {
            return Err(Error::UndefinedStatistic(c));
        }
        Ok(n)
    }

    pub fn unigram(&self, c: char) -> Result<f64> {
        let n = self.defined_unigram(c)? as f64;
        let total = self.stats.total_chars as f64;
        Ok(match self.estimator {
            Estimator::Mle => n / total,
            Estimator::Ele => (n + 0.5) / (total + 0.5 * self.stats.alphabet_size() as f64),
        })
    }

    pub fn joint(&self, a: char, b: char) -> Result<f64> {
        let n = self.stats.bigram_count(a, b) as f64;
        let total = self.stats.total_bigrams as f64;
        match self.estimator {
            Estimator::Mle if self.stats.total_bigrams == 0 => {
                Err(Error::param("the corpus contains no character bigrams"))
            }
            Estimator::Mle => Ok(n / total),
            Estimator::Ele => Ok((n + 0.5) / (total + 0.5 * self.stats.bigram_types() as f64)),
        }
    }

    /// `p(next | prev)` and its variance `p (1 - p) / n`, where `n` is the
    /// conditioning denominator.
    pub fn conditional(&self, prev: char, next: char) -> Result<Conditional> {
        let n_prev = self.defined_unigram(prev)? as f64;
        let n_pair = self.stats.bigram_count(prev, next) as f64;
        let (num, den) = match self.estimator {
            Estimator::Mle => (n_pair, n_prev),
            Estimator::Ele => (
                n_pair + 0.5,
                n_prev + 0.5 * self.stats.alphabet_size() as f64,
            ),
        };
        let p = num / den;
        Ok(Conditional {
            p,
            var: p * (1.0 - p) / den,
        })
    }

    /// Base-2 pointwise mutual information; `-inf` when the pair never occurs under MLE.
    pub fn mutual_information(&self, d: char, w: char) -> Result<f64> {
        let pd = self.unigram(d)?;
        let pw = self.unigram(w)?;
        let joint = self.joint(d, w)?;
        if joint == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok((joint / (pd * pw)).log2())
    }

    /// t-score difference for the trigrams `C D W` and `D W X` around the gap between D and W.
    pub fn dts(&self, c: char, d: char, w: char, x: char) -> Result<Dts> {
        self.dts_with_context(Some(c), d, w, Some(x))
    }

    /// As [`Probabilities::dts`]; a missing outer character zeroes its term.
    pub fn dts_with_context(
        &self,
        c: Option<char>,
        d: char,
        w: char,
        x: Option<char>,
    ) -> Result<Dts> {
        let across = self.conditional(d, w)?;
        let left = c.map(|c| self.conditional(c, d)).transpose()?;
        let right = x.map(|x| self.conditional(w, x)).transpose()?;
        let (first, first_ok) = match left {
            Some(left) => t_difference(across, left),
            None => (0.0, false),
        };
        let (second, second_ok) = match right {
            Some(right) => t_difference(right, across),
            None => (0.0, false),
        };
        Ok(Dts {
            value: first - second,
            degenerate: !(first_ok && second_ok),
        })
    }
}

/// `(a - b) / sqrt(var a + var b)`, or `(0, false)` when the denominator is zero.
pub fn t_difference(a: Conditional, b: Conditional) -> (f64, bool) {
    let den = (a.var + b.var).sqrt();
    if den > 0.0 && den.is_finite() {
        ((a.p - b.p) / den, true)
    } else {
        (0.0, false)
    }
}

/// Mutual information threshold, six extremum thresholds, and estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SstParams {
    theta: f64,
    extremum: ExtremumThresholds,
    estimator: Estimator,
    rule: DtsExtremum,
}

/// `[e1, e2, e3]` gate primary extrema (height, left rise, right fall);
/// `[e4, e5, e6]` do the same for secondary extrema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremumThresholds(pub [f64; 6]);

impl SstParams {
    /// Uses the default [`DtsExtremum::Minima`] rule.
    pub fn new(theta: f64, extremum: [f64; 6], estimator: Estimator) -> Result<Self> {
        if theta.is_nan() || theta < 0.0 {
            return Err(Error::param(format!("theta {theta} must be non-negative")));
        }
        if let Some(e) = extremum.iter().find(|e| e.is_nan() || **e < 0.0) {
            return Err(Error::param(format!(
                "extremum threshold {e} must be non-negative"
            )));
        }
        Ok(SstParams {
            theta,
            extremum: ExtremumThresholds(extremum),
            estimator,
            rule: DtsExtremum::default(),
        })
    }

    pub fn with_rule(mut self, rule: DtsExtremum) -> Self {
        self.rule = rule;
        self
    }

    pub fn rule(&self) -> DtsExtremum {
        self.rule
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn extremum(&self) -> &ExtremumThresholds {
        &self.extremum
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    /// `(theta, e1, ..., e6)`, the tie-break order.
    pub fn vector(&self) -> [f64; 7] {
        let e = self.extremum.0;
        [self.theta, e[0], e[1], e[2], e[3], e[4], e[5]]
    }

    pub fn to_key_values(&self) -> String {
        let mut out = format!("theta={}\n", self.theta);
        for (i, e) in self.extremum.0.iter().enumerate() {
            out.push_str(&format!("e{}={}\n", i + 1, e));
        }
        out.push_str(&format!("estimator={}\n", self.estimator));
        out.push_str(&format!("rule={}\n", self.rule));
        out
    }
}

impl fmt::Display for SstParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = self.extremum.0;
        write!(
            f,
            "theta={} e=({},{},{},{},{},{}) {} {}",
            self.theta, e[0], e[1], e[2], e[3], e[4], e[5], self.estimator, self.rule
        )
    }
}

impl FromStr for SstParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kv = KeyValues::parse(s)?;
        let theta = kv.parse_required::<f64>("theta")?;
        let mut extremum = [0.0; 6];
        for (i, e) in extremum.iter_mut().enumerate() {
            *e = kv.parse_required(&format!("e{}", i + 1))?;
        }
        let estimator = kv.parse_or("estimator", Estimator::Mle)?;
        let rule = kv.parse_or("rule", DtsExtremum::default())?;
        kv.reject_unknown(&[
            "theta",
            "e1",
            "e2",
            "e3",
            "e4",
            "e5",
            "e6",
            "estimator",
            "rule",
        ])?;
        Ok(SstParams::new(theta, extremum, estimator)?.with_rule(rule))
    }
}

/// Peak test over a t-score difference profile.
pub trait ExtremumRule {
    /// Per-location summary that [`ExtremumRule::accepts`] thresholds.
    type Feature: Copy + Send + Sync;

    fn features(&self, dts: &[f64]) -> Vec<Self::Feature>;

    fn accepts(&self, feature: &Self::Feature, thresholds: &ExtremumThresholds) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakKind {
    /// Strictly above every existing neighbor.
    Primary,
    /// At least as high as every existing neighbor, level with one (plateau).
    Secondary,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub kind: PeakKind,
    /// Peak value clipped at zero.
    pub height: f64,
    /// Drop to the nearest local minimum (or sequence start) on the left.
    pub rise: f64,
    /// Drop to the nearest local minimum (or sequence end) on the right.
    pub fall: f64,
}

/// Primary maxima are gated by `(e1, e2, e3)`, secondary by `(e4, e5, e6)`,
/// each as (height, left rise, right fall) lower bounds.
#[derive(Debug, Clone, Copy, Default)]
pub struct PeakRule;

impl ExtremumRule for PeakRule {
    type Feature = Peak;

    fn features(&self, dts: &[f64]) -> Vec<Peak> {
        let len = dts.len();
        (0..len)
            .map(|i| {
                let v = dts[i];
                let left = i.checked_sub(1).map(|j| dts[j]);
                let right = dts.get(i + 1).copied();
                let kind = if left.is_none() && right.is_none() {
                    PeakKind::None
                } else if left.is_none_or(|l| v > l) && right.is_none_or(|r| v > r) {
                    PeakKind::Primary
                } else if left.is_none_or(|l| v >= l) && right.is_none_or(|r| v >= r) {
                    PeakKind::Secondary
                } else {
                    PeakKind::None
                };
                let mut lo = i;
                while lo > 0 && dts[lo - 1] <= dts[lo] {
                    lo -= 1;
                }
                let mut hi = i;
                while hi + 1 < len && dts[hi + 1] <= dts[hi] {
                    hi += 1;
                }
                Peak {
                    kind,
                    height: v.max(0.0),
                    rise: v - dts[lo],
                    fall: v - dts[hi],
                }
            })
            .collect()
    }

    fn accepts(&self, peak: &Peak, thresholds: &ExtremumThresholds) -> bool {
        let e = &thresholds.0;
        match peak.kind {
            PeakKind::Primary => peak.height >= e[0] && peak.rise >= e[1] && peak.fall >= e[2],
            PeakKind::Secondary => peak.height >= e[3] && peak.rise >= e[4] && peak.fall >= e[5],
            PeakKind::None => false,
        }
    }
}

/// Which extrema of the t-score difference mark boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DtsExtremum {
    /// Local minima; heights, rises and falls are measured on the negated profile.
    #[default]
    Minima,
    /// Local maxima, measured on the profile as is.
    Maxima,
}

impl fmt::Display for DtsExtremum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DtsExtremum::Minima => "minima",
            DtsExtremum::Maxima => "maxima",
        })
    }
}

impl FromStr for DtsExtremum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minima" | "min" => Ok(DtsExtremum::Minima),
            "maxima" | "max" => Ok(DtsExtremum::Maxima),
            other => Err(Error::param(format!(
                "unknown extremum rule {other:?} (minima or maxima)"
            ))),
        }
    }
}

impl ExtremumRule for DtsExtremum {
    type Feature = Peak;

    fn features(&self, dts: &[f64]) -> Vec<Peak> {
        match self {
            DtsExtremum::Maxima => PeakRule.features(dts),
            DtsExtremum::Minima => {
                let negated: Vec<f64> = dts.iter().map(|v| -v).collect();
                PeakRule.features(&negated)
            }
        }
    }

    fn accepts(&self, peak: &Peak, thresholds: &ExtremumThresholds) -> bool {
        PeakRule.accepts(peak, thresholds)
    }
}

/// Mutual information and t-score difference at every gap of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SstProfile {
    pub mi: Vec<f64>,
    pub dts: Vec<Dts>,
}

impl SstProfile {
    pub fn compute(seq: &[char], probs: &Probabilities<'_>) -> Result<Self> {
        let len = seq.len();
        let mut mi = Vec::with_capacity(len.saturating_sub(1));
        let mut dts = Vec::with_capacity(len.saturating_sub(1));
        for k in 1..len {
            let (d, w) = (seq[k - 1], seq[k]);
            let c = k.checked_sub(2).map(|i| seq[i]);
            let x = seq.get(k + 1).copied();
            mi.push(probs.mutual_information(d, w)?);
            dts.push(probs.dts_with_context(c, d, w, x)?);
        }
        Ok(SstProfile { mi, dts })
    }

    pub fn dts_values(&self) -> Vec<f64> {
        self.dts.iter().map(|d| d.value).collect()
    }
}

/// Boundary mask from a profile's mutual information and peak features.
pub fn decide<R: ExtremumRule>(
    rule: &R,
    mi: &[f64],
    features: &[R::Feature],
    params: &SstParams,
) -> Vec<bool> {
    mi.iter()
        .zip(features)
        .map(|(&mi, feature)| mi < params.theta && rule.accepts(feature, &params.extremum))
        .collect()
}

pub fn sst_segment_with<R: ExtremumRule>(
    rule: &R,
    seq: &Sequence,
    params: &SstParams,
    stats: &BigramStats,
) -> Result<FlatSegmentation> {
    if seq.len() < 2 {
        return FlatSegmentation::unsegmented(seq.clone());
    }
    let profile = SstProfile::compute(seq, &stats.under(params.estimator))?;
    let features = rule.features(&profile.dts_values());
    let mask = decide(rule, &profile.mi, &features, params);
    FlatSegmentation::from_mask(seq.clone(), &mask)
}

/// Segments with the extremum rule named in `params`.
pub fn sst_segment(
    seq: &Sequence,
    params: &SstParams,
    stats: &BigramStats,
) -> Result<FlatSegmentation> {
    sst_segment_with(&params.rule, seq, params, stats)
}
