//! Exhaustive grid search for segmenter parameters on a small annotated set.
//!
//! Scores are micro-averaged over the training set. Ties are broken
//! deterministically, so the result does not depend on evaluation order.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::hash::Hash;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::annotation::TwoLevelAnnotation;
use crate::error::{Error, Result};
use crate::metrics::{level_counts, Level, PrfCounts};
use crate::ngram::NGramTable;
use crate::sequence::{brackets_from_cuts, Bracket};
use crate::sst::{
    decide, BigramStats, DtsExtremum, Estimator, ExtremumRule, Peak, SstParams, SstProfile,
};
use crate::tango::{boundary_mask, OrderVotes, TangoParams};

/// Training objective. Compatible-brackets rates are deliberately absent:
/// bracketing every sequence whole maximizes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    WordPrecision,
    WordRecall,
    WordF,
    MorphemePrecision,
    MorphemeRecall,
    MorphemeF,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::WordPrecision,
        Criterion::WordRecall,
        Criterion::WordF,
        Criterion::MorphemePrecision,
        Criterion::MorphemeRecall,
        Criterion::MorphemeF,
    ];

    pub fn level(self) -> Level {
        match self {
            Criterion::WordPrecision | Criterion::WordRecall | Criterion::WordF => Level::Word,
            _ => Level::Morpheme,
        }
    }

    pub fn score(self, counts: &PrfCounts) -> f64 {
        let s = counts.scores();
        match self {
            Criterion::WordPrecision | Criterion::MorphemePrecision => s.precision,
            Criterion::WordRecall | Criterion::MorphemeRecall => s.recall,
            Criterion::WordF | Criterion::MorphemeF => s.f,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::WordPrecision => "word-precision",
            Criterion::WordRecall => "word-recall",
            Criterion::WordF => "word-f",
            Criterion::MorphemePrecision => "morpheme-precision",
            Criterion::MorphemeRecall => "morpheme-recall",
            Criterion::MorphemeF => "morpheme-f",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        if norm.contains("compatible") {
            return Err(Error::InadmissibleCriterion(s.to_string()));
        }
        let found = match norm.as_str() {
            "word-p" => Some(Criterion::WordPrecision),
            "word-r" => Some(Criterion::WordRecall),
            "morpheme-p" => Some(Criterion::MorphemePrecision),
            "morpheme-r" => Some(Criterion::MorphemeRecall),
            _ => Criterion::ALL.into_iter().find(|c| c.name() == norm),
        };
        found.ok_or_else(|| {
            Error::param(format!(
                "unknown criterion {s:?}; expected one of {}",
                Criterion::ALL.map(Criterion::name).join(", ")
            ))
        })
    }
}

/// Best parameters plus the score of every grid point, in enumeration order.
#[derive(Debug, Clone)]
pub struct TrainResult<P> {
    pub best: P,
    pub best_score: f64,
    pub grid: Vec<(P, f64)>,
}

fn brackets_from_mask(len: usize, mask: &[bool]) -> Vec<Bracket> {
    let cuts: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i + 1)
        .collect();
    brackets_from_cuts(len, &cuts)
}

fn check_train_set(train_set: &[TwoLevelAnnotation]) -> Result<()> {
    if train_set.is_empty() {
        return Err(Error::param("the training set is empty"));
    }
    Ok(())
}

/// Pooled criterion score of boundary masks against their gold annotations.
fn pooled_score<'a>(
    golds: &[TwoLevelAnnotation],
    masks: impl Iterator<Item = Vec<bool>> + 'a,
    criterion: Criterion,
) -> f64 {
    let mut counts = PrfCounts::default();
    for (gold, mask) in golds.iter().zip(masks) {
        let proposed = brackets_from_mask(gold.sequence().len(), &mask);
        counts.add(&level_counts(&proposed, gold, criterion.level()));
    }
    criterion.score(&counts)
}

/// Parameter space for [`train_tango_with`].
#[derive(Debug, Clone)]
pub struct TangoGrid {
    /// Every non-empty subset of these orders is tried.
    pub orders: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub use_local_max: bool,
    pub use_threshold: bool,
}

impl Default for TangoGrid {
    /// Orders 2..=6 and thresholds 0.05, 0.10, ..., 1.00 with both conditions.
    fn default() -> Self {
        TangoGrid {
            orders: (2..=6).collect(),
            thresholds: (1..=20).map(|i| i as f64 / 20.0).collect(),
            use_local_max: true,
            use_threshold: true,
        }
    }
}

impl TangoGrid {
    pub fn with_conditions(use_local_max: bool, use_threshold: bool) -> Self {
        TangoGrid {
            use_local_max,
            use_threshold,
            ..TangoGrid::default()
        }
    }

    /// Non-empty subsets of the orders, each ascending.
    pub fn order_sets(&self) -> Vec<Vec<usize>> {
        let mut base = self.orders.clone();
        base.sort_unstable();
        base.dedup();
        (1u32..(1 << base.len()))
            .map(|mask| {
                base.iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &n)| n)
                    .collect()
            })
            .collect()
    }

    pub fn params(&self) -> Result<Vec<TangoParams>> {
        let mut out = Vec::new();
        for orders in self.order_sets() {
            for &t in &self.thresholds {
                out.push(TangoParams::with_conditions(
                    &orders,
                    t,
                    self.use_local_max,
                    self.use_threshold,
                )?);
            }
        }
        Ok(out)
    }
}

/// Tie-break preference: fewer orders, then lexicographically smaller
/// ascending order lists, then larger thresholds. `Less` means preferred.
pub fn tango_preference(a: &TangoParams, b: &TangoParams) -> Ordering {
    a.orders()
        .len()
        .cmp(&b.orders().len())
        .then_with(|| a.orders().cmp(b.orders()))
        .then_with(|| b.threshold().total_cmp(&a.threshold()))
}

/// Grid search over the default grid with both placement conditions.
pub fn train_tango(
    train_set: &[TwoLevelAnnotation],
    table: &NGramTable,
    criterion: Criterion,
) -> Result<TrainResult<TangoParams>> {
    train_tango_with(train_set, table, criterion, &TangoGrid::default())
}

pub fn train_tango_with(
    train_set: &[TwoLevelAnnotation],
    table: &NGramTable,
    criterion: Criterion,
    grid: &TangoGrid,
) -> Result<TrainResult<TangoParams>> {
    check_train_set(train_set)?;
    if let Some(&n) = grid.orders.iter().find(|&&n| !table.supports(n)) {
        return Err(Error::UnsupportedOrder(n));
    }
    let candidates = grid.params()?;
    if candidates.is_empty() {
        return Err(Error::param("the parameter grid is empty"));
    }
    let caches = train_set
        .iter()
        .map(|gold| OrderVotes::compute(gold.sequence(), &grid.orders, table))
        .collect::<Result<Vec<_>>>()?;

    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|params| {
            let masks = caches
                .iter()
                .map(|cache| boundary_mask(&cache.total_votes(params.orders()), params));
            pooled_score(train_set, masks, criterion)
        })
        .collect();

    let mut best = 0;
    for i in 1..candidates.len() {
        let better = match scores[i].total_cmp(&scores[best]) {
            Ordering::Greater => true,
            Ordering::Equal => tango_preference(&candidates[i], &candidates[best]).is_lt(),
            Ordering::Less => false,
        };
        if better {
            best = i;
        }
    }
    Ok(TrainResult {
        best: candidates[best].clone(),
        best_score: scores[best],
        grid: candidates.into_iter().zip(scores).collect(),
    })
}

impl TrainResult<TangoParams> {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("N\tt\tscore\n");
        for (p, score) in &self.grid {
            let orders: Vec<String> = p.orders().iter().map(|n| n.to_string()).collect();
            let _ = writeln!(out, "{}\t{}\t{score}", orders.join(","), p.threshold());
        }
        out
    }
}

/// Parameter space for [`train_sst_with`].
#[derive(Debug, Clone)]
pub struct SstGrid {
    pub thetas: Vec<f64>,
    pub extremum_values: Vec<f64>,
    pub estimator: Estimator,
    pub rule: DtsExtremum,
}

impl Default for SstGrid {
    /// theta in {0, 1.25, 2.5, 3.75, 5}; each extremum threshold in {0, 50, ..., 200}; MLE.
    fn default() -> Self {
        SstGrid {
            thetas: vec![0.0, 1.25, 2.5, 3.75, 5.0],
            extremum_values: vec![0.0, 50.0, 100.0, 150.0, 200.0],
            estimator: Estimator::Mle,
            rule: DtsExtremum::default(),
        }
    }
}

impl SstGrid {
    pub fn with_estimator(estimator: Estimator) -> Self {
        SstGrid {
            estimator,
            ..SstGrid::default()
        }
    }

    pub fn len(&self) -> usize {
        self.thetas.len() * self.extremum_values.len().pow(6)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point `index` in lexicographic order of `(theta, e1, ..., e6)`,
    /// each axis ascending.
    pub fn params_at(&self, index: usize) -> Result<SstParams> {
        let mut thetas = self.thetas.clone();
        thetas.sort_by(f64::total_cmp);
        let mut values = self.extremum_values.clone();
        values.sort_by(f64::total_cmp);
        let base = values.len();
        let mut rest = index;
        let mut extremum = [0.0; 6];
        for slot in extremum.iter_mut().rev() {
            *slot = values[rest % base];
            rest /= base;
        }
        Ok(SstParams::new(thetas[rest], extremum, self.estimator)?.with_rule(self.rule))
    }
}

/// Per-sequence mutual information and peak features, so every grid point
/// is a re-thresholding rather than a recomputation.
#[derive(Debug, Clone)]
pub struct SstCache {
    rule: DtsExtremum,
    entries: Vec<(Vec<f64>, Vec<Peak>)>,
}

impl SstCache {
    pub fn build(
        train_set: &[TwoLevelAnnotation],
        stats: &BigramStats,
        estimator: Estimator,
        rule: DtsExtremum,
    ) -> Result<Self> {
        let probs = stats.under(estimator);
        let entries = train_set
            .iter()
            .map(|gold| {
                let profile = SstProfile::compute(gold.sequence(), &probs)?;
                let features = rule.features(&profile.dts_values());
                Ok((profile.mi, features))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SstCache { rule, entries })
    }

    /// Boundary mask of cached sequence `index` under `params`. The rule
    /// named in `params` is ignored in favor of the one the cache was built with.
    pub fn mask(&self, index: usize, params: &SstParams) -> Vec<bool> {
        let (mi, features) = &self.entries[index];
        decide(&self.rule, mi, features, params)
    }
}

pub fn train_sst(
    train_set: &[TwoLevelAnnotation],
    stats: &BigramStats,
    criterion: Criterion,
) -> Result<TrainResult<SstParams>> {
    train_sst_with(train_set, stats, criterion, &SstGrid::default())
}

/// Ties go to the lexicographically smallest `(theta, e1, ..., e6)`.
pub fn train_sst_with(
    train_set: &[TwoLevelAnnotation],
    stats: &BigramStats,
    criterion: Criterion,
    grid: &SstGrid,
) -> Result<TrainResult<SstParams>> {
    check_train_set(train_set)?;
    if grid.is_empty() {
        return Err(Error::param("the parameter grid is empty"));
    }
    let cache = SstCache::build(train_set, stats, grid.estimator, grid.rule)?;
    let candidates = (0..grid.len())
        .map(|i| grid.params_at(i))
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|params| {
            let masks = (0..train_set.len()).map(|i| cache.mask(i, params));
            pooled_score(train_set, masks, criterion)
        })
        .collect();

    // Enumeration is already in tie-break order: the first maximum wins.
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Ok(TrainResult {
        best: candidates[best],
        best_score: scores[best],
        grid: candidates.into_iter().zip(scores).collect(),
    })
}

impl TrainResult<SstParams> {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("theta\te1\te2\te3\te4\te5\te6\tscore\n");
        for (p, score) in &self.grid {
            for v in p.vector() {
                let _ = write!(out, "{v}\t");
            }
            let _ = writeln!(out, "{score}");
        }
        out
    }
}

/// Seeded shuffle into a training prefix of `train_n` items and a test
/// remainder. Training items whose key also occurs in the test part are
/// dropped, so the two sides are disjoint.
pub fn split_heldout<T, K, F>(
    items: &[T],
    train_n: usize,
    seed: u64,
    key: F,
) -> Result<(Vec<T>, Vec<T>)>
where
    T: Clone,
    K: Eq + Hash,
    F: Fn(&T) -> K,
{
    if train_n >= items.len() {
        return Err(Error::param(format!(
            "training size {train_n} must be smaller than the {} available items",
            items.len()
        )));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_idx, test_idx) = order.split_at(train_n);
    let test: Vec<T> = test_idx.iter().map(|&i| items[i].clone()).collect();
    let test_keys: HashSet<K> = test.iter().map(&key).collect();
    let train = train_idx
        .iter()
        .map(|&i| &items[i])
        .filter(|item| !test_keys.contains(&key(item)))
        .cloned()
        .collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::parse_annotation;
    use crate::metrics::{score_sequence, Tally};
    use crate::ngram::{build_table, Corpus};
    use crate::sequence::Sequence;
    use crate::sst::{sst_segment, CountPolicy};
    use crate::tango::segment;

    #[test]
    fn criterion_parsing() {
        assert_eq!("word-f".parse::<Criterion>().unwrap(), Criterion::WordF);
        assert_eq!(
            "morpheme_recall".parse::<Criterion>().unwrap(),
            Criterion::MorphemeRecall
        );
        assert_eq!(
            "word-p".parse::<Criterion>().unwrap(),
            Criterion::WordPrecision
        );
        for bad in ["compatible", "compatible-rate", "all-compatible"] {
            assert!(matches!(
                bad.parse::<Criterion>(),
                Err(Error::InadmissibleCriterion(_))
            ));
        }
        assert!(matches!(
            "accuracy".parse::<Criterion>(),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn default_grids_have_expected_sizes() {
        let tango = TangoGrid::default();
        assert_eq!(tango.order_sets().len(), 31);
        assert_eq!(tango.params().unwrap().len(), 620);
        assert_eq!(tango.thresholds.first(), Some(&0.05));
        assert_eq!(tango.thresholds.last(), Some(&1.0));
        let sst = SstGrid::default();
        assert_eq!(sst.len(), 78125);
        assert_eq!(sst.params_at(0).unwrap().vector(), [0.0; 7]);
        assert_eq!(
            sst.params_at(1).unwrap().vector(),
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 50.0]
        );
        assert_eq!(
            sst.params_at(78124).unwrap().vector(),
            [5.0, 200.0, 200.0, 200.0, 200.0, 200.0, 200.0]
        );
        // Enumeration order is the lexicographic tie-break order.
        for i in [0, 1, 4, 5, 624, 15624, 15625, 40000] {
            let a = sst.params_at(i).unwrap().vector();
            let b = sst.params_at(i + 1).unwrap().vector();
            assert!(a.partial_cmp(&b) == Some(Ordering::Less));
        }
    }

    #[test]
    fn preference_order() {
        let p = |orders: &[usize], t| TangoParams::new(orders, t).unwrap();
        assert!(tango_preference(&p(&[2], 1.0), &p(&[2, 3], 1.0)).is_lt());
        assert!(tango_preference(&p(&[2, 5], 0.5), &p(&[3, 4], 0.5)).is_lt());
        assert!(tango_preference(&p(&[2], 0.6), &p(&[2], 0.5)).is_lt());
        assert!(tango_preference(&p(&[6], 0.05), &p(&[2, 3], 1.0)).is_lt());
    }

    fn toy_table() -> NGramTable {
        let lines = ["ABCD", "WXYZ", "ABCDWXYZ", "WXYZABCD"].repeat(5);
        build_table(&Corpus::from_lines(&lines), &[2, 3, 4, 5, 6]).unwrap()
    }

    #[test]
    fn all_tied_tango_grid_prefers_smallest_set_and_largest_threshold() {
        // Single characters have no locations, so every setting scores 100.
        let train = vec![
            parse_annotation("[A]").unwrap(),
            parse_annotation("[W]").unwrap(),
        ];
        let result = train_tango(&train, &toy_table(), Criterion::WordF).unwrap();
        assert_eq!(result.best.orders(), &[2]);
        assert_eq!(result.best.threshold(), 1.0);
        assert_eq!(result.grid.len(), 620);
        assert!(result.grid.iter().all(|(_, s)| *s == 100.0));
    }

    #[test]
    fn tango_result_is_grid_maximum() {
        let table = toy_table();
        let train = vec![
            parse_annotation("[ABCD][WXYZ]").unwrap(),
            parse_annotation("[WXYZ][ABCD]").unwrap(),
            parse_annotation("[[AB][CD]][WX]").unwrap(),
        ];
        let result = train_tango(&train, &table, Criterion::WordF).unwrap();
        for (params, score) in &result.grid {
            // Independent re-scoring through the public segmenter.
            let mut tally = Tally::default();
            for gold in &train {
                let pred = segment(gold.sequence(), params, &table).unwrap();
                tally.add(&score_sequence(&pred, gold).unwrap());
            }
            assert_eq!(tally.summary().word.f, *score, "{params}");
            assert!(*score <= result.best_score);
        }
        assert_eq!(result.best_score, 100.0);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let table = toy_table();
        assert!(train_tango(&[], &table, Criterion::WordF).is_err());
        let stats = BigramStats::from_sequences(&[Sequence::from("AB")], CountPolicy::FloorAtOne);
        assert!(train_sst(&[], &stats, Criterion::WordF).is_err());
    }

    #[test]
    fn tango_requires_table_orders() {
        let table = build_table(&Corpus::from_lines(&["ABAB"]), &[2, 3]).unwrap();
        let train = vec![parse_annotation("[AB][AB]").unwrap()];
        assert!(matches!(
            train_tango(&train, &table, Criterion::WordF),
            Err(Error::UnsupportedOrder(4))
        ));
    }

    #[test]
    fn all_tied_sst_grid_returns_zero_vector() {
        let stats = BigramStats::from_sequences(&[Sequence::from("ABAB")], CountPolicy::FloorAtOne);
        let train = vec![parse_annotation("[A]").unwrap()];
        let result = train_sst(&train, &stats, Criterion::WordF).unwrap();
        assert_eq!(result.best.vector(), [0.0; 7]);
        assert_eq!(result.grid.len(), 78125);
    }

    #[test]
    fn sst_cache_matches_direct_segmentation() {
        let corpus: Vec<Sequence> = ["ABCD", "WXYZ", "ABCDWXYZ", "ZYXW", "DCBA", "ABWX"]
            .repeat(3)
            .iter()
            .map(|s| Sequence::from(*s))
            .collect();
        let stats = BigramStats::from_sequences(&corpus, CountPolicy::FloorAtOne);
        let train = vec![
            parse_annotation("[ABCD][WXYZ]").unwrap(),
            parse_annotation("[ZYXW][DC][BA]").unwrap(),
        ];
        let grid = SstGrid {
            thetas: vec![0.0, 1.0, 2.5, 10.0],
            extremum_values: vec![0.0, 0.5, 1.0, 3.0],
            estimator: Estimator::Mle,
            rule: DtsExtremum::Minima,
        };
        for rule in [DtsExtremum::Minima, DtsExtremum::Maxima] {
            let grid = SstGrid {
                rule,
                ..grid.clone()
            };
            let cache = SstCache::build(&train, &stats, Estimator::Mle, rule).unwrap();
            for i in (0..grid.len()).step_by(37) {
                let params = grid.params_at(i).unwrap();
                for (j, gold) in train.iter().enumerate() {
                    let direct = sst_segment(gold.sequence(), &params, &stats).unwrap();
                    let cached = crate::sequence::FlatSegmentation::from_mask(
                        gold.sequence().clone(),
                        &cache.mask(j, &params),
                    )
                    .unwrap();
                    assert_eq!(direct, cached);
                }
            }
        }
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let items: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let (train, test) = split_heldout(&items, 2, 7, |s| s.clone()).unwrap();
        assert_eq!((train.len(), test.len()), (2, 8));
        assert!(train.iter().all(|t| !test.contains(t)));
        let again = split_heldout(&items, 2, 7, |s| s.clone()).unwrap();
        assert_eq!((train, test), again);
        assert!(split_heldout(&items, 10, 7, |s| s.clone()).is_err());
    }

    #[test]
    fn duplicate_on_both_sides_is_dropped_from_train() {
        let items = vec!["dup", "dup", "a", "b"];
        let mut saw_drop = false;
        for seed in 0..50 {
            let (train, test) = split_heldout(&items, 2, seed, |s| *s).unwrap();
            assert!(train.iter().all(|t| !test.contains(t)));
            if test.contains(&"dup") && train.len() < 2 {
                saw_drop = true;
            }
        }
        assert!(saw_drop);
    }
}
