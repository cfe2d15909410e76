//! Scoring flat segmentations against two-level gold bracketings.
//!
//! Word and morpheme precision/recall/F count exact bracket matches. Each
//! proposed bracket is also classified as crossing (partially overlapping
//! some gold bracket at either level), morpheme-dividing (strictly inside a
//! gold morpheme), or compatible. All rates are percentages.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use crate::annotation::TwoLevelAnnotation;
use crate::error::{Error, Result};
use crate::sequence::{Bracket, FlatSegmentation};

/// Match counts behind precision and recall.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PrfCounts {
    pub matched: u64,
    pub proposed: u64,
    pub gold: u64,
}

impl PrfCounts {
    fn between<'a>(proposed: &[Bracket], gold: impl IntoIterator<Item = &'a Bracket>) -> PrfCounts {
        let gold: HashSet<&Bracket> = gold.into_iter().collect();
        let matched = proposed.iter().filter(|b| gold.contains(b)).count();
        PrfCounts {
            matched: matched as u64,
            proposed: proposed.len() as u64,
            gold: gold.len() as u64,
        }
    }

    pub fn add(&mut self, other: &PrfCounts) {
        self.matched += other.matched;
        self.proposed += other.proposed;
        self.gold += other.gold;
    }

    /// Proposed brackets that miss the gold level.
    pub fn precision_errors(&self) -> u64 {
        self.proposed - self.matched
    }

    /// Gold brackets that were not proposed.
    pub fn recall_errors(&self) -> u64 {
        self.gold - self.matched
    }

    pub fn scores(&self) -> Prf {
        // Nothing proposed is vacuously precise.
        let precision = if self.proposed == 0 {
            100.0
        } else {
            100.0 * self.matched as f64 / self.proposed as f64
        };
        let recall = if self.gold == 0 {
            100.0
        } else {
            100.0 * self.matched as f64 / self.gold as f64
        };
        Prf::new(precision, recall)
    }
}

/// Precision, recall and their harmonic mean, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Prf {
            precision,
            recall,
            f: f_measure(precision, recall),
        }
    }
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn check_alignment(pred: &FlatSegmentation, gold: &TwoLevelAnnotation) -> Result<()> {
    if pred.sequence() != gold.sequence() {
        return Err(Error::Alignment {
            predicted: pred.sequence().to_string(),
            gold: gold.sequence().to_string(),
        });
    }
    Ok(())
}

/// Annotation level a score is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    Word,
    Morpheme,
}

/// Exact-match counts of already computed proposed brackets against one level.
pub fn level_counts(proposed: &[Bracket], gold: &TwoLevelAnnotation, level: Level) -> PrfCounts {
    match level {
        Level::Word => PrfCounts::between(proposed, gold.words()),
        Level::Morpheme => PrfCounts::between(proposed, gold.morpheme_brackets()),
    }
}

pub fn word_counts(pred: &FlatSegmentation, gold: &TwoLevelAnnotation) -> Result<PrfCounts> {
    check_alignment(pred, gold)?;
    Ok(PrfCounts::between(&pred.brackets(), gold.words()))
}

pub fn morpheme_counts(pred: &FlatSegmentation, gold: &TwoLevelAnnotation) -> Result<PrfCounts> {
    check_alignment(pred, gold)?;
    Ok(PrfCounts::between(
        &pred.brackets(),
        gold.morpheme_brackets(),
    ))
}

pub fn word_scores(pred: &FlatSegmentation, gold: &TwoLevelAnnotation) -> Result<Prf> {
    word_counts(pred, gold).map(|c| c.scores())
}

pub fn morpheme_scores(pred: &FlatSegmentation, gold: &TwoLevelAnnotation) -> Result<Prf> {
    morpheme_counts(pred, gold).map(|c| c.scores())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BracketClass {
    /// Identical to a word or morpheme bracket.
    ExactCompatible,
    /// Neither crossing nor morpheme-dividing, without matching exactly
    /// (e.g. a bracket spanning several words).
    ContainedCompatible,
    Crossing,
    MorphemeDividing,
}

impl BracketClass {
    pub fn is_compatible(self) -> bool {
        matches!(
            self,
            BracketClass::ExactCompatible | BracketClass::ContainedCompatible
        )
    }
}

/// Morpheme-dividing is checked first; crossing is tested against the union
/// of word and morpheme brackets.
pub fn classify_bracket(b: &Bracket, gold: &TwoLevelAnnotation) -> BracketClass {
    if gold.morpheme_brackets().any(|m| b.is_proper_subrange_of(m)) {
        return BracketClass::MorphemeDividing;
    }
    let all = || gold.words().iter().chain(gold.morpheme_brackets());
    if all().any(|g| b.crosses(g)) {
        BracketClass::Crossing
    } else if all().any(|g| g == b) {
        BracketClass::ExactCompatible
    } else {
        BracketClass::ContainedCompatible
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BracketCounts {
    pub compatible: u64,
    pub crossing: u64,
    pub morpheme_dividing: u64,
}

impl BracketCounts {
    pub fn total(&self) -> u64 {
        self.compatible + self.crossing + self.morpheme_dividing
    }

    pub fn all_compatible(&self) -> bool {
        self.crossing == 0 && self.morpheme_dividing == 0
    }

    pub fn add(&mut self, other: &BracketCounts) {
        self.compatible += other.compatible;
        self.crossing += other.crossing;
        self.morpheme_dividing += other.morpheme_dividing;
    }
}

pub fn bracket_counts(pred: &FlatSegmentation, gold: &TwoLevelAnnotation) -> Result<BracketCounts> {
    check_alignment(pred, gold)?;
    let mut counts = BracketCounts::default();
    for b in pred.brackets() {
        match classify_bracket(&b, gold) {
            BracketClass::Crossing => counts.crossing += 1,
            BracketClass::MorphemeDividing => counts.morpheme_dividing += 1,
            _ => counts.compatible += 1,
        }
    }
    Ok(counts)
}

/// Compatible-brackets rate (percent of proposed brackets) and
/// all-compatible rate (percent of sequences).
pub fn bracket_rates(pairs: &[(FlatSegmentation, TwoLevelAnnotation)]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::param("bracket rates need at least one sequence"));
    }
    let mut tally = Tally::default();
    for (pred, gold) in pairs {
        tally.add(&score_sequence(pred, gold)?);
    }
    let s = tally.summary();
    Ok((s.compatible_rate, s.all_compatible_rate))
}

/// Everything measured on one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceScore {
    pub word: PrfCounts,
    pub morpheme: PrfCounts,
    pub brackets: BracketCounts,
}

pub fn score_sequence(pred: &FlatSegmentation, gold: &TwoLevelAnnotation) -> Result<SequenceScore> {
    Ok(SequenceScore {
        word: word_counts(pred, gold)?,
        morpheme: morpheme_counts(pred, gold)?,
        brackets: bracket_counts(pred, gold)?,
    })
}

/// Pooled counts over many sequences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub word: PrfCounts,
    pub morpheme: PrfCounts,
    pub brackets: BracketCounts,
    pub sequences: u64,
    pub all_compatible_sequences: u64,
}

impl Tally {
    pub fn add(&mut self, score: &SequenceScore) {
        self.word.add(&score.word);
        self.morpheme.add(&score.morpheme);
        self.brackets.add(&score.brackets);
        self.sequences += 1;
        if score.brackets.all_compatible() {
            self.all_compatible_sequences += 1;
        }
    }

    pub fn summary(&self) -> Summary {
        let compatible_rate = if self.brackets.total() == 0 {
            100.0
        } else {
            100.0 * self.brackets.compatible as f64 / self.brackets.total() as f64
        };
        let all_compatible_rate = if self.sequences == 0 {
            100.0
        } else {
            100.0 * self.all_compatible_sequences as f64 / self.sequences as f64
        };
        Summary {
            word: self.word.scores(),
            morpheme: self.morpheme.scores(),
            crossing_count: self.brackets.crossing,
            morpheme_dividing_count: self.brackets.morpheme_dividing,
            compatible_rate,
            all_compatible_rate,
            sequences: self.sequences,
            proposed: self.brackets.total(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub word: Prf,
    pub morpheme: Prf,
    pub crossing_count: u64,
    pub morpheme_dividing_count: u64,
    pub compatible_rate: f64,
    pub all_compatible_rate: f64,
    pub sequences: u64,
    pub proposed: u64,
}

impl Summary {
    /// Field names and values in report order.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("word_precision", fmt_rate(self.word.precision)),
            ("word_recall", fmt_rate(self.word.recall)),
            ("word_f", fmt_rate(self.word.f)),
            ("morpheme_precision", fmt_rate(self.morpheme.precision)),
            ("morpheme_recall", fmt_rate(self.morpheme.recall)),
            ("morpheme_f", fmt_rate(self.morpheme.f)),
            ("crossing_count", self.crossing_count.to_string()),
            (
                "morpheme_dividing_count",
                self.morpheme_dividing_count.to_string(),
            ),
            ("compatible_rate", fmt_rate(self.compatible_rate)),
            ("all_compatible_rate", fmt_rate(self.all_compatible_rate)),
            ("sequences", self.sequences.to_string()),
            ("proposed_brackets", self.proposed.to_string()),
        ]
    }

    /// Unweighted mean of the rates; counts are summed.
    fn mean(summaries: &[Summary]) -> Summary {
        let n = summaries.len() as f64;
        let avg = |f: fn(&Summary) -> f64| summaries.iter().map(f).sum::<f64>() / n;
        Summary {
            word: Prf {
                precision: avg(|s| s.word.precision),
                recall: avg(|s| s.word.recall),
                f: avg(|s| s.word.f),
            },
            morpheme: Prf {
                precision: avg(|s| s.morpheme.precision),
                recall: avg(|s| s.morpheme.recall),
                f: avg(|s| s.morpheme.f),
            },
            crossing_count: summaries.iter().map(|s| s.crossing_count).sum(),
            morpheme_dividing_count: summaries.iter().map(|s| s.morpheme_dividing_count).sum(),
            compatible_rate: avg(|s| s.compatible_rate),
            all_compatible_rate: avg(|s| s.all_compatible_rate),
            sequences: summaries.iter().map(|s| s.sequences).sum(),
            proposed: summaries.iter().map(|s| s.proposed).sum(),
        }
    }
}

fn fmt_rate(v: f64) -> String {
    format!("{v:.2}")
}

/// Scores for one or more test sets.
///
/// `micro` pools counts over every sequence of every set; `macro_avg`
/// averages each set's pooled rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub per_sequence: Vec<Vec<SequenceScore>>,
    pub per_set: Vec<Summary>,
    pub micro: Summary,
    pub macro_avg: Summary,
}

impl ScoreReport {
    pub fn evaluate(sets: &[Vec<(FlatSegmentation, TwoLevelAnnotation)>]) -> Result<Self> {
        if sets.is_empty() || sets.iter().any(Vec::is_empty) {
            return Err(Error::param("every test set needs at least one sequence"));
        }
        let mut pooled = Tally::default();
        let mut per_sequence = Vec::with_capacity(sets.len());
        let mut per_set = Vec::with_capacity(sets.len());
        for (set_idx, set) in sets.iter().enumerate() {
            let mut tally = Tally::default();
            let mut scores = Vec::with_capacity(set.len());
            for (i, (pred, gold)) in set.iter().enumerate() {
                let score = score_sequence(pred, gold).map_err(|e| {
                    if sets.len() > 1 {
                        Error::param(format!("set {}: {}", set_idx + 1, e.at_line(i + 1)))
                    } else {
                        e.at_line(i + 1)
                    }
                })?;
                tally.add(&score);
                pooled.add(&score);
                scores.push(score);
            }
            per_set.push(tally.summary());
            per_sequence.push(scores);
        }
        Ok(ScoreReport {
            macro_avg: Summary::mean(&per_set),
            micro: pooled.summary(),
            per_set,
            per_sequence,
        })
    }

    /// `metric<TAB>value` lines: micro figures unprefixed, then `macro_*`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (name, value) in self.micro.fields() {
            let _ = writeln!(out, "{name}\t{value}");
        }
        for (name, value) in self.macro_avg.fields() {
            let _ = writeln!(out, "macro_{name}\t{value}");
        }
        out
    }
}

impl fmt::Display for ScoreReport {
    /// Aligned plain-text table, one column per set plus micro and macro.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut columns: Vec<(String, &Summary)> = Vec::new();
        if self.per_set.len() > 1 {
            for (i, s) in self.per_set.iter().enumerate() {
                columns.push((format!("set{}", i + 1), s));
            }
        }
        columns.push(("micro".into(), &self.micro));
        columns.push(("macro".into(), &self.macro_avg));

        let rows: Vec<(&str, Vec<String>)> = self
            .micro
            .fields()
            .iter()
            .enumerate()
            .map(|(i, (name, _))| {
                (
                    *name,
                    columns
                        .iter()
                        .map(|(_, s)| s.fields()[i].1.clone())
                        .collect(),
                )
            })
            .collect();
        let name_width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        let col_width = columns
            .iter()
            .map(|(h, _)| h.len())
            .chain(
                rows.iter()
                    .flat_map(|(_, vals)| vals.iter().map(String::len)),
            )
            .max()
            .unwrap_or(0);

        write!(f, "{:name_width$}", "metric")?;
        for (header, _) in &columns {
            write!(f, "  {header:>col_width$}")?;
        }
        writeln!(f)?;
        for (name, values) in rows {
            write!(f, "{name:name_width$}")?;
            for v in values {
                write!(f, "  {v:>col_width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
