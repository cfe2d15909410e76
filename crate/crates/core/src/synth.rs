//! Synthetic corpora sampled from a toy lexicon, with gold two-level
//! annotations. Stems are words; suffixes attach to the preceding stem as a
//! second morpheme of the same word.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::TwoLevelAnnotation;
use crate::error::{Error, Result};
use crate::sequence::{FlatSegmentation, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Stem,
    Suffix,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Stem => "stem",
            Role::Suffix => "suffix",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stem" => Ok(Role::Stem),
            "suffix" => Ok(Role::Suffix),
            other => Err(Error::param(format!(
                "unknown role {other:?}; expected stem or suffix"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub word: String,
    pub weight: f64,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
}

impl Lexicon {
    /// Needs at least one stem. Suffixes must be single characters, weights
    /// positive and finite, and words free of brackets and whitespace.
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.word.is_empty() {
                return Err(Error::param("empty lexicon word"));
            }
            if e.word
                .chars()
                .any(|c| matches!(c, '[' | ']' | '|') || c.is_whitespace())
            {
                return Err(Error::param(format!(
                    "lexicon word {:?} contains a reserved character",
                    e.word
                )));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::param(format!(
                    "weight of {:?} must be positive and finite",
                    e.word
                )));
            }
            if e.role == Role::Suffix && e.word.chars().count() != 1 {
                return Err(Error::param(format!(
                    "suffix {:?} must be a single character",
                    e.word
                )));
            }
            if !seen.insert((e.word.clone(), e.role == Role::Suffix)) {
                return Err(Error::param(format!(
                    "duplicate lexicon entry {:?}",
                    e.word
                )));
            }
        }
        if !entries.iter().any(|e| e.role == Role::Stem) {
            return Err(Error::param("the lexicon has no stems"));
        }
        Ok(Lexicon { entries })
    }

    /// `stems` distinct lowercase stems of 2 to 4 letters and `suffixes`
    /// distinct single letters, both Zipf-weighted (weight 1/rank).
    pub fn toy(stems: usize, suffixes: usize, seed: u64) -> Result<Self> {
        if suffixes > 26 {
            return Err(Error::param(
                "at most 26 single-letter suffixes are available",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let letters: Vec<char> = ('a'..='z').collect();
        let mut words = BTreeSet::new();
        let mut entries = Vec::new();
        while entries.len() < stems {
            let len = rng.gen_range(2..=4);
            let word: String = (0..len)
                .map(|_| *letters.choose(&mut rng).unwrap())
                .collect();
            if words.insert(word.clone()) {
                entries.push(LexiconEntry {
                    word,
                    weight: 1.0 / (entries.len() + 1) as f64,
                    role: Role::Stem,
                });
            }
        }
        let mut suffix_chars = letters;
        suffix_chars.shuffle(&mut rng);
        for (rank, c) in suffix_chars.into_iter().take(suffixes).enumerate() {
            entries.push(LexiconEntry {
                word: c.to_string(),
                weight: 1.0 / (rank + 1) as f64,
                role: Role::Suffix,
            });
        }
        Lexicon::new(entries)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn stems(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.iter().filter(|e| e.role == Role::Stem)
    }

    pub fn suffixes(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.iter().filter(|e| e.role == Role::Suffix)
    }

    /// `word<TAB>weight<TAB>role` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}\t{}", e.word, e.weight, e.role);
        }
        out
    }
}

impl FromStr for Lexicon {
    type Err = Error;

    /// Blank lines and lines starting with `#` are skipped.
    fn from_str(s: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [word, weight, role] = fields[..] else {
                return Err(Error::param(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                ))
                .at_line(i + 1));
            };
            let weight = weight
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::param(format!("bad weight {weight:?}")).at_line(i + 1))?;
            let role = role.trim().parse::<Role>().map_err(|e| e.at_line(i + 1))?;
            entries.push(LexiconEntry {
                word: word.to_string(),
                weight,
                role,
            });
        }
        Lexicon::new(entries)
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    /// Generation stops once the corpus holds at least this many characters.
    pub target_chars: usize,
    /// Probability that a stem takes a suffix.
    pub suffix_rate: f64,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            target_chars: 1_000_000,
            suffix_rate: 0.3,
            min_words: 3,
            max_words: 8,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.suffix_rate) {
            return Err(Error::param("suffix rate must lie in [0, 1]"));
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(Error::param("word counts must satisfy 1 <= min <= max"));
        }
        Ok(())
    }
}

/// Seeded sampler of annotated sentences.
pub struct Generator<'a> {
    lexicon: &'a Lexicon,
    stems: Vec<&'a LexiconEntry>,
    suffixes: Vec<&'a LexiconEntry>,
    stem_dist: WeightedIndex<f64>,
    suffix_dist: Option<WeightedIndex<f64>>,
    config: SynthConfig,
    rng: ChaCha8Rng,
}

impl<'a> Generator<'a> {
    pub fn new(lexicon: &'a Lexicon, config: SynthConfig) -> Result<Self> {
        config.validate()?;
        let stems: Vec<_> = lexicon.stems().collect();
        let suffixes: Vec<_> = lexicon.suffixes().collect();
        let weights = |es: &[&LexiconEntry]| {
            WeightedIndex::new(es.iter().map(|e| e.weight))
                .map_err(|e| Error::param(format!("lexicon weights: {e}")))
        };
        let stem_dist = weights(&stems)?;
        let suffix_dist = if suffixes.is_empty() {
            None
        } else {
            Some(weights(&suffixes)?)
        };
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Generator {
            lexicon,
            stems,
            suffixes,
            stem_dist,
            suffix_dist,
            config,
            rng,
        })
    }

    pub fn lexicon(&self) -> &Lexicon {
        self.lexicon
    }

    pub fn sentence(&mut self) -> TwoLevelAnnotation {
        let n = self
            .rng
            .gen_range(self.config.min_words..=self.config.max_words);
        let mut words: Vec<Vec<&str>> = Vec::with_capacity(n);
        for _ in 0..n {
            let stem = self.stems[self.stem_dist.sample(&mut self.rng)]
                .word
                .as_str();
            let mut word = vec![stem];
            if let Some(dist) = &self.suffix_dist {
                if self.rng.gen_bool(self.config.suffix_rate) {
                    word.push(self.suffixes[dist.sample(&mut self.rng)].word.as_str());
                }
            }
            words.push(word);
        }
        TwoLevelAnnotation::from_parts(&words).expect("lexicon words are non-empty")
    }

    /// Sentences until the configured character budget is reached.
    pub fn corpus(&mut self) -> Vec<TwoLevelAnnotation> {
        let mut out = Vec::new();
        let mut chars = 0;
        while chars < self.config.target_chars {
            let s = self.sentence();
            chars += s.sequence().len();
            out.push(s);
        }
        out
    }
}

/// Convenience wrapper: a whole corpus from `lexicon` under `config`.
pub fn generate(lexicon: &Lexicon, config: &SynthConfig) -> Result<Vec<TwoLevelAnnotation>> {
    Ok(Generator::new(lexicon, config.clone())?.corpus())
}

/// Fraction of locations that carry a word boundary in the gold set.
pub fn word_boundary_density(gold: &[TwoLevelAnnotation]) -> f64 {
    let (bounds, locs) = gold.iter().fold((0usize, 0usize), |(b, l), g| {
        (b + g.words().len() - 1, l + g.sequence().locations())
    });
    if locs == 0 {
        0.0
    } else {
        bounds as f64 / locs as f64
    }
}

/// Places a boundary at each location independently with probability `p`.
pub fn random_segmentation<R: Rng>(seq: &Sequence, p: f64, rng: &mut R) -> FlatSegmentation {
    let mask: Vec<bool> = (0..seq.locations()).map(|_| rng.gen_bool(p)).collect();
    FlatSegmentation::from_mask(seq.clone(), &mask).expect("mask length matches")
}
