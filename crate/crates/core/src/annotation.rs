//! Two-level gold bracketings and the pipe-delimited flat format.
//!
//! Annotation lines bracket words, and optionally the morphemes inside a
//! word: `[[data][base]][system]` is two words, the first split into two
//! morphemes. Flat segmentations are written `|data|base|system|`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sequence::{Bracket, FlatSegmentation, Sequence};

/// Gold segmentation with word brackets and, inside each word, morpheme
/// brackets. Both levels partition their parent range exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TwoLevelAnnotation {
    sequence: Sequence,
    words: Vec<Bracket>,
    morphemes: Vec<Vec<Bracket>>,
}

impl TwoLevelAnnotation {
    /// Builds from morpheme strings grouped by word.
    pub fn from_parts<W, M>(words: &[W]) -> Result<Self>
    where
        W: AsRef<[M]>,
        M: AsRef<str>,
    {
        let mut chars = Vec::new();
        let mut word_brackets = Vec::new();
        let mut morphemes = Vec::new();
        for word in words {
            let word = word.as_ref();
            if word.is_empty() {
                return Err(Error::param("word without morphemes"));
            }
            let start = chars.len();
            let mut inner = Vec::with_capacity(word.len());
            for m in word {
                let m_start = chars.len();
                chars.extend(m.as_ref().chars());
                if chars.len() == m_start {
                    return Err(Error::param("empty morpheme"));
                }
                inner.push(Bracket::new(m_start, chars.len()));
            }
            word_brackets.push(Bracket::new(start, chars.len()));
            morphemes.push(inner);
        }
        if word_brackets.is_empty() {
            return Err(Error::param("annotation without words"));
        }
        Ok(TwoLevelAnnotation {
            sequence: Sequence::new(chars),
            words: word_brackets,
            morphemes,
        })
    }

    /// Gold with one morpheme per word.
    pub fn from_flat(seg: &FlatSegmentation) -> Self {
        let words = seg.brackets();
        let morphemes = words.iter().map(|w| vec![*w]).collect();
        TwoLevelAnnotation {
            sequence: seg.sequence().clone(),
            words,
            morphemes,
        }
    }

    pub fn sequence(&self) -> &Sequence {
        &self.sequence
    }

    pub fn words(&self) -> &[Bracket] {
        &self.words
    }

    /// Morpheme brackets grouped by word.
    pub fn morphemes(&self) -> &[Vec<Bracket>] {
        &self.morphemes
    }

    /// All morpheme brackets in order.
    pub fn morpheme_brackets(&self) -> impl Iterator<Item = &Bracket> + '_ {
        self.morphemes.iter().flatten()
    }

    pub fn num_morphemes(&self) -> usize {
        self.morphemes.iter().map(Vec::len).sum()
    }

    pub fn word_segmentation(&self) -> FlatSegmentation {
        let cuts = self.words[1..].iter().map(|b| b.start).collect();
        FlatSegmentation::new(self.sequence.clone(), cuts).expect("words partition the sequence")
    }

    pub fn morpheme_segmentation(&self) -> FlatSegmentation {
        let cuts = self.morpheme_brackets().skip(1).map(|b| b.start).collect();
        FlatSegmentation::new(self.sequence.clone(), cuts)
            .expect("morphemes partition the sequence")
    }

    fn text(&self, b: &Bracket) -> String {
        self.sequence[b.start..b.end].iter().collect()
    }
}

impl fmt::Display for TwoLevelAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (word, morphs) in self.words.iter().zip(&self.morphemes) {
            if morphs.len() == 1 {
                write!(f, "[{}]", self.text(word))?;
            } else {
                f.write_str("[")?;
                for m in morphs {
                    write!(f, "[{}]", self.text(m))?;
                }
                f.write_str("]")?;
            }
        }
        Ok(())
    }
}

impl FromStr for TwoLevelAnnotation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_annotation(s)
    }
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    /// 1-based column of the next character.
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next();
        if c.is_some() {
            self.column += 1;
        }
        c
    }

    /// Reads bracket content up to (not including) the closing `]`.
    fn content(&mut self, open_column: usize, depth: usize) -> Result<String> {
        let mut out = String::new();
        loop {
            match self.peek() {
                None => {
                    return Err(Error::parse(
                        open_column,
                        "unbalanced bracket: '[' is never closed",
                    ))
                }
                Some(']') => {
                    if out.is_empty() {
                        return Err(Error::parse(open_column, "empty bracket"));
                    }
                    return Ok(out);
                }
                Some('[') if depth >= 2 => {
                    return Err(Error::parse(
                        self.column,
                        "brackets nested deeper than two levels",
                    ))
                }
                Some('[') => return Err(Error::parse(self.column, "'[' inside bracket content")),
                Some(c) => {
                    out.push(c);
                    self.bump();
                }
            }
        }
    }
}

/// Parses one annotation line.
pub fn parse_annotation(line: &str) -> Result<TwoLevelAnnotation> {
    let line = line.trim_end_matches(['\r', '\n']);
    let mut cur = Cursor {
        chars: line.chars().peekable(),
        column: 1,
    };
    let mut words: Vec<Vec<String>> = Vec::new();
    while let Some(c) = cur.peek() {
        if c != '[' {
            let msg = if c == ']' {
                "unbalanced bracket: unexpected ']'".to_string()
            } else {
                format!("stray character {c:?} outside brackets")
            };
            return Err(Error::parse(cur.column, msg));
        }
        let word_column = cur.column;
        cur.bump();
        if cur.peek() == Some('[') {
            let mut morphemes = Vec::new();
            loop {
                match cur.peek() {
                    Some('[') => {
                        let m_column = cur.column;
                        cur.bump();
                        morphemes.push(cur.content(m_column, 2)?);
                        cur.bump();
                    }
                    Some(']') => {
                        cur.bump();
                        break;
                    }
                    None => {
                        return Err(Error::parse(
                            word_column,
                            "unbalanced bracket: '[' is never closed",
                        ))
                    }
                    Some(c) => {
                        return Err(Error::parse(
                            cur.column,
                            format!("stray character {c:?} between morpheme brackets"),
                        ))
                    }
                }
            }
            words.push(morphemes);
        } else {
            let content = cur.content(word_column, 1)?;
            cur.bump();
            words.push(vec![content]);
        }
    }
    if words.is_empty() {
        return Err(Error::parse(1, "empty annotation"));
    }
    TwoLevelAnnotation::from_parts(&words)
}

fn check_content(text: &str, forbidden: &[char]) -> Result<()> {
    match text.chars().find(|c| forbidden.contains(c)) {
        Some(c) => Err(Error::Serialize(format!(
            "content {text:?} contains reserved character {c:?}"
        ))),
        None => Ok(()),
    }
}

/// Canonical annotation line; single-morpheme words are written without inner brackets.
pub fn serialize_annotation(annotation: &TwoLevelAnnotation) -> Result<String> {
    check_content(&annotation.sequence.to_string(), &['[', ']'])?;
    Ok(annotation.to_string())
}

/// Parses `|seg|seg|...|`.
pub fn parse_flat(line: &str) -> Result<FlatSegmentation> {
    let line = line.trim_end_matches(['\r', '\n']);
    if !line.starts_with('|') {
        return Err(Error::parse(1, "flat segmentation must start with '|'"));
    }
    let char_len = line.chars().count();
    if char_len < 2 || !line.ends_with('|') {
        return Err(Error::parse(
            char_len.max(1),
            "flat segmentation must end with '|'",
        ));
    }
    let inner = &line[1..line.len() - 1];
    let mut segments: Vec<Vec<char>> = Vec::new();
    let mut column = 2;
    for piece in inner.split('|') {
        let seg: Vec<char> = piece.chars().collect();
        if seg.is_empty() {
            return Err(Error::parse(column, "empty segment"));
        }
        column += seg.len() + 1;
        segments.push(seg);
    }
    FlatSegmentation::from_segments(&segments)
}

pub fn serialize_flat(seg: &FlatSegmentation) -> Result<String> {
    check_content(&seg.sequence().to_string(), &['|'])?;
    Ok(seg.to_string())
}

fn parse_lines<T>(text: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(l).map_err(|e| e.at_line(i + 1)))
        .collect()
}

/// One annotation per non-blank line.
pub fn parse_annotation_file(text: &str) -> Result<Vec<TwoLevelAnnotation>> {
    parse_lines(text, parse_annotation)
}

/// One flat segmentation per non-blank line.
pub fn parse_flat_file(text: &str) -> Result<Vec<FlatSegmentation>> {
    parse_lines(text, parse_flat)
}
