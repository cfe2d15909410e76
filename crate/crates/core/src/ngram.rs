//! Character n-gram count tables built from raw, unsegmented text.
//!
//! Counting is sort-based: every order-`n` window of every sequence is
//! collected, sorted, and run-length counted. Windows never span two
//! sequences. Grams seen exactly once are dropped from the table and any
//! absent gram of a covered order reads back as a count of one.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sequence::Sequence;

pub const TABLE_HEADER: &str = "tango-ngrams v1";

/// One named character class or an explicit code point range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CharClass {
    /// CJK unified ideographs (main block, extension A and B, compatibility)
    /// plus the iteration mark U+3005.
    Han,
    Hiragana,
    Katakana,
    Digit,
    Uppercase,
    Lowercase,
    Alphabetic,
    Range(char, char),
}

impl CharClass {
    pub fn accepts(&self, c: char) -> bool {
        match self {
            CharClass::Han => matches!(c,
                '\u{4E00}'..='\u{9FFF}'
                | '\u{3400}'..='\u{4DBF}'
                | '\u{F900}'..='\u{FAFF}'
                | '\u{20000}'..='\u{2A6DF}'
                | '\u{3005}'),
            CharClass::Hiragana => matches!(c, '\u{3041}'..='\u{309F}'),
            CharClass::Katakana => matches!(c, '\u{30A0}'..='\u{30FF}' | '\u{31F0}'..='\u{31FF}'),
            CharClass::Digit => c.is_numeric(),
            CharClass::Uppercase => c.is_uppercase(),
            CharClass::Lowercase => c.is_lowercase(),
            CharClass::Alphabetic => c.is_alphabetic(),
            CharClass::Range(lo, hi) => (*lo..=*hi).contains(&c),
        }
    }
}

impl fmt::Display for CharClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CharClass::Han => f.write_str("han"),
            CharClass::Hiragana => f.write_str("hiragana"),
            CharClass::Katakana => f.write_str("katakana"),
            CharClass::Digit => f.write_str("digit"),
            CharClass::Uppercase => f.write_str("upper"),
            CharClass::Lowercase => f.write_str("lower"),
            CharClass::Alphabetic => f.write_str("alpha"),
            CharClass::Range(lo, hi) if lo == hi => write!(f, "U+{:04X}", *lo as u32),
            CharClass::Range(lo, hi) => write!(f, "U+{:04X}-U+{:04X}", *lo as u32, *hi as u32),
        }
    }
}

fn parse_codepoint(s: &str) -> Option<char> {
    let hex = s
        .strip_prefix("U+")
        .or_else(|| s.strip_prefix("u+"))
        .unwrap_or(s);
    u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
}

impl FromStr for CharClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let class = match s.trim().to_ascii_lowercase().as_str() {
            "han" | "kanji" => CharClass::Han,
            "hiragana" => CharClass::Hiragana,
            "katakana" => CharClass::Katakana,
            "digit" | "digits" => CharClass::Digit,
            "upper" | "uppercase" => CharClass::Uppercase,
            "lower" | "lowercase" => CharClass::Lowercase,
            "alpha" | "alphabetic" => CharClass::Alphabetic,
            _ => {
                let s = s.trim();
                let (lo, hi) = match s.split_once('-') {
                    Some((lo, hi)) => (lo, hi),
                    None => (s, s),
                };
                match (parse_codepoint(lo), parse_codepoint(hi)) {
                    (Some(lo), Some(hi)) if lo <= hi => CharClass::Range(lo, hi),
                    _ => {
                        return Err(Error::param(format!(
                        "unknown character class {s:?} (expected a class name or U+XXXX[-U+YYYY])"
                    )))
                    }
                }
            }
        };
        Ok(class)
    }
}

/// Union of character classes. Sequences are maximal runs of accepted characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharFilter {
    classes: Vec<CharClass>,
}

impl CharFilter {
    pub fn new(classes: Vec<CharClass>) -> Self {
        CharFilter { classes }
    }

    pub fn accepts(&self, c: char) -> bool {
        self.classes.iter().any(|class| class.accepts(c))
    }
}

impl From<CharClass> for CharFilter {
    fn from(class: CharClass) -> Self {
        CharFilter::new(vec![class])
    }
}

impl FromStr for CharFilter {
    type Err = Error;

    /// Comma-separated list, e.g. `han,U+3005`.
    fn from_str(s: &str) -> Result<Self> {
        let classes = s
            .split(',')
            .filter(|part| !part.trim().is_empty())
            .map(CharClass::from_str)
            .collect::<Result<Vec<_>>>()?;
        if classes.is_empty() {
            return Err(Error::param("empty character filter"));
        }
        Ok(CharFilter::new(classes))
    }
}

impl fmt::Display for CharFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, class) in self.classes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{class}")?;
        }
        Ok(())
    }
}

/// Splits raw text into sequences.
///
/// Without a filter every non-empty line is a sequence (a trailing `\r` is
/// stripped). With a filter, every maximal run of accepted characters is a
/// sequence, in document order.
pub fn extract_sequences(raw: &[u8], filter: Option<&CharFilter>) -> Result<Vec<Sequence>> {
    let text = std::str::from_utf8(raw).map_err(|e| Error::Decode {
        offset: e.valid_up_to(),
    })?;
    let sequences = match filter {
        None => text
            .split('\n')
            .map(|line| line.strip_suffix('\r').unwrap_or(line))
            .filter(|line| !line.is_empty())
            .map(Sequence::from)
            .collect(),
        Some(filter) => {
            let mut out = Vec::new();
            let mut run = Vec::new();
            for c in text.chars() {
                if filter.accepts(c) {
                    run.push(c);
                } else if !run.is_empty() {
                    out.push(Sequence::new(std::mem::take(&mut run)));
                }
            }
            if !run.is_empty() {
                out.push(Sequence::new(run));
            }
            out
        }
    };
    Ok(sequences)
}

/// Sequences extracted from a raw corpus, plus the filter that produced them.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub sequences: Vec<Sequence>,
    pub filter: Option<CharFilter>,
}

impl Corpus {
    pub fn new(sequences: Vec<Sequence>) -> Self {
        Corpus {
            sequences,
            filter: None,
        }
    }

    pub fn from_text(raw: &[u8], filter: Option<CharFilter>) -> Result<Self> {
        let sequences = extract_sequences(raw, filter.as_ref())?;
        Ok(Corpus { sequences, filter })
    }

    pub fn from_lines<S: AsRef<str>>(lines: &[S]) -> Self {
        Corpus::new(
            lines
                .iter()
                .map(|l| Sequence::from(l.as_ref()))
                .filter(|s| !s.is_empty())
                .collect(),
        )
    }

    pub fn num_chars(&self) -> u64 {
        self.sequences.iter().map(|s| s.len() as u64).sum()
    }
}

/// Build-time information that is not part of the serialized table.
#[derive(Debug, Clone, Default)]
pub struct TableMetadata {
    pub built_at_unix: Option<u64>,
    pub filter: Option<String>,
}

/// Pruned n-gram counts for a fixed set of orders. Immutable once built.
#[derive(Debug, Clone)]
pub struct NGramTable {
    orders: BTreeSet<usize>,
    counts: BTreeMap<usize, HashMap<Vec<char>, u64>>,
    corpus_size: u64,
    metadata: TableMetadata,
}

impl PartialEq for NGramTable {
    fn eq(&self, other: &Self) -> bool {
        self.orders == other.orders
            && self.counts == other.counts
            && self.corpus_size == other.corpus_size
    }
}

impl Eq for NGramTable {}

fn validate_orders(orders: &[usize]) -> Result<BTreeSet<usize>> {
    if orders.is_empty() {
        return Err(Error::param("at least one n-gram order is required"));
    }
    if let Some(bad) = orders.iter().find(|&&n| n < 2) {
        return Err(Error::param(format!("n-gram order {bad} is below 2")));
    }
    Ok(orders.iter().copied().collect())
}

fn count_order(sequences: &[Sequence], n: usize) -> HashMap<Vec<char>, u64> {
    let mut windows: Vec<&[char]> = sequences.iter().flat_map(|s| s.windows(n)).collect();
    windows.sort_unstable();
    let mut counts = HashMap::new();
    for run in windows.chunk_by(|a, b| a == b) {
        if run.len() >= 2 {
            counts.insert(run[0].to_vec(), run.len() as u64);
        }
    }
    counts
}

/// Counts every order-`n` window for each `n` in `orders`.
pub fn build_table(corpus: &Corpus, orders: &[usize]) -> Result<NGramTable> {
    let orders = validate_orders(orders)?;
    for (i, seq) in corpus.sequences.iter().enumerate() {
        if let Some(c) = seq.iter().find(|c| matches!(c, '\t' | '\n')) {
            return Err(Error::param(format!(
                "sequence {} contains {:?}, which the table format cannot store",
                i + 1,
                c
            )));
        }
    }
    let counts = orders
        .par_iter()
        .map(|&n| (n, count_order(&corpus.sequences, n)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let built_at_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());
    Ok(NGramTable {
        orders,
        counts,
        corpus_size: corpus.num_chars(),
        metadata: TableMetadata {
            built_at_unix,
            filter: corpus.filter.as_ref().map(|f| f.to_string()),
        },
    })
}

impl NGramTable {
    pub fn orders(&self) -> &BTreeSet<usize> {
        &self.orders
    }

    pub fn corpus_size(&self) -> u64 {
        self.corpus_size
    }

    pub fn metadata(&self) -> &TableMetadata {
        &self.metadata
    }

    pub fn supports(&self, order: usize) -> bool {
        self.orders.contains(&order)
    }

    /// Stored count, or 1 for grams that are absent (unseen or pruned).
    pub fn count(&self, gram: &[char]) -> Result<u64> {
        let map = self
            .counts
            .get(&gram.len())
            .ok_or(Error::UnsupportedOrder(gram.len()))?;
        Ok(map.get(gram).copied().unwrap_or(1))
    }

    pub fn count_str(&self, gram: &str) -> Result<u64> {
        let chars: Vec<char> = gram.chars().collect();
        self.count(&chars)
    }

    /// Number of stored (count >= 2) grams of the given order.
    pub fn distinct(&self, order: usize) -> usize {
        self.counts.get(&order).map_or(0, HashMap::len)
    }

    pub fn len(&self) -> usize {
        self.counts.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stored entries sorted by (order, gram).
    pub fn entries(&self) -> Vec<(usize, &[char], u64)> {
        let mut out = Vec::with_capacity(self.len());
        for (&order, map) in &self.counts {
            let mut grams: Vec<_> = map.iter().collect();
            grams.sort_unstable_by(|a, b| a.0.cmp(b.0));
            out.extend(grams.into_iter().map(|(g, &c)| (order, g.as_slice(), c)));
        }
        out
    }

    /// Writes the versioned text format and returns the number of bytes written.
    pub fn save<W: Write>(&self, mut out: W) -> Result<usize> {
        let mut buf = String::new();
        buf.push_str(TABLE_HEADER);
        buf.push('\n');
        buf.push_str(&format!("corpus_size {}\n", self.corpus_size));
        let orders: Vec<String> = self.orders.iter().map(|n| n.to_string()).collect();
        buf.push_str(&format!("orders {}\n", orders.join(",")));
        for (order, gram, count) in self.entries() {
            buf.push_str(&format!("{order}\t{count}\t"));
            buf.extend(gram.iter());
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
        out.flush()?;
        Ok(buf.len())
    }

    pub fn save_to_path(&self, path: impl AsRef<Path>) -> Result<usize> {
        let file = File::create(path)?;
        self.save(BufWriter::new(file))
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self> {
        let mut raw = Vec::new();
        input.read_to_end(&mut raw)?;
        let text = std::str::from_utf8(&raw).map_err(|e| Error::Decode {
            offset: e.valid_up_to(),
        })?;
        parse_table(text)
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::load(File::open(path)?)
    }
}

fn parse_table(text: &str) -> Result<NGramTable> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    // A complete file ends with a newline, leaving one empty trailing piece.
    match lines.pop() {
        Some("") => {}
        _ => {
            return Err(Error::load(
                lines.len() + 1,
                "truncated: final line is not newline-terminated",
            ))
        }
    }
    if lines.len() < 3 {
        return Err(Error::load(
            lines.len() + 1,
            "truncated: missing header, corpus_size or orders line",
        ));
    }

    if lines[0] != TABLE_HEADER {
        let message = if lines[0].starts_with("tango-ngrams ") {
            format!("unsupported table version {:?}", lines[0])
        } else {
            format!("expected header {TABLE_HEADER:?}, found {:?}", lines[0])
        };
        return Err(Error::load(1, message));
    }

    let corpus_size = lines[1]
        .strip_prefix("corpus_size ")
        .and_then(|v| v.parse::<u64>().ok())
        .ok_or_else(|| Error::load(2, format!("malformed corpus_size line {:?}", lines[1])))?;

    let order_list = lines[2]
        .strip_prefix("orders ")
        .ok_or_else(|| Error::load(3, format!("malformed orders line {:?}", lines[2])))?;
    let orders_vec = order_list
        .split(',')
        .map(|o| o.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::load(3, format!("bad order list: {e}")))?;
    let orders = validate_orders(&orders_vec).map_err(|e| Error::load(3, e.to_string()))?;

    let mut counts: BTreeMap<usize, HashMap<Vec<char>, u64>> =
        orders.iter().map(|&n| (n, HashMap::new())).collect();
    let mut prev: Option<(usize, Vec<char>)> = None;
    for (i, line) in lines.iter().enumerate().skip(3) {
        let lineno = i + 1;
        let mut fields = line.splitn(3, '\t');
        let (Some(order), Some(count), Some(gram)) = (fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::load(lineno, "expected <order>\\t<count>\\t<gram>"));
        };
        let order: usize = order
            .parse()
            .map_err(|_| Error::load(lineno, format!("bad order {order:?}")))?;
        let count: u64 = count
            .parse()
            .map_err(|_| Error::load(lineno, format!("bad count {count:?}")))?;
        let gram: Vec<char> = gram.chars().collect();
        if !orders.contains(&order) {
            return Err(Error::load(lineno, format!("order {order} not declared")));
        }
        if gram.len() != order {
            return Err(Error::load(
                lineno,
                format!("gram has {} characters, expected {order}", gram.len()),
            ));
        }
        if count < 2 {
            return Err(Error::load(
                lineno,
                format!("stored count {count} is below 2"),
            ));
        }
        let key = (order, gram);
        if prev.as_ref().is_some_and(|p| *p >= key) {
            return Err(Error::load(
                lineno,
                "entries are not strictly sorted by (order, gram)",
            ));
        }
        counts
            .get_mut(&order)
            .expect("declared order")
            .insert(key.1.clone(), count);
        prev = Some(key);
    }

    Ok(NGramTable {
        orders,
        counts,
        corpus_size,
        metadata: TableMetadata::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(lines: &[&str], orders: &[usize]) -> NGramTable {
        build_table(&Corpus::from_lines(lines), orders).unwrap()
    }

    fn strings(seqs: &[Sequence]) -> Vec<String> {
        seqs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn extract_lines_without_filter() {
        let seqs = extract_sequences(b"abc\n\ndef", None).unwrap();
        assert_eq!(strings(&seqs), ["abc", "def"]);
        let seqs = extract_sequences(b"abc\r\ndef\r\n", None).unwrap();
        assert_eq!(strings(&seqs), ["abc", "def"]);
    }

    #[test]
    fn extract_runs_with_filter() {
        let digits = CharFilter::from(CharClass::Digit);
        let seqs = extract_sequences(b"ab1cd22e", Some(&digits)).unwrap();
        assert_eq!(strings(&seqs), ["1", "22"]);
        let upper = CharFilter::from(CharClass::Uppercase);
        let seqs = extract_sequences(b"xxABCyyA", Some(&upper)).unwrap();
        assert_eq!(strings(&seqs), ["ABC", "A"]);
    }

    #[test]
    fn extract_han_runs() {
        let han: CharFilter = "han".parse().unwrap();
        let text = "日本語のテキスト、東京都庁。";
        let seqs = extract_sequences(text.as_bytes(), Some(&han)).unwrap();
        assert_eq!(strings(&seqs), ["日本語", "東京都庁"]);
    }

    #[test]
    fn extract_reports_decode_offset() {
        let err = extract_sequences(b"ab\xffcd", None).unwrap_err();
        assert!(matches!(err, Error::Decode { offset: 2 }));
    }

    #[test]
    fn filter_parsing() {
        let f: CharFilter = "U+0041-U+0043,digit".parse().unwrap();
        assert!(f.accepts('B'));
        assert!(f.accepts('7'));
        assert!(!f.accepts('D'));
        assert_eq!(f.to_string(), "U+0041-U+0043,digit");
        assert!("nonsense".parse::<CharFilter>().is_err());
        assert!("U+0043-U+0041".parse::<CharFilter>().is_err());
    }

    #[test]
    fn abab_counts() {
        let t = table(&["ABAB"], &[2]);
        assert_eq!(t.count_str("AB").unwrap(), 2);
        assert_eq!(t.count_str("BA").unwrap(), 1);
        assert_eq!(t.count_str("ZZ").unwrap(), 1);
        assert_eq!(t.len(), 1);
        assert_eq!(t.corpus_size(), 4);
    }

    #[test]
    fn overlapping_occurrences() {
        let t = table(&["AAAA"], &[2, 3]);
        assert_eq!(t.count_str("AA").unwrap(), 3);
        assert_eq!(t.count_str("AAA").unwrap(), 2);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn no_spanning_across_sequences() {
        let t = table(&["AB", "CD", "AB", "CD"], &[2]);
        assert_eq!(t.count_str("AB").unwrap(), 2);
        assert_eq!(t.count_str("BC").unwrap(), 1);
        assert_eq!(t.distinct(2), 2);
    }

    #[test]
    fn unsupported_order() {
        let t = table(&["ABAB"], &[2]);
        assert!(matches!(
            t.count_str("ABA"),
            Err(Error::UnsupportedOrder(3))
        ));
    }

    #[test]
    fn bad_orders_rejected() {
        let corpus = Corpus::from_lines(&["ABAB"]);
        assert!(build_table(&corpus, &[1, 2]).is_err());
        assert!(build_table(&corpus, &[]).is_err());
    }

    #[test]
    fn tab_in_corpus_rejected() {
        let corpus = Corpus::from_lines(&["AB\tAB"]);
        assert!(matches!(
            build_table(&corpus, &[2]),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn serialized_layout() {
        let t = table(&["ABAB", "AAAA"], &[2, 3]);
        let mut out = Vec::new();
        let n = t.save(&mut out).unwrap();
        assert_eq!(n, out.len());
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "tango-ngrams v1\ncorpus_size 8\norders 2,3\n2\t3\tAA\n2\t2\tAB\n3\t2\tAAA\n"
        );
    }

    #[test]
    fn round_trip_including_empty() {
        for t in [table(&["ABAB"], &[2]), table(&["ABCDEF"], &[2, 3, 4])] {
            let mut out = Vec::new();
            t.save(&mut out).unwrap();
            assert_eq!(NGramTable::load(out.as_slice()).unwrap(), t);
        }
        let empty = table(&["ABCDEF"], &[2, 3]);
        assert!(empty.is_empty());
    }

    fn load_err(text: &str) -> (usize, String) {
        match NGramTable::load(text.as_bytes()) {
            Err(Error::Load { line, message }) => (line, message),
            other => panic!("expected load error, got {other:?}"),
        }
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        assert_eq!(load_err("tango-ngrams v2\ncorpus_size 1\norders 2\n").0, 1);
        assert!(load_err("tango-ngrams v2\ncorpus_size 1\norders 2\n")
            .1
            .contains("version"));
        assert_eq!(load_err("tango-ngrams v1\ncorpus_size x\norders 2\n").0, 2);
        assert_eq!(load_err("tango-ngrams v1\ncorpus_size 4\norders 1\n").0, 3);
        assert_eq!(
            load_err("tango-ngrams v1\ncorpus_size 4\norders 2\n2\t2\tAB").0,
            4
        );
        assert_eq!(load_err("tango-ngrams v1\ncorpus_size 4\n").0, 3);
        assert_eq!(
            load_err("tango-ngrams v1\ncorpus_size 4\norders 2\n2\t2\tABC\n").0,
            4
        );
        assert_eq!(
            load_err("tango-ngrams v1\ncorpus_size 4\norders 2\n2\t1\tAB\n").0,
            4
        );
        assert_eq!(
            load_err("tango-ngrams v1\ncorpus_size 4\norders 2\n2\t2\tAB\n2\t2\tAB\n").0,
            5
        );
        assert_eq!(
            load_err("tango-ngrams v1\ncorpus_size 4\norders 2\n3\t2\tABC\n").0,
            4
        );
        assert_eq!(
            load_err("tango-ngrams v1\ncorpus_size 4\norders 2\n2 2 AB\n").0,
            4
        );
    }
}
