//! Independent reference implementations used by the integration tests.
//! Everything here works from raw strings by brute force and shares no code
//! with the library beyond its public types.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

/// Random corpus lines over `alphabet`, at most `max_chars` characters in total.
pub fn random_lines<R: Rng>(
    rng: &mut R,
    alphabet: &[char],
    max_chars: usize,
    max_line: usize,
) -> Vec<String> {
    let mut lines = Vec::new();
    let mut budget = max_chars;
    while budget > 0 {
        let len = rng.gen_range(1..=max_line.min(budget));
        budget -= len;
        lines.push(
            (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect(),
        );
    }
    lines
}

/// `size` distinct characters starting at the CJK block.
pub fn han_alphabet(size: usize) -> Vec<char> {
    (0..size as u32)
        .map(|i| char::from_u32(0x4E00 + i).unwrap())
        .collect()
}

pub fn ascii_alphabet(size: usize) -> Vec<char> {
    (0..size as u8).map(|i| (b'A' + i) as char).collect()
}

/// Exact occurrence counts of every window of length `n`, by sliding over each line.
pub fn naive_counts(lines: &[String], n: usize) -> HashMap<Vec<char>, u64> {
    let mut counts = HashMap::new();
    for line in lines {
        let chars: Vec<char> = line.chars().collect();
        if chars.len() < n {
            continue;
        }
        for start in 0..=chars.len() - n {
            *counts.entry(chars[start..start + n].to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Occurrences of `gram` by scanning every position of every line.
pub fn scan_count(lines: &[Vec<char>], gram: &[char]) -> u64 {
    let mut total = 0;
    for line in lines {
        let mut i = 0;
        while i + gram.len() <= line.len() {
            if &line[i..i + gram.len()] == gram {
                total += 1;
            }
            i += 1;
        }
    }
    total
}

/// Frequency as the segmenter sees it: grams seen fewer than twice read as 1.
pub fn floored(lines: &[Vec<char>], gram: &[char]) -> u64 {
    scan_count(lines, gram).max(1)
}

/// Total vote at gap `k` of `seq`, written out directly from the definition.
pub fn naive_total_vote(lines: &[Vec<char>], seq: &[char], k: usize, orders: &[usize]) -> f64 {
    let l = seq.len();
    let mut per_order = Vec::new();
    for &n in orders {
        let mut s = Vec::new();
        if k >= n {
            s.push(floored(lines, &seq[k - n..k]));
        }
        if l - k >= n {
            s.push(floored(lines, &seq[k..k + n]));
        }
        let mut t = Vec::new();
        for j in 1..n {
            if j <= l - k && n - j <= k {
                t.push(floored(lines, &seq[k - (n - j)..k + j]));
            }
        }
        let mut hits = 0;
        let mut total = 0;
        for &a in &s {
            for &b in &t {
                total += 1;
                if a > b {
                    hits += 1;
                }
            }
        }
        if total > 0 {
            per_order.push(hits as f64 / total as f64);
        }
    }
    if per_order.is_empty() {
        0.0
    } else {
        per_order.iter().sum::<f64>() / per_order.len() as f64
    }
}

/// Boundary positions (1-based character offsets) from a vote vector.
pub fn naive_boundaries(votes: &[f64], t: f64, local_max: bool, threshold: bool) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..votes.len() {
        let left = if i > 0 { Some(votes[i - 1]) } else { None };
        let right = votes.get(i + 1).copied();
        let is_max = (left.is_some() || right.is_some())
            && left.is_none_or(|v| votes[i] > v)
            && right.is_none_or(|v| votes[i] > v);
        if (local_max && is_max) || (threshold && votes[i] >= t) {
            out.push(i + 1);
        }
    }
    out
}

/// Unigram and bigram counts from scratch.
pub struct RawStats {
    pub uni: HashMap<char, f64>,
    pub bi: HashMap<(char, char), f64>,
    pub n_chars: f64,
    pub n_bigrams: f64,
    pub floor: bool,
}

impl RawStats {
    pub fn new(lines: &[Vec<char>], floor: bool) -> Self {
        let mut uni = HashMap::new();
        let mut bi = HashMap::new();
        let mut n_chars = 0.0;
        let mut n_bigrams = 0.0;
        for line in lines {
            for (i, &c) in line.iter().enumerate() {
                *uni.entry(c).or_insert(0.0) += 1.0;
                n_chars += 1.0;
                if i + 1 < line.len() {
                    *bi.entry((c, line[i + 1])).or_insert(0.0) += 1.0;
                    n_bigrams += 1.0;
                }
            }
        }
        RawStats {
            uni,
            bi,
            n_chars,
            n_bigrams,
            floor,
        }
    }

    fn u(&self, c: char) -> f64 {
        let v = self.uni.get(&c).copied().unwrap_or(0.0);
        if self.floor {
            v.max(1.0)
        } else {
            v
        }
    }

    fn b(&self, a: char, c: char) -> f64 {
        let v = self.bi.get(&(a, c)).copied().unwrap_or(0.0);
        if self.floor {
            v.max(1.0)
        } else {
            v
        }
    }

    /// Pointwise mutual information in bits, under MLE or ELE.
    pub fn mi(&self, d: char, w: char, ele: bool) -> f64 {
        let v1 = self.uni.len() as f64;
        let types = self.bi.len() as f64;
        let (pd, pw, pdw) = if ele {
            (
                (self.u(d) + 0.5) / (self.n_chars + 0.5 * v1),
                (self.u(w) + 0.5) / (self.n_chars + 0.5 * v1),
                (self.b(d, w) + 0.5) / (self.n_bigrams + 0.5 * types),
            )
        } else {
            (
                self.u(d) / self.n_chars,
                self.u(w) / self.n_chars,
                self.b(d, w) / self.n_bigrams,
            )
        };
        if pdw == 0.0 {
            f64::NEG_INFINITY
        } else {
            (pdw / (pd * pw)).ln() / std::f64::consts::LN_2
        }
    }

    fn cond(&self, x: char, y: char, ele: bool) -> (f64, f64) {
        let v1 = self.uni.len() as f64;
        let (num, den) = if ele {
            (self.b(x, y) + 0.5, self.u(x) + 0.5 * v1)
        } else {
            (self.b(x, y), self.u(x))
        };
        let p = num / den;
        (p, p * (1.0 - p) / den)
    }

    pub fn dts(&self, c: char, d: char, w: char, x: char, ele: bool) -> f64 {
        let (p_wd, v_wd) = self.cond(d, w, ele);
        let (p_dc, v_dc) = self.cond(c, d, ele);
        let (p_xw, v_xw) = self.cond(w, x, ele);
        let term = |pa: f64, va: f64, pb: f64, vb: f64| {
            let den = (va + vb).sqrt();
            if den == 0.0 {
                0.0
            } else {
                (pa - pb) / den
            }
        };
        term(p_wd, v_wd, p_dc, v_dc) - term(p_xw, v_xw, p_wd, v_wd)
    }
}
