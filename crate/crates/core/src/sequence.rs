//! Character sequences, brackets, and flat segmentations.
//!
//! Locations are gaps between characters: location `k` (for `1 <= k < len`)
//! sits after the `k`-th character. Brackets are half-open character ranges.

use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};

/// A delimiter-free run of Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Sequence(Vec<char>);

impl Sequence {
    pub fn new(chars: Vec<char>) -> Self {
        Sequence(chars)
    }

    pub fn chars(&self) -> &[char] {
        &self.0
    }

    pub fn into_chars(self) -> Vec<char> {
        self.0
    }

    /// Number of candidate boundary locations (`len - 1`, or 0 when empty).
    pub fn locations(&self) -> usize {
        self.0.len().saturating_sub(1)
    }
}

impl Deref for Sequence {
    type Target = [char];

    fn deref(&self) -> &[char] {
        &self.0
    }
}

impl From<&str> for Sequence {
    fn from(s: &str) -> Self {
        Sequence(s.chars().collect())
    }
}

impl From<Vec<char>> for Sequence {
    fn from(chars: Vec<char>) -> Self {
        Sequence(chars)
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0
            .iter()
            .try_for_each(|c| fmt::Write::write_char(f, *c))
    }
}

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bracket {
    pub start: usize,
    pub end: usize,
}

impl Bracket {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end, "empty bracket [{start}, {end})");
        Bracket { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, other: &Bracket) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Bracket) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Overlapping, with neither range containing the other.
    pub fn crosses(&self, other: &Bracket) -> bool {
        self.overlaps(other) && !self.contains(other) && !other.contains(self)
    }

    /// Contained in `other` and strictly smaller.
    pub fn is_proper_subrange_of(&self, other: &Bracket) -> bool {
        other.contains(self) && self != other
    }
}

impl fmt::Display for Bracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Turns sorted cut points into contiguous brackets covering `0..len`.
pub(crate) fn brackets_from_cuts(len: usize, cuts: &[usize]) -> Vec<Bracket> {
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for &cut in cuts.iter().chain(std::iter::once(&len)) {
        out.push(Bracket::new(start, cut));
        start = cut;
    }
    out
}

/// A partition of a sequence into non-empty segments, stored as its
/// strictly increasing boundary locations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlatSegmentation {
    sequence: Sequence,
    boundaries: Vec<usize>,
}

impl FlatSegmentation {
    pub fn new(sequence: Sequence, boundaries: Vec<usize>) -> Result<Self> {
        if sequence.is_empty() {
            return Err(Error::param("cannot segment an empty sequence"));
        }
        let len = sequence.len();
        let mut prev = 0;
        for &b in &boundaries {
            if b <= prev || b >= len {
                return Err(Error::param(format!(
                    "boundary {b} is out of order or outside 1..{len}"
                )));
            }
            prev = b;
        }
        Ok(FlatSegmentation {
            sequence,
            boundaries,
        })
    }

    /// The whole sequence as one segment.
    pub fn unsegmented(sequence: Sequence) -> Result<Self> {
        Self::new(sequence, Vec::new())
    }

    /// Builds from a per-location boundary mask (`mask[k - 1]` for location `k`).
    pub fn from_mask(sequence: Sequence, mask: &[bool]) -> Result<Self> {
        if mask.len() != sequence.locations() {
            return Err(Error::param(format!(
                "mask has {} entries for {} locations",
                mask.len(),
                sequence.locations()
            )));
        }
        let boundaries = mask
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| i + 1)
            .collect();
        Self::new(sequence, boundaries)
    }

    /// Builds from segments that concatenate to the sequence.
    pub fn from_segments<S: AsRef<[char]>>(segments: &[S]) -> Result<Self> {
        let mut chars = Vec::new();
        let mut boundaries = Vec::new();
        for seg in segments {
            let seg = seg.as_ref();
            if seg.is_empty() {
                return Err(Error::param("empty segment"));
            }
            if !chars.is_empty() {
                boundaries.push(chars.len());
            }
            chars.extend_from_slice(seg);
        }
        Self::new(Sequence::new(chars), boundaries)
    }

    pub fn sequence(&self) -> &Sequence {
        &self.sequence
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn brackets(&self) -> Vec<Bracket> {
        brackets_from_cuts(self.sequence.len(), &self.boundaries)
    }

    pub fn segments(&self) -> impl Iterator<Item = &[char]> + '_ {
        self.brackets()
            .into_iter()
            .map(move |b| &self.sequence[b.start..b.end])
    }

    pub fn num_segments(&self) -> usize {
        self.boundaries.len() + 1
    }
}

/// Pipe display form, e.g. `|data|base|system|`.
impl fmt::Display for FlatSegmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        for seg in self.segments() {
            for c in seg {
                fmt::Write::write_char(f, *c)?;
            }
            f.write_str("|")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_relations() {
        let word = Bracket::new(0, 8);
        let base_system = Bracket::new(4, 14);
        assert!(base_system.crosses(&word));
        assert!(!Bracket::new(4, 8).crosses(&word));
        assert!(Bracket::new(4, 8).is_proper_subrange_of(&word));
        assert!(!word.is_proper_subrange_of(&word));
        assert!(!Bracket::new(8, 14).overlaps(&word));
    }

    #[test]
    fn segmentation_rejects_bad_boundaries() {
        let seq = Sequence::from("abcd");
        assert!(FlatSegmentation::new(seq.clone(), vec![0]).is_err());
        assert!(FlatSegmentation::new(seq.clone(), vec![4]).is_err());
        assert!(FlatSegmentation::new(seq.clone(), vec![2, 2]).is_err());
        assert!(FlatSegmentation::new(seq.clone(), vec![3, 1]).is_err());
        assert!(FlatSegmentation::new(Sequence::default(), vec![]).is_err());
        let ok = FlatSegmentation::new(seq, vec![1, 3]).unwrap();
        assert_eq!(ok.to_string(), "|a|bc|d|");
        assert_eq!(
            ok.brackets(),
            vec![Bracket::new(0, 1), Bracket::new(1, 3), Bracket::new(3, 4)]
        );
    }

    #[test]
    fn mask_and_segments_agree() {
        let seq = Sequence::from("database");
        let a = FlatSegmentation::from_mask(seq, &[false, false, false, true, false, false, false])
            .unwrap();
        let data: Vec<char> = "data".chars().collect();
        let base: Vec<char> = "base".chars().collect();
        let b = FlatSegmentation::from_segments(&[data, base]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_segments(), 2);
    }
}
