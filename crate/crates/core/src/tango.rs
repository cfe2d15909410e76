//! Boundary voting over overlapping n-grams.
//!
//! For a location `k` and an order `n`, the two non-straddling grams (the `n`
//! characters ending at `k` and the `n` characters starting after it) are each
//! compared with every straddling gram of the same order. The fraction of
//! comparisons in which the non-straddling gram is strictly more frequent is
//! the order's vote. Orders are averaged into a total vote, and a boundary is
//! placed wherever the total vote is a strict local maximum or reaches the
//! threshold.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::ngram::NGramTable;
use crate::sequence::{FlatSegmentation, Sequence};

/// Orders, threshold, and which placement conditions are active.
#[derive(Debug, Clone, PartialEq)]
pub struct TangoParams {
    orders: Vec<usize>,
    threshold: f64,
    use_local_max: bool,
    use_threshold: bool,
}

impl TangoParams {
    /// Both placement conditions enabled.
    pub fn new(orders: &[usize], threshold: f64) -> Result<Self> {
        Self::with_conditions(orders, threshold, true, true)
    }

    pub fn with_conditions(
        orders: &[usize],
        threshold: f64,
        use_local_max: bool,
        use_threshold: bool,
    ) -> Result<Self> {
        let mut orders = orders.to_vec();
        orders.sort_unstable();
        orders.dedup();
        if orders.is_empty() {
            return Err(Error::param("the order set N must be non-empty"));
        }
        if let Some(bad) = orders.iter().find(|&&n| n < 2) {
            return Err(Error::param(format!("n-gram order {bad} is below 2")));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::param(format!(
                "threshold {threshold} is outside [0, 1]"
            )));
        }
        if !use_local_max && !use_threshold {
            return Err(Error::param(
                "at least one of the local-maximum and threshold conditions must be enabled",
            ));
        }
        Ok(TangoParams {
            orders,
            threshold,
            use_local_max,
            use_threshold,
        })
    }

    /// Sorted, de-duplicated.
    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn use_local_max(&self) -> bool {
        self.use_local_max
    }

    pub fn use_threshold(&self) -> bool {
        self.use_threshold
    }

    pub fn max_order(&self) -> usize {
        *self.orders.last().expect("non-empty")
    }

    pub fn to_key_values(&self) -> String {
        let orders: Vec<String> = self.orders.iter().map(|n| n.to_string()).collect();
        format!(
            "N={}\nt={}\nlocal_max={}\nthreshold_condition={}\n",
            orders.join(","),
            self.threshold,
            self.use_local_max,
            self.use_threshold
        )
    }
}

impl fmt::Display for TangoParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let orders: Vec<String> = self.orders.iter().map(|n| n.to_string()).collect();
        write!(f, "N={{{}}} t={}", orders.join(","), self.threshold)?;
        match (self.use_local_max, self.use_threshold) {
            (true, false) => f.write_str(" [local-max only]"),
            (false, true) => f.write_str(" [threshold only]"),
            _ => Ok(()),
        }
    }
}

impl FromStr for TangoParams {
    type Err = Error;

    /// Parses the `key=value` parameter file. `local_max` and
    /// `threshold_condition` default to `true`.
    fn from_str(s: &str) -> Result<Self> {
        let kv = KeyValues::parse(s)?;
        let orders = kv
            .required("N")?
            .split(',')
            .map(|o| {
                o.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::param(format!("bad order {o:?} in N")))
            })
            .collect::<Result<Vec<_>>>()?;
        let threshold = kv.parse_required::<f64>("t")?;
        let use_local_max = kv.parse_or("local_max", true)?;
        let use_threshold = kv.parse_or("threshold_condition", true)?;
        kv.reject_unknown(&["N", "t", "local_max", "threshold_condition"])?;
        Self::with_conditions(&orders, threshold, use_local_max, use_threshold)
    }
}

/// Vote of one order at one location, with the number of comparisons made.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderVote {
    pub value: f64,
    pub comparisons: usize,
}

impl OrderVote {
    pub const NO_EVIDENCE: OrderVote = OrderVote {
        value: 0.0,
        comparisons: 0,
    };

    pub fn has_evidence(&self) -> bool {
        self.comparisons > 0
    }
}

fn check_location(len: usize, k: usize) -> Result<()> {
    if k == 0 || k >= len {
        return Err(Error::param(format!(
            "location {k} is outside 1..{} for a sequence of length {len}",
            len.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Vote of order `n` at location `k` (the gap after the `k`-th character).
///
/// Only grams that fit inside the sequence take part; the denominator is the
/// number of comparisons actually made. With no comparison possible the
/// result is [`OrderVote::NO_EVIDENCE`].
pub fn order_vote(seq: &[char], k: usize, n: usize, table: &NGramTable) -> Result<OrderVote> {
    let len = seq.len();
    check_location(len, k)?;
    if !table.supports(n) {
        return Err(Error::UnsupportedOrder(n));
    }

    let mut sides = [0u64; 2];
    let mut num_sides = 0;
    if k >= n {
        sides[num_sides] = table.count(&seq[k - n..k])?;
        num_sides += 1;
    }
    if len - k >= n {
        sides[num_sides] = table.count(&seq[k..k + n])?;
        num_sides += 1;
    }
    if num_sides == 0 {
        return Ok(OrderVote::NO_EVIDENCE);
    }

    let mut affirmative = 0usize;
    let mut comparisons = 0usize;
    // j characters to the right of the gap, n - j to the left.
    for j in 1..n {
        if j > len - k || n - j > k {
            continue;
        }
        let straddling = table.count(&seq[k - (n - j)..k + j])?;
        for &side in &sides[..num_sides] {
            comparisons += 1;
            if side > straddling {
                affirmative += 1;
            }
        }
    }
    if comparisons == 0 {
        return Ok(OrderVote::NO_EVIDENCE);
    }
    Ok(OrderVote {
        value: affirmative as f64 / comparisons as f64,
        comparisons,
    })
}

/// Mean over the orders that produced evidence; 0 when none did.
fn average_with_evidence(votes: impl IntoIterator<Item = OrderVote>) -> f64 {
    let (sum, count) = votes
        .into_iter()
        .filter(OrderVote::has_evidence)
        .fold((0.0, 0usize), |(s, c), v| (s + v.value, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

pub fn total_vote(seq: &[char], k: usize, params: &TangoParams, table: &NGramTable) -> Result<f64> {
    let votes = params
        .orders()
        .iter()
        .map(|&n| order_vote(seq, k, n, table))
        .collect::<Result<Vec<_>>>()?;
    Ok(average_with_evidence(votes))
}

/// Total votes at every location of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteProfile {
    sequence: Sequence,
    votes: Vec<f64>,
    per_order: Option<BTreeMap<usize, Vec<OrderVote>>>,
}

impl VoteProfile {
    pub fn compute(seq: &Sequence, params: &TangoParams, table: &NGramTable) -> Result<Self> {
        Self::compute_inner(seq, params, table, false)
    }

    /// Same as [`VoteProfile::compute`] but keeps each order's votes.
    pub fn compute_with_orders(
        seq: &Sequence,
        params: &TangoParams,
        table: &NGramTable,
    ) -> Result<Self> {
        Self::compute_inner(seq, params, table, true)
    }

    fn compute_inner(
        seq: &Sequence,
        params: &TangoParams,
        table: &NGramTable,
        keep: bool,
    ) -> Result<Self> {
        if seq.is_empty() {
            return Err(Error::param("cannot compute votes for an empty sequence"));
        }
        if let Some(&n) = params.orders().iter().find(|&&n| !table.supports(n)) {
            return Err(Error::UnsupportedOrder(n));
        }
        let by_order = OrderVotes::compute(seq, params.orders(), table)?;
        let votes = by_order.total_votes(params.orders());
        Ok(VoteProfile {
            sequence: seq.clone(),
            votes,
            per_order: keep.then_some(by_order.by_order),
        })
    }

    /// Wraps precomputed votes (`votes[k - 1]` for location `k`).
    pub fn from_votes(sequence: Sequence, votes: Vec<f64>) -> Result<Self> {
        if sequence.is_empty() || votes.len() != sequence.locations() {
            return Err(Error::param(format!(
                "{} votes for a sequence with {} locations",
                votes.len(),
                sequence.locations()
            )));
        }
        if let Some(v) = votes.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("vote {v} is outside [0, 1]")));
        }
        Ok(VoteProfile {
            sequence,
            votes,
            per_order: None,
        })
    }

    pub fn sequence(&self) -> &Sequence {
        &self.sequence
    }

    pub fn votes(&self) -> &[f64] {
        &self.votes
    }

    pub fn per_order(&self) -> Option<&BTreeMap<usize, Vec<OrderVote>>> {
        self.per_order.as_ref()
    }

    /// Vote at location `k`.
    pub fn at(&self, k: usize) -> f64 {
        self.votes[k - 1]
    }
}

/// Per-location boundary mask under the placement conditions.
///
/// A location with only one neighbor is a local maximum when it is strictly
/// above that neighbor; a location with no neighbor never is.
pub fn boundary_mask(votes: &[f64], params: &TangoParams) -> Vec<bool> {
    (0..votes.len())
        .map(|i| {
            let v = votes[i];
            let local_max = params.use_local_max && {
                let left = i.checked_sub(1).map(|j| votes[j]);
                let right = votes.get(i + 1).copied();
                (left.is_some() || right.is_some())
                    && left.is_none_or(|l| v > l)
                    && right.is_none_or(|r| v > r)
            };
            local_max || (params.use_threshold && v >= params.threshold)
        })
        .collect()
}

pub fn place_boundaries(profile: &VoteProfile, params: &TangoParams) -> FlatSegmentation {
    let mask = boundary_mask(&profile.votes, params);
    FlatSegmentation::from_mask(profile.sequence.clone(), &mask)
        .expect("profile has one vote per location")
}

pub fn segment(
    seq: &Sequence,
    params: &TangoParams,
    table: &NGramTable,
) -> Result<FlatSegmentation> {
    let profile = VoteProfile::compute(seq, params, table)?;
    Ok(place_boundaries(&profile, params))
}

/// Votes of several orders at every location of one sequence. Lets a
/// parameter search evaluate any subset of orders without recounting.
#[derive(Debug, Clone)]
pub struct OrderVotes {
    len: usize,
    by_order: BTreeMap<usize, Vec<OrderVote>>,
}

impl OrderVotes {
    pub fn compute(seq: &[char], orders: &[usize], table: &NGramTable) -> Result<Self> {
        let by_order = orders
            .iter()
            .map(|&n| {
                let votes = (1..seq.len())
                    .map(|k| order_vote(seq, k, n, table))
                    .collect::<Result<Vec<_>>>()?;
                Ok((n, votes))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(OrderVotes {
            len: seq.len(),
            by_order,
        })
    }

    /// Total votes for a subset of the computed orders.
    ///
    /// # Panics
    /// If an order in `orders` was not computed.
    pub fn total_votes(&self, orders: &[usize]) -> Vec<f64> {
        let columns: Vec<&Vec<OrderVote>> = orders
            .iter()
            .map(|n| {
                self.by_order
                    .get(n)
                    .unwrap_or_else(|| panic!("order {n} was not computed"))
            })
            .collect();
        (0..self.len.saturating_sub(1))
            .map(|i| average_with_evidence(columns.iter().map(|col| col[i])))
            .collect()
    }
}

/// A table plus parameters, checked against each other once.
#[derive(Debug, Clone)]
pub struct Tango<'t> {
    table: &'t NGramTable,
    params: TangoParams,
}

impl<'t> Tango<'t> {
    pub fn new(table: &'t NGramTable, params: TangoParams) -> Result<Self> {
        if let Some(&n) = params.orders().iter().find(|&&n| !table.supports(n)) {
            return Err(Error::UnsupportedOrder(n));
        }
        Ok(Tango { table, params })
    }

    pub fn params(&self) -> &TangoParams {
        &self.params
    }

    pub fn profile(&self, seq: &Sequence) -> Result<VoteProfile> {
        VoteProfile::compute(seq, &self.params, self.table)
    }

    pub fn segment(&self, seq: &Sequence) -> Result<FlatSegmentation> {
        segment(seq, &self.params, self.table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::{build_table, Corpus};

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    fn toy_table() -> NGramTable {
        let mut lines = Vec::new();
        for _ in 0..9 {
            lines.push("ABCD");
            lines.push("WXYZ");
        }
        build_table(&Corpus::from_lines(&lines), &[2, 3, 4]).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(TangoParams::new(&[], 0.5).is_err());
        assert!(TangoParams::new(&[1, 2], 0.5).is_err());
        assert!(TangoParams::new(&[2], 1.5).is_err());
        assert!(TangoParams::new(&[2], -0.1).is_err());
        assert!(TangoParams::with_conditions(&[2], 0.5, false, false).is_err());
        let p = TangoParams::new(&[4, 2, 4], 0.5).unwrap();
        assert_eq!(p.orders(), &[2, 4]);
    }

    #[test]
    fn params_key_values_round_trip() {
        let p = TangoParams::with_conditions(&[2, 4], 0.4, true, false).unwrap();
        let text = p.to_key_values();
        assert!(text.starts_with("N=2,4\nt=0.4\n"));
        assert_eq!(text.parse::<TangoParams>().unwrap(), p);
        let minimal: TangoParams = "N=3\nt=0.25\n".parse().unwrap();
        assert!(minimal.use_local_max() && minimal.use_threshold());
        assert!("N=3\n".parse::<TangoParams>().is_err());
        assert!("N=3\nt=0.2\nbogus=1\n".parse::<TangoParams>().is_err());
    }

    #[test]
    fn four_gram_vote_at_word_gap() {
        let table = toy_table();
        assert_eq!(table.count_str("ABCD").unwrap(), 9);
        assert_eq!(table.count_str("WXYZ").unwrap(), 9);
        for g in ["BCDW", "CDWX", "DWXY"] {
            assert_eq!(table.count_str(g).unwrap(), 1);
        }
        let v = order_vote(&chars("ABCDWXYZ"), 4, 4, &table).unwrap();
        assert_eq!(
            v,
            OrderVote {
                value: 1.0,
                comparisons: 6
            }
        );
    }

    #[test]
    fn equal_counts_never_vote() {
        let table = build_table(&Corpus::from_lines(&["QQ"]), &[2, 3]).unwrap();
        let seq = chars("ABCDEFG");
        for k in 1..seq.len() {
            for n in [2, 3] {
                assert_eq!(order_vote(&seq, k, n, &table).unwrap().value, 0.0);
            }
        }
    }

    #[test]
    fn edge_location_uses_existing_grams_only() {
        // "ABCD", k = 1, n = 2: only s_R = "BC" against t_1 = "AB".
        let t = build_table(&Corpus::from_lines(&["BC", "BC", "BC"]), &[2]).unwrap();
        let v = order_vote(&chars("ABCD"), 1, 2, &t).unwrap();
        assert_eq!(
            v,
            OrderVote {
                value: 1.0,
                comparisons: 1
            }
        );
        let t = build_table(&Corpus::from_lines(&["AB", "AB"]), &[2]).unwrap();
        let v = order_vote(&chars("ABCD"), 1, 2, &t).unwrap();
        assert_eq!(
            v,
            OrderVote {
                value: 0.0,
                comparisons: 1
            }
        );
    }

    #[test]
    fn order_vote_errors() {
        let table = toy_table();
        assert!(matches!(
            order_vote(&chars("ABCD"), 0, 2, &table),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            order_vote(&chars("ABCD"), 4, 2, &table),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            order_vote(&chars("ABCD"), 2, 5, &table),
            Err(Error::UnsupportedOrder(5))
        ));
    }

    #[test]
    fn short_sequence_has_no_evidence() {
        let table = toy_table();
        // Length 3 with n = 4: nothing fits.
        assert_eq!(
            order_vote(&chars("ABC"), 1, 4, &table).unwrap(),
            OrderVote::NO_EVIDENCE
        );
        let p = TangoParams::new(&[4], 0.5).unwrap();
        assert_eq!(total_vote(&chars("ABC"), 1, &p, &table).unwrap(), 0.0);
        let seg = segment(&Sequence::from("ABC"), &p, &table).unwrap();
        assert_eq!(seg.num_segments(), 1);
    }

    #[test]
    fn total_vote_skips_orders_without_evidence() {
        let table = toy_table();
        let seq = chars("ABC");
        // k = 1, n = 4: the sequence is shorter than the order.
        assert!(!order_vote(&seq, 1, 4, &table).unwrap().has_evidence());
        let v2 = order_vote(&seq, 1, 2, &table).unwrap();
        assert!(v2.has_evidence());
        let p = TangoParams::new(&[2, 4], 0.5).unwrap();
        assert_eq!(total_vote(&seq, 1, &p, &table).unwrap(), v2.value);
    }

    #[test]
    fn total_vote_is_mean() {
        let table = toy_table();
        let seq = chars("ABCDWXYZ");
        let v2 = order_vote(&seq, 4, 2, &table).unwrap().value;
        let v4 = order_vote(&seq, 4, 4, &table).unwrap().value;
        let p = TangoParams::new(&[2, 4], 0.5).unwrap();
        assert_eq!(total_vote(&seq, 4, &p, &table).unwrap(), (v2 + v4) / 2.0);
        let p4 = TangoParams::new(&[4], 0.5).unwrap();
        assert_eq!(total_vote(&seq, 4, &p4, &table).unwrap(), v4);
    }

    fn mask_locations(votes: &[f64], params: &TangoParams) -> Vec<usize> {
        boundary_mask(votes, params)
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i + 1)
            .collect()
    }

    #[test]
    fn placement_example_profile() {
        // Gaps A-B .. Y-Z of "ABCDWXYZ".
        let votes = [0.2, 0.7, 0.3, 0.5, 0.4, 0.6, 0.65];
        let both = TangoParams::new(&[2], 0.6).unwrap();
        let max_only = TangoParams::with_conditions(&[2], 0.6, true, false).unwrap();
        let thr_only = TangoParams::with_conditions(&[2], 0.6, false, true).unwrap();
        assert_eq!(mask_locations(&votes, &thr_only), [2, 6, 7]);
        assert_eq!(mask_locations(&votes, &max_only), [2, 4, 7]);
        assert_eq!(mask_locations(&votes, &both), [2, 4, 6, 7]);
        let profile = VoteProfile::from_votes(Sequence::from("ABCDWXYZ"), votes.to_vec()).unwrap();
        assert_eq!(
            place_boundaries(&profile, &both).to_string(),
            "|AB|CD|WX|Y|Z|"
        );
    }

    #[test]
    fn flat_profile_places_nothing() {
        let p = TangoParams::new(&[2], 0.5).unwrap();
        assert!(mask_locations(&[0.3, 0.3, 0.3], &p).is_empty());
    }

    #[test]
    fn adjacent_threshold_boundaries() {
        let both = TangoParams::new(&[2], 0.5).unwrap();
        let max_only = TangoParams::with_conditions(&[2], 0.5, true, false).unwrap();
        assert_eq!(mask_locations(&[0.9, 0.9], &both), [1, 2]);
        assert!(mask_locations(&[0.9, 0.9], &max_only).is_empty());
    }

    #[test]
    fn lone_location_is_not_a_local_max() {
        let max_only = TangoParams::with_conditions(&[2], 0.5, true, false).unwrap();
        assert!(mask_locations(&[0.8], &max_only).is_empty());
        // Endpoint compared with its single neighbor.
        assert_eq!(mask_locations(&[0.8, 0.1], &max_only), [1]);
        assert_eq!(mask_locations(&[0.1, 0.8], &max_only), [2]);
    }

    #[test]
    fn threshold_tie_is_a_boundary() {
        let thr_only = TangoParams::with_conditions(&[2], 0.5, false, true).unwrap();
        assert_eq!(mask_locations(&[0.5, 0.49], &thr_only), [1]);
    }

    #[test]
    fn zero_threshold_splits_everything() {
        let table = toy_table();
        let p = TangoParams::new(&[2, 3], 0.0).unwrap();
        let seg = segment(&Sequence::from("ABCDWXYZ"), &p, &table).unwrap();
        assert_eq!(seg.to_string(), "|A|B|C|D|W|X|Y|Z|");
    }

    #[test]
    fn single_character_sequence() {
        let table = toy_table();
        let p = TangoParams::new(&[2], 0.0).unwrap();
        let seg = segment(&Sequence::from("A"), &p, &table).unwrap();
        assert_eq!(seg.to_string(), "|A|");
        assert!(segment(&Sequence::default(), &p, &table).is_err());
    }

    #[test]
    fn toy_corpus_segments_at_word_gap() {
        let table = toy_table();
        let p = TangoParams::new(&[2, 3, 4], 0.9).unwrap();
        let seg = Tango::new(&table, p)
            .unwrap()
            .segment(&Sequence::from("ABCDWXYZ"))
            .unwrap();
        assert_eq!(seg.to_string(), "|ABCD|WXYZ|");
    }

    #[test]
    fn cached_orders_match_direct_profile() {
        let table = toy_table();
        let seq = Sequence::from("ABCDWXYZABWX");
        let cache = OrderVotes::compute(&seq, &[2, 3, 4], &table).unwrap();
        for orders in [&[2][..], &[3, 4], &[2, 3, 4], &[2, 4]] {
            let p = TangoParams::new(orders, 0.5).unwrap();
            let direct = VoteProfile::compute(&seq, &p, &table).unwrap();
            assert_eq!(cache.total_votes(orders), direct.votes());
        }
    }

    #[test]
    fn tango_rejects_orders_missing_from_table() {
        let table = toy_table();
        let p = TangoParams::new(&[2, 5], 0.5).unwrap();
        assert!(matches!(
            Tango::new(&table, p),
            Err(Error::UnsupportedOrder(5))
        ));
    }
}
