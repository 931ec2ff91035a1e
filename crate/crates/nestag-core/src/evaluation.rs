//! Exact-match span scoring along three axes: overall, per word-length,
//! and per nested level, plus per-class scores, the label confusion
//! matrix and the average predicted span length.
//!
//! A predicted span is a true positive iff a gold span with the same
//! sentence, start, length and label exists; there is no partial-overlap
//! credit. Ratios with a zero denominator are defined as 0.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::spancodec::{assign_nested_levels, Span};

/// A span anchored to a sentence, the unit of corpus-level scoring.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DocSpan {
    pub sentence: usize,
    pub span: Span,
}

impl DocSpan {
    pub fn new(sentence: usize, span: Span) -> Self {
        DocSpan { sentence, span }
    }
}

/// Exact-match counts with derived precision/recall/F1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Prf {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Prf {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn merge(&mut self, other: &Prf) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// Unweighted averages of per-group precision, recall and F1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Axis along which spans are grouped before counting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grouping {
    Overall,
    Length,
    Class,
    /// Nested level; gold spans use levels within the gold set, spurious
    /// predictions use levels within the predicted set.
    NestedLevel,
}

/// Group identity for a [`Grouping`] axis.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum GroupKey {
    Overall,
    Length(usize),
    Class(String),
    Level(usize),
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::Overall => write!(f, "overall"),
            GroupKey::Length(m) => write!(f, "{m}"),
            GroupKey::Class(c) => write!(f, "{c}"),
            GroupKey::Level(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    EmptyMap,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyMap => write!(f, "cannot aggregate an empty score map"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Levels for every span of every sentence, computed within one span set.
fn levels_by_span(spans: &BTreeSet<DocSpan>) -> BTreeMap<DocSpan, usize> {
    let mut per_sentence: BTreeMap<usize, Vec<Span>> = BTreeMap::new();
    for ds in spans {
        per_sentence.entry(ds.sentence).or_default().push(ds.span.clone());
    }
    let mut out = BTreeMap::new();
    for (sentence, sentence_spans) in per_sentence {
        for nested in assign_nested_levels(&sentence_spans) {
            out.insert(DocSpan::new(sentence, nested.span), nested.level);
        }
    }
    out
}

/// Scores predictions against gold with exact matching, grouped along the
/// requested axis. Every gold span is matched at most once (sets are
/// deduplicated). Group counts sum to the overall counts on every axis.
pub fn score_spans(
    gold: &[DocSpan],
    predicted: &[DocSpan],
    grouping: Grouping,
) -> BTreeMap<GroupKey, Prf> {
    let gold: BTreeSet<DocSpan> = gold.iter().cloned().collect();
    let pred: BTreeSet<DocSpan> = predicted.iter().cloned().collect();

    let (gold_levels, pred_levels) = if grouping == Grouping::NestedLevel {
        (levels_by_span(&gold), levels_by_span(&pred))
    } else {
        (BTreeMap::new(), BTreeMap::new())
    };

    let key_for = |ds: &DocSpan, in_gold: bool| -> GroupKey {
        match grouping {
            Grouping::Overall => GroupKey::Overall,
            Grouping::Length => GroupKey::Length(ds.span.len),
            Grouping::Class => GroupKey::Class(ds.span.label.clone()),
            Grouping::NestedLevel => {
                let levels = if in_gold { &gold_levels } else { &pred_levels };
                GroupKey::Level(levels[ds])
            }
        }
    };

    let mut out: BTreeMap<GroupKey, Prf> = BTreeMap::new();
    for ds in &pred {
        if gold.contains(ds) {
            out.entry(key_for(ds, true)).or_default().tp += 1;
        } else {
            out.entry(key_for(ds, false)).or_default().fp += 1;
        }
    }
    for ds in &gold {
        if !pred.contains(ds) {
            out.entry(key_for(ds, true)).or_default().fn_ += 1;
        }
    }
    out
}

/// Pools a per-group map into micro counts and macro averages.
///
/// Micro pools tp/fp/fn and recomputes the ratios; macro is the
/// unweighted mean of each of P, R and F1 over the groups present in the
/// map (groups with no gold and no predicted span never appear).
pub fn macro_micro(per_group: &BTreeMap<GroupKey, Prf>) -> Result<(PrfScores, Prf), EvalError> {
    if per_group.is_empty() {
        return Err(EvalError::EmptyMap);
    }
    let mut micro = Prf::default();
    let mut macro_scores = PrfScores::default();
    for prf in per_group.values() {
        micro.merge(prf);
        macro_scores.precision += prf.precision();
        macro_scores.recall += prf.recall();
        macro_scores.f1 += prf.f1();
    }
    let n = per_group.len() as f64;
    macro_scores.precision /= n;
    macro_scores.recall /= n;
    macro_scores.f1 /= n;
    Ok((macro_scores, micro))
}

/// Span-level label confusion over `{none} ∪ labels`.
///
/// Cell `(g, p)` counts intervals carrying gold label `g` and predicted
/// label `p`; intervals present on only one side use `none` for the
/// other. Index 0 is `none`; labels keep the given order, with any labels
/// only seen in the data appended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    /// Count in cell (gold, predicted); index 0 is `none`.
    pub fn count(&self, gold: usize, predicted: usize) -> usize {
        self.counts[gold][predicted]
    }

    /// Number of rows/columns including `none`.
    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label).map(|i| i + 1)
    }

    /// Total off-diagonal count.
    pub fn total_errors(&self) -> usize {
        let mut sum = 0;
        for g in 0..self.size() {
            for p in 0..self.size() {
                if g != p {
                    sum += self.counts[g][p];
                }
            }
        }
        sum
    }
}

pub fn confusion_matrix(
    gold: &[DocSpan],
    predicted: &[DocSpan],
    labels: &[String],
) -> ConfusionMatrix {
    let mut all_labels: Vec<String> = labels.to_vec();
    let provided: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
    let extra: BTreeSet<String> = gold
        .iter()
        .chain(predicted)
        .filter(|ds| !provided.contains(ds.span.label.as_str()))
        .map(|ds| ds.span.label.clone())
        .collect();
    all_labels.extend(extra);

    let index_of = |label: &str| -> usize {
        1 + all_labels.iter().position(|l| l == label).expect("known label")
    };

    // interval -> (gold label?, predicted label?); first label wins per side
    type IntervalLabels = BTreeMap<(usize, usize, usize), (Option<String>, Option<String>)>;
    let mut intervals: IntervalLabels = BTreeMap::new();
    for ds in gold.iter().cloned().collect::<BTreeSet<_>>() {
        let slot = intervals
            .entry((ds.sentence, ds.span.start, ds.span.len))
            .or_default();
        if slot.0.is_none() {
            slot.0 = Some(ds.span.label);
        }
    }
    for ds in predicted.iter().cloned().collect::<BTreeSet<_>>() {
        let slot = intervals
            .entry((ds.sentence, ds.span.start, ds.span.len))
            .or_default();
        if slot.1.is_none() {
            slot.1 = Some(ds.span.label);
        }
    }

    let size = all_labels.len() + 1;
    let mut counts = alloc::vec![alloc::vec![0usize; size]; size];
    for (g, p) in intervals.values() {
        let gi = g.as_deref().map(index_of).unwrap_or(0);
        let pi = p.as_deref().map(index_of).unwrap_or(0);
        counts[gi][pi] += 1;
    }
    ConfusionMatrix {
        labels: all_labels,
        counts,
    }
}

/// Mean predicted span length; 0 for an empty prediction set.
pub fn average_length(predicted: &[DocSpan]) -> f64 {
    let set: BTreeSet<&DocSpan> = predicted.iter().collect();
    if set.is_empty() {
        return 0.0;
    }
    set.iter().map(|ds| ds.span.len as f64).sum::<f64>() / set.len() as f64
}

/// The full three-axis report.
///
/// The overall macro scores average the per-word-length groups, which is
/// also the quantity training uses for best-checkpoint selection.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub micro: Prf,
    pub macro_scores: PrfScores,
    pub per_length: BTreeMap<GroupKey, Prf>,
    pub per_class: BTreeMap<GroupKey, Prf>,
    pub per_level: BTreeMap<GroupKey, Prf>,
    pub average_predicted_length: f64,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate(gold: &[DocSpan], predicted: &[DocSpan], labels: &[String]) -> EvalReport {
    let per_length = score_spans(gold, predicted, Grouping::Length);
    let per_class = score_spans(gold, predicted, Grouping::Class);
    let per_level = score_spans(gold, predicted, Grouping::NestedLevel);
    let overall = score_spans(gold, predicted, Grouping::Overall);
    let micro = overall.values().next().copied().unwrap_or_default();
    let macro_scores = macro_micro(&per_length)
        .map(|(ma, _)| ma)
        .unwrap_or_default();
    EvalReport {
        micro,
        macro_scores,
        per_length,
        per_class,
        per_level,
        average_predicted_length: average_length(predicted),
        confusion: confusion_matrix(gold, predicted, labels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn ds(sent: usize, start: usize, len: usize, label: &str) -> DocSpan {
        DocSpan::new(sent, Span::new(start, len, label))
    }

    #[test]
    fn perfect_prediction() {
        let gold = vec![ds(0, 0, 2, "Concept")];
        let map = score_spans(&gold, &gold, Grouping::Overall);
        let prf = map[&GroupKey::Overall];
        assert_eq!((prf.tp, prf.fp, prf.fn_), (1, 0, 0));
        assert_eq!((prf.precision(), prf.recall(), prf.f1()), (1.0, 1.0, 1.0));
    }

    #[test]
    fn half_right_prediction() {
        let gold = vec![ds(0, 0, 1, "Concept"), ds(0, 2, 1, "Concept")];
        let pred = vec![ds(0, 0, 1, "Concept"), ds(0, 3, 1, "Concept")];
        let map = score_spans(&gold, &pred, Grouping::Overall);
        let prf = map[&GroupKey::Overall];
        assert_eq!((prf.tp, prf.fp, prf.fn_), (1, 1, 1));
        assert_eq!(prf.precision(), 0.5);
        assert_eq!(prf.recall(), 0.5);
        assert_eq!(prf.f1(), 0.5);
    }

    #[test]
    fn wrong_label_counts_fp_and_fn() {
        // right interval, wrong class: fp for the predicted class, fn for
        // the gold class
        let gold = vec![ds(0, 1, 2, "Protein")];
        let pred = vec![ds(0, 1, 2, "DNA")];
        let map = score_spans(&gold, &pred, Grouping::Class);
        assert_eq!(map[&GroupKey::Class("Protein".into())].fn_, 1);
        assert_eq!(map[&GroupKey::Class("DNA".into())].fp, 1);
    }

    #[test]
    fn group_counts_sum_to_overall() {
        let gold = vec![
            ds(0, 0, 1, "A"),
            ds(0, 0, 2, "A"),
            ds(1, 3, 1, "B"),
            ds(1, 0, 3, "B"),
        ];
        let pred = vec![
            ds(0, 0, 1, "A"),
            ds(0, 1, 2, "B"),
            ds(1, 3, 1, "A"),
            ds(1, 0, 3, "B"),
        ];
        let overall = score_spans(&gold, &pred, Grouping::Overall)[&GroupKey::Overall];
        for grouping in [Grouping::Length, Grouping::Class, Grouping::NestedLevel] {
            let map = score_spans(&gold, &pred, grouping);
            let tp: usize = map.values().map(|p| p.tp).sum();
            let fp: usize = map.values().map(|p| p.fp).sum();
            let fn_: usize = map.values().map(|p| p.fn_).sum();
            assert_eq!((tp, fp, fn_), (overall.tp, overall.fp, overall.fn_));
        }
    }

    #[test]
    fn macro_micro_single_group_coincide() {
        let mut map = BTreeMap::new();
        map.insert(GroupKey::Length(1), Prf { tp: 3, fp: 1, fn_: 2 });
        let (ma, mi) = macro_micro(&map).unwrap();
        assert_eq!(ma.precision, mi.precision());
        assert_eq!(ma.recall, mi.recall());
        assert_eq!(ma.f1, mi.f1());
    }

    #[test]
    fn macro_is_dragged_down_by_zero_groups() {
        let mut map = BTreeMap::new();
        map.insert(GroupKey::Length(1), Prf { tp: 5, fp: 0, fn_: 0 });
        map.insert(GroupKey::Length(2), Prf { tp: 0, fp: 0, fn_: 3 });
        let (ma, mi) = macro_micro(&map).unwrap();
        assert_eq!(ma.f1, 0.5);
        assert!(mi.f1() > ma.f1);
    }

    #[test]
    fn macro_micro_rejects_empty_map() {
        assert_eq!(macro_micro(&BTreeMap::new()), Err(EvalError::EmptyMap));
    }

    #[test]
    fn nested_level_grouping_uses_gold_and_pred_levels() {
        // gold: (0,3) contains (0,1): levels 2 and 1
        let gold = vec![ds(0, 0, 3, "A"), ds(0, 0, 1, "A")];
        // pred: (0,1) alone (level 1 in pred set), plus spurious (2,1)
        let pred = vec![ds(0, 0, 1, "A"), ds(0, 2, 1, "A")];
        let map = score_spans(&gold, &pred, Grouping::NestedLevel);
        let l1 = map[&GroupKey::Level(1)];
        let l2 = map[&GroupKey::Level(2)];
        assert_eq!((l1.tp, l1.fp, l1.fn_), (1, 1, 0));
        assert_eq!((l2.tp, l2.fp, l2.fn_), (0, 0, 1));
    }

    #[test]
    fn swapping_gold_and_pred_swaps_p_and_r() {
        let gold = vec![ds(0, 0, 1, "A"), ds(0, 2, 2, "B"), ds(1, 1, 1, "A")];
        let pred = vec![ds(0, 0, 1, "A"), ds(0, 4, 1, "B")];
        let fwd = score_spans(&gold, &pred, Grouping::Overall)[&GroupKey::Overall];
        let rev = score_spans(&pred, &gold, Grouping::Overall)[&GroupKey::Overall];
        assert_eq!(fwd.precision(), rev.recall());
        assert_eq!(fwd.recall(), rev.precision());
        assert_eq!(fwd.f1(), rev.f1());
    }

    #[test]
    fn confusion_matrix_perfect_prediction_is_diagonal() {
        let labels = vec!["Protein".to_string(), "DNA".to_string()];
        let gold = vec![ds(0, 0, 1, "Protein"), ds(0, 2, 2, "DNA")];
        let cm = confusion_matrix(&gold, &gold, &labels);
        assert_eq!(cm.total_errors(), 0);
        let p = cm.label_index("Protein").unwrap();
        let d = cm.label_index("DNA").unwrap();
        assert_eq!(cm.count(p, p), 1);
        assert_eq!(cm.count(d, d), 1);
    }

    #[test]
    fn confusion_matrix_wrong_label_cell() {
        let labels = vec!["Protein".to_string(), "DNA".to_string()];
        let gold = vec![ds(0, 0, 2, "Protein")];
        let pred = vec![ds(0, 0, 2, "DNA")];
        let cm = confusion_matrix(&gold, &pred, &labels);
        let p = cm.label_index("Protein").unwrap();
        let d = cm.label_index("DNA").unwrap();
        assert_eq!(cm.count(p, d), 1);
        assert_eq!(cm.count(p, p), 0);
    }

    #[test]
    fn confusion_matrix_spurious_and_missed() {
        let labels = vec!["Protein".to_string()];
        let gold = vec![ds(0, 0, 1, "Protein")];
        let pred = vec![ds(0, 3, 1, "Protein")];
        let cm = confusion_matrix(&gold, &pred, &labels);
        let p = cm.label_index("Protein").unwrap();
        assert_eq!(cm.count(p, 0), 1); // missed: gold Protein, predicted none
        assert_eq!(cm.count(0, p), 1); // spurious: predicted Protein over nothing
    }

    #[test]
    fn average_length_cases() {
        assert_eq!(average_length(&[ds(0, 0, 3, "A")]), 3.0);
        assert_eq!(average_length(&[ds(0, 0, 1, "A"), ds(0, 2, 2, "A")]), 1.5);
        assert_eq!(average_length(&[]), 0.0);
    }

    #[test]
    fn f1_zero_iff_no_tp() {
        let with_tp = Prf { tp: 1, fp: 9, fn_: 9 };
        assert!(with_tp.f1() > 0.0);
        let without = Prf { tp: 0, fp: 5, fn_: 5 };
        assert_eq!(without.f1(), 0.0);
    }

    #[test]
    fn evaluate_builds_consistent_report() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let gold = vec![ds(0, 0, 1, "A"), ds(0, 0, 2, "B"), ds(1, 1, 1, "A")];
        let pred = vec![ds(0, 0, 1, "A"), ds(1, 1, 1, "B")];
        let report = evaluate(&gold, &pred, &labels);
        assert_eq!(report.micro.tp, 1);
        assert_eq!(report.micro.fp, 1);
        assert_eq!(report.micro.fn_, 2);
        let len_tp: usize = report.per_length.values().map(|p| p.tp).sum();
        assert_eq!(len_tp, report.micro.tp);
        assert_eq!(report.average_predicted_length, 1.0);
    }
}
