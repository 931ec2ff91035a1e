//! Property tests: codec roundtrips, nesting-level semantics against a
//! brute-force oracle, softmax invariants, and metric consistency against
//! hand enumeration.

use std::collections::BTreeSet;

use proptest::prelude::*;

use nestag_core::evaluation::{
    average_length, confusion_matrix, macro_micro, score_spans, DocSpan, GroupKey, Grouping,
};
use nestag_core::numerics::{GradientTape, Tensor};
use nestag_core::spancodec::{assign_nested_levels, decode_spans, encode_bo, Span};

const LABELS: [&str; 3] = ["Concept", "Protein", "DNA"];

/// Random span set over a sentence of length `n` with spans up to `max_m`
/// tokens; at most one label per (start, len) so the set is a valid gold.
fn arb_span_set(n: usize, max_m: usize, max_spans: usize) -> impl Strategy<Value = Vec<Span>> {
    let span = (0..n, 1..=max_m.min(n), 0..LABELS.len());
    proptest::collection::vec(span, 0..=max_spans).prop_map(move |raw| {
        let mut seen = BTreeSet::new();
        let mut spans = Vec::new();
        for (start, len, label) in raw {
            let len = len.min(n - start);
            if len == 0 {
                continue;
            }
            if seen.insert((start, len)) {
                spans.push(Span::new(start, len, LABELS[label]));
            }
        }
        spans
    })
}

proptest! {
    #[test]
    fn codec_roundtrip_is_exact(
        n in 1usize..=30,
        m in 1usize..=7,
        seed_spans in arb_span_set(30, 7, 24),
    ) {
        let spans: Vec<Span> = seed_spans
            .into_iter()
            .filter(|s| s.end() <= n && s.len <= m)
            .collect();
        let rows = encode_bo(&spans, n, m).unwrap();
        prop_assert_eq!(rows.len(), m);
        let mut expected: Vec<Span> = spans.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        expected.sort();
        prop_assert_eq!(decode_spans(&rows), expected);
    }

    #[test]
    fn encode_never_places_begin_where_span_cannot_fit(
        n in 1usize..=30,
        seed_spans in arb_span_set(30, 7, 24),
    ) {
        let spans: Vec<Span> = seed_spans.into_iter().filter(|s| s.end() <= n).collect();
        let rows = encode_bo(&spans, n, 7).unwrap();
        for row in &rows {
            for (i, tag) in row.tags.iter().enumerate() {
                if matches!(tag, nestag_core::Tag::Begin(_)) {
                    prop_assert!(i + row.word_len <= n);
                }
            }
        }
    }
}

/// Longest strict-containment chain ending at `target`, enumerated
/// recursively; the independent oracle for nested levels.
fn chain_depth(intervals: &[(usize, usize)], target: (usize, usize)) -> usize {
    let strictly_inside = |inner: (usize, usize), outer: (usize, usize)| {
        outer.0 <= inner.0 && inner.0 + inner.1 <= outer.0 + outer.1 && inner != outer
    };
    1 + intervals
        .iter()
        .filter(|&&other| strictly_inside(other, target))
        .map(|&other| chain_depth(intervals, other))
        .max()
        .unwrap_or(0)
}

proptest! {
    #[test]
    fn nested_levels_match_bruteforce_chains(spans in arb_span_set(16, 7, 12)) {
        let assigned = assign_nested_levels(&spans);
        let intervals: Vec<(usize, usize)> = assigned
            .iter()
            .map(|ns| (ns.span.start, ns.span.len))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for ns in &assigned {
            let expected = chain_depth(&intervals, (ns.span.start, ns.span.len));
            prop_assert_eq!(ns.level, expected, "span {:?}", ns.span);
        }
    }

    #[test]
    fn nested_levels_are_monotone_under_containment(spans in arb_span_set(16, 7, 12)) {
        let assigned = assign_nested_levels(&spans);
        for a in &assigned {
            let mut contains_any = false;
            for b in &assigned {
                if a.span.strictly_contains(&b.span) {
                    contains_any = true;
                    prop_assert!(a.level > b.level);
                }
            }
            if a.level == 1 {
                prop_assert!(!contains_any, "level-1 span contains another span");
            }
            prop_assert!(a.level <= 7);
        }
    }
}

proptest! {
    /// With inputs and shift on a coarse dyadic grid every sum is exact,
    /// so max-subtraction makes the row-shifted softmax bitwise equal.
    #[test]
    fn softmax_invariant_under_row_shift(
        grid in proptest::collection::vec(-2048i32..=2048, 2..=8),
        shift_grid in -2048i32..=2048,
    ) {
        let scale = 1.0 / 256.0;
        let row: Vec<f64> = grid.iter().map(|&g| g as f64 * scale).collect();
        let shift = shift_grid as f64 * scale;
        let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();

        let mut tape = GradientTape::new();
        let len = row.len();
        let a = tape.constant(Tensor::new(vec![1, len], row).unwrap());
        let b = tape.constant(Tensor::new(vec![1, len], shifted).unwrap());
        let sa = tape.softmax_rows(a).unwrap();
        let sb = tape.softmax_rows(b).unwrap();
        let bits_a: Vec<u64> = tape.value(sa).data().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u64> = tape.value(sb).data().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(bits_a, bits_b);

        let total: f64 = tape.value(sa).data().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }
}

fn arb_doc_spans(max: usize) -> impl Strategy<Value = Vec<DocSpan>> {
    proptest::collection::vec((0usize..3, 0usize..8, 1usize..4, 0..LABELS.len()), 0..=max)
        .prop_map(|raw| {
            raw.into_iter()
                .map(|(sent, start, len, label)| {
                    DocSpan::new(sent, Span::new(start, len, LABELS[label]))
                })
                .collect()
        })
}

proptest! {
    #[test]
    fn scores_match_hand_enumeration(
        gold in arb_doc_spans(20),
        pred in arb_doc_spans(20),
    ) {
        let gold_set: BTreeSet<DocSpan> = gold.iter().cloned().collect();
        let pred_set: BTreeSet<DocSpan> = pred.iter().cloned().collect();
        let tp = pred_set.iter().filter(|p| gold_set.contains(p)).count();
        let fp = pred_set.len() - tp;
        let fn_ = gold_set.len() - tp;

        let overall = score_spans(&gold, &pred, Grouping::Overall);
        if gold_set.is_empty() && pred_set.is_empty() {
            prop_assert!(overall.is_empty());
        } else {
            let prf = overall[&GroupKey::Overall];
            prop_assert_eq!((prf.tp, prf.fp, prf.fn_), (tp, fp, fn_));
        }

        // every grouping axis pools back to the same counts
        for grouping in [Grouping::Length, Grouping::Class, Grouping::NestedLevel] {
            let map = score_spans(&gold, &pred, grouping);
            let pooled_tp: usize = map.values().map(|p| p.tp).sum();
            let pooled_fp: usize = map.values().map(|p| p.fp).sum();
            let pooled_fn: usize = map.values().map(|p| p.fn_).sum();
            prop_assert_eq!((pooled_tp, pooled_fp, pooled_fn), (tp, fp, fn_));
            if !map.is_empty() {
                let (_, micro) = macro_micro(&map).unwrap();
                prop_assert_eq!((micro.tp, micro.fp, micro.fn_), (tp, fp, fn_));
            }
        }

        // confusion matrix totals: every distinct interval appears once
        let cm = confusion_matrix(&gold, &pred, &["Concept".to_string()]);
        let intervals: BTreeSet<(usize, usize, usize)> = gold_set
            .iter()
            .chain(pred_set.iter())
            .map(|ds| (ds.sentence, ds.span.start, ds.span.len))
            .collect();
        let mut cell_total = 0;
        for g in 0..cm.size() {
            for p in 0..cm.size() {
                cell_total += cm.count(g, p);
            }
        }
        prop_assert_eq!(cell_total, intervals.len());

        // average length against direct computation
        let expected_avg = if pred_set.is_empty() {
            0.0
        } else {
            pred_set.iter().map(|d| d.span.len as f64).sum::<f64>() / pred_set.len() as f64
        };
        prop_assert!((average_length(&pred) - expected_avg).abs() < 1e-12);
    }

    #[test]
    fn swapping_gold_and_pred_exchanges_p_and_r(
        gold in arb_doc_spans(15),
        pred in arb_doc_spans(15),
    ) {
        let fwd = score_spans(&gold, &pred, Grouping::Overall);
        let rev = score_spans(&pred, &gold, Grouping::Overall);
        match (fwd.get(&GroupKey::Overall), rev.get(&GroupKey::Overall)) {
            (Some(f), Some(r)) => {
                prop_assert_eq!(f.precision(), r.recall());
                prop_assert_eq!(f.recall(), r.precision());
                prop_assert_eq!(f.f1(), r.f1());
            }
            (None, None) => {}
            _ => prop_assert!(false, "one side empty, the other not"),
        }
    }

    #[test]
    fn f1_bounds_hold(gold in arb_doc_spans(12), pred in arb_doc_spans(12)) {
        for (_, prf) in score_spans(&gold, &pred, Grouping::Length) {
            prop_assert!((0.0..=1.0).contains(&prf.f1()));
            prop_assert_eq!(prf.f1() == 0.0, prf.tp == 0);
        }
    }
}
