use gode_core::{
    cousin_partition, gauge_sequence, is_delta_fine, split_at_tags, Gauge, GaugeBase, TagPolicy,
};
use proptest::prelude::*;

fn piecewise_gauge() -> impl Strategy<Value = Gauge> {
    (
        prop::collection::vec((0.05f64..1.0, 1e-3f64..0.5), 1..6),
        prop::collection::vec((0.0f64..1.0, 1e-4f64..0.2), 0..=3),
    )
        .prop_map(|(pieces, anchors)| {
            let total: f64 = pieces.iter().map(|p| p.0).sum();
            let mut t = 0.0;
            let mut base = Vec::new();
            for (i, (w, c)) in pieces.iter().enumerate() {
                let end = if i + 1 == pieces.len() {
                    1.0
                } else {
                    t + w / total
                };
                base.push((t, end, *c));
                t = end;
            }
            let mut g = Gauge::new(0.0, 1.0, GaugeBase::Piecewise(base)).unwrap();
            for (at, r) in anchors {
                if !g.is_anchor(at) {
                    g = g.with_anchor(at, r).unwrap();
                }
            }
            g
        })
}

fn policy() -> impl Strategy<Value = TagPolicy> {
    prop_oneof![Just(TagPolicy::LeftTag), Just(TagPolicy::FreeTag)]
}

proptest! {
    #[test]
    fn cousin_partitions_are_fine(g in piecewise_gauge(), policy in policy()) {
        let p = cousin_partition(&g, policy).unwrap();
        let check = is_delta_fine(&p, &g).unwrap();
        prop_assert!(check.fine, "{:?}", check);
        prop_assert!(check.missing_anchors.is_empty());
        prop_assert_eq!(p.start(), 0.0);
        prop_assert_eq!(p.end(), 1.0);
    }

    #[test]
    fn splitting_at_tags_keeps_fineness(g in piecewise_gauge(), policy in policy()) {
        let p = cousin_partition(&g, policy).unwrap();
        let q = split_at_tags(&p);
        prop_assert!(is_delta_fine(&q, &g).unwrap().fine);
        prop_assert!(q.cells().iter().all(|c| c.tag == c.left || c.tag == c.right));
        prop_assert!(q.len() >= p.len() && q.len() <= 2 * p.len());
    }

    #[test]
    fn refined_gauges_give_finer_meshes(g in piecewise_gauge(), k in 1u32..5) {
        let coarse = cousin_partition(&gauge_sequence(&g, k - 1), TagPolicy::LeftTag).unwrap();
        let fine_gauge = gauge_sequence(&g, k);
        let fine = cousin_partition(&fine_gauge, TagPolicy::LeftTag).unwrap();
        prop_assert!(is_delta_fine(&fine, &fine_gauge).unwrap().fine);
        prop_assert!(is_delta_fine(&fine, &gauge_sequence(&g, k - 1)).unwrap().fine);
        prop_assert!(fine.mesh() <= coarse.mesh());
    }

    #[test]
    fn left_policy_tags_left_except_anchors(g in piecewise_gauge()) {
        let p = cousin_partition(&g, TagPolicy::LeftTag).unwrap();
        for c in p.cells() {
            prop_assert!(c.tag == c.left || g.is_anchor(c.tag));
        }
    }
}
