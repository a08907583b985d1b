use std::io::{BufReader, Cursor};

use nalgebra::DMatrix;
use plurvec::analogy::three_cos_avg;
use plurvec::classify::{assign_folds, weighted_f, CvSpec};
use plurvec::dlcomp::{recall_overlap, triphone_set, triphones_of};
use plurvec::fracss::{fit_inverse, fit_linear_map};
use plurvec::knn::Searcher;
use plurvec::shifts::{avg_shift, mean_of_shifts, Pair, PairSet};
use plurvec::stats::{average_ranks, wilcoxon_signed_rank, Alternative};
use plurvec::vecspace::{angle_to_axis, euclidean, norm};
use plurvec::{AxisRef, CandidatePool, EmbeddingTable, Metric};
use proptest::prelude::*;

fn table_strategy(max_words: usize, dim: usize) -> impl Strategy<Value = EmbeddingTable> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 2..=max_words).prop_map(|rows| {
        let words = (0..rows.len()).map(|i| format!("w{i}")).collect();
        EmbeddingTable::from_rows(words, rows).unwrap()
    })
}

fn pairs_of(table: &EmbeddingTable) -> PairSet {
    let pairs = (0..table.len() / 2)
        .map(|i| Pair {
            singular: 2 * i,
            plural: 2 * i + 1,
            class: None,
        })
        .collect();
    PairSet::new(pairs, "prop").unwrap()
}

proptest! {
    #[test]
    fn difference_of_means_is_mean_of_differences(table in table_strategy(40, 7)) {
        let pairs = pairs_of(&table);
        let a = avg_shift(&pairs, &table).unwrap();
        let b = mean_of_shifts(&pairs, &table).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn three_cos_avg_moves_every_singular_by_the_shift_length(table in table_strategy(30, 5)) {
        let pairs = pairs_of(&table);
        let shift = avg_shift(&pairs, &table).unwrap();
        for p in pairs.pairs() {
            let sg = table.row(p.singular);
            let pred = three_cos_avg(&shift, sg).unwrap();
            prop_assert!((euclidean(&pred, sg).unwrap() - norm(&shift)).abs() <= 1e-9);
        }
    }

    #[test]
    fn angle_is_scale_invariant_and_bounded(
        v in prop::collection::vec(-5.0f64..5.0, 4),
        scale in 0.01f64..100.0,
        axis in 0usize..4,
    ) {
        prop_assume!(norm(&v) > 1e-6);
        let axis = AxisRef::new(4, axis).unwrap();
        let a = angle_to_axis(&v, axis).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let b = angle_to_axis(&scaled, axis).unwrap();
        prop_assert!((0.0..=180.0).contains(&a));
        prop_assert!((a - b).abs() <= 1e-9);
        let flipped: Vec<f64> = v.iter().map(|x| -x).collect();
        prop_assert!((angle_to_axis(&flipped, axis).unwrap() - (180.0 - a)).abs() <= 1e-9);
    }

    #[test]
    fn top_k_agrees_with_rank_of(table in table_strategy(60, 4), q in prop::collection::vec(-10.0f64..10.0, 4)) {
        prop_assume!(norm(&q) > 1e-6);
        for metric in [Metric::Cosine, Metric::Euclidean] {
            let s = Searcher::new(&table, metric);
            let pool = CandidatePool::all(table.len());
            let list = s.top_k(&q, table.len(), &pool).unwrap();
            for (i, e) in list.entries.iter().enumerate() {
                let r = s.rank_of(&q, e.id, &pool, &[]).unwrap();
                // ties share the better rank
                prop_assert!(r.rank <= i + 1);
                prop_assert_eq!(r.candidate_count, table.len());
            }
            let ranks: Vec<usize> = (0..table.len()).map(|id| s.rank_of(&q, id, &pool, &[]).unwrap().rank).collect();
            prop_assert!(ranks.contains(&1));
        }
    }

    #[test]
    fn top_k_prefixes_are_consistent(table in table_strategy(50, 3), q in prop::collection::vec(-10.0f64..10.0, 3)) {
        let s = Searcher::new(&table, Metric::Euclidean);
        let pool = CandidatePool::all(table.len());
        let full = s.top_k(&q, table.len(), &pool).unwrap();
        for k in 1..=table.len() {
            let part = s.top_k(&q, k, &pool).unwrap();
            prop_assert_eq!(&part.entries[..], &full.entries[..k]);
        }
    }

    #[test]
    fn weighted_f_is_bounded_and_perfect_only_when_exact(
        gold in prop::collection::vec(0u8..4, 1..60),
        noise in prop::collection::vec(0u8..4, 60),
    ) {
        let gold: Vec<String> = gold.iter().map(|g| format!("c{g}")).collect();
        let pred: Vec<String> = gold.iter().zip(&noise).map(|(g, n)| if *n == 0 { "c9".into() } else { g.clone() }).collect();
        let s = weighted_f(&pred, &gold).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.weighted_f));
        prop_assert!((0.0..=1.0).contains(&s.accuracy));
        prop_assert_eq!(s.weighted_f == 1.0, pred == gold);
        prop_assert_eq!(weighted_f(&gold, &gold).unwrap().weighted_f, 1.0);
    }

    #[test]
    fn folds_balance_each_class(labels in prop::collection::vec(0u8..3, 10..80), seed in any::<u64>()) {
        let labels: Vec<String> = labels.iter().map(|l| format!("c{l}")).collect();
        let spec = CvSpec { k: 5, seed, stratified: true };
        let folds = assign_folds(&labels, &spec).unwrap();
        prop_assert_eq!(folds.len(), labels.len());
        for class in ["c0", "c1", "c2"] {
            let mut counts = [0usize; 5];
            for (l, &f) in labels.iter().zip(&folds) {
                if l == class {
                    counts[f] += 1;
                }
            }
            prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
        prop_assert_eq!(assign_folds(&labels, &spec).unwrap(), folds);
    }

    #[test]
    fn average_ranks_sum_to_triangular_number(values in prop::collection::vec(-3i32..3, 1..40)) {
        let values: Vec<f64> = values.into_iter().map(f64::from).collect();
        let n = values.len() as f64;
        let sum: f64 = average_ranks(&values).iter().sum();
        prop_assert!((sum - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn one_sided_wilcoxon_tails_cover_the_support(diffs in prop::collection::vec(-5i32..6, 1..15)) {
        let diffs: Vec<f64> = diffs.into_iter().map(f64::from).collect();
        prop_assume!(diffs.iter().any(|&d| d != 0.0));
        let g = wilcoxon_signed_rank(&diffs, Alternative::Greater).unwrap().p_value;
        let l = wilcoxon_signed_rank(&diffs, Alternative::Less).unwrap().p_value;
        let t = wilcoxon_signed_rank(&diffs, Alternative::TwoSided).unwrap().p_value;
        prop_assert!(g + l >= 1.0 - 1e-12);
        prop_assert!((0.0..=1.0).contains(&t));
        prop_assert!((t - (2.0 * g.min(l)).min(1.0)).abs() < 1e-12);
    }

    #[test]
    fn triphones_cover_the_padded_word(phones in prop::collection::vec(prop::sample::select(vec!["AA", "B", "K", "IY", "S", "T"]), 1..10)) {
        let tri = triphones_of(&phones).unwrap();
        prop_assert!(!tri.is_empty() && tri.len() <= phones.len());
        prop_assert!(tri[0].starts_with("#-"));
        prop_assert!(tri.iter().all(|t| t.split('-').count() == 3));
        let set = triphone_set(&phones).unwrap();
        prop_assert_eq!(recall_overlap(&set, &set).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn recall_never_exceeds_overlap(
        a in prop::collection::vec(prop::sample::select(vec!["AA", "B", "K", "IY"]), 1..6),
        b in prop::collection::vec(prop::sample::select(vec!["AA", "B", "K", "IY"]), 1..6),
    ) {
        let (r, o) = recall_overlap(&triphone_set(&a).unwrap(), &triphone_set(&b).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&o));
        prop_assert!(r <= o + 1e-15);
    }

    #[test]
    fn exact_linear_maps_are_recovered(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (t, d) = (30, 6);
        let x = DMatrix::from_fn(t, d, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(d, d, |i, j| if i == j { 2.0 } else { 0.0 } + rng.random_range(-0.3..0.3));
        let y = &x * &b;
        let fwd = fit_linear_map(&x, &y, 0.0).unwrap();
        prop_assert!((&fwd.matrix - &b).norm() <= 1e-9 * b.norm());
        let inv = fit_inverse(&x, &y, 0.0).unwrap();
        let id = &b * &inv.matrix;
        prop_assert!((id - DMatrix::identity(d, d)).norm() <= 1e-8);
    }

    #[test]
    fn text_tables_round_trip(table in table_strategy(20, 3)) {
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let back = EmbeddingTable::parse(BufReader::new(Cursor::new(buf)), Some(3)).unwrap();
        prop_assert_eq!(back.words(), table.words());
        for i in 0..table.len() {
            prop_assert_eq!(back.row(i), table.row(i));
        }
    }
}
