use std::collections::BTreeMap;

use proptest::prelude::*;
use taxozsl::data::{ckl_expand, compute_centers, tfidf_featurize, Dataset};
use taxozsl::eval::{
    ausuc_from_predictions, calibration_grid, classify, harmonic_mean, mean_average_precision,
    Prediction, SynthesizedBank,
};
use taxozsl::gan::{tr_loss, tr_term, TrWeights};
use taxozsl::numerics::{Activation, MlpParams, SeededRng, Tensor};
use taxozsl::taxonomy::{Level, SpeciesId, Taxonomy};

fn matrix(rows: std::ops::Range<usize>, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0f64..5.0, cols), rows)
}

/// Species count, genus of each species and family of each genus, all dense.
fn arb_taxonomy() -> impl Strategy<Value = Taxonomy> {
    (1usize..=12).prop_flat_map(|n| {
        (prop::collection::vec(0usize..n, n), prop::collection::vec(0usize..n, n)).prop_map(
            move |(genus, family)| {
                let recs: Vec<(usize, usize, usize)> =
                    (0..n).map(|s| (s, genus[s], family[genus[s]])).collect();
                Taxonomy::build(&recs).unwrap()
            },
        )
    })
}

fn arb_dataset() -> impl Strategy<Value = (Taxonomy, Dataset)> {
    (arb_taxonomy(), any::<u64>()).prop_map(|(t, seed)| {
        let mut rng = SeededRng::new(seed);
        let n = t.num_species();
        let rows = 1 + rng.below(25);
        let labels: Vec<SpeciesId> = (0..rows).map(|_| rng.below(n)).collect();
        let mut sem = BTreeMap::new();
        for s in 0..n {
            if labels.contains(&s) || rng.uniform() < 0.5 {
                sem.insert(s, rng.normal_vec(2));
            }
        }
        let x = Tensor::from_vec(rows, 3, rng.normal_vec(rows * 3)).unwrap();
        (t, Dataset::new(x, labels, sem).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ckl_pair_counts_nest((t, d) in arb_dataset()) {
        let count = |l| ckl_expand(&d, &t, l).unwrap().len();
        let (s, g, f) = (count(Level::Species), count(Level::Genus), count(Level::Family));
        prop_assert_eq!(s, d.len());
        prop_assert!(d.len() <= g && g <= f);
    }

    #[test]
    fn centers_lie_in_their_node_box((t, d) in arb_dataset()) {
        let table = compute_centers(&d, &t).unwrap();
        for level in Level::ALL {
            for (node, c) in table.nodes(level) {
                let members: Vec<usize> = (0..d.len())
                    .filter(|&i| t.node_of(d.label(i), level).unwrap() == node)
                    .collect();
                prop_assert_eq!(members.len(), c.count);
                for (j, m) in c.mean.iter().enumerate() {
                    let lo = members.iter().map(|&i| d.x(i)[j]).fold(f64::INFINITY, f64::min);
                    let hi = members.iter().map(|&i| d.x(i)[j]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(*m >= lo - 1e-12 && *m <= hi + 1e-12);
                }
            }
        }
    }

    #[test]
    fn tfidf_ignores_token_order(
        docs in prop::collection::vec(prop::collection::vec("[a-e]{1,3}", 1..12), 1..5),
        seed in any::<u64>(),
    ) {
        let corpus: BTreeMap<SpeciesId, Vec<String>> = docs.iter().cloned().enumerate().collect();
        let mut rng = SeededRng::new(seed);
        let shuffled: BTreeMap<SpeciesId, Vec<String>> = docs
            .into_iter()
            .map(|mut d| { rng.shuffle(&mut d); d })
            .enumerate()
            .collect();
        let a = tfidf_featurize(&corpus, 50).unwrap();
        let b = tfidf_featurize(&shuffled, 50).unwrap();
        prop_assert_eq!(&a.vocabulary, &b.vocabulary);
        for (x, y) in a.vectors.values().zip(b.vectors.values()) {
            for (p, q) in x.iter().zip(y) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mlp_forward_is_row_independent(rows in matrix(1..6, 3), seed in any::<u64>()) {
        let mut net = MlpParams::new(&[3, 5, 2], Activation::leaky(), Activation::Identity).unwrap();
        net.init_normal(&mut SeededRng::new(seed), 0.7);
        let batch = Tensor::from_rows(&rows).unwrap();
        let (out, _) = net.forward(&batch).unwrap();
        for (i, r) in rows.iter().enumerate() {
            let (one, _) = net.forward(&Tensor::from_rows(&[r]).unwrap()).unwrap();
            prop_assert_eq!(one.row(0), out.row(i));
        }
    }

    #[test]
    fn tr_loss_is_linear(s in 0.0f64..10.0, g in 0.0f64..10.0, f in 0.0f64..10.0, a in 0.0f64..10.0, wi in 0usize..=10, wj in 0usize..=10) {
        prop_assume!(wi + wj <= 10);
        let w = TrWeights::new(wi as f64 / 10.0, wj as f64 / 10.0, (10 - wi - wj) as f64 / 10.0).unwrap();
        let scaled = tr_loss(a * s, a * g, a * f, &w);
        let base = a * tr_loss(s, g, f, &w);
        prop_assert!((scaled - base).abs() <= 1e-12 * (1.0 + base.abs()));
    }

    #[test]
    fn tr_term_ignores_pair_order(rows in matrix(1..8, 3), seed in any::<u64>()) {
        let n = rows.len();
        let mut rng = SeededRng::new(seed);
        let centers: Vec<Vec<f64>> = (0..n).map(|_| rng.normal_vec(3)).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let pick = |m: &[Vec<f64>]| Tensor::from_rows(&perm.iter().map(|&i| m[i].clone()).collect::<Vec<_>>()).unwrap();
        let a = tr_term(&Tensor::from_rows(&rows).unwrap(), &Tensor::from_rows(&centers).unwrap()).unwrap();
        let b = tr_term(&pick(&rows), &pick(&centers)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn knn_is_translation_invariant(
        bank in matrix(2..20, 2),
        query in prop::collection::vec(-5.0f64..5.0, 2),
        shift in prop::collection::vec(-50.0f64..50.0, 2),
        k in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = SeededRng::new(seed);
        let labels: Vec<SpeciesId> = (0..bank.len()).map(|_| rng.below(3)).collect();
        let moved: Vec<Vec<f64>> = bank.iter().map(|r| vec![r[0] + shift[0], r[1] + shift[1]]).collect();
        let a = classify(&SynthesizedBank::new(Tensor::from_rows(&bank).unwrap(), labels.clone()).unwrap(), &query, k).unwrap();
        let q2 = [query[0] + shift[0], query[1] + shift[1]];
        let b = classify(&SynthesizedBank::new(Tensor::from_rows(&moved).unwrap(), labels).unwrap(), &q2, k).unwrap();
        let order = |p: &Prediction| {
            let mut idx: Vec<usize> = (0..p.scores.len()).collect();
            idx.sort_by(|&i, &j| p.scores[j].total_cmp(&p.scores[i]));
            idx
        };
        // rounding in the shifted coordinates can only matter at near-ties
        let gaps = |p: &Prediction| {
            let mut s = p.scores.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
        };
        prop_assume!(gaps(&a) > 1e-9);
        prop_assert_eq!(a.label, b.label);
        prop_assert_eq!(order(&a), order(&b));
    }

    #[test]
    fn ausuc_survives_positive_affine_rescaling(
        n_seen in 1usize..4,
        n_unseen in 1usize..4,
        queries in 2usize..40,
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let mut rng = SeededRng::new(seed);
        let classes: Vec<SpeciesId> = (0..n_seen + n_unseen).collect();
        let mut seen = (Vec::new(), Vec::new());
        let mut unseen = (Vec::new(), Vec::new());
        for q in 0..queries.max(classes.len()) {
            let y = if q < classes.len() { q } else { rng.below(classes.len()) };
            let scores: Vec<f64> = classes.iter().map(|&c| -rng.uniform() * 3.0 + if c == y { 1.0 } else { 0.0 }).collect();
            let side = if y < n_seen { &mut seen } else { &mut unseen };
            side.0.push(y);
            side.1.push(Prediction { label: 0, scores });
        }
        let rescale = |ps: &[Prediction]| -> Vec<Prediction> {
            ps.iter().map(|p| Prediction { label: p.label, scores: p.scores.iter().map(|s| scale * s + shift).collect() }).collect()
        };
        let area = |s: &[Prediction], u: &[Prediction]| {
            let seen_classes: Vec<SpeciesId> = (0..n_seen).collect();
            let grid = calibration_grid(&classes, &seen_classes, s.iter().chain(u), 201);
            ausuc_from_predictions(&classes, (&seen.0, s), (&unseen.0, u), &grid).unwrap().area
        };
        let a = area(&seen.1, &unseen.1);
        let b = area(&rescale(&seen.1), &rescale(&unseen.1));
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn harmonic_mean_is_below_the_arithmetic_mean(u in 0.0f64..100.0, s in 0.0f64..100.0) {
        prop_assume!(u + s > 0.0);
        let h = harmonic_mean(u, s).unwrap();
        let a = (u + s) / 2.0;
        prop_assert!(h <= a + 1e-12 * a);
        if (u - s).abs() > 1e-6 {
            prop_assert!(h < a);
        }
        prop_assert!((harmonic_mean(u, u).unwrap_or(0.0) - u).abs() <= 1e-12 * (1.0 + u));
    }

    #[test]
    fn map_is_one_when_relevant_items_lead(
        counts in prop::collection::vec(1usize..8, 1..5),
        fraction_idx in 0usize..3,
    ) {
        // each class's samples sit on its bank point; classes are far apart
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for j in 0..n {
                rows.push(vec![c as f64 * 100.0, j as f64 * 0.01]);
                labels.push(c);
            }
        }
        let sem = (0..counts.len()).map(|c| (c, vec![1.0])).collect();
        let gallery = Dataset::new(Tensor::from_rows(&rows).unwrap(), labels, sem).unwrap();
        let centers: Vec<Vec<f64>> = (0..counts.len()).map(|c| vec![c as f64 * 100.0, 0.0]).collect();
        let bank = SynthesizedBank::new(Tensor::from_rows(&centers).unwrap(), (0..counts.len()).collect()).unwrap();
        let classes: Vec<SpeciesId> = (0..counts.len()).collect();
        let f = [0.25, 0.5, 1.0][fraction_idx];
        let (map, _) = mean_average_precision(&bank, &classes, &gallery, f).unwrap();
        prop_assert_eq!(map, 1.0);
    }
}
