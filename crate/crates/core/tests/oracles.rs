//! Brute-force reference implementations checked against the library.

use std::collections::{BTreeMap, BTreeSet};

use hartype::classify::{self, best_split, fit_gbm, GbmConfig, Knn, LearnerConfig, Metric, SvmConfig};
use hartype::embeddings::negative_sampling_loss;
use hartype::evaluate::{binary_metrics, confusion, multiclass_metrics};
use hartype::lexicon::effect_size;
use hartype::matrix::DenseMatrix;
use hartype::text::tokenize_stream;
use hartype::vectorize::{fit_tfidf, Norm};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labels(c: usize) -> Vec<String> {
    (0..c).map(|i| format!("c{i}")).collect()
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class (precision, recall, f) by counting label pairs directly.
fn tally(truth: &[usize], pred: &[usize], c: usize) -> (f64, f64, f64) {
    let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count();
    let predicted = pred.iter().filter(|&&p| p == c).count();
    let actual = truth.iter().filter(|&&t| t == c).count();
    let p = rate(tp, predicted);
    let r = rate(tp, actual);
    (p, r, f1(p, r))
}

fn label_pair(max_c: usize) -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
    (2..=max_c, 1usize..=200).prop_flat_map(|(c, n)| {
        (
            Just(c),
            prop::collection::vec(0..c, n),
            prop::collection::vec(0..c, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn multiclass_metrics_match_tally((c, truth, pred) in label_pair(6)) {
        let cm = confusion(&truth, &pred, &labels(c)).unwrap();
        let m = multiclass_metrics(&cm);
        let mut fs = Vec::new();
        for (k, got) in m.per_class.iter().enumerate() {
            let (p, r, f) = tally(&truth, &pred, k);
            prop_assert!((got.precision - p).abs() <= 1e-12);
            prop_assert!((got.recall - r).abs() <= 1e-12);
            prop_assert!((got.f_score - f).abs() <= 1e-12);
            fs.push(f);
        }
        let acc = rate(truth.iter().zip(&pred).filter(|(t, p)| t == p).count(), truth.len());
        prop_assert!((m.accuracy - acc).abs() <= 1e-12);
        let micro = m.micro.unwrap();
        prop_assert_eq!(micro.precision, m.accuracy);
        prop_assert_eq!(micro.recall, m.accuracy);
        prop_assert_eq!(micro.f_score, m.accuracy);
        let macro_f = m.macro_avg.unwrap().f_score;
        let lo = fs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(macro_f >= lo - 1e-12 && macro_f <= hi + 1e-12);
    }

    #[test]
    fn binary_metrics_match_tally((_, truth, pred) in label_pair(2)) {
        let cm = confusion(&truth, &pred, &labels(2)).unwrap();
        let m = binary_metrics(&cm, 1).unwrap();
        let (p, r, f) = tally(&truth, &pred, 1);
        let tn = truth.iter().zip(&pred).filter(|&(&t, &p)| t == 0 && p == 0).count();
        let negatives = truth.iter().filter(|&&t| t == 0).count();
        prop_assert!((m.per_class[0].precision - p).abs() <= 1e-12);
        prop_assert!((m.per_class[0].recall - r).abs() <= 1e-12);
        prop_assert!((m.per_class[0].f_score - f).abs() <= 1e-12);
        prop_assert!((m.specificity.unwrap() - rate(tn, negatives)).abs() <= 1e-12);
    }

    #[test]
    fn effect_size_matches_pooled_formula(
        a in prop::collection::vec(-100.0f64..100.0, 2..40),
        b in prop::collection::vec(-100.0f64..100.0, 2..40),
        shift in -1e3f64..1e3,
    ) {
        let d = effect_size(&a, &b).unwrap();
        prop_assert!((d - cohen_d(&a, &b)).abs() <= 1e-12 * d.abs().max(1.0));
        prop_assert!((d + effect_size(&b, &a).unwrap()).abs() <= 1e-12 * d.abs().max(1.0));
        let sa: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let sb: Vec<f64> = b.iter().map(|x| x + shift).collect();
        prop_assert!((effect_size(&sa, &sb).unwrap() - d).abs() <= 1e-9 * d.abs().max(1.0));
    }
}

/// Cohen's d from per-group sample variances.
fn cohen_d(a: &[f64], b: &[f64]) -> f64 {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, var)
    };
    let (n1, m1, v1) = stats(a);
    let (n2, m2, v2) = stats(b);
    let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
    (m1 - m2) / pooled.sqrt()
}

fn word(i: usize) -> String {
    let letters = b"abcdefghijklmnopqrstuvwxyz";
    format!("q{}{}", letters[i / 26] as char, letters[i % 26] as char)
}

#[test]
fn tfidf_matches_count_times_idf() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n_docs = rng.random_range(1..=50);
        let vocab = rng.random_range(1..=30);
        let docs: Vec<Vec<String>> = (0..n_docs)
            .map(|_| (0..rng.random_range(0..12)).map(|_| word(rng.random_range(0..vocab))).collect())
            .collect();
        let streams: Vec<_> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| tokenize_stream(i.to_string(), &d.join(" ")))
            .collect();
        let model = fit_tfidf(&streams, Norm::L2).unwrap();

        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &docs {
            for w in d.iter().collect::<BTreeSet<_>>() {
                *df.entry(w).or_default() += 1;
            }
        }
        let fitted: BTreeSet<&str> = model.vocabulary().iter().map(String::as_str).collect();
        assert_eq!(fitted, df.keys().copied().collect());

        for (d, s) in docs.iter().zip(&streams) {
            let mut expected = vec![0.0; model.width()];
            for w in d {
                let idf = ((1.0 + n_docs as f64) / (1.0 + df[w.as_str()] as f64)).ln() + 1.0;
                expected[model.column(w).unwrap()] += idf;
            }
            let norm = expected.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                expected.iter_mut().for_each(|v| *v /= norm);
            }
            let got = model.transform(s);
            for (g, e) in got.to_dense().iter().zip(&expected) {
                assert!((g - e).abs() <= 1e-12, "{g} vs {e}");
            }
            let n = got.norm();
            assert!(n == 0.0 || (n - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn multinomial_nb_matches_exhaustive_bayes() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let (n, d, c) = (rng.random_range(4..30), rng.random_range(1..8), rng.random_range(2..5));
        let y: Vec<usize> = (0..n).map(|i| if i < c { i } else { rng.random_range(0..c) }).collect();
        let x = DenseMatrix::from_rows(
            &(0..n)
                .map(|_| (0..d).map(|_| rng.random_range(0..4) as f64).collect())
                .collect::<Vec<_>>(),
        );
        let alpha = 1.0;
        let model = classify::train(&LearnerConfig::NbMultinomial { alpha }, &x, &y, &labels(c)).unwrap();
        let query: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..d).map(|_| rng.random_range(0..4) as f64).collect())
            .collect();
        let scores = model.predict(&DenseMatrix::from_rows(&query)).unwrap().scores;
        for (qi, q) in query.iter().enumerate() {
            let mut joint = vec![0.0; c];
            for (k, j) in joint.iter_mut().enumerate() {
                let members: Vec<usize> = (0..n).filter(|&i| y[i] == k).collect();
                let mut totals = vec![0.0; d];
                for &i in &members {
                    for (t, v) in totals.iter_mut().zip(x.row(i)) {
                        *t += v;
                    }
                }
                let all: f64 = totals.iter().sum::<f64>() + alpha * d as f64;
                let mut p = members.len() as f64 / n as f64;
                for (f, &count) in q.iter().enumerate() {
                    p *= ((totals[f] + alpha) / all).powi(count as i32);
                }
                *j = p;
            }
            let z: f64 = joint.iter().sum();
            for k in 0..c {
                let expected = joint[k] / z;
                let got = scores.get(qi, k);
                assert!((got - expected).abs() <= 1e-10 * expected.max(1e-300), "{got} vs {expected}");
            }
        }
    }
}

fn knn_reference(points: &DenseMatrix, y: &[usize], q: &[f64], k: usize, c: usize, metric: Metric) -> Vec<f64> {
    let mut order: Vec<(f64, usize)> = (0..points.rows()).map(|i| (metric.distance(points.row(i), q), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes = vec![0.0; c];
    for &(_, i) in &order[..k] {
        votes[y[i]] += 1.0 / k as f64;
    }
    votes
}

#[test]
fn knn_matches_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..100 {
        let (n, d, c) = (rng.random_range(3..40), rng.random_range(1..5), rng.random_range(2..4));
        let k = rng.random_range(1..=n.min(7));
        let metric = if trial % 2 == 0 { Metric::Euclidean } else { Metric::Cosine };
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-3..4) as f64).collect())
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let knn = Knn::fit(&x, &y, c, k, metric).unwrap();
        for _ in 0..5 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-3..4) as f64).collect();
            let expected = knn_reference(&x, &y, &q, k, c, metric);
            let got = knn.vote_fractions(&q);
            for (g, e) in got.iter().zip(&expected) {
                assert!((g - e).abs() <= 1e-12);
            }
        }
    }
}

/// Exhaustive search over every feature and midpoint threshold.
fn split_reference(x: &DenseMatrix, t: &[f64], min_leaf: usize) -> Option<(usize, f64, f64)> {
    let n = x.rows();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x.cols() {
        let mut values: Vec<f64> = (0..n).map(|i| x.get(i, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let (left, right): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| x.get(i, f) <= thr);
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let mean = |s: &[usize]| s.iter().map(|&i| t[i]).sum::<f64>() / s.len() as f64;
            let (nl, nr) = (left.len() as f64, right.len() as f64);
            let gain = nl * nr / (nl + nr) * (mean(&left) - mean(&right)).powi(2);
            if best.is_none_or(|b| gain > b.2) {
                best = Some((f, thr, gain));
            }
        }
    }
    best
}

#[test]
fn gbm_split_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let (n, d) = (rng.random_range(2..=200), rng.random_range(1..5));
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| (rng.random_range(0..20) as f64) / 4.0).collect())
            .collect();
        let x = DenseMatrix::from_rows(&rows);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let min_leaf = rng.random_range(1..4);
        let samples: Vec<usize> = (0..n).collect();
        let got = best_split(&x, &t, &samples, min_leaf);
        let expected = split_reference(&x, &t, min_leaf);
        match (got, expected) {
            (None, None) => {}
            (Some(s), Some((f, thr, gain))) => {
                assert!((s.improvement - gain).abs() <= 1e-9 * gain.max(1.0));
                assert!(s.improvement >= 0.0);
                if (s.improvement - gain).abs() <= f64::EPSILON * gain && (s.feature, s.threshold) != (f, thr) {
                    // equal gains: the earlier candidate must win
                    assert!((s.feature, s.threshold) < (f, thr));
                }
            }
            other => panic!("split presence differs: {other:?}"),
        }
    }
}

#[test]
fn gbm_staged_loss_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let n = rng.random_range(20..120);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = rows
            .iter()
            .map(|r| usize::from(r[0] + 0.5 * r[1] + rng.random_range(-0.5..0.5) > 0.0))
            .collect();
        if y.iter().all(|&v| v == y[0]) {
            continue;
        }
        let config = GbmConfig {
            n_trees: 30,
            ..GbmConfig::default()
        };
        let (_, losses) = fit_gbm(&DenseMatrix::from_rows(&rows), &y, 2, &config).unwrap();
        assert_eq!(losses.len(), 31);
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn ns_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut v = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.8..0.8)).collect() };
    for _ in 0..20 {
        let h = v(5);
        let pos = v(5);
        let negs = vec![v(5), v(5), v(5)];
        let g = negative_sampling_loss(&h, &pos, &negs);
        let eps = 1e-6;
        let check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * eps);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(rel <= 1e-4, "analytic {analytic} numeric {numeric}");
        };
        for i in 0..5 {
            let (mut hp, mut hm) = (h.clone(), h.clone());
            hp[i] += eps;
            hm[i] -= eps;
            check(
                g.hidden[i],
                negative_sampling_loss(&hp, &pos, &negs).loss,
                negative_sampling_loss(&hm, &pos, &negs).loss,
            );
            let (mut pp, mut pm) = (pos.clone(), pos.clone());
            pp[i] += eps;
            pm[i] -= eps;
            check(
                g.positive[i],
                negative_sampling_loss(&h, &pp, &negs).loss,
                negative_sampling_loss(&h, &pm, &negs).loss,
            );
            let (mut np, mut nm) = (negs.clone(), negs.clone());
            np[1][i] += eps;
            nm[1][i] -= eps;
            check(
                g.negatives[1][i],
                negative_sampling_loss(&h, &pos, &np).loss,
                negative_sampling_loss(&h, &pos, &nm).loss,
            );
        }
    }
}

#[test]
fn one_vs_rest_svm_is_label_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = 4;
    let centres: Vec<Vec<f64>> = (0..c).map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
    let y: Vec<usize> = (0..80).map(|i| i % c).collect();
    let rows: Vec<Vec<f64>> = y
        .iter()
        .map(|&k| centres[k].iter().map(|m| m + rng.random_range(-1.0..1.0)).collect())
        .collect();
    let x = DenseMatrix::from_rows(&rows);
    let perm = [2, 0, 3, 1];
    let y_perm: Vec<usize> = y.iter().map(|&k| perm[k]).collect();
    let config = LearnerConfig::LinearSvm(SvmConfig::default());
    let a = classify::train(&config, &x, &y, &labels(c)).unwrap().predict(&x).unwrap();
    let b = classify::train(&config, &x, &y_perm, &labels(c)).unwrap().predict(&x).unwrap();
    for i in 0..x.rows() {
        assert_eq!(perm[a.labels[i]], b.labels[i]);
        for k in 0..c {
            assert_eq!(a.scores.get(i, k), b.scores.get(i, perm[k]));
        }
    }
}
