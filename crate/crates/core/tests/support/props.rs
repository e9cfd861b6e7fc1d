use std::collections::HashSet;

use ban_evasion::analysis::{classify_success, pearson, student_t_p_value, welch_test, Success};
use ban_evasion::corpus::{Account, Corpus};
use ban_evasion::eval::{dedupe_negatives, mrr, negative_overlap, recall_at_k, roc_auc, Anchored, RankedList};
use ban_evasion::model::{sigmoid, LogisticModel, StandardizationStats, TrainConfig};
use ban_evasion::pairing::EvasionPair;
use ban_evasion::textstats::{
    cosine, embed, jaccard, liwc_profile, normalized_levenshtein, EmbeddingProvider, Lexicon, TrigramEmbedder,
    TRIGRAM_DIM,
};
use proptest::prelude::*;
use proptest::test_runner::{TestCaseResult, TestRunner};

pub const CASES: u32 = 10_000;

/// Runs `test` on `CASES` generated values; the error names the minimal failing input.
fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> TestCaseResult) -> Result<(), String> {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn small_set() -> impl Strategy<Value = HashSet<u8>> {
    prop::collection::hash_set(0u8..30, 0..15)
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    prop::collection::vec((-20i32..20, any::<bool>()), 2..60).prop_filter_map("needs both classes", |v| {
        let pos = v.iter().filter(|(_, y)| *y).count();
        (pos > 0 && pos < v.len()).then(|| {
            (
                v.iter().map(|(s, _)| *s as f64).collect(),
                v.iter().map(|(_, y)| if *y { 1.0 } else { 0.0 }).collect(),
            )
        })
    })
}

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec![
        "i", "we", "the", "of", "in", "fuck", "lol", "happy", "sad", "was", "think", "friend", "page", "edit", "sex",
        "they", "because", "damn", "love", "xyzzy",
    ])
    .prop_map(str::to_string)
}

pub fn levenshtein_bounds_symmetry_identity() -> Result<(), String> {
    check(("[a-c_0-9]{0,12}", "[a-c_0-9]{0,12}"), |(a, b)| {
        let d = normalized_levenshtein(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, normalized_levenshtein(&b, &a));
        prop_assert_eq!(d == 0.0, a == b);
        Ok(())
    })
}

pub fn jaccard_bounds_symmetry_identity() -> Result<(), String> {
    check((small_set(), small_set()), |(a, b)| {
        let j = jaccard(&a, &b);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, jaccard(&b, &a));
        prop_assert_eq!(j == 1.0, a == b && !a.is_empty());
        Ok(())
    })
}

pub fn jaccard_shrinks_as_symmetric_difference_grows() -> Result<(), String> {
    check((prop::collection::hash_set(0u16..100, 1..10), prop::collection::vec(100u16..200, 0..10), 0usize..10), |(core, extra, split)| {
        // Adding non-shared elements one at a time keeps the intersection fixed.
        let mut a = core.clone();
        let mut b = core.clone();
        let mut last = jaccard(&a, &b);
        for (i, x) in extra.iter().enumerate() {
            if i < split { a.insert(*x); } else { b.insert(*x + 100); }
            let j = jaccard(&a, &b);
            prop_assert!(j <= last);
            last = j;
        }
        Ok(())
    })
}

pub fn profile_values_are_shares_and_concatenation_is_weighted_mean() -> Result<(), String> {
    check((prop::collection::vec(word(), 0..20), prop::collection::vec(word(), 0..20)), |(xs, ys)| {
        let lex = Lexicon::demo();
        let px = liwc_profile(&xs, &lex);
        let py = liwc_profile(&ys, &lex);
        let joined: Vec<String> = xs.iter().chain(&ys).cloned().collect();
        let pj = liwc_profile(&joined, &lex);
        let (nx, ny) = (xs.len() as f64, ys.len() as f64);
        for i in 0..pj.values.len() {
            prop_assert!((0.0..=1.0).contains(&px.values[i]));
            if nx + ny > 0.0 {
                let mixed = (nx * px.values[i] + ny * py.values[i]) / (nx + ny);
                prop_assert!((pj.values[i] - mixed).abs() < 1e-12);
            }
        }
        Ok(())
    })
}

pub fn cosine_is_scale_invariant() -> Result<(), String> {
    check((prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..16), 1e-3f64..1e3), |(uv, alpha)| {
        let (u, v): (Vec<f64>, Vec<f64>) = uv.into_iter().unzip();
        let c = cosine(&u, &v).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| x * alpha).collect();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((cosine(&scaled, &v).unwrap() - c).abs() < 1e-12);
        Ok(())
    })
}

pub fn trigram_embedding_depends_only_on_gram_counts() -> Result<(), String> {
    check("[a-dA-D ]{0,24}", |text| {
        let mut expected = vec![0.0; TRIGRAM_DIM];
        for g in TrigramEmbedder::grams(&text) {
            expected[TrigramEmbedder::bucket(&g)] += 1.0;
        }
        prop_assert_eq!(&TrigramEmbedder.embed_text(&text).unwrap(), &expected);
        let upper = TrigramEmbedder.embed_text(&text.to_uppercase()).unwrap();
        prop_assert_eq!(&upper, &expected);
        prop_assert_eq!(embed(&[text.as_str()], &TrigramEmbedder).unwrap().values, expected);
        Ok(())
    })
}

pub fn auc_negation_sums_to_one() -> Result<(), String> {
    check(scored_labels(), |(scores, labels)| {
        let a = roc_auc(&scores, &labels).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert_eq!(a + roc_auc(&neg, &labels).unwrap(), 1.0);
        prop_assert!((0.0..=1.0).contains(&a));
        Ok(())
    })
}

pub fn auc_ignores_strictly_increasing_transforms() -> Result<(), String> {
    check((scored_labels(), 0.1f64..5.0), |((scores, labels), k)| {
        let a = roc_auc(&scores, &labels).unwrap();
        let t1: Vec<f64> = scores.iter().map(|s| (s / 7.0).exp()).collect();
        let t2: Vec<f64> = scores.iter().map(|s| s * s * s + k * s).collect();
        prop_assert_eq!(roc_auc(&t1, &labels).unwrap(), a);
        prop_assert_eq!(roc_auc(&t2, &labels).unwrap(), a);
        Ok(())
    })
}

pub fn rank_metrics_ignore_order_below_true_parent() -> Result<(), String> {
    check((prop::collection::vec(0u8..50, 2..40), 0usize..40, any::<u64>()), |(scores, truth, seed)| {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let truth = truth % scores.len();
        let cands: Vec<(String, f64)> =
            scores.iter().enumerate().map(|(i, s)| (format!("p{i:02}"), *s as f64)).collect();
        let true_id = cands[truth].0.clone();
        let list = RankedList::from_scores("c", &true_id, cands).unwrap();
        let r = list.rank_of_true_parent;

        // Reassign the strictly lower scores among the candidates holding them.
        let true_score = list.candidates[r - 1].1;
        let lower: Vec<usize> = (r..list.candidates.len()).filter(|&i| list.candidates[i].1 < true_score).collect();
        let mut tail_scores: Vec<f64> = lower.iter().map(|&i| list.candidates[i].1).collect();
        tail_scores.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut shuffled = list.candidates.clone();
        for (&i, s) in lower.iter().zip(tail_scores) {
            shuffled[i].1 = s;
        }
        let again = RankedList::from_scores("c", &true_id, shuffled).unwrap();
        prop_assert_eq!(again.rank_of_true_parent, r);
        let (a, b) = ([list], [again]);
        prop_assert_eq!(mrr(&a).unwrap(), mrr(&b).unwrap());
        for k in [1, 3, 5] {
            prop_assert_eq!(recall_at_k(&a, k).unwrap(), recall_at_k(&b, k).unwrap());
        }
        Ok(())
    })
}

pub fn dedupe_keeps_positives_and_removes_overlap() -> Result<(), String> {
    check((prop::collection::vec((0u8..20, 0u8..40, any::<bool>()), 0..40), prop::collection::vec((20u8..30, 0u8..40, any::<bool>()), 0..40)), |(train, test)| {
        let mk = |v: &[(u8, u8, bool)]| v.iter().map(|&(a, m, p)| Row(a, m, p)).collect::<Vec<_>>();
        let mut tr = mk(&train);
        let te = mk(&test);
        let before = tr.clone();
        let removed = dedupe_negatives(&mut tr, &te);
        prop_assert!(negative_overlap(&tr, &te).is_empty());
        prop_assert_eq!(before.len() - tr.len(), removed);
        let pos = |v: &[Row]| v.iter().filter(|r| r.2).cloned().collect::<Vec<_>>();
        prop_assert_eq!(pos(&before), pos(&tr));
        let test_neg: HashSet<u8> = te.iter().filter(|r| !r.2).map(|r| r.1).collect();
        let kept: Vec<Row> = before.into_iter().filter(|r| r.2 || !test_neg.contains(&r.1)).collect();
        prop_assert_eq!(kept, tr);
        Ok(())
    })
}

pub fn welch_is_antisymmetric() -> Result<(), String> {
    check((prop::collection::vec(-50.0f64..50.0, 2..25), prop::collection::vec(-50.0f64..50.0, 2..25)), |(a, b)| {
        let (Ok(ab), Ok(ba)) = (welch_test(&a, &b), welch_test(&b, &a)) else {
            return Ok(());
        };
        prop_assert!((ab.t_statistic + ba.t_statistic).abs() <= 1e-12 * ab.t_statistic.abs().max(1.0));
        prop_assert!((ab.cohens_d + ba.cohens_d).abs() <= 1e-12 * ab.cohens_d.abs().max(1.0));
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((ab.degrees_of_freedom - ba.degrees_of_freedom).abs() <= 1e-9 * ab.degrees_of_freedom);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        Ok(())
    })
}

pub fn pearson_affine_invariance_and_reflection() -> Result<(), String> {
    check((prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30), 0.01f64..100.0, -100.0f64..100.0), |(xy, scale, shift)| {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(r) = pearson(&x, &y) else { return Ok(()) };
        let moved: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let flipped: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((pearson(&moved, &y).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson(&x, &flipped).unwrap() + r).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&r));
        Ok(())
    })
}

pub fn success_classes_partition_pairs() -> Result<(), String> {
    check(prop::collection::vec((1i64..1_000, 1i64..1_000, 1i64..500), 1..30), |durations| {
        let mut accounts = Vec::new();
        let mut pairs = Vec::new();
        for (i, (dp, dc, gap)) in durations.iter().enumerate() {
            let ban = 10_000 + dp;
            accounts.push(Account { account_id: format!("p{i}"), username: "p".into(), creation_time: 10_000, ban_time: Some(ban) });
            accounts.push(Account { account_id: format!("c{i}"), username: "c".into(), creation_time: ban + gap, ban_time: Some(ban + gap + dc) });
            pairs.push(EvasionPair { parent_id: format!("p{i}"), child_id: format!("c{i}"), group_id: i as u64 });
        }
        let corpus = Corpus::new(accounts, Vec::new(), Vec::new()).unwrap();
        let classes = classify_success(&pairs, &corpus).unwrap();
        prop_assert_eq!(classes.len(), pairs.len());
        let successful = classes.iter().filter(|c| **c == Success::Successful).count();
        let unsuccessful = classes.iter().filter(|c| **c == Success::Unsuccessful).count();
        prop_assert_eq!(successful + unsuccessful, pairs.len());
        for ((dp, dc, _), c) in durations.iter().zip(&classes) {
            prop_assert_eq!(*c == Success::Successful, dc > dp);
        }
        Ok(())
    })
}

pub fn negated_model_is_the_complement() -> Result<(), String> {
    check((prop::collection::vec((-5.0f64..5.0, -50.0f64..50.0, 0.1f64..10.0), 1..10), -5.0f64..5.0), |(wx, bias)| {
        let n = wx.len();
        let model = LogisticModel {
            feature_names: (0..n).map(|i| format!("f{i}")).collect(),
            weights: wx.iter().map(|t| t.0).collect(),
            bias,
            stats: StandardizationStats { means: vec![1.0; n], stds: wx.iter().map(|t| t.2).collect() },
            config: TrainConfig::default(),
        };
        let negated = LogisticModel {
            weights: model.weights.iter().map(|w| -w).collect(),
            bias: -bias,
            ..model.clone()
        };
        let x: Vec<f64> = wx.iter().map(|t| t.1).collect();
        let sum = model.predict_row(&x) + negated.predict_row(&x);
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!((sigmoid(bias) + sigmoid(-bias) - 1.0).abs() < 1e-15);
        Ok(())
    })
}


#[derive(Debug, Clone, PartialEq)]
struct Row(u8, u8, bool);

impl Anchored for Row {
    fn anchor_id(&self) -> &str {
        "unused"
    }
    fn member_id(&self) -> &str {
        // Member ids are small integers rendered once.
        MEMBER_NAMES[self.1 as usize]
    }
    fn is_positive(&self) -> bool {
        self.2
    }
}

const MEMBER_NAMES: [&str; 40] = [
    "m00", "m01", "m02", "m03", "m04", "m05", "m06", "m07", "m08", "m09", "m10", "m11", "m12", "m13", "m14", "m15",
    "m16", "m17", "m18", "m19", "m20", "m21", "m22", "m23", "m24", "m25", "m26", "m27", "m28", "m29", "m30", "m31",
    "m32", "m33", "m34", "m35", "m36", "m37", "m38", "m39",
];

/// p-values on a t grid for several df: 1 at t = 0, symmetric, non-increasing in |t|.
pub fn t_p_values_fall_as_t_grows() -> Result<(), String> {
    for df in [1.0, 2.0, 3.5, 8.0, 30.0, 120.0, 1000.0] {
        let mut last = student_t_p_value(0.0, df);
        if (last - 1.0).abs() > 1e-12 {
            return Err(format!("df {df}: p(0) = {last}"));
        }
        for i in 1..=400 {
            let t = i as f64 * 0.05;
            let p = student_t_p_value(t, df);
            if p > last || p != student_t_p_value(-t, df) {
                return Err(format!("df {df} t {t}: p {p}, previous {last}"));
            }
            last = p;
        }
    }
    Ok(())
}

pub fn equal_trigram_multisets_embed_identically() -> Result<(), String> {
    let a = TrigramEmbedder.embed_text("abcab").map_err(|e| e.to_string())?;
    let b = TrigramEmbedder.embed_text("bcabc").map_err(|e| e.to_string())?;
    if a == b { Ok(()) } else { Err("rotated periodic text embeds differently".into()) }
}

pub type Check = (&'static str, fn() -> Result<(), String>);

pub fn all() -> Vec<Check> {
    vec![
        ("levenshtein_bounds_symmetry_identity", levenshtein_bounds_symmetry_identity),
        ("jaccard_bounds_symmetry_identity", jaccard_bounds_symmetry_identity),
        ("jaccard_shrinks_as_symmetric_difference_grows", jaccard_shrinks_as_symmetric_difference_grows),
        ("profile_values_are_shares_and_concatenation_is_weighted_mean", profile_values_are_shares_and_concatenation_is_weighted_mean),
        ("cosine_is_scale_invariant", cosine_is_scale_invariant),
        ("trigram_embedding_depends_only_on_gram_counts", trigram_embedding_depends_only_on_gram_counts),
        ("auc_negation_sums_to_one", auc_negation_sums_to_one),
        ("auc_ignores_strictly_increasing_transforms", auc_ignores_strictly_increasing_transforms),
        ("rank_metrics_ignore_order_below_true_parent", rank_metrics_ignore_order_below_true_parent),
        ("dedupe_keeps_positives_and_removes_overlap", dedupe_keeps_positives_and_removes_overlap),
        ("welch_is_antisymmetric", welch_is_antisymmetric),
        ("pearson_affine_invariance_and_reflection", pearson_affine_invariance_and_reflection),
        ("success_classes_partition_pairs", success_classes_partition_pairs),
        ("negated_model_is_the_complement", negated_model_is_the_complement),
        ("t_p_values_fall_as_t_grows", t_p_values_fall_as_t_grows),
        ("equal_trigram_multisets_embed_identically", equal_trigram_multisets_embed_identically),
    ]
}
