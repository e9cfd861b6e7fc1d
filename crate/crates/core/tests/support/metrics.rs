use ban_evasion::analysis::{student_t_p_value, welch_test};
use ban_evasion::eval::{mrr, recall_at_k, roc_auc, RankedList};
use ban_evasion::model::{loss_and_gradient, sample_weights, ClassWeighting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{name}: got {got}, want {want} (tolerance {tol:e})"))
    }
}

pub fn brute_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (sp, yp) in scores.iter().zip(labels) {
        if *yp != 1.0 {
            continue;
        }
        for (sn, yn) in scores.iter().zip(labels) {
            if *yn != 0.0 {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// `roc_auc` vs. pairwise counting; every other instance is tie-heavy.
pub fn check_auc(seed: u64, instances: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..instances {
        let n = rng.random_range(2..300);
        let mut labels: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        let scores: Vec<f64> = if i % 2 == 0 {
            (0..n).map(|_| rng.random_range(0..8) as f64).collect()
        } else {
            (0..n).map(|_| rng.random::<f64>()).collect()
        };
        let got = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
        close(&format!("auc instance {i}"), got, brute_auc(&scores, &labels), 1e-12)?;
    }
    Ok(())
}

/// MRR and Recall@{1,3,5} vs. ranks counted directly from the scores.
pub fn check_ranking_metrics(seed: u64, rounds: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..rounds {
        let n_children = rng.random_range(1..30);
        let mut lists = Vec::new();
        let mut ranks = Vec::new();
        for c in 0..n_children {
            let n_cand = rng.random_range(1..52);
            let truth = rng.random_range(0..n_cand);
            let cands: Vec<(String, f64)> = (0..n_cand)
                .map(|k| (format!("p{k:03}"), rng.random_range(0..20) as f64 / 20.0))
                .collect();
            let (true_id, true_score) = cands[truth].clone();
            // Rank = 1 + strictly better scores + equal scores with smaller ids.
            let rank = 1 + cands
                .iter()
                .filter(|(id, s)| *s > true_score || (*s == true_score && *id < true_id))
                .count();
            let list = RankedList::from_scores(&format!("c{c}"), &true_id, cands).map_err(|e| e.to_string())?;
            if list.rank_of_true_parent != rank {
                return Err(format!("rank {} != {rank}", list.rank_of_true_parent));
            }
            ranks.push(rank);
            lists.push(list);
        }
        let n = ranks.len() as f64;
        let want = ranks.iter().map(|r| 1.0 / *r as f64).sum::<f64>() / n;
        close("mrr", mrr(&lists).map_err(|e| e.to_string())?, want, 1e-12)?;
        for k in [1, 3, 5] {
            let want = ranks.iter().filter(|r| **r <= k).count() as f64 / n;
            close(&format!("recall@{k}"), recall_at_k(&lists, k).map_err(|e| e.to_string())?, want, 1e-12)?;
        }
    }
    Ok(())
}

/// Two-sided Student-t tail by quadrature. With x = tan(theta) the density
/// kernel becomes cos^(df-1) / (cos^2 + sin^2/df)^((df+1)/2), smooth on
/// [-pi/2, pi/2] for df >= 1; the normalizing constant is integrated too.
pub fn integrated_two_sided_p(t: f64, df: f64) -> f64 {
    let g = |th: f64| {
        let (s, c) = th.sin_cos();
        c.abs().powf(df - 1.0) / (c * c + s * s / df).powf((df + 1.0) / 2.0)
    };
    let simpson = |a: f64, b: f64| {
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut sum = g(a) + g(b);
        for i in 1..n {
            sum += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    };
    let half = std::f64::consts::FRAC_PI_2;
    2.0 * simpson(t.abs().atan(), half) / simpson(-half, half)
}

/// The worked Welch example: samples 1..=5 and 2..=6.
pub fn check_welch_example() -> Result<(f64, f64, f64), String> {
    let r = welch_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    close("t", r.t_statistic, -1.0, 1e-9)?;
    close("df", r.degrees_of_freedom, 8.0, 1e-9)?;
    close("d", r.cohens_d, -1.0 / 2.5f64.sqrt(), 1e-12)?;
    close("p", r.p_value, integrated_two_sided_p(-1.0, 8.0), 1e-6)?;
    Ok((r.t_statistic, r.degrees_of_freedom, r.p_value))
}

/// Student-t p-values on a fixed grid and on random Welch tests vs. quadrature.
pub fn check_p_values(seed: u64) -> Result<(), String> {
    for &(t, df) in &[
        (0.0, 1.0),
        (0.5, 1.0),
        (1.0, 8.0),
        (2.0, 3.5),
        (2.306, 8.0),
        (-3.1, 12.7),
        (4.0, 30.0),
        (1.96, 200.0),
        (10.0, 5.0),
    ] {
        close(&format!("p(t={t}, df={df})"), student_t_p_value(t, df), integrated_two_sided_p(t, df), 1e-6)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let a: Vec<f64> = (0..rng.random_range(3..40)).map(|_| rng.random_range(0.0..10.0)).collect();
        let b: Vec<f64> = (0..rng.random_range(3..40)).map(|_| rng.random_range(1.0..12.0)).collect();
        let r = welch_test(&a, &b).map_err(|e| e.to_string())?;
        close("welch p", r.p_value, integrated_two_sided_p(r.t_statistic, r.degrees_of_freedom), 1e-6)?;
    }
    Ok(())
}

/// Largest relative error between the analytic gradient and central
/// differences over `problems` random weighted, regularized problems.
pub fn gradient_check(seed: u64, problems: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..problems {
        let n = rng.random_range(5..60);
        let d = rng.random_range(1..8);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut labels: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 }).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        let c = sample_weights(&labels, ClassWeighting::InverseFrequency);
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let b = rng.random_range(-1.0..1.0);
        let lambda = rng.random_range(0.0..2.0);

        let (_, grad, grad_b) = loss_and_gradient(&rows, &labels, &c, &w, b, lambda);
        let loss_at = |w: &[f64], b: f64| loss_and_gradient(&rows, &labels, &c, w, b, lambda).0;
        let h = 1e-5;
        let rel = |a: f64, num: f64| (a - num).abs() / a.abs().max(num.abs()).max(1e-8);
        for j in 0..d {
            let mut up = w.clone();
            let mut down = w.clone();
            up[j] += h;
            down[j] -= h;
            let num = (loss_at(&up, b) - loss_at(&down, b)) / (2.0 * h);
            worst = worst.max(rel(grad[j], num));
        }
        let num_b = (loss_at(&w, b + h) - loss_at(&w, b - h)) / (2.0 * h);
        worst = worst.max(rel(grad_b, num_b));
    }
    worst
}
