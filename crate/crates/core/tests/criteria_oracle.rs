mod common;

use common::{mc_exceedance, mc_percentile_variance, random_case};
use surq_core::criteria::{interval_stats, j_prob, j_var, j_var_from, variance_from_stats, Integration};
use surq_core::{build_cloud, fit_posterior, Design, KernelFamily, KernelParams, TrendModel};

#[test]
fn j_var_matches_monte_carlo() {
    for seed in 0..5 {
        let case = random_case(100 + seed, 120);
        let (v, se) = mc_percentile_variance(&case, 100_000, seed);
        let jv = j_var(&case.posterior, &case.cloud, &case.x_new).unwrap().value;
        assert!((jv - v).abs() <= 3.0 * se + 1e-12, "seed {seed}: closed {jv} vs mc {v} (se {se})");
    }
}

#[test]
fn j_prob_matches_monte_carlo() {
    for seed in 0..4 {
        let case = random_case(200 + seed, 100);
        let (m, se) = mc_exceedance(&case, 20_000, seed);
        let eval = j_prob(&case.posterior, &case.cloud, Integration::Cloud, &case.x_new).unwrap();
        let gamma = eval.expected_proportion.unwrap();
        assert!((gamma - m).abs() <= 3.0 * se + 1e-9, "seed {seed}: closed {gamma} vs mc {m} (se {se})");
        assert!((eval.value - (gamma - (1.0 - case.cloud.alpha())).abs()).abs() < 1e-15);
    }
}

#[test]
fn total_variance_forms_agree() {
    for seed in 0..20 {
        let case = random_case(300 + seed, 150);
        let update = case.cloud.candidate(&case.posterior, &case.x_new).unwrap();
        let stats = interval_stats(&update).unwrap();
        let a = &update.lines.slopes;
        let b = case.cloud.means();
        let p_sum: f64 = stats.iter().map(|s| s.probability).sum();
        assert!((p_sum - 1.0).abs() < 1e-9);
        let mu: Vec<f64> = stats.iter().map(|s| b[s.line] + a[s.line] * s.mean).collect();
        let within: f64 = stats.iter().map(|s| s.probability * a[s.line].powi(2) * s.variance).sum();
        // double-sum form of the between-segment variance
        let mut between = 0.0;
        for i in 0..stats.len() {
            between += mu[i] * mu[i] * (1.0 - stats[i].probability) * stats[i].probability;
            for j in 0..i {
                between -= 2.0 * mu[i] * stats[i].probability * mu[j] * stats[j].probability;
            }
        }
        // raw second moment minus squared mean
        let m1: f64 = stats.iter().zip(&mu).map(|(s, m)| s.probability * m).sum();
        let m2: f64 =
            stats.iter().zip(&mu).map(|(s, m)| s.probability * (a[s.line].powi(2) * s.variance + m * m)).sum();
        let centered = variance_from_stats(&stats, a, b);
        let scale = centered.abs().max(1e-300);
        assert!(((within + between) - centered).abs() <= 1e-9 * scale + 1e-14 * m2, "seed {seed}");
        assert!(((m2 - m1 * m1) - centered).abs() <= 1e-9 * scale + 1e-14 * m2, "seed {seed}");
    }
}

#[test]
fn j_var_zero_at_design_points() {
    for seed in 0..10 {
        let case = random_case(400 + seed, 80);
        for x in case.posterior.design().points().rows() {
            let e = j_var(&case.posterior, &case.cloud, x).unwrap();
            assert_eq!(e.value, 0.0);
        }
    }
}

#[test]
fn criteria_ignore_cloud_order_and_repeat_exactly() {
    let case = random_case(500, 90);
    let v1 = j_var(&case.posterior, &case.cloud, &case.x_new).unwrap();
    let v2 = j_var(&case.posterior, &case.cloud, &case.x_new).unwrap();
    assert_eq!(v1, v2);
    let p1 = j_prob(&case.posterior, &case.cloud, Integration::Cloud, &case.x_new).unwrap();
    assert_eq!(p1, j_prob(&case.posterior, &case.cloud, Integration::Cloud, &case.x_new).unwrap());

    let pts = case.cloud.points();
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.reverse();
    idx.rotate_left(17);
    let shuffled = build_cloud(&case.posterior, &pts.select(&idx), case.cloud.alpha()).unwrap();
    let v3 = j_var(&case.posterior, &shuffled, &case.x_new).unwrap();
    assert!((v1.value - v3.value).abs() <= 1e-10 * v1.value.abs().max(1e-300));
}

#[test]
fn uncorrelated_candidate_gives_zero_variance() {
    // with a known trend, a candidate beyond the kernel's reach has
    // k_n(x_i, x_new) = 0 for every cloud point
    let mut r = common::rng(600);
    let pts = common::uniform_points(&mut r, 8, 2);
    let ys = pts.rows().map(|x| common::wavy(x, &[0.3, 1.1])).collect();
    let kernel = KernelParams::isotropic(KernelFamily::Matern32, 1.0, 0.2, 2).unwrap();
    let post = fit_posterior(Design::new(pts, ys).unwrap(), kernel, TrendModel::zero(), 1e-8).unwrap();
    let cloud = build_cloud(&post, &common::uniform_points(&mut r, 50, 2), 0.6).unwrap();
    let e = j_var(&post, &cloud, &[1e6, -1e6]).unwrap();
    assert_eq!(e.value, 0.0);
}

#[test]
fn windowed_level_leaves_criteria_unchanged() {
    for seed in 0..10 {
        let case = random_case(700 + seed, 200);
        let full = case.cloud.candidate(&case.posterior, &case.x_new).unwrap();
        let reference = j_var_from(&full, &case.cloud, &case.x_new).unwrap().value;
        let windowed = j_var(&case.posterior, &case.cloud, &case.x_new).unwrap().value;
        assert!((reference - windowed).abs() <= 1e-12 * reference.abs() + 1e-300, "seed {seed}");
    }
}
