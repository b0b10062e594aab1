use ews_core::entropy::{
    window_entropy, window_ranks, ConditionalDensity, EntropyConfig, SupportKind, Variant,
};
use ews_core::forest::{ForestConfig, NeighborWeights};
use ews_core::pipeline::variant_entropy;
use ews_core::seed::RngSeed;
use rand::Rng;
use rand_distr::StandardNormal;

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngSeed(seed).rng();
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn small_config() -> EntropyConfig {
    EntropyConfig {
        forest: ForestConfig {
            n_trees: 50,
            ..ForestConfig::default()
        },
        ..EntropyConfig::default()
    }
}

#[test]
fn uniform_weights_recover_gaussian_entropy() {
    let truth = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    for seed in 0..5 {
        let e = normals(500, seed);
        let w = NeighborWeights {
            weights: vec![1.0 / 500.0; 500],
        };
        let d = ConditionalDensity::from_weights(&e, &w, SupportKind::Level).unwrap();
        let h = d.entropy(201).unwrap();
        assert!((h - truth).abs() < 0.08, "seed {seed}: {h}");
    }
}

#[test]
fn scaling_residuals_shifts_entropy_by_log_scale() {
    // h(cX) = h(X) + ln c for a fixed partition of the conditioner.
    let e = normals(300, 1);
    let cond = normals(300, 2);
    let scaled: Vec<f64> = e.iter().map(|v| 4.0 * v).collect();
    let cfg = small_config();
    let a = window_entropy(&e, &cond, SupportKind::Level, &cfg, RngSeed(3)).unwrap();
    let b = window_entropy(&scaled, &cond, SupportKind::Level, &cfg, RngSeed(3)).unwrap();
    let per_point = (b - a) / 300.0;
    assert!((per_point - 4f64.ln()).abs() < 0.02, "{per_point}");
}

#[test]
fn rank_variant_ignores_monotone_maps() {
    let e = normals(120, 4);
    let cond = normals(120, 5);
    let cfg = small_config();
    let warped: Vec<f64> = e.iter().map(|v| v.powi(3) + v).collect();
    let cond_warped: Vec<f64> = cond.iter().map(|v| (2.0 * v).exp()).collect();
    assert_eq!(window_ranks(&e), window_ranks(&warped));
    for v in [Variant::Rank, Variant::LlfRank] {
        let a = variant_entropy(&e, &cond, v, &cfg, RngSeed(6)).unwrap();
        let b = variant_entropy(&warped, &cond_warped, v, &cfg, RngSeed(6)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let level = variant_entropy(&e, &cond, Variant::Baseline, &cfg, RngSeed(6)).unwrap();
    let level_warped =
        variant_entropy(&warped, &cond, Variant::Baseline, &cfg, RngSeed(6)).unwrap();
    assert_ne!(level, level_warped);
}

#[test]
fn informative_conditioner_lowers_entropy() {
    let mut rng = RngSeed(7).rng();
    let cond = normals(400, 8);
    let tied: Vec<f64> = cond
        .iter()
        .map(|c| c + 0.2 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let free = normals(400, 9);
    let cfg = small_config();
    let h_tied = window_entropy(&tied, &cond, SupportKind::Level, &cfg, RngSeed(1)).unwrap();
    let h_free = window_entropy(&free, &cond, SupportKind::Level, &cfg, RngSeed(1)).unwrap();
    assert!(h_tied < h_free - 100.0, "{h_tied} vs {h_free}");
}
