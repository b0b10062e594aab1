use ews_core::seed::RngSeed;
use ews_core::series::SeriesFrame;
use ews_core::simlab::{
    generate, run_replications, summary_stats, tail_lambda, ChangeDetector, DgpKind, DgpSpec,
};
use ews_core::Result;

fn mean_over_seeds(kind: DgpKind, f: impl Fn(&[f64]) -> f64) -> f64 {
    let n = 100;
    (0..n)
        .map(|s| f(generate(&DgpSpec::new(kind, RngSeed(s))).unwrap().target()))
        .sum::<f64>()
        / n as f64
}

#[test]
fn termination_moments_match_reported_bands() {
    let pre_mean = mean_over_seeds(DgpKind::Termination, |y| {
        summary_stats(&y[..500]).unwrap().mean
    });
    let pre_sd = mean_over_seeds(DgpKind::Termination, |y| {
        summary_stats(&y[..500]).unwrap().std
    });
    let post = mean_over_seeds(DgpKind::Termination, |y| {
        summary_stats(&y[500..]).unwrap().mean
    });
    assert!((pre_mean - 2.541).abs() <= 0.3, "{pre_mean}");
    assert!((pre_sd - 2.768).abs() <= 0.4, "{pre_sd}");
    assert!((post - 5.126).abs() <= 0.6, "{post}");
}

#[test]
fn inversion_post_change_moments() {
    let mean = mean_over_seeds(DgpKind::Inversion, |y| {
        summary_stats(&y[500..]).unwrap().mean
    });
    let sd = mean_over_seeds(DgpKind::Inversion, |y| {
        summary_stats(&y[500..]).unwrap().std
    });
    assert!((mean - 5.126).abs() <= 0.6, "{mean}");
    assert!((sd - 2.99).abs() <= 0.5, "{sd}");
    let small = (0..100)
        .filter(|&s| {
            let y = generate(&DgpSpec::new(DgpKind::Inversion, RngSeed(s))).unwrap();
            summary_stats(&y.target()[500..])
                .unwrap()
                .lag1_corr
                .unwrap()
                .abs()
                <= 0.1
        })
        .count();
    assert!(small >= 90, "{small}/100");
}

#[test]
fn tail_design_tracks_covariate_at_extremes() {
    for s in 0..10 {
        let frame = generate(&DgpSpec::new(DgpKind::TailDependent, RngSeed(s))).unwrap();
        let (y, x) = (frame.target(), &frame.covariates()[0]);
        // Column row t - 1 holds the draw that drives y[t].
        let lagged = &x[..499];
        let lambda = tail_lambda(lagged);
        let gaps: Vec<f64> = (0..lagged.len())
            .filter(|&i| lambda[i] >= 0.9)
            .map(|i| (y[i + 1] - lagged[i]).abs())
            .collect();
        assert!(!gaps.is_empty());
        let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
        assert!(mean_gap < 0.05, "seed {s}: mean gap {mean_gap}");
        let top = (0..lagged.len())
            .max_by(|a, b| lagged[*a].total_cmp(&lagged[*b]))
            .unwrap();
        assert!((y[top + 1] - lagged[top]).abs() < 0.05, "seed {s}");
    }
}

#[test]
fn identical_specs_give_identical_frames() {
    for kind in [
        DgpKind::Termination,
        DgpKind::Inversion,
        DgpKind::TailDependent,
    ] {
        let spec = DgpSpec::new(kind, RngSeed(42));
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = DgpSpec::new(kind, RngSeed(43));
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }
}

/// Alarms at a fixed offset from the change, or before it on odd seeds.
struct Scripted;

impl ChangeDetector for Scripted {
    fn alarm_times(&self, _frame: &SeriesFrame, seed: RngSeed) -> Result<Vec<usize>> {
        Ok(match seed.0 % 3 {
            0 => vec![507],
            1 => vec![420, 512],
            _ => vec![],
        })
    }
}

#[test]
fn replication_flags_are_consistent() {
    let dgp = DgpSpec::new(DgpKind::Termination, RngSeed(9));
    let result = run_replications(&dgp, &Scripted, 30).unwrap();
    for r in &result.records {
        assert_eq!(r.non_detection, r.delay.is_none());
        assert!(!(r.false_alarm && r.alarms.first().map_or(true, |&a| a >= 500)));
    }
    let fa = result.records.iter().filter(|r| r.false_alarm).count();
    assert!((result.pfa - fa as f64 / 30.0).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&result.nd));
}
