use ews_core::detector::{
    calibrate_threshold, run_detector, DetectorConfig, ShiftPolicy, Threshold, ThresholdGrid,
};
use ews_core::entropy::{EntropyConfig, Variant};
use ews_core::forest::ForestConfig;
use ews_core::pipeline::{entropy_stream, PipelineConfig};
use ews_core::seed::RngSeed;
use ews_core::simlab::{generate, DgpKind, DgpSpec};
use ews_core::window::WindowPlan;
use rand::Rng;
use rand_distr::StandardNormal;

fn light(variant: Variant) -> PipelineConfig {
    PipelineConfig {
        plan: WindowPlan::new(50, 1, 5, 5).unwrap(),
        variant,
        entropy: EntropyConfig {
            forest: ForestConfig {
                n_trees: 50,
                ..ForestConfig::default()
            },
            ..EntropyConfig::default()
        },
        ridge: 0.01,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// The post-change target is far noisier and unrelated to the covariates, so
// the conditional entropy of every variant on levels rises.
#[test]
fn termination_raises_entropy() {
    for seed in 0..3 {
        let spec = DgpSpec {
            len: 500,
            theta: 250,
            ..DgpSpec::new(DgpKind::Termination, RngSeed(seed))
        };
        let frame = generate(&spec).unwrap();
        for variant in [Variant::Baseline, Variant::Llf] {
            let run = entropy_stream(&frame, &light(variant), RngSeed(seed).derive(1)).unwrap();
            let (pre, post): (Vec<_>, Vec<_>) = run
                .series
                .windows
                .iter()
                .zip(&run.series.values)
                .filter(|(w, _)| w.end < 250 || w.start >= 250)
                .partition(|(w, _)| w.end < 250);
            let pre: Vec<f64> = pre.into_iter().map(|(_, h)| *h).collect();
            let post: Vec<f64> = post.into_iter().map(|(_, h)| *h).collect();
            assert!(
                mean(&post) > mean(&pre) + 20.0,
                "seed {seed} {variant}: {} -> {}",
                mean(&pre),
                mean(&post)
            );
        }
    }
}

#[test]
fn calibrated_threshold_holds_its_false_alarm_rate() {
    let config = DetectorConfig {
        m: 1,
        threshold: Threshold::Calibrate,
        ..DetectorConfig::simulation()
    };
    let policy = ShiftPolicy::Fixed(vec![1.0]);
    let normal = |seed: RngSeed| {
        let mut rng = seed.rng();
        Ok((0..500)
            .map(|_| rng.sample(StandardNormal))
            .collect::<Vec<f64>>())
    };
    let cal = calibrate_threshold(
        normal,
        &config,
        &policy,
        0.1,
        500,
        400,
        RngSeed(1),
        ThresholdGrid::default(),
    )
    .unwrap();
    assert!(cal.attained);
    let fresh = RngSeed(99);
    let alarms = (0..200)
        .filter(|i| {
            let stream = normal(fresh.derive(*i)).unwrap();
            !run_detector(&stream, &config, cal.threshold, &policy)
                .unwrap()
                .alarms
                .is_empty()
        })
        .count();
    let rate = alarms as f64 / 200.0;
    assert!(
        (rate - 0.1).abs() <= 0.05,
        "false-alarm rate {rate} at A = {}",
        cal.threshold
    );
}
