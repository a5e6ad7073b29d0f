//! Monte Carlo checks of the random channel: unbiased exchanges and distance estimates,
//! and reproducible trials.

use diland::algorithms::{diland_step_alpha, random_step_alpha, AlgorithmState, Exchange};
use diland::channel::{CommNoiseModel, DistanceModel, LinkModel, RssParams, ToaParams};
use diland::estimation::{corrected_sample, DistanceEstimateState};
use diland::linalg::Matrix;
use diland::network::{assemble_system, generate_deployment, NodeId, Pair};
use diland::rng::{stream, Stream};
use diland::trial::{run_trial, AlgorithmKind, TrialSpec};
use diland::{ChannelConfig64, WeightSequence64};

fn models() -> Vec<(&'static str, DistanceModel<f64>)> {
    vec![
        ("gaussian", DistanceModel::Gaussian { variance_fraction: 0.1 }),
        (
            "rss",
            DistanceModel::Rss(RssParams {
                delta0: 1.0,
                pi0: -40.0,
                np: 3.0,
                shadow_sigma: 4.0,
                bias_c: 1.3,
                c_est_sigma: 0.1,
            }),
        ),
        (
            "toa",
            DistanceModel::Toa(ToaParams {
                nu_p: 3.0,
                mu_t: 0.5,
                sigma_t: 0.2,
                mu_est_sigma: 0.05,
            }),
        ),
    ]
}

#[test]
fn corrected_samples_are_unbiased() {
    let d = 7.0;
    let n = 200_000;
    for (name, model) in models() {
        let mut rng = stream(1, Stream::Distance);
        let xs: Vec<f64> = (0..n).map(|_| corrected_sample(&model, d, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - d).abs() < 4.0 * se, "{name}: mean {mean}, se {se}");
    }
}

#[test]
fn running_mean_error_shrinks_like_inverse_root() {
    // 4x the samples should halve the RMS error.
    let d = 5.0;
    let pair = Pair::new(NodeId(0), NodeId(1));
    for (name, model) in models() {
        let (mut e1, mut e4) = (0.0, 0.0);
        let seeds = 200;
        for seed in 0..seeds {
            let mut rng = stream(seed, Stream::Distance);
            let mut est = DistanceEstimateState::new([pair]);
            for t in 0..4000u64 {
                est.update_running_average(pair, corrected_sample(&model, d, &mut rng), t)
                    .unwrap();
                if t == 999 {
                    e1 += (est.mean(pair).unwrap() - d).powi(2);
                }
            }
            e4 += (est.mean(pair).unwrap() - d).powi(2);
        }
        let ratio = (e4 / e1).sqrt();
        assert!((0.35..0.65).contains(&ratio), "{name}: ratio {ratio}");
    }
}

#[test]
fn randomized_exchange_is_unbiased() {
    let net = generate_deployment(2, 10, 0.7, 2).unwrap();
    let sys = assemble_system(&net, &net.exact_distances()).unwrap();
    let x = Matrix::from_fn(10, 2, |i, j| ((i * 3 + j) as f64).sin());
    let state = AlgorithmState::new(x, net.anchor_matrix()).unwrap();
    let alpha = 0.5;
    let links = LinkModel::uniform(0.7);
    let noise = CommNoiseModel { sigma_v: 0.3 };
    let mut lr = stream(3, Stream::Links);
    let mut nr = stream(3, Stream::CommNoise);

    let n = 20_000;
    let mut sum = Matrix::<f64>::zeros(10, 2);
    let mut sum_sq = Matrix::<f64>::zeros(10, 2);
    for _ in 0..n {
        let ex = Exchange::sample(&net, Some(&links), Some(&noise), &mut lr, &mut nr);
        let y = random_step_alpha(&state, alpha, &sys, &ex).unwrap();
        for i in 0..10 {
            for j in 0..2 {
                sum[(i, j)] += y.x()[(i, j)];
                sum_sq[(i, j)] += y.x()[(i, j)].powi(2);
            }
        }
    }
    let want = diland_step_alpha(&state, alpha, &sys).unwrap();
    for i in 0..10 {
        for j in 0..2 {
            let mean = sum[(i, j)] / n as f64;
            let var = sum_sq[(i, j)] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            let diff = (mean - want.x()[(i, j)]).abs();
            assert!(diff < 5.0 * se + 1e-12, "({i},{j}): diff {diff}, se {se}");
        }
    }
}

#[test]
fn trials_are_reproducible_per_seed() {
    let net = generate_deployment(2, 15, 0.6, 8).unwrap();
    let channel = ChannelConfig64 {
        distance: DistanceModel::Gaussian { variance_fraction: 0.01 },
        links: Some(LinkModel::uniform(0.9)),
        comm_noise: Some(CommNoiseModel { sigma_v: 0.01 }),
    };
    let w = WeightSequence64::new(1.0, 0.55).unwrap();
    let spec = |seed| TrialSpec::new(AlgorithmKind::Diland, w, 300, seed);
    let a = run_trial(&net, &channel, &spec(5)).unwrap();
    let b = run_trial(&net, &channel, &spec(5)).unwrap();
    let c = run_trial(&net, &channel, &spec(6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.mse(), c.mse());
    assert_eq!(a.records[0].mse, 1.0);
    assert_eq!(a.records.len(), 301);
}
