//! Without link failures or noise, the randomized update reduces to the deterministic one.

use diland::algorithms::{
    diland_random_step, diland_step, diloc_step, AlgorithmState, Exchange, WeightSequence,
};
use diland::linalg::Matrix;
use diland::network::{assemble_system, generate_deployment};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn randomized_step_without_randomness_is_diland(
        seed in 0u64..4,
        vals in prop::collection::vec(-2.0f64..2.0, 24),
        t in 0u64..10_000,
        a in 0.1f64..2.0,
        delta in 0.05f64..1.0,
    ) {
        let net = generate_deployment(2, 12, 0.6, seed).unwrap();
        let sys = assemble_system(&net, &net.exact_distances()).unwrap();
        let x = Matrix::from_fn(12, 2, |i, j| vals[2 * i + j]);
        let mut state = AlgorithmState::new(x, net.anchor_matrix()).unwrap();
        // Reach iteration t without changing X: a zero-weight step only advances the clock.
        let hold = WeightSequence { a: 0.0, delta: 1.0 };
        for _ in 0..t.min(50) {
            state = diland_step(&state, &hold, &sys).unwrap();
        }
        let w = WeightSequence::new(a, delta).unwrap();
        let ideal = Exchange::ideal(&net);
        let r = diland_random_step(&state, &w, &sys, &ideal, false).unwrap();
        let d = diland_step(&state, &w, &sys).unwrap();
        let alpha = w.alpha(state.t());
        let mix = state.x().scale(1.0 - alpha).add(&diloc_step(&state, &sys).unwrap().x().scale(alpha));
        prop_assert!(r.x().sub(d.x()).max_abs() <= 1e-12);
        prop_assert!(d.x().sub(&mix).max_abs() <= 1e-12);
    }
}
