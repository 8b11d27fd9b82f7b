use goalpred::mdn::{
    nll_loss, to_motion_profile, train, Dataset, MdnModel, Optimizer, TrainParams, HORIZON_STEPS,
};
use goalpred::FeatureSchema;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn schema() -> FeatureSchema {
    FeatureSchema::follow(0)
}

/// Layer offsets into the flat parameter vector.
fn layer_offsets(m: &MdnModel) -> Vec<usize> {
    let mut out = vec![0];
    for l in 0..m.sizes.len() - 1 {
        let last = *out.last().unwrap();
        out.push(last + m.sizes[l] * m.sizes[l + 1] + m.sizes[l + 1]);
    }
    out
}

#[test]
fn forward_matches_hand_built_network() {
    // one hidden unit h = relu(2 * speed - 1); every mean = (k + 1) * h,
    // every log-variance = 0.5
    let mut m = MdnModel::zeros(schema(), &[1], 1);
    let offsets = layer_offsets(&m);
    m.params[offsets[0]] = 2.0;
    m.params[offsets[0] + schema().len()] = -1.0;
    let out_start = offsets[1];
    let n_out = m.sizes[2];
    for k in 0..HORIZON_STEPS {
        m.params[out_start + (1 + k)] = (k + 1) as f64;
        m.params[out_start + n_out + 1 + HORIZON_STEPS + k] = 0.5;
    }
    for speed in [0.0, 0.3, 4.0] {
        let mut z = vec![0.0; schema().len()];
        z[0] = speed;
        let out = m.forward_values(&z).unwrap();
        let h = (2.0f64 * speed - 1.0).max(0.0);
        let c = &out.components[0];
        assert!((c.weight - 1.0).abs() < 1e-15);
        for k in 0..HORIZON_STEPS {
            assert!((c.mean[k] - (k + 1) as f64 * h).abs() < 1e-12);
            assert!((c.variance[k] - 0.5f64.exp()).abs() < 1e-12);
        }
    }
}

#[test]
fn stationary_agent_profile_stays_at_rest() {
    let m = MdnModel::constant_velocity(schema(), &[8], &[1.0; HORIZON_STEPS]);
    let out = m.forward_values(&vec![0.0; schema().len()]).unwrap();
    let p = to_motion_profile(&out, 0.0);
    assert!(p.speeds.iter().all(|s| s.abs() < 1e-12));
    assert!(p.distances.iter().all(|d| d.abs() < 1e-12));
}

fn cv_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut data = Dataset::default();
    for _ in 0..n {
        let speed = rng.gen_range(5.0..30.0);
        let mut z = vec![0.0; schema().len()];
        z[0] = speed;
        z[2] = 1.0;
        let target = (1..=HORIZON_STEPS).map(|t| speed * t as f64 + noise.sample(&mut rng)).collect();
        data.push(z, target);
    }
    data
}

#[test]
fn training_halves_the_nll_on_constant_velocity_data() {
    let data = cv_dataset(2000, 11);
    let mut model = MdnModel::new(schema(), &[32, 16], 1, 3);
    model.fit_normalisation(&data);
    let params = TrainParams {
        learning_rate: 3e-3,
        batch_size: 64,
        epochs: 40,
        seed: 5,
        ..TrainParams::follow_lane()
    };
    let (trained, report) = train(&model, &data, &params).unwrap();
    let (before, after) = (report.initial_loss, report.final_loss());
    assert!(after < before - 0.5 * before.abs(), "NLL {before} -> {after}");

    // held-out data behaves the same
    let test = cv_dataset(200, 12);
    let held_out = trained.mean_nll(&test.inputs, &test.targets).unwrap();
    assert!(held_out < after + 0.5, "{held_out} vs {after}");
    let out = trained.forward_values(&test.inputs[0]).unwrap();
    let speed = test.inputs[0][0];
    assert!((out.components[0].mean[4] - 5.0 * speed).abs() < 2.0);
}

#[test]
fn gradient_descent_on_convex_toy_loss_never_increases() {
    // With zero hidden weights and fixed unit variance the NLL is a
    // quadratic in the output biases.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut data = Dataset::default();
    for _ in 0..50 {
        let z: Vec<f64> = (0..schema().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..HORIZON_STEPS).map(|k| k as f64 + rng.gen_range(-0.5..0.5)).collect();
        data.push(z, y);
    }
    let model = MdnModel::zeros(schema(), &[4], 1);
    let params = TrainParams {
        learning_rate: 0.1,
        batch_size: data.len(),
        epochs: 200,
        seed: 0,
        optimizer: Optimizer::Sgd,
        freeze_variance: true,
    };
    let (trained, report) = train(&model, &data, &params).unwrap();
    let mut previous = report.initial_loss;
    for &l in &report.epoch_losses {
        assert!(l <= previous + 1e-12, "{l} > {previous}");
        previous = l;
    }
    let out = trained.forward_values(&data.inputs[0]).unwrap();
    for k in 0..HORIZON_STEPS {
        let mean: f64 = data.targets.iter().map(|t| t[k]).sum::<f64>() / data.len() as f64;
        assert!((out.components[0].mean[k] - mean).abs() < 1e-3);
    }
    let loss = nll_loss(&out, &data.targets[0]).unwrap();
    assert!(loss.is_finite());
}
