use rmtdp::dp::{
    dp_sgd_step, effective_sigma, sgd_step, Example, LayerSpec, Model, OptimizerConfig, OptimizerKind,
    OptimizerState, PartitionLayout, PrivacyMechanismConfig,
};
use rmtdp::harness::{ModelSpec, SyntheticTask, TaskKind, ToyModel};
use rmtdp::rng::{SeedStreams, INIT, NOISE, SAMPLING};
use rmtdp::{denoise_gated, DenoiseConfig, DenseMatrix, Error, Execution};

fn task(seed: u64) -> SyntheticTask {
    SyntheticTask {
        kind: TaskKind::PlantedLowrankGradient,
        dataset_size: 400,
        validation_size: 100,
        input_dim: 20,
        num_classes: 4,
        latent_dim: 3,
        label_noise: 0.0,
        seed,
    }
}

fn mlp() -> ToyModel {
    ToyModel::new(ModelSpec::Mlp2Layer { input_dim: 20, hidden_dim: 16, num_classes: 4 }).unwrap()
}

fn mechanism(clip_norm: f64, noise_multiplier: f64) -> PrivacyMechanismConfig {
    PrivacyMechanismConfig { clip_norm, noise_multiplier, sampling_rate: 0.1, steps: 100, seed: 0 }
}

#[test]
fn zero_noise_unbounded_clip_matches_plain_sgd() {
    let model = mlp();
    let (train, _) = task(3).generate().unwrap();
    let streams = SeedStreams::new(9);
    let init = model.init_params(&mut streams.stream(INIT));
    let mut private = init.clone();
    let mut plain = init;
    let opt = OptimizerConfig::default();
    let (mut sp, mut sq) = (OptimizerState::new(opt, private.len()), OptimizerState::new(opt, plain.len()));
    let mut sampling = streams.stream(SAMPLING);
    let mut noise = streams.stream(NOISE);
    let mech = mechanism(f64::INFINITY, 0.0);
    for step in 1..=100 {
        let indices = rmtdp::dp::poisson_sample(train.len(), 0.1, &mut sampling);
        let batch = train.batch(&indices);
        dp_sgd_step(&model, &mut private, &batch, &mech, &mut sp, None, false, &mut noise, Execution::Sequential, step)
            .unwrap();
        sgd_step(&model, &mut plain, &batch, &mut sq, Execution::Sequential, step).unwrap();
    }
    let gap = private.iter().zip(&plain).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-12, "max parameter gap {gap}");
}

#[test]
fn empty_batch_gives_noise_only_update() {
    let model = mlp();
    let mut params = vec![0.0; model.layout().total_dim()];
    let mut state = OptimizerState::new(OptimizerConfig::default(), params.len());
    let mut rng = SeedStreams::new(1).stream(NOISE);
    let mech = mechanism(1.0, 2.0);
    let out =
        dp_sgd_step(&model, &mut params, &[], &mech, &mut state, None, false, &mut rng, Execution::Sequential, 1)
            .unwrap();
    assert_eq!(out.batch_size, 0);
    assert!(out.clipped_sum.iter().all(|&x| x == 0.0));
    assert_eq!(out.noisy, out.noise);
    let lr = OptimizerConfig::default().learning_rate;
    for (p, w) in params.iter().zip(&out.noise) {
        assert!((p + lr * w).abs() < 1e-15);
    }
}

#[test]
fn execution_mode_does_not_change_the_step() {
    let model = mlp();
    let (train, _) = task(4).generate().unwrap();
    let indices: Vec<usize> = (0..60).collect();
    let batch = train.batch(&indices);
    let init = model.init_params(&mut SeedStreams::new(2).stream(INIT));
    let run = |exec| {
        let mut params = init.clone();
        let mut state = OptimizerState::new(OptimizerConfig::default(), params.len());
        let mut rng = SeedStreams::new(2).stream(NOISE);
        let cfg = DenoiseConfig::default();
        dp_sgd_step(&model, &mut params, &batch, &mechanism(0.5, 1.0), &mut state, Some(&cfg), true, &mut rng, exec, 1)
            .unwrap();
        params
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn baseline_and_denoised_consume_identical_noise() {
    let model = mlp();
    let (train, _) = task(5).generate().unwrap();
    let indices: Vec<usize> = (0..80).collect();
    let batch = train.batch(&indices);
    let init = model.init_params(&mut SeedStreams::new(6).stream(INIT));
    let cfg = DenoiseConfig { min_dim: 4, ..DenoiseConfig::default() };
    let mut outcomes = Vec::new();
    for denoise in [None, Some(&cfg)] {
        let mut params = init.clone();
        let mut state = OptimizerState::new(OptimizerConfig::default(), params.len());
        let mut rng = SeedStreams::new(6).stream(NOISE);
        let out = dp_sgd_step(
            &model,
            &mut params,
            &batch,
            &mechanism(1.0, 1.0),
            &mut state,
            denoise,
            false,
            &mut rng,
            Execution::Sequential,
            1,
        )
        .unwrap();
        outcomes.push((out, rand::Rng::random::<u64>(&mut rng)));
    }
    assert_eq!(outcomes[0].0.noise, outcomes[1].0.noise);
    assert_eq!(outcomes[0].0.noisy, outcomes[1].0.noisy);
    assert_eq!(outcomes[0].1, outcomes[1].1, "noise streams diverged after the step");
}

struct Exploding {
    layout: PartitionLayout,
}

impl Model for Exploding {
    fn layout(&self) -> &PartitionLayout {
        &self.layout
    }

    fn loss_and_gradient(&self, params: &[f64], example: Example<'_>) -> (f64, Vec<f64>) {
        let mut g = vec![1.0; params.len()];
        if example.label == 1 {
            g[0] = f64::NAN;
        }
        (0.5, g)
    }

    fn predict(&self, _: &[f64], _: &[f64]) -> usize {
        0
    }
}

#[test]
fn non_finite_gradient_aborts_without_touching_params() {
    let model = Exploding { layout: PartitionLayout::new(vec![LayerSpec::matrix("w", 4, 4)]).unwrap() };
    let mut params = vec![0.25; 16];
    let mut state = OptimizerState::new(OptimizerConfig::default(), 16);
    let mut rng = SeedStreams::new(1).stream(NOISE);
    let before = rng.clone();
    let x = [0.0; 2];
    let batch = [Example { features: &x, label: 0 }, Example { features: &x, label: 1 }];
    let err = dp_sgd_step(&model, &mut params, &batch, &mechanism(1.0, 1.0), &mut state, None, false, &mut rng, Execution::Parallel, 7)
        .unwrap_err();
    assert!(matches!(err, Error::NonFiniteStep { step: 7, .. }));
    assert!(params.iter().all(|&p| p == 0.25));
    assert_eq!(rng, before);
}

#[test]
fn denoising_the_average_matches_denoising_the_sum() {
    let mech = mechanism(1.0, 2.0);
    let divisor = 50;
    let rank_one = DenseMatrix::from_fn(24, 32, |i, j| 6.0 * ((i + 1) as f64).sin() * ((j + 2) as f64).cos()).unwrap();
    let noise = DenseMatrix::from_fn(24, 32, |i, j| 2.0 * (((i * 31 + j * 17) % 13) as f64 - 6.0) / 3.7).unwrap();
    let sum = rank_one.add(&noise);
    let avg = sum.scaled(1.0 / divisor as f64);
    let cfg = DenoiseConfig::default();
    let (from_sum, r1) = denoise_gated(&sum, effective_sigma(&mech, 1), &cfg).unwrap();
    let (from_avg, r2) = denoise_gated(&avg, effective_sigma(&mech, divisor), &cfg).unwrap();
    assert!(r1.applied && r2.applied);
    assert_eq!(r1.retained_rank, r2.retained_rank);
    assert!((r1.gate_ratio - r2.gate_ratio).abs() < 1e-12);
    let gap = from_sum.scaled(1.0 / divisor as f64).frobenius_distance(&from_avg);
    assert!(gap <= 1e-12 * from_avg.frobenius_norm().max(1.0), "gap {gap}");
}

#[test]
fn adaptive_optimizer_runs_under_dp() {
    let model = mlp();
    let (train, _) = task(8).generate().unwrap();
    let indices: Vec<usize> = (0..40).collect();
    let batch = train.batch(&indices);
    let mut params = model.init_params(&mut SeedStreams::new(1).stream(INIT));
    let opt = OptimizerConfig { kind: OptimizerKind::AdaptiveMoment, learning_rate: 0.01, ..OptimizerConfig::default() };
    let mut state = OptimizerState::new(opt, params.len());
    let mut rng = SeedStreams::new(1).stream(NOISE);
    for step in 1..=5 {
        dp_sgd_step(&model, &mut params, &batch, &mechanism(1.0, 1.0), &mut state, None, false, &mut rng, Execution::Sequential, step)
            .unwrap();
    }
    assert!(params.iter().all(|p| p.is_finite()));
    assert_eq!(state.steps(), 5);
}
