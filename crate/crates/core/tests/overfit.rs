use docknav::imaging::{render, sensor_intrinsics, sun_direction_from_elevation, Background, FixtureModel, RenderSettings};
use docknav::nn::train::Sample;
use docknav::nn::{image_to_input, prediction_to_pose, train, TrainConfig, TrainingData};
use docknav::trajgen::{generate, TrajectoryConfig};

/// Memorisation sanity check: eight frames, 200 epochs, no augmentation.
#[test]
fn network_memorises_eight_frames() {
    let (w, h) = (93, 60);
    let k = sensor_intrinsics(w, h);
    let traj = generate(&TrajectoryConfig::default()).unwrap();
    let fixture = FixtureModel::procedural();
    let settings = RenderSettings { background: Background::Perlin, sun_direction: sun_direction_from_elevation(30.0), seed: 1 };
    let step = traj.len() / 8;
    let samples: Vec<Sample> = (0..8)
        .map(|i| {
            let pose = traj[i * step].pose;
            Sample { image: render(&k, &pose, &fixture, &settings).unwrap(), pose, camera: k }
        })
        .collect();
    let data = TrainingData { train: samples.clone(), val: vec![], input: (w as usize, h as usize) };
    let cfg = TrainConfig { epochs: 200, batch_size: 2, lr_max: 3e-3, dropout_p: 0.0, downscale: 8, augment: false, ..Default::default() };
    let out = train(&data, &cfg).unwrap();
    let mean = samples
        .iter()
        .map(|s| {
            let p = out.network.forward(&image_to_input(&s.image), h as usize, w as usize).unwrap();
            (prediction_to_pose(&p).unwrap().translation - s.pose.translation).norm()
        })
        .sum::<f64>()
        / samples.len() as f64;
    assert!(mean < 0.05, "mean train position error {mean} m");
}
