#![allow(dead_code)]

use cbrn::{default_chains, train_system, CbrnSystem, Dataset, DatasetManifest, SystemConfig, TrainingReport};

pub fn default_dataset(config: &SystemConfig) -> Dataset {
    DatasetManifest::default_synthetic()
        .resolve(
            &config.chain_order,
            config.neurons_per_ball,
            config.image_width,
            config.image_height,
        )
        .expect("default dataset resolves")
}

/// Default configuration trained on the synthetic default dataset.
pub fn trained_default() -> (CbrnSystem, Dataset, TrainingReport) {
    let config = SystemConfig::default();
    let dataset = default_dataset(&config);
    let chains = default_chains(&config).unwrap();
    let mut system = CbrnSystem::new(config).unwrap();
    let report = train_system(&mut system, &dataset, &chains).unwrap();
    (system, dataset, report)
}

/// Bitwise equality of every weight, flag, label and the configuration.
pub fn bit_identical(a: &CbrnSystem, b: &CbrnSystem) -> bool {
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    a.config() == b.config()
        && a.balls().len() == b.balls().len()
        && a.balls().iter().zip(b.balls()).all(|(x, y)| {
            x.attribute == y.attribute
                && x.neurons.iter().zip(&y.neurons).all(|(m, n)| {
                    m.learned == n.learned
                        && m.label == n.label
                        && bits(&m.w) == bits(&n.w)
                        && bits(&m.v) == bits(&n.v)
                })
        })
        && a.links().len() == b.links().len()
        && a.links().iter().zip(b.links()).all(|(x, y)| {
            x.from_ball == y.from_ball
                && x.to_ball == y.to_ball
                && bits(x.weights()) == bits(y.weights())
        })
}

/// Largest absolute weight difference between two same-shaped systems.
pub fn max_weight_delta(a: &CbrnSystem, b: &CbrnSystem) -> f64 {
    let mut max = 0.0f64;
    for (x, y) in a.balls().iter().zip(b.balls()) {
        for (m, n) in x.neurons.iter().zip(&y.neurons) {
            for (p, q) in m.w.iter().chain(&m.v).zip(n.w.iter().chain(&n.v)) {
                max = max.max((p - q).abs());
            }
        }
    }
    for (x, y) in a.links().iter().zip(b.links()) {
        for (p, q) in x.weights().iter().zip(y.weights()) {
            max = max.max((p - q).abs());
        }
    }
    max
}
