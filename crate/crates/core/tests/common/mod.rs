#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;
use std::sync::OnceLock;

use faultnet::ann::{default_shape, Network, TrainConfig};
use faultnet::dataset::{generate_grid, grid_params, split, train_classifier, Init};
use faultnet::SurrogateModel;

/// Classifier trained on the 80% split of the seed-0 grid. Cached under the
/// cargo target directory so test binaries share one training run.
pub fn trained_model() -> &'static Network {
    static NET: OnceLock<Network> = OnceLock::new();
    NET.get_or_init(|| {
        let mut h = DefaultHasher::new();
        let seeds: Vec<u64> = grid_params(0, 0.0).iter().map(|p| p.rng_seed).collect();
        format!(
            "{:?}{:?}{seeds:?}",
            SurrogateModel::default(),
            TrainConfig::default()
        )
        .hash(&mut h);
        let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
            .join(format!("fixture-{:016x}.model", h.finish()));
        if let Ok(net) = Network::load(&path) {
            return net;
        }
        let grid = generate_grid(0).unwrap();
        let (train, _) = split(&grid, 0.2, 0).unwrap();
        let cfg = TrainConfig {
            max_epochs: 200,
            ..Default::default()
        };
        let (net, _) = train_classifier(&train, default_shape(), Init::Random, &cfg).unwrap();
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        net.save(&tmp).unwrap();
        std::fs::rename(&tmp, &path).unwrap();
        net
    })
}
