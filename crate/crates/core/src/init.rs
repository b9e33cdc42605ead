//! Seeded random model construction for property tests and smoke runs.
//!
//! Weights and biases draw from a zero-mean normal with std 0.02; layer
//! norms start at gamma = 1 / beta = 0 and GRN affines at zero, so fresh
//! models bypass the GRN exactly.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ModelConfig;
use crate::error::Result;
use crate::model::{param_specs, InitKind, Model};

pub const INIT_STD: f64 = 0.02;

pub fn random_model(config: &ModelConfig, seed: u64) -> Result<Model<f32>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut tensors = HashMap::new();
    for spec in param_specs(config) {
        let n = spec.elem_count();
        let data: Vec<f32> = match spec.init {
            InitKind::Normal => (0..n).map(|_| normal.sample(&mut rng) as f32).collect(),
            InitKind::Zero => vec![0.0; n],
            InitKind::One => vec![1.0; n],
        };
        tensors.insert(spec.name, (spec.shape, data));
    }
    Model::from_tensor_map(config.clone(), tensors)
}
