use rand::Rng;

use spqn_core::builders::{build_conv_spqn, build_leaf_cmo, ConvLayerSpec, ConvNetSpec};
use spqn_core::graph::NetworkBuilder;
use spqn_core::rng;
use spqn_core::train::{train, TrainConfig};
use spqn_core::{Evidence, ParamVector};

fn leaf_product(n: usize) -> (spqn_core::Network, ParamVector) {
    let mut b = NetworkBuilder::new(n);
    let leaves: Vec<_> = (0..n).map(|v| build_leaf_cmo(&mut b, v, [0.0, 0.0]).unwrap()).collect();
    let root = b.product(leaves).unwrap();
    b.finish(root).unwrap()
}

fn bernoulli_data(probs: &[f64], count: usize, seed: u64) -> Vec<Evidence> {
    let mut r = rng::stream(seed, 0);
    (0..count)
        .map(|_| Evidence::from_bits(&probs.iter().map(|&p| r.random::<f64>() < p).collect::<Vec<_>>()))
        .collect()
}

#[test]
fn leaf_product_likelihood_never_drops() {
    let probs = [0.1, 0.35, 0.5, 0.8, 0.95, 0.6];
    let (net, params) = leaf_product(probs.len());
    let data = bernoulli_data(&probs, 400, 5);
    let config = TrainConfig {
        learning_rate: 1e-2,
        batch_size: data.len(),
        epochs: 40,
        ..TrainConfig::default()
    };
    let (_, stats) = train(&net, &params, &data, None, &config).unwrap();
    for w in stats.windows(2) {
        assert!(w[1].train_ll >= w[0].train_ll - 1e-6, "{} -> {}", w[0].train_ll, w[1].train_ll);
    }
}

#[test]
fn leaf_product_approaches_empirical_frequencies() {
    let probs = [0.2, 0.7, 0.9];
    let (net, params) = leaf_product(probs.len());
    let data = bernoulli_data(&probs, 1000, 9);
    let config = TrainConfig {
        batch_size: data.len(),
        epochs: 300,
        ..TrainConfig::default()
    };
    let (trained, _) = train(&net, &params, &data, None, &config).unwrap();
    for (v, _) in probs.iter().enumerate() {
        let freq = data.iter().filter(|e| e[v] == spqn_core::Value::One).count() as f64 / data.len() as f64;
        let w = trained.weights(&net, spqn_core::BlockId(v as u32));
        assert!((w[1] - freq).abs() < 1e-3, "var {v}: {} vs {freq}", w[1]);
    }
}

#[test]
fn training_is_bit_reproducible() {
    let spec = ConvNetSpec {
        input_length: 8,
        leaf_channels: 2,
        layers: vec![
            ConvLayerSpec { stride: 2, receptive_field: 4, channels: 2 },
            ConvLayerSpec { stride: 4, receptive_field: 4, channels: 1 },
        ],
    };
    let model = build_conv_spqn(&spec, 2).unwrap();
    let data = bernoulli_data(&[0.3, 0.6, 0.5, 0.2, 0.9, 0.4, 0.5, 0.7], 300, 3);
    let config = TrainConfig {
        batch_size: 32,
        epochs: 3,
        seed: 4,
        ..TrainConfig::default()
    };
    let (a, sa) = train(&model.network, &model.params, &data, Some(&data[..50]), &config).unwrap();
    let (b, sb) = train(&model.network, &model.params, &data, Some(&data[..50]), &config).unwrap();
    let bits = |p: &ParamVector| p.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(sa, sb);
    let (c, _) = train(&model.network, &model.params, &data, None, &TrainConfig { seed: 5, ..config }).unwrap();
    assert_ne!(bits(&a), bits(&c));
}
