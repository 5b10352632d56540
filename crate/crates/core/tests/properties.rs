use proptest::prelude::*;

use spqn_core::builders::{build_baseline_spn, build_conv_spqn, random_cmo_network, ConvLayerSpec, ConvNetSpec};
use spqn_core::eval::Evaluator;
use spqn_core::graph::topological_order;
use spqn_core::math;
use spqn_core::oracle::enumerate_distribution;
use spqn_core::sample::{CacheMode, Sampler};
use spqn_core::train::{adam_step, AdamState, TrainConfig};
use spqn_core::validate::{self, Profile};
use spqn_core::{evaluate, evaluate_trace, Error, Evidence, Model, Node, NodeId, ParamVector, Value, VarSet};

fn random_model() -> impl Strategy<Value = Model> {
    (1usize..=8, 1usize..=3, 0u64..1_000_000).prop_map(|(n, depth, seed)| random_cmo_network(n, depth, 2.0, seed).unwrap())
}

fn evidence(n: usize) -> impl Strategy<Value = Evidence> {
    proptest::collection::vec(prop_oneof![Just(Value::Zero), Just(Value::One), Just(Value::Star)], n).prop_map(Evidence::new)
}

/// Random conv specs with length 2^k (k <= 3) and stride-2 layers.
fn conv_spec(overlap: bool) -> impl Strategy<Value = ConvNetSpec> {
    (1usize..=3, 1usize..=3, proptest::collection::vec((1usize..=3, 0usize..=2), 3)).prop_map(move |(k, c0, layers)| {
        let mut len = 1 << k;
        let mut out = Vec::new();
        for &(channels, extra) in layers.iter().take(k) {
            len /= 2;
            out.push(ConvLayerSpec {
                stride: 2,
                receptive_field: if overlap { 2 + extra } else { 2 },
                channels: if len == 1 { 1 } else { channels },
            });
        }
        ConvNetSpec {
            input_length: 1 << k,
            leaf_channels: c0,
            layers: out,
        }
    })
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scope_identities(model in random_model()) {
        let net = &model.network;
        let s = net.scopes();
        for (i, node) in net.nodes().iter().enumerate() {
            let id = NodeId(i as u32);
            prop_assert_eq!(s.conditional(id), &s.scope(id).difference(s.effective(id)));
            let mut scope = VarSet::empty(net.num_vars());
            let mut eff = VarSet::empty(net.num_vars());
            node.for_each_child(|c| {
                scope.union_with(s.scope(c));
                eff.union_with(s.effective(c));
            });
            match node {
                Node::Indicator { var, .. } => prop_assert_eq!(s.scope(id).to_vec(), vec![*var]),
                Node::Quotient { numerator, denominator } => {
                    prop_assert_eq!(s.scope(id), &scope);
                    prop_assert_eq!(s.effective(id), &s.effective(*numerator).difference(s.effective(*denominator)));
                }
                _ => {
                    prop_assert_eq!(s.scope(id), &scope);
                    prop_assert_eq!(s.effective(id), &eff);
                }
            }
        }
    }

    #[test]
    fn topological_order_respects_edges(model in random_model()) {
        let net = &model.network;
        let order = topological_order(net.nodes(), net.root()).unwrap();
        let mut pos = vec![usize::MAX; net.len()];
        for (k, id) in order.iter().enumerate() {
            prop_assert_eq!(pos[id.index()], usize::MAX);
            pos[id.index()] = k;
        }
        prop_assert!(pos.iter().all(|&p| p != usize::MAX));
        for (i, node) in net.nodes().iter().enumerate() {
            node.for_each_child(|c| assert!(pos[c.index()] < pos[i]));
        }
    }

    #[test]
    fn quotient_free_networks_have_no_conditioning(spec in conv_spec(false), seed in 0u64..100) {
        let model = build_baseline_spn(&spec, seed).unwrap();
        let net = &model.network;
        let s = net.scopes();
        for i in 0..net.len() {
            let id = NodeId(i as u32);
            prop_assert_eq!(s.scope(id), s.effective(id));
        }
        let plain = validate::check_complete(net, s, false).passed() && validate::check_decomposable(net, s, false).passed();
        let conditional = validate::check_complete(net, s, true).passed() && validate::check_decomposable(net, s, true).passed();
        prop_assert!(plain && conditional);
    }

    #[test]
    fn valid_cmo_networks_are_sound_and_normalized(model in random_model()) {
        let report = validate::validate_profile(&model, Profile::ValidCmo, 20).unwrap();
        prop_assert!(report.passed(), "{}", report);
        let sound = validate::check_soundness_bruteforce(&model.network, &model.params, 20).unwrap();
        prop_assert!(sound.passed(), "{}", sound);
        let d = enumerate_distribution(&model.network, &model.params, 20).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-6);
        let all_star = evaluate(&model.network, &model.params, &Evidence::all_star(model.network.num_vars())).unwrap();
        prop_assert!(all_star.get().abs() < 1e-9);
    }

    #[test]
    fn overlapping_conv_networks_are_valid(spec in conv_spec(true), seed in 0u64..100) {
        let model = build_conv_spqn(&spec, seed).unwrap();
        let report = validate::validate_profile(&model, Profile::ValidCmo, 20).unwrap();
        prop_assert!(report.passed(), "{}", report);
        let d = enumerate_distribution(&model.network, &model.params, 20).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn marginals_match_enumeration((model, e) in random_model().prop_flat_map(|m| {
        let n = m.network.num_vars();
        (Just(m), evidence(n))
    })) {
        let d = enumerate_distribution(&model.network, &model.params, 20).unwrap();
        match evaluate(&model.network, &model.params, &e) {
            Ok(v) => {
                prop_assert!(validate::star_pattern_violation(&model.network, &e).is_none());
                prop_assert!(close(v.prob(), d.marginal_prob(&e)), "{} vs {}", v.prob(), d.marginal_prob(&e));
            }
            Err(Error::StarPattern { .. }) => prop_assert!(validate::star_pattern_violation(&model.network, &e).is_some()),
            Err(other) => prop_assert!(false, "{}", other),
        }
    }

    #[test]
    fn evaluation_is_deterministic((model, e) in random_model().prop_flat_map(|m| {
        let n = m.network.num_vars();
        (Just(m), evidence(n))
    })) {
        let a = Evaluator::new(&model.network, &model.params).unwrap().evaluate_unchecked(&e).unwrap();
        let b = Evaluator::new(&model.network, &model.params).unwrap().evaluate_unchecked(&e).unwrap();
        prop_assert_eq!(a.get().to_bits(), b.get().to_bits());
    }

    #[test]
    fn log_sum_exp_stays_finite(values in proptest::collection::vec(-300.0f64..300.0, 1..20)) {
        let r = math::log_sum_exp(&values);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.is_finite());
        prop_assert!(r >= max && r <= max + (values.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn samples_respect_support_and_conditioning((model, seed, pick) in (random_model(), 0u64..1000, 0usize..64)) {
        let n = model.network.num_vars();
        let sampler = Sampler::new(&model.network, &model.params).unwrap();
        let witness = sampler.sample_batch(&Evidence::all_star(n), 1, seed).unwrap().remove(0);
        // Observe a prefix-free subset of the witness, kept only if valid.
        let mut cond = Evidence::all_star(n);
        for i in 0..n {
            if pick >> i & 1 == 1 {
                cond.set(i, witness[i]);
            }
        }
        if validate::star_pattern_violation(&model.network, &cond).is_some() {
            cond = Evidence::all_star(n);
        }
        let full = Sampler::new(&model.network, &model.params).unwrap().with_mode(CacheMode::FullRecompute);
        let a = sampler.sample_batch(&cond, 20, seed).unwrap();
        let b = full.sample_batch(&cond, 20, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for s in &a {
            prop_assert!(!s.has_star());
            prop_assert!(evaluate(&model.network, &model.params, s).unwrap().get() > f64::NEG_INFINITY);
            for i in 0..n {
                if cond[i] != Value::Star {
                    prop_assert_eq!(cond[i], s[i]);
                }
            }
        }
    }

    #[test]
    fn adam_keeps_weights_normalized(
        model in random_model(),
        steps in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 64), 1..30),
    ) {
        let net = &model.network;
        let mut params = model.params.clone();
        let mut state = AdamState::new(net);
        let config = TrainConfig { learning_rate: 0.5, ..TrainConfig::default() };
        for g in &steps {
            let grad: Vec<f64> = (0..params.len()).map(|i| g[i % g.len()]).collect();
            adam_step(&mut state, &mut params, &grad, &config).unwrap();
        }
        for k in 0..net.blocks().len() {
            let w = params.weights(net, spqn_core::BlockId(k as u32));
            prop_assert!(w.iter().all(|x| x.is_finite() && *x > 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn extreme_weights_stay_finite() {
    let model = random_cmo_network(6, 2, 1.0, 3).unwrap();
    let mut params = model.params.clone();
    for (i, l) in params.as_mut_slice().iter_mut().enumerate() {
        *l = if i % 2 == 0 { -150.0 } else { 150.0 };
    }
    let d = enumerate_distribution(&model.network, &params, 20).unwrap();
    assert!((d.total() - 1.0).abs() < 1e-6);
    for code in 0..64 {
        let v = evaluate(&model.network, &params, &Evidence::from_index(6, code)).unwrap().get();
        assert!(!v.is_nan() && v < 1e-12);
    }
}

#[test]
fn shared_logit_reaches_every_position() {
    let spec = ConvNetSpec {
        input_length: 8,
        leaf_channels: 2,
        layers: vec![
            ConvLayerSpec { stride: 2, receptive_field: 4, channels: 2 },
            ConvLayerSpec { stride: 4, receptive_field: 4, channels: 1 },
        ],
    };
    let model = build_conv_spqn(&spec, 1).unwrap();
    let net = &model.network;
    let users = net.block_users();
    let (block, viewers) = users.iter().enumerate().max_by_key(|(_, u)| u.len()).unwrap();
    assert!(viewers.len() > 1);
    let e = Evidence::from_bits(&[true, false, true, true, false, false, true, false]);
    let before = evaluate_trace(net, &model.params, &e).unwrap();
    let mut params = model.params.clone();
    params.as_mut_slice()[net.blocks()[block].offset] += 0.3;
    let after = evaluate_trace(net, &params, &e).unwrap();
    for &v in viewers {
        assert_ne!(before[v], after[v], "node {v} ignores its shared block");
    }
    let (_, grad) = spqn_core::train::grad_mean_log_likelihood(net, &model.params, &[e]).unwrap();
    let spec = net.blocks()[block];
    assert!(grad[spec.offset..spec.offset + spec.len].iter().any(|g| g.abs() > 1e-6));
}

#[test]
fn oracle_marginalization_extremes() {
    let model = random_cmo_network(5, 2, 1.0, 8).unwrap();
    let d = enumerate_distribution(&model.network, &model.params, 20).unwrap();
    assert_eq!(d.marginalize(&VarSet::empty(5)), d);
    let all = d.marginalize(&VarSet::full(5));
    assert_eq!(all.num_vars(), 0);
    assert!((all.probs()[0] - 1.0).abs() < 1e-12);
    assert!(matches!(
        enumerate_distribution(&model.network, &model.params, 4),
        Err(Error::TooManyVars { num_vars: 5, max: 4 })
    ));
}

#[test]
fn parameters_must_match_layout() {
    let model = random_cmo_network(3, 2, 1.0, 1).unwrap();
    let short = ParamVector::new(vec![0.0; model.params.len() - 1]);
    assert!(evaluate(&model.network, &short, &Evidence::all_star(3)).is_err());
    let mut nan = model.params.clone();
    nan.as_mut_slice()[0] = f64::NAN;
    assert!(matches!(
        evaluate(&model.network, &nan, &Evidence::all_star(3)),
        Err(Error::NonFinite { index: 0, .. })
    ));
}
