//! Property tests for group actions, leaf partitions, manifold descriptors
//! and gradient flow.

use proptest::prelude::*;
use simlab::flow::{integrate, Dataset, DatasetSpec, FlowConfig, LossFn};
use simlab::model::{Activation, Mlp, Model, NetworkLayout, TwoLayer};
use simlab::rng;
use simlab::symmetry::{
    classify_partition, enumerate_leaves, predicted_leaf_dim, set_partitions, GroupElement, NeuronPartition,
    PartitionMode, Permutation, SignedPerm, SimDescriptor,
};

fn perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn signs(n: usize) -> impl Strategy<Value = Vec<i8>> {
    prop::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], n)
}

fn signed_perm(n: usize) -> impl Strategy<Value = SignedPerm> {
    (signs(n), perm(n)).prop_map(|(signs, p)| SignedPerm {
        signs,
        perm: Permutation::new(p).unwrap(),
    })
}

/// Combined elements on hidden widths (3, 2).
fn deep_element() -> impl Strategy<Value = GroupElement> {
    (signed_perm(3), signed_perm(2)).prop_map(|(a, b)| GroupElement::combined(vec![a, b]))
}

fn deep_model() -> Model {
    Mlp::new(Activation::Tanh, vec![2, 3, 2, 1]).unwrap().into()
}

fn theta_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_action_is_an_exact_signed_permutation(g in deep_element(), theta in theta_of(20)) {
        let model = deep_model();
        let moved = g.apply(&model, &theta).unwrap();
        prop_assert!((norm2(&moved) - norm2(&theta)).abs() <= 1e-14 * norm2(&theta));
        let mut a: Vec<u64> = theta.iter().map(|v| v.abs().to_bits()).collect();
        let mut b: Vec<u64> = moved.iter().map(|v| v.abs().to_bits()).collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn composition_matches_sequential_application(
        g in deep_element(),
        h in deep_element(),
        theta in theta_of(20),
    ) {
        let model = deep_model();
        let gh = g.compose(&h).unwrap();
        let sequential = g.apply(&model, &h.apply(&model, &theta).unwrap()).unwrap();
        prop_assert_eq!(gh.apply(&model, &theta).unwrap(), sequential);
    }

    #[test]
    fn odd_networks_are_invariant_under_the_combined_group(
        g in deep_element(),
        theta in theta_of(20),
        x in prop::collection::vec(-2.0..2.0f64, 2),
    ) {
        let model = deep_model();
        let a = model.forward(&theta, &x).unwrap();
        let b = model.forward(&g.apply(&model, &theta).unwrap(), &x).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }

    #[test]
    fn identity_is_neutral(g in deep_element(), theta in theta_of(20)) {
        let model = deep_model();
        let layout = model.layout().unwrap();
        let e = g.identity_like(&layout);
        prop_assert_eq!(e.apply(&model, &theta).unwrap(), theta.clone());
        prop_assert_eq!(g.compose(&e).unwrap().apply(&model, &theta).unwrap(), g.apply(&model, &theta).unwrap());
    }
}

fn leaves_upto(m_max: usize) -> Vec<(usize, NeuronPartition)> {
    let mut out = Vec::new();
    for m in 1..=m_max {
        for mode in [PartitionMode::Equality, PartitionMode::Sign] {
            for p in enumerate_leaves(m, mode).unwrap() {
                out.push((m, p));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leaf_members_classify_back_to_their_leaf(k in 0usize..1000, d in 1usize..=3, seed in any::<u64>()) {
        let leaves = leaves_upto(4);
        let (m, p) = &leaves[k % leaves.len()];
        let net = TwoLayer::new(Activation::Tanh, *m, d).unwrap();
        let theta = p.sample_member(d, &mut rng::seeded(seed));
        let got = classify_partition(&net, &theta, p.mode, 1e-9).unwrap();
        prop_assert_eq!(&got, p);
        prop_assert!(p.contains(&net, &theta, 1e-9));
    }

    #[test]
    fn leaf_descriptor_dimension_and_projection(k in 0usize..1000, d in 1usize..=2, seed in any::<u64>()) {
        let leaves = leaves_upto(4);
        let (m, p) = &leaves[k % leaves.len()];
        let model: Model = TwoLayer::new(Activation::Tanh, *m, d).unwrap().into();
        let sim = SimDescriptor::from_partition(p.clone());
        prop_assert_eq!(sim.dim(&model).unwrap(), predicted_leaf_dim(p, d));
        let raw = model.random_theta(&mut rng::seeded(seed), 1.0);
        let on = sim.project(&model, &raw).unwrap();
        prop_assert!(sim.distance(&model, &on).unwrap() <= 1e-12);
        prop_assert_eq!(sim.project(&model, &on).unwrap(), on);
    }

    /// Brute-force count of signed neuron permutations fixing a leaf member.
    #[test]
    fn stabilizer_order_matches_brute_force(k in 0usize..1000, seed in any::<u64>()) {
        let leaves = leaves_upto(4);
        let (m, p) = &leaves[k % leaves.len()];
        let d = 2;
        let theta = p.sample_member(d, &mut rng::seeded(seed));
        let neuron = |i: usize| &theta[i * (d + 1)..(i + 1) * (d + 1)];
        let sign_choices: Vec<Vec<i8>> = match p.mode {
            PartitionMode::Equality => vec![vec![1; *m]],
            PartitionMode::Sign => (0..1u32 << m)
                .map(|mask| (0..*m).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect())
                .collect(),
        };
        let mut count = 0u128;
        for pi in permutations(*m) {
            for s in &sign_choices {
                let fixed = (0..*m).all(|i| {
                    neuron(i).iter().zip(neuron(pi[i])).all(|(a, b)| *a == f64::from(s[i]) * b)
                });
                count += u128::from(fixed);
            }
        }
        prop_assert_eq!(count, p.stabilizer_order());
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn stirling2(n: usize, k: usize) -> u64 {
    match (n, k) {
        (0, 0) => 1,
        (_, 0) | (0, _) => 0,
        _ => k as u64 * stirling2(n - 1, k) + stirling2(n - 1, k - 1),
    }
}

fn binom(n: usize, k: usize) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

#[test]
fn leaf_counts() {
    let bell = [1u64, 1, 2, 5, 15, 52, 203];
    for m in 1..=6 {
        assert_eq!(set_partitions(&(0..m).collect::<Vec<_>>()).len() as u64, bell[m]);
        assert_eq!(enumerate_leaves(m, PartitionMode::Equality).unwrap().len() as u64, bell[m]);
        // zero block of size z, then a signed partition of the rest with
        // one free relative sign per non-leader
        let signed: u64 = (0..=m)
            .map(|z| {
                let rest = m - z;
                binom(m, z) * (0..=rest).map(|k| stirling2(rest, k) << (rest - k)).sum::<u64>()
            })
            .sum();
        assert_eq!(enumerate_leaves(m, PartitionMode::Sign).unwrap().len() as u64, signed, "m={m}");
    }
    assert!(enumerate_leaves(7, PartitionMode::Equality).is_err());
}

fn small_data(seed: u64, d: usize) -> Dataset {
    Dataset::generate(&DatasetSpec::gaussian(8, seed), d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn square_loss_does_not_increase_along_flow(seed in any::<u64>(), act_k in 0usize..6) {
        let act = Activation::ALL[act_k];
        let model: Model = TwoLayer::new(act, 3, 2).unwrap().into();
        let theta = model.random_theta(&mut rng::seeded(seed), 0.5);
        let data = small_data(seed ^ 1, 2);
        let traj = integrate(&model, &theta, &data, LossFn::Square, &FlowConfig::new(1.0, 1e-3)).unwrap();
        for w in traj.loss_values.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn neuron_permutation_commutes_with_flow(seed in any::<u64>(), p in perm(3), loss_k in 0usize..3) {
        let loss = LossFn::ALL[loss_k];
        let net = TwoLayer::new(Activation::Softplus, 3, 2).unwrap();
        let model: Model = net.clone().into();
        let layout = NetworkLayout::two_layer(&net);
        let g = GroupElement::perm(vec![Permutation::new(p).unwrap()]);
        prop_assert!(g.action(&layout).is_ok());
        let theta = model.random_theta(&mut rng::seeded(seed), 0.7);
        let mut data = small_data(seed ^ 2, 2);
        if loss == LossFn::Logistic {
            data = data.with_sign_targets();
        }
        let cfg = FlowConfig::new(0.5, 1e-3);
        let a = integrate(&model, &g.apply(&model, &theta).unwrap(), &data, loss, &cfg).unwrap();
        let b = integrate(&model, &theta, &data, loss, &cfg).unwrap();
        let gb = g.apply(&model, b.final_theta()).unwrap();
        for (u, v) in a.final_theta().iter().zip(&gb) {
            prop_assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0), "{u} vs {v}");
        }
    }
}
