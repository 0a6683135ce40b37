//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::time::Instant;

use simlab::flow::{
    integrate, invariance_probe, perturbation_probe, Dataset, DatasetSpec, FlowConfig, LossFn, PerturbationConfig,
    ProbeConfig,
};
use simlab::liegeom::{lie_span_rank, LieSpanConfig};
use simlab::model::{Activation, LinearModel, Mlp, Model, NetworkLayout, TwoLayer};
use simlab::rng;
use simlab::symmetry::{
    check_infinitesimal_invariance, enumerate_leaves, GroupElement, NeuronPartition, PartitionMode, SimDescriptor,
    TieRelation, DEFAULT_CLASSIFY_TOL,
};
use simlab::verify::{
    degeneracy_report, leaf_member, leaf_rank_checks, linear_baseline_check, theorem_suite, BaselineConfig,
    SuiteConfig, SuiteName,
};

type Outcome = Result<(bool, String), simlab::Error>;

const DEEP_SCALE: f64 = 0.25;

fn probe20() -> ProbeConfig {
    ProbeConfig::default()
        .with_trials(20)
        .with_horizon(5.0, 1e-3)
        .with_losses(LossFn::ALL.to_vec())
}

fn two_layer(act: Activation, m: usize, d: usize) -> Model {
    TwoLayer::new(act, m, d).unwrap().into()
}

fn deep(act: Activation) -> Model {
    Mlp::new(act, vec![2, 3, 2, 1]).unwrap().into()
}

fn on_manifold(model: &Model, sim: &SimDescriptor, seed: u64, scale: f64) -> Result<Vec<f64>, simlab::Error> {
    sim.project(model, &model.random_theta(&mut rng::seeded(seed), scale))
}

fn lie_rank_generic() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut n = 0;
    for act in [Activation::Tanh, Activation::Softplus] {
        for (m, d) in [(2, 1), (3, 2), (4, 3)] {
            let model = two_layer(act, m, d);
            let net = model.as_two_layer().unwrap().clone();
            let mut rng = rng::seeded(1000 + (m * 10 + d) as u64);
            let mut found = 0;
            while found < 20 {
                let theta = model.random_theta(&mut rng, 1.0);
                if !degeneracy_report(&net, &theta, 1e-3)?.non_degenerate {
                    continue;
                }
                let r = lie_span_rank(&model, &theta, &LieSpanConfig::default_for(&model).with_seed(found))?;
                if r.rank != (d + 1) * m || !r.confident {
                    bad.push(format!("{act} m={m} d={d}: rank {} gap {:.1e}", r.rank, r.gap_ratio));
                }
                found += 1;
                n += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        bad.is_empty() && secs < 10.0,
        format!("{n} points, {} off, {secs:.2} s {}", bad.len(), bad.join("; ")),
    ))
}

fn leaf_ranks() -> Outcome {
    let mut n = 0;
    let mut bad = Vec::new();
    let cases = [
        (Activation::Softplus, PartitionMode::Equality),
        (Activation::Exp, PartitionMode::Equality),
        (Activation::Tanh, PartitionMode::Sign),
    ];
    for (act, mode) in cases {
        for m in 1..=4 {
            for d in 1..=2 {
                let model = two_layer(act, m, d);
                for (k, leaf) in enumerate_leaves(m, mode)?.iter().enumerate() {
                    let seed = k as u64;
                    let theta = leaf_member(&model, leaf, seed)?;
                    let r = leaf_rank_checks(&model, leaf, &theta, seed)?;
                    n += 1;
                    if !r.passed {
                        bad.push(format!("{act} m={m} d={d} {}: {:?}", leaf.label(), r.failures));
                    }
                }
            }
        }
    }
    Ok((bad.is_empty(), format!("{n} leaves, {} failed {}", bad.len(), bad.join("; "))))
}

fn exp_example() -> Outcome {
    let model = two_layer(Activation::Exp, 2, 1);
    let cfg = LieSpanConfig::default_for(&model);
    let diag = lie_span_rank(&model, &[1.0, 0.7, 1.0, 0.7], &cfg)?;
    let off = lie_span_rank(&model, &[1.0, 0.7, -0.5, 1.3], &cfg)?;
    let leaf = NeuronPartition::new(PartitionMode::Equality, vec![vec![0, 1]], vec![], None, DEFAULT_CLASSIFY_TOL)?;
    let sim = SimDescriptor::EqualityClass { partition: leaf };
    let probe = invariance_probe(&model, &sim, &[1.0, 0.7, 1.0, 0.7], &probe20())?;
    let pass = diag.rank == 2 && off.rank == 4 && probe.max_drift <= 1e-8;
    Ok((
        pass,
        format!(
            "diagonal rank {}, off-diagonal rank {}, drift {:.2e}",
            diag.rank, off.rank, probe.max_drift
        ),
    ))
}

struct DescriptorCase {
    label: &'static str,
    model: fn(Activation) -> Model,
    sim: SimDescriptor,
    holds: Vec<Activation>,
    escapes: Option<Activation>,
}

fn descriptor_flows() -> Outcome {
    let m3 = |a| two_layer(a, 3, 2);
    let m2 = |a| two_layer(a, 2, 1);
    let sign_pair = NeuronPartition::new(PartitionMode::Sign, vec![vec![0, 1]], vec![], Some(vec![1, -1]), DEFAULT_CLASSIFY_TOL)?;
    let eq_pair = NeuronPartition::new(PartitionMode::Equality, vec![vec![0, 2], vec![1]], vec![], None, DEFAULT_CLASSIFY_TOL)?;
    let tie = |relation| SimDescriptor::PairTie { i: 0, j: 2, relation };
    let cases = vec![
        DescriptorCase {
            label: "equality_class",
            model: m3,
            sim: SimDescriptor::EqualityClass { partition: eq_pair },
            holds: Activation::ALL.to_vec(),
            escapes: None,
        },
        DescriptorCase {
            label: "sign_class (+,-)",
            model: m2,
            sim: SimDescriptor::SignClass { partition: sign_pair },
            holds: vec![Activation::Tanh],
            escapes: Some(Activation::Sigmoid),
        },
        DescriptorCase {
            label: "pair_tie equal",
            model: m3,
            sim: tie(TieRelation::Equal),
            holds: Activation::ALL.to_vec(),
            escapes: None,
        },
        DescriptorCase {
            label: "pair_tie negated",
            model: m3,
            sim: tie(TieRelation::Negated),
            holds: vec![Activation::Tanh],
            escapes: Some(Activation::Sigmoid),
        },
        DescriptorCase {
            label: "pair_tie even_mirror",
            model: m3,
            sim: tie(TieRelation::EvenMirror),
            holds: vec![Activation::CoshMinusOne],
            escapes: Some(Activation::Tanh),
        },
        DescriptorCase {
            label: "neuron_zero",
            model: m3,
            sim: SimDescriptor::NeuronZero { i: 1 },
            holds: vec![Activation::Tanh],
            escapes: Some(Activation::Sigmoid),
        },
        DescriptorCase {
            label: "weight_zero",
            model: m3,
            sim: SimDescriptor::WeightZero { i: 1 },
            holds: vec![Activation::CoshMinusOne],
            escapes: Some(Activation::Tanh),
        },
        DescriptorCase {
            label: "zero_pattern",
            model: deep,
            sim: SimDescriptor::ZeroPattern {
                sets: vec![vec![1], vec![0]],
            },
            holds: vec![Activation::Tanh],
            escapes: Some(Activation::Sigmoid),
        },
        DescriptorCase {
            label: "row_zero",
            model: deep,
            sim: SimDescriptor::RowZero { layer: 1, row: 0 },
            holds: vec![Activation::CoshMinusOne],
            escapes: Some(Activation::Tanh),
        },
    ];

    let mut bad = Vec::new();
    let mut worst_hold = 0.0_f64;
    let mut weakest_escape = f64::INFINITY;
    for (k, case) in cases.iter().enumerate() {
        let runs = case.holds.iter().map(|&a| (a, true)).chain(case.escapes.map(|a| (a, false)));
        for (act, should_hold) in runs {
            let model = (case.model)(act);
            let scale = if matches!(model, Model::Mlp(_)) { DEEP_SCALE } else { 0.5 };
            let theta = on_manifold(&model, &case.sim, 7 + k as u64, scale)?;
            let drift = invariance_probe(&model, &case.sim, &theta, &probe20().with_seed(k as u64))?.max_drift;
            let ok = if should_hold {
                worst_hold = worst_hold.max(drift);
                drift <= 1e-6
            } else {
                weakest_escape = weakest_escape.min(drift);
                drift >= 1e-2
            };
            if !ok {
                let verb = if should_hold { "hold" } else { "escape" };
                bad.push(format!("{} [{act}] should {verb}: drift {drift:.2e}", case.label));
            }
        }
    }
    Ok((
        bad.is_empty(),
        format!(
            "max held drift {worst_hold:.2e}, min escape {weakest_escape:.2e} {}",
            bad.join("; ")
        ),
    ))
}

fn deep_entry_constancy() -> Outcome {
    let model = deep(Activation::Tanh);
    let net = match &model {
        Model::Mlp(n) => n.clone(),
        _ => unreachable!(),
    };
    let layout = NetworkLayout::mlp(&net);
    // W^(2)_{1,2}: unit 1 of layer 2 reading unit 2 of layer 1
    let k = layout.weight_index(2, 0, 1);
    let sim = SimDescriptor::ZeroPattern {
        sets: vec![vec![1], vec![0]],
    };
    let theta = on_manifold(&model, &sim, 5, DEEP_SCALE)?;
    let mut worst = 0.0_f64;
    for (s, loss) in LossFn::ALL.into_iter().enumerate() {
        let mut data = Dataset::generate(&DatasetSpec::gaussian(25, s as u64), 2)?;
        if loss == LossFn::Logistic {
            data = data.with_sign_targets();
        }
        let traj = integrate(&model, &theta, &data, loss, &FlowConfig::new(5.0, 1e-3))?;
        worst = traj.thetas.iter().map(|t| (t[k] - theta[k]).abs()).fold(worst, f64::max);
    }
    Ok((worst <= 1e-8, format!("max |W2_12(t) - W2_12(0)| = {worst:.2e}")))
}

fn infinitesimal() -> Outcome {
    let sign = GroupElement::sign(vec![vec![-1, 1, 1], vec![1, 1]]);
    let sign_prime = GroupElement::sign_prime(vec![vec![-1, 1, 1], vec![1, -1], vec![1]]);
    let worst = |act: Activation, g: &GroupElement| -> Result<f64, simlab::Error> {
        let model = deep(act);
        let sim = SimDescriptor::FixedPointSet {
            elements: vec![g.clone()],
        };
        let mut w = 0.0_f64;
        for point in 0..10 {
            let theta = on_manifold(&model, &sim, 40 + point, DEEP_SCALE)?;
            w = w.max(check_infinitesimal_invariance(&model, g, &theta, 100, point)?.max_violation);
        }
        Ok(w)
    };
    let tanh = worst(Activation::Tanh, &sign)?;
    let cosh = worst(Activation::CoshMinusOne, &sign_prime)?;
    let sigmoid = worst(Activation::Sigmoid, &sign)?;
    Ok((
        tanh < 1e-10 && cosh < 1e-10 && sigmoid > 1e-3,
        format!("tanh {tanh:.2e}, cosh-1 {cosh:.2e}, sigmoid {sigmoid:.2e}"),
    ))
}

struct ConfinementRow {
    label: &'static str,
    act: Activation,
    theta: [f64; 4],
    constraint: SimDescriptor,
    confined: bool,
}

fn perturbation_table() -> Outcome {
    let out0 = SimDescriptor::OutputZero { i: 0 };
    let w0 = SimDescriptor::WeightZero { i: 0 };
    let tie = SimDescriptor::WeightTie { i: 0, j: 1, negated: false };
    let neg = SimDescriptor::WeightTie { i: 0, j: 1, negated: true };
    let rows = [
        ConfinementRow { label: "a=w=0", act: Activation::Tanh, theta: [0.0, 0.0, 0.8, -0.6], constraint: out0.clone(), confined: true },
        ConfinementRow { label: "a=w=0", act: Activation::Sigmoid, theta: [0.0, 0.0, 0.8, -0.6], constraint: out0.clone(), confined: false },
        ConfinementRow { label: "a=w=0", act: Activation::CoshMinusOne, theta: [0.0, 0.0, 0.8, -0.6], constraint: out0, confined: true },
        ConfinementRow { label: "w=0, a!=0", act: Activation::Tanh, theta: [0.9, 0.0, 0.8, -0.6], constraint: w0.clone(), confined: false },
        ConfinementRow { label: "w=0, a!=0", act: Activation::Softplus, theta: [0.9, 0.0, 0.8, -0.6], constraint: w0.clone(), confined: false },
        ConfinementRow { label: "w=0, a!=0", act: Activation::CoshMinusOne, theta: [0.9, 0.0, 0.8, -0.6], constraint: w0, confined: true },
        ConfinementRow { label: "w_i=w_j, a_i=a_j", act: Activation::Tanh, theta: [0.5, 0.7, 0.5, 0.7], constraint: tie.clone(), confined: true },
        ConfinementRow { label: "w_i=w_j, a_i!=a_j", act: Activation::Sigmoid, theta: [0.5, 0.7, -1.1, 0.7], constraint: tie.clone(), confined: false },
        ConfinementRow { label: "w_i=w_j, a_i!=a_j", act: Activation::CoshMinusOne, theta: [0.5, 0.7, -1.1, 0.7], constraint: tie, confined: false },
        ConfinementRow { label: "w_i=-w_j, a_i=-a_j", act: Activation::Tanh, theta: [0.5, 0.7, -0.5, -0.7], constraint: neg.clone(), confined: true },
        ConfinementRow { label: "w_i=-w_j, a_i=a_j", act: Activation::Tanh, theta: [0.5, 0.7, 0.5, -0.7], constraint: neg.clone(), confined: false },
        ConfinementRow { label: "w_i=-w_j, a_i=a_j", act: Activation::CoshMinusOne, theta: [0.5, 0.7, 0.5, -0.7], constraint: neg, confined: true },
    ];
    let mut bad = Vec::new();
    for row in &rows {
        let model = two_layer(row.act, 2, 1);
        let r = perturbation_probe(&model, &row.theta, &row.constraint, &PerturbationConfig::default())?;
        if r.escaped == row.confined {
            bad.push(format!(
                "{} [{}] {}: motion {:.2e}",
                row.label,
                row.act,
                if row.confined { "escaped" } else { "stayed" },
                r.max_constraint_motion
            ));
        }
    }
    Ok((bad.is_empty(), format!("{} rows, {} mismatched {}", rows.len(), bad.len(), bad.join("; "))))
}

fn linear_baseline() -> Outcome {
    let model = LinearModel::monomials(1, 5);
    let r = linear_baseline_check(&model, &BaselineConfig::default())?;
    Ok((
        r.passed && model.n_params() == 6,
        format!("M = {}, failures {:?}", model.n_params(), r.failures),
    ))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn derivatives_and_rk4_order() -> Outcome {
    let models = [two_layer(Activation::Tanh, 3, 2), two_layer(Activation::Softplus, 4, 3), deep(Activation::Tanh)];
    let mut rng = rng::seeded(9);
    let (mut grad_err, mut hvp_err) = (0.0_f64, 0.0_f64);
    let h = 1e-6;
    for model in &models {
        for _ in 0..100 {
            let theta = model.random_theta(&mut rng, 0.5);
            let x = rng::normal_vec(&mut rng, model.input_dim());
            let g = model.grad_theta(&theta, &x)?;
            let mut diff = Vec::with_capacity(theta.len());
            for k in 0..theta.len() {
                let (mut p, mut q) = (theta.clone(), theta.clone());
                p[k] += h;
                q[k] -= h;
                diff.push(g[k] - (model.forward(&p, &x)? - model.forward(&q, &x)?) / (2.0 * h));
            }
            grad_err = grad_err.max(norm(&diff) / norm(&g).max(1e-3));

            let u = rng::normal_vec(&mut rng, theta.len());
            let v = rng::normal_vec(&mut rng, theta.len());
            let uhv: f64 = u.iter().zip(model.hess_theta_vec(&theta, &x, &v)?).map(|(a, b)| a * b).sum();
            let vhu: f64 = v.iter().zip(model.hess_theta_vec(&theta, &x, &u)?).map(|(a, b)| a * b).sum();
            hvp_err = hvp_err.max((uhv - vhu).abs() / uhv.abs().max(1.0));
        }
    }

    let model = two_layer(Activation::Tanh, 3, 2);
    let theta = model.random_theta(&mut rng::seeded(11), 1.0);
    let data = Dataset::generate(&DatasetSpec::gaussian(10, 3), 2)?;
    let run = |dt: f64| -> Result<Vec<f64>, simlab::Error> {
        Ok(integrate(&model, &theta, &data, LossFn::Square, &FlowConfig::new(1.0, dt))?
            .final_theta()
            .to_vec())
    };
    let (a, b, c) = (run(0.05)?, run(0.025)?, run(0.0125)?);
    let d1: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
    let d2: Vec<f64> = b.iter().zip(&c).map(|(p, q)| p - q).collect();
    let order = (norm(&d1) / norm(&d2)).log2();
    Ok((
        grad_err < 1e-6 && hvp_err < 1e-8 && order >= 3.5,
        format!("gradient rel err {grad_err:.2e}, hvp asymmetry {hvp_err:.2e}, rk4 order {order:.2}"),
    ))
}

fn invariant_map() -> Outcome {
    let r = theorem_suite(SuiteName::InvariantMapGate, &SuiteConfig::default())?;
    let drift = r.measured("flow drift from theta2 = 0").unwrap_or(0.0);
    Ok((r.passed && drift > 1e-2, format!("escape {drift:.2e}, failures {:?}", r.failures)))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("generic lie rank (d+1)m", lie_rank_generic),
        ("leaf ranks match predicted dimension", leaf_ranks),
        ("exp diagonal example", exp_example),
        ("descriptor flows hold or escape", descriptor_flows),
        ("deep zero-pattern entry constant", deep_entry_constancy),
        ("infinitesimal invariance", infinitesimal),
        ("confinement table", perturbation_table),
        ("linear baseline", linear_baseline),
        ("derivative oracles and rk4 order", derivatives_and_rk4_order),
        ("invariant map without symmetry", invariant_map),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "criterion {:>2}: {} {name} ({detail}) [{:.1} s]",
            n + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
