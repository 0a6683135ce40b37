//! Forward values, gradients and Hessian-vector products against
//! independent oracles: naive re-implementations and finite differences.

use simlab::model::{Activation, Basis, LinearModel, Mlp, Model, Term, TwoLayer};
use simlab::rng::{self, SeededRng};
use simlab::symmetry::GroupElement;

fn sigma(act: Activation, z: f64) -> f64 {
    match act {
        Activation::Tanh => z.tanh(),
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Softplus => (1.0 + z.exp()).ln(),
        Activation::Exp => z.exp(),
        Activation::CoshMinusOne => z.cosh() - 1.0,
        Activation::Sin => z.sin(),
    }
}

fn naive_two_layer(act: Activation, m: usize, d: usize, theta: &[f64], x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..m {
        let a = theta[i * (d + 1)];
        let w = &theta[i * (d + 1) + 1..(i + 1) * (d + 1)];
        let z: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
        s += a * sigma(act, z);
    }
    s
}

fn naive_mlp(act: Activation, widths: &[usize], theta: &[f64], x: &[f64]) -> f64 {
    let mut h = x.to_vec();
    let mut k = 0;
    for pair in widths.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let w = &theta[k..k + n_in * n_out];
        let b = &theta[k + n_in * n_out..k + n_in * n_out + n_out];
        k += n_in * n_out + n_out;
        h = (0..n_out)
            .map(|i| sigma(act, (0..n_in).map(|j| w[i * n_in + j] * h[j]).sum::<f64>() + b[i]))
            .collect();
    }
    h[0]
}

fn models() -> Vec<Model> {
    let mut out: Vec<Model> = Vec::new();
    for act in Activation::ALL {
        out.push(TwoLayer::new(act, 3, 2).unwrap().into());
        out.push(Mlp::new(act, vec![2, 3, 2, 1]).unwrap().into());
    }
    out.push(LinearModel::monomials(2, 2).into());
    out.push(Model::Linear(
        LinearModel::new(
            1,
            Basis::Terms {
                terms: vec![Term { coeff: 1.0, powers: vec![1] }, Term { coeff: -1.0, powers: vec![1] }],
            },
        )
        .unwrap(),
    ));
    out
}

// nested exp and cosh layers overflow at unit scale
fn scale_for(model: &Model) -> f64 {
    match (model, model.activation()) {
        (Model::Mlp(_), _) => 0.3,
        (_, Some(Activation::Exp | Activation::CoshMinusOne)) => 0.5,
        _ => 1.0,
    }
}

fn draw(model: &Model, rng: &mut SeededRng) -> (Vec<f64>, Vec<f64>) {
    let theta = model.random_theta(rng, scale_for(model));
    let x: Vec<f64> = rng::normal_vec(rng, model.input_dim()).into_iter().map(|v| v * 0.8).collect();
    (theta, x)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[test]
fn forward_matches_naive_summation() {
    let mut rng = rng::seeded(1);
    for act in Activation::ALL {
        for (m, d) in [(1, 1), (3, 2), (4, 3)] {
            let model: Model = TwoLayer::new(act, m, d).unwrap().into();
            for _ in 0..20 {
                let (theta, x) = draw(&model, &mut rng);
                let want = naive_two_layer(act, m, d, &theta, &x);
                let got = model.forward(&theta, &x).unwrap();
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{act} m={m} d={d}");
            }
        }
        let widths = vec![2, 3, 2, 1];
        let model: Model = Mlp::new(act, widths.clone()).unwrap().into();
        for _ in 0..20 {
            let (theta, x) = draw(&model, &mut rng);
            let want = naive_mlp(act, &widths, &theta, &x);
            let got = model.forward(&theta, &x).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{act} mlp");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let h = 1e-6;
    let mut rng = rng::seeded(2);
    for model in models() {
        for _ in 0..100 {
            let (theta, x) = draw(&model, &mut rng);
            let g = model.grad_theta(&theta, &x).unwrap();
            let fd: Vec<f64> = (0..theta.len())
                .map(|k| {
                    let mut p = theta.clone();
                    let mut q = theta.clone();
                    p[k] += h;
                    q[k] -= h;
                    (model.forward(&p, &x).unwrap() - model.forward(&q, &x).unwrap()) / (2.0 * h)
                })
                .collect();
            let err: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            let rel = norm(&err) / norm(&g).max(1e-3);
            assert!(rel < 1e-6, "{model:?}: rel err {rel}");
        }
    }
}

#[test]
fn hessian_vector_products_are_symmetric_and_match_gradient_differences() {
    let h = 1e-6;
    let mut rng = rng::seeded(3);
    for model in models() {
        for _ in 0..20 {
            let (theta, x) = draw(&model, &mut rng);
            let u = rng::normal_vec(&mut rng, theta.len());
            let v = rng::normal_vec(&mut rng, theta.len());
            let hv = model.hess_theta_vec(&theta, &x, &v).unwrap();
            let hu = model.hess_theta_vec(&theta, &x, &u).unwrap();
            let (uhv, vhu) = (dot(&u, &hv), dot(&v, &hu));
            assert!((uhv - vhu).abs() < 1e-8 * uhv.abs().max(1.0), "{model:?}: {uhv} vs {vhu}");

            let plus: Vec<f64> = theta.iter().zip(&v).map(|(t, vi)| t + h * vi).collect();
            let minus: Vec<f64> = theta.iter().zip(&v).map(|(t, vi)| t - h * vi).collect();
            let gp = model.grad_theta(&plus, &x).unwrap();
            let gm = model.grad_theta(&minus, &x).unwrap();
            let fd: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let err: Vec<f64> = hv.iter().zip(&fd).map(|(a, b)| a - b).collect();
            assert!(norm(&err) <= 1e-5 * norm(&hv).max(1.0), "{model:?}");
        }
    }
}

#[test]
fn linear_models_have_zero_hessian() {
    let model: Model = LinearModel::monomials(2, 3).into();
    let mut rng = rng::seeded(4);
    let (theta, x) = draw(&model, &mut rng);
    let v = rng::normal_vec(&mut rng, theta.len());
    assert!(model.hess_theta_vec(&theta, &x, &v).unwrap().iter().all(|&h| h == 0.0));
}

#[test]
fn neuron_permutation_leaves_output_unchanged() {
    let mut rng = rng::seeded(5);
    for act in Activation::ALL {
        let model: Model = TwoLayer::new(act, 4, 2).unwrap().into();
        for (i, j) in [(0, 1), (1, 3), (0, 3)] {
            let g = GroupElement::neuron_swap(4, i, j);
            for _ in 0..10 {
                let (theta, x) = draw(&model, &mut rng);
                let moved = g.apply(&model, &theta).unwrap();
                let a = model.forward(&theta, &x).unwrap();
                let b = model.forward(&moved, &x).unwrap();
                assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0), "{act}");
                // gradient is equivariant: ∇F(gθ) = g ∇F(θ)
                let ga = g.apply(&model, &model.grad_theta(&theta, &x).unwrap()).unwrap();
                let gb = model.grad_theta(&moved, &x).unwrap();
                assert!(ga.iter().zip(&gb).all(|(p, q)| (p - q).abs() <= 1e-13 * p.abs().max(1.0)));
            }
        }
    }
}

#[test]
fn odd_activation_sign_flip_leaves_output_unchanged() {
    let mut rng = rng::seeded(6);
    let model: Model = Mlp::new(Activation::Tanh, vec![2, 3, 2, 1]).unwrap().into();
    let g = GroupElement::sign(vec![vec![-1, 1, -1], vec![1, -1]]);
    for _ in 0..20 {
        let (theta, x) = draw(&model, &mut rng);
        let moved = g.apply(&model, &theta).unwrap();
        let a = model.forward(&theta, &x).unwrap();
        let b = model.forward(&moved, &x).unwrap();
        assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    }
}

#[test]
fn even_activation_sign_prime_flip_leaves_output_unchanged() {
    let mut rng = rng::seeded(7);
    let model: Model = Mlp::new(Activation::CoshMinusOne, vec![2, 3, 2, 1]).unwrap().into();
    let g = GroupElement::sign_prime(vec![vec![-1, 1, 1], vec![1, -1], vec![-1]]);
    for _ in 0..20 {
        let (theta, x) = draw(&model, &mut rng);
        let moved = g.apply(&model, &theta).unwrap();
        let a = model.forward(&theta, &x).unwrap();
        let b = model.forward(&moved, &x).unwrap();
        assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }
}

#[test]
fn shape_errors() {
    let model: Model = TwoLayer::new(Activation::Tanh, 2, 2).unwrap().into();
    assert!(model.forward(&[1.0; 5], &[0.0, 0.0]).is_err());
    assert!(model.forward(&[1.0; 6], &[0.0]).is_err());
    assert!(model.grad_theta(&[1.0; 6], &[0.0; 3]).is_err());
    assert!(TwoLayer::new(Activation::Tanh, 0, 2).is_err());
    assert!(Mlp::new(Activation::Tanh, vec![2, 3, 2]).is_err());
}
