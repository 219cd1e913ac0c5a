use approx::assert_abs_diff_eq;
use moment_spectra::datagen::{random_network, sample, Profile, ReluNetwork, Samples};
use moment_spectra::evalharness::l2_error_analytic;
use moment_spectra::learner::{
    analytic_hypothesis, analytic_quadratic_form, build_quadratic_form, learn, projection_residual_bound,
    top_k_subspace, LearnConfig,
};
use moment_spectra::moments::analytic_moment;
use moment_spectra::rng::stream_rng;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

fn rotate(s: &Samples, u: &DMatrix<f64>) -> Samples {
    s.map_points(s.dim(), |x, out| {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..x.len()).map(|j| u[(i, j)] * x[j]).sum();
        }
    })
    .unwrap()
}

// E[ReLU(u.x) ReLU(v.x)] for unit u, v
fn relu_pair(rho: f64) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    ((1.0 - rho * rho).sqrt() + (std::f64::consts::PI - rho.acos()) * rho) / (2.0 * std::f64::consts::PI)
}

fn second_moment(net: &ReluNetwork) -> f64 {
    let (w, vs) = (net.weights(), net.directions());
    let mut s = 0.0;
    for i in 0..w.len() {
        for j in 0..w.len() {
            let rho: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
            s += w[i] * w[j] * relu_pair(rho);
        }
    }
    s
}

#[test]
fn rotation_equivariance() {
    for seed in 0..3u64 {
        let d = 4;
        let net = random_network(d, 2, Profile::Generic, seed).unwrap();
        let s1 = sample(&net, 4000, 10 + seed);
        let s2 = sample(&net, 4000, 20 + seed);
        let u = random_orthogonal(d, seed);
        let mut cfg = LearnConfig::new(2, d, 0.3);
        cfg.degree_d = Some(10);
        let h = learn(&s1, &s2, &cfg).unwrap().hypothesis;
        let hu = learn(&rotate(&s1, &u), &rotate(&s2, &u), &cfg).unwrap().hypothesis;
        let mut rng = stream_rng(99, seed);
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let ux: Vec<f64> = (0..d).map(|i| (0..d).map(|j| u[(i, j)] * x[j]).sum()).collect();
            let a = h.predict(&x).unwrap();
            let b = hu.predict(&ux).unwrap();
            assert!((a - b).abs() <= 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn analytic_input_error_decomposition() {
    for seed in 0..6u64 {
        let k = 1 + (seed as usize % 3);
        let d = k + 2;
        let net = random_network(d, k, Profile::Generic, 100 + seed).unwrap();
        let cutoff = 4 * k;
        let ts: Vec<_> = (1..=cutoff).map(|m| analytic_moment(&net, m).unwrap()).collect();
        let a = build_quadratic_form(&ts).unwrap();
        let basis = top_k_subspace(&a, k, 1e-10).unwrap().basis;
        let degree = cutoff + 2;
        let h = analytic_hypothesis(&net, &basis, degree).unwrap();
        let report = l2_error_analytic(&net, &h, 400).unwrap();

        // dense route: lifted per-order errors plus E[F^2] minus the captured moment mass
        let bt = basis.transpose();
        let mut inside = 0.0;
        let mut captured = 0.0;
        for (m, p) in h.coeffs().iter().enumerate() {
            let mm = analytic_moment(&net, m).unwrap();
            inside += p.project(&bt).unwrap().sub(&mm).unwrap().norm2().powi(2);
            captured += mm.norm2().powi(2);
        }
        let want = inside + second_moment(&net) - captured;
        assert_abs_diff_eq!(report.value.powi(2), want, epsilon = 1e-8);
    }
}

#[test]
fn residual_bound_on_random_networks() {
    for seed in 0..50u64 {
        let k = 1 + (seed as usize % 3);
        let d = k + 1 + (seed as usize % 4);
        let net = random_network(d, k, Profile::Generic, 500 + seed).unwrap();
        let a = analytic_quadratic_form(&net, 4 * k);
        let basis = top_k_subspace(&a, k, 1e-10).unwrap().basis;
        let check = projection_residual_bound(&net, &basis, 4 * k + 6).unwrap();
        assert!(check.passed, "seed {seed}: {check:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenpairs_are_accurate(seed in any::<u64>(), d in 2usize..8, k_frac in 0.0f64..1.0) {
        let k = 1 + ((d - 1) as f64 * k_frac) as usize;
        let mut rng = stream_rng(seed, 0);
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = &g * g.transpose();
        let s = top_k_subspace(&a, k, 1e-10).unwrap();
        let norm = a.norm();
        for j in 0..k {
            let b = s.basis.column(j);
            prop_assert!((&a * b - b * s.eigenvalues[j]).norm() <= 1e-8 * norm);
        }
        prop_assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let gram = s.basis.transpose() * &s.basis;
        prop_assert!((gram - DMatrix::identity(k, k)).amax() <= 1e-10);
    }

    #[test]
    fn quadratic_form_is_psd_and_matches_contractions(seed in any::<u64>(), d in 1usize..5) {
        let net = random_network(d.max(1), 1, Profile::Generic, seed).unwrap();
        let ts: Vec<_> = (1..=4).map(|m| analytic_moment(&net, m).unwrap()).collect();
        let a = build_quadratic_form(&ts).unwrap();
        let mut rng = stream_rng(seed, 1);
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let q: f64 = ts.iter().map(|t| t.contract(&v).unwrap().norm2().powi(2)).sum();
        let vv = nalgebra::DVector::from_column_slice(&v);
        let quad = (vv.transpose() * &a * &vv)[(0, 0)];
        prop_assert!((quad - q).abs() <= 1e-12 * (1.0 + q));
        prop_assert!(quad >= -1e-14);
    }
}
