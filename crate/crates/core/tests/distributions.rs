mod common;

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reactmp::dist::{multiply_and_normalize, Distribution, Gaussian, Point, SampleGrid};
use reactmp::Error;

use common::{integrate_over, pdf, simpson, window};

/// Checks that `out` is the normalized product of `a` and `b` by numeric
/// integration of the raw density product.
fn check_product_against_grid(a: &Distribution, b: &Distribution, out: &Distribution, tol: f64) {
    let raw = |x: f64| {
        let v = pdf(a, x) * pdf(b, x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let z = integrate_over(out, raw);
    let mass = integrate_over(out, |x| pdf(out, x));
    assert!((mass - 1.0).abs() < tol, "{out:?} integrates to {mass}");
    let (lo, hi) = window(out);
    let peak = (0..=200).map(|i| pdf(out, lo + (hi - lo) * i as f64 / 200.0)).fold(0.0, f64::max);
    for i in 1..200 {
        let x = lo + (hi - lo) * i as f64 / 200.0;
        let diff = (raw(x) / z - pdf(out, x)).abs();
        assert!(diff <= tol * peak.max(1.0), "at {x}: {} vs {}", raw(x) / z, pdf(out, x));
    }
}

#[test]
fn gaussian_product_equal_precisions() {
    let n = Distribution::normal_mean_variance(0.0, 1.0).unwrap();
    let p = multiply_and_normalize(&n, &n).unwrap();
    assert_eq!(p.mean_scalar().unwrap(), 0.0);
    assert!((p.var_scalar().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn gaussian_product_weighted_form() {
    let a = Distribution::normal_weighted(1.0, 2.0).unwrap();
    let b = Distribution::normal_weighted(3.0, 4.0).unwrap();
    let p = multiply_and_normalize(&a, &b).unwrap();
    assert_eq!(p, Distribution::Gaussian(Gaussian::WeightedMeanPrecision { xi: 4.0, precision: 6.0 }));
    check_product_against_grid(&a, &b, &p, 1e-8);
}

#[test]
fn beta_product_adds_exponents() {
    let a = Distribution::beta(2.0, 3.0).unwrap();
    let b = Distribution::beta(4.0, 1.0).unwrap();
    let p = multiply_and_normalize(&a, &b).unwrap();
    assert_eq!(p, Distribution::beta(5.0, 3.0).unwrap());
    check_product_against_grid(&a, &b, &p, 1e-8);
}

#[test]
fn conjugate_products_match_grid_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let a = Distribution::normal_mean_variance(rng.random_range(-3.0..3.0), rng.random_range(0.2..4.0)).unwrap();
        let b = Distribution::normal_mean_precision(rng.random_range(-3.0..3.0), rng.random_range(0.2..4.0)).unwrap();
        check_product_against_grid(&a, &b, &multiply_and_normalize(&a, &b).unwrap(), 1e-8);

        let a = Distribution::gamma(rng.random_range(1.5..6.0), rng.random_range(0.5..3.0)).unwrap();
        let b = Distribution::gamma(rng.random_range(1.5..6.0), rng.random_range(0.5..3.0)).unwrap();
        check_product_against_grid(&a, &b, &multiply_and_normalize(&a, &b).unwrap(), 1e-8);

        let a = Distribution::beta(rng.random_range(1.5..6.0), rng.random_range(1.5..6.0)).unwrap();
        let b = Distribution::beta(rng.random_range(1.5..6.0), rng.random_range(1.5..6.0)).unwrap();
        check_product_against_grid(&a, &b, &multiply_and_normalize(&a, &b).unwrap(), 1e-8);
    }
}

#[test]
fn discrete_products_are_exactly_normalized() {
    let a = Distribution::categorical(&[0.2, 0.3, 0.5]).unwrap();
    let b = Distribution::categorical(&[0.6, 0.3, 0.1]).unwrap();
    let p = multiply_and_normalize(&a, &b).unwrap();
    let probs = p.as_categorical().unwrap().probs();
    assert!((probs.sum() - 1.0).abs() < 1e-15);
    let z = 0.12 + 0.09 + 0.05;
    assert!((probs[0] - 0.12 / z).abs() < 1e-15);

    let x = Distribution::bernoulli(0.3).unwrap();
    let y = Distribution::bernoulli(0.6).unwrap();
    let Distribution::Bernoulli { p } = multiply_and_normalize(&x, &y).unwrap() else { panic!() };
    assert!((p - 0.18 / (0.18 + 0.28)).abs() < 1e-15);
}

#[test]
fn categorical_products_survive_underflow() {
    let m = 10_000;
    let tiny: Vec<f64> = (0..m).map(|i| -800.0 - i as f64).collect();
    let a = Distribution::Categorical(reactmp::dist::Categorical::from_log(DVector::from_vec(tiny.clone())).unwrap());
    let mut p = a.clone();
    for _ in 0..5 {
        p = multiply_and_normalize(&p, &a).unwrap();
    }
    let probs = p.as_categorical().unwrap().probs();
    assert!((probs.sum() - 1.0).abs() < 1e-12);
    assert_eq!(p.as_categorical().unwrap().argmax(), 0);
}

#[test]
fn dirichlet_and_matrix_dirichlet_products() {
    let a = Distribution::dirichlet(DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
    let b = Distribution::dirichlet(DVector::from_vec(vec![2.0, 2.0, 2.0])).unwrap();
    assert_eq!(
        multiply_and_normalize(&a, &b).unwrap(),
        Distribution::dirichlet(DVector::from_vec(vec![2.0, 3.0, 4.0])).unwrap()
    );
    let a = Distribution::matrix_dirichlet(DMatrix::from_element(2, 2, 2.0)).unwrap();
    assert_eq!(
        multiply_and_normalize(&a, &a).unwrap(),
        Distribution::matrix_dirichlet(DMatrix::from_element(2, 2, 3.0)).unwrap()
    );
}

#[test]
fn point_mass_products() {
    let pm = Distribution::point(0.3);
    let beta = Distribution::beta(2.0, 2.0).unwrap();
    assert_eq!(multiply_and_normalize(&pm, &beta).unwrap(), pm);
    assert_eq!(multiply_and_normalize(&beta, &pm).unwrap(), pm);
    let outside = Distribution::point(1.5);
    assert!(matches!(multiply_and_normalize(&outside, &beta), Err(Error::ZeroMeasure(_))));
    assert!(matches!(
        multiply_and_normalize(&Distribution::point(1.0), &Distribution::point(2.0)),
        Err(Error::ZeroMeasure(_))
    ));
}

#[test]
fn incompatible_supports_fault() {
    let c = Distribution::categorical(&[0.5, 0.5]).unwrap();
    let g = Distribution::normal_mean_variance(0.0, 1.0).unwrap();
    assert!(matches!(multiply_and_normalize(&c, &g), Err(Error::IncompatibleSupport(_))));
    let c3 = Distribution::categorical(&[0.2, 0.3, 0.5]).unwrap();
    assert!(matches!(multiply_and_normalize(&c, &c3), Err(Error::IncompatibleSupport(_))));
}

#[test]
fn non_conjugate_pair_falls_back_to_a_normalized_grid() {
    let g = Distribution::normal_mean_variance(1.0, 0.5).unwrap();
    let gam = Distribution::gamma(3.0, 2.0).unwrap();
    let p = multiply_and_normalize(&g, &gam).unwrap();
    let Distribution::SampleGrid(grid) = &p else { panic!("expected a grid, got {p:?}") };
    let total: f64 = grid.log_weights().iter().map(|w| w.exp()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    // Reference mean of the product density by quadrature.
    let raw = |x: f64| pdf(&g, x) * pdf(&gam, x);
    let z = simpson(raw, 1e-12, 12.0, 100_000);
    let m = simpson(|x| x * raw(x), 1e-12, 12.0, 100_000) / z;
    assert!((grid.mean() - m).abs() < 1e-4, "{} vs {m}", grid.mean());
}

#[test]
fn entropy_examples() {
    let u = Distribution::categorical(&[1.0, 1.0, 1.0]).unwrap();
    assert!((u.entropy().unwrap() - 3f64.ln()).abs() < 1e-15);
    let n = Distribution::normal_mean_variance(0.3, 1.0).unwrap();
    assert!((n.entropy().unwrap() - 0.5 * (2.0 * PI * E).ln()).abs() < 1e-15);
    assert!((Distribution::gamma(1.0, 1.0).unwrap().entropy().unwrap() - 1.0).abs() < 1e-14);
    assert_eq!(Distribution::point(2.0).entropy().unwrap(), 0.0);
}

#[test]
fn entropy_matches_numeric_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let draws = [
            Distribution::normal_mean_variance(rng.random_range(-5.0..5.0), rng.random_range(0.05..10.0)).unwrap(),
            Distribution::gamma(rng.random_range(1.5..10.0), rng.random_range(0.2..5.0)).unwrap(),
            Distribution::beta(rng.random_range(1.5..10.0), rng.random_range(1.5..10.0)).unwrap(),
        ];
        for d in draws {
            let numeric = integrate_over(&d, |x| {
                let lp = d.log_pdf(&Point::Scalar(x)).unwrap();
                if lp.is_finite() {
                    -lp.exp() * lp
                } else {
                    0.0
                }
            });
            let closed = d.entropy().unwrap();
            assert!((numeric - closed).abs() < 1e-5, "{d:?}: {numeric} vs {closed}");
        }
    }
}

#[test]
fn multivariate_entropies_match_numeric_integration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 600;
    for _ in 0..20 {
        let l = DMatrix::from_row_slice(2, 2, &[rng.random_range(0.5..2.0), 0.0, rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)]);
        let cov = &l * l.transpose();
        let mean = DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
        let d = Distribution::mv_normal_mean_cov(mean.clone(), cov.clone()).unwrap();
        let r = 12.0 * cov.diagonal().max().sqrt();
        let h = 2.0 * r / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = DVector::from_vec(vec![mean[0] - r + h * (i as f64 + 0.5), mean[1] - r + h * (j as f64 + 0.5)]);
                let lp = d.log_pdf(&Point::Vector(x)).unwrap();
                acc -= lp.exp() * lp;
            }
        }
        let numeric = acc * h * h;
        assert!((numeric - d.entropy().unwrap()).abs() < 1e-5, "{numeric} vs {}", d.entropy().unwrap());

        let alpha = DVector::from_vec((0..3).map(|_| rng.random_range(2.0..6.0)).collect());
        let dir = Distribution::dirichlet(alpha).unwrap();
        // Unit square onto the simplex: x1 = u, x2 = (1-u) v, Jacobian 1-u.
        let m = 1000;
        let h = 1.0 / m as f64;
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let u = h * (i as f64 + 0.5);
                let v = h * (j as f64 + 0.5);
                let x = DVector::from_vec(vec![u, (1.0 - u) * v, (1.0 - u) * (1.0 - v)]);
                let lp = dir.log_pdf(&Point::Vector(x)).unwrap();
                acc -= (1.0 - u) * lp.exp() * lp;
            }
        }
        let numeric = acc * h * h;
        assert!((numeric - dir.entropy().unwrap()).abs() < 1e-5, "{numeric} vs {}", dir.entropy().unwrap());
    }
}

#[test]
fn moment_examples() {
    assert_eq!(Distribution::beta(2.0, 2.0).unwrap().mean_scalar().unwrap(), 0.5);
    let d = Distribution::dirichlet(DVector::from_vec(vec![1.0, 1.0, 2.0])).unwrap();
    assert_eq!(d.mean_vector().unwrap(), DVector::from_vec(vec![0.25, 0.25, 0.5]));
    let n = Distribution::normal_mean_variance(0.0, 4.0).unwrap();
    assert_eq!(n.precision().unwrap(), Point::Scalar(0.25));
    assert!(matches!(Distribution::beta(1.0, 1.0).unwrap().mode(), Err(Error::UndefinedMoment(_))));
}

#[test]
fn expectation_log_examples() {
    let d = Distribution::dirichlet(DVector::from_vec(vec![1.0, 1.0])).unwrap();
    let e = d.expectation_log().unwrap().as_vector().unwrap();
    assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] + 1.0).abs() < 1e-12);
    let d = Distribution::dirichlet(DVector::from_vec(vec![3.7, 3.7])).unwrap();
    let e = d.expectation_log().unwrap().as_vector().unwrap();
    assert_eq!(e[0], e[1]);
    let md = Distribution::matrix_dirichlet(DMatrix::from_element(2, 2, 1.0)).unwrap();
    let Point::Matrix(e) = md.expectation_log().unwrap() else { panic!() };
    assert!(e.iter().all(|v| (v + 1.0).abs() < 1e-12));
}

#[test]
fn dirichlet_expected_log_matches_numeric_integration() {
    let d = Distribution::beta(2.5, 4.0).unwrap();
    let numeric = integrate_over(&d, |x| if x > 0.0 { pdf(&d, x) * x.ln() } else { 0.0 });
    let dir = Distribution::dirichlet(DVector::from_vec(vec![2.5, 4.0])).unwrap();
    let e = dir.expectation_log().unwrap().as_vector().unwrap();
    assert!((numeric - e[0]).abs() < 1e-8);
}

#[test]
fn moment_matching_examples() {
    let n = Distribution::normal_mean_variance(1.0, 2.0).unwrap();
    assert_eq!(n.moment_match_gaussian().unwrap(), n);
    let g = Distribution::gamma(4.0, 2.0).unwrap().moment_match_gaussian().unwrap();
    assert_eq!((g.mean_scalar().unwrap(), g.var_scalar().unwrap()), (2.0, 1.0));
    let grid = SampleGrid::from_log_density(-3.0, 3.0, 6001, |x| {
        reactmp::dist::log_sum_exp(&[-(x - 1.0).powi(2) / 0.02, -(x + 1.0).powi(2) / 0.02])
    })
    .unwrap();
    let m = Distribution::SampleGrid(grid).moment_match_gaussian().unwrap();
    assert!(m.mean_scalar().unwrap().abs() < 1e-12);
    assert!((m.var_scalar().unwrap() - 1.01).abs() < 1e-8);
    assert!(matches!(Distribution::point(1.0).moment_match_gaussian(), Err(Error::UndefinedMoment(_))));
}

#[test]
fn log_pdf_examples() {
    let b = Distribution::bernoulli(0.5).unwrap();
    assert_eq!(b.log_pdf(&Point::Scalar(1.0)).unwrap(), 0.5f64.ln());
    let n = Distribution::normal_mean_variance(0.0, 1.0).unwrap();
    assert!((n.log_pdf(&Point::Scalar(0.0)).unwrap() + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    assert!(Distribution::beta(1.0, 1.0).unwrap().log_pdf(&Point::Scalar(0.3)).unwrap().abs() < 1e-14);
    assert_eq!(
        Distribution::beta(2.0, 2.0).unwrap().log_pdf(&Point::Scalar(1.5)).unwrap(),
        f64::NEG_INFINITY
    );
}

#[test]
fn parametrization_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let mean = rng.random_range(-1e3..1e3);
        let var = 10f64.powf(rng.random_range(-4.0..4.0));
        let g = Gaussian::MeanVariance { mean, var };
        let back = g.to_weighted().to_mean_variance();
        assert!((back.mean() - mean).abs() <= 1e-12 * mean.abs());
        assert!((back.var() - var).abs() <= 1e-12 * var);
        let back = g.to_mean_precision().to_mean_variance();
        assert!((back.mean() - mean).abs() <= 1e-12 * mean.abs());
        assert!((back.var() - var).abs() <= 1e-12 * var);
    }
}

fn natural(d: &Distribution) -> Vec<f64> {
    match d {
        Distribution::Gaussian(g) => vec![g.weighted_mean(), g.precision()],
        Distribution::Gamma { shape, rate } => vec![*shape, *rate],
        Distribution::Beta { a, b } => vec![*a, *b],
        Distribution::Categorical(c) => c.log_probs().iter().cloned().collect(),
        Distribution::Dirichlet(a) => a.iter().cloned().collect(),
        Distribution::PointMass(p) => vec![p.as_scalar().unwrap()],
        other => panic!("no natural parameters for {other:?}"),
    }
}

fn assert_close(a: &Distribution, b: &Distribution) {
    let (x, y) = (natural(a), natural(b));
    assert_eq!(x.len(), y.len());
    for (p, q) in x.iter().zip(&y) {
        assert!((p - q).abs() <= 1e-10 * p.abs().max(1.0), "{a:?} vs {b:?}");
    }
}

fn family_triple() -> impl Strategy<Value = [Distribution; 3]> {
    let gauss = || (-5.0..5.0f64, 0.1..5.0f64).prop_map(|(x, w)| Distribution::normal_weighted(x, w).unwrap());
    let gamma = || (1.0..5.0f64, 0.1..5.0f64).prop_map(|(k, r)| Distribution::gamma(k, r).unwrap());
    let beta = || (1.0..5.0f64, 1.0..5.0f64).prop_map(|(a, b)| Distribution::beta(a, b).unwrap());
    let cat = || prop::collection::vec(0.01..1.0f64, 4).prop_map(|p| Distribution::categorical(&p).unwrap());
    let dir = || {
        prop::collection::vec(1.0..5.0f64, 3).prop_map(|a| Distribution::dirichlet(DVector::from_vec(a)).unwrap())
    };
    prop_oneof![
        (gauss(), gauss(), gauss()).prop_map(|(a, b, c)| [a, b, c]),
        (gamma(), gamma(), gamma()).prop_map(|(a, b, c)| [a, b, c]),
        (beta(), beta(), beta()).prop_map(|(a, b, c)| [a, b, c]),
        (cat(), cat(), cat()).prop_map(|(a, b, c)| [a, b, c]),
        (dir(), dir(), dir()).prop_map(|(a, b, c)| [a, b, c]),
        (0.05..0.95f64, beta(), beta()).prop_map(|(x, b, c)| [Distribution::point(x), b, c]),
    ]
}

proptest! {
    #[test]
    fn products_commute_and_associate([a, b, c] in family_triple()) {
        let ab = multiply_and_normalize(&a, &b).unwrap();
        let ba = multiply_and_normalize(&b, &a).unwrap();
        assert_close(&ab, &ba);
        let left = multiply_and_normalize(&ab, &c).unwrap();
        let right = multiply_and_normalize(&a, &multiply_and_normalize(&b, &c).unwrap()).unwrap();
        assert_close(&left, &right);
    }

    #[test]
    fn moment_matching_is_a_projection(k in 0.5..20.0f64, r in 0.1..10.0f64) {
        let g = Distribution::gamma(k, r).unwrap();
        let once = g.moment_match_gaussian().unwrap();
        prop_assert!((once.mean_scalar().unwrap() - k / r).abs() < 1e-12 * (k / r));
        prop_assert!((once.var_scalar().unwrap() - k / (r * r)).abs() < 1e-12 * (k / (r * r)));
        prop_assert_eq!(once.moment_match_gaussian().unwrap(), once);
    }

    #[test]
    fn mv_natural_round_trip(a in 0.3..3.0f64, b in -1.0..1.0f64, c in 0.3..3.0f64, m0 in -5.0..5.0f64, m1 in -5.0..5.0f64) {
        let l = DMatrix::from_row_slice(2, 2, &[a, 0.0, b, c]);
        let cov = &l * l.transpose();
        let mean = DVector::from_vec(vec![m0, m1]);
        let d = Distribution::mv_normal_mean_cov(mean.clone(), cov.clone()).unwrap();
        let (xi, w) = d.as_mv_gaussian().unwrap().natural().unwrap();
        let back = Distribution::mv_normal_weighted(xi, w).unwrap();
        let m = back.mean_vector().unwrap();
        let s = back.cov_matrix().unwrap();
        prop_assert!((m - &mean).norm() <= 1e-10 * mean.norm().max(1.0));
        prop_assert!((s - &cov).norm() <= 1e-10 * cov.norm());
    }
}
