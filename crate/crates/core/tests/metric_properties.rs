use finsler_spectra::measure::MeasureDensity;
use finsler_spectra::metric::{MinkowskiNorm, PointNorm, Symmetrization};
use nalgebra::{dmatrix, dvector, DVector};
use proptest::prelude::*;

const RESOLUTION: usize = 720;

/// Randers data `(a, b)` with `‖b‖_{a⁻¹} ≤ 0.6`.
fn randers() -> impl Strategy<Value = MinkowskiNorm> {
    (
        0.3f64..3.0,
        0.3f64..3.0,
        -0.9f64..0.9,
        0.0f64..0.6,
        0.0f64..std::f64::consts::TAU,
    )
        .prop_map(|(p, q, c, beta, angle)| {
            let off = c * (p * q).sqrt();
            let a = dmatrix![p, off; off, q];
            let inv = a.clone().try_inverse().unwrap();
            let dir = dvector![angle.cos(), angle.sin()];
            let len = (dir.transpose() * &inv * &dir)[(0, 0)].sqrt();
            MinkowskiNorm::randers(a, dir * (beta / len)).unwrap()
        })
}

fn symmetrized() -> impl Strategy<Value = PointNorm> {
    (
        randers(),
        prop_oneof![Just(Symmetrization::Mean), Just(Symmetrization::QuarticMean)],
    )
        .prop_map(|(n, s)| PointNorm::new(n, s))
}

fn any_norm() -> impl Strategy<Value = PointNorm> {
    (
        randers(),
        prop_oneof![
            Just(Symmetrization::None),
            Just(Symmetrization::Mean),
            Just(Symmetrization::QuarticMean)
        ],
    )
        .prop_map(|(n, s)| PointNorm::new(n, s))
}

fn direction() -> impl Strategy<Value = DVector<f64>> {
    (0.1f64..5.0, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| dvector![r * t.cos(), r * t.sin()])
}

fn quad(g: &nalgebra::DMatrix<f64>, y: &DVector<f64>) -> f64 {
    (y.transpose() * g * y)[(0, 0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn homogeneity(norm in symmetrized(), y in direction(), lambda in -10.0f64..10.0) {
        let lhs = norm.eval(&(&y * lambda));
        let rhs = lambda.abs() * norm.eval(&y);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn euler_identity(norm in any_norm(), y in direction()) {
        let g = norm.fundamental_tensor(&y).unwrap();
        let f2 = norm.eval(&y).powi(2);
        prop_assert!((quad(&g, &y) - f2).abs() <= 1e-6 * f2);
    }

    #[test]
    fn duality_round_trip(norm in any_norm(), x in direction()) {
        let eta = norm.legendre(&x);
        let f = norm.eval(&x);
        prop_assert!((norm.dual(&eta).unwrap() - f).abs() <= 1e-10 * (1.0 + f));
        let back = norm.legendre_inv(&eta).unwrap();
        prop_assert!((back - &x).norm() <= 1e-8 * (1.0 + x.norm()));
    }

    #[test]
    fn average_metric_sandwich(norm in any_norm(), x in direction()) {
        let lambda = norm.uniformity(RESOLUTION);
        let ghat = norm.average_metric(RESOLUTION);
        let f2 = norm.eval(&x).powi(2);
        let g = quad(&ghat, &x);
        prop_assert!(g >= f2 / lambda * (1.0 - 1e-6), "{} < {}", g, f2 / lambda);
        prop_assert!(g <= f2 * lambda * (1.0 + 1e-6), "{} > {}", g, f2 * lambda);
    }

    #[test]
    fn distortion_interval(norm in any_norm(), y in direction()) {
        let lambda = norm.uniformity(RESOLUTION);
        let root_det = norm.tensor(&y).unwrap().determinant().sqrt();
        for measure in [MeasureDensity::BusemannHausdorff, MeasureDensity::HolmesThompson] {
            let sigma = measure.density_with(&norm, &[0.0, 0.0]).unwrap();
            let e_tau = root_det / sigma;
            prop_assert!(e_tau >= lambda.powi(-2) * (1.0 - 1e-6), "{:?}: {}", measure, e_tau);
            prop_assert!(e_tau <= lambda.powi(2) * (1.0 + 1e-6), "{:?}: {}", measure, e_tau);
        }
    }

    #[test]
    fn riemannian_collapse(p in 0.2f64..4.0, q in 0.2f64..4.0, c in -0.9f64..0.9) {
        let off = c * (p * q).sqrt();
        let norm = PointNorm::new(
            MinkowskiNorm::riemannian(dmatrix![p, off; off, q]).unwrap(),
            Symmetrization::None,
        );
        let root_det = (p * q - off * off).sqrt();
        let bh = MeasureDensity::BusemannHausdorff.density_with(&norm, &[0.0, 0.0]).unwrap();
        let ht = MeasureDensity::HolmesThompson.density_with(&norm, &[0.0, 0.0]).unwrap();
        prop_assert!((bh - root_det).abs() <= 1e-10 * root_det);
        prop_assert!((ht - root_det).abs() <= 1e-10 * root_det);
        prop_assert!((norm.uniformity(RESOLUTION) - 1.0).abs() <= 1e-9);
    }
}
