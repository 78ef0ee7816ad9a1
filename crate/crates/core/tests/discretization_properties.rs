use finsler_spectra::eigen::{counting_function, rayleigh, solve_linear_spectrum};
use finsler_spectra::fem::Discretization;
use finsler_spectra::measure::MeasureDensity;
use finsler_spectra::mesh::Mesh;
use finsler_spectra::metric::{MetricSpec, MinkowskiNorm, Symmetrization};
use nalgebra::{dmatrix, dvector};
use proptest::prelude::*;
use std::sync::OnceLock;

fn randers_torus() -> &'static Discretization {
    static DISC: OnceLock<Discretization> = OnceLock::new();
    DISC.get_or_init(|| {
        let norm = MinkowskiNorm::randers(dmatrix![1.2, 0.2; 0.2, 0.8], dvector![0.3, -0.2]).unwrap();
        let spec = MetricSpec::constant(norm, Symmetrization::QuarticMean).unwrap();
        Discretization::new(&Mesh::torus(6, 6).unwrap(), &spec, &MeasureDensity::HolmesThompson).unwrap()
    })
}

fn riemannian_torus() -> &'static Discretization {
    static DISC: OnceLock<Discretization> = OnceLock::new();
    DISC.get_or_init(|| {
        let spec = MetricSpec::constant(
            MinkowskiNorm::riemannian(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap(),
            Symmetrization::None,
        )
        .unwrap();
        Discretization::new(&Mesh::torus(6, 6).unwrap(), &spec, &MeasureDensity::BusemannHausdorff).unwrap()
    })
}

fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn numerator_is_two_homogeneous(u in field(36), c in -5.0f64..5.0) {
        let disc = randers_torus();
        let scaled: Vec<f64> = u.iter().map(|v| c * v).collect();
        let lhs = disc.energy_numerator(&scaled).unwrap();
        let rhs = c * c * disc.energy_numerator(&u).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn null_space_is_the_constants(u in field(36), c in -3.0f64..3.0) {
        let disc = randers_torus();
        prop_assert!(disc.energy_numerator(&vec![c; 36]).unwrap().abs() <= 1e-12 * (1.0 + c * c));
        let spread = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - u.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        prop_assert!(disc.energy_numerator(&u).unwrap() > 0.0);
    }

    #[test]
    fn riemannian_numerator_is_stiffness_form(u in field(36)) {
        let disc = riemannian_torus();
        let k = disc.stiffness().unwrap();
        let lhs = disc.energy_numerator(&u).unwrap();
        prop_assert!((lhs - k.quadratic(&u)).abs() <= 1e-10 * (1.0 + lhs));
    }

    #[test]
    fn rayleigh_is_scale_invariant(u in field(36), c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let disc = randers_torus();
        let spread = u.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assume!(spread > 1e-3);
        let scaled: Vec<f64> = u.iter().map(|v| c * v).collect();
        let a = rayleigh(disc, &u).unwrap();
        let b = rayleigh(disc, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * (1.0 + a));
    }

    #[test]
    fn counting_function_brackets(lambda in 0.0f64..60.0) {
        static REPORT: OnceLock<finsler_spectra::eigen::SpectrumReport> = OnceLock::new();
        let report = REPORT.get_or_init(|| solve_linear_spectrum(riemannian_torus(), 12).unwrap());
        let values = report.values();
        let n = counting_function(report, lambda);
        if n > 0 {
            prop_assert!(values[n - 1] < lambda);
        }
        if n < values.len() {
            prop_assert!(lambda <= values[n]);
        }
    }
}

#[test]
fn gradient_matches_central_differences() {
    for disc in [randers_torus(), riemannian_torus()] {
        let mut rng = 0x2545f4914f6cdd1du64;
        for _ in 0..20 {
            let u: Vec<f64> = (0..36)
                .map(|_| {
                    rng ^= rng << 13;
                    rng ^= rng >> 7;
                    rng ^= rng << 17;
                    (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            let g = disc.energy_gradient(&u).unwrap();
            let h = 1e-6;
            let mut worst: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for i in 0..u.len() {
                let (mut p, mut m) = (u.clone(), u.clone());
                p[i] += h;
                m[i] -= h;
                let fd = (disc.energy_numerator(&p).unwrap() - disc.energy_numerator(&m).unwrap()) / (2.0 * h);
                worst = worst.max((fd - g[i]).abs());
                scale = scale.max(fd.abs());
            }
            assert!(worst / (1.0 + scale) < 1e-5, "{worst} vs {scale}");
        }
    }
}
