//! One PASS/FAIL line per acceptance criterion; exits non-zero on any failure.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use finsler_spectra::bakry_emery::{cross_validate_weighted, weighted_discretization, WeightedSpec};
use finsler_spectra::bounds::{
    check_bounds, cheeger_lower_expression, spaceform_ball_eigen, BoundOptions, CurvatureAssumption, GeometryHooks,
};
use finsler_spectra::eigen::{solve_linear_spectrum, solve_nonlinear_higher, SolverConfig};
use finsler_spectra::fem::Discretization;
use finsler_spectra::measure::MeasureDensity;
use finsler_spectra::mesh::Mesh;
use finsler_spectra::metric::{MetricSpec, MinkowskiNorm, PointNorm, Symmetrization};
use finsler_spectra::packing::{
    cheeger_exhaustive, cheeger_sweep, complete_r_package, packing_chain, verify_region_sandwich, CutGraph,
    DistanceOracle,
};
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: String) -> Check {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

fn bh() -> MeasureDensity {
    MeasureDensity::BusemannHausdorff
}

fn disc(mesh: &Mesh, spec: &MetricSpec) -> Discretization {
    Discretization::new(mesh, spec, &bh()).unwrap()
}

fn quartic_randers(a: DMatrix<f64>, b: DVector<f64>) -> MetricSpec {
    MetricSpec::constant(MinkowskiNorm::randers(a, b).unwrap(), Symmetrization::QuarticMean).unwrap()
}

fn anisotropic() -> MetricSpec {
    MetricSpec::constant(
        MinkowskiNorm::riemannian(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap(),
        Symmetrization::None,
    )
    .unwrap()
}

fn weighted_circle() -> WeightedSpec {
    WeightedSpec::new(MetricSpec::euclidean(1), |x: &[f64]| 0.5 * x[0].cos())
}

fn weighted_torus() -> WeightedSpec {
    WeightedSpec::new(MetricSpec::euclidean(2), |x: &[f64]| 0.3 * (2.0 * PI * x[0]).sin())
}

fn compare(label: &str, values: &[f64], expected: &[f64], tol: f64) -> Result<f64, String> {
    if values.len() < expected.len() {
        return Err(format!("{label}: only {} eigenvalues", values.len()));
    }
    let worst = values
        .iter()
        .zip(expected)
        .map(|(a, b)| rel(*a, *b))
        .fold(0.0, f64::max);
    if worst > tol {
        return Err(format!("{label}: {values:?} off by {worst:.2e}"));
    }
    Ok(worst)
}

fn sphere_spectrum() -> Check {
    let start = Instant::now();
    let circle = solve_linear_spectrum(&disc(&Mesh::circle(256).unwrap(), &MetricSpec::euclidean(1)), 7).unwrap();
    let a = compare("circle", &circle.values(), &[0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0], 0.01)?;
    let sphere = solve_linear_spectrum(&disc(&Mesh::icosphere(4).unwrap(), &MetricSpec::euclidean(2)), 9).unwrap();
    let b = compare(
        "icosphere",
        &sphere.values(),
        &[0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0],
        0.02,
    )?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        secs < 10.0,
        format!("circle(256) max rel {a:.1e}, icosphere(4) max rel {b:.1e}, {secs:.2}s"),
    )
}

fn faithfulness() -> Check {
    let start = Instant::now();
    let cases = [
        (
            "circle(256)",
            disc(&Mesh::circle(256).unwrap(), &MetricSpec::euclidean(1)),
        ),
        (
            "interval(128)",
            disc(&Mesh::interval(128).unwrap(), &MetricSpec::euclidean(1)),
        ),
        (
            "torus(16x16) anisotropic",
            disc(&Mesh::torus(16, 16).unwrap(), &anisotropic()),
        ),
        (
            "icosphere(2)",
            disc(&Mesh::icosphere(2).unwrap(), &MetricSpec::euclidean(2)),
        ),
        ("disk(8)", disc(&Mesh::disk(8).unwrap(), &MetricSpec::euclidean(2))),
        (
            "weighted circle(128)",
            weighted_discretization(&Mesh::circle(128).unwrap(), &weighted_circle()).unwrap(),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (label, d) in &cases {
        let linear = solve_linear_spectrum(d, 5).unwrap().values();
        let (report, failure) = solve_nonlinear_higher(d, 5, &SolverConfig::default()).unwrap();
        if let Some(e) = failure {
            return Err(format!("{label}: {e}"));
        }
        worst = worst.max(compare(label, &report.values(), &linear, 1e-6)?);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        secs < 60.0,
        format!("{} Riemannian cases, max rel {worst:.1e}, {secs:.2}s", cases.len()),
    )
}

fn weighted_agreement() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (label, mesh, spec) in [
        ("circle(256)", Mesh::circle(256).unwrap(), weighted_circle()),
        ("torus(24x24)", Mesh::torus(24, 24).unwrap(), weighted_torus()),
    ] {
        let cmp = cross_validate_weighted(&mesh, &spec, 4, &SolverConfig::default(), 1e-4).unwrap();
        if !cmp.all_agree() || cmp.records.len() < 4 {
            return Err(format!("{label}: {:?} {:?}", cmp.records, cmp.failure));
        }
        worst = worst.max(cmp.max_relative_difference());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("k <= 4, max rel {worst:.1e}, {secs:.2}s"))
}

fn cheng() -> Check {
    let mut notes = Vec::new();
    for (label, mesh, spec, n, k, d) in [
        (
            "circle(256)",
            Mesh::circle(256).unwrap(),
            MetricSpec::euclidean(1),
            1.0,
            0.0,
            None,
        ),
        (
            "torus(24x24)",
            Mesh::torus(24, 24).unwrap(),
            MetricSpec::euclidean(2),
            2.0,
            0.0,
            None,
        ),
        (
            "icosphere(4)",
            Mesh::icosphere(4).unwrap(),
            MetricSpec::euclidean(2),
            2.0,
            1.0,
            Some(PI),
        ),
    ] {
        let dsc = disc(&mesh, &spec);
        let report = solve_linear_spectrum(&dsc, 6).unwrap();
        let measured = DistanceOracle::new(&mesh, &spec).unwrap().diameter();
        let assumption = CurvatureAssumption {
            n_eff: n,
            k,
            d: d.unwrap_or(measured),
            theta: 1.0,
            lambda: 1.0,
            injectivity: None,
        };
        let hooks = GeometryHooks {
            closed: true,
            manifold_dim: mesh.dimension,
            measured_diameter: Some(measured),
            region_lower: None,
        };
        let bounds = check_bounds(&report, &assumption, &hooks, &BoundOptions::default()).unwrap();
        if bounds.records.len() < 5 || !bounds.all_satisfied() {
            return Err(format!("{label}: {:?}", bounds.records));
        }
        let margin = bounds
            .records
            .iter()
            .map(|r| r.computed_lambda / r.upper_bound)
            .fold(0.0, f64::max);
        notes.push(format!("{label} max ratio {margin:.4}"));
    }
    let j = 2.404825557695773f64;
    let disk = solve_linear_spectrum(&disc(&Mesh::disk(16).unwrap(), &MetricSpec::euclidean(2)), 1)
        .unwrap()
        .values()[0];
    let ode = spaceform_ball_eigen(2.0, 0.0, 1.0).unwrap();
    if rel(disk, j * j) > 0.01 || rel(disk, ode) > 0.005 {
        return Err(format!("disk lambda_1 {disk} vs j^2 {} and ODE {ode}", j * j));
    }
    notes.push(format!("disk lambda_1 {disk:.5} (j^2 {:.5})", j * j));
    Ok(notes.join(", "))
}

fn randers_sample(rng: &mut ChaCha8Rng) -> MinkowskiNorm {
    let (p, q): (f64, f64) = (rng.gen_range(0.3..3.0), rng.gen_range(0.3..3.0));
    let off = rng.gen_range(-0.9..0.9) * (p * q).sqrt();
    let a = dmatrix![p, off; off, q];
    let inv = a.clone().try_inverse().unwrap();
    let t: f64 = rng.gen_range(0.0..2.0 * PI);
    let dir = dvector![t.cos(), t.sin()];
    let len = (dir.transpose() * &inv * &dir)[(0, 0)].sqrt();
    MinkowskiNorm::randers(a, dir * (rng.gen_range(0.0..0.6) / len)).unwrap()
}

fn vector_sample(rng: &mut ChaCha8Rng) -> DVector<f64> {
    let r: f64 = rng.gen_range(0.1..5.0);
    let t: f64 = rng.gen_range(0.0..2.0 * PI);
    dvector![r * t.cos(), r * t.sin()]
}

fn metric_properties() -> Check {
    const SAMPLES: usize = 100;
    const RESOLUTION: usize = 720;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sym = [Symmetrization::None, Symmetrization::Mean, Symmetrization::QuarticMean];
    let quad = |g: &DMatrix<f64>, y: &DVector<f64>| (y.transpose() * g * y)[(0, 0)];
    let mut failures = Vec::new();
    for i in 0..SAMPLES {
        let raw = randers_sample(&mut rng);
        let norm = PointNorm::new(raw.clone(), sym[i % 3]);
        let reversible = PointNorm::new(raw, sym[1 + i % 2]);
        let y = vector_sample(&mut rng);
        let s: f64 = rng.gen_range(-10.0..10.0);
        let f = norm.eval(&y);

        let h = reversible.eval(&(&y * s)) - s.abs() * reversible.eval(&y);
        if h.abs() > 1e-12 * (1.0 + s.abs() * reversible.eval(&y)) {
            failures.push(format!("homogeneity #{i}"));
        }
        let g = norm.fundamental_tensor(&y).unwrap();
        if (quad(&g, &y) - f * f).abs() > 1e-6 * f * f {
            failures.push(format!("euler #{i}"));
        }
        let eta = norm.legendre(&y);
        if (norm.dual(&eta).unwrap() - f).abs() > 1e-10 * (1.0 + f)
            || (norm.legendre_inv(&eta).unwrap() - &y).norm() > 1e-8 * (1.0 + y.norm())
        {
            failures.push(format!("duality #{i}"));
        }
        let lambda = norm.uniformity(RESOLUTION);
        let ghat = quad(&norm.average_metric(RESOLUTION), &y);
        if ghat < f * f / lambda * (1.0 - 1e-6) || ghat > f * f * lambda * (1.0 + 1e-6) {
            failures.push(format!("sandwich #{i}"));
        }
        let root_det = norm.tensor(&y).unwrap().determinant().sqrt();
        for m in [MeasureDensity::BusemannHausdorff, MeasureDensity::HolmesThompson] {
            let e_tau = root_det / m.density_with(&norm, &[0.0, 0.0]).unwrap();
            if e_tau < lambda.powi(-2) * (1.0 - 1e-6) || e_tau > lambda.powi(2) * (1.0 + 1e-6) {
                failures.push(format!("distortion #{i}"));
            }
        }
        let (p, q): (f64, f64) = (rng.gen_range(0.2..4.0), rng.gen_range(0.2..4.0));
        let off = rng.gen_range(-0.9..0.9) * (p * q).sqrt();
        let riem = PointNorm::new(
            MinkowskiNorm::riemannian(dmatrix![p, off; off, q]).unwrap(),
            Symmetrization::None,
        );
        let rd = (p * q - off * off).sqrt();
        let bh = MeasureDensity::BusemannHausdorff
            .density_with(&riem, &[0.0, 0.0])
            .unwrap();
        let ht = MeasureDensity::HolmesThompson.density_with(&riem, &[0.0, 0.0]).unwrap();
        if rel(bh, rd) > 1e-10 || rel(ht, rd) > 1e-10 || (riem.uniformity(RESOLUTION) - 1.0).abs() > 1e-9 {
            failures.push(format!("collapse #{i}"));
        }
    }
    ensure(
        failures.is_empty(),
        format!("6 properties x {SAMPLES} samples, failures {failures:?}"),
    )
}

fn packing() -> Check {
    let mut checked = 0;
    for (label, mesh, spec) in [
        ("circle(256)", Mesh::circle(256).unwrap(), MetricSpec::euclidean(1)),
        ("torus(24x24)", Mesh::torus(24, 24).unwrap(), MetricSpec::euclidean(2)),
        (
            "randers torus(16x16)",
            Mesh::torus(16, 16).unwrap(),
            quartic_randers(DMatrix::identity(2, 2), dvector![0.3, 0.1]),
        ),
    ] {
        let oracle = DistanceOracle::new(&mesh, &spec).unwrap();
        let diam = oracle.diameter();
        for t in [0.05, 0.1, 0.2, 0.35, 0.6] {
            let r = t * diam;
            let chain = packing_chain(&oracle, r).unwrap();
            let sandwich = verify_region_sandwich(&complete_r_package(&oracle, r).unwrap());
            if !chain.holds() || !sandwich.holds_within(oracle.max_edge) {
                return Err(format!("{label} r={r}: chain {chain:?} sandwich {sandwich:?}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} (mesh, radius) pairs, chain and sandwich hold"))
}

fn bfs_ball(mesh: &Mesh, seed: usize, size: usize) -> Vec<usize> {
    let mut adj = vec![Vec::new(); mesh.vertex_count()];
    for (a, b) in mesh.edges() {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut out = vec![seed];
    let mut i = 0;
    while out.len() < size && i < out.len() {
        for &w in &adj[out[i]] {
            if out.len() < size && !out.contains(&w) {
                out.push(w);
            }
        }
        i += 1;
    }
    out
}

fn cheeger() -> Check {
    let mut subgraphs = 0;
    for (mesh, spec) in [
        (Mesh::torus(6, 6).unwrap(), MetricSpec::euclidean(2)),
        (
            Mesh::torus(6, 6).unwrap(),
            quartic_randers(dmatrix![1.0, 0.1; 0.1, 0.7], dvector![0.25, 0.1]),
        ),
        (Mesh::icosphere(1).unwrap(), MetricSpec::euclidean(2)),
        (Mesh::disk(3).unwrap(), MetricSpec::euclidean(2)),
    ] {
        let d = disc(&mesh, &spec);
        let oracle = DistanceOracle::new(&mesh, &spec).unwrap();
        for seed in 0..mesh.vertex_count() {
            for size in 3..=18.min(mesh.vertex_count()) {
                let domain = bfs_ball(&mesh, seed, size);
                let graph = CutGraph::new(&mesh, &d, &domain).unwrap();
                let exact = cheeger_exhaustive(&graph).unwrap().value;
                let sweep = cheeger_sweep(&graph, &oracle, &[]).unwrap().value;
                if rel(sweep, exact) > 1e-10 {
                    return Err(format!("seed {seed} size {size}: sweep {sweep} exhaustive {exact}"));
                }
                subgraphs += 1;
            }
        }
    }
    let mesh = Mesh::circle(256).unwrap();
    let spec = MetricSpec::euclidean(1);
    let d = disc(&mesh, &spec);
    let oracle = DistanceOracle::new(&mesh, &spec).unwrap();
    let all: Vec<usize> = (0..mesh.vertex_count()).collect();
    let graph = CutGraph::new(&mesh, &d, &all).unwrap();
    let h = cheeger_sweep(&graph, &oracle, &[0]).unwrap().value;
    if rel(h, 2.0 / PI) > 0.05 {
        return Err(format!("circle(256) Cheeger {h} vs 2/pi"));
    }
    let lambda_1 = solve_linear_spectrum(&d, 2).unwrap().values()[1];
    let lower = cheeger_lower_expression(h, 1.0, 1.0, 1).unwrap();
    const CONTINUUM_FACTOR: f64 = 4.0;
    ensure(
        lower <= CONTINUUM_FACTOR * lambda_1,
        format!("{subgraphs} subgraphs exact, circle h {h:.5}, h^2/4 = {lower:.4} <= lambda_1 = {lambda_1:.4}"),
    )
}

fn gradients() -> Check {
    let cases = [
        (
            "randers torus(6x6)",
            Discretization::new(
                &Mesh::torus(6, 6).unwrap(),
                &quartic_randers(dmatrix![1.2, 0.2; 0.2, 0.8], dvector![0.3, -0.2]),
                &MeasureDensity::HolmesThompson,
            )
            .unwrap(),
        ),
        (
            "mean randers torus(6x6)",
            Discretization::new(
                &Mesh::torus(6, 6).unwrap(),
                &MetricSpec::constant(
                    MinkowskiNorm::randers(DMatrix::identity(2, 2), dvector![0.4, 0.1]).unwrap(),
                    Symmetrization::Mean,
                )
                .unwrap(),
                &bh(),
            )
            .unwrap(),
        ),
        (
            "anisotropic torus(6x6)",
            disc(&Mesh::torus(6, 6).unwrap(), &anisotropic()),
        ),
        (
            "icosphere(1)",
            disc(&Mesh::icosphere(1).unwrap(), &MetricSpec::euclidean(2)),
        ),
        (
            "weighted circle(32)",
            weighted_discretization(&Mesh::circle(32).unwrap(), &weighted_circle()).unwrap(),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for (label, d) in &cases {
        let n = d.n_dofs;
        for _ in 0..20 {
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let g = d.energy_gradient(&u).unwrap();
            let h = 1e-6;
            let (mut err, mut scale) = (0.0f64, 0.0f64);
            for i in 0..n {
                let (mut p, mut m) = (u.clone(), u.clone());
                p[i] += h;
                m[i] -= h;
                let fd = (d.energy_numerator(&p).unwrap() - d.energy_numerator(&m).unwrap()) / (2.0 * h);
                err = err.max((fd - g[i]).abs());
                scale = scale.max(fd.abs());
            }
            let e = err / scale;
            if e.is_nan() || e >= 1e-5 {
                return Err(format!("{label}: relative error {e:.2e}"));
            }
            worst = worst.max(e);
        }
    }
    Ok(format!(
        "{} meshes x 20 fields, max relative error {worst:.1e}",
        cases.len()
    ))
}

fn convergence() -> Check {
    let levels: Vec<Vec<f64>> = [64, 128, 256]
        .iter()
        .map(|&n| {
            solve_linear_spectrum(&disc(&Mesh::circle(n).unwrap(), &MetricSpec::euclidean(1)), 7)
                .unwrap()
                .values()
        })
        .collect();
    let exact = [0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0];
    let mut orders = Vec::new();
    for k in 1..7 {
        let e: Vec<f64> = levels.iter().map(|v| (v[k] - exact[k]).abs()).collect();
        orders.push((e[0] / e[1]).log2());
        orders.push((e[1] / e[2]).log2());
    }
    let (lo, hi) = orders
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &o| (a.min(o), b.max(o)));
    ensure(
        lo >= 1.7 && hi <= 2.3,
        format!("orders over k = 2..7 in [{lo:.4}, {hi:.4}]"),
    )
}

fn run_cli(config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_spectra"))
        .arg("--out-dir")
        .arg(out)
        .arg("run")
        .arg(config)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.code() != Some(0) {
        return Err(format!(
            "{}: {}",
            config.display(),
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    Ok(())
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let randers = tmp.path().join("randers.json");
    std::fs::write(
        &randers,
        r#"{
  "schema_version": 1,
  "name": "randers_small",
  "seed": 11,
  "mesh": { "model": "torus", "nx": 8, "ny": 8 },
  "metric": { "kind": "randers", "drift": [0.3, 0.1], "symmetrization": "quartic_mean" },
  "measure": { "kind": "busemann_hausdorff" },
  "solver": { "k_max": 4, "method": "nonlinear" },
  "packing": { "radius": 0.2 }
}"#,
    )
    .unwrap();
    let mut compared = 0;
    for config in [
        configs.join("circle_canonical.json"),
        configs.join("weighted_circle.json"),
        randers,
    ] {
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        run_cli(&config, &a)?;
        run_cli(&config, &b)?;
        let (fa, fb) = (csv_files(&a), csv_files(&b));
        if fa.is_empty() || fa.len() != fb.len() {
            return Err(format!("{}: artifact sets differ", config.display()));
        }
        for (x, y) in fa.iter().zip(&fb) {
            if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
                return Err(format!("{} differs between runs", x.display()));
            }
            compared += 1;
        }
        std::fs::remove_dir_all(&a).unwrap();
        std::fs::remove_dir_all(&b).unwrap();
    }
    Ok(format!("{compared} CSV artifacts byte-identical across two runs"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("sphere spectrum", sphere_spectrum),
        ("nonlinear faithfulness", faithfulness),
        ("weighted spectra agree", weighted_agreement),
        ("Cheng upper bound", cheng),
        ("metric algebra properties", metric_properties),
        ("packing chain and regions", packing),
        ("Cheeger consistency", cheeger),
        ("energy gradient", gradients),
        ("convergence order", convergence),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
