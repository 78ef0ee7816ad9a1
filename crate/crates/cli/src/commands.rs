use std::path::PathBuf;

use finsler_spectra::bakry_emery::{cross_validate_weighted, WeightedSpec};
use finsler_spectra::bounds::{check_bounds, BoundOptions, BoundReport, GeometryHooks};
use finsler_spectra::eigen::linear::LinearOptions;
use finsler_spectra::eigen::nonlinear::solve_linear_spectrum_with;
use finsler_spectra::eigen::report::fmt_real;
use finsler_spectra::eigen::{counting_function, NonlinearSolver, SolverConfig, SpectrumReport};
use finsler_spectra::fem::Discretization;
use finsler_spectra::mesh::Mesh;
use finsler_spectra::metric::MetricSpec;
use finsler_spectra::packing::{
    complete_r_package, dirichlet_region_lower_pipeline, packing_chain, verify_region_sandwich, DistanceOracle,
};
use finsler_spectra::Error;
use serde_json::json;

use crate::config::{BoundsSection, ExperimentConfig, Loaded, SolveMethod};
use crate::plot::{Plot, Series, Style};
use crate::CliError;

/// Result of a command that ran to completion.
#[derive(Debug, Default)]
pub struct Outcome {
    pub failures: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    fn fail(&mut self, message: impl Into<String>) {
        self.failures.push(message.into());
    }
}

pub struct Context {
    pub loaded: Loaded,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub slack: Option<f64>,
}

struct Built {
    mesh: Mesh,
    spec: MetricSpec,
    disc: Discretization,
}

impl Context {
    fn config(&self) -> &ExperimentConfig {
        &self.loaded.config
    }

    fn build(&self, mesh: Mesh) -> Result<Built, CliError> {
        let cfg = self.config();
        let spec = cfg.build_metric(&mesh)?;
        let disc = Discretization::new(&mesh, &spec, &cfg.build_measure())?;
        Ok(Built { mesh, spec, disc })
    }

    fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            seed: self.seed,
            ..self.config().solver.nonlinear
        }
    }

    fn write(&self, outcome: &mut Outcome, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::Io(format!("{}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        outcome.written.push(path);
        Ok(())
    }
}

fn solve_spectrum(ctx: &Context, disc: &Discretization) -> Result<(SpectrumReport, Option<Error>), CliError> {
    let solver = &ctx.config().solver;
    let linear = match solver.method {
        SolveMethod::Auto => disc.riemannian,
        SolveMethod::Linear if !disc.riemannian => {
            return Err(CliError::Config("the linear method needs a Riemannian metric".into()))
        }
        SolveMethod::Linear => true,
        SolveMethod::Nonlinear => false,
    };
    if linear {
        let report = solve_linear_spectrum_with(
            disc,
            solver.k_max,
            solver.nonlinear.multiplicity_gap,
            &LinearOptions::default(),
        )?;
        Ok((report, None))
    } else {
        Ok(NonlinearSolver::new(disc, ctx.solver_config())?.higher(solver.k_max)?)
    }
}

fn check_spectrum(ctx: &Context, report: &SpectrumReport, failure: Option<Error>, outcome: &mut Outcome) {
    if let Some(e) = failure {
        outcome.fail(format!("solver stopped after {} eigenvalues: {e}", report.len()));
    }
    if !report.is_monotone() {
        outcome.fail("reported eigenvalues are not monotone");
    }
    let acceptance = ctx.config().solver.nonlinear.acceptance;
    for e in &report.entries {
        if !(e.residual <= acceptance) {
            outcome.fail(format!("k={} residual {:e} above {acceptance:e}", e.k, e.residual));
        }
    }
}

fn write_spectrum(ctx: &Context, report: &SpectrumReport, outcome: &mut Outcome) -> Result<(), CliError> {
    ctx.write(outcome, "spectrum.csv", &report.to_csv())?;
    let out = &ctx.config().output;
    if out.json {
        ctx.write(outcome, "spectrum.json", &report.to_json(out.fields))?;
    }
    if out.plots && !report.is_empty() {
        let label = ctx.config().name.clone().unwrap_or_else(|| report.mesh_id.clone());
        let staircase = Plot {
            title: "Eigenvalue staircase",
            x_label: "k",
            y_label: "lambda_k",
            log: false,
            style: Style::Steps,
        };
        let points = report.entries.iter().map(|e| (e.k as f64, e.lambda)).collect();
        let svg = staircase.render(&[Series {
            label: label.clone(),
            points,
        }]);
        ctx.write(outcome, "staircase.svg", &svg)?;

        let top = report.entries.last().map_or(1.0, |e| e.lambda).max(1e-12) * 1.1;
        let mut points = vec![(0.0, 0.0)];
        for e in &report.entries {
            points.push((e.lambda, counting_function(report, e.lambda) as f64));
        }
        points.push((top, counting_function(report, top) as f64));
        let counting = Plot {
            title: "Counting function",
            x_label: "lambda",
            y_label: "N(lambda)",
            log: false,
            style: Style::Steps,
        };
        let svg = counting.render(&[Series { label, points }]);
        ctx.write(outcome, "counting.svg", &svg)?;
    }
    Ok(())
}

fn bound_report(
    ctx: &Context,
    section: &BoundsSection,
    built: &Built,
    report: &SpectrumReport,
) -> Result<BoundReport, CliError> {
    let oracle = DistanceOracle::new(&built.mesh, &built.spec)?;
    let diameter = oracle.diameter();
    let assumption = section.assumption(diameter);
    let region_lower = match section.region_radius {
        Some(r) => {
            let lower =
                dirichlet_region_lower_pipeline(&built.mesh, &built.disc, &oracle, r, section.lambda, section.theta)?;
            Some((lower.value, lower.m()))
        }
        None => None,
    };
    let hooks = GeometryHooks {
        closed: built.mesh.is_closed(),
        manifold_dim: built.mesh.dimension,
        measured_diameter: Some(diameter),
        region_lower,
    };
    let options = BoundOptions {
        slack: ctx.slack.unwrap_or(section.slack),
        indexing: section.indexing,
        continuum_factor: section.continuum_factor,
    };
    Ok(check_bounds(report, &assumption, &hooks, &options)?)
}

fn write_bounds(ctx: &Context, bounds: &BoundReport, outcome: &mut Outcome) -> Result<(), CliError> {
    ctx.write(outcome, "bounds.csv", &bounds.to_csv())?;
    for r in bounds.records.iter().filter(|r| !r.satisfied) {
        outcome.fail(format!(
            "bound violated at k={}: lambda {} against upper {}",
            r.k, r.computed_lambda, r.upper_bound
        ));
    }
    Ok(())
}

fn packing_artifacts(ctx: &Context, built: &Built, radius: f64, outcome: &mut Outcome) -> Result<(), CliError> {
    let oracle = DistanceOracle::new(&built.mesh, &built.spec)?;
    let packing = complete_r_package(&oracle, radius)?;
    let sandwich = verify_region_sandwich(&packing);
    let chain = packing_chain(&oracle, radius)?;
    let (lambda, theta) = ctx.config().bounds.as_ref().map_or((1.0, 1.0), |b| (b.lambda, b.theta));
    let regions = dirichlet_region_lower_pipeline(&built.mesh, &built.disc, &oracle, radius, lambda, theta);
    let summary = json!({
        "radius": radius,
        "centers": packing.centers,
        "max_edge_length": oracle.max_edge,
        "chain": {
            "packing": chain.packing,
            "covering": chain.covering,
            "packing_half": chain.packing_half,
            "holds": chain.holds(),
        },
        "sandwich": {
            "inner_violation": sandwich.inner_violation,
            "outer_excess": sandwich.outer_excess,
            "holds_within_edge": sandwich.holds_within(oracle.max_edge),
        },
        "regions": match &regions {
            Ok(r) => json!({"value": r.value, "h_min": r.h_min, "regions": r.regions}),
            Err(e) => json!({"error": e.to_string()}),
        },
    });
    ctx.write(outcome, "packing.csv", &packing.to_csv())?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    ctx.write(outcome, "packing_summary.json", &(text + "\n"))?;
    if !chain.holds() {
        outcome.fail(format!(
            "packing chain fails: Ca(r)={} Co(r)={} Ca(r/2)={}",
            chain.packing, chain.covering, chain.packing_half
        ));
    }
    if !sandwich.holds_within(oracle.max_edge) {
        outcome.fail(format!("region sandwich off by {}", sandwich.worst()));
    }
    Ok(())
}

pub fn run(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = ctx.config();
    let built = ctx.build(cfg.build_mesh(&ctx.loaded.base_dir)?)?;
    let mut outcome = Outcome::default();
    let (report, failure) = solve_spectrum(ctx, &built.disc)?;
    let stopped = failure.is_some();
    check_spectrum(ctx, &report, failure, &mut outcome);
    write_spectrum(ctx, &report, &mut outcome)?;
    if stopped {
        return Ok(outcome);
    }
    if let Some(section) = &cfg.bounds {
        let bounds = bound_report(ctx, section, &built, &report)?;
        write_bounds(ctx, &bounds, &mut outcome)?;
    }
    if let Some(p) = &cfg.packing {
        packing_artifacts(ctx, &built, p.radius, &mut outcome)?;
    }
    if let (Some(c), Some(f)) = (&cfg.cross_validate, cfg.weight()) {
        let spec = WeightedSpec::from_expr(built.spec.clone(), f);
        let comparison = cross_validate_weighted(&built.mesh, &spec, c.k_max, &ctx.solver_config(), c.tolerance)?;
        ctx.write(&mut outcome, "comparison.csv", &comparison.to_csv())?;
        if let Some(f) = &comparison.failure {
            outcome.fail(format!("nonlinear pipeline stopped early: {f}"));
        }
        for r in comparison.records.iter().filter(|r| !r.agree) {
            outcome.fail(format!(
                "k={}: linear {} and nonlinear {} differ by {:e}",
                r.k, r.linear, r.nonlinear, r.relative_difference
            ));
        }
    }
    Ok(outcome)
}

pub fn bounds(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = ctx.config();
    let section = cfg
        .bounds
        .as_ref()
        .ok_or_else(|| CliError::Config("the bounds command needs a bounds section".into()))?;
    let built = ctx.build(cfg.build_mesh(&ctx.loaded.base_dir)?)?;
    let mut outcome = Outcome::default();
    let (report, failure) = solve_spectrum(ctx, &built.disc)?;
    let stopped = failure.is_some();
    check_spectrum(ctx, &report, failure, &mut outcome);
    write_spectrum(ctx, &report, &mut outcome)?;
    if !stopped {
        let bounds = bound_report(ctx, section, &built, &report)?;
        write_bounds(ctx, &bounds, &mut outcome)?;
    }
    Ok(outcome)
}

pub fn pack(ctx: &Context, radius: f64) -> Result<Outcome, CliError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(CliError::Config("--radius must be positive".into()));
    }
    let built = ctx.build(ctx.config().build_mesh(&ctx.loaded.base_dir)?)?;
    let mut outcome = Outcome::default();
    packing_artifacts(ctx, &built, radius, &mut outcome)?;
    Ok(outcome)
}

/// `log₂(|λ_{l−2} − λ_{l−1}| / |λ_{l−1} − λ_l|)` for halving mesh width.
pub fn observed_order(a: f64, b: f64, c: f64) -> Option<f64> {
    let (d1, d2) = ((a - b).abs(), (b - c).abs());
    let scale = 1e-12 * (1.0 + c.abs());
    (d1 > scale && d2 > scale).then(|| (d1 / d2).log2())
}

pub fn converge(ctx: &Context, levels: usize) -> Result<Outcome, CliError> {
    if levels < 2 {
        return Err(CliError::Config("--levels must be at least 2".into()));
    }
    let cfg = ctx.config();
    let model = cfg
        .mesh_model()
        .ok_or_else(|| CliError::Config("convergence studies need a built-in mesh model".into()))?;
    let mut outcome = Outcome::default();
    let mut runs: Vec<(usize, SpectrumReport)> = Vec::with_capacity(levels);
    for level in 0..levels {
        let built = ctx.build(model.refined(level as u32).build()?)?;
        let (report, failure) = solve_spectrum(ctx, &built.disc)?;
        if let Some(e) = failure {
            outcome.fail(format!(
                "level {level}: solver stopped after {} eigenvalues: {e}",
                report.len()
            ));
        }
        runs.push((built.mesh.vertex_count(), report));
    }
    let k_count = runs.iter().map(|(_, r)| r.len()).min().unwrap_or(0);
    let mut csv = String::from("k,level,vertices,lambda,order\n");
    let mut series = Vec::new();
    for k in 0..k_count {
        let values: Vec<f64> = runs.iter().map(|(_, r)| r.entries[k].lambda).collect();
        for (level, (vertices, _)) in runs.iter().enumerate() {
            let order = if level >= 2 {
                observed_order(values[level - 2], values[level - 1], values[level])
                    .map(fmt_real)
                    .unwrap_or_default()
            } else {
                String::new()
            };
            csv.push_str(&format!(
                "{},{level},{vertices},{},{order}\n",
                k + 1,
                fmt_real(values[level])
            ));
        }
        let points: Vec<(f64, f64)> = (0..levels - 1)
            .map(|l| (runs[l].0 as f64, (values[l] - values[l + 1]).abs()))
            .collect();
        if points.iter().any(|p| p.1 > 0.0) {
            series.push(Series {
                label: format!("k={}", k + 1),
                points,
            });
        }
    }
    ctx.write(&mut outcome, "convergence.csv", &csv)?;
    if cfg.output.plots && !series.is_empty() {
        let plot = Plot {
            title: "Successive eigenvalue differences",
            x_label: "vertices",
            y_label: "|lambda(level) - lambda(level+1)|",
            log: true,
            style: Style::Lines,
        };
        ctx.write(&mut outcome, "convergence.svg", &plot.render(&series))?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_quadratic_sequence() {
        let f = |h: f64| 1.0 + 0.3 * h * h;
        let p = observed_order(f(0.1), f(0.05), f(0.025)).unwrap();
        assert!((p - 2.0).abs() < 1e-9);
        assert_eq!(observed_order(0.0, 0.0, 0.0), None);
    }
}
