//! The seven pipelines behind `homoglab <pipeline>`.

use std::io::{self, Write};
use std::path::Path;

use homoglab_core::audit::{self, BallTriple, SweepConfig};
use homoglab_core::cell::{self, HomogenizedTensor};
use homoglab_core::coeff::CoefficientField;
use homoglab_core::ellipsoid::Ellipsoid;
use homoglab_core::pde::{self, DiscreteField, Domain, FlatCondition, Parity};
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{sweep_csv, ArtifactWriter, Envelope, FAILURE_MARKER, SCHEMA};
use crate::config::{tensor_for, BoundaryData, Condition, ExperimentConfig, Pipeline, Shape};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("stage `{stage}` failed: {message}")]
    Solver { stage: String, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Solver { .. } => 3,
            RunError::Io(_) => 1,
        }
    }
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    field: CoefficientField<f64>,
    g: BoundaryData,
    writer: ArtifactWriter,
    log: &'a mut dyn Write,
    tensor: Option<HomogenizedTensor<f64>>,
}

impl Ctx<'_> {
    fn stage<T, E: std::fmt::Display>(&mut self, stage: &str, r: Result<T, E>) -> Result<T, RunError> {
        r.map_err(|e| {
            let message = e.to_string();
            let marker = format!("stage {stage}\n{message}\n");
            // The marker is best effort; the solver error is what gets reported.
            let _ = self.writer.write_bytes(FAILURE_MARKER, marker.as_bytes());
            RunError::Solver { stage: stage.to_string(), message }
        })
    }

    fn say(&mut self, line: String) -> Result<(), RunError> {
        writeln!(self.log, "{line}")?;
        Ok(())
    }

    fn tensor(&mut self) -> Result<HomogenizedTensor<f64>, RunError> {
        if self.tensor.is_none() {
            let t = tensor_for(&self.field, self.config.cell.n);
            let t = self.stage("cell", t)?;
            self.tensor = Some(t);
        }
        Ok(self.tensor.clone().expect("tensor just set"))
    }

    fn domain(&mut self) -> Result<Domain<f64>, RunError> {
        let r = self.config.domain.radius;
        Ok(match self.config.domain.shape {
            Shape::Disk => Domain::Disk { radius: r },
            Shape::Ellipse => {
                let t = self.tensor()?;
                Domain::Ellipse(self.stage("domain", Ellipsoid::new(t, r))?)
            }
        })
    }

    fn h(&self, eps: f64) -> f64 {
        self.config.mesh_size(eps, self.field.is_constant())
    }

    fn boundary(&self) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
        let g = &self.g;
        move |x: &[f64]| g.eval(x)
    }

    fn dump(&mut self, name: &str, u: &DiscreteField<f64>) -> Result<(), RunError> {
        self.writer.write_with(name, |w| u.write_ufield(w).map_err(io::Error::other))?;
        Ok(())
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn abs_max(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Validates, runs the pipeline, and writes its artifacts under `out`.
/// Nothing is written when validation fails.
pub fn run(
    pipeline: Pipeline,
    config: &ExperimentConfig,
    out: &Path,
    log: &mut dyn Write,
) -> Result<Envelope, RunError> {
    let violations = config.validate(pipeline);
    if !violations.is_empty() {
        return Err(RunError::Validation(violations));
    }
    let field = config.coefficient().map_err(|e| RunError::Validation(vec![e]))?;
    let g = if pipeline == Pipeline::Cell {
        BoundaryData::ReZn(0)
    } else {
        config.boundary_data().map_err(|e| RunError::Validation(vec![e]))?
    };
    let writer = ArtifactWriter::create(out)?;
    let mut ctx = Ctx { config, field, g, writer, log, tensor: None };
    let results = match pipeline {
        Pipeline::Cell => run_cell(&mut ctx)?,
        Pipeline::Solve => run_solve(&mut ctx)?,
        Pipeline::Audit => run_audit(&mut ctx)?,
        Pipeline::Sweep => run_sweep(&mut ctx)?,
        Pipeline::Propagate => run_propagate(&mut ctx)?,
        Pipeline::Halfball => run_halfball(&mut ctx)?,
        Pipeline::Lift => run_lift(&mut ctx)?,
    };
    let mut echoed = config.clone();
    echoed.run.pipeline = Some(pipeline);
    echoed.run.out = None;
    let envelope = Envelope {
        schema: SCHEMA.to_string(),
        pipeline: pipeline.to_string(),
        config: to_value(&echoed),
        artifacts: ctx.writer.written().to_vec(),
        results,
    };
    ctx.writer.write_report(&envelope)?;
    Ok(envelope)
}

fn run_cell(ctx: &mut Ctx) -> Result<Value, RunError> {
    let n = ctx.config.cell.n;
    let c = cell::solve_corrector(&ctx.field, n);
    let c = ctx.stage("corrector", c)?;
    let t = cell::homogenize(&ctx.field, &c);
    let t = ctx.stage("homogenize", t)?;
    ctx.writer.write_with("corrector.txt", |w| c.write_dump(w).map_err(io::Error::other))?;
    let a: Vec<Vec<f64>> = (0..t.dim()).map(|i| (0..t.dim()).map(|j| t.a_hat[(i, j)]).collect()).collect();
    ctx.say(format!(
        "cell n={n}: Â = {a:?}, eigenvalues [{:.6}, {:.6}], max corrector residual {:.2e}",
        t.eig_min,
        t.eig_max,
        abs_max(&c.residuals)
    ))?;
    Ok(json!({
        "n": n,
        "a_hat": a,
        "tensor": to_value(&t),
        "factor_defect": t.factor_defect(),
        "corrector": {
            "scheme": c.scheme,
            "residuals": c.residuals,
            "iterations": c.iterations,
            "means": c.means,
        },
    }))
}

fn run_solve(ctx: &mut Ctx) -> Result<Value, RunError> {
    let domain = ctx.domain()?;
    let mut rows = Vec::new();
    for (i, &eps) in ctx.config.eps.values.iter().enumerate() {
        let h = ctx.h(eps);
        let u = pde::solve_dirichlet(&ctx.field, eps, domain.clone(), &ctx.boundary(), h);
        let u = ctx.stage("solve", u)?;
        let name = format!("u_{i}.ufield");
        ctx.dump(&name, &u)?;
        let residual = u.residual();
        ctx.say(format!(
            "solve ε={eps}: h={h}, {} nodes, {} iterations, residual {residual:.2e}",
            u.node_count(),
            u.iterations
        ))?;
        rows.push(json!({
            "eps": eps,
            "h": h,
            "node_count": u.node_count(),
            "iterations": u.iterations,
            "solver_residual": u.solver_residual,
            "residual": residual,
            "max_abs": abs_max(&u.values),
            "ufield": name,
        }));
    }
    Ok(json!({ "domain": domain.describe(), "solves": rows }))
}

fn run_audit(ctx: &mut Ctx) -> Result<Value, RunError> {
    let triple = ctx.config.triple(ctx.field.lambda()).map_err(|e| RunError::Validation(vec![e]))?;
    let tensor = ctx.tensor()?;
    let domain = ctx.domain()?;
    let mut reports = Vec::new();
    for (i, &eps) in ctx.config.eps.values.iter().enumerate() {
        let h = ctx.h(eps);
        let u = pde::solve_dirichlet(&ctx.field, eps, domain.clone(), &ctx.boundary(), h);
        let u = ctx.stage("solve", u)?;
        ctx.dump(&format!("u_{i}.ufield"), &u)?;
        let r = audit::three_ball_audit(&u, &triple, &tensor, eps);
        let r = ctx.stage("audit", r)?;
        ctx.say(format!(
            "audit ε={eps}: exponent {:.6}, norms ({:.4e}, {:.4e}, {:.4e}), case {}, Ĉ = {}",
            r.exponent,
            r.delta,
            r.mid,
            r.big_m,
            r.case,
            r.c_hat.map_or("undefined".to_string(), |c| format!("{c:.4}"))
        ))?;
        reports.push(to_value(&r));
    }
    Ok(json!({ "tensor": to_value(&tensor), "audits": reports }))
}

fn run_sweep(ctx: &mut Ctx) -> Result<Value, RunError> {
    let cfg = ctx.config;
    let triple = cfg.triple(ctx.field.lambda()).map_err(|e| RunError::Validation(vec![e]))?;
    let tensor = ctx.tensor()?;
    let g = ctx.g.clone();
    let boundary = move |x: &[f64]| g.eval(x);
    let sweep = SweepConfig {
        field: ctx.field.clone(),
        tensor: tensor.clone(),
        eps: cfg.eps.values.clone(),
        triple,
        points_per_period: cfg.mesh.points_per_period,
        h_cap: cfg.mesh.h.unwrap_or(cfg.mesh.h_cap),
        boundary: &boundary,
        probes: audit::probe_points(&tensor, cfg.triple.radii[2], cfg.sweep.probe_rings, cfg.sweep.probe_angles),
        weights: cfg.sweep.weights.into(),
    };
    let report = audit::epsilon_sweep(&sweep);
    let report = ctx.stage("sweep", report)?;
    let csv = sweep_csv(&report.rows)?;
    ctx.writer.write_bytes("sweep.csv", &csv)?;
    for row in &report.rows {
        match &row.failed {
            None => ctx.say(format!(
                "sweep ε={}: h={}, defect {:.4e}, Ĉ = {}",
                row.eps,
                row.h,
                row.defect,
                row.c_hat.map_or("undefined".to_string(), |c| format!("{c:.4}"))
            ))?,
            Some(msg) => ctx.say(format!("sweep ε={}: FAILED {msg}", row.eps))?,
        }
    }
    let c: Vec<f64> = report.rows.iter().filter_map(|r| r.c_hat).collect();
    let c_ratio = (c.len() >= 2).then(|| c.iter().cloned().fold(f64::MIN, f64::max) / c.iter().cloned().fold(f64::MAX, f64::min));
    ctx.say(format!(
        "sweep: slope {}, strictly decreasing {}, floor limited {}",
        report.slope.map_or("n/a".to_string(), |s| format!("{s:.4}")),
        report.strictly_decreasing,
        report.floor_limited
    ))?;
    if let Some(row) = report.rows.iter().find(|r| r.failed.is_some()) {
        let msg = row.failed.clone().unwrap_or_default();
        return ctx.stage("sweep", Err(format!("ε = {}: {msg}", row.eps)));
    }
    Ok(json!({
        "tensor": to_value(&tensor),
        "rows": to_value(&report.rows),
        "slope": report.slope,
        "strictly_decreasing": report.strictly_decreasing,
        "floor_limited": report.floor_limited,
        "c_hat_ratio": c_ratio,
    }))
}

fn run_propagate(ctx: &mut Ctx) -> Result<Value, RunError> {
    let p = ctx.config.propagate.clone();
    let lambda = p.lambda.unwrap_or(ctx.field.lambda());
    let domain = ctx.domain()?;
    let mut chains = Vec::new();
    for (i, &eps) in ctx.config.eps.values.iter().enumerate() {
        let h = ctx.h(eps);
        let u = pde::solve_dirichlet(&ctx.field, eps, domain.clone(), &ctx.boundary(), h);
        let u = ctx.stage("solve", u)?;
        ctx.dump(&format!("u_{i}.ufield"), &u)?;
        let chain = audit::propagate_smallness(&u, eps, p.r, lambda, p.c, &p.target);
        let chain = ctx.stage("propagate", chain)?;
        ctx.say(format!(
            "propagate ε={eps}: m={}, β={:.4}, closed form {:.4e}, iterated bound holds: {}",
            chain.m, chain.beta, chain.closed_form, chain.holds
        ))?;
        chains.push(json!({ "eps": eps, "h": h, "chain": to_value(&chain) }));
    }
    let beta = BallTriple::scaled(p.r, lambda).and_then(|t| t.exponent()).ok();
    Ok(json!({ "beta": beta, "chains": chains }))
}

fn run_halfball(ctx: &mut Ctx) -> Result<Value, RunError> {
    let radius = ctx.config.halfball.radius;
    let reflected = ctx.field.reflect_even();
    let reflected = ctx.stage("reflect", reflected)?;
    let mut rows = Vec::new();
    for (i, &eps) in ctx.config.eps.values.iter().enumerate() {
        let h = ctx.h(eps);
        for &cond in &ctx.config.halfball.conditions.clone() {
            let parity = match cond {
                Condition::Dirichlet => Parity::Odd,
                Condition::Neumann => Parity::Even,
            };
            // Data extended across x₂ = 0 with the parity of the flat condition.
            let g = ctx.g.clone();
            let ext = move |x: &[f64]| {
                let v = g.eval(&[x[0], x[1].abs()]);
                match parity {
                    Parity::Even => v,
                    Parity::Odd if x[1] == 0.0 => 0.0,
                    Parity::Odd => v * x[1].signum(),
                }
            };
            let half = pde::solve_half(&ctx.field, eps, radius, FlatCondition::from(cond), &ext, h);
            let half = ctx.stage("halfball", half)?;
            let mirror = pde::reflect_solution(&half, parity);
            let mirror = ctx.stage("reflect", mirror)?;
            let full = pde::solve_dirichlet(&reflected, eps, Domain::Disk { radius }, &ext, h);
            let full = ctx.stage("solve", full)?;
            let diff = pde::max_difference_on_half(&full, &half);
            let diff = ctx.stage("compare", diff)?;
            let residual = mirror.residual();
            let tag = if parity == Parity::Odd { "odd" } else { "even" };
            ctx.dump(&format!("half_{i}_{tag}.ufield"), &half)?;
            ctx.say(format!(
                "halfball ε={eps} {tag}: reflected residual {residual:.2e}, restriction difference {diff:.2e} (10h² = {:.2e})",
                10.0 * h * h
            ))?;
            rows.push(json!({
                "eps": eps,
                "h": h,
                "parity": tag,
                "reflected_residual": residual,
                "restriction_difference": diff,
                "bound": 10.0 * h * h,
            }));
        }
    }
    Ok(json!({ "cases": rows }))
}

fn run_lift(ctx: &mut Ctx) -> Result<Value, RunError> {
    let domain = ctx.domain()?;
    let l = ctx.config.lift.clone();
    let mut rows = Vec::new();
    for (i, &eps) in ctx.config.eps.values.iter().enumerate() {
        let h = ctx.h(eps);
        for (k, &lambda_k) in l.lambda_k.iter().enumerate() {
            let base = if lambda_k == 0.0 {
                pde::solve_dirichlet(&ctx.field, eps, domain.clone(), &ctx.boundary(), h)
            } else {
                pde::solve_eigen_type(&ctx.field, eps, lambda_k, &ctx.boundary(), domain.clone(), h)
            };
            let base = ctx.stage("solve", base)?;
            let lifted = base.lift_eigen(lambda_k, l.t_extent, l.h_t);
            let lifted = ctx.stage("lift", lifted)?;
            let h_t = lifted.lift.as_ref().map_or(l.h_t, |x| x.h_t);
            let residual = lifted.residual();
            let bound = 10.0 * (h * h + h_t * h_t);
            ctx.dump(&format!("lift_{i}_{k}.ufield"), &base)?;
            ctx.say(format!("lift ε={eps} λ_k={lambda_k}: residual {residual:.2e} (bound {bound:.2e})"))?;
            rows.push(json!({
                "eps": eps,
                "lambda_k": lambda_k,
                "h": h,
                "h_t": h_t,
                "residual": residual,
                "bound": bound,
            }));
        }
    }
    Ok(json!({ "lifts": rows }))
}
