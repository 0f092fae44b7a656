//! Experiment configuration: flat key/value sections in TOML.

use std::fmt;

use clap::ValueEnum;
use homoglab_core::audit::{BallTriple, TripleKind};
use homoglab_core::cell::HomogenizedTensor;
use homoglab_core::coeff::{CoefficientField, FieldDescriptor};
use homoglab_core::expr::Expr;
use homoglab_core::kernel::WeightMethod;
use homoglab_core::pde::FlatCondition;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Cell,
    Solve,
    Audit,
    Sweep,
    Propagate,
    Halfball,
    Lift,
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pipeline::Cell => "cell",
            Pipeline::Solve => "solve",
            Pipeline::Audit => "audit",
            Pipeline::Sweep => "sweep",
            Pipeline::Propagate => "propagate",
            Pipeline::Halfball => "halfball",
            Pipeline::Lift => "lift",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSection,
    pub field: FieldSection,
    #[serde(default)]
    pub cell: CellSection,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub eps: EpsSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub triple: TripleSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub propagate: PropagateSection,
    #[serde(default)]
    pub halfball: HalfballSection,
    #[serde(default)]
    pub lift: LiftSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub pipeline: Option<Pipeline>,
    pub out: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub family: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub expressions: Vec<String>,
    pub lambda: Option<f64>,
}

fn default_dim() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellSection {
    pub n: usize,
    /// Rayleigh-quotient samples for the ellipticity check.
    pub samples: usize,
}

impl Default for CellSection {
    fn default() -> Self {
        Self { n: 64, samples: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    /// Fixed mesh size; when absent `h = min(ε/points_per_period, h_cap)`
    /// (constant fields use `h_cap`).
    pub h: Option<f64>,
    pub points_per_period: usize,
    pub h_cap: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self { h: None, points_per_period: 8, h_cap: 1.0 / 32.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsSection {
    pub values: Vec<f64>,
}

impl Default for EpsSection {
    fn default() -> Self {
        Self { values: vec![0.125] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Disk,
    /// `E_radius(Â)` with `Â` from the cell pipeline.
    Ellipse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub shape: Shape,
    pub radius: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { shape: Shape::Disk, radius: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryFamily {
    /// `Re (x₁ + i x₂)^degree`.
    ReZn,
    /// `Im (x₁ + i x₂)^degree`.
    ImZn,
    /// Expression in `y1, y2` standing for `x₁, x₂`.
    Expression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySection {
    pub family: BoundaryFamily,
    pub degree: u32,
    pub expression: Option<String>,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self { family: BoundaryFamily::ReZn, degree: 3, expression: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripleSection {
    pub kind: TripleKind,
    pub radii: Vec<f64>,
    /// Ball triples only; defaults to the field's λ.
    pub lambda: Option<f64>,
}

impl Default for TripleSection {
    fn default() -> Self {
        Self { kind: TripleKind::Ellipsoid, radii: vec![0.1, 0.2, 0.8], lambda: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weights {
    OneSided,
    ReactionFlux,
}

impl From<Weights> for WeightMethod {
    fn from(w: Weights) -> Self {
        match w {
            Weights::OneSided => WeightMethod::OneSided,
            Weights::ReactionFlux => WeightMethod::ReactionFlux,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub weights: Weights,
    /// Probe ellipses `|Sx| = R·k/(2·rings)`.
    pub probe_rings: usize,
    pub probe_angles: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { weights: Weights::ReactionFlux, probe_rings: 4, probe_angles: 48 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateSection {
    pub r: f64,
    /// Three-ball constant fed to the iterated bound.
    pub c: f64,
    pub target: Vec<f64>,
    pub lambda: Option<f64>,
}

impl Default for PropagateSection {
    fn default() -> Self {
        Self { r: 0.05, c: 4.0, target: vec![0.2, 0.0], lambda: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Dirichlet,
    Neumann,
}

impl From<Condition> for FlatCondition {
    fn from(c: Condition) -> Self {
        match c {
            Condition::Dirichlet => FlatCondition::Dirichlet,
            Condition::Neumann => FlatCondition::Neumann,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HalfballSection {
    pub radius: f64,
    pub conditions: Vec<Condition>,
}

impl Default for HalfballSection {
    fn default() -> Self {
        Self { radius: 1.0, conditions: vec![Condition::Dirichlet, Condition::Neumann] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftSection {
    pub lambda_k: Vec<f64>,
    pub t_extent: f64,
    pub h_t: f64,
}

impl Default for LiftSection {
    fn default() -> Self {
        Self { lambda_k: vec![0.0, 1.0, 4.0], t_extent: 0.25, h_t: 1.0 / 32.0 }
    }
}

/// Boundary data `g` built from a [`BoundarySection`].
#[derive(Clone, Debug)]
pub enum BoundaryData {
    ReZn(u32),
    ImZn(u32),
    Expression(Expr),
}

impl BoundaryData {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BoundaryData::ReZn(n) => zpow(x, *n).0,
            BoundaryData::ImZn(n) => zpow(x, *n).1,
            BoundaryData::Expression(e) => e.eval(x),
        }
    }
}

fn zpow(x: &[f64], n: u32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..n {
        (re, im) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
    }
    (re, im)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn descriptor(&self) -> FieldDescriptor {
        FieldDescriptor {
            family: self.field.family.clone(),
            dim: self.field.dim,
            params: self.field.params.clone(),
            expressions: self.field.expressions.clone(),
            lambda: self.field.lambda,
        }
    }

    pub fn coefficient(&self) -> Result<CoefficientField<f64>, String> {
        CoefficientField::from_descriptor(&self.descriptor()).map_err(|e| e.to_string())
    }

    pub fn boundary_data(&self) -> Result<BoundaryData, String> {
        Ok(match self.boundary.family {
            BoundaryFamily::ReZn => BoundaryData::ReZn(self.boundary.degree),
            BoundaryFamily::ImZn => BoundaryData::ImZn(self.boundary.degree),
            BoundaryFamily::Expression => {
                let src = self.boundary.expression.as_deref().ok_or("boundary.expression is required")?;
                let e = Expr::parse(src).map_err(|e| e.to_string())?;
                if e.max_variable() > 2 {
                    return Err(format!("boundary.expression uses y{} but the domain is 2-D", e.max_variable()));
                }
                BoundaryData::Expression(e)
            }
        })
    }

    /// Mesh size for one ε.
    pub fn mesh_size(&self, eps: f64, constant: bool) -> f64 {
        match self.mesh.h {
            Some(h) => h,
            None if constant => self.mesh.h_cap,
            None => (eps / self.mesh.points_per_period as f64).min(self.mesh.h_cap),
        }
    }

    pub fn triple(&self, field_lambda: f64) -> Result<BallTriple<f64>, String> {
        let r = &self.triple.radii;
        if r.len() != 3 {
            return Err(format!("triple.radii needs 3 entries, got {}", r.len()));
        }
        let lambda = self.triple.lambda.unwrap_or(field_lambda);
        match self.triple.kind {
            TripleKind::Ellipsoid => BallTriple::ellipsoid(r[0], r[1], r[2], lambda),
            TripleKind::Ball => BallTriple::ball(r[0], r[1], r[2], lambda),
        }
        .map_err(|e| e.to_string())
    }

    /// Every violated precondition for `pipeline`; empty when the config is runnable.
    pub fn validate(&self, pipeline: Pipeline) -> Vec<String> {
        let mut v = Vec::new();
        if let Some(p) = self.run.pipeline {
            if p != pipeline {
                v.push(format!("run.pipeline = {p} but the `{pipeline}` pipeline was requested"));
            }
        }
        let field = match self.coefficient() {
            Ok(f) => Some(f),
            Err(e) => {
                v.push(format!("field: {e}"));
                None
            }
        };
        if let Some(f) = &field {
            if self.cell.samples == 0 {
                v.push("cell.samples must be positive".into());
            } else if let Err(e) = f.verify_ellipticity(self.cell.samples, self.run.seed) {
                v.push(format!("field: {e}"));
            }
        }
        if self.cell.n < 4 {
            v.push(format!("cell.n = {} must be at least 4", self.cell.n));
        }
        if pipeline == Pipeline::Cell {
            return v;
        }
        if self.field.dim != 2 {
            v.push(format!("field.dim = {}: the `{pipeline}` pipeline is 2-D only", self.field.dim));
        }
        if let Err(e) = self.boundary_data() {
            v.push(format!("boundary: {e}"));
        }
        if self.eps.values.is_empty() {
            v.push("eps.values is empty".into());
        }
        if self.mesh.points_per_period < 8 {
            v.push(format!("mesh.points_per_period = {} must be at least 8", self.mesh.points_per_period));
        }
        if !(self.mesh.h_cap > 0.0) {
            v.push(format!("mesh.h_cap = {} must be positive", self.mesh.h_cap));
        }
        if let Some(h) = self.mesh.h {
            if !(h > 0.0) {
                v.push(format!("mesh.h = {h} must be positive"));
            }
        }
        let constant = field.as_ref().is_some_and(|f| f.is_constant());
        for &eps in &self.eps.values {
            if !(eps > 0.0) {
                v.push(format!("eps.values: ε = {eps} must be positive"));
                continue;
            }
            let h = self.mesh_size(eps, constant);
            if !constant && h > eps / 8.0 * (1.0 + 1e-12) {
                v.push(format!("mesh: h = {h} violates h ≤ ε/8 for ε = {eps}"));
            }
        }
        if !(self.domain.radius > 0.0) {
            v.push(format!("domain.radius = {} must be positive", self.domain.radius));
        }
        let lambda = field.as_ref().map_or(1.0, |f| f.lambda());
        match pipeline {
            Pipeline::Audit | Pipeline::Sweep => {
                match self.triple(lambda) {
                    Err(e) => v.push(format!("triple: {e}")),
                    Ok(t) => {
                        let outer = t.radii[2];
                        if pipeline == Pipeline::Sweep {
                            if t.kind != TripleKind::Ellipsoid {
                                v.push("triple.kind must be `ellipsoid` for the sweep".into());
                            }
                        } else if t.kind == TripleKind::Ellipsoid
                            && self.domain.shape == Shape::Ellipse
                            && outer > self.domain.radius
                        {
                            v.push(format!("triple: R = {outer} exceeds domain.radius = {}", self.domain.radius));
                        }
                    }
                }
                if pipeline == Pipeline::Sweep && (self.sweep.probe_rings == 0 || self.sweep.probe_angles == 0) {
                    v.push("sweep.probe_rings and sweep.probe_angles must be positive".into());
                }
            }
            Pipeline::Propagate => {
                let p = &self.propagate;
                let l = p.lambda.unwrap_or(lambda);
                if let Err(e) = BallTriple::scaled(p.r, l) {
                    v.push(format!("propagate: {e}"));
                }
                if !(p.c > 0.0) {
                    v.push(format!("propagate.c = {} must be positive", p.c));
                }
                if p.target.len() != 2 {
                    v.push(format!("propagate.target needs 2 coordinates, got {}", p.target.len()));
                }
            }
            Pipeline::Halfball => {
                if field.as_ref().is_some_and(|f| !f.is_block()) {
                    v.push("halfball: field is not block-diagonal in the last variable".into());
                }
                if !(self.halfball.radius > 0.0) {
                    v.push(format!("halfball.radius = {} must be positive", self.halfball.radius));
                }
                if self.halfball.conditions.is_empty() {
                    v.push("halfball.conditions is empty".into());
                }
            }
            Pipeline::Lift => {
                let l = &self.lift;
                if l.lambda_k.is_empty() {
                    v.push("lift.lambda_k is empty".into());
                }
                if let Some(k) = l.lambda_k.iter().find(|&&k| !(k >= 0.0)) {
                    v.push(format!("lift.lambda_k: λ_k = {k} must be non-negative"));
                }
                if !(l.t_extent > 0.0 && l.h_t > 0.0) {
                    v.push("lift.t_extent and lift.h_t must be positive".into());
                }
            }
            Pipeline::Cell | Pipeline::Solve => {}
        }
        v
    }
}

/// Tensor used for ellipse domains and ellipsoid regions.
pub fn tensor_for(field: &CoefficientField<f64>, n: usize) -> Result<HomogenizedTensor<f64>, String> {
    homoglab_core::cell::homogenized_tensor(field, n).map_err(|e| e.to_string())
}
