//! Linear finite elements for `−div(A(x/ε)∇u) = λu` on disks, ellipses and
//! half-disks, plus the derived fields of the reflection and eigen-lift
//! constructions.
//!
//! Two-dimensional only. The coefficient is frozen at triangle centroids;
//! the mass matrix is consistent.

use std::io::{BufRead, Write};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::HomogenizedTensor;
use crate::coeff::{CoefficientField, FieldDescriptor};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::mesh::{Locator, Mesh, NodeKind};
use crate::scalar::Real;
use crate::sparse::{conjugate_gradient, minres, pdot, CsrMatrix, KrylovFailure, SolverOptions};

/// Relative residual target of every PDE solve.
pub const PDE_TOLERANCE: f64 = 1e-12;
/// Eigen-type solves are rejected when the smallest |Ritz value| of the
/// preconditioned shifted operator is below this fraction of the largest.
pub const SINGULAR_GUARD: f64 = 1e-6;
/// Flat-boundary trace accepted for odd reflection.
pub const FLAT_TRACE_TOLERANCE: f64 = 1e-8;

/// Boundary data `g(x)`.
pub type BoundaryData<'a, T> = &'a (dyn Fn(&[T]) -> T + Sync);

#[derive(Clone, Debug, PartialEq)]
pub enum Domain<T> {
    Disk { radius: T },
    Ellipse(Ellipsoid<T>),
    /// Upper half `{|x| ≤ radius, x₂ ≥ 0}`.
    HalfDisk { radius: T },
}

impl<T: Real> Domain<T> {
    pub fn mesh(&self, h: T) -> Result<Mesh<T>> {
        match self {
            Domain::Disk { radius } => Mesh::disk(*radius, h),
            Domain::Ellipse(e) => Mesh::ellipse(e, h),
            Domain::HalfDisk { radius } => Mesh::half_disk(*radius, h),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Domain::Disk { radius } => format!("disk {:?}", radius.to_f64_lossy()),
            Domain::HalfDisk { radius } => format!("half-disk {:?}", radius.to_f64_lossy()),
            Domain::Ellipse(e) => {
                let a: Vec<String> = e.tensor.a_hat.as_slice().iter().map(|v| format!("{:?}", v.to_f64_lossy())).collect();
                format!("ellipse {:?} {} {:?}", e.r.to_f64_lossy(), a.join(" "), e.tensor.lambda.to_f64_lossy())
            }
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |i: usize| -> Result<T> {
            parts
                .get(i)
                .and_then(|p| p.parse::<f64>().ok())
                .map(T::lit)
                .ok_or_else(|| Error::Format(format!("bad domain descriptor `{s}`")))
        };
        match parts.first().copied() {
            Some("disk") => Ok(Domain::Disk { radius: num(1)? }),
            Some("half-disk") => Ok(Domain::HalfDisk { radius: num(1)? }),
            Some("ellipse") if parts.len() == 7 => {
                let a = Matrix::from_row_major(2, vec![num(2)?, num(3)?, num(4)?, num(5)?]);
                let t = HomogenizedTensor::new(a, num(6)?)?;
                Ok(Domain::Ellipse(Ellipsoid::new(t, num(1)?)?))
            }
            _ => Err(Error::Format(format!("bad domain descriptor `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlatCondition {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    /// Half-disk: data on the curved arc, the given condition on `x₂ = 0`.
    Half(FlatCondition),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Parity {
    Odd,
    Even,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Source<T> {
    None,
    /// `−div(A∇u) = λ_k u`.
    Eigen(T),
}

impl<T: Real> Source<T> {
    pub fn shift(&self) -> T {
        match self {
            Source::None => T::zero(),
            Source::Eigen(l) => *l,
        }
    }
}

/// Tensor-product extension in `t ∈ [−t_extent, t_extent]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lift<T> {
    pub lambda: T,
    pub t_extent: T,
    pub h_t: T,
    pub t_nodes: Vec<T>,
}

/// A nodal P1 field on a mesh of its domain, with the data needed to
/// re-assemble its operator.
#[derive(Clone, Debug)]
pub struct DiscreteField<T> {
    pub domain: Domain<T>,
    pub h: T,
    pub eps: T,
    pub coefficient: CoefficientField<T>,
    pub boundary: BoundaryKind,
    pub source: Source<T>,
    pub mesh: Arc<Mesh<T>>,
    /// Node-major; for lifted fields `values[i·n_t + q]` is the value at
    /// mesh node `i` and `t_nodes[q]`.
    pub values: Vec<T>,
    pub lift: Option<Lift<T>>,
    /// Krylov iterations of the producing solve (0 for derived fields).
    pub iterations: usize,
    pub solver_residual: T,
    /// Set by `reflect_solution`: the half-disk field this one mirrors.
    pub reflected_from: Option<Parity>,
    locator: OnceLock<Arc<Locator<T>>>,
}

/// Region for sup norms.
#[derive(Clone, Debug)]
pub enum Region<T> {
    Ball { center: Vec<T>, radius: T },
    Ellipsoid(Ellipsoid<T>),
}

impl<T: Real> Region<T> {
    pub fn contains_strictly(&self, p: &[T]) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let d2: T = p.iter().zip(center).map(|(&a, &b)| (a - b) * (a - b)).sum();
                d2.sqrt() < *radius
            }
            Region::Ellipsoid(e) => e.contains_strictly(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupNorm<T> {
    pub value: T,
    pub nodes: usize,
}

fn check_mesh_rule<T: Real>(coefficient: &CoefficientField<T>, eps: T, h: T) -> Result<()> {
    if coefficient.dim() != 2 {
        return Err(Error::UnsupportedDimension(coefficient.dim()));
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    if !coefficient.is_constant() && h > eps / T::lit(8.0) * (T::one() + T::lit(1e-12)) {
        return Err(Error::MeshResolution { h: h.to_f64_lossy(), eps: eps.to_f64_lossy() });
    }
    Ok(())
}

/// Stiffness `K` (with `A(x/ε)` at centroids) and consistent mass `M`.
pub fn assemble<T: Real>(mesh: &Mesh<T>, coefficient: &CoefficientField<T>, eps: T) -> (CsrMatrix<T>, CsrMatrix<T>) {
    let n = mesh.node_count();
    let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for t in &mesh.triangles {
        for &a in t {
            for &b in t {
                if a != b {
                    rows[a].push(b);
                }
            }
        }
    }
    rows.par_iter_mut().for_each(|r| {
        r.sort_unstable();
        r.dedup();
    });
    let mut k = CsrMatrix::from_pattern(n, &rows);
    let mut m = CsrMatrix::from_pattern(n, &rows);
    drop(rows);
    let constant = coefficient.is_constant().then(|| coefficient.evaluate(&[T::zero(), T::zero()]));
    let locals: Vec<([[T; 3]; 3], T)> = (0..mesh.triangles.len())
        .into_par_iter()
        .map(|t| {
            let a = match &constant {
                Some(a) => a.clone(),
                None => {
                    let c = mesh.centroid(t);
                    coefficient.evaluate(&[c[0] / eps, c[1] / eps])
                }
            };
            let g = mesh.gradients(t);
            let area = mesh.area(t);
            let mut ke = [[T::zero(); 3]; 3];
            for i in 0..3 {
                let ag = a.mul_vec(&g[i]);
                for j in 0..3 {
                    ke[i][j] = area * (ag[0] * g[j][0] + ag[1] * g[j][1]);
                }
            }
            (ke, area)
        })
        .collect();
    let twelfth = T::one() / T::lit(12.0);
    for (t, (ke, area)) in locals.iter().enumerate() {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            for j in 0..3 {
                k.add_at(tri[i], tri[j], ke[i][j]);
                let mass = if i == j { T::lit(2.0) } else { T::one() };
                m.add_at(tri[i], tri[j], *area * twelfth * mass);
            }
        }
    }
    (k, m)
}

/// Node classification into fixed (with value) and free unknowns.
fn fixed_values<T: Real>(mesh: &Mesh<T>, boundary: BoundaryKind, g: BoundaryData<T>) -> Vec<Option<T>> {
    mesh.nodes
        .iter()
        .zip(&mesh.kinds)
        .map(|(p, kind)| match (kind, boundary) {
            (NodeKind::Curved, _) => Some(g(p)),
            (NodeKind::Flat, BoundaryKind::Half(FlatCondition::Dirichlet)) => Some(T::zero()),
            _ => None,
        })
        .collect()
}

fn free_rows<T: Real>(mesh: &Mesh<T>, boundary: BoundaryKind) -> Vec<bool> {
    mesh.kinds
        .iter()
        .map(|k| match (k, boundary) {
            (NodeKind::Interior, _) => true,
            (NodeKind::Flat, BoundaryKind::Half(FlatCondition::Neumann)) => true,
            _ => false,
        })
        .collect()
}

fn krylov_error<T: Real>(f: KrylovFailure<T>) -> Error {
    match f {
        KrylovFailure::NotConverged { iterations, relative_residual } => Error::NotConverged {
            iterations,
            residual: relative_residual.to_f64_lossy(),
        },
        KrylovFailure::Indefinite { iterations } => Error::NonElliptic { iterations },
        KrylovFailure::NearSingular { ratio } => Error::NearSingular { ratio: ratio.to_f64_lossy() },
    }
}

/// Solves `(K − shift·M) u = 0` on free nodes with the fixed values imposed.
fn solve_system<T: Real>(
    mesh: &Mesh<T>,
    k: &CsrMatrix<T>,
    m: &CsrMatrix<T>,
    shift: T,
    fixed: &[Option<T>],
) -> Result<(Vec<T>, usize, T)> {
    let n = mesh.node_count();
    let mut index = vec![None; n];
    let mut free = Vec::new();
    for i in 0..n {
        if fixed[i].is_none() {
            index[i] = Some(free.len());
            free.push(i);
        }
    }
    let op = if shift == T::zero() { k.clone() } else { k.add_scaled(-shift, m) };
    let mut rhs = vec![T::zero(); free.len()];
    rhs.par_iter_mut().enumerate().for_each(|(fi, r)| {
        let i = free[fi];
        *r = -op.row(i).filter_map(|(c, v)| fixed[c].map(|g| v * g)).sum::<T>();
    });
    let reduced = op.submatrix(&index, free.len());
    let mut x = vec![T::zero(); free.len()];
    let opts = SolverOptions {
        tolerance: T::lit(PDE_TOLERANCE),
        max_iterations: 200 * mesh.rings + 2000,
        zero_mean: false,
    };
    let stats = if shift == T::zero() {
        conjugate_gradient(&reduced, &rhs, &mut x, &opts).map_err(krylov_error)?
    } else {
        let guard = T::lit(SINGULAR_GUARD);
        if pdot(&rhs, &rhs) == T::zero() {
            // Homogeneous data: the answer is zero unless the operator is
            // singular, which a probe solve detects.
            let probe: Vec<T> = (0..free.len())
                .map(|i| T::lit(((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5))
                .collect();
            let mut scratch = vec![T::zero(); free.len()];
            minres(&reduced, &probe, &mut scratch, &opts, guard).map_err(krylov_error)?;
        }
        minres(&reduced, &rhs, &mut x, &opts, guard).map_err(krylov_error)?
    };
    let mut values = vec![T::zero(); n];
    for i in 0..n {
        values[i] = match (fixed[i], index[i]) {
            (Some(g), _) => g,
            (None, Some(fi)) => x[fi],
            _ => unreachable!(),
        };
    }
    Ok((values, stats.iterations, stats.relative_residual))
}

#[allow(clippy::too_many_arguments)]
fn solve_on<T: Real>(
    coefficient: &CoefficientField<T>,
    eps: T,
    domain: Domain<T>,
    boundary: BoundaryKind,
    source: Source<T>,
    g: BoundaryData<T>,
    h: T,
) -> Result<DiscreteField<T>> {
    check_mesh_rule(coefficient, eps, h)?;
    let mesh = domain.mesh(h)?;
    let (k, m) = assemble(&mesh, coefficient, eps);
    let fixed = fixed_values(&mesh, boundary, g);
    let (values, iterations, solver_residual) = solve_system(&mesh, &k, &m, source.shift(), &fixed)?;
    Ok(DiscreteField {
        domain,
        h,
        eps,
        coefficient: coefficient.clone(),
        boundary,
        source,
        mesh: Arc::new(mesh),
        values,
        lift: None,
        iterations,
        solver_residual,
        reflected_from: None,
        locator: OnceLock::new(),
    })
}

/// `−div(A(x/ε)∇u) = 0` in the domain, `u = g` on its boundary.
pub fn solve_dirichlet<T: Real>(
    coefficient: &CoefficientField<T>,
    eps: T,
    domain: Domain<T>,
    g: BoundaryData<T>,
    h: T,
) -> Result<DiscreteField<T>> {
    if matches!(domain, Domain::HalfDisk { .. }) {
        return Err(Error::InvalidParameter("use solve_half for half-disk domains".into()));
    }
    solve_on(coefficient, eps, domain, BoundaryKind::Dirichlet, Source::None, g, h)
}

/// Half-disk problem with `g` on the arc and the given flat condition.
pub fn solve_half<T: Real>(
    coefficient: &CoefficientField<T>,
    eps: T,
    radius: T,
    flat: FlatCondition,
    g: BoundaryData<T>,
    h: T,
) -> Result<DiscreteField<T>> {
    if !coefficient.is_block() {
        return Err(Error::NotBlockStructured);
    }
    solve_on(coefficient, eps, Domain::HalfDisk { radius }, BoundaryKind::Half(flat), Source::None, g, h)
}

/// `−div(A(x/ε)∇u) = λ_k u`, `u = g` on the boundary.
pub fn solve_eigen_type<T: Real>(
    coefficient: &CoefficientField<T>,
    eps: T,
    lambda_k: T,
    g: BoundaryData<T>,
    domain: Domain<T>,
    h: T,
) -> Result<DiscreteField<T>> {
    if !(lambda_k > T::zero()) {
        return Err(Error::InvalidParameter(format!("λ_k = {lambda_k} must be positive")));
    }
    if matches!(domain, Domain::HalfDisk { .. }) {
        return Err(Error::InvalidParameter("eigen-type solves use full domains".into()));
    }
    solve_on(coefficient, eps, domain, BoundaryKind::Dirichlet, Source::Eigen(lambda_k), g, h)
}

/// Dirichlet correctors `Ψ_k`: `𝓛_ε Ψ_k = 0` in `E`, `Ψ_k = x_k` on `∂E`.
pub fn dirichlet_corrector<T: Real>(
    coefficient: &CoefficientField<T>,
    eps: T,
    e: &Ellipsoid<T>,
    h: T,
) -> Result<Vec<DiscreteField<T>>> {
    check_mesh_rule(coefficient, eps, h)?;
    let mesh = Arc::new(Mesh::ellipse(e, h)?);
    let (k, m) = assemble(&mesh, coefficient, eps);
    (0..2)
        .map(|axis| {
            let g = move |x: &[T]| x[axis];
            let fixed = fixed_values(&mesh, BoundaryKind::Dirichlet, &g);
            let (values, iterations, solver_residual) = solve_system(&mesh, &k, &m, T::zero(), &fixed)?;
            Ok(DiscreteField {
                domain: Domain::Ellipse(e.clone()),
                h,
                eps,
                coefficient: coefficient.clone(),
                boundary: BoundaryKind::Dirichlet,
                source: Source::None,
                mesh: mesh.clone(),
                values,
                lift: None,
                iterations,
                solver_residual,
                reflected_from: None,
                locator: OnceLock::new(),
            })
        })
        .collect()
}

impl<T: Real> DiscreteField<T> {
    /// Builds a field from explicit nodal values on the domain's mesh.
    #[allow(clippy::too_many_arguments)]
    pub fn from_values(
        domain: Domain<T>,
        h: T,
        eps: T,
        coefficient: CoefficientField<T>,
        boundary: BoundaryKind,
        source: Source<T>,
        values: impl Fn(&[T]) -> T,
    ) -> Result<Self> {
        let mesh = domain.mesh(h)?;
        let values = mesh.nodes.iter().map(|p| values(p)).collect();
        Ok(Self {
            domain,
            h,
            eps,
            coefficient,
            boundary,
            source,
            mesh: Arc::new(mesh),
            values,
            lift: None,
            iterations: 0,
            solver_residual: T::zero(),
            reflected_from: None,
            locator: OnceLock::new(),
        })
    }

    /// Same metadata and mesh, new values.
    pub fn with_values(&self, values: Vec<T>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self { values, locator: self.locator.clone(), ..self.clone() }
    }

    pub fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    fn locator(&self) -> &Locator<T> {
        self.locator.get_or_init(|| Arc::new(Locator::new(&self.mesh)))
    }

    /// P1 interpolant at `p` (spatial fields only).
    pub fn evaluate(&self, p: &[T]) -> Option<T> {
        if self.lift.is_some() {
            return None;
        }
        self.locator().interpolate(&self.mesh, &self.values, [p[0], p[1]])
    }

    /// Largest `|∇u|` over triangles.
    pub fn max_gradient(&self) -> T {
        (0..self.mesh.triangles.len())
            .into_par_iter()
            .map(|t| {
                let g = self.mesh.gradients(t);
                let tri = self.mesh.triangles[t];
                let gx = (0..3).map(|i| self.values[tri[i]] * g[i][0]).sum::<T>();
                let gy = (0..3).map(|i| self.values[tri[i]] * g[i][1]).sum::<T>();
                (gx * gx + gy * gy).sqrt()
            })
            .reduce(T::zero, T::max)
    }

    /// Max `|u|` over nodes strictly inside `region`.
    pub fn sup_norm(&self, region: &Region<T>) -> Result<SupNorm<T>> {
        let stride = self.lift.as_ref().map_or(1, |l| l.t_nodes.len());
        let mut value = T::zero();
        let mut nodes = 0;
        for (i, p) in self.mesh.nodes.iter().enumerate() {
            if region.contains_strictly(p) {
                nodes += 1;
                for q in 0..stride {
                    value = value.max(self.values[i * stride + q].abs());
                }
            }
        }
        if nodes == 0 {
            return Err(Error::EmptyRegion);
        }
        Ok(SupNorm { value, nodes })
    }

    /// The operator matrices of this field's problem.
    pub fn operator(&self) -> (CsrMatrix<T>, CsrMatrix<T>) {
        assemble(&self.mesh, &self.coefficient, self.eps)
    }

    /// Weak-form residual against every free test function, divided by the
    /// energy norm `√(uᵀKu)`. For lifted fields the operator is
    /// `K⊗M_t + M⊗K_t` and the test functions are free in space and interior in `t`.
    pub fn residual(&self) -> T {
        let (k, m) = self.operator();
        let free = free_rows(&self.mesh, self.boundary);
        match &self.lift {
            None => {
                let ku = k.mul(&self.values);
                let mu = m.mul(&self.values);
                let shift = self.source.shift();
                let num: T = (0..ku.len())
                    .filter(|&i| free[i])
                    .map(|i| {
                        let r = ku[i] - shift * mu[i];
                        r * r
                    })
                    .sum::<T>()
                    .sqrt();
                ratio(num, pdot(&self.values, &ku))
            }
            Some(lift) => {
                let nt = lift.t_nodes.len();
                let ht = lift.t_nodes[1] - lift.t_nodes[0];
                let cols: Vec<Vec<T>> = (0..nt)
                    .map(|q| (0..self.node_count()).map(|i| self.values[i * nt + q]).collect())
                    .collect();
                let kv: Vec<Vec<T>> = cols.iter().map(|c| k.mul(c)).collect();
                let mv: Vec<Vec<T>> = cols.iter().map(|c| m.mul(c)).collect();
                // 1-D P1 matrices on the uniform t grid (tridiagonal rows)
                let mt = |q: usize, p: usize| -> T {
                    let end = q == 0 || q == nt - 1;
                    if q == p {
                        ht * if end { T::lit(1.0 / 3.0) } else { T::lit(2.0 / 3.0) }
                    } else {
                        ht / T::lit(6.0)
                    }
                };
                let kt = |q: usize, p: usize| -> T {
                    let end = q == 0 || q == nt - 1;
                    if q == p {
                        if end { ht.recip() } else { T::lit(2.0) / ht }
                    } else {
                        -ht.recip()
                    }
                };
                let mut num = T::zero();
                let mut energy = T::zero();
                for q in 0..nt {
                    let lo = q.saturating_sub(1);
                    let hi = (q + 1).min(nt - 1);
                    let row: Vec<T> = (0..self.node_count())
                        .map(|i| (lo..=hi).map(|p| kv[p][i] * mt(q, p) + mv[p][i] * kt(q, p)).sum())
                        .collect();
                    energy += pdot(&cols[q], &row);
                    if q > 0 && q < nt - 1 {
                        num += row.iter().zip(&free).filter(|(_, &f)| f).map(|(&r, _)| r * r).sum::<T>();
                    }
                }
                ratio(num.sqrt(), energy)
            }
        }
    }

    /// Lifted field `v(x, t) = e^{√λ_k t} u(x)` on `domain × [−t_extent, t_extent]`.
    pub fn lift_eigen(&self, lambda_k: T, t_extent: T, h_t: T) -> Result<Self> {
        if self.lift.is_some() {
            return Err(Error::InvalidParameter("field is already lifted".into()));
        }
        if lambda_k < T::zero() || !(t_extent > T::zero() && h_t > T::zero()) {
            return Err(Error::InvalidParameter("lift needs λ_k ≥ 0, t_extent > 0, h_t > 0".into()));
        }
        let intervals = (T::lit(2.0) * t_extent / h_t).ceil().to_usize().unwrap_or(1).max(2);
        let step = T::lit(2.0) * t_extent / T::from_usize_lossy(intervals);
        let t_nodes: Vec<T> = (0..=intervals).map(|q| -t_extent + step * T::from_usize_lossy(q)).collect();
        let rate = lambda_k.sqrt();
        let growth: Vec<T> = t_nodes.iter().map(|&t| (rate * t).exp()).collect();
        let values = self
            .values
            .iter()
            .flat_map(|&u| growth.iter().map(move |&e| e * u))
            .collect();
        Ok(Self {
            values,
            lift: Some(Lift { lambda: lambda_k, t_extent, h_t: step, t_nodes }),
            source: Source::None,
            locator: OnceLock::new(),
            ..self.clone()
        })
    }

    /// Values on the `t = t_nodes[q]` slice of a lifted field.
    pub fn slice(&self, q: usize) -> Vec<T> {
        match &self.lift {
            None => self.values.clone(),
            Some(l) => {
                let nt = l.t_nodes.len();
                (0..self.node_count()).map(|i| self.values[i * nt + q]).collect()
            }
        }
    }
}

fn ratio<T: Real>(num: T, energy_sq: T) -> T {
    if num == T::zero() {
        return T::zero();
    }
    let e = energy_sq.max(T::zero()).sqrt();
    if e == T::zero() {
        T::infinity()
    } else {
        num / e
    }
}

/// Mirrors a half-disk field to the full disk: `u(x', −x_d) = ∓u(x', x_d)`.
/// The result carries the even reflection of the coefficient.
pub fn reflect_solution<T: Real>(u: &DiscreteField<T>, parity: Parity) -> Result<DiscreteField<T>> {
    let radius = match u.domain {
        Domain::HalfDisk { radius } => radius,
        _ => return Err(Error::InvalidParameter("reflection needs a half-disk field".into())),
    };
    if u.lift.is_some() {
        return Err(Error::InvalidParameter("cannot reflect a lifted field".into()));
    }
    if parity == Parity::Odd {
        let trace = u
            .mesh
            .nodes
            .iter()
            .zip(&u.values)
            .filter(|(p, _)| p[1] == T::zero())
            .fold(T::zero(), |acc, (_, v)| acc.max(v.abs()));
        if trace > T::lit(FLAT_TRACE_TOLERANCE) {
            return Err(Error::NonzeroFlatTrace(trace.to_f64_lossy()));
        }
    }
    let full = Mesh::disk(radius, u.h)?;
    let mut from_half = vec![usize::MAX; full.node_count()];
    for (hi, &fi) in u.mesh.full_index.iter().enumerate() {
        from_half[fi] = hi;
    }
    let sign = if parity == Parity::Odd { -T::one() } else { T::one() };
    let values = (0..full.node_count())
        .map(|i| {
            if from_half[i] != usize::MAX {
                let v = u.values[from_half[i]];
                if full.nodes[i][1] == T::zero() && parity == Parity::Odd {
                    T::zero()
                } else {
                    v
                }
            } else {
                sign * u.values[from_half[full.mirror[i]]]
            }
        })
        .collect();
    Ok(DiscreteField {
        domain: Domain::Disk { radius },
        h: u.h,
        eps: u.eps,
        coefficient: u.coefficient.reflect_even()?,
        boundary: BoundaryKind::Dirichlet,
        source: u.source,
        mesh: Arc::new(full),
        values,
        lift: None,
        iterations: 0,
        solver_residual: T::zero(),
        reflected_from: Some(parity),
        locator: OnceLock::new(),
    })
}

/// Largest nodal difference between a full-disk field restricted to the upper
/// half and a half-disk field built with the same `h`.
pub fn max_difference_on_half<T: Real>(full: &DiscreteField<T>, half: &DiscreteField<T>) -> Result<T> {
    let needed = half.mesh.full_index.iter().max().map_or(0, |m| m + 1);
    if full.lift.is_some() || half.lift.is_some() || full.mesh.node_count() < needed || full.h != half.h {
        return Err(Error::Mismatch {
            field: "mesh".into(),
            expected: format!("{} nodes", full.mesh.node_count()),
            found: "incompatible half mesh".into(),
        });
    }
    Ok(half
        .mesh
        .full_index
        .iter()
        .enumerate()
        .map(|(hi, &fi)| (full.values[fi] - half.values[hi]).abs())
        .fold(T::zero(), T::max))
}

const UFIELD_MAGIC: &str = "UFIELD v1";

fn boundary_name(b: BoundaryKind) -> &'static str {
    match b {
        BoundaryKind::Dirichlet => "dirichlet",
        BoundaryKind::Half(FlatCondition::Dirichlet) => "half-dirichlet",
        BoundaryKind::Half(FlatCondition::Neumann) => "half-neumann",
    }
}

impl<T: Real> DiscreteField<T> {
    /// Text dump: `key value` header lines, `nodes N`, then one line per
    /// node (`x y value`, or `x y t value` for lifted fields).
    pub fn write_ufield<W: Write>(&self, mut w: W) -> Result<()> {
        let f = |v: T| format!("{:?}", v.to_f64_lossy());
        let desc = self.coefficient.descriptor();
        writeln!(w, "{UFIELD_MAGIC}")?;
        writeln!(w, "d 2")?;
        writeln!(w, "domain {}", self.domain.describe())?;
        writeln!(w, "h {}", f(self.h))?;
        writeln!(w, "eps {}", f(self.eps))?;
        writeln!(w, "family {}", desc.family)?;
        let params: Vec<String> = desc.params.iter().map(|p| format!("{p:?}")).collect();
        writeln!(w, "params {}", params.join(","))?;
        writeln!(w, "expressions {}", desc.expressions.join(";"))?;
        writeln!(w, "lambda {:?}", desc.lambda.unwrap_or(0.0))?;
        writeln!(w, "boundary {}", boundary_name(self.boundary))?;
        match self.source {
            Source::None => writeln!(w, "source none")?,
            Source::Eigen(l) => writeln!(w, "source eigen {}", f(l))?,
        }
        match &self.lift {
            None => writeln!(w, "lift none")?,
            Some(l) => writeln!(w, "lift {} {} {} {}", f(l.lambda), f(l.t_extent), f(l.h_t), l.t_nodes.len())?,
        }
        if let Some(p) = self.reflected_from {
            writeln!(w, "reflected {}", if p == Parity::Odd { "odd" } else { "even" })?;
        }
        writeln!(w, "solver {} {}", self.iterations, f(self.solver_residual))?;
        writeln!(w, "nodes {}", self.node_count())?;
        let nt = self.lift.as_ref().map_or(1, |l| l.t_nodes.len());
        for (i, p) in self.mesh.nodes.iter().enumerate() {
            for q in 0..nt {
                match &self.lift {
                    None => writeln!(w, "{} {} {}", f(p[0]), f(p[1]), f(self.values[i]))?,
                    Some(l) => writeln!(
                        w,
                        "{} {} {} {}",
                        f(p[0]),
                        f(p[1]),
                        f(l.t_nodes[q]),
                        f(self.values[i * nt + q])
                    )?,
                }
            }
        }
        Ok(())
    }

    /// Reads a dump, rebuilding the mesh from the header; node coordinates
    /// that disagree with the rebuilt mesh raise [`Error::Mismatch`].
    pub fn read_ufield<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format("UFIELD truncated".into()))?
                .map_err(Error::from)
        };
        if next()?.trim() != UFIELD_MAGIC {
            return Err(Error::Format("missing UFIELD v1 magic".into()));
        }
        let mut header = std::collections::BTreeMap::new();
        loop {
            let line = next()?;
            let (key, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
            let done = key == "nodes";
            header.insert(key.to_string(), rest.to_string());
            if done {
                break;
            }
        }
        let get = |k: &str| header.get(k).cloned().ok_or_else(|| Error::Format(format!("UFIELD header lacks `{k}`")));
        let num = |s: &str| s.trim().parse::<f64>().map(T::lit).map_err(|_| Error::Format(format!("bad number `{s}`")));
        if get("d")?.trim() != "2" {
            return Err(Error::UnsupportedDimension(get("d")?.trim().parse().unwrap_or(0)));
        }
        let domain = Domain::parse(&get("domain")?)?;
        let h = num(&get("h")?)?;
        let eps = num(&get("eps")?)?;
        let params_line = get("params")?;
        let expr_line = get("expressions")?;
        let desc = FieldDescriptor {
            family: get("family")?.trim().to_string(),
            dim: 2,
            params: params_line
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad param `{s}`"))))
                .collect::<Result<_>>()?,
            expressions: expr_line.split(';').filter(|s| !s.trim().is_empty()).map(|s| s.to_string()).collect(),
            lambda: Some(get("lambda")?.trim().parse::<f64>().map_err(|_| Error::Format("bad lambda".into()))?),
        };
        let coefficient = CoefficientField::from_descriptor(&desc)?;
        let boundary = match get("boundary")?.trim() {
            "dirichlet" => BoundaryKind::Dirichlet,
            "half-dirichlet" => BoundaryKind::Half(FlatCondition::Dirichlet),
            "half-neumann" => BoundaryKind::Half(FlatCondition::Neumann),
            other => return Err(Error::Format(format!("unknown boundary kind `{other}`"))),
        };
        let source_line = get("source")?;
        let source = match source_line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["none"] => Source::None,
            ["eigen", l] => Source::Eigen(num(l)?),
            _ => return Err(Error::Format(format!("bad source `{source_line}`"))),
        };
        let lift_line = get("lift")?;
        let lift_parts: Vec<&str> = lift_line.split_whitespace().collect();
        let reflected_from = match header.get("reflected").map(|s| s.trim()) {
            Some("odd") => Some(Parity::Odd),
            Some("even") => Some(Parity::Even),
            _ => None,
        };
        let (iterations, solver_residual) = match get("solver")?.split_whitespace().collect::<Vec<_>>().as_slice() {
            [it, res] => (it.parse().unwrap_or(0), num(res)?),
            _ => (0, T::zero()),
        };
        let mesh = domain.mesh(h)?;
        let count: usize = get("nodes")?.trim().parse().map_err(|_| Error::Format("bad node count".into()))?;
        if count != mesh.node_count() {
            return Err(Error::Mismatch {
                field: "nodes".into(),
                expected: mesh.node_count().to_string(),
                found: count.to_string(),
            });
        }
        let nt = if lift_parts.first() == Some(&"none") {
            1
        } else {
            lift_parts.get(3).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Format("bad lift line".into()))?
        };
        let mut values = Vec::with_capacity(count * nt);
        let mut t_nodes = Vec::new();
        for i in 0..count {
            for q in 0..nt {
                let line = next()?;
                let cols: Vec<T> = line.split_whitespace().map(num).collect::<Result<_>>()?;
                let p = mesh.nodes[i];
                let tol = T::lit(1e-12) * (T::one() + p[0].abs() + p[1].abs());
                if cols.len() < 3 || (cols[0] - p[0]).abs() > tol || (cols[1] - p[1]).abs() > tol {
                    return Err(Error::Mismatch {
                        field: format!("node {i}"),
                        expected: format!("({}, {})", p[0], p[1]),
                        found: line.clone(),
                    });
                }
                if nt > 1 && i == 0 {
                    t_nodes.push(cols[2]);
                }
                values.push(*cols.last().unwrap());
                let _ = q;
            }
        }
        let lift = if nt > 1 {
            Some(Lift { lambda: num(lift_parts[0])?, t_extent: num(lift_parts[1])?, h_t: num(lift_parts[2])?, t_nodes })
        } else {
            None
        };
        Ok(Self {
            domain,
            h,
            eps,
            coefficient,
            boundary,
            source,
            mesh: Arc::new(mesh),
            values,
            lift,
            iterations,
            solver_residual,
            reflected_from,
            locator: OnceLock::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re_z3(x: &[f64]) -> f64 {
        x[0].powi(3) - 3.0 * x[0] * x[1] * x[1]
    }

    fn identity() -> CoefficientField<f64> {
        CoefficientField::identity(2).unwrap()
    }

    #[test]
    fn harmonic_cubic_on_unit_disk() {
        let h = 1.0 / 32.0;
        let u = solve_dirichlet(&identity(), 1.0, Domain::Disk { radius: 1.0 }, &re_z3, h).unwrap();
        assert!(u.evaluate(&[0.0, 0.0]).unwrap().abs() <= 10.0 * h * h);
        let err = u
            .mesh
            .nodes
            .iter()
            .zip(&u.values)
            .map(|(p, v)| (v - re_z3(p)).abs())
            .fold(0.0, f64::max);
        assert!(err < 10.0 * h * h, "{err}");
        assert!(u.residual() <= 1e-9, "{}", u.residual());
    }

    #[test]
    fn linear_data_is_exact_for_constant_coefficients() {
        let f = CoefficientField::constant(Matrix::diag(&[2.0, 1.0])).unwrap();
        let g = |x: &[f64]| x[0];
        let u = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &g, 0.05).unwrap();
        let err = u.mesh.nodes.iter().zip(&u.values).map(|(p, v)| (v - p[0]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn corrupted_node_is_detected() {
        let u = solve_dirichlet(&identity(), 1.0, Domain::Disk { radius: 1.0 }, &re_z3, 1.0 / 16.0).unwrap();
        let mut v = u.values.clone();
        v[3] += 1.0;
        assert!(u.with_values(v).residual() > 1e-3);
    }

    #[test]
    fn mesh_rule_enforced() {
        let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap();
        let r = solve_dirichlet(&f, 1.0 / 16.0, Domain::Disk { radius: 1.0 }, &re_z3, 1.0 / 64.0);
        assert!(matches!(r, Err(Error::MeshResolution { .. })));
    }

    #[test]
    fn eigen_type_zero_data_and_small_shift() {
        let f = identity();
        let zero = |_: &[f64]| 0.0;
        let u = solve_eigen_type(&f, 1.0, 3.0, &zero, Domain::Disk { radius: 1.0 }, 1.0 / 16.0).unwrap();
        assert!(u.values.iter().all(|&v| v == 0.0));
        let a = solve_eigen_type(&f, 1.0, 1e-9, &re_z3, Domain::Disk { radius: 1.0 }, 1.0 / 16.0).unwrap();
        let b = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &re_z3, 1.0 / 16.0).unwrap();
        let d = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn sup_norm_examples() {
        let g = |x: &[f64]| x[0];
        let u = solve_dirichlet(&identity(), 1.0, Domain::Disk { radius: 1.0 }, &g, 1.0 / 32.0).unwrap();
        let inner = u.sup_norm(&Region::Ball { center: vec![0.0, 0.0], radius: 0.5 }).unwrap();
        assert!(inner.value < 0.5 && inner.value > 0.5 - 1.0 / 16.0);
        let outer = u.sup_norm(&Region::Ball { center: vec![0.0, 0.0], radius: 0.8 }).unwrap();
        assert!(outer.value >= inner.value && outer.nodes > inner.nodes);
        assert!(matches!(
            u.sup_norm(&Region::Ball { center: vec![5.0, 0.0], radius: 0.1 }),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn reflection_of_simple_fields() {
        let f = identity();
        let half = DiscreteField::from_values(
            Domain::HalfDisk { radius: 1.0 },
            0.1,
            1.0,
            f.clone(),
            BoundaryKind::Half(FlatCondition::Dirichlet),
            Source::None,
            |x: &[f64]| x[1],
        )
        .unwrap();
        let odd = reflect_solution(&half, Parity::Odd).unwrap();
        assert!(odd.mesh.nodes.iter().zip(&odd.values).all(|(p, v)| (v - p[1]).abs() < 1e-15));
        let sq = half.with_values(half.mesh.nodes.iter().map(|p| p[1] * p[1]).collect());
        let even = reflect_solution(&sq, Parity::Even).unwrap();
        assert!(even.mesh.nodes.iter().zip(&even.values).all(|(p, v)| (v - p[1] * p[1]).abs() < 1e-15));
        let bad = half.with_values(vec![1.0; half.values.len()]);
        assert!(matches!(reflect_solution(&bad, Parity::Odd), Err(Error::NonzeroFlatTrace(_))));
    }

    #[test]
    fn lift_basics() {
        let u = solve_dirichlet(&identity(), 1.0, Domain::Disk { radius: 1.0 }, &re_z3, 1.0 / 16.0).unwrap();
        let v = u.lift_eigen(0.0, 0.5, 0.1).unwrap();
        let lift = v.lift.as_ref().unwrap();
        let mid = lift.t_nodes.iter().position(|&t| t.abs() < 1e-15).unwrap();
        assert_eq!(v.slice(mid), u.values);
        assert_eq!(v.slice(0), u.values);
        assert!(v.residual() < 1e-9);
    }

    #[test]
    fn ufield_round_trip() {
        let f = CoefficientField::laminate(2, 2.0, 1.0).unwrap();
        let u = solve_dirichlet(&f, 0.5, Domain::Disk { radius: 1.0 }, &re_z3, 1.0 / 16.0).unwrap();
        let mut buf = Vec::new();
        u.write_ufield(&mut buf).unwrap();
        let back = DiscreteField::<f64>::read_ufield(buf.as_slice()).unwrap();
        assert_eq!(back.values, u.values);
        assert_eq!(back.coefficient, u.coefficient);
        let text = String::from_utf8(buf).unwrap().replacen("h 0.0625", "h 0.05", 1);
        assert!(matches!(
            DiscreteField::<f64>::read_ufield(text.as_bytes()),
            Err(Error::Mismatch { .. })
        ));
    }
}
