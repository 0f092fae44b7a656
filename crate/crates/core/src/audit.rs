//! Evaluation of the three-ball inequalities on computed solutions:
//! exponents, m-selection, the audit itself, propagation of smallness along
//! a chain of balls, the doubling-based δ₀ calculator and the ε-sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::HomogenizedTensor;
use crate::coeff::{CoefficientField, FieldDescriptor};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::kernel::{boundary_weights, kernel_defect, WeightMethod};
use crate::pde::{dirichlet_corrector, solve_dirichlet, BoundaryData, DiscreteField, Domain, Region};
use crate::scalar::{epsilon_scale, robust_ceil, robust_floor, Real};

/// `α = ln(R/2r₂) / ln(R/r₁)`, evaluated in base 2 so dyadic ratios give
/// exact quotients.
pub fn exponent_alpha<T: Real>(r1: T, r2: T, outer: T) -> Result<T> {
    check_ellipsoid_radii(r1, r2, outer)?;
    Ok((outer / (T::lit(2.0) * r2)).log2() / (outer / r1).log2())
}

/// `β = ln(λR₃/2R₂) / ln(R₃/R₁)`, also in base 2.
pub fn exponent_beta<T: Real>(r1: T, r2: T, r3: T, lambda: T) -> Result<T> {
    if r2 >= lambda * r3 / T::lit(2.0) {
        return Err(Error::NonPositiveExponent(
            ((lambda * r3 / (T::lit(2.0) * r2)).ln() / (r3 / r1).ln()).to_f64_lossy(),
        ));
    }
    if !(lambda > T::zero() && lambda <= T::one() && r1 > T::zero() && r1 < r2) {
        return Err(Error::InvalidParameter(format!("need 0 < R₁ < R₂, λ ∈ (0, 1] (got {r1}, {r2}, λ = {lambda})")));
    }
    Ok((lambda * r3 / (T::lit(2.0) * r2)).log2() / (r3 / r1).log2())
}

fn check_ellipsoid_radii<T: Real>(r1: T, r2: T, outer: T) -> Result<()> {
    let quarter = outer / T::lit(4.0);
    // r₂ = R/4 itself is admitted: α stays in (0, 1) up to r₂ < R/2.
    if r1 > T::zero() && r1 < r2 && r2 <= quarter && quarter < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("need 0 < r₁ < r₂ ≤ R/4 < 1 (got {r1}, {r2}, {outer})")))
    }
}

fn check_ball_radii<T: Real>(r1: T, r2: T, r3: T, lambda: T) -> Result<()> {
    let q = lambda * r3 / T::lit(4.0);
    if r2 < q && q < lambda / T::lit(4.0) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("need 0 < R₁ < R₂ < λR₃/4 < λ/4 (got {r1}, {r2}, {r3}, λ = {lambda})")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MSelection {
    /// `None` when δ = 0.
    pub m0: Option<usize>,
    /// `None` when the ε-term vanishes.
    pub m1: Option<usize>,
    pub case: u8,
}

/// `m₀`, `m₁` and the case split, with `εln = ε ln(ε⁻¹ + 2)`.
pub fn select_m<T: Real>(delta: T, big_m: T, r1: T, r2: T, outer: T, eps: T) -> Result<MSelection> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    select_m_term(delta, big_m, r1, r2, outer, epsilon_scale(eps))
}

fn select_m_term<T: Real>(delta: T, big_m: T, r1: T, r2: T, outer: T, eps_term: T) -> Result<MSelection> {
    if !(delta >= T::zero() && big_m > T::zero() && delta <= big_m) {
        return Err(Error::InvalidParameter(format!("need 0 ≤ δ ≤ M, M > 0 (got δ = {delta}, M = {big_m})")));
    }
    let m1 = (eps_term > T::zero()).then(|| {
        let v = robust_floor(eps_term.ln() / (r1 / outer).ln()).to_f64_lossy().max(0.0);
        v as usize + 1
    });
    if delta == T::zero() {
        return Ok(MSelection { m0: None, m1, case: 2 });
    }
    let m0 = robust_floor((big_m / delta).ln() / (outer / r1).ln()).to_f64_lossy().max(0.0) as usize + 1;
    let k = m0 as i32;
    let two_r2 = T::lit(2.0) * r2;
    let case = if eps_term * (two_r2 / r1).powi(k) <= (two_r2 / outer).powi(k) { 1 } else { 2 };
    Ok(MSelection { m0: Some(m0), m1, case })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripleKind {
    /// `(r₁, r₂, R)` ellipsoids of the homogenized tensor.
    Ellipsoid,
    /// `(R₁, R₂, R₃)` Euclidean balls.
    Ball,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallTriple<T> {
    pub kind: TripleKind,
    pub radii: [T; 3],
    pub lambda: T,
    /// Whether the geometric factors `r₂/R` and `R²/r₁²` enter the terms.
    /// The `(r, 2r, 9r/λ)` ball triple absorbs them into the constant.
    pub prefactors: bool,
}

impl<T: Real> BallTriple<T> {
    pub fn ellipsoid(r1: T, r2: T, outer: T, lambda: T) -> Result<Self> {
        check_ellipsoid_radii(r1, r2, outer)?;
        Ok(Self { kind: TripleKind::Ellipsoid, radii: [r1, r2, outer], lambda, prefactors: true })
    }

    pub fn ball(r1: T, r2: T, r3: T, lambda: T) -> Result<Self> {
        exponent_beta(r1, r2, r3, lambda)?;
        check_ball_radii(r1, r2, r3, lambda)?;
        Ok(Self { kind: TripleKind::Ball, radii: [r1, r2, r3], lambda, prefactors: true })
    }

    /// Balls of radii `(r, 2r, 9r/λ)`, `r < λ/9`.
    pub fn scaled(r: T, lambda: T) -> Result<Self> {
        if !(r > T::zero() && r < lambda / T::lit(9.0)) {
            return Err(Error::InvalidParameter(format!("need 0 < r < λ/9 (got r = {r}, λ = {lambda})")));
        }
        let r3 = T::lit(9.0) * r / lambda;
        let mut t = Self::ball(r, T::lit(2.0) * r, r3, lambda)?;
        t.prefactors = false;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.radii;
        match self.kind {
            TripleKind::Ellipsoid => check_ellipsoid_radii(a, b, c),
            TripleKind::Ball => {
                exponent_beta(a, b, c, self.lambda)?;
                check_ball_radii(a, b, c, self.lambda)
            }
        }
    }

    pub fn exponent(&self) -> Result<T> {
        let [a, b, c] = self.radii;
        match self.kind {
            TripleKind::Ellipsoid => exponent_alpha(a, b, c),
            TripleKind::Ball => exponent_beta(a, b, c, self.lambda),
        }
    }

    /// Ellipsoid radii feeding the m-selection: a ball triple maps to
    /// `(√λR₁, R₂/√λ, √λR₃)`, whose α equals the triple's β.
    fn selection_radii(&self) -> [T; 3] {
        let [a, b, c] = self.radii;
        match self.kind {
            TripleKind::Ellipsoid => self.radii,
            TripleKind::Ball => {
                let s = self.lambda.sqrt();
                [s * a, b / s, s * c]
            }
        }
    }

    fn regions(&self, tensor: &HomogenizedTensor<T>, center: &[T]) -> Result<[Region<T>; 3]> {
        let make = |r: T| -> Result<Region<T>> {
            Ok(match self.kind {
                TripleKind::Ellipsoid => {
                    if center.iter().any(|&c| c != T::zero()) {
                        return Err(Error::InvalidParameter("ellipsoid triples are centered at the origin".into()));
                    }
                    Region::Ellipsoid(Ellipsoid::new(tensor.clone(), r)?)
                }
                TripleKind::Ball => Region::Ball { center: center.to_vec(), radius: r },
            })
        };
        Ok([make(self.radii[0])?, make(self.radii[1])?, make(self.radii[2])?])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport<T> {
    pub triple: BallTriple<T>,
    pub center: Vec<T>,
    pub eps: T,
    /// `ε ln(ε⁻¹ + 2)`, or 0 for non-oscillating coefficients.
    pub eps_term: T,
    pub delta: T,
    pub mid: T,
    pub big_m: T,
    pub exponent: T,
    pub m0: Option<usize>,
    pub m1: Option<usize>,
    pub case: u8,
    pub term1: T,
    pub term2: T,
    /// `mid / (term₁ + term₂)`; `None` when that sum vanishes.
    pub c_hat: Option<T>,
    pub c_hat_undefined: bool,
    /// The reported case's defining inequality holds.
    pub case_consistent: bool,
    pub region_nodes: [usize; 3],
    pub h: T,
    pub domain: String,
    pub field: FieldDescriptor,
}

/// Sup norms over the triple's regions, exponent, m-selection, both terms and
/// `Ĉ`. Ellipsoid triples use `E_r(Â)` for the given tensor; for constant
/// coefficients the ε-term is zero because `u` does not depend on ε.
pub fn three_ball_audit<T: Real>(
    u: &DiscreteField<T>,
    triple: &BallTriple<T>,
    tensor: &HomogenizedTensor<T>,
    eps: T,
) -> Result<AuditReport<T>> {
    audit_at(u, triple, tensor, eps, &vec![T::zero(); tensor.dim()])
}

fn audit_at<T: Real>(
    u: &DiscreteField<T>,
    triple: &BallTriple<T>,
    tensor: &HomogenizedTensor<T>,
    eps: T,
    center: &[T],
) -> Result<AuditReport<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    let exponent = triple.exponent()?;
    let regions = triple.regions(tensor, center)?;
    let norms = [u.sup_norm(&regions[0])?, u.sup_norm(&regions[1])?, u.sup_norm(&regions[2])?];
    let (delta, mid, big_m) = (norms[0].value, norms[1].value, norms[2].value);
    let eps_term = if u.coefficient.is_constant() { T::zero() } else { epsilon_scale(eps) };
    let [r1, r2, outer] = triple.radii;
    let mut report = AuditReport {
        triple: triple.clone(),
        center: center.to_vec(),
        eps,
        eps_term,
        delta,
        mid,
        big_m,
        exponent,
        m0: None,
        m1: None,
        case: 2,
        term1: T::zero(),
        term2: T::zero(),
        c_hat: None,
        c_hat_undefined: true,
        case_consistent: true,
        region_nodes: [norms[0].nodes, norms[1].nodes, norms[2].nodes],
        h: u.h,
        domain: u.domain.describe(),
        field: u.coefficient.descriptor(),
    };
    if big_m == T::zero() {
        return Ok(report);
    }
    let [s1, s2, s3] = triple.selection_radii();
    let sel = select_m_term(delta.min(big_m), big_m, s1, s2, s3, eps_term)?;
    report.m0 = sel.m0;
    report.m1 = sel.m1;
    report.case = sel.case;
    report.case_consistent = match (sel.case, sel.m0) {
        (1, Some(m0)) => {
            let k = m0 as i32;
            let two = T::lit(2.0) * s2;
            eps_term * (two / s1).powi(k) <= (two / s3).powi(k)
        }
        _ => delta * s1 / (big_m * s3) < eps_term || delta == T::zero(),
    };
    let (g1, g2) = if triple.prefactors { (r2 / outer, (outer / r1).powi(2)) } else { (T::one(), T::one()) };
    report.term1 = g1 * delta.powf(exponent) * big_m.powf(T::one() - exponent);
    report.term2 = g2 * eps_term.powf(exponent) * big_m;
    let sum = report.term1 + report.term2;
    if sum > T::zero() {
        report.c_hat = Some(mid / sum);
        report.c_hat_undefined = false;
    }
    Ok(report)
}

/// `C^{1/(1−β)} δ^{β^m} + m C^{1/(1−β)} [εln]^{β^m}`.
pub fn propagation_bound<T: Real>(beta: T, c: T, delta: T, eps_term: T, m: usize) -> T {
    let cp = c.powf(T::one() / (T::one() - beta));
    let b = beta.powi(m as i32);
    cp * delta.powf(b) + T::from_usize_lossy(m) * cp * eps_term.powf(b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport<T> {
    pub r: T,
    pub lambda: T,
    pub beta: T,
    pub c: T,
    pub m: usize,
    pub target: Vec<T>,
    pub centers: Vec<Vec<T>>,
    /// `sup_{B_r(0)} |u|`.
    pub delta: T,
    pub eps_term: T,
    pub audits: Vec<AuditReport<T>>,
    /// Iterated bound on `sup_{B_{2r}(x_i)} |u|` from the three-ball step
    /// with constant `C`, seeded with `δ`.
    pub iterated: Vec<T>,
    pub closed_form: T,
    /// Every measured `sup_{B_{2r}(x_i)}` is within its iterated bound.
    pub holds: bool,
}

fn ball_inside<T: Real>(domain: &Domain<T>, center: &[T], radius: T) -> bool {
    let cn = (center[0] * center[0] + center[1] * center[1]).sqrt();
    match domain {
        Domain::Disk { radius: big } => cn + radius <= *big,
        Domain::Ellipse(e) => e.gauge(center) + radius * e.tensor.eig_min.sqrt().recip() <= e.r,
        Domain::HalfDisk { .. } => false,
    }
}

/// Chain of `(r, 2r, 9r/λ)` audits along the segment from 0 toward
/// `target`, centers a distance `r` apart, `m = max(1, ⌈|target|/r⌉)`.
pub fn propagate_smallness<T: Real>(
    u: &DiscreteField<T>,
    eps: T,
    r: T,
    lambda: T,
    c: T,
    target: &[T],
) -> Result<ChainReport<T>> {
    let triple = BallTriple::scaled(r, lambda)?;
    let beta = triple.exponent()?;
    if !(c > T::zero()) {
        return Err(Error::InvalidParameter(format!("fitted constant C = {c} must be positive")));
    }
    let dist = (target[0] * target[0] + target[1] * target[1]).sqrt();
    let m = (robust_ceil(dist / r).to_f64_lossy() as usize).max(1);
    let dir: Vec<T> = if dist > T::zero() { target.iter().map(|&v| v / dist).collect() } else { vec![T::zero(); 2] };
    let centers: Vec<Vec<T>> =
        (0..m).map(|i| dir.iter().map(|&d| d * r * T::from_usize_lossy(i)).collect()).collect();
    let big = triple.radii[2];
    for (i, x) in centers.iter().enumerate() {
        if !ball_inside(&u.domain, x, big) {
            return Err(Error::ChainExitsDomain { index: i + 1, center: x.iter().map(|v| v.to_f64_lossy()).collect() });
        }
    }
    let identity = HomogenizedTensor::new(crate::linalg::Matrix::identity(2), T::one())?;
    let audits = centers
        .iter()
        .map(|x| audit_at(u, &triple, &identity, eps, x))
        .collect::<Result<Vec<_>>>()?;
    let delta = audits[0].delta;
    let eps_term = audits[0].eps_term;
    let mut iterated = Vec::with_capacity(m);
    let mut prev = delta;
    for a in &audits {
        let next = c * (prev.powf(beta) * a.big_m.powf(T::one() - beta) + eps_term.powf(beta) * a.big_m);
        iterated.push(next);
        prev = next;
    }
    let holds = audits.iter().zip(&iterated).all(|(a, &b)| a.mid <= b);
    Ok(ChainReport {
        r,
        lambda,
        beta,
        c,
        m,
        target: target.to_vec(),
        centers,
        delta,
        eps_term,
        audits,
        iterated,
        closed_form: propagation_bound(beta, c, delta, eps_term, m),
        holds,
    })
}

/// Node of largest `|u|` inside the region.
pub fn peak<T: Real>(u: &DiscreteField<T>, region: &Region<T>) -> Result<Vec<T>> {
    let stride = u.lift.as_ref().map_or(1, |l| l.t_nodes.len());
    let mut best: Option<(T, usize)> = None;
    for (i, p) in u.mesh.nodes.iter().enumerate() {
        if region.contains_strictly(p) {
            let v = u.values[i * stride..(i + 1) * stride].iter().fold(T::zero(), |a, &b| a.max(b.abs()));
            if best.is_none_or(|(b, _)| v > b) {
                best = Some((v, i));
            }
        }
    }
    let (_, i) = best.ok_or(Error::EmptyRegion)?;
    Ok(u.mesh.nodes[i].to_vec())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Doubling<T> {
    pub k0: usize,
    pub delta0: T,
}

/// `k₀ = ⌈log₂(√λ/r₀)⌉` and `δ₀ = (η₀/2) · C(1/η₀)^{−k₀}`.
pub fn doubling_propagation<T: Real>(c_fn: &dyn Fn(T) -> T, lambda: T, r0: T, eta0: T) -> Result<Doubling<T>> {
    let s = lambda.sqrt();
    if !(r0 > T::zero() && r0 < s / T::lit(2.0)) {
        return Err(Error::InvalidParameter(format!("need 0 < r₀ < √λ/2 (got r₀ = {r0}, λ = {lambda})")));
    }
    if !(eta0 > T::zero()) {
        return Err(Error::InvalidParameter(format!("η₀ = {eta0} must be positive")));
    }
    let c = c_fn(eta0.recip());
    if !(c >= T::one()) {
        return Err(Error::InvalidParameter(format!("doubling constant C(1/η₀) = {c} must be ≥ 1")));
    }
    let k0 = robust_ceil((s / r0).log2()).to_f64_lossy() as usize;
    Ok(Doubling { k0, delta0: eta0 / T::lit(2.0) / c.powi(k0 as i32) })
}

/// Inputs of an ε-sweep. Non-constant fields use `h = ε/points_per_period`
/// capped at `h_cap`; constant fields use `h_cap` for every ε.
pub struct SweepConfig<'a, T> {
    pub field: CoefficientField<T>,
    pub tensor: HomogenizedTensor<T>,
    pub eps: Vec<T>,
    pub triple: BallTriple<T>,
    pub points_per_period: usize,
    pub h_cap: T,
    pub boundary: BoundaryData<'a, T>,
    /// Evaluation points of the kernel defect, each with `|Sx| ≤ R/2`; the
    /// row reports the largest defect over them.
    pub probes: Vec<Vec<T>>,
    pub weights: WeightMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub eps: T,
    pub h: T,
    pub delta: T,
    pub mid: T,
    pub big_m: T,
    pub term1: T,
    pub term2: T,
    pub c_hat: Option<T>,
    pub defect: T,
    pub failed: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport<T> {
    pub rows: Vec<SweepRow<T>>,
    /// Least-squares slope of `ln(defect)` against `ln(ε ln(ε⁻¹ + 2))`.
    pub slope: Option<T>,
    pub floor_limited: bool,
    pub strictly_decreasing: bool,
}

impl<T: Real> SweepConfig<'_, T> {
    pub fn mesh_size(&self, eps: T) -> T {
        if self.field.is_constant() {
            self.h_cap
        } else {
            (eps / T::from_usize_lossy(self.points_per_period)).min(self.h_cap)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::InvalidParameter("ε list is empty".into()));
        }
        if self.triple.kind != TripleKind::Ellipsoid {
            return Err(Error::InvalidParameter("the sweep uses an ellipsoid triple".into()));
        }
        self.triple.validate()?;
        if self.points_per_period < 8 {
            return Err(Error::InvalidParameter("need at least 8 mesh points per period".into()));
        }
        if let Some(e) = self.eps.iter().find(|&&e| !(e > T::zero())) {
            return Err(Error::InvalidParameter(format!("ε = {e} must be positive")));
        }
        let e = Ellipsoid::new(self.tensor.clone(), self.triple.radii[2])?;
        if self.probes.is_empty() {
            return Err(Error::InvalidParameter("no kernel-defect probe points".into()));
        }
        if let Some(x) = self.probes.iter().find(|x| x.len() != 2 || e.gauge(x) > e.r / T::lit(2.0) * (T::one() + T::lit(1e-12))) {
            return Err(Error::OutsideEllipsoid(x.iter().map(|v| v.to_f64_lossy()).collect()));
        }
        Ok(())
    }

    fn row(&self, eps: T) -> SweepRow<T> {
        let h = self.mesh_size(eps);
        let mut row = SweepRow {
            eps,
            h,
            delta: T::zero(),
            mid: T::zero(),
            big_m: T::zero(),
            term1: T::zero(),
            term2: T::zero(),
            c_hat: None,
            defect: T::zero(),
            failed: None,
        };
        let run = || -> Result<(AuditReport<T>, T)> {
            let e = Ellipsoid::new(self.tensor.clone(), self.triple.radii[2])?;
            let u = solve_dirichlet(&self.field, eps, Domain::Ellipse(e.clone()), self.boundary, h)?;
            let audit = three_ball_audit(&u, &self.triple, &self.tensor, eps)?;
            let psi = dirichlet_corrector(&self.field, eps, &e, h)?;
            let w = boundary_weights(&self.field, eps, &e, &psi, self.weights)?;
            let defect = self
                .probes
                .iter()
                .map(|x| kernel_defect(&u, &self.tensor, &w, x))
                .try_fold(T::zero(), |acc, d| d.map(|d| acc.max(d)))?;
            Ok((audit, defect))
        };
        match run() {
            Ok((a, defect)) => {
                row.delta = a.delta;
                row.mid = a.mid;
                row.big_m = a.big_m;
                row.term1 = a.term1;
                row.term2 = a.term2;
                row.c_hat = a.c_hat;
                row.defect = defect;
            }
            Err(err) => row.failed = Some(err.to_string()),
        }
        row
    }
}

/// `count` angles on each of the ellipses `|Sx| = R·k/(2·rings)`,
/// `k = 1..rings`, starting at angle 0.3.
pub fn probe_points<T: Real>(tensor: &HomogenizedTensor<T>, outer: T, rings: usize, count: usize) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(rings * count);
    for i in 0..count {
        let th = T::lit(0.3) + T::TAU() * T::from_usize_lossy(i) / T::from_usize_lossy(count);
        for k in 1..=rings {
            let s = outer * T::from_usize_lossy(k) / T::from_usize_lossy(2 * rings);
            out.push(tensor.s_inv.mul_vec(&[s * th.cos(), s * th.sin()]));
        }
    }
    out
}

pub fn epsilon_sweep<T: Real>(config: &SweepConfig<T>) -> Result<SweepReport<T>> {
    config.validate()?;
    let rows: Vec<SweepRow<T>> = config.eps.par_iter().map(|&e| config.row(e)).collect();
    let ok: Vec<&SweepRow<T>> = rows.iter().filter(|r| r.failed.is_none()).collect();
    let fit: Vec<(T, T)> = ok
        .iter()
        .filter(|r| r.defect > T::zero())
        .map(|r| (epsilon_scale(r.eps).ln(), r.defect.ln()))
        .collect();
    let slope = least_squares_slope(&fit);
    let max = ok.iter().map(|r| r.defect).fold(T::zero(), T::max);
    let min = ok.iter().map(|r| r.defect).fold(T::infinity(), T::min);
    let floor_limited = config.field.is_constant() || ok.len() < 2 || !(max > T::lit(2.0) * min);
    let mut by_eps = ok.clone();
    by_eps.sort_by(|a, b| b.eps.partial_cmp(&a.eps).unwrap_or(std::cmp::Ordering::Equal));
    let strictly_decreasing = by_eps.len() == rows.len() && by_eps.windows(2).all(|w| w[1].defect < w[0].defect);
    Ok(SweepReport { rows, slope, floor_limited, strictly_decreasing })
}

pub fn least_squares_slope<T: Real>(points: &[(T, T)]) -> Option<T> {
    if points.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(points.len());
    let mx = points.iter().map(|p| p.0).sum::<T>() / n;
    let my = points.iter().map(|p| p.1).sum::<T>() / n;
    let sxx: T = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: T = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > T::zero()).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn exponent_examples() {
        assert!((exponent_alpha(0.1f64, 0.2, 0.8).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((exponent_alpha(0.05f64, 0.1, 0.8).unwrap() - 0.5).abs() < 1e-15);
        assert!(exponent_alpha(0.1, 0.25, 0.8).is_err());
        assert!(exponent_alpha(0.1, 0.2, 0.7).is_err());
        assert!((exponent_beta(0.1f64, 0.2, 1.6, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(BallTriple::ball(0.1, 0.2, 1.6, 1.0).is_err());
        assert!(BallTriple::ball(0.01, 0.02, 0.16, 1.0).is_ok());
        assert!(matches!(exponent_beta(0.1, 0.4, 0.8, 1.0), Err(Error::NonPositiveExponent(_))));
        let lambda = 0.5;
        let t = BallTriple::scaled(0.05, lambda).unwrap();
        let expect = (9.0f64 / 4.0).ln() / (9.0f64 / lambda).ln();
        assert!((t.exponent().unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn m_selection_examples() {
        let s = select_m(1e-4, 1.0, 0.1, 0.2, 1.0, 0.5).unwrap();
        assert_eq!(s.m0, Some(5));
        let s = select_m(1e-4, 1.0, 0.1, 0.2, 1.0, 1e-3).unwrap();
        assert_eq!(s.m1, Some(3));
        let s = select_m(0.0, 1.0, 0.1, 0.2, 1.0, 1e-3).unwrap();
        assert_eq!((s.m0, s.case), (None, 2));
        let s = select_m(0.5, 1.0, 0.1, 0.2, 1.0, 1e-12).unwrap();
        assert_eq!(s.case, 1);
    }

    #[test]
    fn closed_form_iterators() {
        let b = propagation_bound(0.5, 2.0, 1e-4, 0.0, 3);
        assert!((b - 4.0 * 1e-4f64.powf(0.125)).abs() < 1e-12);
        let d = doubling_propagation(&|n| n, 1.0, 0.125, 0.1).unwrap();
        assert_eq!((d.k0, d.delta0), (3, 5e-5));
        let d = doubling_propagation(&|_| 1.0, 1.0, 0.01, 0.3).unwrap();
        assert_eq!(d.delta0, 0.15);
        assert!(doubling_propagation(&|n| n, 1.0, 0.6, 0.1).is_err());
    }

    #[test]
    fn zero_solution_report() {
        let f = CoefficientField::identity(2).unwrap();
        let u = solve_dirichlet(&f, 1.0, Domain::Disk { radius: 1.0 }, &|_: &[f64]| 0.0, 1.0 / 32.0).unwrap();
        let t = HomogenizedTensor::new(Matrix::identity(2), 1.0).unwrap();
        let r = three_ball_audit(&u, &BallTriple::ellipsoid(0.1, 0.2, 0.8, 1.0).unwrap(), &t, 0.1).unwrap();
        assert!(r.c_hat_undefined && r.delta == 0.0 && r.mid == 0.0 && r.big_m == 0.0);
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (0..4).map(|i| (i as f64, 1.5 * i as f64 + 0.3)).collect();
        assert!((least_squares_slope(&pts).unwrap() - 1.5).abs() < 1e-14);
    }
}
