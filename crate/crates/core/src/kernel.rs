//! Homogenized Poisson kernel on `∂E_r`, boundary reconstruction, the
//! boundary weight `w_ε`, the kernel defect, and Chebyshev–Lagrange
//! interpolation plans with their bounds.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::HomogenizedTensor;
use crate::coeff::CoefficientField;
use crate::ellipsoid::{BoundaryNode, Ellipsoid};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::pde::{DiscreteField, Domain};
use crate::scalar::Real;

/// `Γ(d/2)/(2π^{d/2})`, the reciprocal of the unit sphere's area.
pub fn kappa<T: Real>(d: usize) -> Result<T> {
    match d {
        2 => Ok(T::one() / T::TAU()),
        3 => Ok(T::one() / (T::lit(4.0) * T::PI())),
        other => Err(Error::UnsupportedDimension(other)),
    }
}

/// `P₀(x, y) = κ_d · det S · √(nᵀÂn) · (r² − |Sx|²) / (r |Sx − Sy|^d)` where
/// `n` is the outward unit normal at `y`. The factor `det S·√(nᵀÂn)` is the
/// surface Jacobian of `y ↦ Sy` from `∂E_r` onto the sphere of radius `r`.
pub fn poisson_kernel<T: Real>(e: &Ellipsoid<T>, x: &[T], y: &[T]) -> Result<T> {
    if !e.contains_strictly(x) {
        return Err(Error::OutsideEllipsoid(x.iter().map(|v| v.to_f64_lossy()).collect()));
    }
    if !e.is_on_boundary(y) {
        return Err(Error::OffBoundary(y.iter().map(|v| v.to_f64_lossy()).collect()));
    }
    Ok(kernel_unchecked(e, x, y, kappa(e.dim())?))
}

fn kernel_unchecked<T: Real>(e: &Ellipsoid<T>, x: &[T], y: &[T], kappa: T) -> T {
    let t = &e.tensor;
    let sx = t.s.mul_vec(x);
    let sy = t.s.mul_vec(y);
    let n = e.normal(y);
    let jac = t.det_s * t.a_hat.bilinear(&n, &n).sqrt();
    let diff: Vec<T> = sx.iter().zip(&sy).map(|(&a, &b)| a - b).collect();
    let dist = norm(&diff);
    let r = e.r;
    kappa * jac * (r * r - dot(&sx, &sx)) / (r * dist.powi(e.dim() as i32))
}

/// `Σ_j P₀(x, y_j) u_j W_j` over boundary quadrature nodes.
pub fn reconstruct<T: Real>(e: &Ellipsoid<T>, nodes: &[BoundaryNode<T>], values: &[T], x: &[T]) -> Result<T> {
    if nodes.len() != values.len() {
        return Err(Error::InvalidParameter("one boundary value per node required".into()));
    }
    if !e.contains_strictly(x) {
        return Err(Error::OutsideEllipsoid(x.iter().map(|v| v.to_f64_lossy()).collect()));
    }
    if let Some(bad) = nodes.iter().find(|n| !e.is_on_boundary(&n.point)) {
        return Err(Error::OffBoundary(bad.point.iter().map(|v| v.to_f64_lossy()).collect()));
    }
    let k = kappa(e.dim())?;
    Ok(nodes
        .iter()
        .zip(values)
        .map(|(n, &u)| kernel_unchecked(e, x, &n.point, k) * n.weight * u)
        .sum())
}

/// `t_i = cos((2i − 1)π / (2m))`, `i = 1..m`.
pub fn chebyshev_nodes<T: Real>(m: usize) -> Vec<T> {
    (1..=m)
        .map(|i| {
            let num = T::from_usize_lossy(2 * i - 1) * T::PI();
            let t = (num / T::from_usize_lossy(2 * m)).cos();
            // cos(π/2) is not exactly zero in floating point
            if 2 * i - 1 == m {
                T::zero()
            } else {
                t
            }
        })
        .collect()
}

/// Lagrange interpolation at `u = r₂/r₁` from the Chebyshev nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationPlan<T> {
    pub m: usize,
    pub r1: T,
    pub r2: T,
    pub nodes: Vec<T>,
    pub coeffs: Vec<T>,
    /// `(2m)⁻¹(2r₂/r₁)^m`, bound on each `|c_j|`.
    pub coeff_bound: T,
    /// `½(2r₂/r₁)^m`, bound on `Σ|c_j|`.
    pub sum_bound: T,
}

pub fn lagrange_coeffs<T: Real>(m: usize, r1: T, r2: T) -> Result<InterpolationPlan<T>> {
    if m == 0 {
        return Err(Error::InvalidParameter("interpolation order m must be ≥ 1".into()));
    }
    if !(r1 > T::zero() && r1 < r2) {
        return Err(Error::InvalidParameter(format!("need 0 < r₁ < r₂ (got {r1}, {r2})")));
    }
    let u = r2 / r1;
    let nodes: Vec<T> = chebyshev_nodes(m);
    let coeffs = (0..m)
        .map(|j| {
            (0..m)
                .filter(|&i| i != j)
                .map(|i| (u - nodes[i]) / (nodes[j] - nodes[i]))
                .fold(T::one(), |a, b| a * b)
        })
        .collect();
    let two_u_m = (T::lit(2.0) * u).powi(m as i32);
    Ok(InterpolationPlan {
        m,
        r1,
        r2,
        nodes,
        coeffs,
        coeff_bound: two_u_m / T::from_usize_lossy(2 * m),
        sum_bound: two_u_m / T::lit(2.0),
    })
}

impl<T: Real> InterpolationPlan<T> {
    pub fn ratio(&self) -> T {
        self.r2 / self.r1
    }

    /// `Φ_m(z) = Π_i (z − t_i)`.
    pub fn node_polynomial(&self, z: Complex<T>) -> Complex<T> {
        self.nodes.iter().fold(Complex::new(T::one(), T::zero()), |acc, &t| acc * (z - t))
    }

    /// `|Φ'_m(t_i)| = Π_{k≠i} |t_i − t_k|`.
    pub fn node_derivative(&self, i: usize) -> T {
        (0..self.m)
            .filter(|&k| k != i)
            .map(|k| (self.nodes[i] - self.nodes[k]).abs())
            .fold(T::one(), |a, b| a * b)
    }

    /// `m·2^{1−m}`, the lower bound on `|Φ'_m(t_i)|`.
    pub fn derivative_lower_bound(&self) -> T {
        T::from_usize_lossy(self.m) * T::lit(2.0).powi(1 - self.m as i32)
    }

    /// `(r₂/r₁)^m`, the upper bound on `|Φ_m(r₂/r₁)|`.
    pub fn upper_bound_at_ratio(&self) -> T {
        self.ratio().powi(self.m as i32)
    }

    /// `(ρ − 1)^m`, the lower bound on `|Φ_m|` over the circle `|z| = ρ`, `ρ ≥ 1`.
    pub fn circle_lower_bound(&self, rho: T) -> T {
        (rho - T::one()).powi(self.m as i32)
    }

    /// `U_{m−1}(t)` by the three-term recurrence (`U_{−1} = 0`).
    pub fn chebyshev_u(&self, t: T) -> T {
        let (mut prev, mut cur) = (T::zero(), T::one());
        for _ in 1..self.m {
            let next = T::lit(2.0) * t * cur - prev;
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Lagrange interpolant of the node values `f_i` evaluated at `r₂/r₁`.
    pub fn interpolate(&self, values: &[T]) -> T {
        self.coeffs.iter().zip(values).map(|(&c, &v)| c * v).sum()
    }

    /// Interpolation points `x_i = t_i · x₀ · r₁/r₂`.
    pub fn sample_points(&self, x0: &[T]) -> Vec<Vec<T>> {
        let s = self.r1 / self.r2;
        self.nodes.iter().map(|&t| x0.iter().map(|&v| t * v * s).collect()).collect()
    }
}

/// `2^m r₂^m / R^{m+d−1}`, the interpolation remainder bound with its
/// constant set to 1.
pub fn interpolation_error_bound<T: Real>(plan: &InterpolationPlan<T>, outer: T, d: usize) -> Result<T> {
    if !(plan.r2 < outer / T::lit(4.0)) {
        return Err(Error::InvalidParameter(format!("need r₂ < R/4 (r₂ = {}, R = {outer})", plan.r2)));
    }
    let m = plan.m as i32;
    Ok((T::lit(2.0) * plan.r2).powi(m) / outer.powi(m + d as i32 - 1))
}

/// Largest `|P₀(x₀, y) − Σ c_i P₀(x_i, y)|` over boundary nodes of `E_R`.
pub fn interpolated_kernel_error<T: Real>(
    plan: &InterpolationPlan<T>,
    e: &Ellipsoid<T>,
    x0: &[T],
    count: usize,
) -> Result<T> {
    let k = kappa(e.dim())?;
    if !e.contains_strictly(x0) {
        return Err(Error::OutsideEllipsoid(x0.iter().map(|v| v.to_f64_lossy()).collect()));
    }
    let points = plan.sample_points(x0);
    let nodes = e.boundary_nodes(count)?;
    Ok(nodes
        .iter()
        .map(|n| {
            let exact = kernel_unchecked(e, x0, &n.point, k);
            let interp: T = plan
                .coeffs
                .iter()
                .zip(&points)
                .map(|(&c, p)| c * kernel_unchecked(e, p, &n.point, k))
                .sum();
            (exact - interp).abs()
        })
        .fold(T::zero(), T::max))
}

/// How `∂Ψ_k/∂n` is obtained at the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMethod {
    /// Second-order one-sided differences along the inward normal of the P1
    /// interpolant, with step equal to the mesh parameter.
    OneSided,
    /// Discrete conormal flux: the residual `(KΨ_k)_j` of the boundary row
    /// divided by the lumped boundary length of node `j`.
    ReactionFlux,
}

fn check_correctors<T: Real>(psi: &[DiscreteField<T>], e: &Ellipsoid<T>) -> Result<()> {
    if psi.len() != e.dim() {
        return Err(Error::InvalidParameter("one Dirichlet corrector per axis required".into()));
    }
    for p in psi {
        match &p.domain {
            Domain::Ellipse(pe) if pe.r == e.r && pe.tensor == e.tensor => {}
            _ => return Err(Error::InvalidParameter("correctors were solved on a different ellipsoid".into())),
        }
    }
    Ok(())
}

/// `w_ε(y) = (âₙₙ)⁻¹ Σ_k ∂Ψ_k/∂n · n_k · aₙₙ(y/ε)` at a boundary point, by
/// one-sided differences.
pub fn w_epsilon<T: Real>(
    field: &CoefficientField<T>,
    eps: T,
    e: &Ellipsoid<T>,
    psi: &[DiscreteField<T>],
    y: &[T],
) -> Result<T> {
    check_correctors(psi, e)?;
    if !e.is_on_boundary(y) {
        return Err(Error::OffBoundary(y.iter().map(|v| v.to_f64_lossy()).collect()));
    }
    let n = e.normal(y);
    let s = psi[0].h;
    let inward = |k: T| -> Vec<T> { y.iter().zip(&n).map(|(&a, &b)| a - k * s * b).collect() };
    let p1 = inward(T::one());
    let p2 = inward(T::lit(2.0));
    let mut flux = T::zero();
    for (k, p) in psi.iter().enumerate() {
        let v1 = p.evaluate(&p1).ok_or(Error::EmptyRegion)?;
        let v2 = p.evaluate(&p2).ok_or(Error::EmptyRegion)?;
        let dn = (T::lit(3.0) * y[k] - T::lit(4.0) * v1 + v2) / (T::lit(2.0) * s);
        flux += dn * n[k];
    }
    let scaled: Vec<T> = y.iter().map(|&v| v / eps).collect();
    let a_nn = field.evaluate(&scaled).bilinear(&n, &n);
    let a_hat_nn = e.tensor.a_hat.bilinear(&n, &n);
    Ok(flux * a_nn / a_hat_nn)
}

/// `w_ε` at every outer node of the correctors' mesh, in mesh order.
pub fn boundary_weights<T: Real>(
    field: &CoefficientField<T>,
    eps: T,
    e: &Ellipsoid<T>,
    psi: &[DiscreteField<T>],
    method: WeightMethod,
) -> Result<Vec<T>> {
    check_correctors(psi, e)?;
    let mesh = &psi[0].mesh;
    match method {
        WeightMethod::OneSided => mesh
            .outer
            .par_iter()
            .map(|&j| w_epsilon(field, eps, e, psi, &mesh.nodes[j]))
            .collect(),
        WeightMethod::ReactionFlux => {
            let (k, _) = psi[0].operator();
            let fluxes: Vec<Vec<T>> = psi.iter().map(|p| k.mul(&p.values)).collect();
            let outer = &mesh.outer;
            let count = outer.len();
            Ok((0..count)
                .map(|i| {
                    let j = outer[i];
                    let y = mesh.nodes[j];
                    let prev = mesh.nodes[outer[(i + count - 1) % count]];
                    let next = mesh.nodes[outer[(i + 1) % count]];
                    let len = |a: [T; 2], b: [T; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    let lumped = (len(prev, y) + len(y, next)) / T::lit(2.0);
                    let n = e.normal(&y);
                    let conormal: T = (0..2).map(|k| n[k] * fluxes[k][j]).sum::<T>() / lumped;
                    conormal / e.tensor.a_hat.bilinear(&n, &n)
                })
                .collect())
        }
    }
}

/// `|u_ε(x) − Σ_j P₀(x, y_j) w(y_j) u_ε(y_j) W_j|` over the outer nodes of
/// `u`'s ellipse mesh, `w` given per outer node.
pub fn kernel_defect<T: Real>(u: &DiscreteField<T>, tensor: &HomogenizedTensor<T>, w: &[T], x: &[T]) -> Result<T> {
    let e = match &u.domain {
        Domain::Ellipse(e) if e.tensor == *tensor => e,
        _ => return Err(Error::InvalidParameter("kernel defect needs a field on E_R for this tensor".into())),
    };
    // probes on the ring |Sx| = R/2 itself are admitted up to rounding
    if e.gauge(x) > e.r / T::lit(2.0) * (T::one() + T::lit(1e-12)) {
        return Err(Error::OutsideEllipsoid(x.iter().map(|v| v.to_f64_lossy()).collect()));
    }
    let outer = &u.mesh.outer;
    if w.len() != outer.len() {
        return Err(Error::InvalidParameter("one weight per boundary node required".into()));
    }
    let quad = e.boundary_nodes(outer.len())?;
    let k = kappa(2)?;
    let mut integral = T::zero();
    for (i, (&j, q)) in outer.iter().zip(&quad).enumerate() {
        let y = u.mesh.nodes[j];
        if (y[0] - q.point[0]).abs() + (y[1] - q.point[1]).abs() > T::lit(1e-10) * e.r {
            return Err(Error::OffBoundary(vec![y[0].to_f64_lossy(), y[1].to_f64_lossy()]));
        }
        integral += kernel_unchecked(e, x, &y, k) * q.weight * w[i] * u.values[j];
    }
    let ux = u.evaluate(x).ok_or(Error::EmptyRegion)?;
    Ok((ux - integral).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn ellipse(a: &[f64], r: f64) -> Ellipsoid<f64> {
        let t = HomogenizedTensor::new(Matrix::diag(a), 0.2).unwrap();
        Ellipsoid::new(t, r).unwrap()
    }

    #[test]
    fn disk_kernel_values() {
        let e = ellipse(&[1.0, 1.0], 1.0);
        let tau = std::f64::consts::TAU;
        assert!((poisson_kernel(&e, &[0.0, 0.0], &[0.6, 0.8]).unwrap() - 1.0 / tau).abs() < 1e-15);
        assert!((poisson_kernel(&e, &[0.5, 0.0], &[1.0, 0.0]).unwrap() - 3.0 / tau).abs() < 1e-14);
        assert!(matches!(poisson_kernel(&e, &[1.5, 0.0], &[1.0, 0.0]), Err(Error::OutsideEllipsoid(_))));
        assert!(matches!(poisson_kernel(&e, &[0.0, 0.0], &[0.9, 0.0]), Err(Error::OffBoundary(_))));
    }

    #[test]
    fn normalization_on_anisotropic_ellipse() {
        let e = ellipse(&[4.0, 1.0], 1.0);
        let nodes = e.boundary_nodes(2048).unwrap();
        for x in [[0.0, 0.0], [0.9, 0.3], [-0.5, -0.6]] {
            let total = reconstruct(&e, &nodes, &vec![1.0; nodes.len()], &x).unwrap();
            assert!((total - 1.0).abs() < 1e-6, "{total}");
        }
    }

    #[test]
    fn reconstruction_examples() {
        let e = ellipse(&[1.0, 1.0], 1.0);
        let nodes = e.boundary_nodes(2048).unwrap();
        let vals = |f: &dyn Fn(&[f64]) -> f64| nodes.iter().map(|n| f(&n.point)).collect::<Vec<_>>();
        let five = reconstruct(&e, &nodes, &vals(&|_| 5.0), &[0.1, 0.2]).unwrap();
        assert!((five - 5.0).abs() < 1e-6);
        let lin = reconstruct(&e, &nodes, &vals(&|p| p[0]), &[0.3, 0.1]).unwrap();
        assert!((lin - 0.3).abs() < 1e-6);
        let quad = reconstruct(&e, &nodes, &vals(&|p| p[0] * p[0] - p[1] * p[1]), &[0.2, 0.4]).unwrap();
        assert!((quad + 0.12).abs() < 1e-6);
    }

    #[test]
    fn chebyshev_examples() {
        assert_eq!(chebyshev_nodes::<f64>(1), vec![0.0]);
        let t2 = chebyshev_nodes::<f64>(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((t2[0] - s).abs() < 1e-15 && (t2[1] + s).abs() < 1e-15);
        let t3 = chebyshev_nodes::<f64>(3);
        let h = 3f64.sqrt() / 2.0;
        assert!((t3[0] - h).abs() < 1e-15 && t3[1] == 0.0 && (t3[2] + h).abs() < 1e-15);
    }

    #[test]
    fn lagrange_examples() {
        let p = lagrange_coeffs(1, 1.0f64, 2.0).unwrap();
        assert_eq!(p.coeffs, vec![1.0]);
        let p = lagrange_coeffs(2, 1.0f64, 2.0).unwrap();
        assert!((p.coeffs[0] - (2f64.sqrt() + 0.5)).abs() < 1e-12);
        assert!((p.coeffs[1] - (0.5 - 2f64.sqrt())).abs() < 1e-12);
        assert_eq!(p.coeff_bound, 4.0);
        let z = p.node_polynomial(Complex::new(2.0, 0.0));
        assert!((z.re - 3.5).abs() < 1e-14 && z.im == 0.0);
        let p3 = lagrange_coeffs(3, 0.1f64, 0.2).unwrap();
        let on_circle = p3.node_polynomial(Complex::from_polar(5.0, 0.7)).norm();
        assert!(on_circle >= 64.0);
    }

    #[test]
    fn error_bound_arithmetic() {
        let p = lagrange_coeffs(1, 0.05f64, 0.1).unwrap();
        assert!((interpolation_error_bound(&p, 0.8, 2).unwrap() - 0.3125).abs() < 1e-15);
        let p2 = lagrange_coeffs(2, 0.05f64, 0.1).unwrap();
        let ratio = interpolation_error_bound(&p2, 0.8, 2).unwrap() / interpolation_error_bound(&p, 0.8, 2).unwrap();
        assert!((ratio - 0.25).abs() < 1e-14);
        assert!(interpolation_error_bound(&p, 0.4, 2).is_err());
    }
}
