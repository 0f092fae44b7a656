//! The ellipsoids `E_r(Â) = {⟨Â⁻¹x, x⟩ ≤ r²} = {|Sx| ≤ r}` and quadrature on
//! their boundaries.

use serde::{Deserialize, Serialize};

use crate::cell::HomogenizedTensor;
use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};
use crate::scalar::Real;

/// Relative distance from `|Sy| = r` accepted as "on the boundary".
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid<T> {
    pub tensor: HomogenizedTensor<T>,
    pub r: T,
    a_inv: Matrix<T>,
}

/// A boundary quadrature node.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryNode<T> {
    pub point: Vec<T>,
    /// Surface measure carried by the node.
    pub weight: T,
    /// Outward unit normal.
    pub normal: Vec<T>,
}

impl<T: Real> Ellipsoid<T> {
    pub fn new(tensor: HomogenizedTensor<T>, r: T) -> Result<Self> {
        if !(r > T::zero()) {
            return Err(Error::InvalidParameter(format!("ellipsoid radius {r} must be positive")));
        }
        let a_inv = tensor.s.matmul(&tensor.s);
        Ok(Self { tensor, r, a_inv })
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    /// Same tensor, different radius.
    pub fn with_radius(&self, r: T) -> Result<Self> {
        Self::new(self.tensor.clone(), r)
    }

    /// `|Sx|`.
    pub fn gauge(&self, x: &[T]) -> T {
        norm(&self.tensor.s.mul_vec(x))
    }

    /// `⟨Â⁻¹x, x⟩`.
    pub fn quadratic_form(&self, x: &[T]) -> T {
        self.a_inv.bilinear(x, x)
    }

    pub fn contains(&self, x: &[T]) -> bool {
        self.gauge(x) <= self.r
    }

    pub fn contains_strictly(&self, x: &[T]) -> bool {
        self.gauge(x) < self.r
    }

    pub fn is_on_boundary(&self, y: &[T]) -> bool {
        (self.gauge(y) - self.r).abs() <= T::lit(BOUNDARY_TOLERANCE) * self.r
    }

    /// `(√λ·r, r/√λ)`.
    pub fn inclusion_radii(&self, lambda: T) -> (T, T) {
        let s = lambda.sqrt();
        (s * self.r, self.r / s)
    }

    /// Boundary point `S⁻¹(r ω)` for a unit vector `ω`.
    pub fn boundary_point(&self, omega: &[T]) -> Vec<T> {
        let scaled: Vec<T> = omega.iter().map(|&w| w * self.r).collect();
        self.tensor.s_inv.mul_vec(&scaled)
    }

    /// Outward unit normal at a boundary point.
    pub fn normal(&self, y: &[T]) -> Vec<T> {
        let g = self.a_inv.mul_vec(y);
        let n = norm(&g);
        g.iter().map(|&v| v / n).collect()
    }

    /// Surface Jacobian of `ω ↦ S⁻¹ω` on the unit sphere at `ω`:
    /// `det S⁻¹ · |Sᵀω|`.
    fn jacobian(&self, omega: &[T]) -> T {
        norm(&self.tensor.s.transpose().mul_vec(omega)) / self.tensor.det_s
    }

    /// Quadrature on `∂E_r`: pushes a sphere rule through `S⁻¹`. In 2-D this
    /// is the `count`-point trapezoid rule; in 3-D a Gauss–Legendre (in the
    /// polar cosine) × trapezoid (in azimuth) product with roughly `count`
    /// nodes.
    pub fn boundary_nodes(&self, count: usize) -> Result<Vec<BoundaryNode<T>>> {
        let d = self.dim();
        let node = |omega: Vec<T>, base_weight: T| {
            let point = self.boundary_point(&omega);
            let weight = base_weight * self.jacobian(&omega);
            let normal = self.normal(&point);
            BoundaryNode { point, weight, normal }
        };
        match d {
            2 => {
                if count < 4 {
                    return Err(Error::InvalidParameter("need at least 4 boundary nodes".into()));
                }
                let step = T::TAU() / T::from_usize_lossy(count);
                Ok((0..count)
                    .map(|i| {
                        let th = step * T::from_usize_lossy(i);
                        node(vec![th.cos(), th.sin()], step * self.r)
                    })
                    .collect())
            }
            3 => {
                if count < 8 {
                    return Err(Error::InvalidParameter("need at least 8 boundary nodes".into()));
                }
                let n_polar = ((count as f64 / 2.0).sqrt().floor() as usize).max(2);
                let n_az = (count / n_polar).max(4);
                let (xs, ws) = gauss_legendre(n_polar);
                let dphi = T::TAU() / T::from_usize_lossy(n_az);
                let r2 = self.r * self.r;
                let mut out = Vec::with_capacity(n_polar * n_az);
                for (c, w) in xs.iter().zip(&ws) {
                    let c = T::lit(*c);
                    let s = (T::one() - c * c).max(T::zero()).sqrt();
                    for j in 0..n_az {
                        let ph = dphi * T::from_usize_lossy(j);
                        out.push(node(vec![s * ph.cos(), s * ph.sin(), c], T::lit(*w) * dphi * r2));
                    }
                }
                Ok(out)
            }
            other => Err(Error::UnsupportedDimension(other)),
        }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        xs[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}
