//! Periodic cell problem and the homogenized tensor.
//!
//! Discretization: trilinear (bilinear in 2-D) elements on the uniform
//! periodic grid with `n` cells per axis, coefficient frozen at each cell
//! midpoint. Nodes sit at `i/n`; the seam is stored once.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{CoefficientField, FieldDescriptor};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::sparse::{conjugate_gradient, CsrMatrix, KrylovFailure, SolverOptions};

pub const CELL_TOLERANCE: f64 = 1e-10;
pub const BAND_TOLERANCE: f64 = 1e-6;

/// Zero-mean periodic correctors `χ_1..χ_d` on the `n^d` grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Corrector<T> {
    pub dim: usize,
    pub n: usize,
    /// `values[j]` holds `χ_{j+1}` with node index `Σ_k i_k n^k`.
    pub values: Vec<Vec<T>>,
    pub residuals: Vec<T>,
    pub iterations: Vec<usize>,
    pub means: Vec<T>,
    pub field: FieldDescriptor,
    pub scheme: String,
}

/// `Â` together with its spectral certificate and `S = Â^{-1/2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedTensor<T> {
    pub a_hat: Matrix<T>,
    pub eig_min: T,
    pub eig_max: T,
    pub s: Matrix<T>,
    pub s_inv: Matrix<T>,
    pub det_s: T,
    pub lambda: T,
}

impl<T: Real> HomogenizedTensor<T> {
    /// Certifies `a` against the band `[λ, 1/λ]` (up to [`BAND_TOLERANCE`])
    /// and builds the canonical factor.
    pub fn new(a: Matrix<T>, lambda: T) -> Result<Self> {
        let a_hat = a.symmetrized();
        let (vals, _) = a_hat.symmetric_eigen();
        let eig_min = vals[0];
        let eig_max = *vals.last().unwrap();
        let tol = T::lit(BAND_TOLERANCE);
        for &e in [eig_min, eig_max].iter() {
            if e < lambda - tol || e > lambda.recip() + tol {
                return Err(Error::BandViolation {
                    eigenvalue: e.to_f64_lossy(),
                    lower: lambda.to_f64_lossy(),
                    upper: lambda.recip().to_f64_lossy(),
                });
            }
        }
        let s = a_hat.symmetric_function(|v| v.sqrt().recip());
        let s_inv = a_hat.symmetric_function(|v| v.sqrt());
        let det_s = s.determinant();
        let t = Self { a_hat, eig_min, eig_max, s, s_inv, det_s, lambda };
        let defect = t.factor_defect();
        let limit = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
        if defect > limit {
            return Err(Error::InvalidParameter(format!("‖SÂSᵀ − I‖ = {defect} exceeds {limit}")));
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.a_hat.dim()
    }

    /// `‖SÂSᵀ − I‖_F`.
    pub fn factor_defect(&self) -> T {
        let sas = self.s.matmul(&self.a_hat).matmul(&self.s.transpose());
        sas.sub(&Matrix::identity(self.dim())).frobenius()
    }
}

/// Reference-element integrals on `[0,1]^d`: `stiff[k][l][a][b] = ∫∂_kφ_a ∂_lφ_b`,
/// `grad_mean[k][a] = ∫∂_kφ_a` (also the midpoint value).
struct Reference {
    corners: usize,
    stiff: Vec<Vec<Vec<Vec<f64>>>>,
    grad_mean: Vec<Vec<f64>>,
}

impl Reference {
    fn new(d: usize) -> Self {
        let corners = 1 << d;
        let g = 0.5 / 3f64.sqrt();
        let gauss = [0.5 - g, 0.5 + g];
        let bit = |a: usize, k: usize| (a >> k) & 1;
        let phi1 = |b: usize, t: f64| if b == 1 { t } else { 1.0 - t };
        let dphi1 = |b: usize| if b == 1 { 1.0 } else { -1.0 };
        let grad = |a: usize, k: usize, xi: &[f64]| -> f64 {
            (0..d).map(|m| if m == k { dphi1(bit(a, m)) } else { phi1(bit(a, m), xi[m]) }).product()
        };
        let mut stiff = vec![vec![vec![vec![0.0; corners]; corners]; d]; d];
        let mut grad_mean = vec![vec![0.0; corners]; d];
        let weight = 0.5f64.powi(d as i32);
        for q in 0..corners {
            let xi: Vec<f64> = (0..d).map(|m| gauss[bit(q, m)]).collect();
            for k in 0..d {
                for a in 0..corners {
                    let ga = grad(a, k, &xi);
                    grad_mean[k][a] += weight * ga;
                    for l in 0..d {
                        for b in 0..corners {
                            stiff[k][l][a][b] += weight * ga * grad(b, l, &xi);
                        }
                    }
                }
            }
        }
        Self { corners, stiff, grad_mean }
    }
}

struct Grid {
    d: usize,
    n: usize,
}

impl Grid {
    fn nodes(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    fn multi(&self, mut idx: usize) -> Vec<usize> {
        (0..self.d)
            .map(|_| {
                let i = idx % self.n;
                idx /= self.n;
                i
            })
            .collect()
    }

    /// Global node of corner `a` of the cell with lower multi-index `cell`.
    fn corner(&self, cell: &[usize], a: usize) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (k, &c) in cell.iter().enumerate() {
            idx += ((c + ((a >> k) & 1)) % self.n) * stride;
            stride *= self.n;
        }
        idx
    }
}

fn cell_coefficients<T: Real>(field: &CoefficientField<T>, grid: &Grid) -> Vec<Matrix<T>> {
    let h = T::one() / T::from_usize_lossy(grid.n);
    (0..grid.nodes())
        .into_par_iter()
        .map(|e| {
            let mid: Vec<T> = grid
                .multi(e)
                .iter()
                .map(|&i| (T::from_usize_lossy(i) + T::lit(0.5)) * h)
                .collect();
            field.evaluate(&mid)
        })
        .collect()
}

/// Solves the `d` cell problems `div(A(∇χ_j + e_j)) = 0`, `∫χ_j = 0`.
pub fn solve_corrector<T: Real>(field: &CoefficientField<T>, n: usize) -> Result<Corrector<T>> {
    let d = field.dim();
    if !(2..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if n < 8 {
        return Err(Error::InvalidParameter(format!("cell resolution n = {n} must be ≥ 8")));
    }
    let grid = Grid { d, n };
    let reference = Reference::new(d);
    let coeffs = cell_coefficients(field, &grid);
    let h = T::one() / T::from_usize_lossy(n);
    let stiff_scale = h.powi(d as i32 - 2);
    let load_scale = h.powi(d as i32 - 1);
    let nc = reference.corners;

    let mut triplets = Vec::with_capacity(grid.nodes() * nc * nc);
    let mut rhs = vec![vec![T::zero(); grid.nodes()]; d];
    for (e, a_e) in coeffs.iter().enumerate() {
        let cell = grid.multi(e);
        let nodes: Vec<usize> = (0..nc).map(|a| grid.corner(&cell, a)).collect();
        for a in 0..nc {
            for b in 0..nc {
                let mut v = T::zero();
                for k in 0..d {
                    for l in 0..d {
                        v += a_e[(k, l)] * T::lit(reference.stiff[k][l][a][b]);
                    }
                }
                triplets.push((nodes[a], nodes[b], v * stiff_scale));
            }
            for (j, rhs_j) in rhs.iter_mut().enumerate() {
                let mut v = T::zero();
                for k in 0..d {
                    v += a_e[(k, j)] * T::lit(reference.grad_mean[k][a]);
                }
                rhs_j[nodes[a]] -= v * load_scale;
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(grid.nodes(), grid.nodes(), triplets);
    let opts = SolverOptions {
        tolerance: T::lit(CELL_TOLERANCE),
        max_iterations: 10 * n * n,
        zero_mean: true,
    };

    let mut values = Vec::with_capacity(d);
    let mut residuals = Vec::with_capacity(d);
    let mut iterations = Vec::with_capacity(d);
    let mut means = Vec::with_capacity(d);
    for b in &rhs {
        let mut x = vec![T::zero(); grid.nodes()];
        let stats = conjugate_gradient(&stiffness, b, &mut x, &opts).map_err(|f| match f {
            KrylovFailure::NotConverged { iterations, relative_residual } => Error::NotConverged {
                iterations,
                residual: relative_residual.to_f64_lossy(),
            },
            KrylovFailure::Indefinite { iterations } => Error::NonElliptic { iterations },
            KrylovFailure::NearSingular { ratio } => Error::NearSingular { ratio: ratio.to_f64_lossy() },
        })?;
        let mean = x.iter().copied().sum::<T>() / T::from_usize_lossy(x.len());
        residuals.push(stats.relative_residual);
        iterations.push(stats.iterations);
        means.push(mean);
        values.push(x);
    }
    Ok(Corrector {
        dim: d,
        n,
        values,
        residuals,
        iterations,
        means,
        field: field.descriptor(),
        scheme: "Q1 periodic, midpoint coefficient".into(),
    })
}

impl<T: Real> Corrector<T> {
    /// Cell-midpoint gradient `∇χ_j` of cell `e`.
    fn midpoint_gradient(&self, reference: &Reference, grid: &Grid, j: usize, e: usize) -> Vec<T> {
        let cell = grid.multi(e);
        let inv_h = T::from_usize_lossy(self.n);
        (0..self.dim)
            .map(|k| {
                (0..reference.corners)
                    .map(|a| self.values[j][grid.corner(&cell, a)] * T::lit(reference.grad_mean[k][a]))
                    .sum::<T>()
                    * inv_h
            })
            .collect()
    }

    /// Cell average of `⟨A(ξ + ∇χ_ξ), ξ + ∇χ_ξ⟩` with `χ_ξ = Σ ξ_j χ_j`, using
    /// 2-point Gauss quadrature per cell (exact for the discrete field).
    pub fn energy(&self, field: &CoefficientField<T>, xi: &[T]) -> T {
        let grid = Grid { d: self.dim, n: self.n };
        let reference = Reference::new(self.dim);
        let coeffs = cell_coefficients(field, &grid);
        let d = self.dim;
        let inv_h = T::from_usize_lossy(self.n);
        let total: T = coeffs
            .iter()
            .enumerate()
            .map(|(e, a_e)| {
                let cell = grid.multi(e);
                let u: Vec<T> = (0..reference.corners)
                    .map(|a| {
                        let node = grid.corner(&cell, a);
                        (0..d).map(|j| xi[j] * self.values[j][node]).sum()
                    })
                    .collect();
                // ∫ (ξ+∇u)ᵀA(ξ+∇u) = ξᵀAξ + 2ξᵀA∫∇u + ∫∇uᵀA∇u over the unit reference cell
                let mut val = a_e.bilinear(xi, xi);
                for k in 0..d {
                    let mean_grad: T = (0..reference.corners)
                        .map(|a| u[a] * T::lit(reference.grad_mean[k][a]))
                        .sum::<T>()
                        * inv_h;
                    let axi: T = (0..d).map(|l| a_e[(k, l)] * xi[l]).sum();
                    val += T::lit(2.0) * axi * mean_grad;
                }
                for k in 0..d {
                    for l in 0..d {
                        let mut q = T::zero();
                        for a in 0..reference.corners {
                            for b in 0..reference.corners {
                                q += u[a] * u[b] * T::lit(reference.stiff[k][l][a][b]);
                            }
                        }
                        val += a_e[(k, l)] * q * inv_h * inv_h;
                    }
                }
                val
            })
            .sum();
        total / T::from_usize_lossy(grid.nodes())
    }

    /// Writes the text dump: header lines, then one row per node with
    /// `χ_1 … χ_d`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "CORRECTOR v1")?;
        writeln!(w, "d {}", self.dim)?;
        writeln!(w, "n {}", self.n)?;
        writeln!(w, "family {}", self.field.family)?;
        let params: Vec<String> = self.field.params.iter().map(|p| format!("{p:?}")).collect();
        writeln!(w, "params {}", params.join(","))?;
        writeln!(w, "expressions {}", self.field.expressions.join(";"))?;
        for node in 0..self.values[0].len() {
            let row: Vec<String> = self.values.iter().map(|v| format!("{:e}", v[node].to_f64_lossy())).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// `Â_ij = ⟨e_iᵀA(e_j + ∇χ_j)⟩`, midpoint quadrature, then symmetrized and
/// certified against the field's band.
pub fn homogenize<T: Real>(field: &CoefficientField<T>, corrector: &Corrector<T>) -> Result<HomogenizedTensor<T>> {
    let d = field.dim();
    if corrector.dim != d || corrector.field != field.descriptor() {
        return Err(Error::InvalidParameter("corrector was solved for a different field".into()));
    }
    let grid = Grid { d, n: corrector.n };
    let reference = Reference::new(d);
    let coeffs = cell_coefficients(field, &grid);
    let mut a_hat = Matrix::zeros(d);
    for j in 0..d {
        let column: Vec<T> = coeffs
            .iter()
            .enumerate()
            .map(|(e, a_e)| {
                let mut g = corrector.midpoint_gradient(&reference, &grid, j, e);
                g[j] += T::one();
                a_e.mul_vec(&g)
            })
            .fold(vec![T::zero(); d], |mut acc, v| {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                acc
            });
        for i in 0..d {
            a_hat[(i, j)] = column[i] / T::from_usize_lossy(grid.nodes());
        }
    }
    HomogenizedTensor::new(a_hat, field.lambda())
}

/// Convenience: solve and homogenize in one call.
pub fn homogenized_tensor<T: Real>(field: &CoefficientField<T>, n: usize) -> Result<HomogenizedTensor<T>> {
    if field.is_constant() {
        let a = field.evaluate(&vec![T::zero(); field.dim()]);
        return HomogenizedTensor::new(a, field.lambda());
    }
    let c = solve_corrector(field, n)?;
    homogenize(field, &c)
}
