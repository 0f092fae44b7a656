//! Periodic coefficient fields `A(y)`: built-in families, user expressions,
//! sampling-based regularity checks, and the even reflection across `y_d = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
enum Family<T> {
    Constant(Matrix<T>),
    /// `(mean + amplitude·sin 2πy₁)·I`
    Laminate { mean: T, amplitude: T },
    /// `(1 + ρ sin 2πy₁ sin 2πy₂)·I`
    Trigonometric { rho: T },
    /// `diag(1 + ρ sin 2πy₁, …, 1 + ρ sin 2πy_{d−1}, 1 + ρ cos 2πy_d)`
    HalfBall { rho: T },
    /// Upper-triangular entry expressions, row-major.
    Expression(Vec<Expr>),
    Reflected(Box<Family<T>>),
}

/// A 1-periodic, symmetric, uniformly elliptic matrix field.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField<T> {
    dim: usize,
    family: Family<T>,
    lambda: T,
    holder: (T, T),
    block: bool,
}

/// Serializable description of a field; the wire form used by config files
/// and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDescriptor {
    pub family: String,
    pub dim: usize,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub expressions: Vec<String>,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub min_rayleigh: f64,
    pub max_rayleigh: f64,
    pub samples: usize,
    pub pass: bool,
}

fn two_pi<T: Real>() -> T {
    T::TAU()
}

impl<T: Real> CoefficientField<T> {
    fn build(dim: usize, family: Family<T>, lambda: T, holder: (T, T)) -> Result<Self> {
        if dim < 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(Error::InvalidParameter(format!("λ = {lambda} must lie in (0, 1]")));
        }
        let mut f = Self { dim, family, lambda, holder, block: false };
        f.block = f.detect_block();
        Ok(f)
    }

    /// Constant symmetric matrix; λ defaults to the tightest band holding its spectrum.
    pub fn constant(a: Matrix<T>) -> Result<Self> {
        if a.max_asymmetry() > T::zero() {
            return Err(Error::InvalidParameter("constant coefficient must be symmetric".into()));
        }
        let (vals, _) = a.symmetric_eigen();
        let lo = vals[0];
        let hi = *vals.last().unwrap();
        if lo <= T::zero() {
            return Err(Error::InvalidParameter("constant coefficient must be positive definite".into()));
        }
        let lambda = lo.min(hi.recip()).min(T::one());
        let dim = a.dim();
        Self::build(dim, Family::Constant(a), lambda, (T::zero(), T::lit(0.5)))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::constant(Matrix::identity(dim))
    }

    /// `(mean + amplitude·sin 2πy₁)·I` with `mean > |amplitude|`.
    pub fn laminate(dim: usize, mean: T, amplitude: T) -> Result<Self> {
        if mean <= amplitude.abs() {
            return Err(Error::InvalidParameter("laminate needs mean > |amplitude|".into()));
        }
        let lo = mean - amplitude.abs();
        let hi = mean + amplitude.abs();
        let lambda = lo.min(hi.recip()).min(T::one());
        let tau = two_pi::<T>() * amplitude.abs() * T::from_usize_lossy(dim).sqrt();
        Self::build(dim, Family::Laminate { mean, amplitude }, lambda, (tau, T::one()))
    }

    /// `(1 + ρ sin 2πy₁ sin 2πy₂)·I`, ρ in (0, 1).
    pub fn trigonometric(dim: usize, rho: T) -> Result<Self> {
        if !(rho > T::zero() && rho < T::one()) {
            return Err(Error::InvalidParameter("trigonometric family needs ρ in (0,1)".into()));
        }
        let lambda = (T::one() - rho).min((T::one() + rho).recip());
        let tau = two_pi::<T>() * rho * T::lit(2.0).sqrt() * T::from_usize_lossy(dim).sqrt();
        Self::build(dim, Family::Trigonometric { rho }, lambda, (tau, T::one()))
    }

    /// Block-diagonal family suited to half-ball problems.
    pub fn half_ball(dim: usize, rho: T) -> Result<Self> {
        if !(rho > T::zero() && rho < T::one()) {
            return Err(Error::InvalidParameter("half-ball family needs ρ in (0,1)".into()));
        }
        let lambda = (T::one() - rho).min((T::one() + rho).recip());
        let tau = two_pi::<T>() * rho;
        Self::build(dim, Family::HalfBall { rho }, lambda, (tau, T::one()))
    }

    /// User-defined field from the upper-triangular entries `a11, a12, …, a1d, a22, …`.
    pub fn from_expressions(dim: usize, entries: &[&str], lambda: T) -> Result<Self> {
        let expected = dim * (dim + 1) / 2;
        if entries.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "expected {expected} upper-triangular entries, got {}",
                entries.len()
            )));
        }
        let exprs = entries.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        if let Some(e) = exprs.iter().find(|e| e.max_variable() > dim) {
            return Err(Error::InvalidParameter(format!("`{e}` references a variable beyond y{dim}")));
        }
        Self::build(dim, Family::Expression(exprs), lambda, (T::zero(), T::lit(0.5)))
    }

    /// Overrides the declared ellipticity parameter.
    pub fn with_lambda(mut self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(Error::InvalidParameter(format!("λ = {lambda} must lie in (0, 1]")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    /// Overrides the declared Hölder data (τ, μ).
    pub fn with_holder(mut self, tau: T, mu: T) -> Self {
        self.holder = (tau, mu);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn holder(&self) -> (T, T) {
        self.holder
    }

    /// Whether `a_{id} = a_{di} = 0` for `i < d`.
    pub fn is_block(&self) -> bool {
        self.block
    }

    pub fn is_constant(&self) -> bool {
        match &self.family {
            Family::Constant(_) => true,
            Family::Reflected(inner) => matches!(**inner, Family::Constant(_)),
            Family::Expression(e) => e.iter().all(|x| x.max_variable() == 0),
            _ => false,
        }
    }

    pub fn is_reflected(&self) -> bool {
        matches!(self.family, Family::Reflected(_))
    }

    pub fn family_name(&self) -> &'static str {
        family_name(&self.family)
    }

    fn detect_block(&self) -> bool {
        match &self.family {
            Family::Laminate { .. } | Family::Trigonometric { .. } | Family::HalfBall { .. } => true,
            Family::Reflected(_) => true,
            Family::Constant(a) => (0..self.dim - 1).all(|i| a[(i, self.dim - 1)] == T::zero()),
            Family::Expression(exprs) => {
                let d = self.dim;
                let zeros = vec![T::zero(); d];
                (0..d - 1).all(|i| {
                    let e = &exprs[upper_index(d, i, d - 1)];
                    e.max_variable() == 0 && e.eval::<T>(&zeros) == T::zero()
                })
            }
        }
    }

    /// `A(y)`, computed from `y mod 1` componentwise.
    pub fn evaluate(&self, y: &[T]) -> Matrix<T> {
        debug_assert_eq!(y.len(), self.dim);
        eval_family(&self.family, self.dim, y)
    }

    /// Smallest eigenvalue of `A(y)`.
    pub fn min_eigenvalue(&self, y: &[T]) -> T {
        self.evaluate(y).symmetric_eigen().0[0]
    }

    /// Rayleigh-quotient check of the ellipticity band on a Halton sequence of
    /// cell points and seeded random unit directions (plus each sample's
    /// extreme eigen-directions).
    pub fn verify_ellipticity(&self, sample_count: usize, seed: u64) -> Result<EllipticityReport> {
        if sample_count == 0 {
            return Err(Error::InvalidParameter("sample_count must be ≥ 1".into()));
        }
        let d = self.dim;
        let lower = self.lambda;
        let upper = self.lambda.recip();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_q = T::infinity();
        let mut max_q = T::neg_infinity();
        let mut worst: Option<(T, Vec<T>, Vec<T>, T)> = None;
        let slack = T::epsilon() * T::lit(16.0);
        for i in 0..sample_count {
            let y: Vec<T> = (0..d).map(|k| T::lit(halton(i + 1, PRIMES[k]))).collect();
            let a = self.evaluate(&y);
            let (vals, vecs) = a.symmetric_eigen();
            let mut dirs: Vec<Vec<T>> = vec![
                (0..d).map(|r| vecs[(r, 0)]).collect(),
                (0..d).map(|r| vecs[(r, d - 1)]).collect(),
            ];
            dirs.push(random_unit(&mut rng, d));
            let _ = vals;
            for xi in dirs {
                let q = a.bilinear(&xi, &xi) / xi.iter().map(|&v| v * v).sum::<T>();
                min_q = min_q.min(q);
                max_q = max_q.max(q);
                let excess = (lower - q).max(q - upper);
                if excess > slack * upper && worst.as_ref().is_none_or(|w| excess > w.0) {
                    worst = Some((excess, y.clone(), xi, q));
                }
            }
        }
        if let Some((_, point, direction, q)) = worst {
            return Err(Error::Ellipticity {
                point: point.iter().map(|v| v.to_f64_lossy()).collect(),
                direction: direction.iter().map(|v| v.to_f64_lossy()).collect(),
                quotient: q.to_f64_lossy(),
                lower: lower.to_f64_lossy(),
                upper: upper.to_f64_lossy(),
            });
        }
        Ok(EllipticityReport {
            min_rayleigh: min_q.to_f64_lossy(),
            max_rayleigh: max_q.to_f64_lossy(),
            samples: sample_count,
            pass: true,
        })
    }

    /// Empirical Hölder constant `max |A(x) − A(y)|_F / |x − y|^μ` over
    /// seeded sample pairs. Always a lower bound for the true τ. Pairs
    /// straddle `y_d = 0` for reflected fields.
    pub fn estimate_holder(&self, mu: T, pair_count: usize, seed: u64) -> T {
        let pairs = holder_pairs::<T>(self.dim, pair_count, seed, self.is_reflected());
        self.holder_quotient_max(mu, &pairs)
    }

    /// Maximum Hölder quotient over explicit pairs.
    pub fn holder_quotient_max(&self, mu: T, pairs: &[(Vec<T>, Vec<T>)]) -> T {
        pairs
            .iter()
            .map(|(x, y)| {
                let dist = x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
                if dist == T::zero() {
                    return T::zero();
                }
                self.evaluate(x).sub(&self.evaluate(y)).frobenius() / dist.powf(mu)
            })
            .fold(T::zero(), T::max)
    }

    /// Even reflection `Ã(y', y_d) = A(y', |y_d|)`. Requires block structure.
    pub fn reflect_even(&self) -> Result<Self> {
        if !self.block {
            return Err(Error::NotBlockStructured);
        }
        if self.is_reflected() {
            return Ok(self.clone());
        }
        let (tau, mu) = self.holder;
        Ok(Self {
            dim: self.dim,
            family: Family::Reflected(Box::new(self.family.clone())),
            lambda: self.lambda,
            holder: (T::lit(2.0) * tau, mu),
            block: true,
        })
    }

    pub fn descriptor(&self) -> FieldDescriptor {
        let mut desc = FieldDescriptor {
            family: self.family_name().to_string(),
            dim: self.dim,
            params: Vec::new(),
            expressions: Vec::new(),
            lambda: Some(self.lambda.to_f64_lossy()),
        };
        fill_descriptor(&self.family, &mut desc);
        desc
    }

    pub fn from_descriptor(desc: &FieldDescriptor) -> Result<Self> {
        let d = desc.dim;
        let p = |i: usize, default: f64| T::lit(desc.params.get(i).copied().unwrap_or(default));
        let base = match desc.family.as_str() {
            "constant" | "reflected-constant" => {
                let a = match desc.params.len() {
                    0 => Matrix::identity(d),
                    n if n == d => Matrix::diag(&desc.params.iter().map(|&v| T::lit(v)).collect::<Vec<_>>()),
                    n if n == d * d => {
                        Matrix::from_row_major(d, desc.params.iter().map(|&v| T::lit(v)).collect())
                    }
                    n => {
                        return Err(Error::InvalidParameter(format!(
                            "constant field takes d or d² params, got {n}"
                        )))
                    }
                };
                Self::constant(a)?
            }
            "laminate" | "reflected-laminate" => Self::laminate(d, p(0, 2.0), p(1, 1.0))?,
            "trigonometric" | "reflected-trigonometric" => Self::trigonometric(d, p(0, 0.5))?,
            "half-ball" | "reflected-half-ball" => Self::half_ball(d, p(0, 0.5))?,
            "expression" | "reflected-expression" => {
                let lambda = desc.lambda.ok_or_else(|| {
                    Error::InvalidParameter("expression fields need an explicit lambda".into())
                })?;
                let refs: Vec<&str> = desc.expressions.iter().map(String::as_str).collect();
                Self::from_expressions(d, &refs, T::lit(lambda))?
            }
            other => return Err(Error::InvalidParameter(format!("unknown field family `{other}`"))),
        };
        let base = match desc.lambda {
            Some(l) if desc.family.ends_with("expression") => base.with_lambda(T::lit(l))?,
            Some(l) => base.with_lambda(T::lit(l))?,
            None => base,
        };
        if desc.family.starts_with("reflected-") {
            base.reflect_even()
        } else {
            Ok(base)
        }
    }
}

fn family_name<T>(f: &Family<T>) -> &'static str {
    match f {
        Family::Constant(_) => "constant",
        Family::Laminate { .. } => "laminate",
        Family::Trigonometric { .. } => "trigonometric",
        Family::HalfBall { .. } => "half-ball",
        Family::Expression(_) => "expression",
        Family::Reflected(inner) => match **inner {
            Family::Constant(_) => "reflected-constant",
            Family::Laminate { .. } => "reflected-laminate",
            Family::Trigonometric { .. } => "reflected-trigonometric",
            Family::HalfBall { .. } => "reflected-half-ball",
            _ => "reflected-expression",
        },
    }
}

fn fill_descriptor<T: Real>(f: &Family<T>, desc: &mut FieldDescriptor) {
    match f {
        Family::Constant(a) => desc.params = a.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
        Family::Laminate { mean, amplitude } => {
            desc.params = vec![mean.to_f64_lossy(), amplitude.to_f64_lossy()]
        }
        Family::Trigonometric { rho } | Family::HalfBall { rho } => desc.params = vec![rho.to_f64_lossy()],
        Family::Expression(e) => desc.expressions = e.iter().map(|x| x.source().to_string()).collect(),
        Family::Reflected(inner) => fill_descriptor(inner, desc),
    }
}

fn upper_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * d - i * (i + 1) / 2 + j
}

fn eval_family<T: Real>(family: &Family<T>, d: usize, y: &[T]) -> Matrix<T> {
    if let Family::Reflected(inner) = family {
        let mut folded = y.to_vec();
        folded[d - 1] = folded[d - 1].abs();
        return eval_family(inner, d, &folded);
    }
    let y: Vec<T> = y.iter().map(|&v| v - v.floor()).collect();
    let tp = two_pi::<T>();
    match family {
        Family::Constant(a) => a.clone(),
        Family::Laminate { mean, amplitude } => {
            let s = *mean + *amplitude * (tp * y[0]).sin();
            Matrix::diag(&vec![s; d])
        }
        Family::Trigonometric { rho } => {
            let s = T::one() + *rho * (tp * y[0]).sin() * (tp * y[1]).sin();
            Matrix::diag(&vec![s; d])
        }
        Family::HalfBall { rho } => {
            let mut diag: Vec<T> = (0..d - 1).map(|i| T::one() + *rho * (tp * y[i]).sin()).collect();
            diag.push(T::one() + *rho * (tp * y[d - 1]).cos());
            Matrix::diag(&diag)
        }
        Family::Expression(exprs) => {
            let mut m = Matrix::zeros(d);
            for i in 0..d {
                for j in i..d {
                    let v = exprs[upper_index(d, i, j)].eval(&y);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        }
        Family::Reflected(_) => unreachable!(),
    }
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Radical-inverse (van der Corput) value of `index` in `base`.
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// `count` Halton points in `[0, 1)^dim`, starting at index 1.
pub fn halton_points<T: Real>(dim: usize, count: usize) -> Vec<Vec<T>> {
    (1..=count)
        .map(|i| (0..dim).map(|k| T::lit(halton(i, PRIMES[k]))).collect())
        .collect()
}

fn random_unit<T: Real>(rng: &mut ChaCha8Rng, d: usize) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.iter().map(|&x| T::lit(x / n)).collect();
        }
    }
}

/// Seeded random point pairs at log-uniform separations in `[1e-4, 0.5]`.
/// With `straddle`, the first point has `y_d > 0` and the second `y_d < 0`.
pub fn holder_pairs<T: Real>(dim: usize, count: usize, seed: u64, straddle: bool) -> Vec<(Vec<T>, Vec<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
            let dir: Vec<T> = random_unit(&mut rng, dim);
            let r = 10f64.powf(rng.gen_range(-4.0..(0.5f64).log10()));
            let mut y: Vec<f64> = x.iter().zip(&dir).map(|(&a, b)| a + r * b.to_f64_lossy()).collect();
            let mut x = x;
            if straddle {
                x[dim - 1] = x[dim - 1].abs() * r.min(1.0);
                y[dim - 1] = -(y[dim - 1] - x[dim - 1]).abs().max(1e-6);
            }
            (x.into_iter().map(T::lit).collect(), y.into_iter().map(T::lit).collect())
        })
        .collect()
}

/// Folds a point into the upper half space: `(y', |y_d|)`.
pub fn fold<T: Real>(y: &[T]) -> Vec<T> {
    let mut f = y.to_vec();
    let d = f.len();
    f[d - 1] = f[d - 1].abs();
    f
}
