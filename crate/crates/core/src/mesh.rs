//! Triangle meshes of disks, half-disks and ellipses.
//!
//! A disk of radius ρ is cut into `K = ⌈ρ/h⌉` concentric rings; ring `k` has
//! `2⌈πk⌉` equally spaced nodes starting at angle 0. The upper half is
//! triangulated by zipping neighbouring rings in angle order and the lower
//! half is its mirror image, so every mesh is exactly symmetric about
//! `x₂ = 0`. Ellipses are disks pushed through `S⁻¹`.

use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    /// On the curved (circular or elliptic) boundary.
    Curved,
    /// On the flat side `x₂ = 0` of a half-disk (endpoints count as curved).
    Flat,
}

#[derive(Clone, Debug)]
pub struct Mesh<T> {
    pub nodes: Vec<[T; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub kinds: Vec<NodeKind>,
    /// Ring count `K`.
    pub rings: usize,
    /// Nodes on the outer ring in angle order (full circle for disks, 0..π
    /// for half-disks).
    pub outer: Vec<usize>,
    /// Node index of the mirror image `(x₁, −x₂)`; identity on the axis.
    /// Empty for half-disk meshes.
    pub mirror: Vec<usize>,
    /// For half-disk meshes, the index of each node in the matching full-disk mesh.
    pub full_index: Vec<usize>,
    /// Longest edge.
    pub h_max: T,
}

/// Half-ring segment count for ring `k`.
fn segments(k: usize) -> usize {
    ((std::f64::consts::PI * k as f64).ceil() as usize).max(1)
}

struct RingLayout {
    /// Start offset of ring k in the full node list (ring 0 is the centre).
    offset: Vec<usize>,
    m: Vec<usize>,
}

impl RingLayout {
    fn new(rings: usize) -> Self {
        let mut offset = vec![0, 1];
        let mut m = vec![0];
        for k in 1..=rings {
            let mk = segments(k);
            m.push(mk);
            offset.push(offset[k] + 2 * mk);
        }
        Self { offset, m }
    }

    fn node(&self, k: usize, j: usize) -> usize {
        if k == 0 {
            0
        } else {
            self.offset[k] + j % (2 * self.m[k])
        }
    }

    fn total(&self) -> usize {
        *self.offset.last().unwrap()
    }
}

fn signed_area<T: Real>(a: [T; 2], b: [T; 2], c: [T; 2]) -> T {
    ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) * T::lit(0.5)
}

impl<T: Real> Mesh<T> {
    /// Full disk of the given radius centred at the origin.
    pub fn disk(radius: T, h: T) -> Result<Self> {
        check_h(radius, h)?;
        let rings = (radius / h).ceil().to_usize().unwrap_or(1).max(1);
        let layout = RingLayout::new(rings);
        let n = layout.total();
        let mut nodes = vec![[T::zero(), T::zero()]; n];
        let mut kinds = vec![NodeKind::Interior; n];
        let mut mirror = vec![0usize; n];
        for k in 1..=rings {
            let mk = layout.m[k];
            let rho = radius * T::from_usize_lossy(k) / T::from_usize_lossy(rings);
            for j in 0..=mk {
                let (x, y) = if j == 0 {
                    (rho, T::zero())
                } else if j == mk {
                    (-rho, T::zero())
                } else {
                    let th = T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(mk);
                    (rho * th.cos(), rho * th.sin())
                };
                let up = layout.node(k, j);
                let down = layout.node(k, 2 * mk - j);
                nodes[up] = [x, y];
                nodes[down] = [x, -y];
                mirror[up] = down;
                mirror[down] = up;
            }
            if k == rings {
                for j in 0..2 * mk {
                    kinds[layout.node(k, j)] = NodeKind::Curved;
                }
            }
        }
        let upper = upper_triangles(&layout, rings, &nodes);
        let mut triangles = upper.clone();
        for t in &upper {
            let m = [mirror[t[0]], mirror[t[2]], mirror[t[1]]];
            if m != *t && !(0..3).all(|i| mirror[t[i]] == t[i]) {
                triangles.push(m);
            }
        }
        let outer = (0..2 * layout.m[rings]).map(|j| layout.node(rings, j)).collect();
        let full_index = (0..n).collect();
        let mut mesh = Self { nodes, triangles, kinds, rings, outer, mirror, full_index, h_max: T::zero() };
        mesh.h_max = mesh.longest_edge();
        Ok(mesh)
    }

    /// Upper half-disk `{|x| ≤ radius, x₂ ≥ 0}`: exactly the upper half of
    /// [`Mesh::disk`] with the same arguments.
    pub fn half_disk(radius: T, h: T) -> Result<Self> {
        let full = Self::disk(radius, h)?;
        let keep: Vec<usize> = (0..full.nodes.len()).filter(|&i| full.nodes[i][1] >= T::zero()).collect();
        let mut new_index = vec![usize::MAX; full.nodes.len()];
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = new;
        }
        let nodes: Vec<[T; 2]> = keep.iter().map(|&i| full.nodes[i]).collect();
        let kinds = keep
            .iter()
            .map(|&i| match full.kinds[i] {
                NodeKind::Curved => NodeKind::Curved,
                _ if full.nodes[i][1] == T::zero() => NodeKind::Flat,
                k => k,
            })
            .collect();
        let triangles = full
            .triangles
            .iter()
            .filter(|t| t.iter().all(|&v| new_index[v] != usize::MAX))
            .map(|t| [new_index[t[0]], new_index[t[1]], new_index[t[2]]])
            .collect();
        let outer = full
            .outer
            .iter()
            .filter(|&&i| new_index[i] != usize::MAX)
            .map(|&i| new_index[i])
            .collect();
        let mut mesh = Self {
            nodes,
            triangles,
            kinds,
            rings: full.rings,
            outer,
            mirror: Vec::new(),
            full_index: keep,
            h_max: T::zero(),
        };
        mesh.h_max = mesh.longest_edge();
        Ok(mesh)
    }

    /// `E_r` meshed as the image of a disk under `S⁻¹`, with mapped edges no
    /// longer than `h`. Outer-ring nodes coincide with
    /// `E.boundary_nodes(2⌈πK⌉)`.
    pub fn ellipse(e: &Ellipsoid<T>, h: T) -> Result<Self> {
        if e.dim() != 2 {
            return Err(Error::UnsupportedDimension(e.dim()));
        }
        let (vals, _) = e.tensor.a_hat.symmetric_eigen();
        // ‖S⁻¹‖₂ = √(largest eigenvalue of Â)
        let stretch = vals[1].sqrt();
        let mut mesh = Self::disk(e.r, h / stretch)?;
        mesh.transform(&e.tensor.s_inv);
        Ok(mesh)
    }

    fn transform(&mut self, m: &Matrix<T>) {
        for p in &mut self.nodes {
            let q = m.mul_vec(&[p[0], p[1]]);
            *p = [q[0], q[1]];
        }
        for t in &mut self.triangles {
            if signed_area(self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]) < T::zero() {
                t.swap(1, 2);
            }
        }
        self.h_max = self.longest_edge();
    }

    fn longest_edge(&self) -> T {
        let mut h = T::zero();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let dx = self.nodes[a][0] - self.nodes[b][0];
                let dy = self.nodes[a][1] - self.nodes[b][1];
                h = h.max((dx * dx + dy * dy).sqrt());
            }
        }
        h
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn centroid(&self, t: usize) -> [T; 2] {
        let [a, b, c] = self.triangles[t];
        let third = T::one() / T::lit(3.0);
        [
            (self.nodes[a][0] + self.nodes[b][0] + self.nodes[c][0]) * third,
            (self.nodes[a][1] + self.nodes[b][1] + self.nodes[c][1]) * third,
        ]
    }

    /// Gradients of the three barycentric basis functions on triangle `t`.
    pub fn gradients(&self, t: usize) -> [[T; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let two_area = T::lit(2.0) * signed_area(pa, pb, pc);
        [
            [(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area],
            [(pc[1] - pa[1]) / two_area, (pa[0] - pc[0]) / two_area],
            [(pa[1] - pb[1]) / two_area, (pb[0] - pa[0]) / two_area],
        ]
    }
}

fn check_h<T: Real>(radius: T, h: T) -> Result<()> {
    if !(radius > T::zero() && h > T::zero()) {
        return Err(Error::InvalidParameter(format!("mesh needs radius > 0 and h > 0 (got {radius}, {h})")));
    }
    if radius / h > T::lit(1e5) {
        return Err(Error::InvalidParameter(format!("mesh with {} rings is beyond desk scale", radius / h)));
    }
    Ok(())
}

/// Triangles of the upper half, zipping ring `k−1` and ring `k` for `k = 1..=K`.
fn upper_triangles<T: Real>(layout: &RingLayout, rings: usize, nodes: &[[T; 2]]) -> Vec<[usize; 3]> {
    let mut tris = Vec::new();
    let mut push = |a: usize, b: usize, c: usize| {
        if signed_area(nodes[a], nodes[b], nodes[c]) >= T::zero() {
            tris.push([a, b, c]);
        } else {
            tris.push([a, c, b]);
        }
    };
    for j in 0..layout.m[1] {
        push(0, layout.node(1, j), layout.node(1, j + 1));
    }
    for k in 2..=rings {
        let (mi, mo) = (layout.m[k - 1], layout.m[k]);
        let (mut i, mut j) = (0usize, 0usize);
        while i < mi || j < mo {
            // compare next angles i+1 over mi against j+1 over mo
            let advance_outer = if i == mi {
                true
            } else if j == mo {
                false
            } else {
                (j + 1) * mi <= (i + 1) * mo
            };
            if advance_outer {
                push(layout.node(k - 1, i), layout.node(k, j), layout.node(k, j + 1));
                j += 1;
            } else {
                push(layout.node(k - 1, i), layout.node(k, j), layout.node(k - 1, i + 1));
                i += 1;
            }
        }
    }
    tris
}

/// Uniform bucket grid over the mesh bounding box for point location.
#[derive(Clone, Debug)]
pub struct Locator<T> {
    origin: [T; 2],
    cell: T,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<T: Real> Locator<T> {
    pub fn new(mesh: &Mesh<T>) -> Self {
        let mut lo = [T::infinity(); 2];
        let mut hi = [T::neg_infinity(); 2];
        for p in &mesh.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let cell = mesh.h_max.max(T::min_positive_value());
        let nx = ((hi[0] - lo[0]) / cell).ceil().to_usize().unwrap_or(0) + 1;
        let ny = ((hi[1] - lo[1]) / cell).ceil().to_usize().unwrap_or(0) + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut tl = [T::infinity(); 2];
            let mut th = [T::neg_infinity(); 2];
            for &v in tri {
                for k in 0..2 {
                    tl[k] = tl[k].min(mesh.nodes[v][k]);
                    th[k] = th[k].max(mesh.nodes[v][k]);
                }
            }
            let idx = |v: T, o: T| ((v - o) / cell).floor().to_usize().unwrap_or(0);
            for bx in idx(tl[0], lo[0])..=idx(th[0], lo[0]).min(nx - 1) {
                for by in idx(tl[1], lo[1])..=idx(th[1], lo[1]).min(ny - 1) {
                    buckets[by * nx + bx].push(t);
                }
            }
        }
        Self { origin: lo, cell, nx, ny, buckets }
    }

    /// Containing triangle and barycentric coordinates of `p`, with a small
    /// tolerance so boundary points are found.
    pub fn locate(&self, mesh: &Mesh<T>, p: [T; 2]) -> Option<(usize, [T; 3])> {
        let fx = ((p[0] - self.origin[0]) / self.cell).floor();
        let fy = ((p[1] - self.origin[1]) / self.cell).floor();
        if fx < T::zero() || fy < T::zero() {
            return None;
        }
        let (bx, by) = (fx.to_usize()?, fy.to_usize()?);
        if bx >= self.nx || by >= self.ny {
            return None;
        }
        let tol = T::lit(-1e-10);
        let mut best: Option<(usize, [T; 3], T)> = None;
        for &t in &self.buckets[by * self.nx + bx] {
            let [a, b, c] = mesh.triangles[t];
            let area = signed_area(mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
            let l0 = signed_area(p, mesh.nodes[b], mesh.nodes[c]) / area;
            let l1 = signed_area(mesh.nodes[a], p, mesh.nodes[c]) / area;
            let l2 = T::one() - l0 - l1;
            let worst = l0.min(l1).min(l2);
            if worst >= tol && best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, [l0, l1, l2], worst));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    /// P1 interpolation of nodal `values` at `p`.
    pub fn interpolate(&self, mesh: &Mesh<T>, values: &[T], p: [T; 2]) -> Option<T> {
        let (t, l) = self.locate(mesh, p)?;
        let tri = mesh.triangles[t];
        Some(l[0] * values[tri[0]] + l[1] * values[tri[1]] + l[2] * values[tri[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area_and_symmetry() {
        let m = Mesh::<f64>::disk(1.0, 0.05).unwrap();
        let area: f64 = (0..m.triangles.len()).map(|t| m.area(t)).sum();
        assert!(m.triangles.iter().enumerate().all(|(t, _)| m.area(t) > 0.0));
        // inscribed polygon area: rings of 2m_K chords
        let nk = m.outer.len() as f64;
        let polygon = 0.5 * nk * (std::f64::consts::TAU / nk).sin();
        assert!((area - polygon).abs() < 1e-12, "{area} vs {polygon}");
        for (i, &j) in m.mirror.iter().enumerate() {
            assert_eq!(m.nodes[i][0], m.nodes[j][0]);
            assert_eq!(m.nodes[i][1], -m.nodes[j][1]);
        }
        assert!(m.h_max <= 0.05 * 1.5, "{}", m.h_max);
    }

    #[test]
    fn euler_characteristic() {
        let m = Mesh::<f64>::disk(1.0, 0.1).unwrap();
        let mut edges = std::collections::HashSet::new();
        for t in &m.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let chi = m.nodes.len() as i64 - edges.len() as i64 + m.triangles.len() as i64;
        assert_eq!(chi, 1);
    }

    #[test]
    fn half_disk_is_upper_half() {
        let full = Mesh::<f64>::disk(1.0, 0.1).unwrap();
        let half = Mesh::<f64>::half_disk(1.0, 0.1).unwrap();
        let a_full: f64 = (0..full.triangles.len()).map(|t| full.area(t)).sum();
        let a_half: f64 = (0..half.triangles.len()).map(|t| half.area(t)).sum();
        assert!((2.0 * a_half - a_full).abs() < 1e-12);
        for (i, &fi) in half.full_index.iter().enumerate() {
            assert_eq!(half.nodes[i], full.nodes[fi]);
        }
        assert!(half.kinds.iter().any(|&k| k == NodeKind::Flat));
    }

    #[test]
    fn locator_reproduces_linear_functions() {
        let m = Mesh::<f64>::disk(1.0, 0.1).unwrap();
        let loc = Locator::new(&m);
        let vals: Vec<f64> = m.nodes.iter().map(|p| 2.0 * p[0] - p[1] + 0.5).collect();
        for p in [[0.0, 0.0], [0.3, -0.2], [0.7, 0.7], [-0.99, 0.0]] {
            let v = loc.interpolate(&m, &vals, p).unwrap();
            assert!((v - (2.0 * p[0] - p[1] + 0.5)).abs() < 1e-12);
        }
        assert!(loc.interpolate(&m, &vals, [1.2, 0.0]).is_none());
    }
}
