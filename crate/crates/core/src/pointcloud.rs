//! Point clouds, dense Euclidean distance matrices and the filtration edge order.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// `n` points in `d`-dimensional Euclidean space, stored row-major in double
/// precision. Row order is significant: features and critical edges are
/// indexed by it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from row-major data. Fails on empty shapes, on a data
    /// length that does not match `n * d`, or on any non-finite coordinate.
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "point cloud must have n >= 1 and d >= 1 (got n = {n}, d = {d})"
            )));
        }
        if data.len() != n * d {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates for a {n} x {d} cloud, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: pos / d });
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, d, data)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::InvalidInput(format!(
                    "row index {i} out of range for a cloud of {} points",
                    self.n
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.d, data)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &PointCloud) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::InvalidInput(format!(
                "cannot stack clouds of dimension {} and {}",
                self.d, other.d
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(self.n + other.n, self.d, data)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.d, self.data.iter().map(|v| v * c).collect())
    }

    /// Each row divided by its Euclidean norm. Zero rows are left untouched.
    pub fn l2_normalized(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.d) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        Self {
            n: self.n,
            d: self.d,
            data,
        }
    }
}

/// Symmetric `n x n` matrix of Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<f64>,
}

impl DistanceMatrix {
    /// Wraps a full row-major matrix, checking symmetry, a zero diagonal and
    /// non-negative finite entries.
    pub fn from_dense(n: usize, dist: Vec<f64>) -> Result<Self> {
        if n == 0 || dist.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "distance matrix needs {} entries for n = {n}, got {}",
                n * n,
                dist.len()
            )));
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let a = dist[i * n + j];
                if !a.is_finite() || a < 0.0 || a != dist[j * n + i] {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {j}) is not a symmetric non-negative distance"
                    )));
                }
            }
        }
        Ok(Self { n, dist })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// `min_i max_j dist(i, j)`. Above this value the Rips complex is a cone
    /// and carries no homology in positive dimension.
    pub fn enclosing_radius(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().copied().fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Distances of every pair of rows. Summation order over coordinates is fixed,
/// so results are bitwise reproducible.
pub fn pairwise_distances(cloud: &PointCloud) -> DistanceMatrix {
    let n = cloud.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        let a = cloud.row(i);
        for j in (i + 1)..n {
            let b = cloud.row(j);
            let mut s = 0.0;
            for k in 0..a.len() {
                let t = a[k] - b[k];
                s += t * t;
            }
            let v = s.sqrt();
            dist[i * n + j] = v;
            dist[j * n + i] = v;
        }
    }
    DistanceMatrix { n, dist }
}

/// A filtration edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub len: f64,
    pub i: u32,
    pub j: u32,
}

impl Edge {
    /// Filtration order: length, then `(i, j)` lexicographically.
    #[inline]
    pub fn filtration_cmp(&self, other: &Edge) -> Ordering {
        self.len
            .total_cmp(&other.len)
            .then(self.i.cmp(&other.i))
            .then(self.j.cmp(&other.j))
    }
}

/// All `i < j` pairs, ascending by length with ties broken by `(i, j)`.
pub fn sorted_edges(dist: &DistanceMatrix) -> Vec<Edge> {
    let n = dist.len();
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push(Edge {
                len: dist.get(i, j),
                i: i as u32,
                j: j as u32,
            });
        }
    }
    edges.sort_unstable_by(Edge::filtration_cmp);
    edges
}
