//! Vietoris–Rips persistence with critical edges.
//!
//! Dimension 0 is computed by union-find over the sorted edge list, so its
//! finite deaths are exactly the minimum spanning tree edge lengths.
//! Dimensions 1 and 2 are computed by GF(2) column reduction of the boundary
//! matrices. Columns are ordered by (filtration value, lexicographic simplex),
//! rows of edges that merged components are dropped from the triangle matrix,
//! and triangles that are pivots of the reduced tetrahedron matrix are cleared
//! before the triangle matrix is reduced.
//!
//! Simplices above the enclosing radius are never materialised: the complex
//! there is a cone, so every class of positive dimension has died by then and
//! anything created later would have zero persistence. Pairs of positive
//! dimension with zero persistence are not reported.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::pointcloud::{sorted_edges, DistanceMatrix, Edge};

/// Death value of a class that never dies.
pub const ESSENTIAL: f64 = f64::INFINITY;

/// Highest homology dimension the engine computes.
pub const MAX_SUPPORTED_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    /// Vertex pair whose distance equals `birth`; absent in dimension 0.
    pub birth_edge: Option<(usize, usize)>,
    /// Vertex pair whose distance equals `death`; absent for essential classes.
    pub death_edge: Option<(usize, usize)>,
}

impl PersistencePair {
    #[inline]
    pub fn is_essential(&self) -> bool {
        self.death == ESSENTIAL
    }

    #[inline]
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pairs: Vec<PersistencePair>,
    max_dim: usize,
    n_points: usize,
}

impl PersistenceDiagram {
    pub fn new(pairs: Vec<PersistencePair>, max_dim: usize, n_points: usize) -> Self {
        Self {
            pairs,
            max_dim,
            n_points,
        }
    }

    pub fn pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// All pairs of one dimension, essential ones included.
    pub fn dim(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(move |p| p.dim == dim)
    }

    /// Finite pairs of one dimension.
    pub fn finite(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> {
        self.dim(dim).filter(|p| !p.is_essential())
    }
}

/// Union-find whose representative is always the smallest vertex index of the
/// component, so the older component survives a merge (elder rule with
/// index tie-break; all vertices are born at 0).
struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    /// Returns `false` if `a` and `b` were already connected.
    fn union(&mut self, a: u32, b: u32) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop as usize] = keep;
        true
    }
}

/// Result of [`mst_h0`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mst {
    pub total_length: f64,
    /// Tree edges in ascending filtration order.
    pub edges: Vec<Edge>,
}

/// Kruskal minimum spanning tree under the lexicographic tie-break.
pub fn mst_h0(dist: &DistanceMatrix) -> Mst {
    let n = dist.len();
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for e in sorted_edges(dist) {
        if uf.union(e.i, e.j) {
            edges.push(e);
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    let total_length = edges.iter().map(|e| e.len).sum();
    Mst {
        total_length,
        edges,
    }
}

/// Persistence diagram of the Rips filtration of `dist` in dimensions
/// `0..=max_dim`, run to the diameter.
pub fn vr_persistence(dist: &DistanceMatrix, max_dim: usize) -> Result<PersistenceDiagram> {
    if max_dim > MAX_SUPPORTED_DIM {
        return Err(Error::UnsupportedDimension(max_dim));
    }
    let n = dist.len();
    let edges = sorted_edges(dist);

    let mut pairs = Vec::new();
    let mut uf = UnionFind::new(n);
    let mut negative_edge = vec![false; edges.len()];
    for (rank, e) in edges.iter().enumerate() {
        if uf.union(e.i, e.j) {
            negative_edge[rank] = true;
            pairs.push(PersistencePair {
                dim: 0,
                birth: 0.0,
                death: e.len,
                birth_edge: None,
                death_edge: Some((e.i as usize, e.j as usize)),
            });
        }
    }
    pairs.push(PersistencePair {
        dim: 0,
        birth: 0.0,
        death: ESSENTIAL,
        birth_edge: None,
        death_edge: None,
    });

    if max_dim >= 1 && n >= 3 {
        let complex = HigherComplex::build(dist, &edges, max_dim);
        pairs.extend(complex.pairs(&edges, &negative_edge));
    }

    Ok(PersistenceDiagram::new(pairs, max_dim, n))
}

/// Convenience: distances, then persistence.
pub fn cloud_persistence(
    cloud: &crate::pointcloud::PointCloud,
    max_dim: usize,
) -> Result<PersistenceDiagram> {
    vr_persistence(&crate::pointcloud::pairwise_distances(cloud), max_dim)
}

/// A simplex of dimension >= 2 with its filtration value and the rank (in the
/// edge order) of its longest edge.
#[derive(Debug, Clone)]
struct Simplex<const K: usize> {
    verts: [u32; K],
    value: f64,
    max_edge: u32,
}

fn simplex_order<const K: usize>(a: &Simplex<K>, b: &Simplex<K>) -> std::cmp::Ordering {
    a.value.total_cmp(&b.value).then_with(|| a.verts.cmp(&b.verts))
}

struct HigherComplex {
    n: usize,
    threshold: f64,
    rank: Vec<u32>,
    triangles: Vec<Simplex<3>>,
    tetrahedra: Vec<Simplex<4>>,
}

impl HigherComplex {
    fn build(dist: &DistanceMatrix, edges: &[Edge], max_dim: usize) -> Self {
        let n = dist.len();
        let mut rank = vec![u32::MAX; n * n];
        for (r, e) in edges.iter().enumerate() {
            rank[e.i as usize * n + e.j as usize] = r as u32;
            rank[e.j as usize * n + e.i as usize] = r as u32;
        }
        let threshold = dist.enclosing_radius();
        let within = |i: usize, j: usize| dist.get(i, j) <= threshold;

        let mut triangles = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if !within(a, b) {
                    continue;
                }
                for c in (b + 1)..n {
                    if !within(a, c) || !within(b, c) {
                        continue;
                    }
                    let r = rank[a * n + b].max(rank[a * n + c]).max(rank[b * n + c]);
                    triangles.push(Simplex {
                        verts: [a as u32, b as u32, c as u32],
                        value: edges[r as usize].len,
                        max_edge: r,
                    });
                }
            }
        }
        triangles.sort_unstable_by(simplex_order);

        let mut tetrahedra = Vec::new();
        if max_dim >= 2 {
            for t in &triangles {
                let [a, b, c] = t.verts.map(|v| v as usize);
                for d in (c + 1)..n {
                    if !within(a, d) || !within(b, d) || !within(c, d) {
                        continue;
                    }
                    let r = t
                        .max_edge
                        .max(rank[a * n + d])
                        .max(rank[b * n + d])
                        .max(rank[c * n + d]);
                    tetrahedra.push(Simplex {
                        verts: [a as u32, b as u32, c as u32, d as u32],
                        value: edges[r as usize].len,
                        max_edge: r,
                    });
                }
            }
            tetrahedra.sort_unstable_by(simplex_order);
        }

        Self {
            n,
            threshold,
            rank,
            triangles,
            tetrahedra,
        }
    }

    fn edge_rank(&self, a: u32, b: u32) -> u32 {
        self.rank[a as usize * self.n + b as usize]
    }

    fn pairs(&self, edges: &[Edge], negative_edge: &[bool]) -> Vec<PersistencePair> {
        let endpoints = |r: u32| {
            let e = edges[r as usize];
            (e.i as usize, e.j as usize)
        };
        let mut out = Vec::new();

        // Dimension 2 first so its pivots can clear triangle columns.
        let mut cleared = vec![false; self.triangles.len()];
        let mut dim2 = Vec::new();
        if !self.tetrahedra.is_empty() {
            let index: HashMap<[u32; 3], u32> = self
                .triangles
                .iter()
                .enumerate()
                .map(|(k, t)| (t.verts, k as u32))
                .collect();
            let columns = self.tetrahedra.iter().map(|s| {
                let [a, b, c, d] = s.verts;
                let mut col: Vec<u32> = [[a, b, c], [a, b, d], [a, c, d], [b, c, d]]
                    .iter()
                    .filter_map(|f| index.get(f).copied())
                    .collect();
                col.sort_unstable();
                col
            });
            for (col, row) in reduce(columns, self.triangles.len(), usize::MAX) {
                cleared[row as usize] = true;
                let birth = &self.triangles[row as usize];
                let death = &self.tetrahedra[col];
                if death.value > birth.value {
                    dim2.push(PersistencePair {
                        dim: 2,
                        birth: birth.value,
                        death: death.value,
                        birth_edge: Some(endpoints(birth.max_edge)),
                        death_edge: Some(endpoints(death.max_edge)),
                    });
                }
            }
        }

        let columns = self.triangles.iter().enumerate().map(|(k, s)| {
            if cleared[k] {
                return Vec::new();
            }
            let [a, b, c] = s.verts;
            let mut col: Vec<u32> = [self.edge_rank(a, b), self.edge_rank(a, c), self.edge_rank(b, c)]
                .into_iter()
                .filter(|&r| !negative_edge[r as usize])
                .collect();
            col.sort_unstable();
            col
        });
        // Every positive edge inside the threshold dies inside it (the complex
        // there is a cone), so reduction stops once they are all paired.
        let positive = edges
            .iter()
            .zip(negative_edge)
            .filter(|(e, &neg)| !neg && e.len <= self.threshold)
            .count();
        for (col, row) in reduce(columns, edges.len(), positive) {
            let death = &self.triangles[col];
            let birth = edges[row as usize];
            if death.value > birth.len {
                out.push(PersistencePair {
                    dim: 1,
                    birth: birth.len,
                    death: death.value,
                    birth_edge: Some((birth.i as usize, birth.j as usize)),
                    death_edge: Some(endpoints(death.max_edge)),
                });
            }
        }
        out.extend(dim2);
        out
    }
}

/// Standard left-to-right GF(2) column reduction. Columns are sorted row
/// indices; the pivot is the largest row. Returns `(column, pivot row)` for
/// every column that does not reduce to zero, in column order, stopping after
/// `limit` pairs.
fn reduce<I>(columns: I, n_rows: usize, limit: usize) -> Vec<(usize, u32)>
where
    I: Iterator<Item = Vec<u32>>,
{
    let mut owner: Vec<u32> = vec![u32::MAX; n_rows];
    let mut reduced: Vec<Vec<u32>> = Vec::new();
    let mut pairs = Vec::new();
    let mut scratch = Vec::new();
    for (k, mut col) in columns.enumerate() {
        if pairs.len() >= limit {
            break;
        }
        while let Some(&low) = col.last() {
            let o = owner[low as usize];
            if o == u32::MAX {
                break;
            }
            symmetric_difference(&col, &reduced[o as usize], &mut scratch);
            std::mem::swap(&mut col, &mut scratch);
        }
        if let Some(&low) = col.last() {
            owner[low as usize] = reduced.len() as u32;
            reduced.push(col);
            pairs.push((k, low));
        }
    }
    pairs
}

fn symmetric_difference(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}
