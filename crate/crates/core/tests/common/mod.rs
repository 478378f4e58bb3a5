#![allow(dead_code)]

use rand::Rng;
use topsig::pointcloud::{pairwise_distances, DistanceMatrix, PointCloud};
use topsig::rng::{substream, StreamRng};

pub fn rng(seed: u64) -> StreamRng {
    substream(seed, 77)
}

pub fn uniform_cloud(rng: &mut StreamRng, n: usize, d: usize, scale: f64) -> PointCloud {
    let data = (0..n * d).map(|_| rng.random_range(0.0..scale)).collect();
    PointCloud::new(n, d, data).unwrap()
}

/// Smallest gap between distinct sorted pairwise distances.
pub fn distance_gap(dist: &DistanceMatrix) -> f64 {
    let n = dist.len();
    let mut v: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| dist.get(i, j))
        .collect();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Random cloud whose pairwise distances are separated by more than `gap`.
pub fn generic_cloud(rng: &mut StreamRng, n: usize, d: usize, scale: f64, gap: f64) -> PointCloud {
    loop {
        let c = uniform_cloud(rng, n, d, scale);
        if distance_gap(&pairwise_distances(&c)) > gap {
            return c;
        }
    }
}

/// Prim's algorithm on the dense matrix.
pub fn prim_mst_length(dist: &DistanceMatrix) -> f64 {
    let n = dist.len();
    if n <= 1 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .unwrap();
        in_tree[u] = true;
        total += best[u];
        for v in 0..n {
            if !in_tree[v] && dist.get(u, v) < best[v] {
                best[v] = dist.get(u, v);
            }
        }
    }
    total
}

/// `(dim, birth, death)` with `f64::INFINITY` for classes that never die.
pub type Bar = (usize, f64, f64);

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}

/// Persistence by reducing the full boundary matrix of every simplex of
/// dimension up to `max_dim + 1` over GF(2). Columns are dense bit vectors.
/// Zero-persistence bars of positive dimension are dropped; essential bars
/// of dimension `max_dim + 1` are not reported.
pub fn brute_force_bars(dist: &DistanceMatrix, max_dim: usize) -> Vec<Bar> {
    let n = dist.len();
    let mut simplices: Vec<(f64, Vec<usize>)> = Vec::new();
    for size in 1..=(max_dim + 2).min(n) {
        for s in subsets(n, size) {
            let mut value: f64 = 0.0;
            for a in 0..s.len() {
                for b in (a + 1)..s.len() {
                    value = value.max(dist.get(s[a], s[b]));
                }
            }
            simplices.push((value, s));
        }
    }
    simplices.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.len().cmp(&b.1.len())).then(a.1.cmp(&b.1)));
    let index: std::collections::HashMap<Vec<usize>, usize> =
        simplices.iter().enumerate().map(|(k, (_, s))| (s.clone(), k)).collect();
    let m = simplices.len();
    let mut columns: Vec<Vec<bool>> = simplices
        .iter()
        .map(|(_, s)| {
            let mut col = vec![false; m];
            if s.len() > 1 {
                for drop in 0..s.len() {
                    let mut face = s.clone();
                    face.remove(drop);
                    col[index[&face]] = true;
                }
            }
            col
        })
        .collect();
    let low = |c: &Vec<bool>| c.iter().rposition(|&b| b);
    let mut owner: Vec<Option<usize>> = vec![None; m];
    let mut paired = vec![false; m];
    let mut bars = Vec::new();
    for j in 0..m {
        while let Some(l) = low(&columns[j]) {
            match owner[l] {
                Some(k) => {
                    let other = columns[k].clone();
                    for (a, b) in columns[j].iter_mut().zip(other) {
                        *a ^= b;
                    }
                }
                None => break,
            }
        }
        if let Some(l) = low(&columns[j]) {
            owner[l] = Some(j);
            paired[l] = true;
            paired[j] = true;
            let dim = simplices[l].1.len() - 1;
            let (birth, death) = (simplices[l].0, simplices[j].0);
            if dim == 0 || death > birth {
                bars.push((dim, birth, death));
            }
        }
    }
    for k in 0..m {
        let dim = simplices[k].1.len() - 1;
        if !paired[k] && dim <= max_dim {
            bars.push((dim, simplices[k].0, f64::INFINITY));
        }
    }
    sort_bars(&mut bars);
    bars
}

pub fn sort_bars(bars: &mut [Bar]) {
    bars.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
}

pub fn engine_bars(diagram: &topsig::PersistenceDiagram) -> Vec<Bar> {
    let mut bars: Vec<Bar> = diagram.pairs().iter().map(|p| (p.dim, p.birth, p.death)).collect();
    sort_bars(&mut bars);
    bars
}

pub fn bars_match(a: &[Bar], b: &[Bar], tol: f64) -> bool {
    let close = |x: f64, y: f64| (x.is_infinite() && y.is_infinite() && x == y) || (x - y).abs() <= tol;
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0 == y.0 && close(x.1, y.1) && close(x.2, y.2))
}

/// Central finite-difference gradient of `f` at the cloud's coordinates.
pub fn finite_difference<F: Fn(&PointCloud) -> f64>(cloud: &PointCloud, h: f64, f: F) -> Vec<f64> {
    let (n, d) = (cloud.len(), cloud.dim());
    (0..n * d)
        .map(|k| {
            let mut plus = cloud.as_slice().to_vec();
            let mut minus = plus.clone();
            plus[k] += h;
            minus[k] -= h;
            let fp = f(&PointCloud::new(n, d, plus).unwrap());
            let fm = f(&PointCloud::new(n, d, minus).unwrap());
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Largest absolute deviation relative to the largest reference entry.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = analytic
        .iter()
        .zip(reference)
        .fold(0.0f64, |m, (a, r)| m.max((a - r).abs()));
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Symmetric matrix eigenvalues.
pub fn eigenvalues(m: usize, entries: &[f64]) -> Vec<f64> {
    let mat = nalgebra::DMatrix::from_row_slice(m, m, entries);
    nalgebra::SymmetricEigen::new(mat).eigenvalues.iter().copied().collect()
}
