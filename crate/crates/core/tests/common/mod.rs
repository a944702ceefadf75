//! Independent oracles shared by the integration tests. Nothing here calls
//! into the crate's solvers or model code.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Heap's algorithm.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            let j = if k % 2 == 0 { i } else { 0 };
            a.swap(j, k - 1);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// W2² between two uniform measures with the same number of atoms, by
/// enumerating all matchings (optimal for uniform weights by Birkhoff).
pub fn brute_force_w2_sq(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let n = a.len() / dim;
    assert_eq!(b.len(), n * dim);
    permutations(n)
        .iter()
        .map(|p| {
            (0..n).map(|i| sq_dist(&a[i * dim..(i + 1) * dim], &b[p[i] * dim..(p[i] + 1) * dim])).sum::<f64>()
                / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

/// Min-cost transportation by successive shortest paths with Bellman-Ford
/// on the residual graph. Exact for real-valued masses; meant for small
/// instances only.
pub fn ssp_transport_cost(supply: &[f64], demand: &[f64], cost: &[f64]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let mut flow = vec![0.0; m * n];
    let mut s_left = supply.to_vec();
    let mut t_left = demand.to_vec();
    let eps = 1e-15;
    // Relaxation slack well above round-off in the path sums, so rounding
    // cannot masquerade as a negative cycle.
    let slack = 1e-12;
    loop {
        let remaining: f64 = s_left.iter().sum();
        if remaining <= 1e-13 {
            break;
        }
        // Nodes 0..m sources, m..m+n sinks. Distances from a virtual root
        // attached to every source with remaining supply.
        let mut dist = vec![f64::INFINITY; m + n];
        let mut pred: Vec<Option<usize>> = vec![None; m + n];
        for i in 0..m {
            if s_left[i] > eps {
                dist[i] = 0.0;
            }
        }
        for _ in 0..m + n {
            let mut changed = false;
            for i in 0..m {
                for j in 0..n {
                    let c = cost[i * n + j];
                    if dist[i] + c < dist[m + j] - slack {
                        dist[m + j] = dist[i] + c;
                        pred[m + j] = Some(i);
                        changed = true;
                    }
                    if flow[i * n + j] > eps && dist[m + j] - c < dist[i] - slack {
                        dist[i] = dist[m + j] - c;
                        pred[i] = Some(m + j);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..n)
            .filter(|&j| t_left[j] > eps && dist[m + j].is_finite())
            .min_by(|&a, &b| dist[m + a].total_cmp(&dist[m + b]))
            .expect("unbalanced transport instance");
        // Walk back to find the bottleneck.
        let mut path = Vec::new();
        let mut v = m + target;
        while let Some(u) = pred[v] {
            assert!(path.len() <= m + n, "cycle in shortest-path tree");
            path.push((u, v));
            v = u;
        }
        let src = v;
        let mut amount = s_left[src].min(t_left[target]);
        for &(u, v) in &path {
            if u >= m {
                // Reverse arc sink u -> source v cancels flow on (v, u).
                amount = amount.min(flow[v * n + (u - m)]);
            }
        }
        for &(u, v) in &path {
            if u < m {
                flow[u * n + (v - m)] += amount;
            } else {
                flow[v * n + (u - m)] -= amount;
            }
        }
        s_left[src] -= amount;
        t_left[target] -= amount;
    }
    flow.iter().zip(cost).map(|(f, c)| f * c).sum()
}

/// Squared-distance cost matrix, row-major.
pub fn sq_cost(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let (m, n) = (a.len() / dim, b.len() / dim);
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            out.push(sq_dist(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]));
        }
    }
    out
}

pub fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// `σ(Z x)` with `Z` stored row-major as `c × d`.
pub fn matrix_sigmoid(z: &[f64], x: &[f64], c: usize, act: fn(f64) -> f64) -> Vec<f64> {
    let d = x.len();
    (0..c).map(|k| act((0..d).map(|j| z[k * d + j] * x[j]).sum())).collect()
}

/// `W σ(Aᵀ x + B)` with `z = [W (c×b) | A (d×b) | B (b)]`, row-major blocks.
pub fn affine_layer(z: &[f64], x: &[f64], b: usize, c: usize, act: fn(f64) -> f64) -> Vec<f64> {
    let d = x.len();
    let (w, rest) = z.split_at(c * b);
    let (a, bias) = rest.split_at(d * b);
    let h: Vec<f64> = (0..b).map(|l| act(bias[l] + (0..d).map(|j| a[j * b + l] * x[j]).sum::<f64>())).collect();
    (0..c).map(|k| (0..b).map(|l| w[k * b + l] * h[l]).sum()).collect()
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    let mut p = at.to_vec();
    (0..at.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + h;
            let fp = f(&p);
            p[k] = orig - h;
            let fm = f(&p);
            p[k] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

fn unit_matrix(rows: usize, cols: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(rows, cols);
    e[(i, j)] = 1.0;
    e
}

fn cyclic_shift(n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j == (i + k) % n { 1.0 } else { 0.0 })
}

/// Known invariant vectors for a single-hidden-layer unit whose spaces are
/// `n` blocks of sizes `c̃, d̃, b̃`, for a group whose commutant on each block
/// space is spanned by `patterns ⊗ (arbitrary block)`. Each returned vector
/// is in the `[W | A | B]` layout.
fn block_structured_basis(n: usize, ct: usize, dt: usize, bt: usize, patterns: &[DMatrix<f64>]) -> Vec<Vec<f64>> {
    let (c, d, b) = (n * ct, n * dt, n * bt);
    let total = c * b + d * b + b;
    let mut out = Vec::new();
    for p in patterns {
        for i in 0..ct {
            for j in 0..bt {
                let w = p.kronecker(&unit_matrix(ct, bt, i, j));
                let mut v = row_major(&w);
                v.resize(total, 0.0);
                out.push(v);
            }
        }
        for i in 0..dt {
            for j in 0..bt {
                let a = p.kronecker(&unit_matrix(dt, bt, i, j));
                let mut v = vec![0.0; c * b];
                v.extend(row_major(&a));
                v.resize(total, 0.0);
                out.push(v);
            }
        }
    }
    for l in 0..bt {
        let mut v = vec![0.0; c * b + d * b];
        let ones = DMatrix::from_element(n, 1, 1.0);
        v.extend(row_major(&ones.kronecker(&unit_matrix(bt, 1, l, 0))));
        out.push(v);
    }
    out
}

/// DeepSets: the permutation commutant is spanned by `I` and `11ᵀ`.
pub fn deepsets_basis(n: usize, ct: usize, dt: usize, bt: usize) -> Vec<Vec<f64>> {
    block_structured_basis(n, ct, dt, bt, &[DMatrix::identity(n, n), DMatrix::from_element(n, n, 1.0)])
}

/// Circulant: the cyclic commutant is spanned by the shifts `S^k`.
pub fn circulant_basis(n: usize, ct: usize, dt: usize, bt: usize) -> Vec<Vec<f64>> {
    let shifts: Vec<_> = (0..n).map(|k| cyclic_shift(n, k)).collect();
    block_structured_basis(n, ct, dt, bt, &shifts)
}

/// Distance from `v` to the column span of an orthonormal basis.
pub fn distance_to_span(basis: &DMatrix<f64>, v: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_column_slice(v);
    let p = basis * (basis.transpose() * &v);
    (&v - p).norm()
}

pub fn median(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
