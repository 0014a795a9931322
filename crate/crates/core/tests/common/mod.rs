//! Shared fixtures and literal dense transcriptions used as oracles.
//!
//! The oracles avoid the crate's own linear algebra: matrices are nested
//! vectors and inverses come from Gauss-Jordan elimination.

#![allow(dead_code)]

use pgpr_core::{Dataset, Hyperparameters, InputPoint, Matrix, SupportSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub const QUERY_ID_BASE: u64 = 1_000_000;
pub const SUPPORT_ID_BASE: u64 = 2_000_000;

pub struct Instance {
    pub train: Dataset,
    pub query: Vec<InputPoint>,
    pub h: Hyperparameters,
}

fn point(rng: &mut ChaCha8Rng, id: u64, d: usize) -> InputPoint {
    InputPoint::new(id, (0..d).map(|_| rng.random_range(0.0..10.0)).collect())
}

/// Smooth test function plus noise on uniform inputs in `[0, 10]^d`.
pub fn instance(seed: u64, d: usize, n: usize, u: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<InputPoint> = (0..n as u64).map(|i| point(&mut rng, i, d)).collect();
    let outputs = inputs
        .iter()
        .map(|p| {
            let s: f64 = p.coords.iter().enumerate().map(|(k, x)| (x * (0.7 + 0.2 * k as f64)).sin()).sum();
            s + 0.3 + 0.2 * rng.random_range(-1.0..1.0)
        })
        .collect();
    let query = (0..u as u64).map(|i| point(&mut rng, QUERY_ID_BASE + i, d)).collect();
    Instance {
        train: Dataset::new(inputs, outputs, 0.3).unwrap(),
        query,
        h: Hyperparameters::new(1.2, 0.09, (0..d).map(|k| 1.4 + 0.3 * k as f64).collect()).unwrap(),
    }
}

/// Uniformly placed support inputs with fresh ids.
pub fn support(seed: u64, d: usize, k: usize) -> SupportSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    SupportSet::new((0..k as u64).map(|i| point(&mut rng, SUPPORT_ID_BASE + i, d)).collect()).unwrap()
}

pub fn k(a: &InputPoint, b: &InputPoint, h: &Hyperparameters) -> f64 {
    let mut s = 0.0;
    for i in 0..a.coords.len() {
        let t = (a.coords[i] - b.coords[i]) / h.length_scales()[i];
        s += t * t;
    }
    let delta = if a.id == b.id { h.noise_variance() } else { 0.0 };
    h.signal_variance() * (-0.5 * s).exp() + delta
}

pub fn cov(a: &[InputPoint], b: &[InputPoint], h: &Hyperparameters) -> Dense {
    a.iter().map(|x| b.iter().map(|y| k(x, y, h)).collect()).collect()
}

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn t(a: &Dense, cols: usize) -> Dense {
    (0..cols).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

pub fn mul(a: &Dense, b: &Dense, b_cols: usize) -> Dense {
    a.iter()
        .map(|row| {
            (0..b_cols)
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

pub fn mat_vec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        assert!(d != 0.0, "singular matrix in oracle");
        for v in &mut m[c] {
            *v /= d;
        }
        let pivot_row = m[c].clone();
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for (v, pv) in m[r].iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn to_dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn residuals(d: &Dataset) -> Vec<f64> {
    d.outputs().iter().map(|y| y - d.prior_mean()).collect()
}

/// (mean, variances) from the generic form `μ + A B⁻¹ r`, `Σ_UU - A B⁻¹ Aᵀ`.
fn gaussian(prior_mean: f64, a: &Dense, b: &Dense, r: &[f64], query: &[InputPoint], h: &Hyperparameters) -> (Vec<f64>, Vec<f64>) {
    let n = b.len();
    let bi = inverse(b);
    let w = mul(a, &bi, n);
    let mean = mat_vec(&w, r).into_iter().map(|v| v + prior_mean).collect();
    let var = query
        .iter()
        .enumerate()
        .map(|(i, q)| k(q, q, h) - w[i].iter().zip(&a[i]).map(|(x, y)| x * y).sum::<f64>())
        .collect();
    (mean, var)
}

/// Exact GP posterior.
pub fn fgp(train: &Dataset, query: &[InputPoint], h: &Hyperparameters) -> (Vec<f64>, Vec<f64>) {
    let a = cov(query, train.inputs(), h);
    let b = cov(train.inputs(), train.inputs(), h);
    gaussian(train.prior_mean(), &a, &b, &residuals(train), query, h)
}

/// `Γ_AB = Σ_AS Σ_SS⁻¹ Σ_SB`
pub fn gamma(a: &[InputPoint], b: &[InputPoint], s: &SupportSet, h: &Hyperparameters) -> Dense {
    let ns = s.len();
    let kss_inv = inverse(&cov(s.points(), s.points(), h));
    let left = mul(&cov(a, s.points(), h), &kss_inv, ns);
    mul(&left, &cov(s.points(), b, h), b.len())
}

/// `Γ_DD + Λ` over blocks stacked in order.
fn pitc_train_matrix(blocks: &[Dataset], s: &SupportSet, h: &Hyperparameters) -> (Vec<InputPoint>, Dense) {
    let all: Vec<InputPoint> = blocks.iter().flat_map(|b| b.inputs().iter().cloned()).collect();
    let mut q = gamma(&all, &all, s, h);
    let mut off = 0;
    for b in blocks {
        let kb = cov(b.inputs(), b.inputs(), h);
        let gb = gamma(b.inputs(), b.inputs(), s, h);
        for i in 0..b.len() {
            for j in 0..b.len() {
                // Γ + (Σ - Γ) on the diagonal blocks.
                q[off + i][off + j] += kb[i][j] - gb[i][j];
            }
        }
        off += b.len();
    }
    (all, q)
}

fn stacked_residuals(blocks: &[Dataset]) -> Vec<f64> {
    blocks.iter().flat_map(residuals).collect()
}

/// Centralized PITC mean and variances over `query`.
pub fn pitc(blocks: &[Dataset], query: &[InputPoint], s: &SupportSet, h: &Hyperparameters) -> (Vec<f64>, Vec<f64>) {
    let (all, q) = pitc_train_matrix(blocks, s, h);
    let a = gamma(query, &all, s, h);
    gaussian(blocks[0].prior_mean(), &a, &q, &stacked_residuals(blocks), query, h)
}

/// Centralized PIC; results follow the query blocks stacked in order.
pub fn pic(blocks: &[Dataset], query_blocks: &[Vec<InputPoint>], s: &SupportSet, h: &Hyperparameters) -> (Vec<f64>, Vec<f64>) {
    let (all, q) = pitc_train_matrix(blocks, s, h);
    let query: Vec<InputPoint> = query_blocks.iter().flatten().cloned().collect();
    let mut a = gamma(&query, &all, s, h);
    let mut qoff = 0;
    for (i, qb) in query_blocks.iter().enumerate() {
        let mut doff = 0;
        for (m, b) in blocks.iter().enumerate() {
            if i == m {
                let kb = cov(qb, b.inputs(), h);
                for r in 0..qb.len() {
                    for c in 0..b.len() {
                        a[qoff + r][doff + c] = kb[r][c];
                    }
                }
            }
            doff += b.len();
        }
        qoff += qb.len();
    }
    gaussian(blocks[0].prior_mean(), &a, &q, &stacked_residuals(blocks), &query, h)
}

/// Centralized ICF with `Σ_DD ≈ FᵀF + σ_n² I`.
pub fn icf(train: &Dataset, f: &Dense, query: &[InputPoint], h: &Hyperparameters) -> (Vec<f64>, Vec<f64>) {
    let n = train.len();
    let mut b = mul(&t(f, n), f, n);
    for (i, row) in b.iter_mut().enumerate() {
        row[i] += h.noise_variance();
    }
    let a = cov(query, train.inputs(), h);
    gaussian(train.prior_mean(), &a, &b, &residuals(train), query, h)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn dense_max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max(max_abs_diff(x, y)))
}

/// Reorders values given per stacked query position back to query order.
pub fn unstack(values: &[f64], query_index: &[Vec<usize>]) -> Vec<f64> {
    let mut out = vec![f64::NAN; values.len()];
    for (k, i) in query_index.iter().flatten().enumerate() {
        out[*i] = values[k];
    }
    out
}
