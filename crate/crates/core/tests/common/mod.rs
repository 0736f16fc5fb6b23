//! Independent reference implementations shared by the integration tests.
//! None of these call into the library's fast paths.
#![allow(dead_code)]

use lapformer::linalg::{gaussian_matrix, rng_from_seed};
use lapformer::Matrix;
use rand::Rng;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    gaussian_matrix(rows, cols, &mut rng)
}

pub fn uniform_matrix(rows: usize, cols: usize, lo: f64, hi: f64, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.cols(), b.rows());
    Matrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

pub fn frob(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let nb = frob(b);
    if nb == 0.0 {
        diff
    } else {
        diff / nb
    }
}

pub fn laplace(x: &[f64], y: &[f64], lambda: f64) -> f64 {
    (-x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / lambda).exp()
}

pub fn gauss(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    (-x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * sigma * sigma)).exp()
}

/// Central difference of `f` at `x` along each coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

pub fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nb == 0.0 {
        diff
    } else {
        diff / nb
    }
}

/// Mean over each `r × r` block of a row-major `h × w` token grid, by
/// enumerating the tokens that fall in each block.
pub fn block_mean_oracle(tokens: &Matrix, h: usize, w: usize, r: usize) -> Matrix {
    let (lh, lw) = (h / r, w / r);
    Matrix::from_fn(lh * lw, tokens.cols(), |l, c| {
        let (a, b) = (l / lw, l % lw);
        let members: Vec<usize> = (0..h * w).filter(|t| (t / w) / r == a && (t % w) / r == b).collect();
        members.iter().map(|&t| tokens[(t, c)]).sum::<f64>() / members.len() as f64
    })
}

/// Injective embedding from its definition: row-centre, per-column
/// standardize with population variance, add `1/N`.
pub fn embed_oracle(g: &Matrix, eps: f64) -> Matrix {
    let (b, n) = g.shape();
    let centred = Matrix::from_fn(b, n, |i, j| g[(i, j)] - (0..n).map(|l| g[(i, l)]).sum::<f64>() / n as f64);
    let mu: Vec<f64> = (0..n).map(|j| (0..b).map(|i| centred[(i, j)]).sum::<f64>() / b as f64).collect();
    let var: Vec<f64> = (0..n)
        .map(|j| (0..b).map(|i| (centred[(i, j)] - mu[j]).powi(2)).sum::<f64>() / b as f64)
        .collect();
    Matrix::from_fn(b, n, |i, j| (centred[(i, j)] - mu[j]) / (var[j] + eps).sqrt() + 1.0 / n as f64)
}

/// Zero-padded depthwise convolution as an explicit sum over taps.
pub fn conv1d_oracle(v: &Matrix, taps: &Matrix) -> Matrix {
    let (n, c) = v.shape();
    let w = taps.cols() as i64;
    Matrix::from_fn(n, c, |t, ch| {
        (0..w)
            .map(|s| {
                let src = t as i64 + s - w / 2;
                if (0..n as i64).contains(&src) {
                    taps[(ch, s as usize)] * v[(src as usize, ch)]
                } else {
                    0.0
                }
            })
            .sum()
    })
}

pub fn conv2d_oracle(v: &Matrix, taps: &Matrix, h: usize, w: usize, kw: usize) -> Matrix {
    let half = (kw / 2) as i64;
    Matrix::from_fn(v.rows(), v.cols(), |t, ch| {
        let (y, x) = ((t / w) as i64, (t % w) as i64);
        let mut acc = 0.0;
        for a in 0..kw as i64 {
            for b in 0..kw as i64 {
                let (sy, sx) = (y + a - half, x + b - half);
                if sy >= 0 && sy < h as i64 && sx >= 0 && sx < w as i64 {
                    acc += taps[(ch, (a * kw as i64 + b) as usize)] * v[((sy * w as i64 + sx) as usize, ch)];
                }
            }
        }
        acc
    })
}

/// Dense Laplacian-block output `Z V + DWC(V)` built from the definitions.
pub fn dense_block_oracle(q: &Matrix, k: &Matrix, v: &Matrix, lambda: f64, eps: f64, taps: &Matrix, h: usize, w: usize) -> Matrix {
    let g = Matrix::from_fn(q.rows(), k.rows(), |i, j| laplace(q.row(i), k.row(j), lambda));
    let z = embed_oracle(&g, eps);
    let zv = naive_matmul(&z, v);
    let local = conv2d_oracle(v, taps, h, w, (taps.cols() as f64).sqrt() as usize);
    Matrix::from_fn(zv.rows(), zv.cols(), |i, j| zv[(i, j)] + local[(i, j)])
}

/// Softmax attention from the elementwise formula.
pub fn softmax_oracle(q: &Matrix, k: &Matrix, v: &Matrix) -> Matrix {
    let d = q.cols() as f64;
    Matrix::from_fn(q.rows(), v.cols(), |i, c| {
        let logits: Vec<f64> = (0..k.rows())
            .map(|j| (0..q.cols()).map(|l| q[(i, l)] * k[(j, l)]).sum::<f64>() / d.sqrt())
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let den: f64 = logits.iter().map(|s| (s - max).exp()).sum();
        (0..k.rows()).map(|j| (logits[j] - max).exp() / den * v[(j, c)]).sum()
    })
}

/// `out_i = Σ_j s(q_i, k_j) v_j / Σ_j s(q_i, k_j)` with the `N × N`
/// similarity `s = φ(q)·φ(k)` formed explicitly.
pub fn quadratic_linear_attention(q: &Matrix, k: &Matrix, v: &Matrix, phi: impl Fn(&[f64]) -> Vec<f64>) -> Matrix {
    let fq: Vec<Vec<f64>> = q.row_iter().map(&phi).collect();
    let fk: Vec<Vec<f64>> = k.row_iter().map(&phi).collect();
    let s = Matrix::from_fn(q.rows(), k.rows(), |i, j| fq[i].iter().zip(&fk[j]).map(|(a, b)| a * b).sum());
    Matrix::from_fn(q.rows(), v.cols(), |i, c| {
        let den: f64 = (0..k.rows()).map(|j| s[(i, j)]).sum();
        (0..k.rows()).map(|j| s[(i, j)] * v[(j, c)]).sum::<f64>() / den
    })
}
