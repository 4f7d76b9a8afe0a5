//! Plain-loop reference computations used as independent oracles.
#![allow(dead_code)]

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Row-major matrix as Vec<Vec<f64>>: `rows[i][j]`.
pub fn mat_t_vec(rows: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    // returns rowsᵀ v
    let ncols = rows[0].len();
    let mut out = vec![0.0; ncols];
    for (i, r) in rows.iter().enumerate() {
        for j in 0..ncols {
            out[j] += r[j] * v[i];
        }
    }
    out
}

/// `softmax(γ u·z_j)` weighted sum of context patterns, by explicit loops.
pub fn eq2(gamma: f64, u: &[f64], patterns: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let scores: Vec<f64> = patterns.iter().map(|z| gamma * dot(u, z)).collect();
    let mut max = f64::NEG_INFINITY;
    for &s in &scores {
        if s > max {
            max = s;
        }
    }
    let mut total = 0.0;
    let mut w = Vec::new();
    for &s in &scores {
        let e = (s - max).exp();
        total += e;
        w.push(e);
    }
    for x in w.iter_mut() {
        *x /= total;
    }
    let mut out = vec![0.0; u.len()];
    for (j, z) in patterns.iter().enumerate() {
        for i in 0..u.len() {
            out[i] += w[j] * z[i];
        }
    }
    (w, out)
}

pub fn cosine_score(a: &[f64], b: &[f64]) -> f64 {
    (1.0 + dot(a, b) / (norm(a) * norm(b))) / 2.0
}

/// Reference beta, written exactly as the closed form.
pub fn beta_ref(c: f64, m: usize, t: usize) -> f64 {
    let mt = (m - t) as f64;
    1.0 - 1.0 / (1.0 + c * mt / t as f64) + c * mt
}
