//! Independent reference implementations used by the integration tests.
//! Nothing in here calls into the library's numeric code paths.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/tiny")
}

/// Characteristic polynomial coefficients `c` of `det(λI − A)`, highest
/// degree first (`c[0] = 1`), by Faddeev–LeVerrier.
pub fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let identity =
        |s: f64| -> Vec<Vec<f64>> { (0..n).map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect()).collect() };
    let matmul = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| x[i][k] * y[k][j]).sum()).collect()).collect()
    };
    let mut coeffs = vec![1.0];
    let mut m = identity(0.0);
    for k in 1..=n {
        let prev = *coeffs.last().unwrap();
        let am = matmul(a, &m);
        m = am
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, v)| v + if i == j { prev } else { 0.0 }).collect())
            .collect();
        let am = matmul(a, &m);
        let trace: f64 = (0..n).map(|i| am[i][i]).sum();
        coeffs.push(-trace / k as f64);
    }
    coeffs
}

pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Largest real root of the characteristic polynomial: scan down from the
/// max row sum (an upper bound on the Perron root) to the first sign
/// change, then bisect.
pub fn perron_root(a: &[Vec<f64>]) -> f64 {
    let p = char_poly(a);
    let upper = a.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let step = 1e-3;
    let mut hi = upper;
    assert!(poly_eval(&p, hi) > 0.0);
    let mut lo = hi - step;
    while poly_eval(&p, lo) > 0.0 {
        hi = lo;
        lo -= step;
        assert!(lo > -upper, "no real root found");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if poly_eval(&p, mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        0 => 1.0,
        1 => m[0][0],
        n => (0..n)
            .map(|j| {
                let minor: Vec<Vec<f64>> = m[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[0][j] * det(&minor)
            })
            .sum(),
    }
}

/// Eigenvector for `lambda` from the adjugate of `A − λI`: its columns are
/// multiples of the null vector when the eigenvalue is simple. Normalized
/// to unit sum.
pub fn eigenvector(a: &[Vec<f64>], lambda: f64) -> Vec<f64> {
    let n = a.len();
    let shifted: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| a[i][j] - if i == j { lambda } else { 0.0 }).collect()).collect();
    let cofactor = |i: usize, j: usize| {
        let minor: Vec<Vec<f64>> = shifted
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != i)
            .map(|(_, row)| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
            .collect();
        let sign = if (i + j).is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * det(&minor)
    };
    // adj[j][i] = cofactor(i, j); column `col` of adj is (cofactor(col, r))_r.
    let columns: Vec<Vec<f64>> = (0..n).map(|col| (0..n).map(|r| cofactor(col, r)).collect()).collect();
    let best = columns
        .into_iter()
        .max_by(|x, y| {
            let nx: f64 = x.iter().map(|v| v * v).sum();
            let ny: f64 = y.iter().map(|v| v * v).sum();
            nx.total_cmp(&ny)
        })
        .unwrap();
    let s: f64 = best.iter().sum();
    best.iter().map(|v| v / s).collect()
}

pub fn brute_gini(b: &[u128]) -> f64 {
    let n = b.len() as f64;
    let total: f64 = b.iter().map(|&x| x as f64).sum();
    let mut acc = 0.0;
    for &x in b {
        for &y in b {
            acc += (x as f64 - y as f64).abs();
        }
    }
    acc / (2.0 * n * n * (total / n))
}

/// Repeatedly removes the current maximum until the removed total is a
/// strict majority.
pub fn brute_nakamoto(b: &[u128]) -> usize {
    let total: u128 = b.iter().sum();
    let mut left = b.to_vec();
    let mut taken = 0u128;
    let mut k = 0;
    while 2 * taken <= total {
        let (idx, _) = left.iter().enumerate().max_by_key(|(_, v)| **v).unwrap();
        taken += left.swap_remove(idx);
        k += 1;
    }
    k
}

pub fn brute_top10(b: &[u128]) -> f64 {
    let total: u128 = b.iter().sum();
    let mut left = b.to_vec();
    let mut top = 0u128;
    for _ in 0..10.min(b.len()) {
        let (idx, _) = left.iter().enumerate().max_by_key(|(_, v)| **v).unwrap();
        top += left.swap_remove(idx);
    }
    top as f64 / total as f64
}

use defi_rank_core::data::DataDir;
use defi_rank_core::{EvaluationConfig, EvaluationData};

/// Ingests `fixtures/tiny` into a fresh data directory and loads it.
pub fn load_fixture() -> (EvaluationConfig, tempfile::TempDir, EvaluationData) {
    let dir = fixture_dir();
    let config = EvaluationConfig::load(&dir.join("config.toml")).expect("fixture config");
    let inputs = config.inputs.as_ref().expect("fixture inputs").resolved(&dir);
    let tmp = tempfile::tempdir().expect("tempdir");
    let data_dir = DataDir::new(tmp.path());
    let summary = data_dir.ingest(&inputs, true).expect("fixture ingests");
    assert_eq!(summary.total_rejects(), 0);
    let data = data_dir.load().expect("fixture loads");
    (config, tmp, data)
}

pub fn expected() -> serde_json::Value {
    let text = std::fs::read_to_string(fixture_dir().join("expected.json")).expect("expected.json");
    serde_json::from_str(&text).expect("expected.json parses")
}
