//! Planted-sparsity experiments for basis pursuit and OMP.

use nalgebra::DVector;
use rand::seq::index;
use rand::Rng;
use radar_cs::seed::rng_from;
use radar_cs::sensing::{DctOperator, MeasurementMatrix, MeasurementVector};
use radar_cs::solver::{basis_pursuit, omp, reconstruct_block, OmpStop, SolverConfig};

struct Planted {
    matrix: MeasurementMatrix,
    truth: Vec<f64>,
    y: MeasurementVector,
}

/// `k` ±1 coefficients at random DCT indices, measured through `Φ θᵀ`.
fn plant(dct: &DctOperator, m: usize, k: usize, seed: u64) -> Planted {
    let n = dct.len();
    let mut rng = rng_from(seed ^ 0xabcdef);
    let mut truth = vec![0.0; n];
    for idx in index::sample(&mut rng, n, k) {
        truth[idx] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    let matrix = MeasurementMatrix::generate(m, n, 4, seed).unwrap();
    let block = dct.inverse(&truth).unwrap();
    let y = MeasurementVector::new(matrix.apply(&block).unwrap(), seed, None);
    Planted { matrix, truth, y }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

fn support(v: &[f64], tol: f64) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > tol)
        .map(|(i, _)| i)
        .collect()
}

#[test]
fn bp_exact_recovery_k10() {
    let dct = DctOperator::new(20, 25).unwrap();
    let cfg = SolverConfig::default();
    let mut ok = 0;
    for seed in 0..100 {
        let p = plant(&dct, 150, 10, seed);
        let rec = basis_pursuit(&p.matrix, &dct, &p.y, &cfg).unwrap();
        assert!(rec.residual <= 1e-6 * p.y.norm() + 1e-9);
        if rel_err(&rec.coefficients, &p.truth) < 1e-3 {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok}/100 exact recoveries");
}

#[test]
fn omp_support_recovery_k5() {
    let dct = DctOperator::new(20, 25).unwrap();
    let mut ok = 0;
    for seed in 0..100 {
        let p = plant(&dct, 100, 5, 1000 + seed);
        let rec = omp(&p.matrix, &dct, &p.y, OmpStop::Sparsity(5)).unwrap();
        if support(&rec.coefficients, 1e-6) == support(&p.truth, 0.0) {
            ok += 1;
        }
    }
    assert!(ok >= 90, "{ok}/100 supports recovered");
}

#[test]
fn bp_needs_fewer_measurements_than_omp() {
    // At m = 3k the greedy method has little slack; the convex program should do no worse.
    let dct = DctOperator::new(20, 25).unwrap();
    let cfg = SolverConfig::default();
    let (k, m) = (10, 30);
    let (mut bp_total, mut omp_total) = (0.0, 0.0);
    for seed in 0..40 {
        let p = plant(&dct, m, k, 5000 + seed);
        let bp = basis_pursuit(&p.matrix, &dct, &p.y, &cfg).unwrap();
        let om = omp(&p.matrix, &dct, &p.y, OmpStop::Sparsity(k)).unwrap();
        bp_total += rel_err(&bp.coefficients, &p.truth);
        omp_total += rel_err(&om.coefficients, &p.truth);
    }
    assert!(bp_total <= omp_total, "bp {bp_total} vs omp {omp_total}");
}

#[test]
fn full_rate_matches_direct_inversion() {
    let dct = DctOperator::new(6, 10).unwrap();
    let n = dct.len();
    let mut rng = rng_from(3);
    for seed in 0..5 {
        let matrix = MeasurementMatrix::generate(n, n, 4, seed).unwrap();
        let dense = matrix.to_dense();
        if dense.clone().lu().determinant().abs() < 1e-6 {
            continue;
        }
        let block: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let y = MeasurementVector::new(matrix.apply(&block).unwrap(), seed, None);
        let direct = dense.lu().solve(&DVector::from_column_slice(&y.values)).unwrap();
        let rec = reconstruct_block(&matrix, &dct, &y, &SolverConfig::default()).unwrap();
        for (a, b) in rec.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        for (a, b) in rec.iter().zip(&block) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn error_decreases_with_measurements() {
    let dct = DctOperator::new(20, 25).unwrap();
    let cfg = SolverConfig::default();
    let ms = [40, 60, 80, 100, 130];
    let mut mean_err = vec![0.0; ms.len()];
    let seeds = 50;
    for seed in 0..seeds {
        for (i, &m) in ms.iter().enumerate() {
            let p = plant(&dct, m, 12, 9000 + seed);
            let rec = basis_pursuit(&p.matrix, &dct, &p.y, &cfg).unwrap();
            mean_err[i] += rel_err(&rec.coefficients, &p.truth) / seeds as f64;
        }
    }
    for w in mean_err.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{mean_err:?}");
    }
}

#[test]
fn omp_residual_stop() {
    let dct = DctOperator::new(20, 25).unwrap();
    let p = plant(&dct, 100, 5, 77);
    let rec = omp(&p.matrix, &dct, &p.y, OmpStop::Residual(1e-8)).unwrap();
    assert!(rec.converged);
    assert!(rec.residual <= 1e-8);
    assert!(rec.iterations_used <= 100);
}
