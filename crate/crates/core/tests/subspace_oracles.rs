//! PCA and KPCA checked against routes that share no code with them.

use daepca::numerics::{standardize, sym_eig, Matrix};
use daepca::subspace::{fit_kpca, fit_pca, KernelConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(n: usize, m: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Matrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let mix = Matrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    base.matmul(&mix).unwrap()
}

/// Orthonormal 4×2 basis from six Givens angles applied to [e1 e2].
fn basis_from_angles(angles: &[f64; 6]) -> [[f64; 4]; 2] {
    let mut q = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for (&(i, j), &th) in pairs.iter().zip(angles) {
        let (c, s) = (th.cos(), th.sin());
        for v in &mut q {
            let (a, b) = (v[i], v[j]);
            v[i] = c * a - s * b;
            v[j] = s * a + c * b;
        }
    }
    q
}

fn subspace_error(z: &Matrix, angles: &[f64; 6]) -> f64 {
    let q = basis_from_angles(angles);
    let mut err = 0.0;
    for i in 0..z.rows() {
        let r = z.row(i);
        let mut proj = [0.0; 4];
        for v in &q {
            let c: f64 = (0..4).map(|k| r[k] * v[k]).sum();
            for k in 0..4 {
                proj[k] += c * v[k];
            }
        }
        err += (0..4).map(|k| (r[k] - proj[k]).powi(2)).sum::<f64>();
    }
    err
}

/// Coordinate-wise grid search over the angles followed by golden-section refinement.
fn exhaustive_min(z: &Matrix) -> f64 {
    let mut best = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..6 {
        let mut ang = [0.0; 6];
        for a in &mut ang {
            *a = rng.gen_range(0.0..std::f64::consts::PI);
        }
        for _sweep in 0..60 {
            for k in 0..6 {
                let grid = 90;
                let mut bk = (f64::INFINITY, 0.0);
                for g in 0..grid {
                    let mut t = ang;
                    t[k] = std::f64::consts::PI * g as f64 / grid as f64;
                    let e = subspace_error(z, &t);
                    if e < bk.0 {
                        bk = (e, t[k]);
                    }
                }
                let h = std::f64::consts::PI / grid as f64;
                let (mut lo, mut hi) = (bk.1 - h, bk.1 + h);
                let phi = (5f64.sqrt() - 1.0) / 2.0;
                for _ in 0..60 {
                    let m1 = hi - phi * (hi - lo);
                    let m2 = lo + phi * (hi - lo);
                    let mut t1 = ang;
                    t1[k] = m1;
                    let mut t2 = ang;
                    t2[k] = m2;
                    if subspace_error(z, &t1) < subspace_error(z, &t2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                ang[k] = 0.5 * (lo + hi);
            }
        }
        best = best.min(subspace_error(z, &ang));
    }
    best
}

#[test]
fn pca_matches_rotation_grid_oracle() {
    let x = random(50, 4, 31);
    let (z, _) = standardize(&x).unwrap();
    let model = fit_pca(&x, 2).unwrap();
    let got = model.reconstruction_error(&z).unwrap();
    let oracle = exhaustive_min(&z);
    assert!((got - oracle).abs() <= 1e-4, "pca {got} vs oracle {oracle}");
}

#[test]
fn linear_kpca_scores_equal_pca_scores() {
    let x = random(60, 5, 12);
    let pca = fit_pca(&x, 3).unwrap();
    let kpca = fit_kpca(&x, 3, KernelConfig::Linear).unwrap();
    let (z, _) = standardize(&x).unwrap();
    let ps = pca.scores(&z).unwrap();
    let ks = kpca.training_scores().unwrap();
    for c in 0..3 {
        let sign = if ps[(0, c)] * ks[(0, c)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..60 {
            assert!((ps[(i, c)] - sign * ks[(i, c)]).abs() < 1e-8);
        }
    }
    // online projection of a fresh sample agrees too
    let fresh = [0.3, -1.2, 2.0, 0.1, -0.7];
    let t = kpca.project(&fresh).unwrap();
    let mut zf = [0.0; 5];
    pca.train_stats.apply_row(&fresh, &mut zf);
    let tp = pca.loadings.vec_matmul(&zf).unwrap();
    for c in 0..3 {
        let sign = if ps[(0, c)] * ks[(0, c)] < 0.0 { -1.0 } else { 1.0 };
        assert!((tp[c] - sign * t[c]).abs() < 1e-8);
    }
    // and so do the statistics' T²
    let (t2k, _) = kpca.statistics(&fresh).unwrap();
    let (t2p, _) = pca.statistics(&fresh).unwrap();
    assert!((t2k - t2p).abs() < 1e-8 * t2p.max(1.0));
}

#[test]
fn linear_kpca_spe_matches_explicit_feature_residual() {
    // rank-3 data in 5 dimensions with 2 retained components
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let latent = Matrix::from_fn(40, 3, |_, _| rng.gen_range(-1.0..1.0));
    let mix = Matrix::from_fn(3, 5, |_, _| rng.gen_range(-1.0..1.0));
    let x = latent.matmul(&mix).unwrap();
    let model = fit_kpca(&x, 2, KernelConfig::Linear).unwrap();
    let (z, stats) = standardize(&x).unwrap();

    // top-2 principal directions of ZᵀZ by power iteration with deflation
    let mut cov = vec![vec![0.0; 5]; 5];
    for i in 0..z.rows() {
        for p in 0..5 {
            for q in 0..5 {
                cov[p][q] += z.row(i)[p] * z.row(i)[q];
            }
        }
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for _ in 0..2 {
        let mut v = vec![1.0, 0.3, -0.2, 0.5, 0.1];
        let mut value = 0.0;
        for _ in 0..5000 {
            let mut w: Vec<f64> = (0..5)
                .map(|p| (0..5).map(|q| cov[p][q] * v[q]).sum())
                .collect();
            value = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter_mut().for_each(|x| *x /= value);
            v = w;
        }
        for p in 0..5 {
            for q in 0..5 {
                cov[p][q] -= value * v[p] * v[q];
            }
        }
        basis.push(v);
    }

    for _ in 0..5 {
        let sample: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let zs: Vec<f64> = (0..5).map(|j| (sample[j] - stats.mean[j]) / stats.std[j]).collect();
        let mut resid = zs.clone();
        for b in &basis {
            let c: f64 = zs.iter().zip(b).map(|(p, q)| p * q).sum();
            resid.iter_mut().zip(b).for_each(|(p, q)| *p -= c * q);
        }
        let oracle: f64 = resid.iter().map(|p| p * p).sum();
        let (_, spe) = model.statistics(&sample).unwrap();
        assert!((spe - oracle).abs() < 1e-8, "spe {spe} vs {oracle}");
    }
}

#[test]
fn batch_projection_reproduces_training_scores() {
    let x = random(35, 3, 8);
    let model = fit_kpca(&x, 2, KernelConfig::Rbf { width: 5.0 }).unwrap();
    let scores = model.training_scores().unwrap();
    for i in 0..35 {
        let t = model.project(x.row(i)).unwrap();
        assert!((t[0] - scores[(i, 0)]).abs() < 1e-8 && (t[1] - scores[(i, 1)]).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rbf_gram_is_psd(seed in 0u64..10_000, n in 2usize..30, width in 0.1f64..100.0) {
        let x = random(n, 3, seed);
        let k = KernelConfig::Rbf { width }.gram(&x);
        let eig = sym_eig(&k).unwrap();
        prop_assert!(eig.values.iter().all(|&v| v >= -1e-8));
    }

    #[test]
    fn pca_error_non_increasing(seed in 0u64..10_000) {
        let x = random(30, 5, seed);
        let (z, _) = standardize(&x).unwrap();
        let errs: Vec<f64> = (1..=5)
            .map(|a| fit_pca(&x, a).unwrap().reconstruction_error(&z).unwrap())
            .collect();
        prop_assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }
}
