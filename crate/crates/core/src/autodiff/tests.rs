use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const FD_STEP: f64 = 1e-6;

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Central finite differences of a scalar function of one matrix.
fn finite_difference(f: &dyn Fn(&Matrix) -> f64, x: &Matrix) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), x.cols());
    for k in 0..x.as_slice().len() {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus.as_mut_slice()[k] += FD_STEP;
        minus.as_mut_slice()[k] -= FD_STEP;
        g.as_mut_slice()[k] = (f(&plus) - f(&minus)) / (2.0 * FD_STEP);
    }
    g
}

fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).unwrap().frobenius() / b.frobenius().max(1e-12)
}

/// Builds `L = ‖f(x) − target‖²` on a fresh tape and compares reverse-mode
/// gradients to finite differences.
fn check_primitive(build: &dyn Fn(&mut Tape, Var) -> Result<Var>, x: &Matrix, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = {
        let mut t = Tape::new();
        let v = t.constant(x.clone());
        let out = build(&mut t, v).unwrap();
        t.value(out).clone()
    };
    let target = random(probe.rows(), probe.cols(), &mut rng);
    let loss = |t: &mut Tape, v: Var| -> Var {
        let out = build(t, v).unwrap();
        let c = t.constant(target.clone());
        let d = t.sub(out, c).unwrap();
        t.frobenius_sq(d)
    };
    let mut tape = Tape::new();
    let xv = tape.parameter(x.clone());
    let l = loss(&mut tape, xv);
    let analytic = tape.backward(l).unwrap().wrt(xv);
    let f = |m: &Matrix| {
        let mut t = Tape::new();
        let v = t.constant(m.clone());
        let l = loss(&mut t, v);
        t.value(l)[(0, 0)]
    };
    relative_error(&analytic, &finite_difference(&f, x))
}

#[test]
fn frobenius_of_scalar() {
    let mut t = Tape::new();
    let x = t.parameter(Matrix::scalar(3.0));
    let l = t.frobenius_sq(x);
    assert_eq!(t.backward(l).unwrap().wrt(x)[(0, 0)], 6.0);
}

#[test]
fn relu_kink_sides() {
    let mut t = Tape::new();
    let x = t.parameter(Matrix::row_vector(&[-1.0, 2.0]));
    let r = t.relu(x);
    // sum via (r · 1)
    let ones = t.constant(Matrix::filled(2, 1, 1.0));
    let s = t.matmul(r, ones).unwrap();
    let g = t.backward(s).unwrap().wrt(x);
    assert_eq!(g.as_slice(), &[0.0, 1.0]);

    let mut t = Tape::new();
    let x = t.parameter(Matrix::scalar(0.0));
    let r = t.relu(x);
    assert_eq!(t.backward(r).unwrap().wrt(x)[(0, 0)], 0.0);
}

#[test]
fn every_primitive_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let w = random(4, 3, &mut rng);
    let row = random(1, 3, &mut rng);
    let x43 = random(4, 3, &mut rng);
    // keep ReLU inputs away from the kink
    let relu_in = x43.map(|v| if v.abs() < 1e-3 { v + 0.01 } else { v });
    let sq = random(4, 4, &mut rng).add(&Matrix::identity(4).scale(3.0)).unwrap();
    let batch = random(8, 3, &mut rng);

    type Build = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;
    let cases: Vec<(&str, Matrix, Build)> = vec![
        ("matmul_left", x43.clone(), {
            let w = w.transpose();
            Box::new(move |t, v| {
                let c = t.constant(w.clone());
                t.matmul(v, c)
            })
        }),
        ("matmul_right", x43.clone(), {
            let w = w.clone();
            Box::new(move |t, v| {
                let c = t.constant(w.transpose());
                t.matmul(c, v)
            })
        }),
        ("add_sub", x43.clone(), {
            let w = w.clone();
            Box::new(move |t, v| {
                let c = t.constant(w.clone());
                let s = t.add(v, c)?;
                t.sub(s, v).and_then(|d| t.add(d, v))
            })
        }),
        ("scalar_mul_transpose", x43.clone(), Box::new(|t, v| {
            let s = t.scalar_mul(v, -2.5);
            Ok(t.transpose(s))
        })),
        ("relu", relu_in, Box::new(|t, v| Ok(t.relu(v)))),
        ("batch_norm", batch, Box::new(|t, v| t.batch_norm_fixed(v, 1e-8).map(|r| r.0))),
        ("matrix_inverse", sq.clone(), Box::new(|t, v| t.matrix_inverse(v))),
        ("upper_triangular", sq, Box::new(|t, v| Ok(t.upper_triangular(v)))),
        ("slice_columns", x43.clone(), Box::new(|t, v| t.slice_columns(v, 1, 3))),
        ("frobenius_sq", x43.clone(), Box::new(|t, v| Ok(t.frobenius_sq(v)))),
        ("add_row_data", x43.clone(), {
            let row = row.clone();
            Box::new(move |t, v| {
                let b = t.constant(row.clone());
                t.add_row(v, b)
            })
        }),
        ("add_row_bias", row.clone(), {
            let x = x43.clone();
            Box::new(move |t, v| {
                let c = t.constant(x.clone());
                t.add_row(c, v)
            })
        }),
        ("mul_row_data", x43.clone(), {
            let row = row.clone();
            Box::new(move |t, v| {
                let s = t.constant(row.clone());
                t.mul_row(v, s)
            })
        }),
        ("mul_row_scale", row, {
            let x = x43;
            Box::new(move |t, v| {
                let c = t.constant(x.clone());
                t.mul_row(c, v)
            })
        }),
    ];
    for (i, (name, x, build)) in cases.iter().enumerate() {
        let err = check_primitive(build.as_ref(), x, i as u64);
        assert!(err < 1e-5, "{name}: relative error {err:e}");
    }
}

#[test]
fn inverse_backward_random_4x4() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let a = random(4, 4, &mut rng).add(&Matrix::identity(4).scale(2.0)).unwrap();
    let err = check_primitive(&|t, v| t.matrix_inverse(v), &a, 5);
    assert!(err < 1e-5, "relative error {err:e}");
}

#[test]
fn composite_relu_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x = random(6, 4, &mut rng);
    let mut w = random(4, 3, &mut rng);
    // nudge W until every pre-activation is at least 1e-3 away from the kink
    while x.matmul(&w).unwrap().as_slice().iter().any(|v| v.abs() < 1e-3) {
        w = random(4, 3, &mut rng);
    }
    let f = |w: &Matrix| {
        let mut t = Tape::new();
        let xv = t.constant(x.clone());
        let wv = t.constant(w.clone());
        let h = t.matmul(xv, wv).unwrap();
        let r = t.relu(h);
        let l = t.frobenius_sq(r);
        t.value(l)[(0, 0)]
    };
    let mut t = Tape::new();
    let xv = t.constant(x.clone());
    let wv = t.parameter(w.clone());
    let h = t.matmul(xv, wv).unwrap();
    let r = t.relu(h);
    let l = t.frobenius_sq(r);
    let g = t.backward(l).unwrap().wrt(wv);
    assert!(relative_error(&g, &finite_difference(&f, &w)) < 1e-5);
}

#[test]
fn linear_trace_form_gives_exact_gradient() {
    // trace(WᵀC) = sum of W ⊙ C; build it as frobenius terms would not be
    // linear, so use ‖W + C‖² − ‖W‖² − ‖C‖² = 2·trace(WᵀC) and halve.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random(3, 2, &mut rng);
    let mut t = Tape::new();
    let w = t.parameter(random(3, 2, &mut rng));
    let cv = t.constant(c.clone());
    let sum = t.add(w, cv).unwrap();
    let a = t.frobenius_sq(sum);
    let b = t.frobenius_sq(w);
    let cc = t.frobenius_sq(cv);
    let d = t.sub(a, b).unwrap();
    let d = t.sub(d, cc).unwrap();
    let tr = t.scalar_mul(d, 0.5);
    let g = t.backward(tr).unwrap().wrt(w);
    assert!(g.sub(&c).unwrap().max_abs() < 1e-14);
}

#[test]
fn disconnected_parameter_has_zero_gradient() {
    let mut t = Tape::new();
    let used = t.parameter(Matrix::scalar(2.0));
    let unused = t.parameter(Matrix::from_fn(2, 2, |i, j| (i + j) as f64));
    let l = t.frobenius_sq(used);
    let grads = t.backward(l).unwrap();
    assert!(grads.get(unused).is_none());
    assert_eq!(grads.wrt(unused), Matrix::zeros(2, 2));
}

#[test]
fn fan_out_accumulates() {
    // y = x·x + 3x + x  (x consumed three times)  =>  dy/dx = 2x + 4
    let mut t = Tape::new();
    let x = t.parameter(Matrix::scalar(1.5));
    let sq = t.matmul(x, x).unwrap();
    let tx = t.scalar_mul(x, 3.0);
    let s = t.add(sq, tx).unwrap();
    let y = t.add(s, x).unwrap();
    assert_eq!(t.backward(y).unwrap().wrt(x)[(0, 0)], 2.0 * 1.5 + 4.0);
}

#[test]
fn non_scalar_loss_rejected() {
    let mut t = Tape::new();
    let x = t.parameter(Matrix::zeros(2, 2));
    assert!(matches!(t.backward(x), Err(Error::InvalidShape(_))));
}

#[test]
fn repeated_backward_is_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut t = Tape::new();
    let x = t.constant(random(5, 3, &mut rng));
    let w = t.parameter(random(3, 3, &mut rng));
    let h = t.matmul(x, w).unwrap();
    let (bn, _) = t.batch_norm_fixed(h, 1e-8).unwrap();
    let l = t.frobenius_sq(bn);
    let g1 = t.backward(l).unwrap().wrt(w);
    let g2 = t.backward(l).unwrap().wrt(w);
    assert_eq!(g1, g2);
}

#[test]
fn singular_inverse_node() {
    let mut t = Tape::new();
    let a = t.parameter(Matrix::zeros(2, 2));
    assert!(matches!(t.matrix_inverse(a), Err(Error::SingularMatrix(_))));
    let b = t.parameter(Matrix::zeros(2, 3));
    assert!(matches!(t.matmul(b, b), Err(Error::InvalidShape(_))));
}
