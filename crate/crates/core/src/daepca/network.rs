use rand::Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::numerics::{invert, ColumnStats, Matrix};

use super::config::{LossWeights, NetworkConfig, Variant};

/// Half-width of the uniform initialization of `M₀`.
pub const M0_INIT_SCALE: f64 = 0.01;

/// Trainable tensors of the encoder, PCA module, inverse BN and decoder.
///
/// Everything lives in one flat list so the optimizer can walk it; the
/// layout is `[enc W, enc b]*, M₀, scale, shift, [dec W, dec b]*` with
/// weights stored `fan_in × fan_out` and biases as single rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    tensors: Vec<Matrix>,
    layers: usize,
}

fn layer_widths(cfg: &NetworkConfig) -> Vec<usize> {
    let mut w = vec![cfg.m];
    w.extend(cfg.hidden_widths());
    w.push(cfg.d);
    w
}

/// Shapes of every tensor, in layout order.
pub fn tensor_shapes(cfg: &NetworkConfig) -> Vec<(usize, usize)> {
    let widths = layer_widths(cfg);
    let mut shapes = Vec::new();
    for pair in widths.windows(2) {
        shapes.push((pair[0], pair[1]));
        shapes.push((1, pair[1]));
    }
    shapes.push((cfg.d, cfg.d));
    shapes.push((1, cfg.d));
    shapes.push((1, cfg.d));
    for pair in widths.windows(2).rev() {
        shapes.push((pair[1], pair[0]));
        shapes.push((1, pair[0]));
    }
    shapes
}

fn upper_mask(a: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| if j >= i { a[(i, j)] } else { 0.0 })
}

/// `P`: first `a` columns of `(I − S)(I + S)⁻¹` with `S = triu(M₀) − triu(M₀)ᵀ`.
pub fn cayley_projection(m0: &Matrix, a: usize) -> Result<Matrix> {
    if !m0.is_square() {
        return Err(Error::InvalidShape(format!(
            "Cayley parameter must be square, got {}x{}",
            m0.rows(),
            m0.cols()
        )));
    }
    let d = m0.rows();
    if a == 0 || a > d {
        return Err(Error::InvalidConfig(format!("a = {a} must lie in 1..={d}")));
    }
    let upper = upper_mask(m0);
    let s = upper.sub(&upper.transpose())?;
    let eye = Matrix::identity(d);
    let full = eye.sub(&s)?.matmul(&invert(&eye.add(&s)?)?)?;
    full.columns(0, a)
}

/// `‖PᵀP − I‖²_F`.
pub fn orthogonality_error(p: &Matrix) -> f64 {
    let gram = p.t_matmul(p).expect("PᵀP is always defined");
    gram.sub(&Matrix::identity(p.cols()))
        .expect("shapes agree")
        .frobenius_sq()
}

/// Nodes of one training-mode forward pass.
#[derive(Debug, Clone)]
pub struct TapeForward {
    /// Parameter nodes in layout order.
    pub params: Vec<Var>,
    pub phi: Var,
    pub phi_bar: Var,
    /// `None` when the PCA module is bypassed.
    pub projection: Option<Var>,
    pub t: Var,
    pub phi_bar_fs: Var,
    pub phi_fs: Var,
    pub x_hat: Var,
    /// Batch statistics used by the BN layer.
    pub bn: ColumnStats,
}

/// Loss nodes; the three terms are unweighted.
#[derive(Debug, Clone, Copy)]
pub struct TapeLoss {
    pub loss_x: Var,
    pub loss_phi: Var,
    pub omega_t: Var,
    pub total: Var,
}

impl Network {
    pub fn init<R: Rng>(cfg: &NetworkConfig, rng: &mut R) -> Network {
        let widths = layer_widths(cfg);
        let mut tensors = Vec::new();
        let dense = |tensors: &mut Vec<Matrix>, fan_in: usize, fan_out: usize, rng: &mut R| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            tensors.push(Matrix::from_fn(fan_in, fan_out, |_, _| {
                rng.gen_range(-limit..=limit)
            }));
            tensors.push(Matrix::zeros(1, fan_out));
        };
        for pair in widths.windows(2) {
            dense(&mut tensors, pair[0], pair[1], rng);
        }
        tensors.push(Matrix::from_fn(cfg.d, cfg.d, |_, _| {
            rng.gen_range(-M0_INIT_SCALE..=M0_INIT_SCALE)
        }));
        tensors.push(Matrix::filled(1, cfg.d, 1.0));
        tensors.push(Matrix::zeros(1, cfg.d));
        for pair in widths.windows(2).rev() {
            dense(&mut tensors, pair[1], pair[0], rng);
        }
        Network {
            tensors,
            layers: widths.len() - 1,
        }
    }

    pub fn from_tensors(cfg: &NetworkConfig, tensors: Vec<Matrix>) -> Result<Network> {
        let shapes = tensor_shapes(cfg);
        if tensors.len() != shapes.len() {
            return Err(Error::InvalidShape(format!(
                "network needs {} tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for (i, (t, s)) in tensors.iter().zip(&shapes).enumerate() {
            if t.shape() != *s {
                return Err(Error::InvalidShape(format!(
                    "tensor {i} is {}x{}, expected {}x{}",
                    t.rows(),
                    t.cols(),
                    s.0,
                    s.1
                )));
            }
        }
        Ok(Network {
            tensors,
            layers: layer_widths(cfg).len() - 1,
        })
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    /// Dense layers on each side of the feature layer.
    pub fn depth(&self) -> usize {
        self.layers
    }

    pub fn encoder_layer(&self, i: usize) -> (&Matrix, &Matrix) {
        (&self.tensors[2 * i], &self.tensors[2 * i + 1])
    }

    pub fn m0(&self) -> &Matrix {
        &self.tensors[2 * self.layers]
    }

    pub fn inverse_bn_scale(&self) -> &Matrix {
        &self.tensors[2 * self.layers + 1]
    }

    pub fn inverse_bn_shift(&self) -> &Matrix {
        &self.tensors[2 * self.layers + 2]
    }

    pub fn decoder_layer(&self, i: usize) -> (&Matrix, &Matrix) {
        let base = 2 * self.layers + 3;
        (&self.tensors[base + 2 * i], &self.tensors[base + 2 * i + 1])
    }

    /// Starts the inverse-BN layer as the exact inverse of `stats`.
    pub fn set_inverse_bn(&mut self, stats: &ColumnStats) {
        let k = 2 * self.layers;
        self.tensors[k + 1] = Matrix::row_vector(&stats.std);
        self.tensors[k + 2] = Matrix::row_vector(&stats.mean);
    }

    /// Encoder output `Φ` for standardized rows.
    pub fn encode(&self, z: &Matrix) -> Result<Matrix> {
        let mut h = z.clone();
        for i in 0..self.layers {
            let (w, b) = self.encoder_layer(i);
            h = h.matmul(w)?.add_row_broadcast(b.as_slice())?;
            if i + 1 < self.layers {
                h = h.map(|v| if v > 0.0 { v } else { 0.0 });
            }
        }
        Ok(h)
    }

    /// Inverse BN followed by the decoder.
    pub fn decode(&self, phi_bar_fs: &Matrix) -> Result<Matrix> {
        let (scale, shift) = (self.inverse_bn_scale(), self.inverse_bn_shift());
        let mut h = phi_bar_fs.clone();
        for i in 0..h.rows() {
            for ((v, &s), &c) in h.row_mut(i).iter_mut().zip(scale.as_slice()).zip(shift.as_slice())
            {
                *v = *v * s + c;
            }
        }
        for i in 0..self.layers {
            let (w, b) = self.decoder_layer(i);
            h = h.matmul(w)?.add_row_broadcast(b.as_slice())?;
            if i + 1 < self.layers {
                h = h.map(|v| if v > 0.0 { v } else { 0.0 });
            }
        }
        Ok(h)
    }

    /// Inference-mode pass with frozen BN statistics: returns `(T, X̂)`.
    pub fn forward_frozen(
        &self,
        z: &Matrix,
        bn: &ColumnStats,
        projection: Option<&Matrix>,
    ) -> Result<(Matrix, Matrix)> {
        let phi = self.encode(z)?;
        let mut phi_bar = phi.clone();
        for i in 0..phi.rows() {
            bn.apply_row(phi.row(i), phi_bar.row_mut(i));
        }
        let (t, fs) = match projection {
            Some(p) => {
                let t = phi_bar.matmul(p)?;
                let fs = t.matmul_t(p)?;
                (t, fs)
            }
            None => (phi_bar.clone(), phi_bar),
        };
        let x_hat = self.decode(&fs)?;
        Ok((t, x_hat))
    }

    /// Records a training-mode pass of standardized rows `z` on `tape`.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        z: &Matrix,
        cfg: &NetworkConfig,
        variant: Variant,
    ) -> Result<TapeForward> {
        let params: Vec<Var> = self.tensors.iter().map(|t| tape.parameter(t.clone())).collect();
        let layers = self.layers;
        let x = tape.constant(z.clone());

        let mut h = x;
        for i in 0..layers {
            h = tape.matmul(h, params[2 * i])?;
            h = tape.add_row(h, params[2 * i + 1])?;
            if i + 1 < layers {
                h = tape.relu(h);
            }
        }
        let phi = h;
        let (phi_bar, bn) = tape.batch_norm_fixed(phi, cfg.bn_epsilon)?;

        let m0 = params[2 * layers];
        let (projection, t, phi_bar_fs) = if variant.uses_pca() {
            let p = cayley_tape(tape, m0, cfg.a)?;
            let t = tape.matmul(phi_bar, p)?;
            let pt = tape.transpose(p);
            let fs = tape.matmul(t, pt)?;
            (Some(p), t, fs)
        } else {
            (None, phi_bar, phi_bar)
        };

        let scaled = tape.mul_row(phi_bar_fs, params[2 * layers + 1])?;
        let phi_fs = tape.add_row(scaled, params[2 * layers + 2])?;
        let base = 2 * layers + 3;
        let mut h = phi_fs;
        for i in 0..layers {
            h = tape.matmul(h, params[base + 2 * i])?;
            h = tape.add_row(h, params[base + 2 * i + 1])?;
            if i + 1 < layers {
                h = tape.relu(h);
            }
        }
        Ok(TapeForward {
            params,
            phi,
            phi_bar,
            projection,
            t,
            phi_bar_fs,
            phi_fs,
            x_hat: h,
            bn,
        })
    }
}

/// Cayley steps on the tape so gradients reach `M₀`.
pub fn cayley_tape(tape: &mut Tape, m0: Var, a: usize) -> Result<Var> {
    let d = tape.value(m0).rows();
    let upper = tape.upper_triangular(m0);
    let lower = tape.transpose(upper);
    let s = tape.sub(upper, lower)?;
    let eye = tape.constant(Matrix::identity(d));
    let minus = tape.sub(eye, s)?;
    let plus = tape.add(eye, s)?;
    let inv = tape.matrix_inverse(plus)?;
    let full = tape.matmul(minus, inv)?;
    tape.slice_columns(full, 0, a)
}

/// Builds the weighted loss for `variant` on top of a forward pass.
pub fn loss_tape(
    tape: &mut Tape,
    z: &Matrix,
    out: &TapeForward,
    weights: &LossWeights,
    variant: Variant,
) -> Result<TapeLoss> {
    let x = tape.constant(z.clone());
    let diff = tape.sub(x, out.x_hat)?;
    let loss_x = tape.frobenius_sq(diff);
    let fs_diff = tape.sub(out.phi_bar, out.phi_bar_fs)?;
    let loss_phi = tape.frobenius_sq(fs_diff);
    let t_sq = tape.frobenius_sq(out.t);
    let omega_t = tape.scalar_mul(t_sq, 1.0 / z.rows() as f64);

    let mut total = tape.scalar_mul(loss_x, weights.lambda1);
    if variant.uses_pca() {
        let term = tape.scalar_mul(loss_phi, weights.lambda2);
        total = tape.add(total, term)?;
    }
    if variant == Variant::DaePca2 {
        let term = tape.scalar_mul(omega_t, weights.lambda3);
        total = tape.add(total, term)?;
    }
    Ok(TapeLoss {
        loss_x,
        loss_phi,
        omega_t,
        total,
    })
}

/// Unweighted loss terms and the weighted total.
///
/// `omega_t` is `Σᵢ σ²(sⁱ) = ‖T‖²_F / N`, the summed feature variance (T has
/// zero column means because Φ̄ does).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub loss_x: f64,
    pub loss_phi: f64,
    pub omega_t: f64,
    pub total: f64,
}

/// Loss from already-computed network outputs.
pub fn loss_total(
    x: &Matrix,
    x_hat: &Matrix,
    phi_bar: &Matrix,
    phi_bar_fs: &Matrix,
    t: &Matrix,
    weights: &LossWeights,
    variant: Variant,
) -> Result<LossTerms> {
    let loss_x = x.sub(x_hat)?.frobenius_sq();
    let loss_phi = phi_bar.sub(phi_bar_fs)?.frobenius_sq();
    let omega_t = t.frobenius_sq() / t.rows() as f64;
    let mut total = weights.lambda1 * loss_x;
    if variant.uses_pca() {
        total += weights.lambda2 * loss_phi;
    }
    if variant == Variant::DaePca2 {
        total += weights.lambda3 * omega_t;
    }
    Ok(LossTerms {
        loss_x,
        loss_phi,
        omega_t,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(m: usize, d: usize, a: usize) -> NetworkConfig {
        let mut c = NetworkConfig::new(m, d, a);
        c.encoder_hidden = Some(vec![2 * m]);
        c
    }

    #[test]
    fn cayley_of_zero_is_identity() {
        let p = cayley_projection(&Matrix::zeros(5, 5), 3).unwrap();
        assert_eq!(p, Matrix::identity(5).columns(0, 3).unwrap());
    }

    #[test]
    fn cayley_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for scale in [0.01, 1.0, 5.0] {
            let m0 = Matrix::from_fn(8, 8, |_, _| rng.gen_range(-scale..scale));
            let p = cayley_projection(&m0, 5).unwrap();
            assert!(orthogonality_error(&p).sqrt() <= 1e-12);
        }
        // the lower triangle of M₀ is ignored
        let mut m0 = Matrix::from_fn(4, 4, |i, j| (i + 2 * j) as f64 * 0.1);
        let p1 = cayley_projection(&m0, 2).unwrap();
        m0.as_mut_slice()[3 * 4] = 42.0;
        assert_eq!(cayley_projection(&m0, 2).unwrap(), p1);
    }

    #[test]
    fn tape_matches_plain_cayley() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m0 = Matrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let mut tape = Tape::new();
        let v = tape.parameter(m0.clone());
        let p = cayley_tape(&mut tape, v, 4).unwrap();
        assert_eq!(tape.value(p), &cayley_projection(&m0, 4).unwrap());
    }

    #[test]
    fn shapes_follow_layout() {
        let cfg = small(3, 4, 2);
        let net = Network::init(&cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let shapes: Vec<_> = net.tensors().iter().map(|t| t.shape()).collect();
        assert_eq!(shapes, tensor_shapes(&cfg));
        assert_eq!(
            shapes,
            vec![(3, 6), (1, 6), (6, 4), (1, 4), (4, 4), (1, 4), (1, 4), (4, 6), (1, 6), (6, 3), (1, 3)]
        );
        assert!(net.m0().max_abs() <= M0_INIT_SCALE);
        let limit = (6.0 / 9.0f64).sqrt();
        assert!(net.encoder_layer(0).0.max_abs() <= limit);
        assert!(Network::from_tensors(&cfg, net.tensors()[1..].to_vec()).is_err());
    }

    #[test]
    fn batch_features_are_normalized() {
        let cfg = small(4, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = Network::init(&cfg, &mut rng);
        let z = Matrix::from_fn(40, 4, |_, _| rng.gen_range(-2.0..2.0));
        let mut tape = Tape::new();
        let out = net.forward_tape(&mut tape, &z, &cfg, Variant::DaePca2).unwrap();
        let phi_bar = tape.value(out.phi_bar);
        let stats = ColumnStats::of(phi_bar);
        assert!(stats.mean.iter().all(|m| m.abs() <= 1e-8));
        assert!(stats.std.iter().all(|s| (s - 1.0).abs() <= 1e-6));
        let t_means = tape.value(out.t).column_means();
        assert!(t_means.iter().all(|m| m.abs() <= 1e-8));
        let p = tape.value(out.projection.unwrap());
        assert!(orthogonality_error(p).sqrt() <= 1e-10);
    }

    #[test]
    fn complete_basis_keeps_features() {
        let mut cfg = small(3, 4, 4);
        cfg.bn_epsilon = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = Network::init(&cfg, &mut rng);
        let k = 2 * net.depth();
        net.tensors_mut()[k] = Matrix::zeros(4, 4);
        let z = Matrix::from_fn(20, 3, |_, _| rng.gen_range(-1.0..1.0));
        let mut tape = Tape::new();
        let out = net.forward_tape(&mut tape, &z, &cfg, Variant::DaePca1).unwrap();
        assert_eq!(tape.value(out.phi_bar), tape.value(out.phi_bar_fs));
        let w = cfg.weights(20);
        let loss = loss_tape(&mut tape, &z, &out, &w, Variant::DaePca1).unwrap();
        assert_eq!(tape.value(loss.loss_phi).to_scalar().unwrap(), 0.0);
    }

    #[test]
    fn frozen_pass_matches_tape() {
        let cfg = small(4, 5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Network::init(&cfg, &mut rng);
        let z = Matrix::from_fn(30, 4, |_, _| rng.gen_range(-1.0..1.0));
        net.set_inverse_bn(&ColumnStats::of(&net.encode(&z).unwrap()));
        for variant in [Variant::Dae, Variant::DaePca2] {
            let mut tape = Tape::new();
            let out = net.forward_tape(&mut tape, &z, &cfg, variant).unwrap();
            let p = out.projection.map(|p| tape.value(p).clone());
            let (t, x_hat) = net.forward_frozen(&z, &out.bn, p.as_ref()).unwrap();
            assert!(t.sub(tape.value(out.t)).unwrap().max_abs() < 1e-12);
            assert!(x_hat.sub(tape.value(out.x_hat)).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn hand_built_losses() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let x_hat = x.map(|v| v + 1.0);
        let phi = Matrix::from_rows(&[vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap();
        let t = Matrix::zeros(2, 1);
        let w = LossWeights {
            lambda1: 1.0 / 4.0,
            lambda2: 1.0,
            lambda3: 2.0,
        };
        let l1 = loss_total(&x, &x_hat, &phi, &phi, &t, &w, Variant::DaePca1).unwrap();
        // four unit errors, each weighted 1/4
        assert_eq!(l1.total, 1.0);
        let l2 = loss_total(&x, &x_hat, &phi, &phi, &t, &w, Variant::DaePca2).unwrap();
        assert_eq!(l2.total, l1.total);
        let perfect = loss_total(&x, &x, &phi, &phi, &t, &w, Variant::DaePca1).unwrap();
        assert_eq!(perfect.total, 0.0);
        let t1 = Matrix::filled(2, 1, 1.0);
        let l3 = loss_total(&x, &x, &phi, &phi, &t1, &w, Variant::DaePca2).unwrap();
        // ‖T‖² = 2 over N = 2 rows is unit summed variance, weighted 2
        assert_eq!(l3.omega_t, 1.0);
        assert_eq!(l3.total, 2.0);
    }
}
