//! Attention alignment between triplet embeddings and token embeddings.
//!
//! The forward pass projects a stack of structural embeddings (typically the
//! three rows for head, relation, tail) into the token space, attends over
//! the instruction tokens, and refines the result with a residual
//! feed-forward block:
//!
//! ```text
//! V  = E·Wg + bg            projection into token space
//! S  = V·Xᵀ                 raw attention scores
//! A  = softmax_rows(S)      one distribution over tokens per row
//! Ẑ  = V + A·X              attention readout with residual
//! N  = layernorm_rows(Ẑ)    learnable gain and bias, ε = 1e-5
//! Z  = Ẑ + relu?(N·W1)·W2   feed-forward with residual
//! ```
//!
//! Score scaling by `1/√d_model` and the ReLU between the two feed-forward
//! layers are both off by default and opt-in through [`AlignConfig`].
//!
//! The backward pass is exact (hand-derived, no autodiff) and is validated
//! against central finite differences by [`gradient_check`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mat::Mat;
use crate::num;

const LAYERNORM_EPS: f64 = 1e-5;

/// Dimensions and optional behaviors of the alignment block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Width of the structural embedding rows (d).
    pub embed_dim: usize,
    /// Width of the token embeddings (d_model).
    pub model_dim: usize,
    /// Width of the feed-forward hidden layer.
    pub hidden_dim: usize,
    /// Divide attention scores by √d_model before the softmax.
    pub scale_attention: bool,
    /// Apply ReLU between the two feed-forward layers.
    pub relu_ffn: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            embed_dim: 128,
            model_dim: 256,
            hidden_dim: 512,
            scale_attention: false,
            relu_ffn: false,
        }
    }
}

/// Learnable parameters of the alignment block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    /// Projection weights, embed_dim × model_dim.
    pub wg: Mat,
    /// Projection bias, length model_dim.
    pub bg: Vec<f64>,
    /// Layernorm gain, length model_dim.
    pub ln_gain: Vec<f64>,
    /// Layernorm bias, length model_dim.
    pub ln_bias: Vec<f64>,
    /// First feed-forward weights, model_dim × hidden_dim.
    pub w1: Mat,
    /// Second feed-forward weights, hidden_dim × model_dim.
    pub w2: Mat,
}

impl AlignParams {
    /// Seeded initialization: uniform Xavier-style weights, identity
    /// layernorm (gain 1, bias 0).
    pub fn init(cfg: &AlignConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let wg = xavier(&mut rng, cfg.embed_dim, cfg.model_dim);
        let w1 = xavier(&mut rng, cfg.model_dim, cfg.hidden_dim);
        let w2 = xavier(&mut rng, cfg.hidden_dim, cfg.model_dim);
        AlignParams {
            wg,
            bg: vec![0.0; cfg.model_dim],
            ln_gain: vec![1.0; cfg.model_dim],
            ln_bias: vec![0.0; cfg.model_dim],
            w1,
            w2,
        }
    }

    /// Fully randomized parameters, including gain and bias. Used by the
    /// gradient check so every backward path sees non-identity values.
    pub fn random(cfg: &AlignConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = |rows: usize, cols: usize| {
            Mat::from_vec(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.gen_range(-0.8..0.8)).collect(),
            )
        };
        let wg = dense(cfg.embed_dim, cfg.model_dim);
        let w1 = dense(cfg.model_dim, cfg.hidden_dim);
        let w2 = dense(cfg.hidden_dim, cfg.model_dim);
        let mut vector = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(lo..hi)).collect()
        };
        AlignParams {
            wg,
            bg: vector(cfg.model_dim, -0.5, 0.5),
            ln_gain: vector(cfg.model_dim, 0.5, 1.5),
            ln_bias: vector(cfg.model_dim, -0.5, 0.5),
            w1,
            w2,
        }
    }

    fn validate(&self, cfg: &AlignConfig) -> Result<(), AlignError> {
        check_shape("wg", &self.wg, cfg.embed_dim, cfg.model_dim)?;
        check_shape("w1", &self.w1, cfg.model_dim, cfg.hidden_dim)?;
        check_shape("w2", &self.w2, cfg.hidden_dim, cfg.model_dim)?;
        for (name, v) in [
            ("bg", &self.bg),
            ("ln_gain", &self.ln_gain),
            ("ln_bias", &self.ln_bias),
        ] {
            if v.len() != cfg.model_dim {
                return Err(AlignError::Shape(format!(
                    "{name} has length {}, expected {}",
                    v.len(),
                    cfg.model_dim
                )));
            }
        }
        Ok(())
    }
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let bound = num::sqrt(6.0 / (rows + cols) as f64);
    Mat::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect(),
    )
}

fn check_shape(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<(), AlignError> {
    if m.rows() != rows || m.cols() != cols {
        return Err(AlignError::Shape(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlignError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("token matrix must have at least one row")]
    EmptyTokens,
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

/// Cached forward activations; the backward pass reuses them.
#[derive(Debug, Clone)]
pub struct AlignForward {
    /// Projected rows, m × model_dim.
    pub v: Mat,
    /// Attention weights (post-softmax), m × tokens.
    pub attention: Mat,
    /// Attention readout with residual, m × model_dim.
    pub z_hat: Mat,
    /// Layernormed readout, m × model_dim.
    pub normed: Mat,
    /// Feed-forward pre-activation, m × hidden_dim.
    pub pre_activation: Mat,
    /// Feed-forward hidden layer (post-ReLU when enabled), m × hidden_dim.
    pub hidden: Mat,
    /// Final output, m × model_dim.
    pub z: Mat,
}

/// Gradients with respect to every input and parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignGradients {
    /// m × embed_dim.
    pub d_entities: Mat,
    /// tokens × model_dim.
    pub d_tokens: Mat,
    pub d_wg: Mat,
    pub d_bg: Vec<f64>,
    pub d_ln_gain: Vec<f64>,
    pub d_ln_bias: Vec<f64>,
    pub d_w1: Mat,
    pub d_w2: Mat,
}

/// Run the alignment block forward.
///
/// `entities` is m × embed_dim (one row per structural embedding, m = 3 for
/// a single triplet) and `tokens` is n × model_dim with n ≥ 1.
pub fn forward(
    cfg: &AlignConfig,
    params: &AlignParams,
    entities: &Mat,
    tokens: &Mat,
) -> Result<AlignForward, AlignError> {
    params.validate(cfg)?;
    if tokens.rows() == 0 {
        return Err(AlignError::EmptyTokens);
    }
    if entities.cols() != cfg.embed_dim {
        return Err(AlignError::Shape(format!(
            "entity rows have width {}, expected {}",
            entities.cols(),
            cfg.embed_dim
        )));
    }
    if tokens.cols() != cfg.model_dim {
        return Err(AlignError::Shape(format!(
            "token rows have width {}, expected {}",
            tokens.cols(),
            cfg.model_dim
        )));
    }

    let mut v = entities.matmul(&params.wg);
    for i in 0..v.rows() {
        let row = v.row_mut(i);
        for (x, b) in row.iter_mut().zip(&params.bg) {
            *x += b;
        }
    }

    let mut scores = v.matmul_transpose(tokens);
    if cfg.scale_attention {
        scores.scale(1.0 / num::sqrt(cfg.model_dim as f64));
    }
    let attention = softmax_rows(&scores);

    let mut z_hat = attention.matmul(tokens);
    z_hat.add_assign(&v);

    let normed = layernorm_rows(&z_hat, &params.ln_gain, &params.ln_bias);

    let pre_activation = normed.matmul(&params.w1);
    let hidden = if cfg.relu_ffn {
        let mut h = pre_activation.clone();
        for x in h.data_mut() {
            if *x < 0.0 {
                *x = 0.0;
            }
        }
        h
    } else {
        pre_activation.clone()
    };

    let mut z = hidden.matmul(&params.w2);
    z.add_assign(&z_hat);

    if !z.is_finite() {
        return Err(AlignError::NonFinite("output"));
    }
    Ok(AlignForward {
        v,
        attention,
        z_hat,
        normed,
        pre_activation,
        hidden,
        z,
    })
}

/// Backpropagate an upstream gradient `d_z` (same shape as the output)
/// through the block. `entities` and `tokens` must be the forward inputs and
/// `fwd` the matching forward cache.
pub fn backward(
    cfg: &AlignConfig,
    params: &AlignParams,
    entities: &Mat,
    tokens: &Mat,
    fwd: &AlignForward,
    d_z: &Mat,
) -> Result<AlignGradients, AlignError> {
    if d_z.rows() != fwd.z.rows() || d_z.cols() != fwd.z.cols() {
        return Err(AlignError::Shape(format!(
            "upstream gradient is {}x{}, expected {}x{}",
            d_z.rows(),
            d_z.cols(),
            fwd.z.rows(),
            fwd.z.cols()
        )));
    }

    // Residual: Z = Ẑ + F, so both branches receive d_z unchanged.
    let mut d_z_hat = d_z.clone();
    let d_f = d_z;

    let d_w2 = fwd.hidden.transpose_matmul(d_f);
    let d_h = d_f.matmul_transpose(&params.w2);
    let d_pre = if cfg.relu_ffn {
        let mut g = d_h;
        for (g, p) in g.data_mut().iter_mut().zip(fwd.pre_activation.data()) {
            if *p <= 0.0 {
                *g = 0.0;
            }
        }
        g
    } else {
        d_h
    };
    let d_w1 = fwd.normed.transpose_matmul(&d_pre);
    let d_n = d_pre.matmul_transpose(&params.w1);

    let mut d_ln_gain = vec![0.0; cfg.model_dim];
    let mut d_ln_bias = vec![0.0; cfg.model_dim];
    let d_from_norm = layernorm_backward(
        &fwd.z_hat,
        &params.ln_gain,
        &d_n,
        &mut d_ln_gain,
        &mut d_ln_bias,
    );
    d_z_hat.add_assign(&d_from_norm);

    // Ẑ = V + A·X.
    let mut d_v = d_z_hat.clone();
    let d_a = d_z_hat.matmul_transpose(tokens);
    let mut d_x = fwd.attention.transpose_matmul(&d_z_hat);

    let mut d_s = softmax_backward_rows(&fwd.attention, &d_a);
    if cfg.scale_attention {
        d_s.scale(1.0 / num::sqrt(cfg.model_dim as f64));
    }

    // S = V·Xᵀ.
    d_v.add_assign(&d_s.matmul(tokens));
    d_x.add_assign(&d_s.transpose_matmul(&fwd.v));

    // V = E·Wg + bg.
    let d_entities = d_v.matmul_transpose(&params.wg);
    let d_wg = entities.transpose_matmul(&d_v);
    let mut d_bg = vec![0.0; cfg.model_dim];
    for i in 0..d_v.rows() {
        for (acc, g) in d_bg.iter_mut().zip(d_v.row(i)) {
            *acc += g;
        }
    }

    Ok(AlignGradients {
        d_entities,
        d_tokens: d_x,
        d_wg,
        d_bg,
        d_ln_gain,
        d_ln_bias,
        d_w1,
        d_w2,
    })
}

/// Scalar probe loss `L = Σ Z ∘ weights` and its exact gradients. The probe
/// exposes every output coordinate, which is what the finite-difference
/// check needs.
pub fn loss_and_gradients(
    cfg: &AlignConfig,
    params: &AlignParams,
    entities: &Mat,
    tokens: &Mat,
    weights: &Mat,
) -> Result<(f64, AlignGradients), AlignError> {
    let fwd = forward(cfg, params, entities, tokens)?;
    if weights.rows() != fwd.z.rows() || weights.cols() != fwd.z.cols() {
        return Err(AlignError::Shape(format!(
            "probe weights are {}x{}, expected {}x{}",
            weights.rows(),
            weights.cols(),
            fwd.z.rows(),
            fwd.z.cols()
        )));
    }
    let loss = num::dot(fwd.z.data(), weights.data());
    let grads = backward(cfg, params, entities, tokens, &fwd, weights)?;
    Ok((loss, grads))
}

fn softmax_rows(scores: &Mat) -> Mat {
    let mut out = scores.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for x in row.iter_mut() {
            *x = num::exp(*x - max);
            sum += *x;
        }
        for x in row.iter_mut() {
            *x /= sum;
        }
    }
    out
}

/// Jacobian-vector product of a row softmax:
/// `dS_i = A_i ∘ (dA_i − ⟨dA_i, A_i⟩)`.
fn softmax_backward_rows(attention: &Mat, d_attention: &Mat) -> Mat {
    let mut out = Mat::zeros(attention.rows(), attention.cols());
    for i in 0..attention.rows() {
        let a = attention.row(i);
        let da = d_attention.row(i);
        let inner = num::dot(a, da);
        let row = out.row_mut(i);
        for j in 0..a.len() {
            row[j] = a[j] * (da[j] - inner);
        }
    }
    out
}

/// Row layernorm with population variance: `(x − μ)/√(σ² + ε) ∘ gain + bias`.
fn layernorm_rows(input: &Mat, gain: &[f64], bias: &[f64]) -> Mat {
    let mut out = Mat::zeros(input.rows(), input.cols());
    let n = input.cols() as f64;
    for i in 0..input.rows() {
        let x = input.row(i);
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / num::sqrt(var + LAYERNORM_EPS);
        let row = out.row_mut(i);
        for j in 0..x.len() {
            row[j] = (x[j] - mean) * inv * gain[j] + bias[j];
        }
    }
    out
}

/// Exact row layernorm backward. Accumulates gain and bias gradients and
/// returns the gradient with respect to the input:
/// `dx = inv · (dx̂ − mean(dx̂) − x̂ · mean(dx̂ ∘ x̂))` with `dx̂ = dout ∘ gain`.
fn layernorm_backward(
    input: &Mat,
    gain: &[f64],
    d_out: &Mat,
    d_gain: &mut [f64],
    d_bias: &mut [f64],
) -> Mat {
    let mut d_input = Mat::zeros(input.rows(), input.cols());
    let n = input.cols() as f64;
    for i in 0..input.rows() {
        let x = input.row(i);
        let dout = d_out.row(i);
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / num::sqrt(var + LAYERNORM_EPS);

        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        let mut xhat = vec![0.0; x.len()];
        let mut dxhat = vec![0.0; x.len()];
        for j in 0..x.len() {
            xhat[j] = (x[j] - mean) * inv;
            dxhat[j] = dout[j] * gain[j];
            d_gain[j] += dout[j] * xhat[j];
            d_bias[j] += dout[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xhat[j];
        }
        mean_dxhat /= n;
        mean_dxhat_xhat /= n;

        let row = d_input.row_mut(i);
        for j in 0..x.len() {
            row[j] = inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
        }
    }
    d_input
}

/// Outcome of a randomized finite-difference comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Largest relative error across all checked scalars and instances.
    pub max_rel_err: f64,
    /// Parameter holding the worst scalar, e.g. `"w1[2,3]"`.
    pub worst_parameter: String,
    /// Total scalars compared.
    pub checked: usize,
    pub instances: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance
    }
}

/// Compare the analytic gradients against central finite differences on
/// `instances` randomized problems, covering the inputs and every
/// parameter. Relative error uses `|a − n| / max(|a|, |n|, 1)`.
pub fn gradient_check(
    cfg: &AlignConfig,
    token_count: usize,
    instances: usize,
    seed: u64,
) -> Result<GradCheckReport, AlignError> {
    const EPS: f64 = 1e-5;
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_parameter: String::new(),
        checked: 0,
        instances,
    };

    for instance in 0..instances {
        let instance_seed = seed.wrapping_add(instance as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(instance_seed ^ 0x9e37_79b9);
        let mut dense = |rows: usize, cols: usize| {
            Mat::from_vec(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        };
        let entities = dense(3, cfg.embed_dim);
        let tokens = dense(token_count, cfg.model_dim);
        let weights = dense(3, cfg.model_dim);
        let params = AlignParams::random(cfg, instance_seed);

        let (_, analytic) = loss_and_gradients(cfg, &params, &entities, &tokens, &weights)?;

        let probe = |label: &str,
                     write: &mut dyn FnMut(f64) -> (AlignParams, Mat, Mat),
                     base: f64,
                     analytic_g: f64,
                     report: &mut GradCheckReport|
         -> Result<(), AlignError> {
            let (p_plus, e_plus, x_plus) = write(base + EPS);
            let (l_plus, _) = loss_and_gradients(cfg, &p_plus, &e_plus, &x_plus, &weights)?;
            let (p_minus, e_minus, x_minus) = write(base - EPS);
            let (l_minus, _) = loss_and_gradients(cfg, &p_minus, &e_minus, &x_minus, &weights)?;
            let numeric = (l_plus - l_minus) / (2.0 * EPS);
            let rel = (analytic_g - numeric).abs() / analytic_g.abs().max(numeric.abs()).max(1.0);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_parameter = String::from(label);
            }
            Ok(())
        };

        // Matrices: inputs and weight parameters.
        let mat_targets: [(&str, &Mat, &Mat); 5] = [
            ("entities", &entities, &analytic.d_entities),
            ("tokens", &tokens, &analytic.d_tokens),
            ("wg", &params.wg, &analytic.d_wg),
            ("w1", &params.w1, &analytic.d_w1),
            ("w2", &params.w2, &analytic.d_w2),
        ];
        for (name, target, grads) in mat_targets {
            for r in 0..target.rows() {
                for c in 0..target.cols() {
                    let base = target.get(r, c);
                    let mut write = |value: f64| {
                        let mut p = params.clone();
                        let mut e = entities.clone();
                        let mut x = tokens.clone();
                        match name {
                            "entities" => e.set(r, c, value),
                            "tokens" => x.set(r, c, value),
                            "wg" => p.wg.set(r, c, value),
                            "w1" => p.w1.set(r, c, value),
                            "w2" => p.w2.set(r, c, value),
                            _ => unreachable!(),
                        }
                        (p, e, x)
                    };
                    let label = format!("{name}[{r},{c}]");
                    probe(&label, &mut write, base, grads.get(r, c), &mut report)?;
                }
            }
        }

        // Vectors: projection bias and layernorm parameters.
        let vec_targets: [(&str, &Vec<f64>, &Vec<f64>); 3] = [
            ("bg", &params.bg, &analytic.d_bg),
            ("ln_gain", &params.ln_gain, &analytic.d_ln_gain),
            ("ln_bias", &params.ln_bias, &analytic.d_ln_bias),
        ];
        for (name, target, grads) in vec_targets {
            for j in 0..target.len() {
                let base = target[j];
                let mut write = |value: f64| {
                    let mut p = params.clone();
                    match name {
                        "bg" => p.bg[j] = value,
                        "ln_gain" => p.ln_gain[j] = value,
                        "ln_bias" => p.ln_bias[j] = value,
                        _ => unreachable!(),
                    }
                    (p, entities.clone(), tokens.clone())
                };
                let label = format!("{name}[{j}]");
                probe(&label, &mut write, base, grads[j], &mut report)?;
            }
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> AlignConfig {
        AlignConfig {
            embed_dim: 4,
            model_dim: 5,
            hidden_dim: 3,
            scale_attention: false,
            relu_ffn: false,
        }
    }

    #[test]
    fn forward_shapes() {
        let cfg = small_cfg();
        let params = AlignParams::init(&cfg, 0);
        let entities = Mat::zeros(3, 4);
        let tokens = Mat::from_vec(2, 5, vec![0.1; 10]);
        let fwd = forward(&cfg, &params, &entities, &tokens).unwrap();
        assert_eq!((fwd.v.rows(), fwd.v.cols()), (3, 5));
        assert_eq!((fwd.attention.rows(), fwd.attention.cols()), (3, 2));
        assert_eq!((fwd.z.rows(), fwd.z.cols()), (3, 5));
    }

    #[test]
    fn attention_rows_are_distributions() {
        let cfg = small_cfg();
        let params = AlignParams::random(&cfg, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let entities = Mat::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let tokens = Mat::from_vec(6, 5, (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let fwd = forward(&cfg, &params, &entities, &tokens).unwrap();
        for i in 0..3 {
            let row = fwd.attention.row(i);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|p| *p >= 0.0));
        }
    }

    #[test]
    fn zero_ffn_weights_leave_readout_unchanged() {
        let cfg = small_cfg();
        let mut params = AlignParams::random(&cfg, 3);
        params.w2 = Mat::zeros(cfg.hidden_dim, cfg.model_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let entities = Mat::from_vec(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let tokens = Mat::from_vec(4, 5, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let fwd = forward(&cfg, &params, &entities, &tokens).unwrap();
        assert_eq!(fwd.z, fwd.z_hat);
    }

    #[test]
    fn layernorm_standardizes_rows() {
        let input = Mat::from_vec(2, 4, vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.0, 1.0, 6.0]);
        let out = layernorm_rows(&input, &[1.0; 4], &[0.0; 4]);
        for i in 0..2 {
            let row = out.row(i);
            let mean: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn empty_token_matrix_is_rejected() {
        let cfg = small_cfg();
        let params = AlignParams::init(&cfg, 0);
        let entities = Mat::zeros(3, 4);
        let tokens = Mat::zeros(0, 5);
        assert_eq!(
            forward(&cfg, &params, &entities, &tokens).unwrap_err(),
            AlignError::EmptyTokens
        );
    }

    #[test]
    fn mismatched_entity_width_is_rejected() {
        let cfg = small_cfg();
        let params = AlignParams::init(&cfg, 0);
        let entities = Mat::zeros(3, 7);
        let tokens = Mat::zeros(2, 5);
        assert!(matches!(
            forward(&cfg, &params, &entities, &tokens),
            Err(AlignError::Shape(_))
        ));
    }

    #[test]
    fn quick_gradient_check_default_flags() {
        let cfg = AlignConfig {
            embed_dim: 3,
            model_dim: 4,
            hidden_dim: 2,
            scale_attention: false,
            relu_ffn: false,
        };
        let report = gradient_check(&cfg, 3, 2, 77).unwrap();
        assert!(
            report.passes(1e-4),
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst_parameter
        );
    }

    #[test]
    fn quick_gradient_check_scaled_relu() {
        let cfg = AlignConfig {
            embed_dim: 3,
            model_dim: 4,
            hidden_dim: 2,
            scale_attention: true,
            relu_ffn: true,
        };
        let report = gradient_check(&cfg, 3, 2, 99).unwrap();
        assert!(
            report.passes(1e-4),
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst_parameter
        );
    }
}
