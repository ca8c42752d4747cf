use rand::Rng;

use super::ParamVector;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HiddenActivation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputActivation {
    #[default]
    Linear,
}

/// Dense feed-forward architecture. ReLU on hidden layers, identity on the output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: &[usize], output_dim: usize) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden_dims.contains(&0) {
            return Err(Error::config(format!(
                "MLP layer widths must be positive: {input_dim} -> {hidden_dims:?} -> {output_dim}"
            )));
        }
        Ok(Self {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            output_dim,
            hidden_activation: HiddenActivation::Relu,
            output_activation: OutputActivation::Linear,
        })
    }

    /// `(fan_in, fan_out)` for every layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_dims.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden_dims);
        widths.push(self.output_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layer_dims()
            .into_iter()
            .flat_map(|(i, o)| [(o, i), (o, 1)])
            .collect()
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        check_len("MLP parameter count", self.param_count(), params.len())?;
        if params.shapes() != self.shapes().as_slice() {
            return Err(Error::config("parameter shapes do not match MLP spec"));
        }
        Ok(())
    }

    /// Forward pass returning every layer's post-activation output, input first.
    fn trace(&self, params: &[f64], input: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_len("MLP input", self.input_dim, input.len())?;
        check_len("MLP parameter count", self.param_count(), params.len())?;
        let layers = self.layer_dims();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(input.to_vec());
        let mut offset = 0;
        for (l, &(n_in, n_out)) in layers.iter().enumerate() {
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let hidden = l + 1 < layers.len();
            let x = &acts[l];
            let y: Vec<f64> = (0..n_out)
                .map(|o| {
                    let z = w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(x)
                        .fold(b[o], |acc, (wi, xi)| acc + wi * xi);
                    if hidden && z <= 0.0 {
                        0.0
                    } else {
                        z
                    }
                })
                .collect();
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("MLP activations"));
            }
            acts.push(y);
        }
        Ok(acts)
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        let mut acts = self.trace(params, input)?;
        Ok(acts.pop().expect("at least one layer"))
    }

    /// Adds `scale · ∂(cotangentᵀ · output)/∂params` into `grad` and returns
    /// the forward output.
    pub fn backward(
        &self,
        params: &[f64],
        input: &[f64],
        cotangent: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        check_len("MLP cotangent", self.output_dim, cotangent.len())?;
        check_len("MLP gradient buffer", self.param_count(), grad.len())?;
        let acts = self.trace(params, input)?;
        let layers = self.layer_dims();

        let mut offsets = Vec::with_capacity(layers.len());
        let mut offset = 0;
        for &(n_in, n_out) in &layers {
            offsets.push(offset);
            offset += n_in * n_out + n_out;
        }

        let mut delta = cotangent.to_vec();
        for l in (0..layers.len()).rev() {
            let (n_in, n_out) = layers[l];
            let w_off = offsets[l];
            let b_off = w_off + n_in * n_out;
            let x = &acts[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let ds = d * scale;
                grad[b_off + o] += ds;
                let row = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += ds * xi;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &params[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (p, wi) in prev.iter_mut().zip(row) {
                    *p += wi * d;
                }
            }
            // ReLU subgradient is 0 at the kink.
            for (p, xi) in prev.iter_mut().zip(x) {
                if *xi <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        Ok(acts.into_iter().last().expect("at least one layer"))
    }
}

pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    spec.check_params(params)?;
    spec.forward(params.values(), input)
}

/// Gradient of a single output unit with respect to every parameter.
pub fn mlp_gradient(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    output_index: usize,
) -> Result<ParamVector> {
    spec.check_params(params)?;
    if output_index >= spec.output_dim {
        return Err(Error::OutOfRange {
            what: "MLP output",
            index: output_index,
            size: spec.output_dim,
        });
    }
    let mut cot = vec![0.0; spec.output_dim];
    cot[output_index] = 1.0;
    let mut grad = ParamVector::zeros(spec.shapes());
    spec.backward(params.values(), input, &cot, 1.0, grad.values_mut())?;
    Ok(grad)
}

/// Vector-Jacobian product: gradient of `cotangentᵀ · output`.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &ParamVector,
    input: &[f64],
    cotangent: &[f64],
) -> Result<ParamVector> {
    spec.check_params(params)?;
    let mut grad = ParamVector::zeros(spec.shapes());
    spec.backward(params.values(), input, cotangent, 1.0, grad.values_mut())?;
    Ok(grad)
}

/// Uniform in ±√(6/(fan_in+fan_out)) per weight matrix, zero biases.
pub fn glorot_init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> ParamVector {
    let mut values = Vec::with_capacity(spec.param_count());
    for (n_in, n_out) in spec.layer_dims() {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        values.extend((0..n_in * n_out).map(|_| rng.random_range(-limit..limit)));
        values.extend(std::iter::repeat_n(0.0, n_out));
    }
    ParamVector::new(values, spec.shapes()).expect("init produces matching finite values")
}

/// Spec plus its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Self {
        let params = glorot_init(&spec, rng);
        Self { spec, params }
    }

    pub fn zeroed(spec: MlpSpec) -> Self {
        let params = ParamVector::zeros(spec.shapes());
        Self { spec, params }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.spec.forward(self.params.values(), input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    /// Independent forward pass: explicit nested loops over a weight matrix
    /// rebuilt from the flat layout.
    fn naive_forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let mut off = 0;
        let layers = spec.layer_dims();
        for (l, (n_in, n_out)) in layers.iter().copied().enumerate() {
            let mut w = vec![vec![0.0; n_in]; n_out];
            for (o, row) in w.iter_mut().enumerate() {
                for (i, cell) in row.iter_mut().enumerate() {
                    *cell = params[off + o * n_in + i];
                }
            }
            off += n_in * n_out;
            let b = params[off..off + n_out].to_vec();
            off += n_out;
            let mut y = vec![0.0; n_out];
            for o in 0..n_out {
                let mut s = 0.0;
                for i in 0..n_in {
                    s += w[o][i] * x[i];
                }
                s += b[o];
                y[o] = if l + 1 < layers.len() { s.max(0.0) } else { s };
            }
            x = y;
        }
        x
    }

    #[test]
    fn zero_params_give_zero_output() {
        let spec = MlpSpec::new(3, &[4, 4], 2).unwrap();
        let params = ParamVector::zeros(spec.shapes());
        assert_eq!(mlp_forward(&spec, &params, &[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn one_by_one_affine() {
        let spec = MlpSpec::new(1, &[], 1).unwrap();
        let params = ParamVector::new(vec![2.0, 1.0], spec.shapes()).unwrap();
        assert_eq!(mlp_forward(&spec, &params, &[3.0]).unwrap(), vec![7.0]);
        let g = mlp_gradient(&spec, &params, &[3.0], 0).unwrap();
        assert_eq!(g.values(), &[3.0, 1.0]);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let spec = MlpSpec::new(2, &[3], 1).unwrap();
        let params = ParamVector::zeros(spec.shapes());
        assert!(mlp_forward(&spec, &params, &[1.0]).is_err());
        assert!(mlp_gradient(&spec, &params, &[1.0, 2.0], 1).is_err());
        let wrong = ParamVector::zeros(vec![(3, 2)]);
        assert!(mlp_forward(&spec, &wrong, &[1.0, 2.0]).is_err());
        assert!(MlpSpec::new(0, &[3], 1).is_err());
        assert!(MlpSpec::new(2, &[0], 1).is_err());
    }

    #[test]
    fn param_count_formula() {
        let spec = MlpSpec::new(3, &[32, 32], 3).unwrap();
        assert_eq!(spec.param_count(), 3 * 32 + 32 + 32 * 32 + 32 + 32 * 3 + 3);
        assert_eq!(glorot_init(&spec, &mut rng::from_seed(0)).len(), spec.param_count());
    }

    #[test]
    fn forward_matches_nested_loop_oracle() {
        let spec = MlpSpec::new(4, &[8, 8], 2).unwrap();
        let mut r = rng::from_seed(11);
        let params = glorot_init(&spec, &mut r);
        // biases are zero after init; perturb them so the oracle sees them
        let mut v = params.values().to_vec();
        for x in v.iter_mut() {
            *x += r.random_range(-0.1..0.1);
        }
        let params = params.with_values(v).unwrap();
        for _ in 0..100 {
            let input: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
            let got = mlp_forward(&spec, &params, &input).unwrap();
            let want = naive_forward(&spec, params.values(), &input);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn dead_relu_blocks_lower_gradients() {
        // every hidden pre-activation is negative: W1 = 0, b1 = -1
        let spec = MlpSpec::new(2, &[3], 1).unwrap();
        let mut v = vec![0.0; spec.param_count()];
        for b in &mut v[6..9] {
            *b = -1.0;
        }
        v[9..12].copy_from_slice(&[0.5, -0.3, 0.2]);
        v[12] = 0.7;
        let params = ParamVector::new(v, spec.shapes()).unwrap();
        let g = mlp_gradient(&spec, &params, &[1.0, -1.0], 0).unwrap();
        let g = g.values();
        assert!(g[..12].iter().all(|&x| x == 0.0));
        assert_eq!(g[12], 1.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let spec = MlpSpec::new(3, &[5], 2).unwrap();
        let mut r = rng::from_seed(5);
        let mut v = glorot_init(&spec, &mut r).into_values();
        for x in v.iter_mut() {
            *x += r.random_range(-0.2..0.2);
        }
        let params = ParamVector::new(v.clone(), spec.shapes()).unwrap();
        let input = [0.3, -1.2, 0.8];
        let h = 1e-5;
        for out in 0..2 {
            let g = mlp_gradient(&spec, &params, &input, out).unwrap();
            for k in 0..v.len() {
                let mut p = v.clone();
                p[k] += h;
                let fp = naive_forward(&spec, &p, &input)[out];
                p[k] -= 2.0 * h;
                let fm = naive_forward(&spec, &p, &input)[out];
                let fd = (fp - fm) / (2.0 * h);
                let a = g.values()[k];
                let scale = a.abs().max(fd.abs());
                if scale < 1e-6 {
                    assert!((a - fd).abs() < 1e-8);
                } else {
                    assert!((a - fd).abs() / scale < 1e-4, "param {k}: {a} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn backward_with_cotangent_is_linear_combination() {
        let spec = MlpSpec::new(2, &[4], 3).unwrap();
        let params = glorot_init(&spec, &mut rng::from_seed(2));
        let input = [0.4, -0.9];
        let c = [0.5, -2.0, 1.5];
        let vjp = mlp_backward(&spec, &params, &input, &c).unwrap();
        let mut combo = vec![0.0; spec.param_count()];
        for (k, ck) in c.iter().enumerate() {
            let g = mlp_gradient(&spec, &params, &input, k).unwrap();
            for (acc, gi) in combo.iter_mut().zip(g.values()) {
                *acc += ck * gi;
            }
        }
        for (a, b) in vjp.values().iter().zip(&combo) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
