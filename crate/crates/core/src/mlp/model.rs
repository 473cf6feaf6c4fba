use crate::error::{Error, Result};
use crate::tensor::{matmul, matmul_nt, matmul_tn, Matrix, RngStream};

use super::arch::ArchSpec;
use super::encoding::encode_batch;

/// Fully connected layer. `weights` is `fan_out × fan_in`: row `i` holds the
/// incoming edges of neuron `i`, column `j` the outgoing edges of input `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Matrix::zeros(fan_out, fan_in),
            biases: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.biases.len()
    }

    /// `x · Wᵀ + b`.
    fn affine(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = matmul_nt(x, &self.weights)?;
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.biases) {
                *v += b;
            }
        }
        Ok(z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: ArchSpec,
    pub layers: Vec<Dense>,
    /// Human-readable history of operations applied to this model.
    pub provenance: Vec<String>,
}

impl MlpModel {
    /// Fresh model with weights and biases drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn init(arch: ArchSpec, rng: &mut RngStream) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weights = Matrix::from_fn(fan_out, fan_in, |_, _| rng.uniform(-bound, bound));
                let biases = (0..fan_out).map(|_| rng.uniform(-bound, bound)).collect();
                Dense { weights, biases }
            })
            .collect();
        Ok(Self {
            arch,
            layers,
            provenance: vec![format!("init seed={}", rng.seed())],
        })
    }

    pub fn zeros(arch: ArchSpec) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Dense::zeros(i, o))
            .collect();
        Ok(Self {
            arch,
            layers,
            provenance: vec!["zeros".into()],
        })
    }

    /// Checks the stored layers against the architecture.
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let shapes = self.arch.layer_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::shape(
                "MlpModel",
                format!("{} layers, arch needs {}", self.layers.len(), shapes.len()),
            ));
        }
        for (l, (layer, &(fan_in, fan_out))) in self.layers.iter().zip(&shapes).enumerate() {
            if layer.weights.shape() != (fan_out, fan_in) || layer.biases.len() != fan_out {
                return Err(Error::shape(
                    "MlpModel",
                    format!(
                        "layer {l} is {:?} (+{} biases), arch needs ({fan_out}, {fan_in})",
                        layer.weights.shape(),
                        layer.biases.len()
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.arch.depth()
    }

    /// Total weight plus bias entries actually stored.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Total weight entries (edges), biases excluded.
    pub fn edge_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols())
            .sum()
    }

    /// Every parameter rounded through `f32`, i.e. what a checkpoint stores.
    pub fn round_to_f32(&self) -> MlpModel {
        let mut out = self.clone();
        for layer in &mut out.layers {
            for v in layer.weights.data_mut() {
                *v = f64::from(*v as f32);
            }
            for v in &mut layer.biases {
                *v = f64::from(*v as f32);
            }
        }
        out
    }

    fn check_trainable(&self, batch: &Matrix) -> Result<()> {
        if self.arch.view_branch.is_some() {
            return Err(Error::Unsupported(
                "view-branch geometry is for accounting only and cannot be evaluated".into(),
            ));
        }
        if batch.cols() != self.arch.input_dim {
            return Err(Error::shape(
                "forward",
                format!(
                    "batch has {} columns, model expects {}",
                    batch.cols(),
                    self.arch.input_dim
                ),
            ));
        }
        self.validate()
    }
}

/// Activations retained by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input fed to each layer (after any skip concatenation).
    inputs: Vec<Matrix>,
    /// Post-ReLU output of each hidden layer.
    hidden: Vec<Matrix>,
    /// Sigmoid output.
    output: Matrix,
    shapes: Vec<(usize, usize)>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    /// Post-ReLU activations of hidden layer `l`.
    pub fn hidden(&self, l: usize) -> &Matrix {
        &self.hidden[l]
    }
}

fn relu_in_place(z: &mut Matrix) {
    z.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn run(model: &MlpModel, coords: &Matrix, keep: bool) -> Result<(Matrix, Option<ForwardCache>)> {
    model.check_trainable(coords)?;
    let arch = &model.arch;
    let depth = arch.depth();
    let encoded = encode_batch(coords, arch.n_freqs, arch.include_input);

    let mut inputs = Vec::with_capacity(depth + 1);
    let mut hidden = Vec::with_capacity(depth);
    let mut x = encoded.clone();
    for l in 0..=depth {
        let input = if l == arch.skip_at + 1 {
            x.hcat(&encoded)?
        } else {
            x
        };
        let mut z = model.layers[l].affine(&input)?;
        if keep {
            inputs.push(input);
        }
        if l < depth {
            relu_in_place(&mut z);
            if keep {
                hidden.push(z.clone());
            }
            x = z;
        } else {
            let out = z.map(sigmoid);
            let cache = keep.then(|| ForwardCache {
                inputs,
                hidden,
                output: out.clone(),
                shapes: arch.layer_shapes(),
            });
            return Ok((out, cache));
        }
    }
    unreachable!("loop returns at the output layer")
}

/// Forward pass: ReLU hidden layers, sigmoid RGB head.
pub fn forward(model: &MlpModel, coords: &Matrix) -> Result<(Matrix, ForwardCache)> {
    let (out, cache) = run(model, coords, true)?;
    Ok((out, cache.expect("cache requested")))
}

/// Forward pass without retaining activations.
pub fn predict(model: &MlpModel, coords: &Matrix) -> Result<Matrix> {
    Ok(run(model, coords, false)?.0)
}

/// Parameter gradients, laid out like [`MlpModel::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().chain(&l.biases))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Reverse-mode gradients of the forward computation, given `d_outputs`
/// (the loss gradient with respect to the sigmoid outputs).
pub fn backward(model: &MlpModel, cache: &ForwardCache, d_outputs: &Matrix) -> Result<Gradients> {
    let shapes = model.arch.layer_shapes();
    if shapes != cache.shapes || cache.inputs.len() != model.layers.len() {
        return Err(Error::CacheMismatch(
            "cache was produced by a model with different shapes".into(),
        ));
    }
    for (l, (layer, input)) in model.layers.iter().zip(&cache.inputs).enumerate() {
        if layer.weights.shape() != (shapes[l].1, shapes[l].0) || input.cols() != layer.fan_in() {
            return Err(Error::CacheMismatch(format!("layer {l} no longer matches its cached input")));
        }
    }
    if d_outputs.shape() != cache.output.shape() {
        return Err(Error::shape(
            "backward",
            format!(
                "upstream gradient {:?} vs output {:?}",
                d_outputs.shape(),
                cache.output.shape()
            ),
        ));
    }

    let depth = model.depth();
    let mut grads: Vec<Option<Dense>> = vec![None; depth + 1];

    // d(sigmoid) = s(1 - s)
    let mut dz = Matrix::from_fn(d_outputs.rows(), d_outputs.cols(), |r, c| {
        let s = cache.output.get(r, c);
        d_outputs.get(r, c) * s * (1.0 - s)
    });
    for l in (0..=depth).rev() {
        let layer = &model.layers[l];
        let weights = matmul_tn(&dz, &cache.inputs[l])?;
        let biases = dz.column_sums();
        if l > 0 {
            let dx = matmul(&dz, &layer.weights)?;
            let h = &cache.hidden[l - 1];
            let mut dh = if dx.cols() == h.cols() {
                dx
            } else {
                dx.col_range(0, h.cols())
            };
            for (g, &a) in dh.data_mut().iter_mut().zip(h.data()) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            dz = dh;
        }
        grads[l] = Some(Dense { weights, biases });
    }
    Ok(Gradients {
        layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
    })
}

/// Mean squared error over all entries and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    let n = pred.data().len().max(1) as f64;
    let mut loss = 0.0;
    let grad: Vec<f64> = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, Matrix::from_vec(pred.rows(), pred.cols(), grad)?))
}
