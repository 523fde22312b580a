use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NormalizedAdjacency;
use crate::{Error, Result};

/// Layer widths of the classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    /// Output width of each graph convolution.
    pub gcn_dims: Vec<usize>,
    /// Output width of each hidden linear layer.
    pub head_dims: Vec<usize>,
    pub classes: usize,
}

impl Architecture {
    /// Three 128-wide graph convolutions, then 384 -> 128 -> 64 -> classes.
    pub fn default_for(input_dim: usize, classes: usize) -> Self {
        Architecture {
            input_dim,
            gcn_dims: vec![128, 128, 128],
            head_dims: vec![128, 64],
            classes,
        }
    }

    pub fn pooled_dim(&self) -> usize {
        self.gcn_dims.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.classes < 2 || self.gcn_dims.is_empty() {
            return Err(Error::invalid(format!(
                "architecture needs input_dim > 0, >= 2 classes and >= 1 graph layer: {self:?}"
            )));
        }
        if self.gcn_dims.iter().chain(&self.head_dims).any(|&d| d == 0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(())
    }

    /// (fan_in, fan_out) of every linear layer including the output layer.
    fn linear_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.pooled_dim()];
        dims.extend(&self.head_dims);
        dims.push(self.classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Every learnable tensor. Also used for gradients and Adam moments.
///
/// `gcn[l]` is `in x out`; `linear_w[k]` is `out x in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub gcn: Vec<Array2<f64>>,
    pub linear_w: Vec<Array2<f64>>,
    pub linear_b: Vec<Array1<f64>>,
}

impl Params {
    pub fn zeros(arch: &Architecture) -> Self {
        let mut gcn = Vec::new();
        let mut fan_in = arch.input_dim;
        for &d in &arch.gcn_dims {
            gcn.push(Array2::zeros((fan_in, d)));
            fan_in = d;
        }
        let shapes = arch.linear_shapes();
        Params {
            gcn,
            linear_w: shapes.iter().map(|&(i, o)| Array2::zeros((o, i))).collect(),
            linear_b: shapes.iter().map(|&(_, o)| Array1::zeros(o)).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Self {
        let mut p = Params::zeros(arch);
        for w in p.gcn.iter_mut() {
            let a = (6.0 / (w.nrows() + w.ncols()) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-a..a));
        }
        for w in p.linear_w.iter_mut() {
            let a = (6.0 / (w.nrows() + w.ncols()) as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-a..a));
        }
        p
    }

    pub fn len(&self) -> usize {
        let w: usize = self.gcn.iter().chain(&self.linear_w).map(|a| a.len()).sum();
        w + self.linear_b.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All scalars in a fixed order: graph weights, linear weights, biases.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.gcn
            .iter()
            .flat_map(|a| a.iter())
            .chain(self.linear_w.iter().flat_map(|a| a.iter()))
            .chain(self.linear_b.iter().flat_map(|a| a.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.gcn
            .iter_mut()
            .flat_map(|a| a.iter_mut())
            .chain(self.linear_w.iter_mut().flat_map(|a| a.iter_mut()))
            .chain(self.linear_b.iter_mut().flat_map(|a| a.iter_mut()))
    }

    /// Contiguous storage of each tensor, in the same order as `iter`.
    /// Panics unless every tensor is in standard layout, which holds for
    /// parameters built by `zeros` or `glorot` and for gradients returned by
    /// `backward`.
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        let w = self.gcn.iter().chain(&self.linear_w).map(|a| a.as_slice().expect("standard layout"));
        w.chain(self.linear_b.iter().map(|b| b.as_slice().expect("standard layout")))
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        let w = self
            .gcn
            .iter_mut()
            .chain(&mut self.linear_w)
            .map(|a| a.as_slice_mut().expect("standard layout"));
        w.chain(self.linear_b.iter_mut().map(|b| b.as_slice_mut().expect("standard layout")))
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.gcn.iter_mut().zip(&other.gcn) {
            *a += b;
        }
        for (a, b) in self.linear_w.iter_mut().zip(&other.linear_w) {
            *a += b;
        }
        for (a, b) in self.linear_b.iter_mut().zip(&other.linear_b) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.iter_mut() {
            *a *= k;
        }
    }

    pub fn shapes_match(&self, other: &Params) -> bool {
        fn same<D: ndarray::Dimension>(a: &[ndarray::Array<f64, D>], b: &[ndarray::Array<f64, D>]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.shape() == y.shape())
        }
        same(&self.gcn, &other.gcn) && same(&self.linear_w, &other.linear_w) && same(&self.linear_b, &other.linear_b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GcnModel {
    pub arch: Architecture,
    pub params: Params,
    pub dropout_p: f64,
}

/// Intermediate values of one graph's forward pass, enough for an exact
/// backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input of each graph layer (`inputs[0]` is the node feature matrix).
    inputs: Vec<Array2<f64>>,
    /// `Â X` per graph layer.
    propagated: Vec<Array2<f64>>,
    /// Pre-activation `Â X W` per graph layer.
    pre: Vec<Array2<f64>>,
    /// Dropout multipliers per graph layer (`None` in eval mode).
    gcn_masks: Vec<Option<Array2<f64>>>,
    /// Input vector of each linear layer; `z[0]` is the pooled concatenation.
    z: Vec<Array1<f64>>,
    /// Pre-activation of each hidden linear layer.
    head_pre: Vec<Array1<f64>>,
    head_masks: Vec<Option<Array1<f64>>>,
    pub logits: Array1<f64>,
    pub probs: Array1<f64>,
}

impl ForwardCache {
    pub fn pooled(&self) -> &Array1<f64> {
        &self.z[0]
    }
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Mean negative log-probability of the labelled class over a batch.
/// Probabilities are clamped away from zero.
pub fn cross_entropy_loss(probs: &[Array1<f64>], labels: &[usize]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels, at least one", probs.len()),
            got: format!("{}", labels.len()),
        });
    }
    let mut total = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        if y >= p.len() {
            return Err(Error::invalid(format!("label {y} out of range for {} classes", p.len())));
        }
        total -= p[y].max(f64::MIN_POSITIVE).ln();
    }
    Ok(total / probs.len() as f64)
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

fn relu_grad(pre: f64) -> f64 {
    if pre > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl GcnModel {
    pub fn new<R: Rng + ?Sized>(arch: Architecture, dropout_p: f64, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(Error::invalid(format!("dropout probability {dropout_p} outside [0, 1)")));
        }
        let params = Params::glorot(&arch, rng);
        Ok(GcnModel { arch, params, dropout_p })
    }

    fn dropout_mask<R: Rng + ?Sized>(&self, shape: usize, mode: Mode, rng: &mut R) -> Option<Vec<f64>> {
        if mode == Mode::Eval || self.dropout_p == 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - self.dropout_p);
        Some(
            (0..shape)
                .map(|_| if rng.random::<f64>() >= self.dropout_p { keep } else { 0.0 })
                .collect(),
        )
    }

    /// Forward pass over one graph. `x` holds one (standardized) feature row
    /// per node. A graph without nodes pools to zeros.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Array2<f64>,
        adj: &NormalizedAdjacency,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardCache> {
        if x.ncols() != self.arch.input_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{} input features", self.arch.input_dim),
                got: format!("{}", x.ncols()),
            });
        }
        if x.nrows() != adj.node_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} feature rows", adj.node_count()),
                got: format!("{}", x.nrows()),
            });
        }
        let n = x.nrows();
        let mut inputs = vec![x.clone()];
        let mut propagated = Vec::new();
        let mut pre = Vec::new();
        let mut gcn_masks = Vec::new();
        let mut pooled = Vec::with_capacity(self.arch.pooled_dim());
        for w in &self.params.gcn {
            let h_in = inputs.last().expect("non-empty");
            let ax = adj.matmul(h_in);
            let s = ax.dot(w);
            let r = s.mapv(relu);
            if n > 0 {
                pooled.extend(r.mean_axis(Axis(0)).expect("n > 0"));
            } else {
                pooled.extend(std::iter::repeat_n(0.0, w.ncols()));
            }
            let mask = self
                .dropout_mask(r.len(), mode, rng)
                .map(|m| Array2::from_shape_vec(r.raw_dim(), m).expect("mask sized to layer"));
            let out = match &mask {
                Some(m) => &r * m,
                None => r,
            };
            propagated.push(ax);
            pre.push(s);
            gcn_masks.push(mask);
            inputs.push(out);
        }

        let mut z = vec![Array1::from(pooled)];
        let mut head_pre = Vec::new();
        let mut head_masks = Vec::new();
        let hidden = self.params.linear_w.len() - 1;
        for k in 0..hidden {
            let a = self.params.linear_w[k].dot(&z[k]) + &self.params.linear_b[k];
            let r = a.mapv(relu);
            let mask = self.dropout_mask(r.len(), mode, rng).map(Array1::from);
            let out = match &mask {
                Some(m) => &r * m,
                None => r,
            };
            head_pre.push(a);
            head_masks.push(mask);
            z.push(out);
        }
        let logits = self.params.linear_w[hidden].dot(&z[hidden]) + &self.params.linear_b[hidden];
        let probs = softmax(&logits);
        Ok(ForwardCache {
            inputs,
            propagated,
            pre,
            gcn_masks,
            z,
            head_pre,
            head_masks,
            logits,
            probs,
        })
    }

    /// Gradient of `scale * -ln(probs[label])` with respect to every
    /// parameter, and optionally the node feature matrix.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        adj: &NormalizedAdjacency,
        label: usize,
        scale: f64,
        want_input_grad: bool,
    ) -> Result<(Params, Option<Array2<f64>>)> {
        if label >= self.arch.classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                self.arch.classes
            )));
        }
        let mut grads = Params::zeros(&self.arch);
        let out_layer = self.params.linear_w.len() - 1;

        let mut dz = cache.probs.clone();
        dz[label] -= 1.0;
        dz *= scale;

        // linear stack, output layer first
        for k in (0..=out_layer).rev() {
            let da = if k == out_layer {
                dz
            } else {
                let mut d = dz;
                if let Some(m) = &cache.head_masks[k] {
                    d *= m;
                }
                d.zip_mut_with(&cache.head_pre[k], |g, &a| *g *= relu_grad(a));
                d
            };
            let zin = &cache.z[k];
            grads.linear_w[k] = outer(&da, zin);
            grads.linear_b[k] = da.clone();
            dz = self.params.linear_w[k].t().dot(&da);
        }
        let d_pooled = dz;

        // graph layers, last first
        let n = cache.inputs[0].nrows();
        let layers = self.params.gcn.len();
        let mut offsets = Vec::with_capacity(layers);
        let mut acc = 0;
        for &d in &self.arch.gcn_dims {
            offsets.push(acc);
            acc += d;
        }
        let mut d_next: Option<Array2<f64>> = None;
        let mut input_grad = None;
        for l in (0..layers).rev() {
            let width = self.arch.gcn_dims[l];
            let mut dr = match (d_next.take(), &cache.gcn_masks[l]) {
                (Some(d), Some(m)) => d * m,
                (Some(d), None) => d,
                (None, _) => Array2::zeros((n, width)),
            };
            if n > 0 {
                let dp = d_pooled.slice(s![offsets[l]..offsets[l] + width]).mapv(|v| v / n as f64);
                dr += &dp.insert_axis(Axis(0));
            }
            dr.zip_mut_with(&cache.pre[l], |g, &a| *g *= relu_grad(a));
            grads.gcn[l] = cache.propagated[l].t().dot(&dr);
            if l > 0 || want_input_grad {
                let d_ax = dr.dot(&self.params.gcn[l].t());
                let dx = adj.matmul(&d_ax);
                if l == 0 {
                    input_grad = Some(dx);
                } else {
                    d_next = Some(dx);
                }
            }
        }
        // products with transposed views can come back column-major
        for w in grads.gcn.iter_mut().chain(&mut grads.linear_w) {
            if !w.is_standard_layout() {
                *w = w.as_standard_layout().into_owned();
            }
        }
        Ok((grads, input_grad))
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let col = a.view().insert_axis(Axis(1));
    let row = b.view().insert_axis(Axis(0));
    col.dot(&row)
}
