use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
        }
    }

    /// Multiply `grad` by the derivative, given the activation output `a`.
    fn backprop(self, a: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Relu => grad.zip_mut_with(a, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::Tanh => grad.zip_mut_with(a, |g, &a| *g *= 1.0 - a * a),
        }
    }
}

/// Feed-forward network with a linear output layer. Parameters live in one
/// flat vector: per layer the `in x out` weight matrix (row-major) then the
/// bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
    /// Normalise each hidden pre-activation row to zero mean and unit
    /// variance (no affine parameters).
    #[serde(default)]
    pub layer_norm: bool,
}

const LN_EPS: f64 = 1e-5;

/// Layer inputs saved by [`Mlp::forward`] for the backward pass.
pub struct Cache {
    inputs: Vec<Array2<f64>>,
    /// Per hidden layer with layer norm: normalised values and `1/sd` per row.
    ln: Vec<Option<(Array2<f64>, Array1<f64>)>>,
}

fn layer_norm_forward(z: &mut Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let n = z.ncols() as f64;
    let mut inv = Array1::zeros(z.nrows());
    for (i, mut row) in z.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let r = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * r);
        inv[i] = r;
    }
    (z.clone(), inv)
}

/// `dz = r (g - mean(g) - xhat mean(g xhat))` row-wise.
fn layer_norm_backward(xhat: &Array2<f64>, inv: &Array1<f64>, grad: &mut Array2<f64>) {
    let n = grad.ncols() as f64;
    for (i, mut g) in grad.rows_mut().into_iter().enumerate() {
        let x = xhat.row(i);
        let mg = g.sum() / n;
        let mgx = g.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>() / n;
        for (gj, xj) in g.iter_mut().zip(x.iter()) {
            *gj = inv[i] * (*gj - mg - xj * mgx);
        }
    }
}

impl Mlp {
    /// Uniform `+-1/sqrt(fan_in)` initialisation; the output layer uses
    /// `+-out_scale` when given.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, out_scale: Option<f64>, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let mut params = Vec::with_capacity(Self::count(sizes));
        let layers = sizes.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = match out_scale {
                Some(s) if l + 1 == layers => s,
                _ => 1.0 / (fan_in as f64).sqrt(),
            };
            for _ in 0..(fan_in + 1) * fan_out {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            activation,
            params,
            layer_norm: false,
        }
    }

    pub fn with_layer_norm(mut self, on: bool) -> Self {
        self.layer_norm = on;
        self
    }

    fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let o = off;
            off += (w[0] + 1) * w[1];
            (o, w[0], w[1])
        })
    }

    fn layer(&self, off: usize, fan_in: usize, fan_out: usize) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>) {
        let w = ArrayView2::from_shape((fan_in, fan_out), &self.params[off..off + fan_in * fan_out]).unwrap();
        let b = ArrayView2::from_shape((1, fan_out), &self.params[off + fan_in * fan_out..off + (fan_in + 1) * fan_out])
            .unwrap();
        (w, b)
    }

    /// Bias vector of the output layer, mutable.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let n = self.params.len();
        let out = self.output_dim();
        &mut self.params[n - out..]
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Cache) {
        let layers = self.sizes.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut ln = Vec::with_capacity(layers);
        let mut a = x.clone();
        for (l, (off, fi, fo)) in self.offsets().enumerate() {
            let (w, b) = self.layer(off, fi, fo);
            let mut z = a.dot(&w) + &b;
            let hidden = l + 1 < layers;
            ln.push(if hidden && self.layer_norm { Some(layer_norm_forward(&mut z)) } else { None });
            if hidden {
                self.activation.apply(&mut z);
            }
            inputs.push(a);
            a = z;
        }
        (a, Cache { inputs, ln })
    }

    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward(x).0
    }

    /// Gradient of `sum(dout * output)` with respect to the parameters and
    /// the input.
    pub fn backward(&self, cache: &Cache, dout: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let offsets: Vec<_> = self.offsets().collect();
        let mut dz = dout.clone();
        for l in (0..offsets.len()).rev() {
            let (off, fi, fo) = offsets[l];
            let a = &cache.inputs[l];
            let dw = a.t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            // Logical (row-major) order regardless of the memory layout.
            for (g, v) in grad[off..off + fi * fo].iter_mut().zip(dw.iter()) {
                *g = *v;
            }
            for (g, v) in grad[off + fi * fo..off + (fi + 1) * fo].iter_mut().zip(db.iter()) {
                *g = *v;
            }
            let (w, _) = self.layer(off, fi, fo);
            let mut da = dz.dot(&w.t());
            if l > 0 {
                self.activation.backprop(a, &mut da);
                if let Some((xhat, inv)) = &cache.ln[l - 1] {
                    layer_norm_backward(xhat, inv, &mut da);
                }
            }
            dz = da;
        }
        (grad, dz)
    }

    /// `self <- (1 - tau) self + tau other`.
    pub fn polyak_from(&mut self, other: &Mlp, tau: f64) {
        for (p, q) in self.params.iter_mut().zip(&other.params) {
            *p = (1.0 - tau) * *p + tau * q;
        }
    }
}

/// Stack rows into a matrix.
pub fn rows(data: &[&[f64]]) -> Array2<f64> {
    let n = data.first().map_or(0, |r| r.len());
    let mut m = Array2::zeros((data.len(), n));
    for (i, r) in data.iter().enumerate() {
        m.row_mut(i).assign(&Array1::from(r.to_vec()));
    }
    m
}

/// `[a, b]` column-wise.
pub fn hcat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut m = Array2::zeros((a.nrows(), a.ncols() + b.ncols()));
    m.slice_mut(s![.., ..a.ncols()]).assign(a);
    m.slice_mut(s![.., a.ncols()..]).assign(b);
    m
}
