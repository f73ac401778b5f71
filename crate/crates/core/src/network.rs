//! Single-hidden-layer perceptron with a ReLU hidden layer and a linear output.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => relu(x),
            Activation::Identity => x,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::ModelFormat(format!("unknown activation `{other}`"))),
        }
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Outcome of the minimum-width check `hidden_width >= input_dim + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WidthCheck {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub minimum: usize,
    pub passed: bool,
}

impl WidthCheck {
    pub fn into_result(self) -> Result<usize> {
        if self.passed {
            Ok(self.hidden_width)
        } else {
            Err(Error::WidthTooSmall {
                input_dim: self.input_dim,
                hidden_width: self.hidden_width,
                minimum: self.minimum,
            })
        }
    }
}

/// A single hidden layer needs at least `input_dim + 1` neurons to be a
/// universal approximator.
pub fn check_min_width(input_dim: usize, hidden_width: usize) -> WidthCheck {
    let minimum = input_dim + 1;
    WidthCheck {
        input_dim,
        hidden_width,
        minimum,
        passed: hidden_width >= minimum,
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged matrix rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Intermediates of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardPass {
    pub output: f64,
    pub hidden_pre: Vec<f64>,
    pub hidden_post: Vec<f64>,
}

/// `y = w2 · relu(w1 · x + b1) + b2` with a single output.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    /// hidden_width × input_dim
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// 1 × hidden_width
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl Network {
    /// Builds a network from explicit parameters.
    ///
    /// Shapes, finiteness and activation tags are validated. The minimum-width
    /// rule is not: it gates training, while hand-built or imported networks
    /// may be narrower.
    pub fn from_parameters(w1: Matrix, b1: Vec<f64>, w2: Matrix, b2: Vec<f64>) -> Result<Self> {
        let net = Self {
            w1,
            b1,
            w2,
            b2,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn zeros(input_dim: usize, hidden_width: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden_width, input_dim),
            b1: vec![0.0; hidden_width],
            w2: Matrix::zeros(1, hidden_width),
            b2: vec![0.0],
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.w1.rows(), self.w1.cols());
        if d == 0 || h == 0 {
            return Err(Error::Shape("network dimensions must be positive".into()));
        }
        if self.b1.len() != h {
            return Err(Error::Shape(format!("b1 has {} entries, expected {h}", self.b1.len())));
        }
        if self.w2.rows() != 1 || self.w2.cols() != h {
            return Err(Error::Shape(format!(
                "w2 is {}x{}, expected 1x{h}",
                self.w2.rows(),
                self.w2.cols()
            )));
        }
        if self.b2.len() != 1 {
            return Err(Error::Shape(format!("b2 has {} entries, expected 1", self.b2.len())));
        }
        if self.hidden_activation != Activation::Relu || self.output_activation != Activation::Identity {
            return Err(Error::ModelFormat(format!(
                "unsupported activations {}/{}; expected relu/identity",
                self.hidden_activation, self.output_activation
            )));
        }
        let all_finite = self
            .parameters()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()));
        if !all_finite {
            return Err(Error::NumericOverflow("non-finite network parameter".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_width(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    /// Parameter tensors in the fixed order w1, b1, w2, b2.
    pub fn parameters(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn parameters_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let hidden_pre: Vec<f64> = (0..self.hidden_width())
            .map(|j| {
                self.w1
                    .row(j)
                    .iter()
                    .zip(x)
                    .fold(self.b1[j], |acc, (w, xi)| acc + w * xi)
            })
            .collect();
        let hidden_post: Vec<f64> = hidden_pre
            .iter()
            .map(|&z| self.hidden_activation.apply(z))
            .collect();
        let output = self.output_activation.apply(
            self.w2
                .row(0)
                .iter()
                .zip(&hidden_post)
                .fold(self.b2[0], |acc, (w, h)| acc + w * h),
        );
        if !output.is_finite() || hidden_pre.iter().any(|z| !z.is_finite()) {
            return Err(Error::NumericOverflow("non-finite activation in forward pass".into()));
        }
        Ok(ForwardPass {
            output,
            hidden_pre,
            hidden_post,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.forward(x).map(|p| p.output)
    }
}

/// Glorot uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Fills `out` with i.i.d. draws from `U[-L, L]`, `L = glorot_limit(fan_in, fan_out)`.
pub fn glorot_uniform_fill(rng: &mut RngState, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let limit = glorot_limit(fan_in, fan_out);
    for w in out {
        *w = rng.uniform_in(-limit, limit);
    }
}

/// Glorot-uniform weights for both layers and zero biases. Weights of w1 are
/// drawn first, row by row, then w2.
pub fn glorot_uniform_init(
    input_dim: usize,
    hidden_width: usize,
    output_dim: usize,
    rng: &mut RngState,
) -> Result<Network> {
    if input_dim == 0 {
        return Err(Error::Config("input dimension must be positive".into()));
    }
    if output_dim != 1 {
        return Err(Error::Config(format!(
            "only single-output networks are supported, got {output_dim} outputs"
        )));
    }
    check_min_width(input_dim, hidden_width).into_result()?;
    let mut net = Network::zeros(input_dim, hidden_width);
    glorot_uniform_fill(rng, input_dim, hidden_width, net.w1.as_mut_slice());
    glorot_uniform_fill(rng, hidden_width, output_dim, net.w2.as_mut_slice());
    Ok(net)
}
