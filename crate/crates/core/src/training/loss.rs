use crate::error::{Error, Result};
use crate::network::Network;

/// Floor on the RMSE in the loss gradient denominator.
pub const RMSE_GRAD_FLOOR: f64 = 1e-12;

/// One normalized training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: f64,
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let sum_sq: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    Ok((sum_sq / y_true.len() as f64).sqrt())
}

pub(crate) fn check_pair(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} targets but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Shape("metric over zero samples".into()));
    }
    Ok(())
}

/// Gradients congruent with the network's parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            w1: vec![0.0; net.w1.as_slice().len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.as_slice().len()],
            b2: vec![0.0; net.b2.len()],
        }
    }

    /// Same order as [`Network::parameters`].
    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }
}

/// Batch RMSE and its exact gradient with respect to every parameter.
pub fn backward(net: &Network, batch: &[Example]) -> Result<(f64, Gradients)> {
    backward_subset(net, batch, 0..batch.len())
}

pub(crate) fn backward_subset(
    net: &Network,
    examples: &[Example],
    indices: impl Iterator<Item = usize> + Clone,
) -> Result<(f64, Gradients)> {
    let passes = indices
        .clone()
        .map(|i| net.forward(&examples[i].x))
        .collect::<Result<Vec<_>>>()?;
    if passes.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let n = passes.len() as f64;
    let sum_sq: f64 = indices
        .clone()
        .zip(&passes)
        .map(|(i, p)| (p.output - examples[i].y).powi(2))
        .sum();
    let loss = (sum_sq / n).sqrt();
    let scale = 1.0 / (n * loss.max(RMSE_GRAD_FLOOR));

    let mut g = Gradients::zeros_like(net);
    let d = net.input_dim();
    let w2 = net.w2.row(0);
    for (i, p) in indices.zip(&passes) {
        let ex = &examples[i];
        let d_out = (p.output - ex.y) * scale;
        g.b2[0] += d_out;
        for (j, (&pre, &post)) in p.hidden_pre.iter().zip(&p.hidden_post).enumerate() {
            g.w2[j] += d_out * post;
            // relu gate; the subgradient at 0 is taken as 0
            if pre > 0.0 {
                let d_hidden = d_out * w2[j];
                g.b1[j] += d_hidden;
                for (gw, &x) in g.w1[j * d..(j + 1) * d].iter_mut().zip(&ex.x) {
                    *gw += d_hidden * x;
                }
            }
        }
    }
    if g.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::NumericOverflow("non-finite gradient".into()));
    }
    Ok((loss, g))
}

/// RMSE of the network over `examples`.
pub fn dataset_rmse(net: &Network, examples: &[Example]) -> Result<f64> {
    let preds = examples
        .iter()
        .map(|e| net.predict(&e.x))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = examples.iter().map(|e| e.y).collect();
    rmse(&targets, &preds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Matrix;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let r = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((r - 3.53553).abs() < 1e-5);
        assert_eq!(rmse(&[0.0], &[5.0]).unwrap(), 5.0);
        assert!(rmse(&[0.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn zero_error_batch_has_zero_gradient() {
        let net = Network::from_parameters(
            Matrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap(),
            vec![0.0, 0.0],
            Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let batch = vec![Example { x: vec![3.0], y: 3.0 }, Example { x: vec![-2.0], y: 2.0 }];
        let (loss, g) = backward(&net, &batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn two_neuron_hand_gradient() {
        // x = 3, y = 0: pre = [3, -3], post = [3, 0], out = 3, loss = 3,
        // dL/dout = 3 / (1 * 3) = 1; only the first neuron is open.
        let net = Network::from_parameters(
            Matrix::from_vec(2, 1, vec![1.0, -1.0]).unwrap(),
            vec![0.0, 0.0],
            Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let (loss, g) = backward(&net, &[Example { x: vec![3.0], y: 0.0 }]).unwrap();
        assert_eq!(loss, 3.0);
        assert_eq!(g.w2, vec![3.0, 0.0]);
        assert_eq!(g.b2, vec![1.0]);
        assert_eq!(g.w1, vec![3.0, 0.0]);
        assert_eq!(g.b1, vec![1.0, 0.0]);
    }
}
