use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Inference-mode batch normalization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BnParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub eps: f32,
}

impl BnParams {
    /// γ = 1, β = 0, μ = 0, σ² = 1, ε = 0: an exact identity map.
    pub fn identity(channels: usize) -> Self {
        Self::identity_with_eps(channels, 0.0)
    }

    pub fn identity_with_eps(channels: usize, eps: f32) -> Self {
        BnParams {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            eps,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn validate(&self, channels: usize) -> Result<()> {
        for (name, v) in [
            ("gamma", &self.gamma),
            ("beta", &self.beta),
            ("mean", &self.mean),
            ("var", &self.var),
        ] {
            if v.len() != channels {
                return Err(Error::Shape(format!(
                    "batch norm {name} has {} entries for {channels} channels",
                    v.len()
                )));
            }
        }
        if self.eps < 0.0 || self.var.iter().any(|&v| v < 0.0 || v + self.eps <= 0.0) {
            return Err(Error::InvalidArgument(
                "batch norm needs var >= 0 and var + eps > 0".into(),
            ));
        }
        Ok(())
    }
}

/// `γ·(x − μ)/sqrt(σ² + ε) + β`, per channel.
pub fn batch_norm(input: &Tensor, p: &BnParams) -> Result<Tensor> {
    let s = input.shape();
    p.validate(s.c)?;
    let scale: Vec<f32> = (0..s.c)
        .map(|c| p.gamma[c] / (p.var[c] + p.eps).sqrt())
        .collect();
    let plane = s.plane();
    let data = input
        .data()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = (i / plane) % s.c;
            (x - p.mean[c]) * scale[c] + p.beta[c]
        })
        .collect();
    Tensor::from_vec(s, data)
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|x| x.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape4;

    #[test]
    fn identity_bn() {
        let x = Tensor::from_vec(Shape4::new(1, 2, 1, 2), vec![-1.5, 0.0, 2.0, 7.25]).unwrap();
        assert_eq!(batch_norm(&x, &BnParams::identity(2)).unwrap(), x);
    }

    #[test]
    fn hand_values() {
        let p = BnParams {
            gamma: vec![3.0],
            beta: vec![1.0],
            mean: vec![2.0],
            var: vec![4.0],
            eps: 0.0,
        };
        let x = Tensor::from_vec(Shape4::new(1, 1, 1, 2), vec![2.0, 4.0]).unwrap();
        assert_eq!(batch_norm(&x, &p).unwrap().data(), &[1.0, 4.0]);
    }

    #[test]
    fn length_mismatch() {
        let x = Tensor::zeros(Shape4::new(1, 3, 1, 1));
        assert!(batch_norm(&x, &BnParams::identity(2)).is_err());
    }

    #[test]
    fn relu_cases() {
        let neg = Tensor::full(Shape4::new(1, 1, 2, 2), -3.0);
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let pos = Tensor::full(Shape4::new(1, 1, 2, 2), 0.5);
        assert_eq!(relu(&pos), pos);
        let mixed = Tensor::from_vec(Shape4::new(1, 1, 1, 3), vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&mixed).data(), &[0.0, 0.0, 2.0]);
    }
}
