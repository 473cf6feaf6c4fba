use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter tensor.
///
/// Entries whose gradient is exactly zero are skipped entirely (moments and
/// parameter untouched), so a zero gradient never moves a parameter whatever
/// momentum has built up. Bias correction uses the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    rows: usize,
    cols: usize,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, config: AdamConfig) -> Self {
        Self {
            config,
            rows,
            cols,
            m: vec![0.0; rows * cols],
            v: vec![0.0; rows * cols],
            step: 0,
        }
    }

    pub fn for_matrix(params: &Matrix, config: AdamConfig) -> Self {
        Self::new(params.rows(), params.cols(), config)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// In-place update on flat slices laid out like the state.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.rows * self.cols;
        if params.len() != n || grads.len() != n {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "state {}x{} vs params {} / grads {}",
                    self.rows,
                    self.cols,
                    params.len(),
                    grads.len()
                ),
            ));
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            if g == 0.0 {
                continue;
            }
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// One bias-corrected Adam update of `params` from `grads`.
pub fn adam_step(params: &mut Matrix, grads: &Matrix, state: &mut AdamState) -> Result<()> {
    if params.shape() != grads.shape() || params.shape() != state.shape() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "params {:?}, grads {:?}, state {:?}",
                params.shape(),
                grads.shape(),
                state.shape()
            ),
        ));
    }
    state.update(params.data_mut(), grads.data())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_fresh_state_is_identity() {
        let mut p = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
        let before = p.clone();
        let mut st = AdamState::for_matrix(&p, AdamConfig::default());
        adam_step(&mut p, &Matrix::zeros(2, 2), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn positive_gradient_descends() {
        let mut p = scalar(1.0);
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut st = AdamState::for_matrix(&p, cfg);
        adam_step(&mut p, &scalar(1.0), &mut st).unwrap();
        assert!(p.get(0, 0) < 1.0);
    }

    /// Textbook scalar Adam, written independently of the slice loop above.
    fn reference_adam_on_square(x0: f64, steps: usize, cfg: AdamConfig) -> f64 {
        let (mut x, mut m, mut v) = (x0, 0.0f64, 0.0f64);
        for t in 1..=steps {
            let g = 2.0 * x;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let mh = m / (1.0 - cfg.beta1.powi(t as i32));
            let vh = v / (1.0 - cfg.beta2.powi(t as i32));
            x -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
        x
    }

    #[test]
    fn ten_steps_on_square_match_reference_and_descend() {
        let cfg = AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        };
        let mut p = scalar(1.0);
        let mut st = AdamState::for_matrix(&p, cfg);
        for _ in 0..10 {
            let g = scalar(2.0 * p.get(0, 0));
            adam_step(&mut p, &g, &mut st).unwrap();
        }
        let expected = reference_adam_on_square(1.0, 10, cfg);
        assert!((p.get(0, 0) - expected).abs() < 1e-15);
        assert!(p.get(0, 0).abs() < 1.0);
    }

    #[test]
    fn zero_gradient_is_identity_after_momentum_builds() {
        let mut p = scalar(1.0);
        let mut st = AdamState::for_matrix(&p, AdamConfig::default());
        for _ in 0..5 {
            adam_step(&mut p, &scalar(0.7), &mut st).unwrap();
        }
        let before = p.clone();
        let m_before = st.first_moment().to_vec();
        adam_step(&mut p, &scalar(0.0), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.first_moment(), &m_before[..]);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = Matrix::zeros(2, 2);
        let mut st = AdamState::new(2, 2, AdamConfig::default());
        assert!(matches!(
            adam_step(&mut p, &Matrix::zeros(1, 4), &mut st),
            Err(Error::Shape { .. })
        ));
        let mut st = AdamState::new(1, 4, AdamConfig::default());
        assert!(adam_step(&mut p, &Matrix::zeros(2, 2), &mut st).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn zero_gradient_never_moves_params(
                warm in proptest::collection::vec(-5.0f64..5.0, 0..8),
                start in -3.0f64..3.0,
            ) {
                let mut p = scalar(start);
                let mut st = AdamState::for_matrix(&p, AdamConfig::default());
                for g in warm {
                    adam_step(&mut p, &scalar(g), &mut st).unwrap();
                }
                let before = p.get(0, 0);
                adam_step(&mut p, &scalar(0.0), &mut st).unwrap();
                prop_assert_eq!(p.get(0, 0), before);
            }
        }
    }
}
