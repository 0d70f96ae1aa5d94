use super::{Gradients, TrainConfig};
use crate::model::ModelParams;
use crate::scalar::Scalar;

/// First and second moments with the number of steps taken.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(params: &mut ModelParams<T>, grads: &Gradients<T>, state: &mut AdamState<T>, config: &TrainConfig) {
    state.step += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = T::of(1.0 - b1.powi(state.step as i32));
    let c2 = T::of(1.0 - b2.powi(state.step as i32));
    let (b1, b2) = (T::of(b1), T::of(b2));
    let lr = T::of(config.learning_rate);
    let eps = T::of(config.adam_eps);
    let one = T::one();
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut());
    for (((p, g), m), v) in tensors {
        for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn params(v: Vec<f64>) -> ModelParams<f64> {
        ModelParams {
            x0: Matrix::from_vec(1, v.len(), v).unwrap(),
            y0: Matrix::zeros(1, 3),
            w: vec![Matrix::zeros(3, 3)],
            theta: vec![vec![1.0; 2]],
        }
    }

    #[test]
    fn first_step_moves_against_gradient_by_lr() {
        let cfg = TrainConfig {
            learning_rate: 0.01,
            ..TrainConfig::default()
        };
        let mut p = params(vec![1.0, 1.0, 1.0]);
        let mut g = p.zeros_like();
        g.x0 = Matrix::from_vec(1, 3, vec![2.0, -0.5, 0.0]).unwrap();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &cfg);
        let d: Vec<f64> = p.x0.as_slice().iter().map(|v| v - 1.0).collect();
        assert!(d[0] < 0.0 && d[1] > 0.0 && d[2] == 0.0);
        assert!((d[0] + 0.01).abs() < 1e-9 && (d[1] - 0.01).abs() < 1e-9);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point_and_runs_repeat() {
        let cfg = TrainConfig::default();
        let p0 = params(vec![0.3, -0.2, 5.0]);
        let mut p = p0.clone();
        let mut s = AdamState::new(&p);
        let zero = p.zeros_like();
        for _ in 0..3 {
            adam_step(&mut p, &zero, &mut s, &cfg);
        }
        assert_eq!(p, p0);
        let run = || {
            let mut p = p0.clone();
            let mut s = AdamState::new(&p);
            let mut g = p.zeros_like();
            for k in 0..5 {
                g.x0 = Matrix::from_vec(1, 3, vec![k as f64, -1.0, 0.5]).unwrap();
                adam_step(&mut p, &g, &mut s, &cfg);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
