use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Adam with bias correction. Moment buffers follow the store's parameter order.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Tensor> = store
            .iter()
            .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update from the gradients stored in `store`. A non-finite
    /// gradient aborts before any parameter changes.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.m.len() != store.len() {
            return Err(Error::InvalidParameter(format!(
                "optimizer state for {} parameters, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        if let Some(p) = store.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let (val, grad) = (p.value.data_mut(), p.grad.data());
            for i in 0..grad.len() {
                let g = grad[i];
                let mi = &mut m.data_mut()[i];
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                let vi = &mut v.data_mut()[i];
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let mhat = m.data()[i] / bc1;
                let vhat = v.data()[i] / bc2;
                val[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::full(1, 2, 0.7)).unwrap();
        let mut opt = Adam::new(&s, 0.1);
        opt.step(&mut s).unwrap();
        assert_eq!(s.iter().next().unwrap().value.data(), &[0.7, 0.7]);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // f(w) = w, gradient 1
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::scalar(0.0)).unwrap();
        s.get_mut(id).grad = Tensor::scalar(1.0);
        let mut opt = Adam::new(&s, 0.1);
        opt.step(&mut s).unwrap();
        assert!((s.get(id).value.item() + 0.1).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::scalar(0.5)).unwrap();
        s.get_mut(id).grad = Tensor::scalar(f64::NAN);
        let mut opt = Adam::new(&s, 0.1);
        assert!(matches!(opt.step(&mut s), Err(Error::NonFinite(_))));
        assert_eq!(s.get(id).value.item(), 0.5);
    }

    #[test]
    fn converges_on_quadratic() {
        // f(w) = (w0 - 3)^2 + 10 (w1 + 1)^2
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::zeros(1, 2)).unwrap();
        let mut opt = Adam::new(&s, 0.05);
        let mut steps = 0;
        for _ in 0..5000 {
            let w = s.get(id).value.data().to_vec();
            if (w[0] - 3.0).abs() <= 1e-6 && (w[1] + 1.0).abs() <= 1e-6 {
                break;
            }
            s.get_mut(id).grad =
                Tensor::from_vec(1, 2, vec![2.0 * (w[0] - 3.0), 20.0 * (w[1] + 1.0)]).unwrap();
            opt.step(&mut s).unwrap();
            steps += 1;
        }
        let w = s.get(id).value.data();
        assert!(
            (w[0] - 3.0).abs() <= 1e-6 && (w[1] + 1.0).abs() <= 1e-6,
            "{w:?} after {steps}"
        );
    }
}
