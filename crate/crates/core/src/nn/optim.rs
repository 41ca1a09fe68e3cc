use super::{ParamStore, Tensor};

/// AdamW: bias-corrected Adam moments with decoupled weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore, lr: f64, weight_decay: f64) -> Self {
        let zeros = || {
            store
                .iter()
                .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
                .collect()
        };
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update from the gradients currently held in `store`.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let ids: Vec<_> = store.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let grad = store.grad(id).clone();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let value = store.value_mut(id);
            for (((w, &g), mi), vi) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let update = (*mi / c1) / ((*vi / c2).sqrt() + self.eps);
                *w -= self.lr * (update + self.weight_decay * *w);
            }
        }
    }
}

/// Adam step on the whole store; convenience wrapper.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState) {
    state.step(store);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(w: &[f64]) -> (ParamStore, super::super::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::from_vec(1, w.len(), w.to_vec()).unwrap());
        (s, id)
    }

    #[test]
    fn zero_gradient_leaves_parameter() {
        let (mut s, id) = store_with(&[0.3, -1.2]);
        let mut adam = AdamState::new(&s, 0.1, 0.0);
        adam.step(&mut s);
        assert_eq!(s.value(id).data(), &[0.3, -1.2]);
    }

    #[test]
    fn descends_square() {
        let (mut s, id) = store_with(&[1.0]);
        let mut adam = AdamState::new(&s, 0.01, 0.0);
        s.grad_mut(id).data_mut()[0] = 2.0;
        adam.step(&mut s);
        assert!(s.value(id).data()[0] < 1.0);
    }

    #[test]
    fn converges_on_quadratic() {
        let (mut s, id) = store_with(&[1.0, -2.0]);
        let mut adam = AdamState::new(&s, 0.05, 0.0);
        for k in 0..200 {
            s.zero_grad();
            let w = s.value(id).clone();
            let g = s.grad_mut(id);
            g.data_mut()[0] = 2.0 * w.data()[0];
            g.data_mut()[1] = 8.0 * w.data()[1];
            adam.lr = 0.1 * (200 - k) as f64 / 200.0;
            adam.step(&mut s);
        }
        let w = s.value(id).data();
        assert!(w.iter().all(|x| x.abs() < 1e-3), "{w:?}");
    }
}
