use crate::ad::{Gradients, ParamStore};

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = store.ids().map(|id| vec![0.0; store.get(id).len()]).collect();
        Adam { lr, beta1, beta2, eps, step: 0, m: zeros.clone(), v: zeros }
    }

    /// Applies one update; frozen parameters are left untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            if store.is_frozen(id) {
                continue;
            }
            let g = grads.param(id).values();
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            for ((p, gi), (mi, vi)) in
                store.get_mut(id).values_mut().iter_mut().zip(g).zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::{Tape, Tensor};

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![3.0, -2.0]));
        let mut adam = Adam::new(&store, 0.05, 0.9, 0.999, 1e-8);
        for _ in 0..2000 {
            let mut tape = Tape::new();
            let wv = tape.param(&store, w).unwrap();
            let sq = tape.square(wv);
            let loss = tape.sum(sq);
            let g = tape.backward(loss, &store).unwrap();
            adam.step(&mut store, &g);
        }
        assert!(store.get(w).values().iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![0.7]));
        let frozen = store.add("f", Tensor::vector(vec![1.0]));
        store.set_frozen(frozen, true);
        let mut adam = Adam::new(&store, 0.1, 0.9, 0.999, 1e-8);
        let mut tape = Tape::new();
        let _ = tape.param(&store, w).unwrap();
        let fv = tape.param(&store, frozen).unwrap();
        let sq = tape.square(fv);
        let loss = tape.sum(sq);
        let g = tape.backward(loss, &store).unwrap();
        adam.step(&mut store, &g);
        assert_eq!(store.get(w).values(), &[0.7]);
        assert_eq!(store.get(frozen).values(), &[1.0]);
    }
}
