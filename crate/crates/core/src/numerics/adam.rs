use crate::{Error, Result};

use super::{ParamStore, Real};

/// Adam moments and hyperparameters for one parameter store.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first_moment: Vec<Vec<F>>,
    second_moment: Vec<Vec<F>>,
}

impl<F: Real> AdamState<F> {
    pub fn new(params: &ParamStore<F>, learning_rate: f64) -> Self {
        Self::with_betas(params, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: &ParamStore<F>, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        assert!(0.0 < beta1 && beta1 < 1.0 && 0.0 < beta2 && beta2 < 1.0);
        let zeros = || {
            params
                .iter()
                .map(|(_, p)| vec![F::zero(); p.value.len()])
                .collect::<Vec<_>>()
        };
        AdamState {
            step: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first_moment: zeros(),
            second_moment: zeros(),
        }
    }

    pub fn first_moment(&self, index: usize) -> &[F] {
        &self.first_moment[index]
    }

    pub fn second_moment(&self, index: usize) -> &[F] {
        &self.second_moment[index]
    }
}

/// One bias-corrected Adam update of every trainable parameter.
///
/// Every parameter with `requires_grad` must carry a gradient.
pub fn adam_step<F: Real>(params: &mut ParamStore<F>, state: &mut AdamState<F>) -> Result<()> {
    if state.first_moment.len() != params.len() {
        return Err(Error::Contract(format!(
            "optimizer tracks {} parameters, store has {}",
            state.first_moment.len(),
            params.len()
        )));
    }
    let ids: Vec<_> = params.iter().map(|(id, _)| id).collect();
    for &id in &ids {
        let p = params.get(id);
        if p.requires_grad && p.grad.is_none() {
            return Err(Error::Contract(format!("parameter {} has no gradient", p.name)));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let b1 = F::of(state.beta1);
    let b2 = F::of(state.beta2);
    let one = F::one();
    let correct1 = F::of(1.0 - state.beta1.powi(t));
    let correct2 = F::of(1.0 - state.beta2.powi(t));
    let lr = F::of(state.learning_rate);
    let eps = F::of(state.epsilon);

    for id in ids {
        let p = params.get_mut(id);
        if !p.requires_grad {
            continue;
        }
        let grad = p.grad.as_ref().expect("checked above");
        let m = &mut state.first_moment[id.index()];
        let v = &mut state.second_moment[id.index()];
        for (((w, &g), m), v) in p.value.data_mut().iter_mut().zip(grad).zip(m).zip(v) {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / correct1;
            let v_hat = *v / correct2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
