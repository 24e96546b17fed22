use super::{Gradients, SaeParams, TrainConfig};
use crate::error::{Error, Result};

/// Adam moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m_enc: Vec<f32>,
    v_enc: Vec<f32>,
    m_dec: Vec<f32>,
    v_dec: Vec<f32>,
    m_b: Vec<f32>,
    v_b: Vec<f32>,
    step_count: u64,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new(params: &SaeParams) -> Self {
        let ed = params.d_in() * params.n_features();
        Self {
            m_enc: vec![0.0; ed],
            v_enc: vec![0.0; ed],
            m_dec: vec![0.0; ed],
            v_dec: vec![0.0; ed],
            m_b: vec![0.0; params.d_in()],
            v_b: vec![0.0; params.d_in()],
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

struct Hyper {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bias1: f64,
    bias2: f64,
}

fn update(p: &mut [f32], g: &[f32], m: &mut [f32], v: &mut [f32], h: &Hyper) {
    for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
        let g = f64::from(g);
        let m_new = h.beta1 * f64::from(*m) + (1.0 - h.beta1) * g;
        let v_new = h.beta2 * f64::from(*v) + (1.0 - h.beta2) * g * g;
        *m = m_new as f32;
        *v = v_new as f32;
        let m_hat = m_new / h.bias1;
        let v_hat = v_new / h.bias2;
        *p = (f64::from(*p) - h.lr * m_hat / (v_hat.sqrt() + h.eps)) as f32;
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// Gradients are checked before anything is touched: a NaN or infinity
/// leaves both `state` and `params` unchanged and reports the tensor and flat
/// index.
pub fn adam_step(state: &mut AdamState, params: &mut SaeParams, grads: &Gradients, cfg: &TrainConfig) -> Result<()> {
    if grads.w_enc.len() != state.m_enc.len()
        || grads.w_dec.len() != state.m_dec.len()
        || grads.b_dec.len() != state.m_b.len()
        || params.d_in() != state.m_b.len()
        || params.d_in() * params.n_features() != state.m_enc.len()
    {
        return Err(Error::shape(
            "adam_step",
            "gradients, optimizer state and parameters disagree in size",
        ));
    }
    for (name, t) in grads.tensors() {
        if let Some(i) = t.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("gradient of {name} at optimizer step {}", state.step_count + 1),
                location: format!("flat index {i} (value {})", t[i]),
            });
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let h = Hyper {
        lr: cfg.learning_rate,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.adam_epsilon,
        bias1: 1.0 - cfg.beta1.powi(t),
        bias2: 1.0 - cfg.beta2.powi(t),
    };
    update(params.w_enc.as_mut_slice(), &grads.w_enc, &mut state.m_enc, &mut state.v_enc, &h);
    update(params.w_dec.as_mut_slice(), &grads.w_dec, &mut state.m_dec, &mut state.v_dec, &h);
    update(&mut params.b_dec, &grads.b_dec, &mut state.m_b, &mut state.v_b, &h);

    for (name, t) in [
        ("w_enc", params.w_enc.as_slice()),
        ("w_dec", params.w_dec.as_slice()),
        ("b_dec", params.b_dec.as_slice()),
    ] {
        if let Some(i) = t.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("{name} after optimizer step {}", state.step_count),
                location: format!("flat index {i}"),
            });
        }
    }
    Ok(())
}
