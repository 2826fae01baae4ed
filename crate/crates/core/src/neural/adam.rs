use super::params::{GroupFilter, Grads, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moments per parameter plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = store.entries().iter().map(|e| Tensor::zeros(e.value.shape())).collect();
        AdamState {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update on the parameters admitted by `filter`.
/// The step counter advances once per call regardless of the filter.
pub fn adam_step(params: &mut ParamStore, grads: &Grads, state: &mut AdamState, filter: GroupFilter) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} params, {} grads, {} moments", params.len(), grads.len(), state.m.len()),
        ));
    }
    for id in params.ids() {
        let (p, g) = (params.value(id), grads.get(id));
        if p.shape() != g.shape() || state.m[id.index()].shape() != p.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("{}: param {:?}, grad {:?}", params.entry(id).name, p.shape(), g.shape()),
            ));
        }
    }

    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        if !filter.admits(params.group(id)) {
            continue;
        }
        let g = grads.get(id).data();
        let m = state.m[id.index()].data_mut();
        let v = state.v[id.index()].data_mut();
        let p = params.value_mut(id).data_mut();
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::params::Group;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("e", Group::Extractor, Tensor::vector(vec![1.0, -2.0])).unwrap();
        s.add("g", Group::Generator, Tensor::vector(vec![0.5])).unwrap();
        s
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = store();
        let mut state = AdamState::new(&p, AdamConfig { lr: 0.1, ..Default::default() });
        let mut grads = Grads::zeros_like(&p);
        grads.get_mut(p.id("e").unwrap()).data_mut().copy_from_slice(&[3.0, -0.01]);
        adam_step(&mut p, &grads, &mut state, GroupFilter::Both).unwrap();
        let e = p.value(p.id("e").unwrap()).data();
        assert!((e[0] - 0.9).abs() < 1e-6);
        assert!((e[1] - (-1.9)).abs() < 1e-5);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_grads_leave_params() {
        let mut p = store();
        let before = p.clone();
        let mut state = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &Grads::zeros_like(&before), &mut state, GroupFilter::Both).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn filter_isolates_groups() {
        let mut p = store();
        let before = p.clone();
        let mut state = AdamState::new(&p, AdamConfig::default());
        let mut grads = Grads::zeros_like(&p);
        grads.get_mut(p.id("e").unwrap()).data_mut().copy_from_slice(&[1.0, 1.0]);
        grads.get_mut(p.id("g").unwrap()).data_mut().copy_from_slice(&[1.0]);
        adam_step(&mut p, &grads, &mut state, GroupFilter::Extractor).unwrap();
        let g = p.id("g").unwrap();
        assert_eq!(p.value(g).data()[0].to_bits(), before.value(g).data()[0].to_bits());
        assert_ne!(p.value(p.id("e").unwrap()), before.value(p.id("e").unwrap()));
    }

    #[test]
    fn mismatched_grads_rejected() {
        let mut p = store();
        let mut state = AdamState::new(&p, AdamConfig::default());
        let mut other = ParamStore::new();
        other.add("x", Group::Extractor, Tensor::vector(vec![1.0])).unwrap();
        assert!(adam_step(&mut p, &Grads::zeros_like(&other), &mut state, GroupFilter::Both).is_err());
    }
}
