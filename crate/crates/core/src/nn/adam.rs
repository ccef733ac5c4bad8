use serde::{Deserialize, Serialize};

use super::{NnError, ParameterSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for every tensor of one [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParameterSet, config: AdamConfig) -> Self {
        let zeros = || params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect::<Vec<_>>();
        Self { config, step: 0, m: zeros(), v: zeros() }
    }

    pub fn first_moment(&self, i: usize) -> &Tensor {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &Tensor {
        &self.v[i]
    }
}

/// Bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut ParameterSet, grads: &[Tensor], state: &mut AdamState) -> Result<(), NnError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NnError::Shape(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.tensors().iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(NnError::Shape(format!(
                "gradient for parameter {} has shape {:?}, parameter has {:?}",
                params.names()[i],
                g.shape(),
                p.shape()
            )));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as f64;
    let c1 = 1.0 - beta1.powf(t);
    let c2 = 1.0 - beta2.powf(t);
    for ((p, g), (m, v)) in params.tensors_mut().iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let (pd, gd) = (p.data_mut(), g.data());
        let (md, vd) = (m.data_mut(), v.data_mut());
        for j in 0..pd.len() {
            md[j] = beta1 * md[j] + (1.0 - beta1) * gd[j];
            vd[j] = beta2 * vd[j] + (1.0 - beta2) * gd[j] * gd[j];
            let mhat = md[j] / c1;
            let vhat = vd[j] / c2;
            pd[j] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(values: &[f64]) -> ParameterSet {
        let mut p = ParameterSet::new();
        for (i, &v) in values.iter().enumerate() {
            p.insert(format!("p{i}"), Tensor::from_vec(vec![v, v])).unwrap();
        }
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = params(&[0.5]);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let g = vec![Tensor::from_vec(vec![3.0, -0.2])];
        adam_step(&mut p, &g, &mut s).unwrap();
        // step 1: mhat = g, vhat = g^2, so delta = -lr * g / (|g| + eps)
        let d = p.tensor(0).data();
        assert!((d[0] - (0.5 - 1e-3)).abs() < 1e-6 * 1e-3 + 1e-12);
        assert!((d[1] - (0.5 + 1e-3)).abs() < 1e-9);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut p = params(&[1.0]);
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &[Tensor::from_vec(vec![1.0, 1.0])], &mut s).unwrap();
        let before = p.clone();
        let m_before = s.first_moment(0).data()[0];
        adam_step(&mut p, &[Tensor::zeros(&[2])], &mut s).unwrap();
        assert!(s.first_moment(0).data()[0] < m_before);
        // momentum still moves parameters, moments decay geometrically
        assert!((s.first_moment(0).data()[0] - 0.9 * m_before).abs() < 1e-15);
        let mut q = params(&[1.0]);
        let mut s2 = AdamState::new(&q, AdamConfig::default());
        adam_step(&mut q, &[Tensor::zeros(&[2])], &mut s2).unwrap();
        assert_eq!(q, params(&[1.0]));
        assert_ne!(p, before);
    }

    #[test]
    fn equal_grads_equal_updates() {
        let mut p = params(&[0.3, 0.3]);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let g = vec![Tensor::from_vec(vec![0.7, 0.7]), Tensor::from_vec(vec![0.7, 0.7])];
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut s).unwrap();
        }
        assert_eq!(p.tensor(0), p.tensor(1));
    }

    #[test]
    fn shape_mismatch() {
        let mut p = params(&[0.3]);
        let mut s = AdamState::new(&p, AdamConfig::default());
        assert!(adam_step(&mut p, &[Tensor::zeros(&[3])], &mut s).is_err());
        assert!(adam_step(&mut p, &[], &mut s).is_err());
    }
}
