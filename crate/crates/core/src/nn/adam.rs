//! Adaptive-moment optimizer with bias correction.

use super::{NnError, Scalar};

/// Adam state. Moments are kept in f64 regardless of the parameter type so
/// repeated runs are bit-stable.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One update over aligned parameter/gradient slice lists. `names` is
    /// consulted only to identify the offending slot on a non-finite gradient.
    pub fn step<T: Scalar>(
        &mut self,
        mut params: Vec<&mut [T]>,
        grads: &[&[T]],
        names: &[String],
    ) -> Result<(), NnError> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(NnError::ShapeMismatch {
                expected: self.m.len(),
                got: params.len(),
                what: "optimizer slot count",
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (slot, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(NnError::ShapeMismatch { expected: p.len(), got: g.len(), what: "optimizer slot" });
            }
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            for k in 0..p.len() {
                let gk = g[k].to_f64();
                if !gk.is_finite() {
                    let name = names.get(slot).cloned().unwrap_or_else(|| format!("slot{slot}"));
                    return Err(NnError::NonFinite { param: format!("{name}[{k}]") });
                }
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                let step = self.lr * m_hat / (v_hat.sqrt() + self.eps);
                p[k] = T::from_f64(p[k].to_f64() - step);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut opt = Adam::new(0.01);
        let mut p = vec![1.0f32, -2.0, 3.0];
        let g = vec![0.0f32; 3];
        opt.step(vec![p.as_mut_slice()], &[g.as_slice()], &["p".into()]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn constant_gradient_step_approaches_lr() {
        // with g = 1 forever, m_hat -> 1 and v_hat -> 1, so |step| -> lr
        let mut opt = Adam::new(0.05);
        let mut p = vec![0.0f64];
        let g = vec![1.0f64];
        let mut last = p[0];
        let mut step = 0.0;
        for _ in 0..2000 {
            opt.step(vec![p.as_mut_slice()], &[g.as_slice()], &["p".into()]).unwrap();
            step = last - p[0];
            last = p[0];
        }
        assert!((step - 0.05).abs() < 1e-4, "step={step}");
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut opt = Adam::new(0.001);
            let mut p = vec![0.5f32, -0.5];
            for k in 0..100 {
                let g = vec![(k as f32 * 0.1).sin(), (k as f32 * 0.2).cos()];
                opt.step(vec![p.as_mut_slice()], &[g.as_slice()], &["p".into()]).unwrap();
            }
            p
        };
        let a = run();
        let b = run();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let mut opt = Adam::new(0.01);
        let mut p = vec![1.0f32, 2.0];
        let g = vec![0.0f32, f32::NAN];
        let err = opt
            .step(vec![p.as_mut_slice()], &[g.as_slice()], &["actor.layer0.w".into()])
            .unwrap_err();
        match err {
            NnError::NonFinite { param } => assert_eq!(param, "actor.layer0.w[1]"),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
