//! Gated recurrent (LSTM) cell with caches for backprop through time.

use super::{NnError, Scalar};
use rand::Rng;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One LSTM cell. Gates operate on the concatenation [x, h_prev]; weights
/// are row-major [hidden][x_dim + hidden].
#[derive(Debug, Clone)]
pub struct LstmCell<T: Scalar> {
    pub w_i: Vec<T>,
    pub w_f: Vec<T>,
    pub w_o: Vec<T>,
    pub w_g: Vec<T>,
    pub b_i: Vec<T>,
    pub b_f: Vec<T>,
    pub b_o: Vec<T>,
    pub b_g: Vec<T>,
    pub x_dim: usize,
    pub hidden: usize,
}

/// Everything the backward pass needs from one step.
#[derive(Debug, Clone)]
pub struct LstmCache<T: Scalar> {
    z: Vec<T>, // [x, h_prev]
    c_prev: Vec<T>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmGrads<T: Scalar> {
    pub dw_i: Vec<T>,
    pub dw_f: Vec<T>,
    pub dw_o: Vec<T>,
    pub dw_g: Vec<T>,
    pub db_i: Vec<T>,
    pub db_f: Vec<T>,
    pub db_o: Vec<T>,
    pub db_g: Vec<T>,
}

impl<T: Scalar> LstmGrads<T> {
    pub fn zeros(cell: &LstmCell<T>) -> Self {
        let wl = cell.w_i.len();
        let bl = cell.hidden;
        LstmGrads {
            dw_i: vec![T::zero(); wl],
            dw_f: vec![T::zero(); wl],
            dw_o: vec![T::zero(); wl],
            dw_g: vec![T::zero(); wl],
            db_i: vec![T::zero(); bl],
            db_f: vec![T::zero(); bl],
            db_o: vec![T::zero(); bl],
            db_g: vec![T::zero(); bl],
        }
    }

    pub fn slices(&self) -> Vec<&[T]> {
        vec![
            &self.dw_i, &self.dw_f, &self.dw_o, &self.dw_g,
            &self.db_i, &self.db_f, &self.db_o, &self.db_g,
        ]
    }
}

impl<T: Scalar> LstmCell<T> {
    pub fn new<R: Rng>(x_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let z_dim = x_dim + hidden;
        let bound = 1.0 / (z_dim as f64).sqrt();
        let mat = |rng: &mut R| -> Vec<T> {
            (0..hidden * z_dim).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect()
        };
        LstmCell {
            w_i: mat(rng),
            w_f: mat(rng),
            w_o: mat(rng),
            w_g: mat(rng),
            b_i: vec![T::zero(); hidden],
            // forget gate starts open
            b_f: vec![T::from_f64(1.0); hidden],
            b_o: vec![T::zero(); hidden],
            b_g: vec![T::zero(); hidden],
            x_dim,
            hidden,
        }
    }

    pub fn zeros(x_dim: usize, hidden: usize) -> Self {
        let z_dim = x_dim + hidden;
        LstmCell {
            w_i: vec![T::zero(); hidden * z_dim],
            w_f: vec![T::zero(); hidden * z_dim],
            w_o: vec![T::zero(); hidden * z_dim],
            w_g: vec![T::zero(); hidden * z_dim],
            b_i: vec![T::zero(); hidden],
            b_f: vec![T::zero(); hidden],
            b_o: vec![T::zero(); hidden],
            b_g: vec![T::zero(); hidden],
            x_dim,
            hidden,
        }
    }

    pub fn zero_state(&self) -> (Vec<T>, Vec<T>) {
        (vec![T::zero(); self.hidden], vec![T::zero(); self.hidden])
    }

    pub fn param_count(&self) -> usize {
        4 * self.w_i.len() + 4 * self.hidden
    }

    fn gate(&self, w: &[T], b: &[T], z: &[T]) -> Vec<f64> {
        let z_dim = z.len();
        let mut out = Vec::with_capacity(self.hidden);
        for o in 0..self.hidden {
            let row = &w[o * z_dim..(o + 1) * z_dim];
            let mut acc = b[o].to_f64();
            for i in 0..z_dim {
                acc += row[i].to_f64() * z[i].to_f64();
            }
            out.push(acc);
        }
        out
    }

    /// Standard gated update; returns (h, c, cache).
    pub fn step(
        &self,
        x: &[T],
        h_prev: &[T],
        c_prev: &[T],
    ) -> Result<(Vec<T>, Vec<T>, LstmCache<T>), NnError> {
        if x.len() != self.x_dim {
            return Err(NnError::ShapeMismatch { expected: self.x_dim, got: x.len(), what: "lstm input" });
        }
        if h_prev.len() != self.hidden || c_prev.len() != self.hidden {
            return Err(NnError::ShapeMismatch {
                expected: self.hidden,
                got: h_prev.len(),
                what: "lstm state",
            });
        }
        let mut z = Vec::with_capacity(self.x_dim + self.hidden);
        z.extend_from_slice(x);
        z.extend_from_slice(h_prev);
        let i: Vec<f64> = self.gate(&self.w_i, &self.b_i, &z).iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = self.gate(&self.w_f, &self.b_f, &z).iter().map(|&v| sigmoid(v)).collect();
        let o: Vec<f64> = self.gate(&self.w_o, &self.b_o, &z).iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = self.gate(&self.w_g, &self.b_g, &z).iter().map(|&v| v.tanh()).collect();
        let mut c = Vec::with_capacity(self.hidden);
        let mut tanh_c = Vec::with_capacity(self.hidden);
        let mut h = Vec::with_capacity(self.hidden);
        for k in 0..self.hidden {
            let ck = f[k] * c_prev[k].to_f64() + i[k] * g[k];
            let tk = ck.tanh();
            c.push(ck);
            tanh_c.push(tk);
            h.push(T::from_f64(o[k] * tk));
        }
        let c_out: Vec<T> = c.iter().map(|&v| T::from_f64(v)).collect();
        let cache = LstmCache { z, c_prev: c_prev.to_vec(), i, f, o, g, tanh_c };
        Ok((h, c_out, cache))
    }

    /// Backward through one step. `dh`/`dc` are dL w.r.t. this step's outputs
    /// (dc already includes any contribution flowing in from the next step).
    /// Gradients accumulate into `grads`; returns (dx, dh_prev, dc_prev).
    pub fn step_backward(
        &self,
        cache: &LstmCache<T>,
        dh: &[T],
        dc: &[T],
        grads: &mut LstmGrads<T>,
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let hd = self.hidden;
        let z_dim = cache.z.len();
        let mut dc_total = vec![0.0f64; hd];
        let mut di = vec![0.0f64; hd];
        let mut df = vec![0.0f64; hd];
        let mut do_ = vec![0.0f64; hd];
        let mut dg = vec![0.0f64; hd];
        for k in 0..hd {
            let dhk = dh[k].to_f64();
            do_[k] = dhk * cache.tanh_c[k];
            dc_total[k] = dc[k].to_f64() + dhk * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
            di[k] = dc_total[k] * cache.g[k];
            df[k] = dc_total[k] * cache.c_prev[k].to_f64();
            dg[k] = dc_total[k] * cache.i[k];
        }
        // through the gate nonlinearities
        let mut dz = vec![0.0f64; z_dim];
        let mut dc_prev = vec![0.0f64; hd];
        let apply = |pre_d: &[f64], gate_out: &[f64], w: &[T], dw: &mut [T], db: &mut [T], sig: bool, dz: &mut [f64]| {
            for k in 0..hd {
                let local = if sig {
                    pre_d[k] * gate_out[k] * (1.0 - gate_out[k])
                } else {
                    pre_d[k] * (1.0 - gate_out[k] * gate_out[k])
                };
                db[k] = T::from_f64(db[k].to_f64() + local);
                let wrow = &w[k * z_dim..(k + 1) * z_dim];
                let dwrow = &mut dw[k * z_dim..(k + 1) * z_dim];
                for j in 0..z_dim {
                    dwrow[j] = T::from_f64(dwrow[j].to_f64() + local * cache.z[j].to_f64());
                    dz[j] += local * wrow[j].to_f64();
                }
            }
        };
        apply(&di, &cache.i, &self.w_i, &mut grads.dw_i, &mut grads.db_i, true, &mut dz);
        apply(&df, &cache.f, &self.w_f, &mut grads.dw_f, &mut grads.db_f, true, &mut dz);
        apply(&do_, &cache.o, &self.w_o, &mut grads.dw_o, &mut grads.db_o, true, &mut dz);
        apply(&dg, &cache.g, &self.w_g, &mut grads.dw_g, &mut grads.db_g, false, &mut dz);
        for k in 0..hd {
            dc_prev[k] = dc_total[k] * cache.f[k];
        }
        let dx: Vec<T> = dz[..self.x_dim].iter().map(|&v| T::from_f64(v)).collect();
        let dh_prev: Vec<T> = dz[self.x_dim..].iter().map(|&v| T::from_f64(v)).collect();
        let dc_prev: Vec<T> = dc_prev.iter().map(|&v| T::from_f64(v)).collect();
        (dx, dh_prev, dc_prev)
    }

    pub fn param_slices(&self) -> Vec<&[T]> {
        vec![
            &self.w_i, &self.w_f, &self.w_o, &self.w_g,
            &self.b_i, &self.b_f, &self.b_o, &self.b_g,
        ]
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            self.w_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.w_g.as_mut_slice(),
            self.b_i.as_mut_slice(),
            self.b_f.as_mut_slice(),
            self.b_o.as_mut_slice(),
            self.b_g.as_mut_slice(),
        ]
    }

    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        ["w_i", "w_f", "w_o", "w_g", "b_i", "b_f", "b_o", "b_g"]
            .iter()
            .map(|n| format!("{prefix}.{n}"))
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> LstmCell<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::from_f64(x.to_f64())).collect();
        LstmCell {
            w_i: c(&self.w_i),
            w_f: c(&self.w_f),
            w_o: c(&self.w_o),
            w_g: c(&self.w_g),
            b_i: c(&self.b_i),
            b_f: c(&self.b_f),
            b_o: c(&self.b_o),
            b_g: c(&self.b_g),
            x_dim: self.x_dim,
            hidden: self.hidden,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cell_fixes_zero_state() {
        let cell = LstmCell::<f32>::zeros(3, 4);
        let (h0, c0) = cell.zero_state();
        let (h, c, _) = cell.step(&[1.0, -2.0, 0.5], &h0, &c0).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hidden_state_is_tanh_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cell = LstmCell::<f32>::new(6, 8, &mut rng);
        let (mut h, mut c) = cell.zero_state();
        for t in 0..50 {
            let x: Vec<f32> = (0..6).map(|i| ((t * 6 + i) as f32).sin() * 4.0).collect();
            let (h2, c2, _) = cell.step(&x, &h, &c).unwrap();
            h = h2;
            c = c2;
            assert!(h.iter().all(|&v| v.abs() < 1.0));
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let cell = LstmCell::<f32>::zeros(3, 4);
        let (h, c) = cell.zero_state();
        assert!(cell.step(&[1.0], &h, &c).is_err());
    }
}
