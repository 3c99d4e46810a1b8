//! Finite-difference gradient verification.
//!
//! Analytic gradients are compared against central differences evaluated on
//! f64 shadow copies (step 1e-5). The numeric side is an independent oracle:
//! it only ever calls `forward`.

use super::{Activation, DenseNet, LstmCell, LstmGrads};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Default)]
pub struct GradReport {
    pub n_checked: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

impl GradReport {
    pub fn merge(&mut self, other: &GradReport) {
        self.n_checked += other.n_checked;
        if other.max_rel_err > self.max_rel_err {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst.clone();
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64, what: impl Fn() -> String) {
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        let rel = (analytic - numeric).abs() / denom;
        self.n_checked += 1;
        if rel > self.max_rel_err {
            self.max_rel_err = rel;
            self.worst = format!("{} analytic={analytic:.3e} numeric={numeric:.3e}", what());
        }
    }
}

/// Sum-of-squares loss against a fixed target (no mean, so empty outputs
/// stay well-defined).
fn sse(y: &[f64], target: &[f64]) -> f64 {
    y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Check one dense net against central differences at input `x`.
pub fn check_dense(net: &DenseNet<f64>, x: &[f64], target: &[f64], step: f64) -> GradReport {
    let mut report = GradReport::default();
    if net.param_count() == 0 {
        return report;
    }
    let (y, cache) = net.forward(x).expect("shapes fixed by caller");
    let dy: Vec<f64> = y.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
    let (grads, dx) = net.backward(&cache, &dy).expect("cache is fresh");
    let names = net.param_names("net");
    let analytic = grads.slices();

    let mut probe = net.clone();
    let n_slots = analytic.len();
    for slot in 0..n_slots {
        for k in 0..analytic[slot].len() {
            let base = probe.param_slices()[slot][k];
            probe.param_slices_mut()[slot][k] = base + step;
            let lp = sse(&probe.infer(x).unwrap(), target);
            probe.param_slices_mut()[slot][k] = base - step;
            let lm = sse(&probe.infer(x).unwrap(), target);
            probe.param_slices_mut()[slot][k] = base;
            let numeric = (lp - lm) / (2.0 * step);
            report.record(analytic[slot][k], numeric, || format!("{}[{k}]", names[slot]));
        }
    }
    // input gradient
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        let base = xp[k];
        xp[k] = base + step;
        let lp = sse(&net.infer(&xp).unwrap(), target);
        xp[k] = base - step;
        let lm = sse(&net.infer(&xp).unwrap(), target);
        xp[k] = base;
        let numeric = (lp - lm) / (2.0 * step);
        report.record(dx[k], numeric, || format!("input[{k}]"));
    }
    report
}

/// Check one recurrent cell unrolled over `inputs` against central
/// differences; the loss reads the final hidden state.
pub fn check_lstm(
    cell: &LstmCell<f64>,
    inputs: &[Vec<f64>],
    h0: &[f64],
    c0: &[f64],
    target: &[f64],
    step: f64,
) -> GradReport {
    let unroll = |cell: &LstmCell<f64>, h0: &[f64], c0: &[f64]| -> f64 {
        let (mut h, mut c) = (h0.to_vec(), c0.to_vec());
        for x in inputs {
            let (h2, c2, _) = cell.step(x, &h, &c).unwrap();
            h = h2;
            c = c2;
        }
        sse(&h, target)
    };

    // analytic pass
    let (mut h, mut c) = (h0.to_vec(), c0.to_vec());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (h2, c2, cache) = cell.step(x, &h, &c).unwrap();
        caches.push(cache);
        h = h2;
        c = c2;
    }
    let mut grads = LstmGrads::zeros(cell);
    let mut dh: Vec<f64> = h.iter().zip(target).map(|(a, b)| 2.0 * (a - b)).collect();
    let mut dc = vec![0.0f64; cell.hidden];
    for cache in caches.iter().rev() {
        let (_dx, dh_prev, dc_prev) = cell.step_backward(cache, &dh, &dc, &mut grads);
        dh = dh_prev;
        dc = dc_prev;
    }

    let mut report = GradReport::default();
    let names = cell.param_names("cell");
    let analytic = grads.slices();
    let mut probe = cell.clone();
    for slot in 0..analytic.len() {
        for k in 0..analytic[slot].len() {
            let base = probe.param_slices()[slot][k];
            probe.param_slices_mut()[slot][k] = base + step;
            let lp = unroll(&probe, h0, c0);
            probe.param_slices_mut()[slot][k] = base - step;
            let lm = unroll(&probe, h0, c0);
            probe.param_slices_mut()[slot][k] = base;
            let numeric = (lp - lm) / (2.0 * step);
            report.record(analytic[slot][k], numeric, || format!("{}[{k}]", names[slot]));
        }
    }
    // initial-state gradients exercise the chaining terms
    let mut hp = h0.to_vec();
    for k in 0..hp.len() {
        let base = hp[k];
        hp[k] = base + step;
        let lp = unroll(cell, &hp, c0);
        hp[k] = base - step;
        let lm = unroll(cell, &hp, c0);
        hp[k] = base;
        report.record(dh[k], (lp - lm) / (2.0 * step), || format!("h0[{k}]"));
    }
    let mut cp = c0.to_vec();
    for k in 0..cp.len() {
        let base = cp[k];
        cp[k] = base + step;
        let lp = unroll(cell, h0, &cp);
        cp[k] = base - step;
        let lm = unroll(cell, h0, &cp);
        cp[k] = base;
        report.record(dc[k], (lp - lm) / (2.0 * step), || format!("c0[{k}]"));
    }
    report
}

const HEADS: [Activation; 4] =
    [Activation::Identity, Activation::Tanh, Activation::Softmax, Activation::Relu];

/// Smallest |pre-activation| over all rectifier units. Central differences
/// are only valid away from the kink, so trial configurations that land a
/// rectifier input within the margin are rejected and resampled.
fn min_relu_margin(net: &DenseNet<f64>, x: &[f64]) -> f64 {
    let mut margin = f64::INFINITY;
    let mut cur = x.to_vec();
    for layer in &net.layers {
        let mut z = Vec::with_capacity(layer.out_dim);
        for o in 0..layer.out_dim {
            let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut acc = layer.b[o];
            for i in 0..layer.in_dim {
                acc += row[i] * cur[i];
            }
            z.push(acc);
        }
        if layer.act == Activation::Relu {
            for &v in &z {
                margin = margin.min(v.abs());
            }
        }
        cur = match layer.act {
            Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
            Activation::Identity => z,
            Activation::Tanh => z.iter().map(|&v| v.tanh()).collect(),
            Activation::Softmax => {
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
                let sum: f64 = exps.iter().sum();
                exps.iter().map(|&e| e / sum).collect()
            }
        };
    }
    margin
}

/// Randomized dense-net suite: `trials` random shapes with up to
/// `max_layers` weight layers, all head kinds cycled.
pub fn random_dense_suite<R: Rng>(trials: usize, max_layers: usize, rng: &mut R) -> GradReport {
    let mut report = GradReport::default();
    for t in 0..trials {
        let head = HEADS[t % HEADS.len()];
        let (net, x, target) = loop {
            let n_layers = rng.random_range(1..=max_layers);
            let mut dims = vec![rng.random_range(1..=6)];
            for _ in 0..n_layers {
                dims.push(rng.random_range(1..=6));
            }
            let net = DenseNet::<f64>::new(&dims, head, rng);
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.5..1.5)).collect();
            let target: Vec<f64> =
                (0..*dims.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect();
            if min_relu_margin(&net, &x) > 1e-3 {
                break (net, x, target);
            }
        };
        report.merge(&check_dense(&net, &x, &target, FD_STEP));
    }
    report
}

/// Randomized recurrent suite: `trials` random cells unrolled up to
/// `max_steps` steps.
pub fn random_lstm_suite<R: Rng>(trials: usize, max_steps: usize, rng: &mut R) -> GradReport {
    let mut report = GradReport::default();
    for _ in 0..trials {
        let x_dim = rng.random_range(1..=5);
        let hidden = rng.random_range(1..=5);
        let steps = rng.random_range(1..=max_steps);
        let cell = LstmCell::<f64>::new(x_dim, hidden, rng);
        let inputs: Vec<Vec<f64>> = (0..steps)
            .map(|_| (0..x_dim).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let h0: Vec<f64> = (0..hidden).map(|_| rng.random_range(-0.8..0.8)).collect();
        let c0: Vec<f64> = (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..hidden).map(|_| rng.random_range(-1.0..1.0)).collect();
        report.merge(&check_lstm(&cell, &inputs, &h0, &c0, &target, FD_STEP));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_dense_nets_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let report = random_dense_suite(30, 3, &mut rng);
        assert!(report.n_checked > 0);
        assert!(report.max_rel_err < 1e-4, "worst: {}", report.worst);
    }

    #[test]
    fn recurrent_unroll_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let report = random_lstm_suite(15, 3, &mut rng);
        assert!(report.n_checked > 0);
        assert!(report.max_rel_err < 1e-4, "worst: {}", report.worst);
    }

    #[test]
    fn two_step_unroll_stays_tight() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let cell = LstmCell::<f64>::new(3, 4, &mut rng);
        let inputs = vec![vec![0.3, -0.7, 1.1], vec![-0.2, 0.5, 0.9]];
        let h0 = vec![0.1, -0.1, 0.2, 0.0];
        let c0 = vec![0.0, 0.3, -0.2, 0.1];
        let target = vec![0.5, -0.5, 0.25, 0.0];
        let report = check_lstm(&cell, &inputs, &h0, &c0, &target, FD_STEP);
        assert!(report.max_rel_err < 1e-4, "worst: {}", report.worst);
    }

    #[test]
    fn zero_parameter_net_reports_empty() {
        let net = DenseNet::<f64>::zeros(&[0, 0], Activation::Identity);
        assert_eq!(net.param_count(), 0);
        let report = check_dense(&net, &[], &[], FD_STEP);
        assert_eq!(report.n_checked, 0);
        assert_eq!(report.max_rel_err, 0.0);
    }
}
