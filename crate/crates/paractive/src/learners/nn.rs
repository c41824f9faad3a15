//! One-hidden-layer neural network trained by SGD with per-coordinate
//! adaptive step sizes. Sigmoid hidden units, linear output, logistic loss
//! scaled by the importance weight `1/p`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ADAPTIVE_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnConfig {
    pub hidden: usize,
    pub step: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig {
            hidden: 100,
            step: 0.07,
        }
    }
}

/// Network state: `W1 (hidden x input)`, `b1`, `w2`, `b2`, plus one
/// accumulated-squared-gradient cell per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralNet {
    pub dim: usize,
    pub hidden: usize,
    pub step: f64,
    /// Flat parameter vector in the order `W1 (row-major), b1, w2, b2`.
    pub params: Vec<f64>,
    pub accumulators: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-m))`, computed without overflow.
fn logistic_loss(margin: f64) -> f64 {
    if margin >= 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

impl NeuralNet {
    /// Weights initialized uniformly in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(dim: usize, cfg: NnConfig, rng: &mut ChaCha8Rng) -> Self {
        let hidden = cfg.hidden;
        let count = hidden * dim + hidden + hidden + 1;
        let mut params = Vec::with_capacity(count);
        let in_bound = 1.0 / (dim as f64).sqrt();
        for _ in 0..hidden * dim + hidden {
            params.push(rng.gen_range(-in_bound..=in_bound));
        }
        let hid_bound = 1.0 / (hidden as f64).sqrt();
        for _ in 0..hidden + 1 {
            params.push(rng.gen_range(-hid_bound..=hid_bound));
        }
        NeuralNet {
            dim,
            hidden,
            step: cfg.step,
            params,
            accumulators: vec![0.0; count],
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (w1, rest) = self.params.split_at(self.hidden * self.dim);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.hidden);
        (w1, b1, w2, b2[0])
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let (w1, b1, _, _) = self.split();
        (0..self.hidden)
            .map(|h| {
                let row = &w1[h * self.dim..(h + 1) * self.dim];
                let z = b1[h] + row.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>();
                sigmoid(z)
            })
            .collect()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "input dimension mismatch");
        let (_, _, w2, b2) = self.split();
        let a = self.hidden_activations(x);
        b2 + w2.iter().zip(a.iter()).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Importance-weighted logistic loss `(1/p) * log(1 + exp(-y f(x)))`.
    pub fn loss(&self, x: &[f64], y: f64, p: f64) -> f64 {
        logistic_loss(y * self.score(x)) / p
    }

    /// Analytic gradient of `loss` with respect to the flat parameter
    /// vector.
    pub fn gradient(&self, x: &[f64], y: f64, p: f64) -> Vec<f64> {
        let (_, _, w2, _) = self.split();
        let a = self.hidden_activations(x);
        let f = {
            let (_, _, w2, b2) = self.split();
            b2 + w2.iter().zip(a.iter()).map(|(w, v)| w * v).sum::<f64>()
        };
        // d/df log(1+exp(-y f)) = -y * sigmoid(-y f)
        let df = -y * sigmoid(-y * f) / p;
        let mut grad = vec![0.0; self.param_count()];
        let (gw1, rest) = grad.split_at_mut(self.hidden * self.dim);
        let (gb1, rest) = rest.split_at_mut(self.hidden);
        let (gw2, gb2) = rest.split_at_mut(self.hidden);
        for h in 0..self.hidden {
            gw2[h] = df * a[h];
            let dz = df * w2[h] * a[h] * (1.0 - a[h]);
            gb1[h] = dz;
            for (j, &v) in x.iter().enumerate() {
                gw1[h * self.dim + j] = dz * v;
            }
        }
        gb2[0] = df;
        grad
    }

    /// One adaptive SGD step on a single importance-weighted example.
    pub fn update_one(&mut self, x: &[f64], y: f64, p: f64) -> Result<u64> {
        let grad = self.gradient(x, y, p);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(
                "non-finite gradient in neural-net update".to_string(),
            ));
        }
        for ((w, acc), g) in self
            .params
            .iter_mut()
            .zip(self.accumulators.iter_mut())
            .zip(grad.iter())
        {
            *acc += g * g;
            *w -= self.step * g / (acc.sqrt() + ADAPTIVE_EPS);
        }
        // forward plus backward pass
        Ok(2)
    }

    /// Worst relative deviation between the analytic gradient and central
    /// finite differences with step `h`, over every parameter. Denominators
    /// are floored at 1e-2 so truncation noise on near-zero coordinates is
    /// judged on an absolute scale.
    pub fn max_gradient_rel_error(&mut self, x: &[f64], y: f64, p: f64, h: f64) -> f64 {
        let grad = self.gradient(x, y, p);
        let mut worst = 0.0f64;
        // indexed loop: each iteration perturbs `self.params[i]` in place
        #[allow(clippy::needless_range_loop)]
        for i in 0..self.param_count() {
            let orig = self.params[i];
            self.params[i] = orig + h;
            let fp = self.loss(x, y, p);
            self.params[i] = orig - h;
            let fm = self.loss(x, y, p);
            self.params[i] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs()).max(1e-2);
            worst = worst.max((fd - grad[i]).abs() / denom);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn net(seed: u64, dim: usize) -> NeuralNet {
        let mut rng = substream(seed, "nn-test", 0);
        NeuralNet::new(dim, NnConfig { hidden: 7, step: 0.07 }, &mut rng)
    }

    #[test]
    fn zero_weights_score_zero() {
        let mut n = net(1, 3);
        n.params.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(n.score(&[0.3, -2.0, 5.0]), 0.0);
    }

    #[test]
    fn logistic_derivative_at_zero_margin() {
        let mut n = net(2, 2);
        n.params.iter_mut().for_each(|w| *w = 0.0);
        // f(x) = 0, y = +1: dl/df = -0.5, visible in the output-bias slot
        let grad = n.gradient(&[1.0, 1.0], 1.0, 1.0);
        let db2 = grad[n.param_count() - 1];
        assert!((db2 - (-0.5)).abs() < 1e-15);
    }

    #[test]
    fn unit_weight_matches_unweighted_gradient() {
        let n = net(3, 4);
        let x = [0.2, -0.7, 1.1, 0.4];
        let g1 = n.gradient(&x, -1.0, 1.0);
        let g2 = n.gradient(&x, -1.0, 0.5);
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_difference_slice() {
        use rand::Rng;
        let mut rng = substream(11, "nn-fd", 0);
        let mut n = net(11, 5);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let p = 0.6;
        let grad = n.gradient(&x, y, p);
        let h = 1e-4;
        for _ in 0..5 {
            let i = rng.gen_range(0..n.param_count());
            let orig = n.params[i];
            n.params[i] = orig + h;
            let fp = n.loss(&x, y, p);
            n.params[i] = orig - h;
            let fm = n.loss(&x, y, p);
            n.params[i] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let denom = grad[i].abs().max(fd.abs()).max(1e-2);
            assert!(
                (fd - grad[i]).abs() / denom <= 1e-5,
                "param {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn accumulators_monotone() {
        let mut n = net(4, 2);
        for i in 0..20 {
            let before = n.accumulators.clone();
            n.update_one(&[i as f64 * 0.1, -0.3], if i % 2 == 0 { 1.0 } else { -1.0 }, 0.8)
                .unwrap();
            for (a, b) in before.iter().zip(n.accumulators.iter()) {
                assert!(b >= a);
            }
            assert!(n.params.iter().all(|w| w.is_finite()));
        }
    }
}
