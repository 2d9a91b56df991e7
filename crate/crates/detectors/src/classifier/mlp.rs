//! Two-hidden-layer perceptron with logistic output, trained by
//! mini-batch gradient descent with momentum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::DetectorError;
use crate::feature::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: (usize, usize),
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: (64, 32),
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 200,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// One dense layer, row-major weights (fan_in x fan_out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl Layer {
    fn init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        Layer {
            fan_in,
            fan_out,
            w: (0..fan_in * fan_out)
                .map(|_| normal(rng) * std)
                .collect(),
            b: vec![0.0; fan_out],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        for (i, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let row = &self.w[i * self.fan_out..(i + 1) * self.fan_out];
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += xv * wv;
            }
        }
        out
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.random();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.random();
        return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer1: Layer,
    layer2: Layer,
    out: Layer,
}

impl MlpModel {
    pub fn fit(cfg: &MlpConfig, data: &[(FeatureVector, bool)]) -> Result<Self, DetectorError> {
        if cfg.batch_size == 0 || cfg.hidden.0 == 0 || cfg.hidden.1 == 0 {
            return Err(DetectorError::InvalidConfig(
                "mlp needs positive batch size and layer widths".into(),
            ));
        }
        let dim = data[0].0.values.len();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut model = MlpModel {
            layer1: Layer::init(dim, cfg.hidden.0, &mut rng),
            layer2: Layer::init(cfg.hidden.0, cfg.hidden.1, &mut rng),
            out: Layer::init(cfg.hidden.1, 1, &mut rng),
        };
        let mut velocity = Velocity::zeros(&model);
        let mut order: Vec<usize> = (0..data.len()).collect();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                let mut grads = Velocity::zeros(&model);
                for &i in chunk {
                    let (v, y) = &data[i];
                    model.accumulate(&v.values, *y, 1.0 / chunk.len() as f64, &mut grads);
                }
                velocity.step(&mut model, &grads, cfg.learning_rate, cfg.momentum);
            }
        }
        Ok(model)
    }

    /// Probability of the malicious class.
    pub(crate) fn score(&self, x: &[f64]) -> f64 {
        let mut h1 = self.layer1.forward(x);
        relu(&mut h1);
        let mut h2 = self.layer2.forward(&h1);
        relu(&mut h2);
        sigmoid(self.out.forward(&h2)[0])
    }

    /// Adds this sample's BCE gradients (scaled) into `grads`.
    fn accumulate(&self, x: &[f64], malicious: bool, scale: f64, grads: &mut Velocity) {
        let z1 = self.layer1.forward(x);
        let mut h1 = z1.clone();
        relu(&mut h1);
        let z2 = self.layer2.forward(&h1);
        let mut h2 = z2.clone();
        relu(&mut h2);
        let logit = self.out.forward(&h2)[0];
        let p = sigmoid(logit);
        let y = if malicious { 1.0 } else { 0.0 };
        let dz = (p - y) * scale;

        grads.out_b[0] += dz;
        let mut dh2 = vec![0.0; h2.len()];
        for j in 0..h2.len() {
            grads.out_w[j] += dz * h2[j];
            dh2[j] = dz * self.out.w[j];
        }
        for (j, d) in dh2.iter_mut().enumerate() {
            if z2[j] <= 0.0 {
                *d = 0.0;
            }
        }
        let dz2 = dh2;
        let mut dh1 = vec![0.0; h1.len()];
        for (i, &hv) in h1.iter().enumerate() {
            let row = &mut grads.l2_w[i * self.layer2.fan_out..(i + 1) * self.layer2.fan_out];
            for (j, &d) in dz2.iter().enumerate() {
                row[j] += d * hv;
                dh1[i] += d * self.layer2.w[i * self.layer2.fan_out + j];
            }
        }
        for (j, &d) in dz2.iter().enumerate() {
            grads.l2_b[j] += d;
        }
        for (i, d) in dh1.iter_mut().enumerate() {
            if z1[i] <= 0.0 {
                *d = 0.0;
            }
        }
        let dz1 = dh1;
        for (i, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let row = &mut grads.l1_w[i * self.layer1.fan_out..(i + 1) * self.layer1.fan_out];
            for (j, &d) in dz1.iter().enumerate() {
                row[j] += d * xv;
            }
        }
        for (j, &d) in dz1.iter().enumerate() {
            grads.l1_b[j] += d;
        }
    }
}

/// Momentum buffers (also reused as per-batch gradient accumulators).
#[derive(Debug, Clone)]
struct Velocity {
    l1_w: Vec<f64>,
    l1_b: Vec<f64>,
    l2_w: Vec<f64>,
    l2_b: Vec<f64>,
    out_w: Vec<f64>,
    out_b: Vec<f64>,
}

impl Velocity {
    fn zeros(m: &MlpModel) -> Self {
        Velocity {
            l1_w: vec![0.0; m.layer1.w.len()],
            l1_b: vec![0.0; m.layer1.b.len()],
            l2_w: vec![0.0; m.layer2.w.len()],
            l2_b: vec![0.0; m.layer2.b.len()],
            out_w: vec![0.0; m.out.w.len()],
            out_b: vec![0.0; m.out.b.len()],
        }
    }

    /// v = momentum * v - lr * g; w += v
    fn step(&mut self, m: &mut MlpModel, grads: &Velocity, lr: f64, momentum: f64) {
        let pairs: [(&mut Vec<f64>, &Vec<f64>, &mut Vec<f64>); 6] = [
            (&mut m.layer1.w, &grads.l1_w, &mut self.l1_w),
            (&mut m.layer1.b, &grads.l1_b, &mut self.l1_b),
            (&mut m.layer2.w, &grads.l2_w, &mut self.l2_w),
            (&mut m.layer2.b, &grads.l2_b, &mut self.l2_b),
            (&mut m.out.w, &grads.out_w, &mut self.out_w),
            (&mut m.out.b, &grads.out_b, &mut self.out_b),
        ];
        for (w, g, v) in pairs {
            for i in 0..w.len() {
                v[i] = momentum * v[i] - lr * g[i];
                w[i] += v[i];
            }
        }
    }
}
