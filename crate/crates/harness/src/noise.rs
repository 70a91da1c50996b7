//! Semi-adversarial noise: an oblivious adversarial part plus a mean-zero
//! stochastic part, generated in full before any learner runs.

use drc_core::lds::NoiseSequence;
use drc_core::linalg::Vector;
use crate::error::Result;
use drc_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversarial {
    #[default]
    Zero,
    Constant { w: Vec<f64>, e: Vec<f64> },
    /// `amplitude * sin(2 pi t / period + phase_j)` summed over periods,
    /// with phase `j` offset per coordinate.
    Sinusoid { amplitude: f64, periods: Vec<f64> },
    /// `amplitude * (-1)^t` on every coordinate.
    SignAlternating { amplitude: f64 },
    /// A JSON file holding a `NoiseSequence`.
    Replayed { path: PathBuf },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stochastic {
    #[default]
    None,
    Gaussian { sigma_w: f64, sigma_e: f64 },
    /// Uniform on `[-sqrt(3) sigma, sqrt(3) sigma]` per coordinate.
    Uniform { sigma_w: f64, sigma_e: f64 },
}

impl Stochastic {
    pub fn sigmas(&self) -> (f64, f64) {
        match *self {
            Stochastic::None => (0.0, 0.0),
            Stochastic::Gaussian { sigma_w, sigma_e } | Stochastic::Uniform { sigma_w, sigma_e } => (sigma_w, sigma_e),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default)]
    pub adversarial: Adversarial,
    #[serde(default)]
    pub stochastic: Stochastic,
    #[serde(default)]
    pub seed: u64,
}

fn adversarial_part(adv: &Adversarial, d: usize, t: usize, which: usize, fixed: Option<&[f64]>) -> Vector {
    match adv {
        Adversarial::Zero | Adversarial::Replayed { .. } => Vector::zeros(d),
        Adversarial::Constant { .. } => {
            let v = fixed.unwrap_or(&[]);
            Vector::from_fn(d, |i, _| v.get(i).copied().unwrap_or(0.0))
        }
        Adversarial::Sinusoid { amplitude, periods } => Vector::from_fn(d, |i, _| {
            let phase = (i + which * d) as f64;
            periods
                .iter()
                .map(|p| amplitude * (2.0 * std::f64::consts::PI * t as f64 / p + phase).sin())
                .sum()
        }),
        Adversarial::SignAlternating { amplitude } => {
            let s = if t % 2 == 0 { 1.0 } else { -1.0 };
            Vector::from_element(d, amplitude * s)
        }
    }
}

fn stochastic_part(st: &Stochastic, sigma: f64, d: usize, rng: &mut ChaCha8Rng) -> Vector {
    match st {
        Stochastic::None => Vector::zeros(d),
        Stochastic::Gaussian { .. } => Vector::from_fn(d, |_, _| sigma * rng.sample::<f64, _>(StandardNormal)),
        Stochastic::Uniform { .. } => {
            let r = sigma * 3f64.sqrt();
            Vector::from_fn(d, |_, _| if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 })
        }
    }
}

impl NoiseModel {
    pub fn gaussian(sigma_w: f64, sigma_e: f64, seed: u64) -> Self {
        NoiseModel { adversarial: Adversarial::Zero, stochastic: Stochastic::Gaussian { sigma_w, sigma_e }, seed }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The full length-`t` sequence.
    pub fn generate(&self, dx: usize, dy: usize, t: usize) -> Result<NoiseSequence> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (sw, se) = self.stochastic.sigmas();
        let mut seq = match &self.adversarial {
            Adversarial::Replayed { path } => {
                let text = std::fs::read_to_string(path)?;
                let s: NoiseSequence = serde_json::from_str(&text)?;
                if s.len() < t {
                    return Err(Error::LengthMismatch(s.len(), t).into());
                }
                if s.w.first().is_some_and(|v| v.len() != dx) || s.e.first().is_some_and(|v| v.len() != dy) {
                    return Err(Error::Dimension("replayed noise has the wrong dimensions".into()).into());
                }
                NoiseSequence { w: s.w[..t].to_vec(), e: s.e[..t].to_vec() }
            }
            adv => {
                let (fw, fe) = match adv {
                    Adversarial::Constant { w, e } => (Some(w.as_slice()), Some(e.as_slice())),
                    _ => (None, None),
                };
                NoiseSequence {
                    w: (1..=t).map(|s| adversarial_part(adv, dx, s, 0, fw)).collect(),
                    e: (1..=t).map(|s| adversarial_part(adv, dy, s, 1, fe)).collect(),
                }
            }
        };
        for s in 0..t {
            seq.w[s] += stochastic_part(&self.stochastic, sw, dx, &mut rng);
            seq.e[s] += stochastic_part(&self.stochastic, se, dy, &mut rng);
        }
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_zero() {
        let n = NoiseModel::default().generate(2, 1, 5).unwrap();
        assert!(n.w.iter().chain(&n.e).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn same_seed_same_noise() {
        let m = NoiseModel::gaussian(1.0, 0.5, 9);
        assert_eq!(m.generate(2, 2, 50).unwrap(), m.generate(2, 2, 50).unwrap());
        assert_ne!(m.generate(2, 2, 50).unwrap(), m.clone().with_seed(10).generate(2, 2, 50).unwrap());
    }

    #[test]
    fn alternating_and_constant() {
        let m = NoiseModel { adversarial: Adversarial::SignAlternating { amplitude: 2.0 }, ..Default::default() };
        let n = m.generate(1, 1, 4).unwrap();
        assert_eq!(n.w[0][0], -2.0);
        assert_eq!(n.w[1][0], 2.0);
        let m = NoiseModel { adversarial: Adversarial::Constant { w: vec![1.0], e: vec![3.0] }, ..Default::default() };
        assert_eq!(m.generate(1, 1, 3).unwrap().e[2][0], 3.0);
    }

    #[test]
    fn uniform_is_bounded_with_target_variance() {
        let m = NoiseModel { stochastic: Stochastic::Uniform { sigma_w: 1.0, sigma_e: 0.0 }, ..Default::default() };
        let n = m.generate(1, 1, 20_000).unwrap();
        let var: f64 = n.w.iter().map(|v| v[0] * v[0]).sum::<f64>() / 20_000.0;
        assert!((var - 1.0).abs() < 0.05);
        assert!(n.w.iter().all(|v| v[0].abs() <= 3f64.sqrt()));
    }
}
