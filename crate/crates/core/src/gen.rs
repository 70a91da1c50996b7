//! Random instances for tests and experiments.

use crate::lds::{Ldc, StateSpaceSystem};
use crate::linalg::{spectral_radius, Mat};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Gaussian matrix rescaled to spectral radius `rho`.
pub fn with_radius<R: Rng + ?Sized>(rng: &mut R, n: usize, rho: f64) -> Mat {
    loop {
        let a = gaussian(rng, n, n);
        let r = spectral_radius(&a);
        if r > 1e-3 {
            return a * (rho / r);
        }
    }
}

/// Plant with Gaussian `B`, `C` and `A` of spectral radius `rho`.
pub fn plant<R: Rng + ?Sized>(rng: &mut R, dx: usize, du: usize, dy: usize, rho: f64) -> StateSpaceSystem {
    let a = with_radius(rng, dx, rho);
    let b = gaussian(rng, dx, du) / (dx as f64).sqrt();
    let c = gaussian(rng, dy, dx) / (dx as f64).sqrt();
    StateSpaceSystem::plant(a, b, c).expect("conformable by construction")
}

/// Controller with state matrix of spectral radius `rho` and gains scaled by `gain`.
pub fn controller<R: Rng + ?Sized>(rng: &mut R, dpi: usize, du: usize, dy: usize, rho: f64, gain: f64) -> Ldc {
    let a = if dpi == 0 { Mat::zeros(0, 0) } else { with_radius(rng, dpi, rho) };
    let b = gaussian(rng, dpi, dy) * gain;
    let c = gaussian(rng, du, dpi) * gain;
    let d = gaussian(rng, du, dy) * gain;
    Ldc::new(a, b, c, d).expect("conformable by construction")
}

/// Multiply every entry by `1 + scale * N(0, 1)`.
pub fn perturb<R: Rng + ?Sized>(rng: &mut R, m: &Mat, scale: f64) -> Mat {
    m.map(|v| v * (1.0 + scale * rng.sample::<f64, _>(StandardNormal)))
}
