use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::LinearTransform;
use crate::C64;

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(m: usize, rng: &mut R) -> LinearTransform {
    let g = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) / 2f64.sqrt()
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    LinearTransform::new(q).expect("QR factor is unitary")
}
