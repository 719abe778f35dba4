use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma;

use crate::{Error, Result};

/// Mantegna's scale for the numerator normal:
/// `σ_u = [Γ(1+β)·sin(πβ/2) / (Γ((1+β)/2)·β·2^((β−1)/2))]^(1/β)`.
pub fn mantegna_sigma(beta: f64) -> f64 {
    let num = gamma(1.0 + beta) * (PI * beta / 2.0).sin();
    let den = gamma((1.0 + beta) / 2.0) * beta * 2f64.powf((beta - 1.0) / 2.0);
    (num / den).powf(1.0 / beta)
}

/// One Lévy-stable step of dimension `d`, scaled by `alpha`.
///
/// Each coordinate is `alpha·u/|v|^(1/β)` with `u ~ N(0, σ_u²)` and
/// `v ~ N(0, 1)`. The same number of draws is consumed whatever `alpha` is.
pub fn levy_step<R: Rng + ?Sized>(alpha: f64, beta: f64, d: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::Parameter(format!("levy beta must lie in (0, 2], got {beta}")));
    }
    let sigma = mantegna_sigma(beta);
    Ok((0..d)
        .map(|_| {
            let u: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
            let v: f64 = rng.sample(StandardNormal);
            if alpha == 0.0 {
                0.0
            } else {
                alpha * u / v.abs().powf(1.0 / beta)
            }
        })
        .collect())
}
