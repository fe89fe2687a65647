//! Local UE–BS channels and Rician duct channels.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{c, complex_normal_matrix, complex_normal_vector, outer, CMat, CVec};

/// Walfisch–Ikegami intercept: `beta(d) = 10^-11.2427 * d_km^-3.8`.
const PATH_LOSS_INTERCEPT_LOG10: f64 = -11.2427;
const PATH_LOSS_EXPONENT: f64 = 3.8;

/// Array response of an M-element uniform linear array.
#[derive(Debug, Clone)]
pub struct SteeringVector {
    pub entries: CVec,
    pub angle: f64,
    pub spacing_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct LocalChannel {
    pub beta: f64,
    pub shadow: f64,
    pub fading: CVec,
    pub h: CVec,
}

impl LocalChannel {
    /// Large-scale gain `beta * psi`.
    pub fn gain(&self) -> f64 {
        self.beta * self.shadow
    }
}

#[derive(Debug, Clone)]
pub struct DuctChannel {
    pub matrix: CMat,
    pub aoa: f64,
    pub aod: f64,
    pub k_factor: f64,
    pub loss: f64,
}

/// Linear path gain at `distance_km`.
pub fn path_loss(distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0) || !distance_km.is_finite() {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {distance_km}"
        )));
    }
    Ok(10f64.powf(PATH_LOSS_INTERCEPT_LOG10) * distance_km.powf(-PATH_LOSS_EXPONENT))
}

/// Log-normal shadowing gain with `sigma_db` standard deviation in dB.
pub fn draw_shadowing<R: Rng + ?Sized>(rng: &mut R, sigma_db: f64) -> f64 {
    if sigma_db == 0.0 {
        return 1.0;
    }
    let x = Normal::new(0.0, sigma_db)
        .expect("sigma_db is finite and positive")
        .sample(rng);
    10f64.powf(x / 10.0)
}

/// `q(theta)[m] = exp(j 2 pi m (d/lambda) sin theta)`.
pub fn steering_vector(theta: f64, antennas: usize, spacing_ratio: f64) -> SteeringVector {
    let step = 2.0 * PI * spacing_ratio * theta.sin();
    let entries = CVec::from_fn(antennas, |m, _| Complex64::from_polar(1.0, step * m as f64));
    SteeringVector {
        entries,
        angle: theta,
        spacing_ratio,
    }
}

pub fn draw_local_channel<R: Rng + ?Sized>(
    rng: &mut R,
    beta: f64,
    shadow: f64,
    antennas: usize,
) -> LocalChannel {
    let fading = complex_normal_vector(rng, antennas, 1.0);
    let h = &fading * c((beta * shadow).sqrt());
    LocalChannel {
        beta,
        shadow,
        fading,
        h,
    }
}

/// LoS part of a duct channel, `sqrt(KL/(K+1)) q_rx(theta) q_tx(phi)^H`.
pub fn duct_los(theta: f64, phi: f64, k: f64, loss: f64, antennas: usize, spacing: f64) -> CMat {
    let q_rx = steering_vector(theta, antennas, spacing).entries;
    let q_tx = steering_vector(phi, antennas, spacing).entries;
    outer(&q_rx, &q_tx) * c(los_amplitude(k, loss))
}

/// `sqrt(KL/(K+1))`, well defined as K grows without bound.
pub fn los_amplitude(k: f64, loss: f64) -> f64 {
    (loss * k / (k + 1.0)).sqrt()
}

pub fn nlos_amplitude(k: f64, loss: f64) -> f64 {
    (loss / (k + 1.0)).sqrt()
}

/// Rician duct channel. NLoS entries are i.i.d. CN(0, 1).
pub fn draw_duct_channel<R: Rng + ?Sized>(
    rng: &mut R,
    theta: f64,
    phi: f64,
    k: f64,
    loss: f64,
    antennas: usize,
    spacing: f64,
) -> DuctChannel {
    let nlos = complex_normal_matrix(rng, antennas, antennas, 1.0);
    let matrix =
        duct_los(theta, phi, k, loss, antennas, spacing) + nlos * c(nlos_amplitude(k, loss));
    DuctChannel {
        matrix,
        aoa: theta,
        aod: phi,
        k_factor: k,
        loss,
    }
}
