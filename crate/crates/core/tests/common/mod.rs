//! Independent reference computations shared by the integration tests and the
//! acceptance suite. Nothing here calls the estimator, root-MUSIC or rate
//! formulas it is used to check.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ductsim::channel::{draw_duct_channel, steering_vector};
use ductsim::estimation::{lmmse_estimate, match_filter, CeModel, CeObservation, Regime, UeStatistics};
use ductsim::linalg::{CMat, CVec};
use ductsim::pilots::dft_pilots;
use ductsim::precoding::null_projector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn<R: Rng>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

pub fn cn_vec<R: Rng>(rng: &mut R, n: usize, var: f64) -> CVec {
    DVector::from_fn(n, |_, _| cn(rng, var))
}

pub fn cn_mat<R: Rng>(rng: &mut R, r: usize, c: usize, var: f64) -> CMat {
    DMatrix::from_fn(r, c, |_, _| cn(rng, var))
}

pub fn scale(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ---------------------------------------------------------------- LMMSE ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleRegime {
    Ignore,
    RiAware,
    Null,
}

/// Pilot-phase world at one victim BS: a target UE, one copilot, one UE on an
/// orthogonal pilot, and two aggressors whose duct angles stay fixed across
/// draws while the scattered part, the aggressor precoders and all symbols are
/// redrawn.
pub struct CeWorld {
    pub m: usize,
    pub tau: usize,
    pub gains: [f64; 3],
    pub ul_power: f64,
    pub dl_power: f64,
    pub noise_power: f64,
    pub rician_k: f64,
    pub duct_loss: f64,
    pub aoa: [f64; 2],
    pub aod: [f64; 2],
    pub streams: usize,
}

impl CeWorld {
    pub fn reference() -> Self {
        Self {
            m: 8,
            tau: 4,
            gains: [1e-9, 3e-10, 5e-10],
            ul_power: 1e-2,
            dl_power: 10.0,
            noise_power: 1e-12,
            rician_k: 10.0,
            duct_loss: 4e-12,
            aoa: [0.2, -0.35],
            aod: [0.1, 0.4],
            streams: 3,
        }
    }

    pub fn model(&self, literal_null: bool) -> CeModel {
        CeModel {
            pilot_len: self.tau,
            ul_power: self.ul_power,
            dl_power: self.dl_power,
            noise_power: self.noise_power,
            rician_k: self.rician_k,
            duct_loss: self.duct_loss,
            num_aggressors: 2,
            ues_per_aggressor: self.streams,
            paper_literal_null_scalar: literal_null,
        }
    }

    pub fn stats(&self) -> UeStatistics {
        UeStatistics {
            gain: self.gains[0],
            copilot_gain_sum: self.gains[0] + self.gains[1],
        }
    }

    pub fn aoa_steering(&self) -> Vec<CVec> {
        self.aoa.iter().map(|&t| steering_vector(t, self.m, 0.5).entries).collect()
    }

    /// One draw: the target channel and the matched-filter output.
    pub fn draw<R: Rng>(&self, regime: OracleRegime, rng: &mut R) -> (CVec, CVec) {
        let m = self.m;
        let book = dft_pilots(self.tau);
        let phi = book.matrix();
        let h: Vec<CVec> = self.gains.iter().map(|&g| cn_vec(rng, m, g)).collect();
        let pilot_of = [0usize, 0, 1];
        let mut y = CMat::zeros(m, self.tau);
        for (hu, &p) in h.iter().zip(&pilot_of) {
            y += hu * phi.column(p).transpose() * scale(self.ul_power.sqrt());
        }
        if regime != OracleRegime::Ignore {
            for s in 0..2 {
                let d = draw_duct_channel(rng, self.aoa[s], self.aod[s], self.rician_k, self.duct_loss, m, 0.5);
                let mut w = cn_mat(rng, m, self.streams, 1.0);
                if regime == OracleRegime::Null {
                    let a = steering_vector(self.aod[s], m, 0.5).entries;
                    w = null_projector(&[a], m).unwrap() * w;
                }
                let w = &w / scale(w.norm());
                let sym = cn_mat(rng, self.streams, self.tau, 1.0);
                y += &d.matrix * w * sym * scale(self.dl_power.sqrt());
            }
        }
        y += cn_mat(rng, m, self.tau, self.noise_power);
        let obs = CeObservation { y };
        let y_mf = match_filter(&obs, &book.pilot(0), self.ul_power);
        (h[0].clone(), y_mf)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleComparison {
    /// Empirical MSE of the closed-form estimator.
    pub closed: f64,
    /// Empirical MSE of the sample-covariance linear estimator, fitted on
    /// one batch and evaluated on an independent one.
    pub oracle: f64,
    /// `trace(err_cov)` predicted by the closed form.
    pub predicted: f64,
}

impl OracleComparison {
    pub fn relative_gap(&self) -> f64 {
        (self.closed - self.oracle).abs() / self.oracle
    }
}

pub fn lmmse_vs_oracle(world: &CeWorld, regime: OracleRegime, draws: usize, seed: u64, literal_null: bool) -> OracleComparison {
    let mut rng = rng(seed);
    let m = world.m;
    let fit: Vec<(CVec, CVec)> = (0..draws).map(|_| world.draw(regime, &mut rng)).collect();
    let mut c_hy = CMat::zeros(m, m);
    let mut c_yy = CMat::zeros(m, m);
    for (h, y) in &fit {
        c_hy += h * y.adjoint();
        c_yy += y * y.adjoint();
    }
    let w_oracle = c_hy * c_yy.try_inverse().expect("sample covariance is invertible");

    let model = world.model(literal_null);
    let steering = world.aoa_steering();
    let reg = match regime {
        OracleRegime::Ignore => Regime::Ignore,
        OracleRegime::RiAware => Regime::RiAware { aoa_steering: &steering },
        OracleRegime::Null => Regime::Null,
    };
    let stats = world.stats();
    let mut closed = 0.0;
    let mut oracle = 0.0;
    let mut predicted = 0.0;
    for _ in 0..draws {
        let (h, y) = world.draw(regime, &mut rng);
        let est = lmmse_estimate(&y, &stats, &model, reg).unwrap();
        closed += (&h - &est.h_hat).norm_squared();
        oracle += (&h - &w_oracle * &y).norm_squared();
        predicted = est.err_cov.trace().re;
    }
    OracleComparison {
        closed: closed / draws as f64,
        oracle: oracle / draws as f64,
        predicted,
    }
}

// ----------------------------------------------------------- root-MUSIC ----

/// Snapshots from one Rician source behind an isotropic transmitter.
pub fn single_source_snapshots<R: Rng>(theta: f64, m: usize, k: f64, snr_db: f64, snapshots: usize, rng: &mut R) -> CMat {
    let loss = 1.0;
    let d = draw_duct_channel(rng, theta, 0.0, k, loss, m, 0.5);
    let t = CMat::identity(m, m) / scale((m as f64).sqrt());
    let s = cn_mat(rng, m, snapshots, 1.0);
    let mut y = &d.matrix * t * s;
    if snr_db.is_finite() {
        y += cn_mat(rng, m, snapshots, loss / 10f64.powf(snr_db / 10.0));
    }
    y
}

/// Noise subspace by Hermitian eigendecomposition of the sample covariance.
pub fn reference_noise_subspace(y: &CMat, sources: usize) -> CMat {
    let m = y.nrows();
    let r = (y * y.adjoint()) / scale(y.ncols() as f64);
    let eig = nalgebra::linalg::SymmetricEigen::new(r);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let cols: Vec<CVec> = order[..m - sources].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    CMat::from_columns(&cols)
}

fn spectrum(qn: &CMat, theta: f64) -> f64 {
    let m = qn.nrows();
    let a = DVector::from_fn(m, |i, _| Complex64::from_polar(1.0, PI * i as f64 * theta.sin()));
    1.0 / (qn.adjoint() * a).norm_squared()
}

/// Peak of the spectral-MUSIC pseudo-spectrum on a 0.001-degree grid over
/// (-90, 90) degrees, located by a 0.01-degree scan then a fine scan around
/// the best coarse cell.
pub fn grid_music_peak(qn: &CMat) -> f64 {
    let argmax = |lo: f64, hi: f64, step: f64| -> f64 {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n)
            .map(|i| lo + i as f64 * step)
            .max_by(|&a, &b| spectrum(qn, a.to_radians()).total_cmp(&spectrum(qn, b.to_radians())))
            .unwrap()
    };
    let coarse = argmax(-89.99, 89.99, 0.01);
    argmax(coarse - 0.02, coarse + 0.02, 0.001).to_radians()
}

// ------------------------------------------------------------ rate model ----

/// SINR of combiner `c` for a target `h` against the interference-plus-noise
/// covariance `b`: `p |h^H c|^2 / (c^H B c)`.
pub fn quadratic_sinr(h: &CVec, c: &CVec, b: &CMat, p: f64) -> f64 {
    let num = p * h.dotc(c).norm_sqr();
    let den = (c.adjoint() * b * c)[(0, 0)].re;
    num / den
}
