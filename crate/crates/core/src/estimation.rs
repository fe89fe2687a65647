//! Pilot-phase signal model, matched filtering and LMMSE channel estimation.
//!
//! Three estimator regimes are supported:
//!
//! - [`Regime::Ignore`]: the estimator assumes there is no remote interference.
//! - [`Regime::RiAware`]: the estimator models the duct interference through
//!   its expected covariance, using one AoA steering vector per aggressor.
//! - [`Regime::Null`]: aggressors null their LoS path, so only the scattered
//!   part of the duct remains and the estimator is a scalar filter.
//!
//! In every regime the estimate is `tau * g * A^-1 * y_mf`, where `g` is the
//! UE's large-scale gain and `A` is the covariance of the matched-filter
//! output under that regime's model.

use rand::Rng;

use crate::channel::DuctChannel;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{c, complex_normal_matrix, hermitian_inverse, identity, outer, trace_re, CMat, CVec};
use crate::pilots::PilotBook;
use crate::precoding::PrecoderSet;
use crate::scenario::SystemSide;

/// Received pilot block at one BS, `M x tau`.
#[derive(Debug, Clone)]
pub struct CeObservation {
    pub y: CMat,
}

/// Powers and duct statistics needed by the pilot phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CeModel {
    pub pilot_len: usize,
    pub ul_power: f64,
    pub dl_power: f64,
    pub noise_power: f64,
    pub rician_k: f64,
    pub duct_loss: f64,
    pub num_aggressors: usize,
    pub ues_per_aggressor: usize,
    pub paper_literal_null_scalar: bool,
}

impl CeModel {
    pub fn from_config(cfg: &SystemConfig, ul_power: f64) -> Self {
        Self {
            pilot_len: cfg.pilot_len,
            ul_power,
            dl_power: cfg.dl_power,
            noise_power: cfg.noise_power,
            rician_k: cfg.rician_k,
            duct_loss: cfg.duct_loss,
            num_aggressors: cfg.num_aggressor_bs,
            ues_per_aggressor: cfg.ues_per_cell,
            paper_literal_null_scalar: cfg.paper_literal_null_scalar,
        }
    }

    fn los_power(&self) -> f64 {
        self.rician_k * self.duct_loss / (self.rician_k + 1.0)
    }

    fn nlos_power(&self) -> f64 {
        self.duct_loss / (self.rician_k + 1.0)
    }

    /// RI power left on each antenna after matched filtering when the LoS
    /// path has been nulled: `(p_dl/p_ul) tau |S| L/(K+1)`. With
    /// `paper_literal_null_scalar` the literally printed variant
    /// `p_ul tau |S| (|U_s|-1) L / (p_dl (K+1))` is used instead.
    pub fn null_residual(&self) -> f64 {
        let tau = self.pilot_len as f64;
        let s = self.num_aggressors as f64;
        if self.paper_literal_null_scalar {
            if self.dl_power == 0.0 {
                return 0.0;
            }
            let streams = self.ues_per_aggressor.saturating_sub(1) as f64;
            self.ul_power * tau * s * streams * self.nlos_power() / self.dl_power
        } else {
            self.dl_power / self.ul_power * tau * s * self.nlos_power()
        }
    }
}

/// Which interference model the estimator assumes.
#[derive(Debug, Clone, Copy)]
pub enum Regime<'a> {
    Ignore,
    /// One receive steering vector per aggressor, `q_rs(theta_rs)`.
    RiAware { aoa_steering: &'a [CVec] },
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeTag {
    Ignore,
    RiAware,
    Null,
}

impl Regime<'_> {
    pub fn tag(&self) -> RegimeTag {
        match self {
            Regime::Ignore => RegimeTag::Ignore,
            Regime::RiAware { .. } => RegimeTag::RiAware,
            Regime::Null => RegimeTag::Null,
        }
    }
}

/// Large-scale statistics of the UE being estimated.
#[derive(Debug, Clone, Copy)]
pub struct UeStatistics {
    /// `beta * psi` of the UE at the estimating BS.
    pub gain: f64,
    /// Sum of `beta * psi` over the copilot set, the UE itself included.
    pub copilot_gain_sum: f64,
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub h_hat: CVec,
    pub est_cov: CMat,
    pub err_cov: CMat,
    pub regime: RegimeTag,
}

impl ChannelEstimate {
    /// Per-antenna error variance, `trace(err_cov) / M`.
    pub fn error_scalar(&self) -> f64 {
        trace_re(&self.err_cov) / self.h_hat.len() as f64
    }
}

/// Pilot-phase observation at every BS of `side`.
///
/// `Y_r = sqrt(p_ul) sum_u h_ru phi_u^T + sqrt(p_dl) sum_s H_rs W_s S_s + Z_r`.
/// The RI term is present only when `duct` is given; it is indexed
/// `duct[r][s]` and needs one precoder per aggressor. Aggressor symbols are
/// drawn first (shared by all receiving BSs), then the noise per BS.
pub fn receive_ce_signal<R: Rng + ?Sized>(
    side: &SystemSide,
    duct: Option<&[Vec<DuctChannel>]>,
    precoders: Option<&PrecoderSet>,
    book: &PilotBook,
    model: &CeModel,
    rng: &mut R,
) -> Result<Vec<CeObservation>> {
    let tau = book.len();
    let n_bs = side.num_cells();
    let n_ue = side.num_ues();
    let m = side.links.first().and_then(|l| l.first()).map_or(0, |l| l.h.len());
    if side.pilots.index.iter().any(|&p| p >= tau) {
        return Err(Error::Dimension("pilot index outside the codebook".into()));
    }
    // Rows phi_u^T of every UE's pilot.
    let pilot_rows = CMat::from_fn(n_ue, tau, |u, n| book.matrix()[(n, side.pilots.index[u])]);

    let ri_terms: Option<Vec<CMat>> = match duct {
        None => None,
        Some(duct) => {
            let pre = precoders.ok_or_else(|| Error::Dimension("duct RI needs precoders".into()))?;
            if duct.len() != n_bs || duct.iter().any(|row| row.len() != pre.len()) {
                return Err(Error::Dimension(format!(
                    "duct is {}x{}, expected {n_bs}x{}",
                    duct.len(),
                    duct.first().map_or(0, Vec::len),
                    pre.len()
                )));
            }
            let symbols: Vec<CMat> = pre
                .matrices
                .iter()
                .map(|w| complex_normal_matrix(rng, w.ncols(), tau, 1.0))
                .collect();
            let amp = c(model.dl_power.sqrt());
            Some(
                duct.iter()
                    .map(|row| {
                        let mut acc = CMat::zeros(m, tau);
                        for ((d, w), s) in row.iter().zip(&pre.matrices).zip(&symbols) {
                            acc += (&d.matrix * w) * s;
                        }
                        acc * amp
                    })
                    .collect(),
            )
        }
    };

    let noise_var = model.noise_power;
    let amp_ul = c(model.ul_power.sqrt());
    (0..n_bs)
        .map(|r| {
            let local = CMat::from_fn(m, n_ue, |i, u| side.links[r][u].h[i]);
            let mut y = (local * &pilot_rows) * amp_ul;
            if let Some(ri) = &ri_terms {
                y += &ri[r];
            }
            if noise_var > 0.0 {
                y += complex_normal_matrix(rng, m, tau, noise_var);
            }
            Ok(CeObservation { y })
        })
        .collect()
}

/// `Y phi^* / sqrt(p_ul)`.
pub fn match_filter(obs: &CeObservation, pilot: &CVec, ul_power: f64) -> CVec {
    (&obs.y * pilot.conjugate()) / c(ul_power.sqrt())
}

/// Covariance of the matched-filter output under `regime`.
pub fn mf_covariance(m: usize, stats: &UeStatistics, model: &CeModel, regime: Regime<'_>) -> Result<CMat> {
    let tau = model.pilot_len as f64;
    let base = tau * tau * stats.copilot_gain_sum + model.noise_power * tau / model.ul_power;
    Ok(match regime {
        Regime::Ignore => identity(m) * c(base),
        Regime::Null => identity(m) * c(base + model.null_residual()),
        Regime::RiAware { aoa_steering } => {
            if aoa_steering.len() != model.num_aggressors {
                return Err(Error::Dimension(format!(
                    "{} AoA steering vectors for {} aggressors",
                    aoa_steering.len(),
                    model.num_aggressors
                )));
            }
            let ratio = model.dl_power / model.ul_power * tau;
            let mut a = identity(m) * c(base + ratio * model.num_aggressors as f64 * model.nlos_power());
            for q in aoa_steering {
                if q.len() != m {
                    return Err(Error::Dimension("steering vector length differs from M".into()));
                }
                a += outer(q, q) * c(ratio * model.los_power());
            }
            a
        }
    })
}

/// LMMSE estimate of one local channel from its matched-filter output.
pub fn lmmse_estimate(
    y_mf: &CVec,
    stats: &UeStatistics,
    model: &CeModel,
    regime: Regime<'_>,
) -> Result<ChannelEstimate> {
    let m = y_mf.len();
    let tau = model.pilot_len as f64;
    let a = mf_covariance(m, stats, model, regime)?;
    let a_inv = match regime {
        Regime::RiAware { .. } => hermitian_inverse(&a, "LMMSE matched-filter covariance")?,
        _ => {
            let d = a[(0, 0)].re;
            if !(d > 0.0) {
                return Err(Error::Numerical("LMMSE scalar covariance is not positive".into()));
            }
            identity(m) * c(1.0 / d)
        }
    };
    let h_hat = &a_inv * y_mf * c(tau * stats.gain);
    let est_cov = a_inv * c(tau * tau * stats.gain * stats.gain);
    let err_cov = identity(m) * c(stats.gain) - &est_cov;
    Ok(ChannelEstimate {
        h_hat,
        est_cov,
        err_cov,
        regime: regime.tag(),
    })
}

/// Estimates every UE of `side` at its serving BS. `aoa_steering[r]` holds
/// the per-aggressor steering vectors of BS `r` and is read only in the
/// RI-aware regime.
pub fn estimate_side(
    side: &SystemSide,
    observations: &[CeObservation],
    book: &PilotBook,
    model: &CeModel,
    regime: RegimeTag,
    aoa_steering: Option<&[Vec<CVec>]>,
) -> Result<Vec<ChannelEstimate>> {
    (0..side.num_ues())
        .map(|u| {
            let r = side.serving[u];
            let pilot = book.pilot(side.pilots.index[u]);
            let y_mf = match_filter(&observations[r], &pilot, model.ul_power);
            let stats = UeStatistics {
                gain: side.gain(r, u),
                copilot_gain_sum: side.pilots.copilots[u].iter().map(|&v| side.gain(r, v)).sum(),
            };
            let regime = match regime {
                RegimeTag::Ignore => Regime::Ignore,
                RegimeTag::Null => Regime::Null,
                RegimeTag::RiAware => Regime::RiAware {
                    aoa_steering: &aoa_steering
                        .ok_or_else(|| Error::Dimension("RI-aware estimation needs AoA steering".into()))?[r],
                },
            };
            lmmse_estimate(&y_mf, &stats, model, regime)
        })
        .collect()
}

/// `||h - h_hat||^2 / ||h||^2`.
pub fn nmse(h: &CVec, h_hat: &CVec) -> Result<f64> {
    if h.len() != h_hat.len() {
        return Err(Error::Dimension(format!("{} vs {}", h.len(), h_hat.len())));
    }
    let denom = h.norm_squared();
    if denom == 0.0 {
        return Err(Error::Domain("NMSE undefined for an all-zero channel".into()));
    }
    Ok((h - h_hat).norm_squared() / denom)
}
