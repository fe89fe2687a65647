//! Victim-side receive combiners.

use crate::estimation::ChannelEstimate;
use crate::error::{Error, Result};
use crate::linalg::{c, cholesky, identity, outer, CMat, CVec};
use crate::scenario::SystemSide;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerKind {
    Mrc,
    /// Full covariance form; carries duct terms when AoA steering is given.
    Mmse,
    /// Scalar-interference form used with LoS-nulled aggressors.
    MmseNull,
}

#[derive(Debug, Clone)]
pub struct Combiner {
    pub c: CVec,
    pub kind: CombinerKind,
}

/// Powers and duct statistics the MMSE combiners model.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerModel {
    pub ul_power: f64,
    pub dl_power: f64,
    pub noise_power: f64,
    pub rician_k: f64,
    pub duct_loss: f64,
    pub num_aggressors: usize,
}

impl CombinerModel {
    pub fn from_config(cfg: &crate::SystemConfig, ul_power: f64) -> Self {
        Self {
            ul_power,
            dl_power: cfg.dl_power,
            noise_power: cfg.noise_power,
            rician_k: cfg.rician_k,
            duct_loss: cfg.duct_loss,
            num_aggressors: cfg.num_aggressor_bs,
        }
    }

    /// `p_dl |S| L / (K+1)`.
    fn nlos_floor(&self) -> f64 {
        self.dl_power * self.num_aggressors as f64 * self.duct_loss / (self.rician_k + 1.0)
    }

    fn los_weight(&self) -> f64 {
        self.dl_power * self.rician_k * self.duct_loss / (self.rician_k + 1.0)
    }
}

pub fn mrc_combiner(h_hat: &CVec) -> Result<Combiner> {
    let n = h_hat.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Domain("MRC of an all-zero estimate".into()));
    }
    Ok(Combiner {
        c: h_hat / c(n),
        kind: CombinerKind::Mrc,
    })
}

/// Interference-plus-signal covariance of BS `r` in its full form.
///
/// In-cell `p_ul (h_hat h_hat^H + Sigma_e)` for every served UE, other-cell
/// `p_ul beta psi I`, and `sigma^2 I`. With `aoa_steering` the duct terms
/// `p_dl KL/(K+1) q q^H` per aggressor and `p_dl |S| L/(K+1) I` are added.
pub fn mmse_covariance(
    side: &SystemSide,
    estimates: &[ChannelEstimate],
    r: usize,
    model: &CombinerModel,
    aoa_steering: Option<&[CVec]>,
) -> Result<CMat> {
    let m = estimates
        .first()
        .map(|e| e.h_hat.len())
        .ok_or_else(|| Error::Dimension("no estimates".into()))?;
    let mut sigma = identity(m) * c(model.noise_power);
    let mut other = 0.0;
    for u in 0..side.num_ues() {
        if side.serving[u] == r {
            let e = &estimates[u];
            sigma += (outer(&e.h_hat, &e.h_hat) + &e.err_cov) * c(model.ul_power);
        } else {
            other += side.gain(r, u);
        }
    }
    sigma += identity(m) * c(model.ul_power * other);
    if let Some(qs) = aoa_steering {
        if qs.len() != model.num_aggressors {
            return Err(Error::Dimension(format!(
                "{} AoA steering vectors for {} aggressors",
                qs.len(),
                model.num_aggressors
            )));
        }
        for q in qs {
            sigma += outer(q, q) * c(model.los_weight());
        }
        sigma += identity(m) * c(model.nlos_floor());
    }
    Ok(sigma)
}

/// `c = Sigma_y^-1 sqrt(p_ul) h_hat` for every UE served by BS `r`, one
/// factorization per cell. Returns `(ue, combiner)` pairs.
pub fn mmse_cell(
    side: &SystemSide,
    estimates: &[ChannelEstimate],
    r: usize,
    model: &CombinerModel,
    aoa_steering: Option<&[CVec]>,
) -> Result<Vec<(usize, Combiner)>> {
    let sigma = mmse_covariance(side, estimates, r, model, aoa_steering)?;
    let chol = cholesky(&sigma, "MMSE combiner covariance")?;
    let amp = c(model.ul_power.sqrt());
    Ok(side.cells[r]
        .iter()
        .map(|&u| {
            let c = chol.solve(&(&estimates[u].h_hat * amp));
            (u, Combiner { c, kind: CombinerKind::Mmse })
        })
        .collect())
}

/// The nulled-LoS form: `[p_ul (h_hat h_hat^H + Sigma_e) + (p_ul sum_{u' != u}
/// beta psi + p_dl |S| L/(K+1) + sigma^2) I]^-1 sqrt(p_ul) h_hat`, where the
/// sum runs over every other victim UE as seen from the serving BS.
pub fn mmse_null(
    side: &SystemSide,
    estimates: &[ChannelEstimate],
    u: usize,
    model: &CombinerModel,
) -> Result<Combiner> {
    let r = side.serving[u];
    let e = &estimates[u];
    let m = e.h_hat.len();
    let others: f64 = (0..side.num_ues()).filter(|&v| v != u).map(|v| side.gain(r, v)).sum();
    let scalar = model.ul_power * others + model.nlos_floor() + model.noise_power;
    let sigma = (outer(&e.h_hat, &e.h_hat) + &e.err_cov) * c(model.ul_power) + identity(m) * c(scalar);
    let chol = cholesky(&sigma, "null MMSE combiner covariance")?;
    Ok(Combiner {
        c: chol.solve(&(&e.h_hat * c(model.ul_power.sqrt()))),
        kind: CombinerKind::MmseNull,
    })
}

/// Combiners for every UE of `side`, in UE order.
pub fn combine_side(
    side: &SystemSide,
    estimates: &[ChannelEstimate],
    kind: CombinerKind,
    model: &CombinerModel,
    aoa_steering: Option<&[Vec<CVec>]>,
) -> Result<Vec<Combiner>> {
    let n = side.num_ues();
    match kind {
        CombinerKind::Mrc => estimates.iter().map(|e| mrc_combiner(&e.h_hat)).collect(),
        CombinerKind::MmseNull => (0..n).map(|u| mmse_null(side, estimates, u, model)).collect(),
        CombinerKind::Mmse => {
            let mut out: Vec<Option<Combiner>> = vec![None; n];
            for r in 0..side.num_cells() {
                let qs = aoa_steering.map(|a| a[r].as_slice());
                for (u, comb) in mmse_cell(side, estimates, r, model, qs)? {
                    out[u] = Some(comb);
                }
            }
            out.into_iter()
                .map(|c| c.ok_or_else(|| Error::Dimension("UE without a serving cell".into())))
                .collect()
        }
    }
}
