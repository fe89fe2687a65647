//! Aggressor downlink precoders.

pub mod fp;

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::{c, identity, CMat, CVec};

/// Relative norm below which a projected beam counts as annihilated.
const COLLAPSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecoderKind {
    Mrt,
    Null,
    Fp,
}

/// One `M x |K_s|` precoder per aggressor, each with unit total power.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub matrices: Vec<CMat>,
    pub kind: PrecoderKind,
}

impl PrecoderSet {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// `sum_k ||w_sk||^2` for every aggressor.
    pub fn powers(&self) -> Vec<f64> {
        self.matrices.iter().map(|w| w.norm_squared()).collect()
    }
}

fn stack_columns(estimates: &[&CVec]) -> Result<CMat> {
    let m = estimates
        .first()
        .map(|h| h.len())
        .ok_or_else(|| Error::Dimension("precoder needs at least one UE".into()))?;
    if estimates.iter().any(|h| h.len() != m) {
        return Err(Error::Dimension("estimates differ in length".into()));
    }
    Ok(CMat::from_fn(m, estimates.len(), |i, k| estimates[k][i]))
}

fn unit_power(w: CMat, what: &str) -> Result<CMat> {
    let norm = w.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Domain(format!("{what}: precoder has zero power")));
    }
    Ok(w / c(norm))
}

/// `W = [h_1 .. h_K] / ||[h_1 .. h_K]||_F`.
pub fn mrt_precoder(estimates: &[&CVec]) -> Result<CMat> {
    let w = stack_columns(estimates)?;
    if w.iter().any(|z| !z.is_finite()) || estimates.iter().any(|h| h.norm() == 0.0) {
        return Err(Error::Domain("MRT: all-zero or non-finite estimate".into()));
    }
    unit_power(w, "MRT")
}

/// Orthogonal projector onto the complement of `span{directions}`.
///
/// Directions that are numerically inside the span of earlier ones are
/// skipped, so near-duplicate AoDs do not inflate the nulled dimension.
pub fn null_projector(directions: &[CVec], m: usize) -> Result<CMat> {
    let mut basis: Vec<CVec> = Vec::new();
    for a in directions {
        if a.len() != m {
            return Err(Error::Dimension("steering vector length differs from M".into()));
        }
        let mut v = a.clone();
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let n = v.norm();
        if n > COLLAPSE_TOL * a.norm() {
            basis.push(v / c(n));
        }
    }
    if basis.len() >= m {
        return Err(Error::Domain(format!(
            "{} independent null directions leave no room in {m} dimensions",
            basis.len()
        )));
    }
    let mut p = identity(m);
    for b in &basis {
        p -= b * b.adjoint();
    }
    Ok(p)
}

/// MRT projected onto the null space of every `a(phi)` in `aod_steering`,
/// renormalized to unit power.
pub fn null_precoder(aod_steering: &[CVec], estimates: &[&CVec]) -> Result<CMat> {
    let mrt = mrt_precoder(estimates)?;
    let m = mrt.nrows();
    if m < 2 {
        return Err(Error::Domain("null precoding needs M >= 2".into()));
    }
    let p = null_projector(aod_steering, m)?;
    let mut w = &p * &mrt;
    for k in 0..w.ncols() {
        if w.column(k).norm() <= COLLAPSE_TOL * mrt.column(k).norm() {
            let best = (0..m)
                .max_by(|&a, &b| p.column(a).norm().total_cmp(&p.column(b).norm()))
                .expect("m >= 2");
            warn!("null precoder: beam {k} lies in the nulled span, using a null-space basis vector");
            let col = p.column(best).into_owned();
            let scale = mrt.column(k).norm() / col.norm();
            w.set_column(k, &(col * c(scale)));
        }
    }
    unit_power(w, "null precoder")
}
