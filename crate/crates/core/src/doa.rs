//! Duct angle estimation from guard-period snapshots with root-MUSIC.

use std::f64::consts::PI;

use log::warn;
use nalgebra::Schur;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, complex_normal_matrix, hermitian_eigen_sorted, CMat, CVec};

/// `M x P` guard-period samples at one BS.
#[derive(Debug, Clone)]
pub struct GpSnapshots {
    pub y: CMat,
}

#[derive(Debug, Clone)]
pub struct AoaEstimate {
    /// Radians, in the order of `roots`.
    pub angles: Vec<f64>,
    /// Selected roots inside the unit disk, closest to the circle first.
    pub roots: Vec<Complex64>,
    /// Sample covariance spectrum, ascending.
    pub eigvals: Vec<f64>,
}

/// Draws `snapshots` columns of `sqrt(p_dl) sum_i H_i T_i s_i + z`.
///
/// `channels[i]` is the `M x N_i` channel from source `i`, `transmit[i]` its
/// `N_i x d_i` transmit shaping; symbols `s_i` are CN(0, I) per snapshot.
/// Channels stay fixed over all snapshots. Symbols are drawn source by
/// source, then the noise.
pub fn collect_gp_samples<R: Rng + ?Sized>(
    channels: &[&CMat],
    transmit: &[&CMat],
    dl_power: f64,
    noise_power: f64,
    snapshots: usize,
    rng: &mut R,
) -> Result<GpSnapshots> {
    if channels.len() != transmit.len() {
        return Err(Error::Dimension(format!(
            "{} channels but {} transmit matrices",
            channels.len(),
            transmit.len()
        )));
    }
    let m = channels
        .first()
        .map(|h| h.nrows())
        .ok_or_else(|| Error::Dimension("no GP sources".into()))?;
    let mut y = CMat::zeros(m, snapshots);
    let amp = c(dl_power.sqrt());
    for (h, t) in channels.iter().zip(transmit) {
        if h.nrows() != m || h.ncols() != t.nrows() {
            return Err(Error::Dimension("GP channel and transmit shapes disagree".into()));
        }
        let s = complex_normal_matrix(rng, t.ncols(), snapshots, 1.0);
        y += (*h * *t) * s * amp;
    }
    if noise_power > 0.0 {
        y += complex_normal_matrix(rng, m, snapshots, noise_power);
    }
    Ok(GpSnapshots { y })
}

/// Noise-subspace basis of `(1/P) Y Y^H` and its spectrum (ascending).
pub fn noise_subspace(gp: &GpSnapshots, sources: usize) -> Result<(CMat, Vec<f64>)> {
    let m = gp.y.nrows();
    if sources >= m {
        return Err(Error::Domain(format!("{sources} sources need more than {m} antennas")));
    }
    let p = gp.y.ncols().max(1) as f64;
    let cov = &gp.y * gp.y.adjoint() / c(p);
    let (values, vectors) = hermitian_eigen_sorted(&cov);
    let noise_dim = m - sources;
    if sources > 0 {
        let floor = values[..noise_dim].iter().sum::<f64>() / noise_dim as f64;
        let weakest = values[noise_dim];
        if weakest < 2.0 * floor {
            warn!(
                "root-MUSIC: source eigenvalue {weakest:.3e} is within 3 dB of the noise floor {floor:.3e}"
            );
        }
    }
    Ok((vectors.columns(0, noise_dim).into_owned(), values))
}

/// Coefficients `a_k` of `sum_k a_k z^k`, `a_k = C_{M-1-k}` with
/// `C_l = sum_{n-m=l} C_mn` and `C = Q_n Q_n^H`.
pub fn rootmusic_polynomial(qn: &CMat) -> Vec<Complex64> {
    let m = qn.nrows();
    let cm = qn * qn.adjoint();
    (0..2 * m - 1)
        .map(|k| {
            let l = m as isize - 1 - k as isize;
            (0..m)
                .filter_map(|row| {
                    let col = row as isize + l;
                    (0..m as isize).contains(&col).then(|| cm[(row, col as usize)])
                })
                .sum()
        })
        .collect()
}

/// Parlett–Reinsch balancing by powers of two, in place.
fn balance(a: &mut CMat) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += a[(j, i)].l1_norm();
                    row += a[(i, j)].l1_norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let total = col + row;
            let mut f = 1.0;
            let mut g = row / RADIX;
            while col < g {
                f *= RADIX;
                col *= RADIX * RADIX;
            }
            g = row * RADIX;
            while col > g {
                f /= RADIX;
                col /= RADIX * RADIX;
            }
            if (col + row) / f < 0.95 * total {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= c(f);
                    a[(j, i)] *= c(f);
                }
            }
        }
    }
}

/// All roots of `sum_k coeffs[k] z^k` via a balanced companion matrix.
/// Vanishing leading coefficients are trimmed first.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if scale == 0.0 {
        return Err(Error::Numerical("zero polynomial".into()));
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-14 * scale {
        deg -= 1;
    }
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let mut comp = CMat::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = c(1.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -coeffs[i] / lead;
    }
    balance(&mut comp);
    let eig = Schur::try_new(comp, f64::EPSILON, 10_000)
        .and_then(|s| s.eigenvalues())
        .ok_or_else(|| Error::Numerical("companion Schur iteration did not converge".into()))?;
    Ok(eig.iter().copied().collect())
}

/// Angle of a root on the `z = exp(-j 2 pi (d/lambda) sin theta)` convention,
/// or `None` when the phase maps outside the visible region.
pub fn root_to_angle(z: Complex64, spacing_ratio: f64) -> Option<f64> {
    let s = -z.arg() / (2.0 * PI * spacing_ratio);
    (s.abs() <= 1.0).then(|| s.asin())
}

/// Root-MUSIC on a noise-subspace basis.
pub fn rootmusic_angles(qn: &CMat, spacing_ratio: f64, sources: usize) -> Result<AoaEstimate> {
    let m = qn.nrows();
    if 2 * m - 2 < 2 * sources {
        return Err(Error::Domain(format!("degree {} too small for {sources} sources", 2 * m - 2)));
    }
    let mut pool: Vec<Complex64> = polynomial_roots(&rootmusic_polynomial(qn))?
        .into_iter()
        .filter(|z| z.norm() > 0.0 && z.is_finite())
        .map(|z| if z.norm() > 1.0 { 1.0 / z.conj() } else { z })
        .collect();
    let mut roots = Vec::with_capacity(sources);
    let mut angles = Vec::with_capacity(sources);
    while roots.len() < sources && !pool.is_empty() {
        let best = (0..pool.len())
            .min_by(|&a, &b| (1.0 - pool[a].norm()).total_cmp(&(1.0 - pool[b].norm())))
            .expect("pool is non-empty");
        let z = pool.swap_remove(best);
        // Each unit-circle root appears twice (z and 1/z*); drop the partner.
        if let Some(partner) = (0..pool.len()).min_by(|&a, &b| (pool[a] - z).norm().total_cmp(&(pool[b] - z).norm())) {
            pool.swap_remove(partner);
        }
        if let Some(theta) = root_to_angle(z, spacing_ratio) {
            roots.push(z);
            angles.push(theta);
        }
    }
    if roots.len() < sources {
        return Err(Error::RootShortfall {
            found: roots.len(),
            wanted: sources,
        });
    }
    Ok(AoaEstimate {
        angles,
        roots,
        eigvals: Vec::new(),
    })
}

/// Noise subspace plus root-MUSIC in one call.
pub fn estimate_angles(gp: &GpSnapshots, spacing_ratio: f64, sources: usize) -> Result<AoaEstimate> {
    let (qn, eigvals) = noise_subspace(gp, sources)?;
    let mut est = rootmusic_angles(&qn, spacing_ratio, sources)?;
    est.eigvals = eigvals;
    Ok(est)
}

/// Greedy nearest matching of estimated to true angles; returns the absolute
/// error for each true angle.
pub fn match_angle_errors(truth: &[f64], estimates: &[f64]) -> Vec<f64> {
    let mut left: Vec<f64> = estimates.to_vec();
    truth
        .iter()
        .map(|&t| {
            match (0..left.len()).min_by(|&a, &b| (left[a] - t).abs().total_cmp(&(left[b] - t).abs())) {
                Some(i) => (left.swap_remove(i) - t).abs(),
                None => f64::INFINITY,
            }
        })
        .collect()
}

/// `1 / ||Q_n^H q(theta)||^2`, used by tests as a grid-search reference.
pub fn music_spectrum(qn: &CMat, theta: f64, spacing_ratio: f64) -> f64 {
    let q: CVec = crate::channel::steering_vector(theta, qn.nrows(), spacing_ratio).entries;
    let proj = qn.adjoint() * q;
    1.0 / proj.norm_squared().max(f64::MIN_POSITIVE)
}
