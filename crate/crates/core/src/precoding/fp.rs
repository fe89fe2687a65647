//! Fractional-programming precoder design with the quadratic transform.
//!
//! The objective is the victim uplink sum rate plus the aggressor downlink
//! sum rate (bits). Each round updates the SINR auxiliaries `gamma` and the
//! quadratic-transform auxiliaries `y` in closed form, then re-solves every
//! aggressor's precoder under its unit power constraint.
//!
//! With [`Penalty::Realized`] the precoder step maximizes the surrogate
//! exactly: the duct term uses the same realized channels the objective is
//! evaluated with, and the power multiplier may go negative down to
//! `-min eig(Q)`, which is where the sphere-constrained maximizer of a
//! concave quadratic lives. The objective is then non-decreasing by
//! construction, and a decrease is reported as [`Error::NonMonotone`].

use log::{debug, warn};
use num_complex::Complex64;

use super::{PrecoderKind, PrecoderSet};
use crate::channel::DuctChannel;
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen_sorted, identity, outer, CMat, CVec};
use crate::rates::SideKnowledge;

const MAX_DOUBLINGS: usize = 200;
const MAX_HALVINGS: usize = 2_000;

/// Victim-side genie information: estimates, combiners and the true ducts
/// `duct[r][s]`.
#[derive(Debug, Clone, Copy)]
pub struct VictimGenie<'a> {
    pub knowledge: SideKnowledge<'a>,
    pub combiners: &'a [CVec],
    pub duct: &'a [Vec<DuctChannel>],
}

/// How the precoder step models the duct interference it causes.
#[derive(Debug, Clone, Copy)]
pub enum Penalty<'a> {
    Realized,
    /// Expected LoS-plus-scattered covariance. `aod_steering[s][r]` is the
    /// transmit steering vector of aggressor `s` toward victim `r`.
    Statistical {
        aod_steering: &'a [Vec<CVec>],
        rician_k: f64,
        duct_loss: f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct FpInputs<'a> {
    /// `None` drops the victim terms (downlink-only objective).
    pub victim: Option<VictimGenie<'a>>,
    pub aggressor: SideKnowledge<'a>,
    pub ul_power: f64,
    pub dl_power: f64,
    pub noise_power: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FpSettings {
    pub tolerance: f64,
    pub max_iters: usize,
    /// Run exactly `max_iters` rounds, ignoring the tolerance.
    pub fixed_iterations: bool,
    /// Allowed absolute decrease per round before ascent counts as broken.
    pub monotone_slack: f64,
}

impl FpSettings {
    pub fn from_config(cfg: &crate::SystemConfig) -> Self {
        Self {
            tolerance: cfg.fp_tolerance,
            max_iters: cfg.fp_max_iters,
            fixed_iterations: false,
            monotone_slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct FpState {
    pub gamma_u: Vec<f64>,
    pub gamma_k: Vec<f64>,
    pub y_u: Vec<Complex64>,
    pub y_k: Vec<Complex64>,
    pub lambda_s: Vec<f64>,
    /// Objective (bits) before the first round and after every round.
    pub objective_history: Vec<f64>,
    /// Aggressor downlink sum rate at the same points.
    pub dl_history: Vec<f64>,
    /// `|surrogate - objective| / |objective|` after each auxiliary update.
    pub tightness: Vec<f64>,
    pub iterations: usize,
}

/// Objective value split into its parts (bits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub ul: f64,
    pub dl: f64,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.ul + self.dl
    }
}

struct VictimUe {
    cell: usize,
    /// `p_ul |h_hat^H c|^2`.
    a: f64,
    /// Denominator without the RI term.
    b_static: f64,
    /// `h_hat^H c`.
    hc: Complex64,
    /// `G_s = H_rs^H c` for every aggressor.
    g: Vec<CVec>,
    c_norm2: f64,
}

struct AggressorCell {
    ues: Vec<usize>,
    /// `sum_k h_hat_k h_hat_k^H`.
    gram: CMat,
    /// `sum_{in-cell} eps + sum_{other-cell} beta psi`.
    load: f64,
}

/// Precomputed quantities for one FP run.
pub struct FpProblem<'a> {
    inputs: FpInputs<'a>,
    victims: Vec<VictimUe>,
    cells: Vec<AggressorCell>,
    m: usize,
}

impl<'a> FpProblem<'a> {
    pub fn new(inputs: FpInputs<'a>) -> Result<Self> {
        let agg = inputs.aggressor;
        let n_cells = agg.side.num_cells();
        let m = agg
            .h_hat
            .first()
            .map(|h| h.len())
            .ok_or_else(|| Error::Dimension("no aggressor UEs".into()))?;
        let cells = (0..n_cells)
            .map(|s| {
                let ues = agg.side.cells[s].clone();
                let mut gram = CMat::zeros(m, m);
                for &k in &ues {
                    gram += outer(&agg.h_hat[k], &agg.h_hat[k]);
                }
                AggressorCell { ues, gram, load: agg.statistical_load(s) }
            })
            .collect();
        let victims = match inputs.victim {
            None => Vec::new(),
            Some(v) => {
                let side = v.knowledge.side;
                if v.combiners.len() != side.num_ues() || v.knowledge.h_hat.len() != side.num_ues() {
                    return Err(Error::Dimension("victim inputs do not cover every UE".into()));
                }
                if v.duct.len() != side.num_cells() || v.duct.iter().any(|row| row.len() != n_cells) {
                    return Err(Error::Dimension("duct matrix grid does not match the two systems".into()));
                }
                let loads: Vec<f64> = (0..side.num_cells()).map(|r| v.knowledge.statistical_load(r)).collect();
                (0..side.num_ues())
                    .map(|u| {
                        let r = side.serving[u];
                        let cu = &v.combiners[u];
                        let hc = v.knowledge.h_hat[u].dotc(cu);
                        let intra: f64 = side.cells[r]
                            .iter()
                            .filter(|&&w| w != u)
                            .map(|&w| v.knowledge.h_hat[w].dotc(cu).norm_sqr())
                            .sum();
                        let c_norm2 = cu.norm_squared();
                        VictimUe {
                            cell: r,
                            a: inputs.ul_power * hc.norm_sqr(),
                            b_static: inputs.ul_power * (loads[r] * c_norm2 + intra) + inputs.noise_power * c_norm2,
                            hc,
                            g: v.duct[r].iter().map(|d| d.matrix.adjoint() * cu).collect(),
                            c_norm2,
                        }
                    })
                    .collect()
            }
        };
        Ok(Self { inputs, victims, cells, m })
    }

    fn check(&self, w: &PrecoderSet) -> Result<()> {
        if w.len() != self.cells.len() {
            return Err(Error::Dimension("one precoder per aggressor expected".into()));
        }
        for (s, (ws, cell)) in w.matrices.iter().zip(&self.cells).enumerate() {
            if ws.nrows() != self.m || ws.ncols() != cell.ues.len() {
                return Err(Error::Dimension(format!("precoder {s} has the wrong shape")));
            }
        }
        Ok(())
    }

    /// Realized duct interference `p_dl sum_s ||c^H H_rs W_s||^2` per victim UE.
    fn ri(&self, w: &PrecoderSet) -> Vec<f64> {
        self.victims
            .iter()
            .map(|v| {
                self.inputs.dl_power
                    * v.g.iter().zip(&w.matrices).map(|(g, ws)| (g.adjoint() * ws).norm_squared()).sum::<f64>()
            })
            .collect()
    }

    /// `(C_k, D_k)` for every aggressor UE, indexed like the aggressor side.
    fn dl_parts(&self, w: &PrecoderSet) -> Vec<(f64, f64)> {
        let agg = self.inputs.aggressor;
        let p = self.inputs.dl_power;
        let mut out = vec![(0.0, 0.0); agg.side.num_ues()];
        for (cell, ws) in self.cells.iter().zip(&w.matrices) {
            for (j, &k) in cell.ues.iter().enumerate() {
                let wk = ws.column(j).into_owned();
                let signal = agg.h_hat[k].dotc(&wk).norm_sqr();
                let all = (wk.adjoint() * &cell.gram * &wk)[(0, 0)].re;
                let d = p * (cell.load * wk.norm_squared() + (all - signal).max(0.0)) + self.inputs.noise_power;
                out[k] = (p * signal, d);
            }
        }
        out
    }

    pub fn objective(&self, w: &PrecoderSet) -> Result<Objective> {
        self.check(w)?;
        let ri = self.ri(w);
        let ul = self
            .victims
            .iter()
            .zip(&ri)
            .map(|(v, ri)| (v.a / (v.b_static + ri)).ln_1p())
            .sum::<f64>();
        let dl = self.dl_parts(w).iter().map(|(cc, d)| (cc / d).ln_1p()).sum::<f64>();
        Ok(Objective {
            ul: ul / std::f64::consts::LN_2,
            dl: dl / std::f64::consts::LN_2,
        })
    }

    /// Closed-form auxiliary update at the current precoders.
    pub fn update_auxiliaries(&self, w: &PrecoderSet, state: &mut FpState) -> Result<()> {
        self.check(w)?;
        let ri = self.ri(w);
        state.gamma_u.clear();
        state.y_u.clear();
        for (v, ri) in self.victims.iter().zip(&ri) {
            let b = v.b_static + ri;
            if !(b > 0.0) {
                return Err(Error::Numerical("zero uplink interference-plus-noise".into()));
            }
            let gamma = v.a / b;
            state.gamma_u.push(gamma);
            state.y_u.push(v.hc * c(((1.0 + gamma) * self.inputs.ul_power).sqrt() / (v.a + b)));
        }
        let agg = self.inputs.aggressor;
        let parts = self.dl_parts(w);
        state.gamma_k = vec![0.0; parts.len()];
        state.y_k = vec![Complex64::new(0.0, 0.0); parts.len()];
        for (cell, ws) in self.cells.iter().zip(&w.matrices) {
            for (j, &k) in cell.ues.iter().enumerate() {
                let (cc, d) = parts[k];
                if !(d > 0.0) {
                    return Err(Error::Numerical("zero downlink interference-plus-noise".into()));
                }
                let gamma = cc / d;
                let hw = agg.h_hat[k].dotc(&ws.column(j).into_owned());
                state.gamma_k[k] = gamma;
                state.y_k[k] = hw * c(((1.0 + gamma) * self.inputs.dl_power).sqrt() / (cc + d));
            }
        }
        Ok(())
    }

    /// Quadratic-transform surrogate in bits at `(w, state)`.
    pub fn surrogate(&self, w: &PrecoderSet, state: &FpState) -> Result<f64> {
        self.check(w)?;
        let ri = self.ri(w);
        let mut total = 0.0;
        for (i, (v, ri)) in self.victims.iter().zip(&ri).enumerate() {
            let (g, y) = (state.gamma_u[i], state.y_u[i]);
            let lin = (y.conj() * v.hc).re * 2.0 * ((1.0 + g) * self.inputs.ul_power).sqrt();
            total += g.ln_1p() - g + lin - y.norm_sqr() * (v.a + v.b_static + ri);
        }
        let agg = self.inputs.aggressor;
        let parts = self.dl_parts(w);
        for (cell, ws) in self.cells.iter().zip(&w.matrices) {
            for (j, &k) in cell.ues.iter().enumerate() {
                let (g, y) = (state.gamma_k[k], state.y_k[k]);
                let hw = agg.h_hat[k].dotc(&ws.column(j).into_owned());
                let lin = (y.conj() * hw).re * 2.0 * ((1.0 + g) * self.inputs.dl_power).sqrt();
                let (cc, d) = parts[k];
                total += g.ln_1p() - g + lin - y.norm_sqr() * (cc + d);
            }
        }
        Ok(total / std::f64::consts::LN_2)
    }

    /// Victim-side quadratic penalty on aggressor `s`'s beams.
    fn penalty_matrix(&self, s: usize, state: &FpState, penalty: &Penalty<'_>) -> Result<CMat> {
        let p = self.inputs.dl_power;
        let mut q = CMat::zeros(self.m, self.m);
        for (v, y) in self.victims.iter().zip(&state.y_u) {
            let weight = p * y.norm_sqr();
            match penalty {
                Penalty::Realized => q += outer(&v.g[s], &v.g[s]) * c(weight),
                Penalty::Statistical {
                    aod_steering,
                    rician_k,
                    duct_loss,
                } => {
                    let a = aod_steering
                        .get(s)
                        .and_then(|row| row.get(v.cell))
                        .ok_or_else(|| Error::Dimension("missing AoD steering vector".into()))?;
                    let k = *rician_k;
                    let scale = weight * v.c_norm2 / self.m as f64;
                    q += outer(a, a) * c(scale * k * duct_loss / (k + 1.0));
                    q += identity(self.m) * c(scale * duct_loss * self.m as f64 / (k + 1.0));
                }
            }
        }
        Ok(q)
    }

    /// Re-solves every aggressor's precoder for fixed auxiliaries.
    pub fn update_precoders(&self, w: &PrecoderSet, state: &mut FpState, penalty: &Penalty<'_>) -> Result<PrecoderSet> {
        self.check(w)?;
        let agg = self.inputs.aggressor;
        let p = self.inputs.dl_power;
        state.lambda_s = vec![0.0; self.cells.len()];
        let mut out = Vec::with_capacity(self.cells.len());
        for (s, (cell, ws)) in self.cells.iter().zip(&w.matrices).enumerate() {
            let shared = self.penalty_matrix(s, state, penalty)?;
            let base = &cell.gram + identity(self.m) * c(cell.load);
            let mut eig = Vec::with_capacity(cell.ues.len());
            for &k in &cell.ues {
                let y = state.y_k[k];
                let qk = &base * c(y.norm_sqr() * p) + &shared;
                let b = &agg.h_hat[k] * (y * c(((1.0 + state.gamma_k[k]) * p).sqrt()));
                let (mu, v) = hermitian_eigen_sorted(&qk);
                eig.push((mu, v, b));
            }
            let coeffs: Vec<Vec<f64>> = eig
                .iter()
                .map(|(_, v, b)| (v.adjoint() * b).iter().map(|z| z.norm_sqr()).collect())
                .collect();
            if coeffs.iter().flatten().all(|&a| a == 0.0) {
                debug!("FP: aggressor {s} has no linear term, keeping its precoder");
                out.push(ws.clone());
                continue;
            }
            let lambda = solve_multiplier(&eig.iter().map(|(mu, _, _)| mu.as_slice()).collect::<Vec<_>>(), &coeffs)
                .map_err(|e| match e {
                    Error::Bisection(msg) => Error::Bisection(format!("aggressor {s}: {msg}")),
                    other => other,
                })?;
            state.lambda_s[s] = lambda;
            let mut wnew = CMat::zeros(self.m, cell.ues.len());
            for (j, (mu, v, b)) in eig.iter().enumerate() {
                let mut t = v.adjoint() * b;
                for (i, z) in t.iter_mut().enumerate() {
                    *z /= c(mu[i] + lambda);
                }
                wnew.set_column(j, &(v * t));
            }
            let norm = wnew.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Numerical(format!("FP precoder {s} degenerated")));
            }
            out.push(wnew / c(norm));
        }
        Ok(PrecoderSet { matrices: out, kind: PrecoderKind::Fp })
    }
}

/// `sum_k sum_i a_ki / (mu_ki + lambda)^2`.
pub fn power_at(mu: &[&[f64]], coeffs: &[Vec<f64>], lambda: f64) -> f64 {
    mu.iter()
        .zip(coeffs)
        .flat_map(|(m, a)| m.iter().zip(a).map(move |(m, a)| if *a == 0.0 { 0.0 } else { a / (m + lambda).powi(2) }))
        .sum()
}

/// Multiplier `lambda > -min mu` with unit total power, by bisection.
///
/// When the power at zero exceeds one the bracket `[0, hi]` is grown by
/// doubling `hi` from one; otherwise the root lies in `(-min mu, 0]`.
pub fn solve_multiplier(mu: &[&[f64]], coeffs: &[Vec<f64>]) -> Result<f64> {
    let excess = |l: f64| power_at(mu, coeffs, l) - 1.0;
    let floor = -mu.iter().flat_map(|m| m.iter().copied()).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = if excess(0.0) >= 0.0 {
        let mut hi = 1.0;
        let mut n = 0;
        while excess(hi) > 0.0 {
            hi *= 2.0;
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::Bisection(format!(
                    "power still {:.3e} at lambda = {hi:.3e} after {MAX_DOUBLINGS} doublings",
                    power_at(mu, coeffs, hi)
                )));
            }
        }
        (0.0, hi)
    } else if floor < 0.0 {
        (floor, 0.0)
    } else {
        return Err(Error::Bisection(format!("no multiplier reaches unit power; smallest eigenvalue {}", -floor)));
    };
    for _ in 0..MAX_HALVINGS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Algorithm loop: auxiliaries, precoders, objective, until the relative
/// change drops to the tolerance or `max_iters` rounds have run.
pub fn fp_optimize(
    inputs: FpInputs<'_>,
    penalty: Penalty<'_>,
    init: &PrecoderSet,
    settings: &FpSettings,
) -> Result<(PrecoderSet, FpState)> {
    let problem = FpProblem::new(inputs)?;
    let mut w = init.clone();
    let mut state = FpState::default();
    let f0 = problem.objective(&w)?;
    state.objective_history.push(f0.total());
    state.dl_history.push(f0.dl);
    let exact = matches!(penalty, Penalty::Realized);
    for i in 1..=settings.max_iters {
        problem.update_auxiliaries(&w, &mut state)?;
        let prev = *state.objective_history.last().expect("seeded above");
        let sur = problem.surrogate(&w, &state)?;
        state.tightness.push((sur - prev).abs() / prev.abs().max(f64::MIN_POSITIVE));
        w = problem.update_precoders(&w, &mut state, &penalty)?;
        let f = problem.objective(&w)?;
        let cur = f.total();
        state.objective_history.push(cur);
        state.dl_history.push(f.dl);
        state.iterations = i;
        if cur < prev - settings.monotone_slack {
            if exact {
                return Err(Error::NonMonotone {
                    iteration: i,
                    previous: prev,
                    current: cur,
                });
            }
            warn!("FP objective decreased at iteration {i}: {prev} -> {cur}");
        }
        if !settings.fixed_iterations && (cur - prev).abs() <= settings.tolerance * prev.abs() {
            break;
        }
    }
    Ok((w, state))
}
