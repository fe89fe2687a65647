//! Uplink and downlink achievable rates in bit/s/Hz.

use crate::channel::DuctChannel;
use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::precoding::PrecoderSet;
use crate::scenario::SystemSide;

/// Retained SINR components of one UE.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SinrTerms {
    pub signal: f64,
    /// Estimation error plus other-cell statistical interference.
    pub statistical: f64,
    /// In-cell cross terms on estimated channels.
    pub intra: f64,
    /// Realized remote interference.
    pub ri: f64,
    pub noise: f64,
}

impl SinrTerms {
    pub fn interference(&self) -> f64 {
        self.statistical + self.intra + self.ri + self.noise
    }

    pub fn sinr(&self) -> f64 {
        self.signal / self.interference()
    }

    pub fn rate(&self) -> f64 {
        self.sinr().ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub terms: Vec<SinrTerms>,
    /// Per UE, in the side's UE order.
    pub rates: Vec<f64>,
    pub cell_sums: Vec<f64>,
}

impl RateReport {
    fn from_terms(side: &SystemSide, terms: Vec<SinrTerms>) -> Self {
        let rates: Vec<f64> = terms.iter().map(SinrTerms::rate).collect();
        let cell_sums = side.cells.iter().map(|cell| cell.iter().map(|&u| rates[u]).sum()).collect();
        Self { terms, rates, cell_sums }
    }

    pub fn total(&self) -> f64 {
        self.cell_sums.iter().sum()
    }
}

/// Per-UE channel knowledge at the serving BS.
#[derive(Debug, Clone, Copy)]
pub struct SideKnowledge<'a> {
    pub side: &'a SystemSide,
    pub h_hat: &'a [CVec],
    /// Per-antenna error variance of each estimate.
    pub eps: &'a [f64],
}

impl SideKnowledge<'_> {
    fn check(&self, per_ue: usize, what: &str) -> Result<()> {
        let n = self.side.num_ues();
        if self.h_hat.len() != n || self.eps.len() != n || per_ue != n {
            return Err(Error::Dimension(format!("{what}: per-UE inputs do not cover {n} UEs")));
        }
        Ok(())
    }

    /// `sum_{in-cell} eps + sum_{other-cell} beta psi`, seen from BS `b`.
    pub fn statistical_load(&self, b: usize) -> f64 {
        (0..self.side.num_ues())
            .map(|v| {
                if self.side.serving[v] == b {
                    self.eps[v]
                } else {
                    self.side.gain(b, v)
                }
            })
            .sum()
    }
}

/// Uplink rate terms. `ri` is `(duct[r][s], aggressor precoders)`. Noise is
/// taken after combining, `sigma^2 ||c||^2`, so the SINR does not depend on
/// the combiner's scale.
pub fn ul_terms(
    k: &SideKnowledge<'_>,
    combiners: &[CVec],
    ri: Option<(&[Vec<DuctChannel>], &PrecoderSet)>,
    ul_power: f64,
    dl_power: f64,
    noise_power: f64,
) -> Result<Vec<SinrTerms>> {
    k.check(combiners.len(), "UL rate")?;
    let side = k.side;
    let loads: Vec<f64> = (0..side.num_cells()).map(|r| k.statistical_load(r)).collect();
    (0..side.num_ues())
        .map(|u| {
            let r = side.serving[u];
            let cu = &combiners[u];
            let signal = ul_power * k.h_hat[u].dotc(cu).norm_sqr();
            let statistical = ul_power * loads[r] * cu.norm_squared();
            let intra = ul_power
                * side.cells[r]
                    .iter()
                    .filter(|&&v| v != u)
                    .map(|&v| k.h_hat[v].dotc(cu).norm_sqr())
                    .sum::<f64>();
            let ri = match ri {
                None => 0.0,
                Some((duct, pre)) => {
                    let row = duct.get(r).ok_or_else(|| Error::Dimension("duct rows".into()))?;
                    if row.len() != pre.len() {
                        return Err(Error::Dimension("duct row length differs from aggressor count".into()));
                    }
                    dl_power
                        * row
                            .iter()
                            .zip(&pre.matrices)
                            .map(|(d, w)| (cu.adjoint() * &d.matrix * w).norm_squared())
                            .sum::<f64>()
                }
            };
            Ok(SinrTerms {
                signal,
                statistical,
                intra,
                ri,
                noise: noise_power * cu.norm_squared(),
            })
        })
        .collect()
}

pub fn ul_rate(
    k: &SideKnowledge<'_>,
    combiners: &[CVec],
    ri: Option<(&[Vec<DuctChannel>], &PrecoderSet)>,
    ul_power: f64,
    dl_power: f64,
    noise_power: f64,
) -> Result<RateReport> {
    let terms = ul_terms(k, combiners, ri, ul_power, dl_power, noise_power)?;
    Ok(RateReport::from_terms(k.side, terms))
}

/// Downlink rate terms. Column `j` of `W_s` serves the `j`-th UE of cell `s`;
/// the cross terms are `|h_hat_sk'^H w_sk|^2` over the cell's other UEs.
pub fn dl_terms(
    k: &SideKnowledge<'_>,
    precoders: &PrecoderSet,
    dl_power: f64,
    noise_power: f64,
) -> Result<Vec<SinrTerms>> {
    let side = k.side;
    k.check(side.num_ues(), "DL rate")?;
    if precoders.len() != side.num_cells() {
        return Err(Error::Dimension("one precoder per aggressor cell expected".into()));
    }
    let mut terms = vec![SinrTerms::default(); side.num_ues()];
    for (s, cell) in side.cells.iter().enumerate() {
        let w = &precoders.matrices[s];
        if w.ncols() != cell.len() {
            return Err(Error::Dimension(format!("precoder {s} has {} columns for {} UEs", w.ncols(), cell.len())));
        }
        let load = k.statistical_load(s);
        for (j, &u) in cell.iter().enumerate() {
            let wk = w.column(j);
            let intra: f64 = cell
                .iter()
                .filter(|&&v| v != u)
                .map(|&v| k.h_hat[v].dotc(&wk).norm_sqr())
                .sum();
            terms[u] = SinrTerms {
                signal: dl_power * k.h_hat[u].dotc(&wk).norm_sqr(),
                statistical: dl_power * load * wk.norm_squared(),
                intra: dl_power * intra,
                ri: 0.0,
                noise: noise_power,
            };
        }
    }
    Ok(terms)
}

pub fn dl_rate(k: &SideKnowledge<'_>, precoders: &PrecoderSet, dl_power: f64, noise_power: f64) -> Result<RateReport> {
    let terms = dl_terms(k, precoders, dl_power, noise_power)?;
    Ok(RateReport::from_terms(k.side, terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, complex_normal_matrix, complex_normal_vector, CMat};
    use crate::precoding::{mrt_precoder, PrecoderKind};
    use crate::scenario::build_scenario;
    use crate::SystemConfig;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lone_config() -> SystemConfig {
        SystemConfig {
            num_victim_bs: 1,
            num_aggressor_bs: 1,
            antennas_per_bs: 4,
            ues_per_cell: 1,
            trials: 1,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn unit_sinr_is_one_bit() {
        let t = SinrTerms { signal: 2.0, noise: 2.0, ..Default::default() };
        assert!((t.rate() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lone_ue_mrc_matches_closed_form() {
        let sc = build_scenario(&lone_config(), 1).unwrap();
        let h = complex_normal_vector(&mut ChaCha8Rng::seed_from_u64(1), 4, 1e-9);
        let cmb = vec![&h / c(h.norm())];
        let k = SideKnowledge { side: &sc.victim, h_hat: std::slice::from_ref(&h), eps: &[0.0] };
        let rep = ul_rate(&k, &cmb, None, 0.1, 10.0, 1e-14).unwrap();
        let expect = (1.0 + 0.1 * h.norm_squared() / 1e-14).log2();
        assert!((rep.rates[0] - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn orthogonal_beam_has_zero_rate() {
        let sc = build_scenario(&lone_config(), 2).unwrap();
        let h = CVec::from_vec(vec![c(1.0), c(0.0), c(0.0), c(0.0)]);
        let w = CMat::from_column_slice(4, 1, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let pre = PrecoderSet { matrices: vec![w], kind: PrecoderKind::Mrt };
        let k = SideKnowledge { side: &sc.aggressor, h_hat: std::slice::from_ref(&h), eps: &[0.0] };
        let rep = dl_rate(&k, &pre, 10.0, 1e-14).unwrap();
        assert_eq!(rep.rates[0], 0.0);
    }

    #[test]
    fn symmetric_orthogonal_users_get_equal_rates() {
        let cfg = SystemConfig { ues_per_cell: 2, ..lone_config() };
        let sc = build_scenario(&cfg, 3).unwrap();
        let a = CVec::from_vec(vec![c(1e-4), c(0.0), c(0.0), c(0.0)]);
        let b = CVec::from_vec(vec![c(0.0), Complex64::new(0.0, 1e-4), c(0.0), c(0.0)]);
        let w = mrt_precoder(&[&a, &b]).unwrap();
        let pre = PrecoderSet { matrices: vec![w], kind: PrecoderKind::Mrt };
        let hs = vec![a, b];
        let k = SideKnowledge { side: &sc.aggressor, h_hat: &hs, eps: &[1e-12, 1e-12] };
        let rep = dl_rate(&k, &pre, 10.0, 1e-14).unwrap();
        assert!((rep.rates[0] - rep.rates[1]).abs() < 1e-12);
    }

    #[test]
    fn ri_term_matches_symbol_average() {
        let cfg = SystemConfig { ues_per_cell: 3, antennas_per_bs: 6, duct_loss: 1e-3, ..lone_config() };
        let sc = build_scenario(&cfg, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hs: Vec<CVec> = (0..3).map(|_| complex_normal_vector(&mut rng, 6, 1.0)).collect();
        let refs: Vec<&CVec> = hs.iter().collect();
        let pre = PrecoderSet { matrices: vec![mrt_precoder(&refs).unwrap()], kind: PrecoderKind::Mrt };
        let cu = complex_normal_vector(&mut rng, 6, 1.0);
        let k = SideKnowledge { side: &sc.victim, h_hat: &hs, eps: &[0.0; 3] };
        let combs = vec![cu.clone(), cu.clone(), cu.clone()];
        let t = ul_terms(&k, &combs, Some((&sc.duct, &pre)), 0.1, 10.0, 1e-14).unwrap();
        let g = cu.adjoint() * &sc.duct[0][0].matrix * &pre.matrices[0];
        let n = 100_000;
        let sym = complex_normal_matrix(&mut rng, 3, n, 1.0);
        let mc = (g * sym).iter().map(|z| z.norm_sqr()).sum::<f64>() * 10.0 / n as f64;
        assert!((mc / t[0].ri - 1.0).abs() < 0.02, "{mc} vs {}", t[0].ri);
    }

    #[test]
    fn more_noise_lowers_every_rate() {
        let cfg = SystemConfig { ues_per_cell: 2, ..lone_config() };
        let sc = build_scenario(&cfg, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hs: Vec<CVec> = (0..2).map(|_| complex_normal_vector(&mut rng, 4, 1e-9)).collect();
        let combs: Vec<CVec> = hs.iter().map(|h| h / c(h.norm())).collect();
        let k = SideKnowledge { side: &sc.victim, h_hat: &hs, eps: &[1e-11, 1e-11] };
        let lo = ul_rate(&k, &combs, None, 0.1, 10.0, 1e-14).unwrap();
        let hi = ul_rate(&k, &combs, None, 0.1, 10.0, 2e-14).unwrap();
        assert!(lo.rates.iter().zip(&hi.rates).all(|(a, b)| b < a));
    }

    proptest::proptest! {
        #[test]
        fn combiner_scale_leaves_sinr_unchanged(seed in 0u64..500, scale in 1e-3f64..1e3, phase in 0.0f64..std::f64::consts::TAU) {
            let cfg = SystemConfig { num_victim_bs: 2, num_aggressor_bs: 2, ues_per_cell: 2, duct_loss: 1e-10, ..lone_config() };
            let sc = build_scenario(&cfg, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let hs: Vec<CVec> = (0..4).map(|_| complex_normal_vector(&mut rng, 4, 1e-9)).collect();
            let combs: Vec<CVec> = (0..4).map(|_| complex_normal_vector(&mut rng, 4, 1.0)).collect();
            let scaled: Vec<CVec> = combs.iter().map(|c| c * Complex64::from_polar(scale, phase)).collect();
            let refs: Vec<&CVec> = hs.iter().take(2).collect();
            let w = mrt_precoder(&refs).unwrap();
            let pre = PrecoderSet { matrices: vec![w.clone(), w], kind: PrecoderKind::Mrt };
            let k = SideKnowledge { side: &sc.victim, h_hat: &hs, eps: &[1e-11; 4] };
            let a = ul_terms(&k, &combs, Some((&sc.duct, &pre)), 0.1, 10.0, 1e-14).unwrap();
            let b = ul_terms(&k, &scaled, Some((&sc.duct, &pre)), 0.1, 10.0, 1e-14).unwrap();
            for (x, y) in a.iter().zip(&b) {
                proptest::prop_assert!((x.sinr() - y.sinr()).abs() <= 1e-9 * x.sinr());
            }
        }
    }
}
