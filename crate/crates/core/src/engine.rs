//! Monte Carlo driver: per-trial method pipelines, power sweeps, FP traces.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{steering_vector, DuctChannel};
use crate::combining::{combine_side, CombinerKind, CombinerModel};
use crate::config::{parse_sweep, DuctPenalty, SystemConfig};
use crate::doa::{collect_gp_samples, estimate_angles, match_angle_errors};
use crate::error::{Error, Result, StageExt};
use crate::estimation::{estimate_side, nmse, receive_ce_signal, CeModel, ChannelEstimate, RegimeTag};
use crate::linalg::{c, dbm_to_watts, identity, watts_to_dbm, CMat, CVec};
use crate::pilots::{dft_pilots, PilotBook};
use crate::precoding::fp::{fp_optimize, FpInputs, FpSettings, FpState, Penalty, VictimGenie};
use crate::precoding::{mrt_precoder, null_precoder, PrecoderKind, PrecoderSet};
use crate::rates::{dl_rate, ul_rate, SideKnowledge};
use crate::rng::{stage_rng, stream_key, Stream};
use crate::scenario::{build_scenario, Scenario, SystemSide};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Duct channels zeroed.
    NoRi,
    /// MRT aggressors; victim estimator and combiner assume no RI.
    IgnoreRi,
    /// LoS-null aggressors; scalar null-regime estimator and combiner.
    Null,
    /// FP aggressors; null-regime estimator and combiner.
    Fp,
    /// MRT aggressors; victim models the duct with root-MUSIC AoAs.
    RiAware,
}

impl Method {
    pub const DEFAULT: [Method; 4] = [Method::NoRi, Method::IgnoreRi, Method::Null, Method::Fp];

    pub fn name(self) -> &'static str {
        match self {
            Method::NoRi => "no_ri",
            Method::IgnoreRi => "ignore_ri",
            Method::Null => "null",
            Method::Fp => "fp",
            Method::RiAware => "ri_aware",
        }
    }

    fn regime(self) -> RegimeTag {
        match self {
            Method::NoRi | Method::IgnoreRi => RegimeTag::Ignore,
            Method::Null | Method::Fp => RegimeTag::Null,
            Method::RiAware => RegimeTag::RiAware,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [Method::NoRi, Method::IgnoreRi, Method::Null, Method::Fp, Method::RiAware]
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::config("methods", format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerChoice {
    Mrc,
    Mmse,
}

impl CombinerChoice {
    pub fn name(self) -> &'static str {
        match self {
            CombinerChoice::Mrc => "mrc",
            CombinerChoice::Mmse => "mmse",
        }
    }
}

impl fmt::Display for CombinerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MethodPipeline {
    pub method: Method,
    pub combiner: CombinerChoice,
}

impl MethodPipeline {
    fn combiner_kind(&self) -> CombinerKind {
        match (self.combiner, self.method) {
            (CombinerChoice::Mrc, _) => CombinerKind::Mrc,
            (CombinerChoice::Mmse, Method::Null | Method::Fp) => CombinerKind::MmseNull,
            (CombinerChoice::Mmse, _) => CombinerKind::Mmse,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub pipeline: MethodPipeline,
    pub trial: usize,
    pub p_ul_dbm: f64,
    /// Per victim UE.
    pub nmse: Vec<f64>,
    /// Per victim UE, bit/s/Hz.
    pub ul_rate: Vec<f64>,
    /// Per aggressor UE, bit/s/Hz.
    pub dl_rate: Vec<f64>,
    /// Root-MUSIC AoA errors at the victims [rad]; empty with true angles.
    pub aoa_errors: Vec<f64>,
    /// Root-MUSIC AoD errors at the aggressors [rad].
    pub aod_errors: Vec<f64>,
    pub fp_history: Vec<f64>,
}

/// Per-(trial, point) quantities shared by every method.
struct Shared {
    book: PilotBook,
    agg_est: Vec<ChannelEstimate>,
    a_hat: Vec<CVec>,
    a_eps: Vec<f64>,
    mrt: PrecoderSet,
    /// `aod[s][r]`, transmit steering of aggressor `s` toward victim `r`.
    aod_steering: Vec<Vec<CVec>>,
    aod_errors: Vec<f64>,
    /// `aoa[r][s]`, computed on demand by the RI-aware pipeline.
    aoa: Option<(Vec<Vec<CVec>>, Vec<f64>)>,
    zero_duct: Vec<Vec<DuctChannel>>,
}

/// Monte Carlo run over one trial's scenario.
pub struct TrialContext<'a> {
    pub config: &'a SystemConfig,
    pub scenario: Scenario,
    pub trial: usize,
}

/// Seed of trial `trial`'s scenario under base seed `seed`.
pub fn scenario_seed(seed: u64, trial: usize) -> u64 {
    stream_key(&[seed, trial as u64])
}

fn split_estimates(est: &[ChannelEstimate]) -> (Vec<CVec>, Vec<f64>) {
    est.iter().map(|e| (e.h_hat.clone(), e.error_scalar())).unzip()
}

fn mrt_set(side: &SystemSide, h_hat: &[CVec]) -> Result<PrecoderSet> {
    let matrices = side
        .cells
        .iter()
        .map(|cell| mrt_precoder(&cell.iter().map(|&k| &h_hat[k]).collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    Ok(PrecoderSet { matrices, kind: PrecoderKind::Mrt })
}

/// Pairs estimated angles with true ones by greedy nearest matching and
/// returns `(estimate for each true angle, absolute errors)`.
fn pair_angles(truth: &[f64], estimates: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut left = estimates.to_vec();
    let paired: Vec<f64> = truth
        .iter()
        .map(|&t| {
            let i = (0..left.len())
                .min_by(|&a, &b| (left[a] - t).abs().total_cmp(&(left[b] - t).abs()))
                .expect("one estimate per source");
            left.swap_remove(i)
        })
        .collect();
    let errors = match_angle_errors(truth, estimates);
    (paired, errors)
}

impl<'a> TrialContext<'a> {
    pub fn new(config: &'a SystemConfig, trial: usize) -> Result<Self> {
        let scenario = build_scenario(config, scenario_seed(config.rng_seed, trial)).stage("scenario")?;
        Ok(Self { config, scenario, trial })
    }

    fn rng(&self, point: usize, stream: Stream) -> crate::rng::SimRng {
        stage_rng(self.config.rng_seed, self.trial as u64, point as u64, stream)
    }

    fn m(&self) -> usize {
        self.config.antennas_per_bs
    }

    fn steer(&self, angle: f64) -> CVec {
        steering_vector(angle, self.m(), self.config.antenna_spacing_ratio).entries
    }

    /// Aggressor-side AoD estimates from reciprocal guard-period samples.
    /// The victims' DL reaches aggressor `s` through `H_rs^T`, whose LoS part
    /// is `q(-phi) q(theta)^T`, so root-MUSIC sees `-phi`.
    fn estimate_aods(&self, point: usize) -> Result<(Vec<Vec<CVec>>, Vec<f64>)> {
        let cfg = self.config;
        let duct = &self.scenario.duct;
        let (nr, ns) = (cfg.num_victim_bs, cfg.num_aggressor_bs);
        if cfg.true_angles {
            let steering = (0..ns).map(|s| (0..nr).map(|r| self.steer(duct[r][s].aod)).collect()).collect();
            return Ok((steering, Vec::new()));
        }
        let mut rng = self.rng(point, Stream::AggressorGp);
        let iso = identity(self.m()) / c((self.m() as f64).sqrt());
        let mut steering = Vec::with_capacity(ns);
        let mut errors = Vec::new();
        for s in 0..ns {
            let transposed: Vec<CMat> = (0..nr).map(|r| duct[r][s].matrix.transpose()).collect();
            let chans: Vec<&CMat> = transposed.iter().collect();
            let shaping: Vec<&CMat> = vec![&iso; nr];
            let gp = collect_gp_samples(&chans, &shaping, cfg.dl_power, cfg.noise_power, cfg.gp_snapshot_count(), &mut rng)?;
            let est = estimate_angles(&gp, cfg.antenna_spacing_ratio, cfg.aggressor_source_count())?;
            let phis: Vec<f64> = est.angles.iter().map(|a| -a).collect();
            let row = if cfg.single_duct_angle {
                let truth = duct[0][s].aod;
                errors.push((phis[0] - truth).abs());
                vec![self.steer(phis[0]); nr]
            } else {
                let truth: Vec<f64> = (0..nr).map(|r| duct[r][s].aod).collect();
                let (paired, errs) = pair_angles(&truth, &phis);
                errors.extend(errs);
                paired.iter().map(|&p| self.steer(p)).collect()
            };
            steering.push(row);
        }
        Ok((steering, errors))
    }

    /// Victim-side AoA estimates from the aggressors' MRT downlink.
    fn estimate_aoas(&self, point: usize, mrt: &PrecoderSet) -> Result<(Vec<Vec<CVec>>, Vec<f64>)> {
        let cfg = self.config;
        let duct = &self.scenario.duct;
        let ns = cfg.num_aggressor_bs;
        if cfg.true_angles {
            let steering = duct.iter().map(|row| row.iter().map(|d| self.steer(d.aoa)).collect()).collect();
            return Ok((steering, Vec::new()));
        }
        let mut rng = self.rng(point, Stream::VictimGp);
        let mut steering = Vec::with_capacity(duct.len());
        let mut errors = Vec::new();
        for row in duct {
            let chans: Vec<&CMat> = row.iter().map(|d| &d.matrix).collect();
            let shaping: Vec<&CMat> = mrt.matrices.iter().collect();
            let gp = collect_gp_samples(&chans, &shaping, cfg.dl_power, cfg.noise_power, cfg.gp_snapshot_count(), &mut rng)?;
            let est = estimate_angles(&gp, cfg.antenna_spacing_ratio, cfg.victim_source_count())?;
            if cfg.single_duct_angle {
                errors.push((est.angles[0] - row[0].aoa).abs());
                steering.push(vec![self.steer(est.angles[0]); ns]);
            } else {
                let truth: Vec<f64> = row.iter().map(|d| d.aoa).collect();
                let (paired, errs) = pair_angles(&truth, &est.angles);
                errors.extend(errs);
                steering.push(paired.iter().map(|&a| self.steer(a)).collect());
            }
        }
        Ok((steering, errors))
    }

    fn shared(&self, point: usize, ul_power: f64, need_aoa: bool, need_aod: bool) -> Result<Shared> {
        let cfg = self.config;
        let book = dft_pilots(cfg.pilot_len);
        let agg = &self.scenario.aggressor;
        let model = CeModel::from_config(cfg, ul_power);
        let obs = receive_ce_signal(agg, None, None, &book, &model, &mut self.rng(point, Stream::AggressorCe))
            .stage("aggressor channel estimation")?;
        let agg_est =
            estimate_side(agg, &obs, &book, &model, RegimeTag::Ignore, None).stage("aggressor channel estimation")?;
        let (a_hat, a_eps) = split_estimates(&agg_est);
        let mrt = mrt_set(agg, &a_hat).stage("MRT precoding")?;
        let (aod_steering, aod_errors) = if need_aod {
            self.estimate_aods(point).stage("AoD estimation")?
        } else {
            (Vec::new(), Vec::new())
        };
        let aoa = if need_aoa {
            Some(self.estimate_aoas(point, &mrt).stage("AoA estimation")?)
        } else {
            None
        };
        let m = self.m();
        let zero_duct = self
            .scenario
            .duct
            .iter()
            .map(|row| {
                row.iter()
                    .map(|d| DuctChannel { matrix: CMat::zeros(m, m), ..d.clone() })
                    .collect()
            })
            .collect();
        Ok(Shared { book, agg_est, a_hat, a_eps, mrt, aod_steering, aod_errors, aoa, zero_duct })
    }

    fn null_set(&self, shared: &Shared) -> Result<PrecoderSet> {
        let agg = &self.scenario.aggressor;
        let matrices = agg
            .cells
            .iter()
            .enumerate()
            .map(|(s, cell)| {
                null_precoder(&shared.aod_steering[s], &cell.iter().map(|&k| &shared.a_hat[k]).collect::<Vec<_>>())
            })
            .collect::<Result<_>>()?;
        Ok(PrecoderSet { matrices, kind: PrecoderKind::Null })
    }

    /// Victim CE, estimation and combining under `precoders`.
    fn victim_receive(
        &self,
        point: usize,
        stream: Stream,
        ul_power: f64,
        pipeline: MethodPipeline,
        precoders: &PrecoderSet,
        shared: &Shared,
    ) -> Result<(Vec<ChannelEstimate>, Vec<CVec>)> {
        let cfg = self.config;
        let victim = &self.scenario.victim;
        let duct = if pipeline.method == Method::NoRi { &shared.zero_duct } else { &self.scenario.duct };
        let model = CeModel::from_config(cfg, ul_power);
        let obs = receive_ce_signal(victim, Some(duct), Some(precoders), &shared.book, &model, &mut self.rng(point, stream))
            .stage("victim CE observation")?;
        let aoa = shared.aoa.as_ref().map(|(s, _)| s.as_slice());
        let est = estimate_side(victim, &obs, &shared.book, &model, pipeline.method.regime(), aoa)
            .stage("victim channel estimation")?;
        let cmodel = CombinerModel::from_config(cfg, ul_power);
        let steering = if pipeline.method == Method::RiAware { aoa } else { None };
        let comb = combine_side(victim, &est, pipeline.combiner_kind(), &cmodel, steering).stage("combining")?;
        Ok((est, comb.into_iter().map(|c| c.c).collect()))
    }

    fn fp_inputs<'b>(
        &'b self,
        ul_power: f64,
        v_hat: &'b [CVec],
        v_eps: &'b [f64],
        combiners: &'b [CVec],
        shared: &'b Shared,
        with_victims: bool,
    ) -> FpInputs<'b> {
        FpInputs {
            victim: with_victims.then_some(VictimGenie {
                knowledge: SideKnowledge { side: &self.scenario.victim, h_hat: v_hat, eps: v_eps },
                combiners,
                duct: &self.scenario.duct,
            }),
            aggressor: SideKnowledge { side: &self.scenario.aggressor, h_hat: &shared.a_hat, eps: &shared.a_eps },
            ul_power,
            dl_power: self.config.dl_power,
            noise_power: self.config.noise_power,
        }
    }

    fn penalty<'b>(&'b self, shared: &'b Shared) -> Penalty<'b> {
        match self.config.fp_duct_penalty {
            DuctPenalty::Realized => Penalty::Realized,
            DuctPenalty::Statistical => Penalty::Statistical {
                aod_steering: &shared.aod_steering,
                rician_k: self.config.rician_k,
                duct_loss: self.config.duct_loss,
            },
        }
    }

    /// Victim estimates and combiners under null precoders, used as the
    /// genie inputs to the FP optimizer.
    fn fp_prepass(
        &self,
        point: usize,
        ul_power: f64,
        pipeline: MethodPipeline,
        shared: &Shared,
    ) -> Result<(Vec<CVec>, Vec<f64>, Vec<CVec>)> {
        let null = self.null_set(shared).stage("null precoding")?;
        let (est, comb) = self.victim_receive(point, Stream::PrepassCe, ul_power, pipeline, &null, shared)?;
        let (v_hat, v_eps) = split_estimates(&est);
        Ok((v_hat, v_eps, comb))
    }

    fn run_pipeline(&self, point: usize, p_ul_dbm: f64, pipeline: MethodPipeline, shared: &Shared) -> Result<TrialResult> {
        let cfg = self.config;
        let ul_power = dbm_to_watts(p_ul_dbm);
        let mut fp_history = Vec::new();
        let precoders = match pipeline.method {
            Method::NoRi | Method::IgnoreRi | Method::RiAware => shared.mrt.clone(),
            Method::Null => self.null_set(shared).stage("null precoding")?,
            Method::Fp => {
                let (v_hat, v_eps, comb) = self.fp_prepass(point, ul_power, pipeline, shared)?;
                let inputs = self.fp_inputs(ul_power, &v_hat, &v_eps, &comb, shared, true);
                let (w, state) = fp_optimize(inputs, self.penalty(shared), &shared.mrt, &FpSettings::from_config(cfg))
                    .stage("FP precoding")?;
                fp_history = state.objective_history;
                w
            }
        };
        let (est, comb) = self.victim_receive(point, Stream::Ce, ul_power, pipeline, &precoders, shared)?;
        let victim = &self.scenario.victim;
        let nmse = (0..victim.num_ues())
            .map(|u| nmse(&victim.serving_link(u).h, &est[u].h_hat))
            .collect::<Result<Vec<_>>>()
            .stage("NMSE")?;
        let (v_hat, v_eps) = split_estimates(&est);
        let ri = (pipeline.method != Method::NoRi).then_some((self.scenario.duct.as_slice(), &precoders));
        let ul = ul_rate(
            &SideKnowledge { side: victim, h_hat: &v_hat, eps: &v_eps },
            &comb,
            ri,
            ul_power,
            cfg.dl_power,
            cfg.noise_power,
        )
        .stage("uplink rate")?;
        let dl = dl_rate(
            &SideKnowledge { side: &self.scenario.aggressor, h_hat: &shared.a_hat, eps: &shared.a_eps },
            &precoders,
            cfg.dl_power,
            cfg.noise_power,
        )
        .stage("downlink rate")?;
        let uses_aod = matches!(pipeline.method, Method::Null | Method::Fp);
        Ok(TrialResult {
            pipeline,
            trial: self.trial,
            p_ul_dbm,
            nmse,
            ul_rate: ul.rates,
            dl_rate: dl.rates,
            aoa_errors: if pipeline.method == Method::RiAware {
                shared.aoa.as_ref().map(|(_, e)| e.clone()).unwrap_or_default()
            } else {
                Vec::new()
            },
            aod_errors: if uses_aod { shared.aod_errors.clone() } else { Vec::new() },
            fp_history,
        })
    }

    /// Every pipeline at every grid point for this trial.
    pub fn run(&self, pipelines: &[MethodPipeline], grid_dbm: &[f64]) -> Result<Vec<TrialResult>> {
        let need_aoa = pipelines.iter().any(|p| p.method == Method::RiAware);
        let need_aod = pipelines.iter().any(|p| matches!(p.method, Method::Null | Method::Fp));
        let mut out = Vec::with_capacity(pipelines.len() * grid_dbm.len());
        for (point, &p_dbm) in grid_dbm.iter().enumerate() {
            let shared = self.shared(point, dbm_to_watts(p_dbm), need_aoa, need_aod)?;
            for &p in pipelines {
                out.push(self.run_pipeline(point, p_dbm, p, &shared)?);
            }
        }
        Ok(out)
    }

    /// Aggressor estimates at one grid point, exposed for diagnostics.
    pub fn aggressor_estimates(&self, point: usize, ul_power: f64) -> Result<Vec<ChannelEstimate>> {
        Ok(self.shared(point, ul_power, false, false)?.agg_est)
    }

    /// Joint and downlink-only FP runs of exactly `max_iters` rounds.
    pub fn fp_trace(&self, p_ul_dbm: f64, combiner: CombinerChoice) -> Result<FpTrace> {
        let cfg = self.config;
        let ul_power = dbm_to_watts(p_ul_dbm);
        let shared = self.shared(0, ul_power, false, true)?;
        let pipeline = MethodPipeline { method: Method::Fp, combiner };
        let (v_hat, v_eps, comb) = self.fp_prepass(0, ul_power, pipeline, &shared)?;
        let settings = FpSettings { fixed_iterations: true, ..FpSettings::from_config(cfg) };
        let penalty = self.penalty(&shared);
        let (_, joint) = fp_optimize(self.fp_inputs(ul_power, &v_hat, &v_eps, &comb, &shared, true), penalty, &shared.mrt, &settings)
            .stage("FP trace (joint)")?;
        let (_, dl_only) =
            fp_optimize(self.fp_inputs(ul_power, &v_hat, &v_eps, &comb, &shared, false), penalty, &shared.mrt, &settings)
                .stage("FP trace (downlink only)")?;
        let cells = cfg.num_aggressor_bs as f64;
        Ok(FpTrace {
            objective: joint.objective_history.clone(),
            dl_ar_joint: joint.dl_history.iter().map(|d| d / cells).collect(),
            dl_ar_dlonly: dl_only.dl_history.iter().map(|d| d / cells).collect(),
            joint,
            dl_only,
        })
    }
}

/// FP per-iteration trace of one trial. Downlink AR is the per-cell sum rate
/// averaged over aggressor cells; index 0 is the MRT starting point.
#[derive(Debug, Clone)]
pub struct FpTrace {
    pub objective: Vec<f64>,
    pub dl_ar_joint: Vec<f64>,
    pub dl_ar_dlonly: Vec<f64>,
    pub joint: FpState,
    pub dl_only: FpState,
}

/// Uplink power grid in dBm: the config's sweep, else its single `ul_power`.
pub fn power_grid(cfg: &SystemConfig) -> Result<Vec<f64>> {
    match &cfg.ul_sweep_dbm {
        Some(s) => parse_sweep(s),
        None => Ok(vec![watts_to_dbm(cfg.ul_power)]),
    }
}

/// Mean and normal-approximation 95% interval over per-trial values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let half = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, ci_low: mean - half, ci_high: mean + half, trials: n }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub pipeline: MethodPipeline,
    pub p_ul_dbm: f64,
    pub nmse: Summary,
    pub ul_rate: Summary,
    pub dl_rate: Summary,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub trials: Vec<Vec<TrialResult>>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Aggregates per-trial results, summing in trial order.
pub fn aggregate(pipelines: &[MethodPipeline], grid_dbm: &[f64], per_trial: &[Vec<TrialResult>]) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(pipelines.len() * grid_dbm.len());
    for &pipeline in pipelines {
        for (point, &p_ul_dbm) in grid_dbm.iter().enumerate() {
            let pick = |f: &dyn Fn(&TrialResult) -> f64| -> Vec<f64> {
                per_trial
                    .iter()
                    .map(|results| {
                        let r = results
                            .iter()
                            .filter(|r| r.pipeline == pipeline)
                            .nth(point)
                            .expect("every trial covers every pipeline and point");
                        f(r)
                    })
                    .collect()
            };
            rows.push(SweepRow {
                pipeline,
                p_ul_dbm,
                nmse: Summary::of(&pick(&|r| mean(&r.nmse))),
                ul_rate: Summary::of(&pick(&|r| mean(&r.ul_rate))),
                dl_rate: Summary::of(&pick(&|r| mean(&r.dl_rate))),
            });
        }
    }
    rows
}

/// Runs every trial in parallel and aggregates in trial order.
pub fn run_sweep(cfg: &SystemConfig, pipelines: &[MethodPipeline], grid_dbm: &[f64], trials: usize) -> Result<SweepResult> {
    cfg.validate()?;
    if grid_dbm.is_empty() {
        return Err(Error::config("ul_sweep_dbm", "power grid is empty"));
    }
    if pipelines.is_empty() {
        return Err(Error::config("methods", "no methods selected"));
    }
    let per_trial: Vec<Vec<TrialResult>> = (0..trials)
        .into_par_iter()
        .map(|t| TrialContext::new(cfg, t)?.run(pipelines, grid_dbm))
        .collect::<Result<_>>()?;
    let rows = aggregate(pipelines, grid_dbm, &per_trial);
    Ok(SweepResult { rows, trials: per_trial })
}

/// One pipeline, one trial, one power point.
pub fn run_trial(cfg: &SystemConfig, pipeline: MethodPipeline, trial: usize, p_ul_dbm: f64) -> Result<TrialResult> {
    let mut r = TrialContext::new(cfg, trial)?.run(&[pipeline], &[p_ul_dbm])?;
    Ok(r.remove(0))
}

/// Mean FP traces over trials, plus every trial's trace.
#[derive(Debug, Clone)]
pub struct TraceResult {
    pub objective: Vec<f64>,
    pub dl_ar_joint: Vec<f64>,
    pub dl_ar_dlonly: Vec<f64>,
    pub trials: Vec<FpTrace>,
}

pub fn run_fp_trace(cfg: &SystemConfig, p_ul_dbm: f64, combiner: CombinerChoice, trials: usize) -> Result<TraceResult> {
    cfg.validate()?;
    let traces: Vec<FpTrace> = (0..trials)
        .into_par_iter()
        .map(|t| TrialContext::new(cfg, t)?.fp_trace(p_ul_dbm, combiner))
        .collect::<Result<_>>()?;
    let len = traces.iter().map(|t| t.objective.len()).min().unwrap_or(0);
    let avg = |f: &dyn Fn(&FpTrace) -> &Vec<f64>| -> Vec<f64> {
        (0..len).map(|i| traces.iter().map(|t| f(t)[i]).sum::<f64>() / traces.len() as f64).collect()
    };
    Ok(TraceResult {
        objective: avg(&|t| &t.objective),
        dl_ar_joint: avg(&|t| &t.dl_ar_joint),
        dl_ar_dlonly: avg(&|t| &t.dl_ar_dlonly),
        trials: traces,
    })
}
