//! Cell geometry, UE placement, pilot assignment and channel realization.
//!
//! Victim cells tile a hexagonal lattice in spiral order around the origin.
//! The aggressor system is the same lattice mirrored about the line
//! `x = separation / 2`. Hexagons are pointy-top with side (circumradius)
//! `cell_side`.

use rand::Rng;

use crate::channel::{draw_duct_channel, draw_local_channel, draw_shadowing, path_loss, DuctChannel, LocalChannel};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

pub type Point = [f64; 2];

/// Pilot index per UE plus the copilot set of every UE (including itself).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotAssignment {
    pub index: Vec<usize>,
    pub copilots: Vec<Vec<usize>>,
}

/// One cellular system: BSs, UEs, pilots and every BS-to-UE channel.
#[derive(Debug, Clone)]
pub struct SystemSide {
    pub bs_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    /// UE indices served by each cell.
    pub cells: Vec<Vec<usize>>,
    /// Serving cell of each UE.
    pub serving: Vec<usize>,
    pub pilots: PilotAssignment,
    /// `links[bs][ue]`, for every BS of this side and every UE of this side.
    pub links: Vec<Vec<LocalChannel>>,
}

impl SystemSide {
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_ues(&self) -> usize {
        self.serving.len()
    }

    /// `beta * psi` between BS `bs` and UE `ue`.
    pub fn gain(&self, bs: usize, ue: usize) -> f64 {
        self.links[bs][ue].gain()
    }

    /// Channel of a UE to its serving BS.
    pub fn serving_link(&self, ue: usize) -> &LocalChannel {
        &self.links[self.serving[ue]][ue]
    }
}

/// A fully realized world for one coherence block.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SystemConfig,
    pub seed: u64,
    pub victim: SystemSide,
    pub aggressor: SystemSide,
    /// `duct[r][s]`: channel from aggressor `s` into victim `r`.
    pub duct: Vec<Vec<DuctChannel>>,
}

impl Scenario {
    pub fn antennas(&self) -> usize {
        self.config.antennas_per_bs
    }
}

/// Centres of the first `count` cells of a hexagonal lattice, spiral order.
pub fn hex_lattice(count: usize, side: f64) -> Vec<Point> {
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let mut axial = vec![(0i64, 0i64)];
    let mut ring = 1i64;
    while axial.len() < count {
        let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        for dir in DIRS {
            for _ in 0..ring {
                axial.push((q, r));
                q += dir.0;
                r += dir.1;
            }
        }
        ring += 1;
    }
    axial.truncate(count);
    let s3 = 3f64.sqrt();
    axial
        .into_iter()
        .map(|(q, r)| [side * s3 * (q as f64 + r as f64 / 2.0), side * 1.5 * r as f64])
        .collect()
}

/// Point-in-pointy-top-hexagon test relative to the hexagon centre.
pub fn in_hexagon(offset: Point, side: f64) -> bool {
    let (x, y) = (offset[0].abs(), offset[1].abs());
    let s3 = 3f64.sqrt();
    x <= side * s3 / 2.0 + 1e-9 && y + x / s3 <= side + 1e-9
}

/// Uniform point in the hexagon with the disk of radius `exclusion` removed.
pub fn sample_in_cell<R: Rng + ?Sized>(rng: &mut R, side: f64, exclusion: f64) -> Point {
    let half_w = side * 3f64.sqrt() / 2.0;
    loop {
        let p = [rng.random_range(-half_w..half_w), rng.random_range(-side..side)];
        let d = p[0].hypot(p[1]);
        if in_hexagon(p, side) && d >= exclusion && d > 0.0 {
            return p;
        }
    }
}

/// Cyclic pilot reuse: a running counter over cells in order, modulo the
/// codebook size.
pub fn assign_pilots(cells: &[Vec<usize>], pilot_len: usize) -> Result<PilotAssignment> {
    let total: usize = cells.iter().map(Vec::len).sum();
    let mut index = vec![usize::MAX; total];
    let mut counter = 0usize;
    for (c, cell) in cells.iter().enumerate() {
        if cell.len() > pilot_len {
            return Err(Error::config(
                "pilot_len",
                format!("cell {c} has {} UEs but only {pilot_len} pilots", cell.len()),
            ));
        }
        for &ue in cell {
            if ue >= total || index[ue] != usize::MAX {
                return Err(Error::Dimension(format!("UE index {ue} repeated or out of range")));
            }
            index[ue] = counter % pilot_len;
            counter += 1;
        }
    }
    let mut by_pilot = vec![Vec::new(); pilot_len];
    for (ue, &p) in index.iter().enumerate() {
        by_pilot[p].push(ue);
    }
    let copilots = index.iter().map(|&p| by_pilot[p].clone()).collect();
    Ok(PilotAssignment { index, copilots })
}

fn place_side<R: Rng + ?Sized>(rng: &mut R, config: &SystemConfig, centres: Vec<Point>) -> Result<SystemSide> {
    let per_cell = config.ues_per_cell;
    let mut ue_positions = Vec::with_capacity(centres.len() * per_cell);
    let mut cells = Vec::with_capacity(centres.len());
    let mut serving = Vec::with_capacity(centres.len() * per_cell);
    for (c, centre) in centres.iter().enumerate() {
        let mut members = Vec::with_capacity(per_cell);
        for _ in 0..per_cell {
            let p = sample_in_cell(rng, config.cell_side, config.restricted_radius);
            members.push(ue_positions.len());
            ue_positions.push([centre[0] + p[0], centre[1] + p[1]]);
            serving.push(c);
        }
        cells.push(members);
    }
    let pilots = assign_pilots(&cells, config.pilot_len)?;
    Ok(SystemSide {
        bs_positions: centres,
        ue_positions,
        cells,
        serving,
        pilots,
        links: Vec::new(),
    })
}

fn realize_links<R: Rng + ?Sized>(rng: &mut R, config: &SystemConfig, side: &mut SystemSide) -> Result<()> {
    let m = config.antennas_per_bs;
    side.links = side
        .bs_positions
        .iter()
        .map(|bs| {
            side.ue_positions
                .iter()
                .map(|ue| {
                    let d_km = (ue[0] - bs[0]).hypot(ue[1] - bs[1]) / 1000.0;
                    let beta = path_loss(d_km)?;
                    let shadow = draw_shadowing(rng, config.shadowing_sigma_db);
                    Ok(draw_local_channel(rng, beta, shadow, m))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(())
}

/// Draws duct angles: `(aoa[r][s], aod[r][s])`, i.i.d. uniform on the
/// configured spread, per pair or per BS when `single_duct_angle` is set.
fn draw_duct_angles<R: Rng + ?Sized>(rng: &mut R, config: &SystemConfig) -> Vec<Vec<(f64, f64)>> {
    let half = config.half_spread_rad();
    let (nr, ns) = (config.num_victim_bs, config.num_aggressor_bs);
    if config.single_duct_angle {
        let aoa: Vec<f64> = (0..nr).map(|_| rng.random_range(-half..=half)).collect();
        let aod: Vec<f64> = (0..ns).map(|_| rng.random_range(-half..=half)).collect();
        (0..nr).map(|r| (0..ns).map(|s| (aoa[r], aod[s])).collect()).collect()
    } else {
        (0..nr)
            .map(|_| {
                (0..ns)
                    .map(|_| (rng.random_range(-half..=half), rng.random_range(-half..=half)))
                    .collect()
            })
            .collect()
    }
}

/// Builds the full world for `seed`: geometry, pilots, duct angles and all
/// channel realizations. Deterministic in `(config, seed)`.
pub fn build_scenario(config: &SystemConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = rng_for(&[seed, Stream::Scenario as u64]);
    let victim_centres = hex_lattice(config.num_victim_bs, config.cell_side);
    let sep_m = config.system_separation * 1000.0;
    let aggressor_centres = hex_lattice(config.num_aggressor_bs, config.cell_side)
        .into_iter()
        .map(|p| [sep_m - p[0], p[1]])
        .collect();
    let mut victim = place_side(&mut rng, config, victim_centres)?;
    let mut aggressor = place_side(&mut rng, config, aggressor_centres)?;
    let angles = draw_duct_angles(&mut rng, config);
    realize_links(&mut rng, config, &mut victim)?;
    realize_links(&mut rng, config, &mut aggressor)?;
    let m = config.antennas_per_bs;
    let duct = angles
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(theta, phi)| {
                    draw_duct_channel(
                        &mut rng,
                        theta,
                        phi,
                        config.rician_k,
                        config.duct_loss,
                        m,
                        config.antenna_spacing_ratio,
                    )
                })
                .collect()
        })
        .collect();
    Ok(Scenario {
        config: config.clone(),
        seed,
        victim,
        aggressor,
        duct,
    })
}
