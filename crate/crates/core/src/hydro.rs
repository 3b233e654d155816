//! Porous medium equation `∂_t ρ = ∂_xx(ρ²)` on the periodic unit interval,
//! and its comparison with simulated density profiles under diffusive
//! scaling.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmc::{run_from_profile, DensityProfile};
use crate::lattice::ConstraintFamily;

/// Fraction of the stability bound used by [`solve`].
pub const CFL: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PdeGrid {
    cells: Vec<f64>,
    time: f64,
}

impl PdeGrid {
    pub fn new(cells: Vec<f64>) -> Result<Self> {
        if cells.len() < 3 {
            return Err(Error::GridMismatch("at least 3 cells are needed".into()));
        }
        if let Some(v) = cells.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidDensity(*v));
        }
        Ok(Self { cells, time: 0.0 })
    }

    /// Cell averages approximated by midpoint values of `profile`.
    pub fn from_profile(m: usize, profile: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..m).map(|i| profile((i as f64 + 0.5) / m as f64)).collect())
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells.len() as f64
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `Σ ρ_i dx`.
    pub fn mass(&self) -> f64 {
        self.cells.iter().sum::<f64>() * self.dx()
    }

    /// Largest stable step, `dx² / (4 · max 2ρ)`.
    pub fn max_dt(&self) -> f64 {
        let top = self.cells.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            f64::INFINITY
        } else {
            self.dx().powi(2) / (8.0 * top)
        }
    }

    /// One forward Euler step with centred second differences.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let max_dt = self.max_dt();
        if dt.is_nan() || dt < 0.0 || dt > max_dt {
            return Err(Error::Unstable { dt, max_dt });
        }
        let m = self.cells.len();
        let lambda = dt / self.dx().powi(2);
        let sq: Vec<f64> = self.cells.iter().map(|r| r * r).collect();
        let (lo, hi) = self.bounds();
        for i in 0..m {
            let left = sq[(i + m - 1) % m];
            let right = sq[(i + 1) % m];
            self.cells[i] += lambda * (left - 2.0 * sq[i] + right);
        }
        self.time += dt;
        debug_assert!({
            let (a, b) = self.bounds();
            a >= lo - 1e-12 && b <= hi + 1e-12
        });
        Ok(())
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.cells
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    }

    /// Averages of `blocks` equal groups of cells.
    pub fn block_average(&self, blocks: usize) -> Result<Vec<f64>> {
        block_average(&self.cells, blocks)
    }
}

/// One step of the scheme; see [`PdeGrid::step`].
pub fn pme_step(grid: &mut PdeGrid, dt: f64) -> Result<()> {
    grid.step(dt)
}

/// Advances to `t` with steps of `CFL · max_dt`, the last one shortened.
pub fn solve(grid: &mut PdeGrid, t: f64) -> Result<()> {
    while grid.time < t {
        let dt = (CFL * grid.max_dt()).min(t - grid.time);
        if dt <= 0.0 {
            break;
        }
        grid.step(dt)?;
    }
    Ok(())
}

pub fn block_average(values: &[f64], blocks: usize) -> Result<Vec<f64>> {
    if blocks == 0 || !values.len().is_multiple_of(blocks) {
        return Err(Error::GridMismatch(format!(
            "{} values do not split into {blocks} blocks",
            values.len()
        )));
    }
    Ok(DensityProfile::block_average(values, values.len() / blocks))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Discrepancy {
    /// Root mean square difference.
    pub l2: f64,
    pub sup: f64,
}

/// Compares two profiles on the same macroscopic grid.
pub fn compare(kmc: &[f64], pde: &[f64]) -> Result<Discrepancy> {
    if kmc.len() != pde.len() || kmc.is_empty() {
        return Err(Error::GridMismatch(format!("{} vs {} cells", kmc.len(), pde.len())));
    }
    let diffs = kmc.iter().zip(pde).map(|(a, b)| (a - b).abs());
    let (sq, sup) = diffs.fold((0.0, 0.0f64), |(s, m), d| (s + d * d, m.max(d)));
    Ok(Discrepancy { l2: (sq / kmc.len() as f64).sqrt(), sup })
}

/// Initial macroscopic densities, all within `[0.2, 0.8]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Smooth periodic step between 0.2 and 0.8.
    Step,
    /// Gaussian bump of height 0.4 over 0.3.
    Bump,
    Flat,
}

impl Profile {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Profile::Step => 0.5 + 0.3 * (4.0 * (2.0 * PI * u).sin()).tanh() / 4f64.tanh(),
            Profile::Bump => 0.3 + 0.4 * (-(u - 0.5).powi(2) / (2.0 * 0.05f64.powi(2))).exp(),
            Profile::Flat => 0.5,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Step => "step",
            Profile::Bump => "bump",
            Profile::Flat => "flat",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(Profile::Step),
            "bump" => Ok(Profile::Bump),
            "flat" => Ok(Profile::Flat),
            other => Err(Error::Precondition(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HydroParams {
    pub len: usize,
    pub replicas: usize,
    pub t_macro: f64,
    pub profile: Profile,
    pub blocks: usize,
    pub pde_cells: usize,
    pub seed: u64,
}

impl HydroParams {
    pub fn new(len: usize, replicas: usize, t_macro: f64, profile: Profile, seed: u64) -> Self {
        Self { len, replicas, t_macro, profile, blocks: 64, pde_cells: 512, seed }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HydroReport {
    pub params: HydroParams,
    /// Microscopic horizon `L² · t_macro`.
    pub horizon: f64,
    pub kmc_blocks: Vec<f64>,
    pub pde_blocks: Vec<f64>,
    pub initial_blocks: Vec<f64>,
    pub discrepancy: Discrepancy,
    /// Root mean square over blocks of the replica standard error.
    pub noise_se: f64,
    pub events: u64,
}

/// Runs the replicas to `L² · t_macro`, block-averages their final profiles
/// and compares them with the PDE solution at `t_macro`.
pub fn hydro_experiment(family: &ConstraintFamily, params: &HydroParams) -> Result<HydroReport> {
    let p = params;
    if p.replicas < 2 {
        return Err(Error::Precondition("need at least two replicas".into()));
    }
    if !p.len.is_multiple_of(p.blocks) || !p.pde_cells.is_multiple_of(p.blocks) {
        return Err(Error::GridMismatch(format!(
            "L = {} and {} cells must both split into {} blocks",
            p.len, p.pde_cells, p.blocks
        )));
    }
    let horizon = (p.len * p.len) as f64 * p.t_macro;
    let profile = p.profile;
    let runs: Vec<(Vec<f64>, u64)> = (0..p.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let t = run_from_profile(family, p.len, |u| profile.eval(u), horizon, 0, p.seed, r)?;
            let row: Vec<f64> = t.final_sites.iter().map(|&s| s as f64).collect();
            Ok((block_average(&row, p.blocks)?, t.events))
        })
        .collect::<Result<_>>()?;
    let n = runs.len() as f64;
    let mut mean = vec![0.0; p.blocks];
    for (row, _) in &runs {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; p.blocks];
    for (row, _) in &runs {
        var.iter_mut().zip(row.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m).powi(2) / (n - 1.0));
    }
    let noise_se = (var.iter().map(|v| v / n).sum::<f64>() / p.blocks as f64).sqrt();

    let mut grid = PdeGrid::from_profile(p.pde_cells, |u| profile.eval(u))?;
    let initial_blocks = grid.block_average(p.blocks)?;
    solve(&mut grid, p.t_macro)?;
    let pde_blocks = grid.block_average(p.blocks)?;
    let discrepancy = compare(&mean, &pde_blocks)?;
    Ok(HydroReport {
        params: p.clone(),
        horizon,
        kmc_blocks: mean,
        pde_blocks,
        initial_blocks,
        discrepancy,
        noise_se,
        events: runs.iter().map(|r| r.1).sum(),
    })
}
