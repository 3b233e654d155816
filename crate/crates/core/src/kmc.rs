//! Continuous-time event-driven simulation on rings.
//!
//! Events are selected from a binary indexed tree over the effective bond
//! rates (rates of exchanges that change the configuration). The time of the
//! next event is drawn as soon as the previous one is applied, so sampling
//! the state at arbitrary times never touches the random stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Configuration, ConstraintFamily};

/// Events between full rebuilds of the rate tree.
pub const REBUILD_INTERVAL: u64 = 1_000_000;

/// Fenwick tree over non-negative weights.
#[derive(Clone, Debug)]
pub struct Fenwick {
    tree: Vec<f64>,
    values: Vec<f64>,
}

impl Fenwick {
    pub fn new(values: Vec<f64>) -> Self {
        let mut f = Self { tree: vec![0.0; values.len()], values };
        f.rebuild();
        f
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn rebuild(&mut self) {
        let n = self.values.len();
        self.tree.copy_from_slice(&self.values);
        for i in 0..n {
            let j = i | (i + 1);
            if j < n {
                self.tree[j] += self.tree[i];
            }
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        let delta = v - self.values[i];
        if delta == 0.0 {
            return;
        }
        self.values[i] = v;
        let mut k = i;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k |= k + 1;
        }
    }

    /// Sum of the first `n` weights.
    pub fn prefix(&self, n: usize) -> f64 {
        let mut s = 0.0;
        let mut k = n;
        while k > 0 {
            s += self.tree[k - 1];
            k &= k - 1;
        }
        s
    }

    pub fn total(&self) -> f64 {
        self.prefix(self.values.len())
    }

    /// Index `i` with `prefix(i) ≤ target < prefix(i + 1)`, skipping zero
    /// weights; clamps to the last positive weight against round-off.
    pub fn find(&self, target: f64) -> usize {
        let n = self.tree.len();
        let mut pos = 0;
        let mut rem = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= rem {
                rem -= self.tree[next - 1];
                pos = next;
            }
            step >>= 1;
        }
        if pos < n && self.values[pos] > 0.0 {
            pos
        } else {
            (0..n).rev().find(|&i| self.values[i] > 0.0).unwrap_or(0)
        }
    }
}

/// Outcome of a single [`SimState::step`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Jumped(usize),
    Absorbed,
}

/// Random stream of one replica: the seed selects the key, the replica
/// index the stream.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

#[derive(Clone, Debug)]
pub struct SimState {
    family: ConstraintFamily,
    sites: Vec<u8>,
    clock: f64,
    next_event: f64,
    rates: Fenwick,
    rng: ChaCha8Rng,
    seed: u64,
    event_count: u64,
    since_rebuild: u64,
    particles: usize,
}

impl SimState {
    /// Starts at time 0 on a ring with the given occupations.
    pub fn new(family: &ConstraintFamily, sites: Vec<u8>, seed: u64, replica: u64) -> Result<Self> {
        Self::with_rng(family, sites, seed, replica_rng(seed, replica))
    }

    fn with_rng(family: &ConstraintFamily, sites: Vec<u8>, seed: u64, rng: ChaCha8Rng) -> Result<Self> {
        if sites.len() < 3 {
            return Err(Error::InvalidConfiguration("rings need at least 3 sites".into()));
        }
        if sites.iter().any(|&s| s > 1) {
            return Err(Error::InvalidConfiguration("occupations must be 0 or 1".into()));
        }
        let particles = sites.iter().map(|&s| s as usize).sum();
        let mut state = Self {
            family: family.clone(),
            rates: Fenwick::new(vec![0.0; sites.len()]),
            sites,
            clock: 0.0,
            next_event: 0.0,
            rng,
            seed,
            event_count: 0,
            since_rebuild: 0,
            particles,
        };
        state.rebuild();
        state.draw_next();
        Ok(state)
    }

    pub fn from_configuration(family: &ConstraintFamily, config: &Configuration, seed: u64, replica: u64) -> Result<Self> {
        if config.boundary() != Boundary::Periodic {
            return Err(Error::Precondition("simulation runs on rings".into()));
        }
        let sites = (0..config.len()).map(|i| ((config.bits() >> i) & 1) as u8).collect();
        Self::new(family, sites, seed, replica)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[u8] {
        &self.sites
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn particle_count(&self) -> usize {
        self.particles
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.total()
    }

    pub fn bond_rate(&self, x: usize) -> f64 {
        self.rates.get(x)
    }

    /// Bits of the configuration, site `i` at bit `i` (rings up to 64 sites).
    pub fn bits(&self) -> u64 {
        self.sites
            .iter()
            .take(64)
            .enumerate()
            .fold(0, |b, (i, &s)| b | (s as u64) << i)
    }

    /// Difference between the tree total and a fresh sum of bond rates.
    pub fn rate_drift(&self) -> f64 {
        let fresh: f64 = (0..self.len()).map(|x| self.compute_rate(x)).sum();
        (self.rates.total() - fresh).abs()
    }

    fn compute_rate(&self, x: usize) -> f64 {
        let l = self.sites.len();
        let y = (x + 1) % l;
        if self.sites[x] == self.sites[y] {
            return 0.0;
        }
        let r = self.family.radius();
        let mut p = 0usize;
        for i in 0..self.family.width() {
            let s = (x + l * (r + 1) + i - r) % l;
            p |= (self.sites[s] as usize) << i;
        }
        self.family.rate_of_pattern(p)
    }

    fn rebuild(&mut self) {
        let values: Vec<f64> = (0..self.len()).map(|x| self.compute_rate(x)).collect();
        self.rates = Fenwick::new(values);
        self.since_rebuild = 0;
    }

    fn draw_next(&mut self) {
        let total = self.rates.total();
        self.next_event = if total > 0.0 {
            self.clock + exponential(&mut self.rng, total)
        } else {
            f64::INFINITY
        };
    }

    fn apply(&mut self, x: usize) {
        let l = self.len();
        let y = (x + 1) % l;
        self.sites.swap(x, y);
        let r = self.family.radius();
        let reach = (2 * r + 3).min(l);
        for k in 0..reach {
            let b = (x + l * (r + 2) + k - r - 1) % l;
            let v = self.compute_rate(b);
            self.rates.set(b, v);
        }
        self.event_count += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= REBUILD_INTERVAL {
            self.rebuild();
        }
    }

    fn fire(&mut self) -> usize {
        let total = self.rates.total();
        let target = self.rng.random::<f64>() * total;
        let x = self.rates.find(target);
        self.clock = self.next_event;
        self.apply(x);
        self.draw_next();
        x
    }

    /// Performs the next event; an absorbed state leaves everything as is.
    pub fn step(&mut self) -> StepOutcome {
        if self.next_event.is_finite() {
            StepOutcome::Jumped(self.fire())
        } else {
            StepOutcome::Absorbed
        }
    }

    /// Runs every event up to time `until` and sets the clock to it. The
    /// callback sees each jump as `(time, bond)` before it is applied.
    pub fn advance_with(&mut self, until: f64, mut on_jump: impl FnMut(&Self, f64, usize)) {
        while self.next_event <= until {
            let total = self.rates.total();
            let target = self.rng.random::<f64>() * total;
            let x = self.rates.find(target);
            on_jump(self, self.next_event, x);
            self.clock = self.next_event;
            self.apply(x);
            self.draw_next();
        }
        if until > self.clock {
            self.clock = until;
        }
    }

    pub fn advance(&mut self, until: f64) {
        self.advance_with(until, |_, _, _| {});
    }
}

/// Per-site occupations at the sample times, averaged over replicas.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityProfile {
    pub times: Vec<f64>,
    pub bins: Vec<Vec<f64>>,
    pub replicas: usize,
}

impl DensityProfile {
    pub fn at(&self, sample: usize) -> &[f64] {
        &self.bins[sample]
    }

    /// Averages `width` consecutive bins into one.
    pub fn block_average(row: &[f64], width: usize) -> Vec<f64> {
        row.chunks(width)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}

/// Summary of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<u8>>,
    /// Occupation of each site averaged over `[0, horizon]`.
    pub time_average: Vec<f64>,
    pub events: u64,
    pub particles: usize,
    pub final_sites: Vec<u8>,
}

/// `samples + 1` equally spaced times from 0 to `horizon`.
pub fn sample_times(horizon: f64, samples: usize) -> Vec<f64> {
    if samples == 0 {
        return vec![horizon];
    }
    (0..=samples).map(|i| horizon * i as f64 / samples as f64).collect()
}

/// Simulates one replica, recording snapshots at `sample_times(horizon, samples)`.
pub fn run(
    family: &ConstraintFamily,
    initial: Vec<u8>,
    horizon: f64,
    samples: usize,
    seed: u64,
    replica: u64,
) -> Result<Trajectory> {
    let state = SimState::new(family, initial, seed, replica)?;
    Ok(run_state(state, horizon, samples))
}

fn run_state(mut state: SimState, horizon: f64, samples: usize) -> Trajectory {
    let l = state.len();
    let mut integral = vec![0.0; l];
    let mut last_change = vec![0.0; l];
    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    for t in sample_times(horizon, samples) {
        state.advance_with(t, |s, now, x| {
            let y = (x + 1) % l;
            for site in [x, y] {
                integral[site] += s.sites[site] as f64 * (now - last_change[site]);
                last_change[site] = now;
            }
        });
        times.push(t);
        snapshots.push(state.sites.clone());
    }
    let time_average = if horizon > 0.0 {
        (0..l)
            .map(|i| (integral[i] + state.sites[i] as f64 * (horizon - last_change[i])) / horizon)
            .collect()
    } else {
        state.sites.iter().map(|&s| s as f64).collect()
    };
    Trajectory {
        times,
        snapshots,
        time_average,
        events: state.event_count,
        particles: state.particles,
        final_sites: state.sites,
    }
}

/// Independent Bernoulli occupations with density `profile((x + 0.5) / L)`.
pub fn sample_initial(len: usize, profile: impl Fn(f64) -> f64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..len)
        .map(|x| {
            let rho = profile((x as f64 + 0.5) / len as f64);
            (rng.random::<f64>() < rho) as u8
        })
        .collect()
}

/// Runs `replicas` independent trajectories, each starting from its own
/// sample of the profile, and averages their snapshots.
pub fn run_replicas(
    family: &ConstraintFamily,
    len: usize,
    profile: impl Fn(f64) -> f64 + Sync,
    horizon: f64,
    samples: usize,
    seed: u64,
    replicas: usize,
) -> Result<(DensityProfile, u64)> {
    let runs: Vec<Trajectory> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| run_from_profile(family, len, &profile, horizon, samples, seed, r))
        .collect::<Result<_>>()?;
    Ok(aggregate(&runs))
}

/// One replica started from a sample of the profile; the initial sample and
/// the dynamics share the replica's stream.
pub fn run_from_profile(
    family: &ConstraintFamily,
    len: usize,
    profile: impl Fn(f64) -> f64,
    horizon: f64,
    samples: usize,
    seed: u64,
    replica: u64,
) -> Result<Trajectory> {
    let mut rng = replica_rng(seed, replica);
    let initial = sample_initial(len, profile, &mut rng);
    SimState::with_rng(family, initial, seed, rng).map(|s| run_state(s, horizon, samples))
}

/// Averages snapshots of trajectories that share the sample times.
pub fn aggregate(runs: &[Trajectory]) -> (DensityProfile, u64) {
    let times = runs.first().map(|r| r.times.clone()).unwrap_or_default();
    let l = runs.first().map_or(0, |r| r.final_sites.len());
    let mut bins = vec![vec![0.0; l]; times.len()];
    let mut events = 0;
    for r in runs {
        events += r.events;
        for (row, snap) in bins.iter_mut().zip(&r.snapshots) {
            for (b, &s) in row.iter_mut().zip(snap) {
                *b += s as f64;
            }
        }
    }
    let n = runs.len().max(1) as f64;
    bins.iter_mut().flatten().for_each(|b| *b /= n);
    (DensityProfile { times, bins, replicas: runs.len() }, events)
}

/// Fraction of time spent in each configuration, per batch of equal length.
#[derive(Clone, Debug)]
pub struct Occupation {
    pub batches: Vec<Vec<f64>>,
    pub events: u64,
}

impl Occupation {
    /// Mean over batches and its standard error, per configuration bits.
    pub fn mean_and_error(&self, bits: u64) -> (f64, f64) {
        let b = self.batches.len() as f64;
        let xs: Vec<f64> = self.batches.iter().map(|v| v[bits as usize]).collect();
        let mean = xs.iter().sum::<f64>() / b;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
        (mean, (var / b).sqrt())
    }
}

/// Time spent in every configuration of a small ring, split into `batches`
/// consecutive windows of equal length.
pub fn state_occupation(
    family: &ConstraintFamily,
    initial: Vec<u8>,
    horizon: f64,
    batches: usize,
    seed: u64,
    replica: u64,
) -> Result<Occupation> {
    if initial.len() > 20 {
        return Err(Error::WindowTooLarge { len: initial.len(), max: 20 });
    }
    if batches < 2 || horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::Precondition("need at least two batches and a positive horizon".into()));
    }
    let mut state = SimState::new(family, initial, seed, replica)?;
    let width = horizon / batches as f64;
    let mut out = Vec::with_capacity(batches);
    for k in 0..batches {
        let end = width * (k + 1) as f64;
        let mut occ = vec![0.0; 1 << state.len()];
        let mut since = state.clock();
        state.advance_with(end, |s, now, _| {
            occ[s.bits() as usize] += now - since;
            since = now;
        });
        occ[state.bits() as usize] += end - since;
        occ.iter_mut().for_each(|v| *v /= width);
        out.push(occ);
    }
    Ok(Occupation { batches: out, events: state.event_count() })
}
