//! Exact generators on enumerated finite state spaces.
//!
//! `Q[s, s']` is the total rate of the allowed jumps taking `s` to `s' ≠ s`
//! and the diagonal is minus the row sum. Because rates are swap symmetric,
//! `Q` is a symmetric matrix and every communicating class is closed.

use nalgebra::{DMatrix, DVector};
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::Serialize;

use crate::classify::is_frozen;
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Configuration, ConstraintFamily, Site};

/// Longest window enumerated without a particle-count filter.
pub const FULL_BUDGET: usize = 24;
/// Largest state space accepted with a particle-count filter.
pub const FILTERED_BUDGET: u128 = 1 << 24;
/// Classes up to this size are solved by dense least squares.
pub const DENSE_LIMIT: usize = 1500;
/// Tolerance of the stationary solve.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct MarkovModel {
    family: ConstraintFamily,
    template: Configuration,
    count: Option<usize>,
    states: Vec<u64>,
    rows: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
    class_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Patterns of `len` bits with exactly `k` ones, increasing.
fn fixed_count_patterns(len: usize, k: usize) -> Vec<u64> {
    if k == 0 {
        return vec![0];
    }
    if k > len {
        return Vec::new();
    }
    let limit = 1u128 << len;
    let mut v: u128 = (1u128 << k) - 1;
    let mut out = Vec::new();
    while v < limit {
        out.push(v as u64);
        // Gosper's hack
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

impl MarkovModel {
    /// Enumerates the window `[start, start + len - 1]` (optionally only the
    /// configurations with `count` particles) and assembles the generator.
    pub fn build(
        family: &ConstraintFamily,
        start: Site,
        len: usize,
        boundary: Boundary,
        count: Option<usize>,
    ) -> Result<Self> {
        let template = Configuration::empty(start, len, boundary)?;
        let states = match count {
            None => {
                if len > FULL_BUDGET {
                    return Err(Error::BudgetExceeded {
                        states: 1u128 << len,
                        budget: 1u128 << FULL_BUDGET,
                    });
                }
                (0..1u64 << len).collect()
            }
            Some(k) => {
                let n = binomial(len, k);
                if n > FILTERED_BUDGET {
                    return Err(Error::BudgetExceeded { states: n, budget: FILTERED_BUDGET });
                }
                fixed_count_patterns(len, k)
            }
        };
        let mut rows = Vec::with_capacity(states.len());
        let mut exit = Vec::with_capacity(states.len());
        let mut uf = UnionFind::<usize>::new(states.len());
        for (i, &b) in states.iter().enumerate() {
            let c = template.with_bits(b);
            let mut row: Vec<(usize, f64)> = Vec::new();
            for x in c.bonds() {
                let r = family.jump_rate(&c, x);
                if r > 0.0 {
                    let target = c.swap(x)?.bits();
                    let j = states
                        .binary_search(&target)
                        .expect("jumps preserve the particle count");
                    match row.iter_mut().find(|(k, _)| *k == j) {
                        Some(e) => e.1 += r,
                        None => row.push((j, r)),
                    }
                    uf.union(i, j);
                }
            }
            row.sort_by_key(|e| e.0);
            exit.push(row.iter().map(|e| e.1).sum());
            rows.push(row);
        }
        let labels = uf.into_labeling();
        let mut class_index = vec![usize::MAX; states.len()];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut class_of = vec![0; states.len()];
        for i in 0..states.len() {
            let root = labels[i];
            if class_index[root] == usize::MAX {
                class_index[root] = classes.len();
                classes.push(Vec::new());
            }
            class_of[i] = class_index[root];
            classes[class_of[i]].push(i);
        }
        Ok(Self {
            family: family.clone(),
            template,
            count,
            states,
            rows,
            exit,
            class_of,
            classes,
        })
    }

    pub fn family(&self) -> &ConstraintFamily {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.template.len()
    }

    pub fn start(&self) -> Site {
        self.template.start()
    }

    pub fn boundary(&self) -> Boundary {
        self.template.boundary()
    }

    pub fn count_filter(&self) -> Option<usize> {
        self.count
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state_bits(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, i: usize) -> Configuration {
        self.template.with_bits(self.states[i])
    }

    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        self.states.binary_search(&c.bits()).ok()
    }

    /// Off-diagonal entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `-Q[i, i]`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return -self.exit[i];
        }
        self.rows[i]
            .binary_search_by_key(&j, |e| e.0)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0.0)
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.class_of[i]
    }

    pub fn is_frozen_state(&self, i: usize) -> bool {
        is_frozen(&self.state(i))
    }

    /// No transition leaves the class.
    pub fn is_closed(&self, class: usize) -> bool {
        self.classes[class]
            .iter()
            .all(|&i| self.rows[i].iter().all(|&(j, _)| self.class_of[j] == class))
    }

    /// Largest `|Q[i,j] - Q[j,i]|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                worst = worst.max((r - self.entry(j, i)).abs());
            }
        }
        worst
    }

    /// Largest absolute row sum of `Q`.
    pub fn row_sum_defect(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.exit)
            .map(|(row, e)| (row.iter().map(|x| x.1).sum::<f64>() - e).abs())
            .fold(0.0, f64::max)
    }

    /// `(νQ)`, the vector `ν(𝓛 1_σ)` indexed by state.
    pub fn apply_left(&self, nu: &Measure) -> Vec<f64> {
        let mut out: Vec<f64> = nu
            .weights
            .iter()
            .zip(&self.exit)
            .map(|(w, e)| -w * e)
            .collect();
        for (i, row) in self.rows.iter().enumerate() {
            let w = nu.weights[i];
            if w != 0.0 {
                for &(j, r) in row {
                    out[j] += w * r;
                }
            }
        }
        out
    }
}

/// A probability vector over the states of a [`MarkovModel`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measure {
    pub weights: Vec<f64>,
}

impl Measure {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn point_mass(model: &MarkovModel, i: usize) -> Self {
        let mut weights = vec![0.0; model.num_states()];
        weights[i] = 1.0;
        Self { weights }
    }

    pub fn uniform_on(model: &MarkovModel, states: &[usize]) -> Self {
        let mut weights = vec![0.0; model.num_states()];
        let w = 1.0 / states.len() as f64;
        for &i in states {
            weights[i] = w;
        }
        Self { weights }
    }

    /// Bernoulli product measure of density `rho`, restricted to the model's
    /// states and renormalised (a no-op without a count filter).
    pub fn product(model: &MarkovModel, rho: f64) -> Self {
        let n = model.len() as i32;
        let weights: Vec<f64> = model
            .state_bits()
            .iter()
            .map(|b| {
                let k = b.count_ones() as i32;
                rho.powi(k) * (1.0 - rho).powi(n - k)
            })
            .collect();
        let mut m = Self { weights };
        m.normalize();
        m
    }

    /// `Σ c_i ν_i`; coefficients are used as given.
    pub fn mixture(parts: &[(f64, &Measure)]) -> Self {
        let len = parts.first().map_or(0, |p| p.1.weights.len());
        let mut weights = vec![0.0; len];
        for (c, m) in parts {
            for (w, v) in weights.iter_mut().zip(&m.weights) {
                *w += c * v;
            }
        }
        Self { weights }
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn normalize(&mut self) {
        let t = self.total();
        if t > 0.0 {
            for w in &mut self.weights {
                *w /= t;
            }
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Largest `|ν(s) - other(s)|`.
    pub fn distance(&self, other: &Measure) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `max - min` of the weights over `states`.
    pub fn spread_on(&self, states: &[usize]) -> f64 {
        let (lo, hi) = states.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(self.weights[i]), hi.max(self.weights[i]))
        });
        if states.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// The stationary measure supported on one closed class.
#[derive(Clone, Debug, Serialize)]
pub struct Extremal {
    pub class: usize,
    pub frozen: bool,
    pub measure: Measure,
}

/// Solves `νQ = 0, Σν = 1` restricted to each closed class.
pub fn stationary_measures(model: &MarkovModel) -> Result<Vec<Extremal>> {
    (0..model.classes().len())
        .filter(|&c| model.is_closed(c))
        .map(|c| {
            let members = &model.classes()[c];
            let local = solve_class(model, members)?;
            let mut weights = vec![0.0; model.num_states()];
            for (&i, w) in members.iter().zip(local) {
                weights[i] = w;
            }
            Ok(Extremal {
                class: c,
                frozen: members.len() == 1 && model.is_frozen_state(members[0]),
                measure: Measure::new(weights),
            })
        })
        .collect()
}

fn solve_class(model: &MarkovModel, members: &[usize]) -> Result<Vec<f64>> {
    let m = members.len();
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let pos = |i: usize| members.binary_search(&i).expect("transitions stay in the class");
    let mut x = if m <= DENSE_LIMIT {
        // rows 0..m: (Q_C)^T ν = 0; row m: Σ ν = 1
        let mut a = DMatrix::<f64>::zeros(m + 1, m);
        for (col, &i) in members.iter().enumerate() {
            a[(col, col)] = -model.exit_rate(i);
            for &(j, r) in model.row(i) {
                a[(pos(j), col)] += r;
            }
            a[(m, col)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(m + 1);
        b[m] = 1.0;
        let svd = a.svd(true, true);
        let sol = svd
            .solve(&b, 1e-13)
            .map_err(|e| Error::Singular(e.to_string()))?;
        sol.iter().copied().collect::<Vec<f64>>()
    } else {
        power_iteration(model, members)?
    };
    if x.iter().any(|v| *v < -SOLVE_TOL || !v.is_finite()) {
        return Err(Error::Singular("stationary solve produced negative weights".into()));
    }
    for v in &mut x {
        *v = v.max(0.0);
    }
    let t: f64 = x.iter().sum();
    Ok(x.into_iter().map(|v| v / t).collect())
}

/// Iterates the uniformised chain `I + Q/Λ` on one class.
fn power_iteration(model: &MarkovModel, members: &[usize]) -> Result<Vec<f64>> {
    let m = members.len();
    let pos = |i: usize| members.binary_search(&i).expect("transitions stay in the class");
    let lambda = 1.05 * members.iter().map(|&i| model.exit_rate(i)).fold(0.0, f64::max);
    let mut pi = vec![1.0 / m as f64; m];
    // start off-uniform so the iteration does real work
    for (k, v) in pi.iter_mut().enumerate() {
        *v *= 1.0 + 0.5 * ((k % 7) as f64 / 7.0);
    }
    let t: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= t);
    for _ in 0..200_000 {
        let mut next: Vec<f64> = members
            .iter()
            .zip(&pi)
            .map(|(&i, &p)| p * (1.0 - model.exit_rate(i) / lambda))
            .collect();
        for (col, &i) in members.iter().enumerate() {
            for &(j, r) in model.row(i) {
                next[pos(j)] += pi[col] * r / lambda;
            }
        }
        let delta = next
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pi = next;
        if delta * lambda < SOLVE_TOL * 1e-3 {
            return Ok(pi);
        }
    }
    Err(Error::Singular("power iteration did not converge".into()))
}

/// `max_σ |ν(𝓛 1_σ)|`.
pub fn check_stationary(model: &MarkovModel, nu: &Measure) -> f64 {
    model
        .apply_left(nu)
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max)
}

/// `max_{σ, x} |c_x(σ) (ν(σ^{x,x+1}) - ν(σ))|`.
pub fn check_detailed_balance(model: &MarkovModel, nu: &Measure) -> f64 {
    let family = model.family();
    let mut worst = 0.0f64;
    for i in 0..model.num_states() {
        let s = model.state(i);
        for x in s.bonds() {
            let c = family.rate(&s, x);
            if c == 0.0 {
                continue;
            }
            let j = model
                .index_of(&s.swap(x).expect("bond inside window"))
                .expect("swaps preserve the count");
            worst = worst.max((c * (nu.get(j) - nu.get(i))).abs());
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct CountSpread {
    pub count: usize,
    pub states: usize,
    /// Whether the non-frozen configurations with this count form one class.
    pub single_class: bool,
    /// `max - min` of ν over them; only meaningful for a single class.
    pub spread: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Exchangeability {
    pub per_count: Vec<CountSpread>,
    pub max_spread: f64,
}

/// Per particle count, the spread of ν over the non-frozen configurations,
/// reported when those configurations form a single class.
pub fn check_exchangeability(model: &MarkovModel, nu: &Measure) -> Exchangeability {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); model.len() + 1];
    for i in 0..model.num_states() {
        if !model.is_frozen_state(i) {
            groups[model.state_bits()[i].count_ones() as usize].push(i);
        }
    }
    let per_count: Vec<CountSpread> = groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(count, g)| {
            let single = g.iter().all(|&i| model.class_of(i) == model.class_of(g[0]));
            CountSpread {
                count,
                states: g.len(),
                single_class: single,
                spread: single.then(|| nu.spread_on(&g)),
            }
        })
        .collect();
    let max_spread = per_count
        .iter()
        .filter_map(|c| c.spread)
        .fold(0.0, f64::max);
    Exchangeability { per_count, max_spread }
}

/// Split of a measure into its frozen and non-frozen parts.
#[derive(Clone, Debug, Serialize)]
pub struct Decomposition {
    pub alpha_frozen: f64,
    pub frozen: Option<Measure>,
    pub alpha_ergodic: f64,
    pub ergodic: Option<Measure>,
    /// Stationarity residual of each conditional (0 when absent).
    pub frozen_residual: f64,
    pub ergodic_residual: f64,
}

impl Decomposition {
    pub fn reassemble(&self) -> Measure {
        let mut parts = Vec::new();
        if let Some(f) = &self.frozen {
            parts.push((self.alpha_frozen, f));
        }
        if let Some(e) = &self.ergodic {
            parts.push((self.alpha_ergodic, e));
        }
        Measure::mixture(&parts)
    }
}

pub fn decompose(model: &MarkovModel, nu: &Measure) -> Decomposition {
    let frozen: Vec<bool> = (0..model.num_states()).map(|i| model.is_frozen_state(i)).collect();
    let part = |keep: bool| -> (f64, Option<Measure>) {
        let weights: Vec<f64> = nu
            .weights
            .iter()
            .zip(&frozen)
            .map(|(&w, &f)| if f == keep { w } else { 0.0 })
            .collect();
        let alpha: f64 = weights.iter().sum();
        if alpha > 0.0 {
            let mut m = Measure::new(weights);
            m.normalize();
            (alpha, Some(m))
        } else {
            (alpha, None)
        }
    };
    let (alpha_frozen, frozen_part) = part(true);
    let (_, ergodic_part) = part(false);
    let residual = |m: &Option<Measure>| m.as_ref().map_or(0.0, |m| check_stationary(model, m));
    Decomposition {
        alpha_frozen,
        frozen_residual: residual(&frozen_part),
        ergodic_residual: residual(&ergodic_part),
        alpha_ergodic: 1.0 - alpha_frozen,
        frozen: frozen_part,
        ergodic: ergodic_part,
    }
}

/// On every class, ν is either identically zero (`≤ zero_tol`) or strictly
/// positive everywhere.
pub fn check_positivity(model: &MarkovModel, nu: &Measure, zero_tol: f64) -> bool {
    model.classes().iter().all(|class| {
        let positive = class.iter().filter(|&&i| nu.get(i) > zero_tol).count();
        positive == 0 || positive == class.len()
    })
}

/// Reflection of a configuration inside its window.
pub fn mirror(config: &Configuration) -> Configuration {
    config.mirror()
}

/// Summary of one exact instance, as emitted by the `exact` subcommand.
#[derive(Clone, Debug, Serialize)]
pub struct ExactReport {
    pub window: usize,
    pub boundary: Boundary,
    pub count: Option<usize>,
    pub rho: f64,
    pub states: usize,
    pub classes: Vec<ClassSummary>,
    pub residuals: Residuals,
    pub spreads: Spreads,
    pub decomposition: DecompositionSummary,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassSummary {
    pub size: usize,
    pub particles: usize,
    pub frozen: bool,
    pub representative: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Residuals {
    pub generator_asymmetry: f64,
    pub row_sum: f64,
    pub product_stationary: f64,
    pub product_detailed_balance: f64,
    pub extremal_stationary: f64,
    pub extremal_detailed_balance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Spreads {
    /// Largest `max - min` of an extremal measure over its class.
    pub extremal_class_spread: f64,
    pub product_exchangeability: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionSummary {
    pub alpha_frozen: f64,
    pub alpha_ergodic: f64,
    pub frozen_residual: f64,
    pub ergodic_residual: f64,
    pub reassembly_error: f64,
}

/// Builds the model and runs every check against `μ_ρ` and the extremal
/// stationary measures; `passed` compares all residuals with `tol`.
pub fn exact_report(
    family: &ConstraintFamily,
    len: usize,
    boundary: Boundary,
    count: Option<usize>,
    rho: f64,
    tol: f64,
) -> Result<ExactReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidDensity(rho));
    }
    let model = MarkovModel::build(family, 0, len, boundary, count)?;
    let product = Measure::product(&model, rho);
    let extremals = stationary_measures(&model)?;
    let mut ext_stat = 0.0f64;
    let mut ext_db = 0.0f64;
    let mut ext_spread = 0.0f64;
    for e in &extremals {
        ext_stat = ext_stat.max(check_stationary(&model, &e.measure));
        ext_db = ext_db.max(check_detailed_balance(&model, &e.measure));
        ext_spread = ext_spread.max(e.measure.spread_on(&model.classes()[e.class]));
    }
    let dec = decompose(&model, &product);
    let residuals = Residuals {
        generator_asymmetry: model.asymmetry(),
        row_sum: model.row_sum_defect(),
        product_stationary: check_stationary(&model, &product),
        product_detailed_balance: check_detailed_balance(&model, &product),
        extremal_stationary: ext_stat,
        extremal_detailed_balance: ext_db,
    };
    let spreads = Spreads {
        extremal_class_spread: ext_spread,
        product_exchangeability: check_exchangeability(&model, &product).max_spread,
    };
    let decomposition = DecompositionSummary {
        alpha_frozen: dec.alpha_frozen,
        alpha_ergodic: dec.alpha_ergodic,
        frozen_residual: dec.frozen_residual,
        ergodic_residual: dec.ergodic_residual,
        reassembly_error: dec.reassemble().distance(&product),
    };
    let passed = [
        residuals.generator_asymmetry,
        residuals.row_sum,
        residuals.product_stationary,
        residuals.product_detailed_balance,
        residuals.extremal_stationary,
        residuals.extremal_detailed_balance,
        spreads.extremal_class_spread,
        spreads.product_exchangeability,
        decomposition.frozen_residual,
        decomposition.ergodic_residual,
        decomposition.reassembly_error,
    ]
    .iter()
    .all(|&r| r <= tol);
    let classes = model
        .classes()
        .iter()
        .map(|c| ClassSummary {
            size: c.len(),
            particles: model.state_bits()[c[0]].count_ones() as usize,
            frozen: c.len() == 1 && model.is_frozen_state(c[0]),
            representative: model.state(c[0]).to_string(),
        })
        .collect();
    Ok(ExactReport {
        window: len,
        boundary,
        count,
        rho,
        states: model.num_states(),
        classes,
        residuals,
        spreads,
        decomposition,
        passed,
    })
}

/// One `(window, count, ρ)` instance of a batch.
#[derive(Clone, Debug)]
pub struct Instance {
    pub len: usize,
    pub boundary: Boundary,
    pub count: Option<usize>,
    pub rho: f64,
}

/// Runs independent instances on the rayon pool, each owning its model.
pub fn run_batch(
    family: &ConstraintFamily,
    instances: &[Instance],
    tol: f64,
) -> Vec<Result<ExactReport>> {
    instances
        .par_iter()
        .map(|i| exact_report(family, i.len, i.boundary, i.count, i.rho, tol))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmm() -> ConstraintFamily {
        ConstraintFamily::pmm()
    }

    fn ring(len: usize) -> MarkovModel {
        MarkovModel::build(&pmm(), 0, len, Boundary::Periodic, None).unwrap()
    }

    #[test]
    fn gosper_enumeration() {
        for n in 0..=10 {
            for k in 0..=n {
                let v = fixed_count_patterns(n, k);
                assert_eq!(v.len() as u128, binomial(n, k));
                assert!(v.windows(2).all(|w| w[0] < w[1]));
                assert!(v.iter().all(|b| b.count_ones() as usize == k));
            }
        }
    }

    #[test]
    fn ring_of_three() {
        let m = ring(3);
        assert_eq!(m.num_states(), 8);
        let twos: Vec<usize> = (0..8).filter(|&i| m.state_bits()[i].count_ones() == 2).collect();
        let c = m.class_of(twos[0]);
        assert!(twos.iter().all(|&i| m.class_of(i) == c));
        assert_eq!(m.classes()[c].len(), 3);
        for &i in &twos {
            for &j in &twos {
                if i != j {
                    assert_eq!(m.entry(i, j), 2.0);
                }
            }
        }
        let ext = stationary_measures(&m).unwrap();
        let e = ext.iter().find(|e| e.class == c).unwrap();
        for &i in &twos {
            assert!((e.measure.get(i) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interval_frozen_singletons() {
        let m = MarkovModel::build(&pmm(), 1, 4, Boundary::Empty, None).unwrap();
        for s in ["0000", "1000", "0100", "0010", "0001", "1001"] {
            let c = Configuration::parse(s, 1, Boundary::Empty).unwrap();
            let i = m.index_of(&c).unwrap();
            assert!(m.is_frozen_state(i), "{s}");
            assert_eq!(m.classes()[m.class_of(i)], vec![i], "{s}");
        }
    }

    #[test]
    fn ring_of_four_pairs_form_one_class() {
        let m = MarkovModel::build(&pmm(), 0, 4, Boundary::Periodic, Some(2)).unwrap();
        assert_eq!(m.num_states(), 6);
        assert_eq!(m.classes().len(), 1);
    }

    #[test]
    fn generator_invariants() {
        for len in 3..=9 {
            let m = ring(len);
            assert_eq!(m.asymmetry(), 0.0);
            assert!(m.row_sum_defect() < 1e-12);
            for i in 0..m.num_states() {
                for &(j, r) in m.row(i) {
                    assert!(r > 0.0);
                    assert_eq!(m.state_bits()[i].count_ones(), m.state_bits()[j].count_ones());
                }
            }
        }
    }

    #[test]
    fn ring_of_five_uniform() {
        let m = MarkovModel::build(&pmm(), 0, 5, Boundary::Periodic, Some(2)).unwrap();
        let ext = stationary_measures(&m).unwrap();
        for e in ext.iter().filter(|e| !e.frozen) {
            let class = &m.classes()[e.class];
            let u = 1.0 / class.len() as f64;
            for &i in class {
                assert!((e.measure.get(i) - u).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stationarity_checks() {
        let m = ring(6);
        for rho in [0.1, 0.3, 0.5, 0.9] {
            let mu = Measure::product(&m, rho);
            assert!(check_stationary(&m, &mu) <= 1e-12);
            assert!(check_detailed_balance(&m, &mu) <= 1e-12);
            assert!(check_exchangeability(&m, &mu).max_spread <= 1e-12);
        }
        let frozen = m.index_of(&Configuration::parse("100100", 0, Boundary::Periodic).unwrap()).unwrap();
        assert_eq!(check_stationary(&m, &Measure::point_mass(&m, frozen)), 0.0);
        let mobile = m.index_of(&Configuration::parse("110000", 0, Boundary::Periodic).unwrap()).unwrap();
        assert!(check_stationary(&m, &Measure::point_mass(&m, mobile)) > 0.1);
    }

    #[test]
    fn skewed_measure_violates_balance() {
        let m = ring(5);
        let ext = stationary_measures(&m).unwrap();
        let e = ext.iter().find(|e| m.classes()[e.class].len() > 2).unwrap();
        let mut skewed = e.measure.clone();
        let first = m.classes()[e.class][0];
        skewed.weights[first] *= 1.5;
        skewed.normalize();
        assert!(check_detailed_balance(&m, &skewed) > 1e-3);
        assert!(check_stationary(&m, &skewed) > 1e-3);
    }

    #[test]
    fn decomposition_examples() {
        let m = ring(6);
        let frozen = m.index_of(&Configuration::parse("100100", 0, Boundary::Periodic).unwrap()).unwrap();
        let pm = Measure::point_mass(&m, frozen);
        let d = decompose(&m, &pm);
        assert_eq!(d.alpha_frozen, 1.0);
        assert!(d.ergodic.is_none());

        let ext = stationary_measures(&m).unwrap();
        let mobile = ext.iter().find(|e| !e.frozen && m.classes()[e.class].len() > 1).unwrap();
        let d = decompose(&m, &mobile.measure);
        assert_eq!(d.alpha_ergodic, 1.0);

        let half = Measure::mixture(&[(0.5, &pm), (0.5, &mobile.measure)]);
        let d = decompose(&m, &half);
        assert!((d.alpha_frozen - 0.5).abs() < 1e-15);
        assert!((d.alpha_ergodic - 0.5).abs() < 1e-15);
        assert!(d.frozen_residual <= 1e-12 && d.ergodic_residual <= 1e-12);
        assert!(d.reassemble().distance(&half) <= 1e-12);
    }

    #[test]
    fn positivity_examples() {
        let m = ring(5);
        let ext = stationary_measures(&m).unwrap();
        for e in &ext {
            assert!(check_positivity(&m, &e.measure, 0.0));
        }
        let big = ext.iter().find(|e| m.classes()[e.class].len() > 2).unwrap();
        let mut holed = big.measure.clone();
        holed.weights[m.classes()[big.class][0]] = 0.0;
        holed.normalize();
        assert!(!check_positivity(&m, &holed, 0.0));
        assert!(check_stationary(&m, &holed) > 0.0);
    }

    #[test]
    fn mirror_invariance_on_intervals() {
        let f = pmm();
        let m = MarkovModel::build(&f, 0, 8, Boundary::Empty, None).unwrap();
        let ext = stationary_measures(&m).unwrap();
        for e in ext.iter().filter(|e| !e.frozen) {
            for &i in &m.classes()[e.class] {
                let s = m.state(i);
                let r = mirror(&s);
                if crate::connect::connected(&f, &s, &r, 24).unwrap() {
                    let j = m.index_of(&r).unwrap();
                    assert!((e.measure.get(i) - e.measure.get(j)).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn power_iteration_matches_dense() {
        let m = MarkovModel::build(&pmm(), 0, 8, Boundary::Periodic, Some(4)).unwrap();
        let class = m
            .classes()
            .iter()
            .max_by_key(|c| c.len())
            .unwrap()
            .clone();
        let dense = solve_class(&m, &class).unwrap();
        let power = power_iteration(&m, &class).unwrap();
        for (a, b) in dense.iter().zip(&power) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn count_filter_budget() {
        assert!(MarkovModel::build(&pmm(), 0, 25, Boundary::Periodic, None).is_err());
        let m = MarkovModel::build(&pmm(), 0, 30, Boundary::Periodic, Some(2)).unwrap();
        assert_eq!(m.num_states(), 435);
        assert!(MarkovModel::build(&pmm(), 0, 60, Boundary::Periodic, Some(30)).is_err());
    }

    #[test]
    fn report_passes_on_small_ring() {
        let r = exact_report(&pmm(), 5, Boundary::Periodic, None, 0.5, 1e-10).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.residuals.product_stationary <= 1e-12);
        assert!(exact_report(&pmm(), 5, Boundary::Periodic, None, 1.0, 1e-10).is_err());
    }
}
