//! Relative entropy and dissipation functionals on finite window marginals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{MarkovModel, Measure};
use crate::lattice::{mask, swap_bits, Boundary, Configuration, ConstraintFamily, Site};

/// Largest window for which marginals are tabulated.
pub const MAX_MARGINAL: usize = 20;

/// `Φ(u, v) = (u − v) log(u / v)`, with `Φ(0, 0) = 0` and `+∞` when exactly
/// one argument vanishes.
pub fn phi(u: f64, v: f64) -> Result<f64> {
    if u < 0.0 || v < 0.0 || u.is_nan() || v.is_nan() {
        return Err(Error::NegativeInput(u, v));
    }
    Ok(phi_unchecked(u, v))
}

fn phi_unchecked(u: f64, v: f64) -> f64 {
    if u == v {
        0.0
    } else if u == 0.0 || v == 0.0 {
        f64::INFINITY
    } else {
        (u - v) * (u / v).ln()
    }
}

fn check_density(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDensity(rho))
    }
}

/// `μ_ρ` of a cylinder with `k` particles on `n` sites, in log form.
fn log_product(rho: f64, n: usize, k: usize) -> f64 {
    k as f64 * rho.ln() + (n - k) as f64 * (1.0 - rho).ln()
}

/// A probability vector over all `2^len` patterns of the window
/// `[start, start + len − 1]`; bit `i` is site `start + i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowMeasure {
    start: Site,
    len: usize,
    weights: Vec<f64>,
}

impl WindowMeasure {
    pub fn new(start: Site, len: usize, weights: Vec<f64>) -> Result<Self> {
        if len == 0 || len > MAX_MARGINAL {
            return Err(Error::WindowTooLarge { len, max: MAX_MARGINAL });
        }
        if weights.len() != 1 << len {
            return Err(Error::InvalidConfiguration(format!(
                "expected {} weights, got {}",
                1usize << len,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidConfiguration(format!("weight {w} is not a finite non-negative number")));
        }
        Ok(Self { start, len, weights })
    }

    /// Marginal of `nu` on the `len` sites starting at `offset`; on rings the
    /// window may wrap, on intervals it must fit inside the model's window.
    pub fn marginal(model: &MarkovModel, nu: &Measure, offset: Site, len: usize) -> Result<Self> {
        let map = SiteMap::new(model, offset, len)?;
        let mut weights = vec![0.0; 1 << len];
        for (i, &b) in model.state_bits().iter().enumerate() {
            weights[map.pattern(b)] += nu.get(i);
        }
        Self::new(offset, len, weights)
    }

    /// Marginal on a sub-window `[start, start + len − 1]` of this window.
    pub fn restrict(&self, start: Site, len: usize) -> Result<Self> {
        let shift = start - self.start;
        if shift < 0 || shift as usize + len > self.len || len == 0 {
            return Err(Error::SiteOutOfWindow {
                site: start,
                first: self.start,
                last: self.last(),
            });
        }
        let m = mask(len);
        let mut weights = vec![0.0; 1 << len];
        for (p, &w) in self.weights.iter().enumerate() {
            weights[((p as u64 >> shift) & m) as usize] += w;
        }
        Self::new(start, len, weights)
    }

    pub fn start(&self) -> Site {
        self.start
    }

    pub fn last(&self) -> Site {
        self.start + self.len as Site - 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, pattern: usize) -> f64 {
        self.weights[pattern]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn config(&self, pattern: usize) -> Configuration {
        Configuration::from_bits(self.start, self.len, pattern as u64, Boundary::Empty)
            .expect("window validated on construction")
    }

    /// Bonds `{x, x+1}` whose rate is determined by the window.
    pub fn resolvable_bonds(&self, family: &ConstraintFamily) -> Vec<Site> {
        let r = family.radius() as Site;
        (self.start + r..=self.last() - r - 1).collect()
    }

    fn local_bond(&self, family: &ConstraintFamily, x: Site) -> Result<usize> {
        let r = family.radius() as Site;
        if x - r < self.start || x + r + 1 > self.last() {
            return Err(Error::Unresolvable {
                bond: x,
                reason: format!("rate neighbourhood leaves the window [{}, {}]", self.start, self.last()),
            });
        }
        Ok((x - self.start) as usize)
    }
}

/// Maps model state bits to window patterns.
struct SiteMap {
    indices: Vec<usize>,
}

impl SiteMap {
    fn new(model: &MarkovModel, offset: Site, len: usize) -> Result<Self> {
        if len == 0 || len > MAX_MARGINAL || len > model.len() {
            return Err(Error::WindowTooLarge { len, max: model.len().min(MAX_MARGINAL) });
        }
        let l = model.len() as Site;
        let rel = offset - model.start();
        if model.boundary() == Boundary::Empty && (rel < 0 || rel + len as Site > l) {
            return Err(Error::SiteOutOfWindow {
                site: offset,
                first: model.start(),
                last: model.start() + l - 1,
            });
        }
        Ok(Self {
            indices: (0..len as Site).map(|j| (rel + j).rem_euclid(l) as usize).collect(),
        })
    }

    fn pattern(&self, bits: u64) -> usize {
        self.indices
            .iter()
            .enumerate()
            .fold(0, |p, (j, &i)| p | (((bits >> i) & 1) as usize) << j)
    }
}

/// `H(ν) = Σ ν(σ) log(ν(σ)/μ_ρ(σ))` over the window.
pub fn relative_entropy(nu: &WindowMeasure, rho: f64) -> Result<f64> {
    modified_entropy(nu, rho, nu.len())
}

/// The entropy sum restricted to patterns with at most `k` particles.
pub fn modified_entropy(nu: &WindowMeasure, rho: f64, k: usize) -> Result<f64> {
    check_density(rho)?;
    Ok(nu
        .weights
        .iter()
        .enumerate()
        .filter(|(p, w)| **w > 0.0 && p.count_ones() as usize <= k)
        .map(|(p, &w)| w * (w.ln() - log_product(rho, nu.len, p.count_ones() as usize)))
        .sum())
}

/// `Γ(x, σ) = ν(c_{x,x+1} 1_σ)` for a pattern `sigma` on the sub-window
/// `[start, start + len − 1]`, evaluated from the larger window measure `nu`,
/// which must resolve the rate at `x`.
pub fn gamma(
    family: &ConstraintFamily,
    nu: &WindowMeasure,
    start: Site,
    len: usize,
    x: Site,
    sigma: usize,
) -> Result<f64> {
    nu.local_bond(family, x)?;
    let shift = start - nu.start;
    if shift < 0 || shift as usize + len > nu.len {
        return Err(Error::SiteOutOfWindow { site: start, first: nu.start, last: nu.last() });
    }
    let m = mask(len);
    let mut total = 0.0;
    for (p, &w) in nu.weights.iter().enumerate() {
        if w > 0.0 && ((p as u64 >> shift) & m) as usize == sigma {
            total += w * family.rate(&nu.config(p), x);
        }
    }
    Ok(total)
}

/// `α(x) = Σ_σ c_x(σ) Φ(ν(σ^{x,x+1}), ν(σ))`.
pub fn alpha(family: &ConstraintFamily, nu: &WindowMeasure, x: Site) -> Result<f64> {
    let j = nu.local_bond(family, x)?;
    let mut total = 0.0;
    for (p, &w) in nu.weights.iter().enumerate() {
        let q = swap_bits(p as u64, j, j + 1) as usize;
        if q != p {
            let c = family.rate(&nu.config(p), x);
            if c > 0.0 {
                total += c * phi_unchecked(nu.weights[q], w);
            }
        }
    }
    Ok(total)
}

/// `β(x) = Σ_ζ c_x(ζ) |ν(ζ) − ν(ζ^{x,x+1})|`.
pub fn beta(family: &ConstraintFamily, nu: &WindowMeasure, x: Site) -> Result<f64> {
    let j = nu.local_bond(family, x)?;
    let mut total = 0.0;
    for (p, &w) in nu.weights.iter().enumerate() {
        let q = swap_bits(p as u64, j, j + 1) as usize;
        if q != p {
            total += family.rate(&nu.config(p), x) * (w - nu.weights[q]).abs();
        }
    }
    Ok(total)
}

/// `max_σ c_x(σ) |ν(σ^{x,x+1}) − ν(σ)|` over the resolvable bonds.
pub fn balance_residual(family: &ConstraintFamily, nu: &WindowMeasure) -> f64 {
    let mut worst = 0.0f64;
    for x in nu.resolvable_bonds(family) {
        let j = (x - nu.start) as usize;
        for (p, &w) in nu.weights.iter().enumerate() {
            let q = swap_bits(p as u64, j, j + 1) as usize;
            if q != p {
                worst = worst.max(family.rate(&nu.config(p), x) * (w - nu.weights[q]).abs());
            }
        }
    }
    worst
}

/// Split of the stationarity identity `Σ_σ log(ν(σ)/μ_ρ(σ)) ν(𝓛 1_σ) = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyBalance {
    /// Contribution of bonds whose rate is resolved inside the window.
    pub bulk: f64,
    /// Every other bond that can change the window pattern.
    pub boundary: f64,
    pub total: f64,
    /// `Σ α(x)` over the bulk bonds; equals `−2·bulk` when finite.
    pub alpha_sum: f64,
}

/// Evaluates the split for the window `[offset, offset + len − 1]` of `nu`.
/// Cylinders of zero mass are skipped.
pub fn entropy_balance(
    model: &MarkovModel,
    nu: &Measure,
    rho: f64,
    offset: Site,
    len: usize,
) -> Result<EntropyBalance> {
    check_density(rho)?;
    let family = model.family();
    let window = WindowMeasure::marginal(model, nu, offset, len)?;
    let map = SiteMap::new(model, offset, len)?;
    let log_ratio = |p: usize| -> Option<f64> {
        let w = window.weights[p];
        (w > 0.0).then(|| w.ln() - log_product(rho, len, p.count_ones() as usize))
    };
    let bulk_bonds = window.resolvable_bonds(family);

    let mut bulk = 0.0;
    let mut alpha_sum = 0.0;
    for &x in &bulk_bonds {
        let j = (x - offset) as usize;
        for (p, &w) in window.weights.iter().enumerate() {
            let q = swap_bits(p as u64, j, j + 1) as usize;
            if q == p {
                continue;
            }
            let c = family.rate(&window.config(p), x);
            if let Some(l) = log_ratio(p) {
                bulk += l * c * (window.weights[q] - w);
            }
        }
        alpha_sum += alpha(family, &window, x)?;
    }

    // Remaining flux between window patterns, from the full measure.
    let l = model.len() as Site;
    let is_bulk = |x: Site| -> bool {
        let j = match model.boundary() {
            Boundary::Periodic => (x - offset).rem_euclid(l),
            Boundary::Empty => x - offset,
        };
        bulk_bonds.contains(&(offset + j))
    };
    let mut flux = vec![0.0; 1 << len];
    for i in 0..model.num_states() {
        let w = nu.get(i);
        if w == 0.0 {
            continue;
        }
        let s = model.state(i);
        let p = map.pattern(s.bits());
        for x in s.bonds() {
            if is_bulk(x) {
                continue;
            }
            let c = family.jump_rate(&s, x);
            if c > 0.0 {
                let q = map.pattern(s.swap(x)?.bits());
                if q != p {
                    flux[q] += w * c;
                    flux[p] -= w * c;
                }
            }
        }
    }
    let boundary: f64 = (0..flux.len())
        .filter_map(|p| log_ratio(p).map(|lr| lr * flux[p]))
        .sum();
    Ok(EntropyBalance { bulk, boundary, total: bulk + boundary, alpha_sum })
}

#[derive(Clone, Debug, Serialize)]
pub struct BondValue {
    pub bond: Site,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub window_start: Site,
    pub window_len: usize,
    pub rho: f64,
    pub h: f64,
    pub alpha: Vec<BondValue>,
    pub beta: Vec<BondValue>,
    pub balance_residual: f64,
    pub balance: EntropyBalance,
}

pub fn entropy_report(
    model: &MarkovModel,
    nu: &Measure,
    rho: f64,
    offset: Site,
    len: usize,
) -> Result<EntropyReport> {
    let family = model.family();
    let window = WindowMeasure::marginal(model, nu, offset, len)?;
    let bonds = window.resolvable_bonds(family);
    let per_bond = |f: fn(&ConstraintFamily, &WindowMeasure, Site) -> Result<f64>| {
        bonds
            .iter()
            .map(|&x| f(family, &window, x).map(|value| BondValue { bond: x, value }))
            .collect::<Result<Vec<_>>>()
    };
    Ok(EntropyReport {
        window_start: offset,
        window_len: len,
        rho,
        h: relative_entropy(&window, rho)?,
        alpha: per_bond(alpha)?,
        beta: per_bond(beta)?,
        balance_residual: balance_residual(family, &window),
        balance: entropy_balance(model, nu, rho, offset, len)?,
    })
}
