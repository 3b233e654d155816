//! Configurations on finite windows, the bond exchange, and translation
//! invariant constraint families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A lattice site.
pub type Site = i64;

/// Longest window a [`Configuration`] can hold (one bit per site).
pub const MAX_WINDOW: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Every site outside the window reads 0.
    Empty,
    /// Sites are taken modulo the window length.
    Periodic,
}

/// Occupations of the window `[start, start + len - 1]`, packed one bit per
/// site (bit `i` is site `start + i`).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Configuration {
    start: Site,
    len: usize,
    bits: u64,
    boundary: Boundary,
}

#[inline]
pub(crate) fn mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl Configuration {
    pub fn from_bits(start: Site, len: usize, bits: u64, boundary: Boundary) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidConfiguration("empty window".into()));
        }
        if len > MAX_WINDOW {
            return Err(Error::WindowTooLarge { len, max: MAX_WINDOW });
        }
        if boundary == Boundary::Periodic && len < 3 {
            return Err(Error::InvalidConfiguration(format!(
                "a ring needs at least 3 sites, got {len}"
            )));
        }
        if bits & !mask(len) != 0 {
            return Err(Error::InvalidConfiguration(format!(
                "bit pattern {bits:#x} does not fit in {len} sites"
            )));
        }
        Ok(Self { start, len, bits, boundary })
    }

    pub fn empty(start: Site, len: usize, boundary: Boundary) -> Result<Self> {
        Self::from_bits(start, len, 0, boundary)
    }

    /// Parses a left-to-right string of `0`/`1` placed on `[start, start + len - 1]`.
    pub fn parse(s: &str, start: Site, boundary: Boundary) -> Result<Self> {
        let mut bits = 0u64;
        let mut len = 0usize;
        for ch in s.chars().filter(|c| !c.is_whitespace()) {
            match ch {
                '0' => {}
                '1' => {
                    if len < 64 {
                        bits |= 1 << len;
                    }
                }
                other => {
                    return Err(Error::InvalidConfiguration(format!(
                        "unexpected character {other:?} in {s:?}"
                    )))
                }
            }
            len += 1;
        }
        Self::from_bits(start, len, bits, boundary)
    }

    /// Builds a configuration from particle positions inside the window.
    pub fn from_sites(
        start: Site,
        len: usize,
        sites: impl IntoIterator<Item = Site>,
        boundary: Boundary,
    ) -> Result<Self> {
        let mut c = Self::empty(start, len, boundary)?;
        for s in sites {
            let i = c.local_index(s).ok_or(Error::SiteOutOfWindow {
                site: s,
                first: c.first(),
                last: c.last(),
            })?;
            c.bits |= 1 << i;
        }
        Ok(c)
    }

    pub fn start(&self) -> Site {
        self.start
    }

    pub fn first(&self) -> Site {
        self.start
    }

    pub fn last(&self) -> Site {
        self.start + self.len as Site - 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Same window and boundary, different occupations.
    pub fn with_bits(&self, bits: u64) -> Self {
        debug_assert_eq!(bits & !mask(self.len), 0);
        Self { bits, ..*self }
    }

    pub fn contains(&self, site: Site) -> bool {
        site >= self.first() && site <= self.last()
    }

    /// Position of `site` in the packed pattern, resolving the boundary mode.
    /// `None` means the site is outside the window under empty boundary.
    pub fn local_index(&self, site: Site) -> Option<usize> {
        let off = site - self.start;
        match self.boundary {
            Boundary::Empty => (0..self.len as Site).contains(&off).then_some(off as usize),
            Boundary::Periodic => Some(off.rem_euclid(self.len as Site) as usize),
        }
    }

    /// Occupation of `site`; zero outside the window under empty boundary.
    pub fn get(&self, site: Site) -> bool {
        self.local_index(site)
            .is_some_and(|i| (self.bits >> i) & 1 == 1)
    }

    pub fn occupation(&self, site: Site) -> u8 {
        self.get(site) as u8
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn particles(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len)
            .filter(move |&i| (self.bits >> i) & 1 == 1)
            .map(move |i| self.start + i as Site)
    }

    /// Exchanges the occupations of `x` and `x + 1`.
    pub fn swap(&self, x: Site) -> Result<Self> {
        let (i, j) = self.bond_indices(x)?;
        Ok(self.with_bits(swap_bits(self.bits, i, j)))
    }

    /// Local indices of the two ends of bond `{x, x+1}`.
    pub fn bond_indices(&self, x: Site) -> Result<(usize, usize)> {
        let out = |site| Error::SiteOutOfWindow {
            site,
            first: self.first(),
            last: self.last(),
        };
        let i = self.local_index(x).ok_or_else(|| out(x))?;
        let j = self.local_index(x + 1).ok_or_else(|| out(x + 1))?;
        Ok((i, j))
    }

    /// Bonds `{x, x+1}` whose exchange is defined in this window.
    pub fn bonds(&self) -> impl Iterator<Item = Site> {
        let n = match self.boundary {
            Boundary::Empty => self.len - 1,
            Boundary::Periodic => self.len,
        };
        let start = self.start;
        (0..n as Site).map(move |i| start + i)
    }

    /// Mirror image inside the window: site `first + i` takes the value of
    /// site `last - i`.
    pub fn mirror(&self) -> Self {
        let rev = self.bits.reverse_bits() >> (64 - self.len);
        self.with_bits(rev)
    }
}

#[inline]
pub(crate) fn swap_bits(bits: u64, i: usize, j: usize) -> u64 {
    let d = ((bits >> i) ^ (bits >> j)) & 1;
    bits ^ ((d << i) | (d << j))
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if (self.bits >> i) & 1 == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Configuration({self} @ {}..={}, {:?})",
            self.first(),
            self.last(),
            self.boundary
        )
    }
}

/// Translation invariant rates `c_x(η) = c_0(η(x + ·))` given by a table over
/// the local window `[x - R, x + R + 1]`.
///
/// Table index bit `i` holds the occupation of site `x - R + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintFamily {
    radius: usize,
    rates: Vec<f64>,
}

/// Largest radius accepted; the table has `2^(2R+2)` entries.
pub const MAX_RADIUS: usize = 6;

#[derive(Serialize, Deserialize)]
struct FamilyDoc {
    radius: usize,
    rates: Vec<RateEntry>,
}

#[derive(Serialize, Deserialize)]
struct RateEntry {
    window: String,
    value: f64,
}

impl ConstraintFamily {
    /// The porous medium model, `c_x(η) = η(x-1) + η(x+2)`.
    pub fn pmm() -> Self {
        Self::from_fn(1, |w| (w[0] + w[3]) as f64).expect("radius 1 is valid")
    }

    /// Tabulates `f` over every local window; `f` receives the occupations
    /// of `[x - R, x + R + 1]` left to right.
    pub fn from_fn(radius: usize, f: impl Fn(&[u8]) -> f64) -> Result<Self> {
        let width = 2 * radius + 2;
        let rates = (0..1usize << width)
            .map(|p| {
                let w: Vec<u8> = (0..width).map(|i| ((p >> i) & 1) as u8).collect();
                f(&w)
            })
            .collect();
        Self::from_table(radius, rates)
    }

    pub fn from_table(radius: usize, rates: Vec<f64>) -> Result<Self> {
        if radius == 0 || radius > MAX_RADIUS {
            return Err(Error::InvalidFamily(format!(
                "radius must lie in 1..={MAX_RADIUS}, got {radius}"
            )));
        }
        let expected = 1usize << (2 * radius + 2);
        if rates.len() != expected {
            return Err(Error::InvalidFamily(format!(
                "expected {expected} table entries, got {}",
                rates.len()
            )));
        }
        if let Some(v) = rates.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidFamily(format!("non-finite rate {v}")));
        }
        Ok(Self { radius, rates })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Number of sites in the local window, `2R + 2`.
    pub fn width(&self) -> usize {
        2 * self.radius + 2
    }

    pub fn table(&self) -> &[f64] {
        &self.rates
    }

    pub fn c_max(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    #[inline]
    pub fn rate_of_pattern(&self, pattern: usize) -> f64 {
        self.rates[pattern]
    }

    /// Local window pattern seen by bond `x`; zero-padded under empty boundary.
    pub fn pattern(&self, config: &Configuration, x: Site) -> usize {
        match config.boundary() {
            Boundary::Empty => {
                let off = x - config.start();
                let w = self.width();
                let ext = (config.bits() as u128) << self.radius;
                if off < 0 {
                    let sh = (-off) as u32;
                    if sh >= 128 {
                        0
                    } else {
                        ((ext << sh) & ((1u128 << w) - 1)) as usize
                    }
                } else if off >= 128 {
                    0
                } else {
                    ((ext >> off) & ((1u128 << w) - 1)) as usize
                }
            }
            Boundary::Periodic => {
                let base = x - self.radius as Site;
                (0..self.width()).fold(0usize, |acc, i| {
                    acc | ((config.occupation(base + i as Site) as usize) << i)
                })
            }
        }
    }

    /// `c_x(η)`, reading zeros outside the window under empty boundary.
    pub fn rate(&self, config: &Configuration, x: Site) -> f64 {
        self.rates[self.pattern(config, x)]
    }

    /// Like [`rate`](Self::rate) but refuses to read outside an empty-boundary window.
    pub fn rate_strict(&self, config: &Configuration, x: Site) -> Result<f64> {
        if config.boundary() == Boundary::Empty {
            let lo = x - self.radius as Site;
            let hi = x + self.radius as Site + 1;
            if !config.contains(lo) || !config.contains(hi) {
                return Err(Error::Unresolvable {
                    bond: x,
                    reason: format!(
                        "neighbourhood [{lo}, {hi}] leaves the window [{}, {}]",
                        config.first(),
                        config.last()
                    ),
                });
            }
        }
        Ok(self.rate(config, x))
    }

    /// Rate of the exchange at `x` counted only when it changes the
    /// configuration (the two sites differ).
    pub fn jump_rate(&self, config: &Configuration, x: Site) -> f64 {
        match config.bond_indices(x) {
            Ok((i, j)) if ((config.bits() >> i) ^ (config.bits() >> j)) & 1 == 1 => {
                self.rate(config, x)
            }
            _ => 0.0,
        }
    }

    /// Whether `x ↦ η^{x,x+1}` is an allowed jump inside the window.
    pub fn is_allowed(&self, config: &Configuration, x: Site) -> bool {
        config.bond_indices(x).is_ok() && self.rate(config, x) > 0.0
    }

    /// SHA-256 of the radius and rate table, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.radius as u64).to_le_bytes());
        for r in &self.rates {
            h.update(r.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FamilyDoc = serde_json::from_str(text)?;
        let width = 2 * doc.radius + 2;
        if doc.radius == 0 || doc.radius > MAX_RADIUS {
            return Err(Error::InvalidFamily(format!(
                "radius must lie in 1..={MAX_RADIUS}, got {}",
                doc.radius
            )));
        }
        let mut rates: Vec<Option<f64>> = vec![None; 1 << width];
        for entry in doc.rates {
            if entry.window.len() != width {
                return Err(Error::InvalidFamily(format!(
                    "window {:?} should have {width} sites",
                    entry.window
                )));
            }
            let mut p = 0usize;
            for (i, ch) in entry.window.chars().enumerate() {
                match ch {
                    '0' => {}
                    '1' => p |= 1 << i,
                    _ => {
                        return Err(Error::InvalidFamily(format!(
                            "window {:?} is not binary",
                            entry.window
                        )))
                    }
                }
            }
            if rates[p].replace(entry.value).is_some() {
                return Err(Error::InvalidFamily(format!(
                    "window {:?} listed twice",
                    entry.window
                )));
            }
        }
        let rates = rates
            .into_iter()
            .enumerate()
            .map(|(p, r)| {
                r.ok_or_else(|| {
                    Error::InvalidFamily(format!(
                        "window {} missing from the table",
                        pattern_string(p, width)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_table(doc.radius, rates)
    }

    pub fn to_json(&self) -> String {
        let doc = FamilyDoc {
            radius: self.radius,
            rates: self
                .rates
                .iter()
                .enumerate()
                .map(|(p, &value)| RateEntry {
                    window: pattern_string(p, self.width()),
                    value,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("family serializes")
    }
}

impl Default for ConstraintFamily {
    fn default() -> Self {
        Self::pmm()
    }
}

impl FromStr for ConstraintFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_json(s)
    }
}

pub(crate) fn pattern_string(p: usize, width: usize) -> String {
    (0..width)
        .map(|i| if (p >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Outcome of checking a family against the four structural requirements
/// (translation invariance, locality, swap symmetry, positivity exactly when
/// `η(-1) + η(2) > 0`), plus non-negativity of the table.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub radius: usize,
    pub windows_checked: usize,
    pub translation_invariant: bool,
    pub local: bool,
    pub non_negative: bool,
    pub swap_symmetric: bool,
    pub positivity: bool,
    /// Offending windows, left to right over `[-R, R+1]`.
    pub failures: Vec<String>,
}

impl FamilyReport {
    pub fn accepted(&self) -> bool {
        self.translation_invariant
            && self.local
            && self.non_negative
            && self.swap_symmetric
            && self.positivity
    }
}

/// Exhaustively checks every local window of `family`.
pub fn validate_family(family: &ConstraintFamily) -> FamilyReport {
    let r = family.radius();
    let width = family.width();
    let mut report = FamilyReport {
        radius: r,
        windows_checked: 1 << width,
        // Both hold by construction: rates are a function of the local window only.
        translation_invariant: true,
        local: true,
        non_negative: true,
        swap_symmetric: true,
        positivity: true,
        failures: Vec::new(),
    };
    for p in 0..1usize << width {
        let c = family.rate_of_pattern(p);
        let w = pattern_string(p, width);
        if c < 0.0 {
            report.non_negative = false;
            report.failures.push(format!("negative rate {c} at {w}"));
        }
        let swapped = swap_bits(p as u64, r, r + 1) as usize;
        if family.rate_of_pattern(swapped) != c {
            report.swap_symmetric = false;
            report
                .failures
                .push(format!("swap asymmetry at {w}: {c} vs {}", family.rate_of_pattern(swapped)));
        }
        let facilitated = (p >> (r - 1)) & 1 == 1 || (p >> (r + 2)) & 1 == 1;
        if (c > 0.0) != facilitated {
            report.positivity = false;
            report.failures.push(format!(
                "rate {c} at {w} but facilitation is {}",
                if facilitated { "present" } else { "absent" }
            ));
        }
    }
    report
}
