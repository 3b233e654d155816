//! Frozen and active structure of configurations, and membership of infinite
//! eventually-periodic configurations in the invariant sets `F`, `F'_k`,
//! `F''_k`, `E'` and `E`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Boundary, Configuration, ConstraintFamily, Site};

/// Whether the particle at `x` has another particle within distance 2.
pub fn is_active(config: &Configuration, x: Site) -> Result<bool> {
    if !config.get(x) {
        return Err(Error::Unoccupied(x));
    }
    let home = config.local_index(x);
    Ok([-2, -1, 1, 2].iter().any(|&d| {
        let y = x + d;
        // on small rings a neighbour may wrap back onto x itself
        config.local_index(y) != home && config.get(y)
    }))
}

/// No occupied site has another particle within distance 2 (ring metric
/// under periodic boundary).
pub fn is_frozen(config: &Configuration) -> bool {
    let parts: Vec<Site> = config.particles().collect();
    parts
        .iter()
        .all(|&x| !is_active(config, x).expect("particle sites are occupied"))
}

/// Membership in `G_Λ` for the subwindow `[lo, hi]`: two occupied sites of
/// the subwindow at distance 1 or 2.
pub fn has_mobile_cluster(config: &Configuration, lo: Site, hi: Site) -> Result<bool> {
    if lo > hi {
        return Err(Error::Precondition(format!("empty subwindow [{lo}, {hi}]")));
    }
    if config.boundary() == Boundary::Empty && (!config.contains(lo) || !config.contains(hi)) {
        return Err(Error::Precondition(format!(
            "subwindow [{lo}, {hi}] is not inside [{}, {}]",
            config.first(),
            config.last()
        )));
    }
    Ok((lo..=hi).any(|x| {
        config.get(x) && ((x < hi && config.get(x + 1)) || (x + 2 <= hi && config.get(x + 2)))
    }))
}

/// [`has_mobile_cluster`] on the whole window.
pub fn in_good_set(config: &Configuration) -> bool {
    has_mobile_cluster(config, config.first(), config.last()).expect("whole window")
}

/// An element of `{0,1}^ℤ` written as `left^∞ · core · right^∞`, the core
/// occupying `[offset, offset + core.len() - 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EventuallyPeriodicConfig {
    left: Vec<u8>,
    core: Vec<u8>,
    right: Vec<u8>,
    offset: Site,
}

fn check_word(name: &str, w: &[u8]) -> Result<()> {
    if w.iter().any(|&b| b > 1) {
        return Err(Error::NotCanonical(format!("{name} word is not binary")));
    }
    Ok(())
}

fn is_primitive_root(w: &[u8], p: usize) -> bool {
    w.len().is_multiple_of(p) && w.chunks(p).all(|c| c == &w[..p])
}

/// Occupation word repeated forever: does it contain a mobile cluster?
fn periodic_word_frozen(w: &[u8]) -> bool {
    let l = w.len();
    (0..l).all(|i| w[i] == 0 || (w[(i + 1) % l] == 0 && w[(i + 2) % l] == 0))
}

impl EventuallyPeriodicConfig {
    pub fn new(left: Vec<u8>, core: Vec<u8>, right: Vec<u8>, offset: Site) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(Error::NotCanonical("tail words must be non-empty".into()));
        }
        check_word("left", &left)?;
        check_word("right", &right)?;
        check_word("core", &core)?;
        Ok(Self { left, core, right, offset })
    }

    pub fn left(&self) -> &[u8] {
        &self.left
    }

    pub fn core(&self) -> &[u8] {
        &self.core
    }

    pub fn right(&self) -> &[u8] {
        &self.right
    }

    pub fn offset(&self) -> Site {
        self.offset
    }

    /// Last site of the core (`offset - 1` when the core is empty).
    pub fn core_end(&self) -> Site {
        self.offset + self.core.len() as Site - 1
    }

    pub fn get(&self, site: Site) -> bool {
        let rel = site - self.offset;
        let c = self.core.len() as Site;
        let v = if rel < 0 {
            self.left[rel.rem_euclid(self.left.len() as Site) as usize]
        } else if rel < c {
            self.core[rel as usize]
        } else {
            self.right[(rel - c).rem_euclid(self.right.len() as Site) as usize]
        };
        v == 1
    }

    /// Moves `periods` copies of each tail word into the core.
    pub fn unroll(&self, periods: usize) -> Self {
        let mut core = self.left.repeat(periods);
        core.extend_from_slice(&self.core);
        core.extend(self.right.repeat(periods));
        Self {
            left: self.left.clone(),
            right: self.right.clone(),
            offset: self.offset - (periods * self.left.len()) as Site,
            core,
        }
    }

    /// Equivalent encoding with primitive tail words and the shortest core.
    pub fn minimal(&self) -> Self {
        let root = |w: &[u8]| -> Vec<u8> {
            let p = (1..=w.len()).find(|&p| is_primitive_root(w, p)).unwrap();
            w[..p].to_vec()
        };
        let mut left = root(&self.left);
        let mut right = root(&self.right);
        let mut core = self.core.clone();
        let mut offset = self.offset;
        while let Some(&last) = core.last() {
            if last != *right.last().unwrap() {
                break;
            }
            core.pop();
            right.rotate_right(1);
        }
        while let Some(&first) = core.first() {
            if first != left[0] {
                break;
            }
            core.remove(0);
            offset += 1;
            left.rotate_left(1);
        }
        Self { left, core, right, offset }
    }

    /// Exchanges sites `x` and `x + 1`, both of which must lie in the core.
    pub fn swap(&self, x: Site) -> Result<Self> {
        let lo = x - self.offset;
        if lo < 0 || lo + 1 >= self.core.len() as Site {
            return Err(Error::SiteOutOfWindow {
                site: if lo < 0 { x } else { x + 1 },
                first: self.offset,
                last: self.core_end(),
            });
        }
        let mut next = self.clone();
        next.core.swap(lo as usize, lo as usize + 1);
        Ok(next)
    }

    /// `c_x(η)` read from the infinite configuration.
    pub fn rate(&self, family: &ConstraintFamily, x: Site) -> f64 {
        let r = family.radius() as Site;
        let p = (0..family.width()).fold(0usize, |acc, i| {
            acc | ((self.get(x - r + i as Site) as usize) << i)
        });
        family.rate_of_pattern(p)
    }

    /// Finite stretch covering the core and enough tail periods that every
    /// distance-2 neighbourhood pattern of the configuration appears in it.
    fn unrolled_segment(&self) -> Vec<u8> {
        let reps = |l: usize| 3 + 3 / l;
        let mut seg = self.left.repeat(reps(self.left.len()));
        seg.extend_from_slice(&self.core);
        seg.extend(self.right.repeat(reps(self.right.len())));
        seg
    }

    pub fn is_frozen(&self) -> bool {
        let seg = self.unrolled_segment();
        (0..seg.len().saturating_sub(2))
            .all(|i| seg[i] == 0 || (seg[i + 1] == 0 && seg[i + 2] == 0))
    }

    /// Total particle count, `None` if infinite.
    pub fn particle_count(&self) -> Option<usize> {
        (self.left.iter().all(|&b| b == 0) && self.right.iter().all(|&b| b == 0))
            .then(|| self.core.iter().filter(|&&b| b == 1).count())
    }

    /// Total hole count, `None` if infinite.
    pub fn hole_count(&self) -> Option<usize> {
        (self.left.iter().all(|&b| b == 1) && self.right.iter().all(|&b| b == 1))
            .then(|| self.core.iter().filter(|&&b| b == 0).count())
    }

    /// `Σ_x η(x)η(x+1) + η(x)η(x+2)`, `None` if infinite.
    pub fn pair_count(&self) -> Option<usize> {
        if !periodic_word_frozen(&self.left) || !periodic_word_frozen(&self.right) {
            return None;
        }
        // tails are frozen, so every pair touches the core or its two
        // neighbouring sites on each side
        let lo = self.offset - 2;
        let hi = self.core_end() + 2;
        Some(
            (lo..=hi)
                .filter(|&x| self.get(x))
                .map(|x| self.get(x + 1) as usize + self.get(x + 2) as usize)
                .sum(),
        )
    }
}

impl fmt::Display for EventuallyPeriodicConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = |v: &[u8]| v.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect::<String>();
        if self.core.is_empty() {
            write!(f, "({})* ({})*", w(&self.left), w(&self.right))
        } else {
            write!(f, "({})* {} ({})*", w(&self.left), w(&self.core), w(&self.right))
        }
    }
}

impl FromStr for EventuallyPeriodicConfig {
    type Err = Error;

    /// Parses `"(100)* 11 (100)*"`; the core sits at site 0.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::NotCanonical(format!("{why} in {s:?}"));
        let bits = |w: &str| -> Result<Vec<u8>> {
            w.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(bad("non-binary character")),
                })
                .collect()
        };
        let s = s.trim();
        let rest = s.strip_prefix('(').ok_or_else(|| bad("missing left tail"))?;
        let (left, rest) = rest.split_once(")*").ok_or_else(|| bad("unterminated left tail"))?;
        let open = rest.rfind('(').ok_or_else(|| bad("missing right tail"))?;
        let core = &rest[..open];
        let right = rest[open + 1..]
            .trim_end()
            .strip_suffix(")*")
            .ok_or_else(|| bad("unterminated right tail"))?;
        Self::new(bits(left)?, bits(core)?, bits(right)?, 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "label", content = "k")]
pub enum ClassLabel {
    /// Frozen.
    F,
    /// Not frozen, finitely many (`k ≥ 2`) particles.
    Fprime(usize),
    /// Not frozen, finitely many (`k`) holes.
    Fdoubleprime(usize),
    /// Finitely many, but some, close pairs; not in the earlier sets.
    Eprime,
    /// Everything else.
    E,
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::F => f.write_str("F"),
            ClassLabel::Fprime(k) => write!(f, "F'_{k}"),
            ClassLabel::Fdoubleprime(k) => write!(f, "F''_{k}"),
            ClassLabel::Eprime => f.write_str("E'"),
            ClassLabel::E => f.write_str("E"),
        }
    }
}

/// Assigns the unique invariant set, testing the definitions in the order
/// F, F', F'', E', E.
pub fn classify_infinite(config: &EventuallyPeriodicConfig) -> ClassLabel {
    if config.is_frozen() {
        return ClassLabel::F;
    }
    if let Some(k) = config.particle_count() {
        debug_assert!(k >= 2, "a non-frozen configuration has a mobile cluster");
        return ClassLabel::Fprime(k);
    }
    if let Some(k) = config.hole_count() {
        return ClassLabel::Fdoubleprime(k);
    }
    match config.pair_count() {
        Some(n) if n > 0 => ClassLabel::Eprime,
        _ => ClassLabel::E,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(s: &str) -> Configuration {
        Configuration::parse(s, 1, Boundary::Empty).unwrap()
    }

    fn ep(s: &str) -> EventuallyPeriodicConfig {
        s.parse().unwrap()
    }

    #[test]
    fn activity_examples() {
        assert!(!is_active(&cfg("1001000"), 1).unwrap());
        assert!(is_active(&cfg("1100000"), 1).unwrap());
        assert!(is_active(&cfg("1010000"), 3).unwrap());
        assert!(matches!(is_active(&cfg("1010000"), 2), Err(Error::Unoccupied(2))));
    }

    #[test]
    fn frozen_examples() {
        assert!(is_frozen(&cfg("100100100")));
        assert!(is_frozen(&cfg("000000000")));
        assert!(!is_frozen(&cfg("000110000")));
        // ring metric: 1 and 5 are at distance 1 around a ring of five
        let ring = Configuration::parse("10001", 1, Boundary::Periodic).unwrap();
        assert!(!is_frozen(&ring));
        let ring = Configuration::parse("100100", 1, Boundary::Periodic).unwrap();
        assert!(is_frozen(&ring));
        let lone = Configuration::parse("100", 1, Boundary::Periodic).unwrap();
        assert!(is_frozen(&lone));
    }

    #[test]
    fn good_set_examples() {
        assert!(in_good_set(&cfg("10100")));
        assert!(!in_good_set(&cfg("10010")));
        assert!(!in_good_set(&cfg("00000")));
        let c = cfg("1101000");
        assert!(!has_mobile_cluster(&c, 4, 7).unwrap());
        assert!(has_mobile_cluster(&c, 2, 4).unwrap());
        assert!(has_mobile_cluster(&c, 0, 4).is_err());
    }

    #[test]
    fn infinite_examples() {
        assert_eq!(classify_infinite(&ep("(0)* 100100 (0)*")), ClassLabel::F);
        assert_eq!(classify_infinite(&ep("(0)* 11 (0)*")), ClassLabel::Fprime(2));
        assert_eq!(classify_infinite(&ep("(100)* 11 (100)*")), ClassLabel::Eprime);
        assert_eq!(classify_infinite(&ep("(1)* 0 (1)*")), ClassLabel::Fdoubleprime(1));
        assert_eq!(classify_infinite(&ep("(110)* 110 (110)*")), ClassLabel::E);
        // a lone particle is frozen, never F'_1
        assert_eq!(classify_infinite(&ep("(0)* 1 (0)*")), ClassLabel::F);
        assert_eq!(classify_infinite(&ep("(1)* (1)*")), ClassLabel::Fdoubleprime(0));
        // frozen tails meeting at a close pair across the junction
        assert_eq!(classify_infinite(&ep("(001)* (100)*")), ClassLabel::Eprime);
        assert_eq!(classify_infinite(&ep("(0)* (1)*")), ClassLabel::E);
    }

    #[test]
    fn parse_errors() {
        assert!("()* 1 (0)*".parse::<EventuallyPeriodicConfig>().is_err());
        assert!("(0)* 12 (0)*".parse::<EventuallyPeriodicConfig>().is_err());
        assert!("0 1 0".parse::<EventuallyPeriodicConfig>().is_err());
        assert!("(0)* 1 (0)".parse::<EventuallyPeriodicConfig>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["(100)* 11 (100)*", "(1)* (0)*", "(01)* 0010 (1)*"] {
            assert_eq!(ep(s).to_string(), s);
        }
    }

    #[test]
    fn minimal_form_preserves_the_configuration() {
        let c = ep("(100100)* 100110100 (100)*");
        let m = c.minimal();
        assert_eq!((m.left().len(), m.right().len()), (3, 3));
        for x in -40..40 {
            assert_eq!(c.get(x), m.get(x), "site {x}");
        }
        assert!(m.core().len() <= 3);
    }

    #[test]
    fn frozen_configs_have_no_moving_rate() {
        // exhaustive up to length 14 under empty boundary
        let pmm = ConstraintFamily::pmm();
        for n in 1..=14usize {
            for bits in 0..1u64 << n {
                let c = Configuration::from_bits(0, n, bits, Boundary::Empty).unwrap();
                if is_frozen(&c) {
                    assert!(c.bonds().all(|x| pmm.jump_rate(&c, x) == 0.0), "{c}");
                }
            }
        }
    }

    #[test]
    fn good_set_is_closed_under_allowed_jumps() {
        let pmm = ConstraintFamily::pmm();
        for n in 2..=12usize {
            for bits in 0..1u64 << n {
                let c = Configuration::from_bits(0, n, bits, Boundary::Empty).unwrap();
                let g = in_good_set(&c);
                for x in c.bonds().filter(|&x| pmm.is_allowed(&c, x)) {
                    assert_eq!(in_good_set(&c.swap(x).unwrap()), g, "{c} bond {x}");
                }
            }
        }
    }

    fn word(max: usize) -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(0u8..=1, 1..=max)
    }

    proptest! {
        #[test]
        fn labels_invariant_under_core_jumps(
            left in word(4),
            core in prop::collection::vec(0u8..=1, 0..10),
            right in word(4),
        ) {
            let pmm = ConstraintFamily::pmm();
            let c = EventuallyPeriodicConfig::new(left, core, right, 0).unwrap();
            let label = classify_infinite(&c);
            let wide = c.unroll(1);
            prop_assert_eq!(classify_infinite(&wide), label);
            for x in wide.offset()..wide.core_end() {
                if wide.rate(&pmm, x) > 0.0 {
                    let next = wide.swap(x).unwrap();
                    prop_assert_eq!(classify_infinite(&next), label, "{} -> {}", wide, next);
                }
            }
        }

        #[test]
        fn minimal_form_has_same_label(
            left in word(4),
            core in prop::collection::vec(0u8..=1, 0..8),
            right in word(4),
        ) {
            let c = EventuallyPeriodicConfig::new(left, core, right, 0).unwrap();
            let m = c.minimal();
            for x in -30..30 {
                prop_assert_eq!(c.get(x), m.get(x));
            }
            prop_assert_eq!(classify_infinite(&m), classify_infinite(&c));
        }
    }
}
