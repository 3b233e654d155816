//! Reachability under allowed jumps inside a window.
//!
//! Two independent routes are provided: a breadth-first search over packed
//! bit patterns (the oracle) and a constructive planner that transports
//! particles with a mobile cluster. Planned paths are trusted only after
//! replay through [`validate_path`].

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::classify::{in_good_set, is_frozen};
use crate::error::{Error, Result};
use crate::lattice::{swap_bits, Boundary, Configuration, ConstraintFamily, Site};

/// Default cap on the window length for exhaustive enumeration (2^24 states).
pub const DEFAULT_BUDGET: usize = 24;

/// A start configuration and a sequence of bonds `x` (exchanges of `{x, x+1}`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JumpPath {
    pub start: Configuration,
    pub moves: Vec<Site>,
}

impl JumpPath {
    pub fn new(start: Configuration) -> Self {
        Self { start, moves: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Configuration after applying every move.
    pub fn end(&self) -> Result<Configuration> {
        self.moves.iter().try_fold(self.start, |c, &x| c.swap(x))
    }

    /// The same jumps played backwards, starting from [`end`](Self::end).
    pub fn reversed(&self) -> Result<Self> {
        Ok(Self {
            start: self.end()?,
            moves: self.moves.iter().rev().copied().collect(),
        })
    }

    /// Bonds as space-separated integers.
    pub fn format_moves(&self) -> String {
        self.moves
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn check_budget(len: usize, budget: usize) -> Result<()> {
    if len > budget {
        return Err(Error::BudgetExceeded {
            states: 1u128 << len,
            budget: 1u128 << budget,
        });
    }
    Ok(())
}

/// Configurations one allowed, configuration-changing jump away from `c`.
pub fn neighbours<'a>(
    family: &'a ConstraintFamily,
    c: &'a Configuration,
) -> impl Iterator<Item = Configuration> + 'a {
    c.bonds()
        .filter(move |&x| family.jump_rate(c, x) > 0.0)
        .map(move |x| c.swap(x).expect("bond inside window"))
}

/// Closure of `config` under allowed jumps inside its window, sorted by
/// bit pattern.
pub fn reachable_set(
    family: &ConstraintFamily,
    config: &Configuration,
    budget: usize,
) -> Result<Vec<Configuration>> {
    check_budget(config.len(), budget)?;
    let mut seen = HashSet::from([config.bits()]);
    let mut queue = VecDeque::from([*config]);
    while let Some(c) = queue.pop_front() {
        for next in neighbours(family, &c) {
            if seen.insert(next.bits()) {
                queue.push_back(next);
            }
        }
    }
    let mut out: Vec<Configuration> = seen.into_iter().map(|b| config.with_bits(b)).collect();
    out.sort_by_key(|c| c.bits());
    Ok(out)
}

/// Whether `b` can be reached from `a` by allowed jumps inside their window.
pub fn connected(
    family: &ConstraintFamily,
    a: &Configuration,
    b: &Configuration,
    budget: usize,
) -> Result<bool> {
    if a.start() != b.start() || a.len() != b.len() || a.boundary() != b.boundary() {
        return Err(Error::Precondition("configurations live on different windows".into()));
    }
    if a.count() != b.count() {
        return Ok(false);
    }
    check_budget(a.len(), budget)?;
    let mut seen = HashSet::from([a.bits()]);
    let mut queue = VecDeque::from([*a]);
    while let Some(c) = queue.pop_front() {
        if c.bits() == b.bits() {
            return Ok(true);
        }
        for next in neighbours(family, &c) {
            if seen.insert(next.bits()) {
                queue.push_back(next);
            }
        }
    }
    Ok(false)
}

/// A path of fewest jumps from `a` to `b`, or `None` when they are not
/// connected.
pub fn shortest_path(
    family: &ConstraintFamily,
    a: &Configuration,
    b: &Configuration,
    budget: usize,
) -> Result<Option<JumpPath>> {
    if a.start() != b.start() || a.len() != b.len() || a.boundary() != b.boundary() {
        return Err(Error::Precondition("configurations live on different windows".into()));
    }
    if a.count() != b.count() {
        return Ok(None);
    }
    check_budget(a.len(), budget)?;
    // parent bits and the bond used to leave it
    let mut parent: HashMap<u64, (u64, Site)> = HashMap::new();
    let mut queue = VecDeque::from([*a]);
    let mut found = a.bits() == b.bits();
    while let Some(c) = queue.pop_front() {
        if found {
            break;
        }
        for x in c.bonds().filter(|&x| family.jump_rate(&c, x) > 0.0) {
            let next = c.swap(x)?;
            if next.bits() != a.bits() && !parent.contains_key(&next.bits()) {
                parent.insert(next.bits(), (c.bits(), x));
                if next.bits() == b.bits() {
                    found = true;
                    break;
                }
                queue.push_back(next);
            }
        }
    }
    if !found {
        return Ok(None);
    }
    let mut moves = Vec::new();
    let mut cur = b.bits();
    while cur != a.bits() {
        let (prev, x) = parent[&cur];
        moves.push(x);
        cur = prev;
    }
    moves.reverse();
    Ok(Some(JumpPath { start: *a, moves }))
}

/// Replays `path`, requiring a positive zero-padded rate at every move.
pub fn validate_path(family: &ConstraintFamily, path: &JumpPath) -> bool {
    let mut c = path.start;
    for &x in &path.moves {
        if !family.is_allowed(&c, x) {
            return false;
        }
        c = c.swap(x).expect("allowed bonds are inside the window");
    }
    true
}

/// Bit-level planner state: a window of `n` sites and the moves emitted so far.
struct Planner {
    bits: u64,
    n: usize,
    moves: Vec<usize>,
}

impl Planner {
    fn occ(&self, i: usize) -> bool {
        i < self.n && (self.bits >> i) & 1 == 1
    }

    fn push(&mut self, bond: usize) {
        debug_assert!(
            (bond >= 1 && self.occ(bond - 1)) || self.occ(bond + 2),
            "bond {bond} is not facilitated in {:b}",
            self.bits
        );
        self.bits = swap_bits(self.bits, bond, bond + 1);
        self.moves.push(bond);
    }

    /// Shifts the contiguous block `[l, r]` (at least two particles) one
    /// site left into the empty site `l - 1`: the hole enters at the left
    /// end and is passed through the block.
    fn block_step_left(&mut self, l: usize, r: usize) {
        for bond in l - 1..r {
            self.push(bond);
        }
    }

    /// Mirror image of [`block_step_left`](Self::block_step_left).
    fn block_step_right(&mut self, l: usize, r: usize) {
        for bond in (l..=r).rev() {
            self.push(bond);
        }
    }

    /// Moves every particle into the right end of the window, assuming a
    /// mobile cluster is present.
    fn mass_right(&mut self) {
        let n = self.n;
        // leftmost mobile cluster; every particle left of it is isolated
        let i = (0..n)
            .find(|&i| self.occ(i) && (self.occ(i + 1) || self.occ(i + 2)))
            .expect("a mobile cluster is present");
        let mut l = i;
        if !self.occ(i + 1) {
            // 1 0 1 -> 0 1 1, facilitated by the particle at i + 2
            self.push(i);
            l = i + 1;
        }
        let mut r = l;
        while self.occ(r + 1) {
            r += 1;
        }
        // sweep left, picking up the isolated particles
        while l > 0 {
            if self.occ(l - 1) {
                l -= 1;
            } else {
                self.block_step_left(l, r);
                l -= 1;
                r -= 1;
            }
        }
        // sweep right, picking up everything else
        while r + 1 < n {
            if self.occ(r + 1) {
                r += 1;
            } else {
                self.block_step_right(l, r);
                l += 1;
                r += 1;
            }
        }
        debug_assert_eq!(l, n - self.bits.count_ones() as usize);
    }
}

fn right_massed_moves(c: &Configuration) -> Vec<Site> {
    let mut p = Planner { bits: c.bits(), n: c.len(), moves: Vec::new() };
    p.mass_right();
    p.moves.into_iter().map(|b| c.start() + b as Site).collect()
}

/// Constructs a path of allowed jumps from `from` to `to`: both are brought
/// to the configuration with all particles massed at the right end of the
/// window, and the second half is played in reverse. Both configurations
/// must contain a mobile cluster and have the same particle count.
pub fn plan_transport(from: &Configuration, to: &Configuration) -> Result<JumpPath> {
    if from.start() != to.start() || from.len() != to.len() {
        return Err(Error::Precondition("configurations live on different windows".into()));
    }
    if from.boundary() != Boundary::Empty || to.boundary() != Boundary::Empty {
        return Err(Error::Precondition("transport is planned under empty boundary".into()));
    }
    if from.count() != to.count() {
        return Err(Error::Precondition(format!(
            "particle counts differ ({} vs {})",
            from.count(),
            to.count()
        )));
    }
    for c in [from, to] {
        if !in_good_set(c) {
            return Err(Error::Precondition(format!("{c} has no mobile cluster")));
        }
    }
    let mut path = JumpPath::new(*from);
    if from == to {
        return Ok(path);
    }
    path.moves = right_massed_moves(from);
    let back = right_massed_moves(to);
    path.moves.extend(back.into_iter().rev());
    Ok(path)
}

/// Communicating-class labels of every configuration of a window, found by
/// breadth-first search. `labels[bits]` is the class of that pattern.
#[derive(Clone, Debug)]
pub struct Components {
    pub len: usize,
    pub labels: Vec<u32>,
    pub classes: usize,
}

pub fn components(
    family: &ConstraintFamily,
    len: usize,
    boundary: Boundary,
    budget: usize,
) -> Result<Components> {
    check_budget(len, budget)?;
    let template = Configuration::empty(0, len, boundary)?;
    let size = 1usize << len;
    let mut labels = vec![u32::MAX; size];
    let mut classes = 0u32;
    let mut queue = VecDeque::new();
    for s in 0..size {
        if labels[s] != u32::MAX {
            continue;
        }
        labels[s] = classes;
        queue.push_back(s as u64);
        while let Some(b) = queue.pop_front() {
            let c = template.with_bits(b);
            for next in neighbours(family, &c) {
                let nb = next.bits() as usize;
                if labels[nb] == u32::MAX {
                    labels[nb] = classes;
                    queue.push_back(nb as u64);
                }
            }
        }
        classes += 1;
    }
    Ok(Components { len, labels, classes: classes as usize })
}

/// Pass/fail record of an exhaustive connectivity suite.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub suite: String,
    pub window: usize,
    /// Configurations that entered the check.
    pub configurations: u64,
    /// Pairs of equal-count configurations covered.
    pub pairs: u64,
    pub counterexamples: u64,
    /// A few offending configurations, if any.
    pub examples: Vec<String>,
    pub passed: bool,
}

/// Checks that all members of each group lie in one class.
fn certify_groups(
    suite: &str,
    comps: &Components,
    members: impl Iterator<Item = (usize, u64)>,
) -> Certificate {
    let mut first_label: Vec<Option<u32>> = vec![None; comps.len + 1];
    let mut sizes = vec![0u64; comps.len + 1];
    let mut bad = 0u64;
    let mut examples = Vec::new();
    for (group, bits) in members {
        sizes[group] += 1;
        let label = comps.labels[bits as usize];
        match first_label[group] {
            None => first_label[group] = Some(label),
            Some(l) if l != label => {
                bad += 1;
                if examples.len() < 8 {
                    examples.push(crate::lattice::pattern_string(bits as usize, comps.len));
                }
            }
            _ => {}
        }
    }
    Certificate {
        suite: suite.to_string(),
        window: comps.len,
        configurations: sizes.iter().sum(),
        pairs: sizes.iter().map(|s| s * s.saturating_sub(1) / 2).sum(),
        counterexamples: bad,
        examples,
        passed: bad == 0,
    }
}

/// Every pair of configurations with a mobile cluster and equal particle
/// count on a window of `n` sites is connected inside the window.
pub fn certify_good_set(family: &ConstraintFamily, n: usize) -> Result<Certificate> {
    let comps = components(family, n, Boundary::Empty, DEFAULT_BUDGET)?;
    let template = Configuration::empty(0, n, Boundary::Empty)?;
    let members = (0..1u64 << n)
        .filter(|&b| in_good_set(&template.with_bits(b)))
        .map(|b| (b.count_ones() as usize, b));
    Ok(certify_groups("good-set connectivity", &comps, members))
}

/// Non-frozen configurations with all particles inside `Λ_n = [-n, n]` and
/// equal particle count are connected inside `Λ_n`.
pub fn certify_finite_particles(family: &ConstraintFamily, n: usize) -> Result<Certificate> {
    let len = 2 * n + 1;
    let comps = components(family, len, Boundary::Empty, DEFAULT_BUDGET)?;
    let template = Configuration::empty(-(n as Site), len, Boundary::Empty)?;
    let members = (0..1u64 << len)
        .filter(|&b| !is_frozen(&template.with_bits(b)))
        .map(|b| (b.count_ones() as usize, b));
    Ok(certify_groups("finite-particle connectivity", &comps, members))
}

/// Configurations whose holes all lie in `Λ_{n-2}` and with equal hole
/// count are connected inside `Λ_n` (zero padding outside). Requires `n ≥ 2`.
pub fn certify_finite_holes(family: &ConstraintFamily, n: usize) -> Result<Certificate> {
    if n < 2 {
        return Err(Error::Precondition("the hole suite needs n >= 2".into()));
    }
    let len = 2 * n + 1;
    let comps = components(family, len, Boundary::Empty, DEFAULT_BUDGET)?;
    let edges: u64 = 0b11 | (0b11 << (len - 2));
    let members = (0..1u64 << len)
        .filter(|&b| b & edges == edges)
        .map(|b| (len - b.count_ones() as usize, b));
    Ok(certify_groups("finite-hole connectivity", &comps, members))
}

/// Plans and replays a path for every ordered pair of equal-count
/// configurations with a mobile cluster on `n` sites.
pub fn certify_planner(family: &ConstraintFamily, n: usize) -> Result<Certificate> {
    check_budget(n, 16)?;
    let template = Configuration::empty(0, n, Boundary::Empty)?;
    let mut by_count: Vec<Vec<Configuration>> = vec![Vec::new(); n + 1];
    for b in 0..1u64 << n {
        let c = template.with_bits(b);
        if in_good_set(&c) {
            by_count[c.count()].push(c);
        }
    }
    let mut cert = Certificate {
        suite: "planner replay".into(),
        window: n,
        configurations: by_count.iter().map(|v| v.len() as u64).sum(),
        pairs: 0,
        counterexamples: 0,
        examples: Vec::new(),
        passed: true,
    };
    for group in &by_count {
        for a in group {
            for b in group {
                cert.pairs += 1;
                let path = plan_transport(a, b)?;
                let ok = validate_path(family, &path) && path.end()? == *b;
                if !ok {
                    cert.counterexamples += 1;
                    if cert.examples.len() < 8 {
                        cert.examples.push(format!("{a} -> {b}"));
                    }
                }
            }
        }
    }
    cert.passed = cert.counterexamples == 0;
    Ok(cert)
}
