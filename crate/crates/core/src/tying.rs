//! Monotonicity scans, extremal-corner templates, vertex-model selection and
//! pairwise coordination checks.
//!
//! Monotonicity of each entry `a_ij` in each parameter `m_l` is verified
//! numerically: the entry is sampled along `[p_l, q_l]` on several
//! cross-sections (the other parameters held fixed) and classified by the
//! signs of consecutive differences.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::{self, CanonicalForm};
use crate::error::{Error, Result};
use crate::model::{Corner, Level, LinearSystem, ParameterVector, ParameterizedSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Increasing,
    Decreasing,
    Constant,
    NonMonotone,
}

/// One grid step along parameter `l` on a fixed cross-section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessStep {
    pub base: ParameterVector,
    pub from: f64,
    pub to: f64,
}

/// A rising and a falling step of the same entry, proving non-monotonicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub rising: WitnessStep,
    pub falling: WitnessStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Samples per parameter axis.
    pub grid: usize,
    /// Random cross-sections in addition to the all-LOW and all-HIGH ones.
    pub cross_sections: usize,
    /// Relative deadband on consecutive differences.
    pub tol: f64,
    pub seed: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            grid: 9,
            cross_sections: 8,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    k: usize,
    n: usize,
    directions: Vec<Direction>,
    witnesses: BTreeMap<(usize, usize, usize), Witness>,
    pub options: ScanOptions,
    /// Largest counter-direction difference absorbed by the deadband.
    pub slack: f64,
}

impl MonotonicityReport {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn index(&self, l: usize, i: usize, j: usize) -> usize {
        (l * self.n + i) * self.n + j
    }

    pub fn direction(&self, l: usize, i: usize, j: usize) -> Direction {
        self.directions[self.index(l, i, j)]
    }

    pub fn witness(&self, l: usize, i: usize, j: usize) -> Option<&Witness> {
        self.witnesses.get(&(l, i, j))
    }

    /// First `(l, i, j)` classified non-monotone, in `l, i, j` order.
    pub fn first_non_monotone(&self) -> Option<(usize, usize, usize)> {
        self.witnesses.keys().next().copied()
    }

    pub fn non_monotone(&self) -> impl Iterator<Item = (&(usize, usize, usize), &Witness)> {
        self.witnesses.iter()
    }

    pub fn all_monotone(&self) -> bool {
        self.witnesses.is_empty()
    }

    /// Builds a report from explicit directions (indexed `(l * n + i) * n + j`).
    pub fn from_directions(k: usize, n: usize, directions: Vec<Direction>) -> Result<Self> {
        if directions.len() != k * n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} directions for k={k}, n={n}",
                directions.len()
            )));
        }
        if directions.contains(&Direction::NonMonotone) {
            return Err(Error::InvalidArgument(
                "non-monotone directions need witnesses; use scan_monotonicity".into(),
            ));
        }
        Ok(MonotonicityReport {
            k,
            n,
            directions,
            witnesses: BTreeMap::new(),
            options: ScanOptions::default(),
            slack: 0.0,
        })
    }
}

#[derive(Default)]
struct Tally {
    rising: Option<WitnessStep>,
    falling: Option<WitnessStep>,
    absorbed_up: f64,
    absorbed_down: f64,
}

/// Classifies every `(l, i, j)` by sampling `g_{l,ij}` on `grid` points along
/// each parameter axis, over the all-LOW and all-HIGH cross-sections plus
/// `cross_sections` seeded random ones.
pub fn scan_monotonicity(ps: &ParameterizedSystem, opts: &ScanOptions) -> Result<MonotonicityReport> {
    if opts.grid < 3 {
        return Err(Error::InvalidArgument(format!("grid must be >= 3, got {}", opts.grid)));
    }
    if opts.cross_sections < 1 {
        return Err(Error::InvalidArgument("at least one random cross-section is required".into()));
    }
    let pbox = ps.parameter_box();
    let (k, n) = (ps.k(), ps.n());

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut bases = vec![
        pbox.corner_vector(&Corner::all(k, Level::Low))?,
        pbox.corner_vector(&Corner::all(k, Level::High))?,
    ];
    bases.extend((0..opts.cross_sections).map(|_| pbox.sample(&mut rng)));

    let mut tallies: Vec<Tally> = (0..k * n * n).map(|_| Tally::default()).collect();
    for l in 0..k {
        let (p, q) = (pbox.lower()[l], pbox.upper()[l]);
        let xs: Vec<f64> = (0..opts.grid)
            .map(|s| {
                if s + 1 == opts.grid {
                    q
                } else {
                    p + (q - p) * s as f64 / (opts.grid - 1) as f64
                }
            })
            .collect();
        for base in &bases {
            let samples: Vec<LinearSystem> = xs
                .iter()
                .map(|x| ps.eval(&base.with(l, *x)))
                .collect::<Result<_>>()?;
            for i in 0..n {
                for j in 0..n {
                    let values: Vec<f64> = samples.iter().map(|s| s.a()[(i, j)]).collect();
                    if values.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite(format!("a[{i}][{j}] during monotonicity scan")));
                    }
                    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let deadband = opts.tol * scale.max(f64::MIN_POSITIVE);
                    let tally = &mut tallies[(l * n + i) * n + j];
                    for s in 0..values.len() - 1 {
                        let d = values[s + 1] - values[s];
                        let step = || WitnessStep {
                            base: base.clone(),
                            from: xs[s],
                            to: xs[s + 1],
                        };
                        if d > deadband {
                            tally.rising.get_or_insert_with(step);
                        } else if d < -deadband {
                            tally.falling.get_or_insert_with(step);
                        } else if d > 0.0 {
                            tally.absorbed_up = tally.absorbed_up.max(d);
                        } else {
                            tally.absorbed_down = tally.absorbed_down.max(-d);
                        }
                    }
                }
            }
        }
    }

    let mut directions = Vec::with_capacity(k * n * n);
    let mut witnesses = BTreeMap::new();
    let mut slack = 0.0f64;
    for (idx, tally) in tallies.into_iter().enumerate() {
        let (l, i, j) = (idx / (n * n), (idx / n) % n, idx % n);
        let dir = match (tally.rising, tally.falling) {
            (Some(rising), Some(falling)) => {
                witnesses.insert((l, i, j), Witness { rising, falling });
                Direction::NonMonotone
            }
            (Some(_), None) => {
                slack = slack.max(tally.absorbed_down);
                Direction::Increasing
            }
            (None, Some(_)) => {
                slack = slack.max(tally.absorbed_up);
                Direction::Decreasing
            }
            (None, None) => Direction::Constant,
        };
        directions.push(dir);
    }
    Ok(MonotonicityReport {
        k,
        n,
        directions,
        witnesses,
        options: *opts,
        slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    Low,
    High,
    DontCare,
}

/// Partial corner assignment; `DontCare` slots match either level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Template(pub Vec<Slot>);

impl Template {
    pub fn matches(&self, corner: &Corner) -> bool {
        self.0.len() == corner.len()
            && self.0.iter().zip(corner.levels()).all(|(s, l)| match s {
                Slot::DontCare => true,
                Slot::Low => *l == Level::Low,
                Slot::High => *l == Level::High,
            })
    }

    pub fn dont_cares(&self) -> usize {
        self.0.iter().filter(|s| **s == Slot::DontCare).count()
    }

    /// Every concrete corner matching the template.
    pub fn completions(&self) -> Vec<Corner> {
        let free: Vec<usize> = (0..self.0.len()).filter(|&l| self.0[l] == Slot::DontCare).collect();
        (0..(1u64 << free.len()))
            .map(|bits| {
                let mut levels: Vec<Level> = self
                    .0
                    .iter()
                    .map(|s| if *s == Slot::High { Level::High } else { Level::Low })
                    .collect();
                for (b, &l) in free.iter().enumerate() {
                    if (bits >> (free.len() - 1 - b)) & 1 == 1 {
                        levels[l] = Level::High;
                    }
                }
                Corner::new(levels)
            })
            .collect()
    }

    /// The template with `DontCare` slots filled with `level`.
    pub fn filled(&self, level: Level) -> Corner {
        Corner::new(
            self.0
                .iter()
                .map(|s| match s {
                    Slot::Low => Level::Low,
                    Slot::High => Level::High,
                    Slot::DontCare => level,
                })
                .collect(),
        )
    }
}

impl std::fmt::Display for Template {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.0 {
            f.write_str(match s {
                Slot::Low => "L",
                Slot::High => "H",
                Slot::DontCare => "*",
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryTemplates {
    pub row: usize,
    pub col: usize,
    pub argmin: Template,
    pub argmax: Template,
}

/// Per-entry argmin/argmax templates implied by the monotone directions.
pub fn extremal_corners(report: &MonotonicityReport) -> Result<Vec<EntryTemplates>> {
    if let Some((param, row, col)) = report.first_non_monotone() {
        return Err(Error::NonMonotoneEntry { param, row, col });
    }
    let (k, n) = (report.k(), report.n());
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut argmax = Vec::with_capacity(k);
            let mut argmin = Vec::with_capacity(k);
            for l in 0..k {
                let (hi, lo) = match report.direction(l, i, j) {
                    Direction::Increasing => (Slot::High, Slot::Low),
                    Direction::Decreasing => (Slot::Low, Slot::High),
                    Direction::Constant => (Slot::DontCare, Slot::DontCare),
                    Direction::NonMonotone => unreachable!("rejected above"),
                };
                argmax.push(hi);
                argmin.push(lo);
            }
            out.push(EntryTemplates {
                row: i,
                col: j,
                argmin: Template(argmin),
                argmax: Template(argmax),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Extreme {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub row: usize,
    pub col: usize,
    pub extreme: Extreme,
    pub template: Template,
}

pub fn requirements(templates: &[EntryTemplates]) -> Vec<Requirement> {
    templates
        .iter()
        .flat_map(|t| {
            [
                Requirement {
                    row: t.row,
                    col: t.col,
                    extreme: Extreme::Min,
                    template: t.argmin.clone(),
                },
                Requirement {
                    row: t.row,
                    col: t.col,
                    extreme: Extreme::Max,
                    template: t.argmax.clone(),
                },
            ]
        })
        .collect()
}

/// Templates with more free slots than this contribute only their all-LOW and
/// all-HIGH completions as candidates.
const MAX_COMPLETION_DONT_CARES: usize = 16;

/// Greedy set cover of `reqs` by corners of a `k`-parameter box.
///
/// Each round picks the candidate matching the most uncovered requirements,
/// ties going to the lexicographically smallest corner. A final pass drops
/// corners whose requirements are all covered by the others.
pub fn greedy_cover(k: usize, reqs: &[Requirement]) -> Vec<Corner> {
    let mut candidates: BTreeSet<Corner> = BTreeSet::new();
    candidates.insert(Corner::all(k, Level::Low));
    candidates.insert(Corner::all(k, Level::High));
    for r in reqs {
        if r.template.dont_cares() <= MAX_COMPLETION_DONT_CARES {
            candidates.extend(r.template.completions());
        } else {
            candidates.insert(r.template.filled(Level::Low));
            candidates.insert(r.template.filled(Level::High));
        }
    }

    let mut covered = vec![false; reqs.len()];
    let mut selected: Vec<Corner> = Vec::new();
    while covered.iter().any(|c| !c) {
        let mut best: Option<(&Corner, usize)> = None;
        for cand in &candidates {
            let gain = reqs
                .iter()
                .zip(&covered)
                .filter(|(r, c)| !**c && r.template.matches(cand))
                .count();
            if gain > best.map_or(0, |(_, g)| g) {
                best = Some((cand, gain));
            }
        }
        let Some((corner, _)) = best else { break };
        for (r, c) in reqs.iter().zip(covered.iter_mut()) {
            if r.template.matches(corner) {
                *c = true;
            }
        }
        selected.push(corner.clone());
    }

    // redundancy pruning, latest picks first
    let mut idx = selected.len();
    while idx > 0 {
        idx -= 1;
        let others: Vec<&Corner> = selected
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != idx)
            .map(|(_, c)| c)
            .collect();
        if !others.is_empty() && reqs.iter().all(|r| others.iter().any(|c| r.template.matches(c))) {
            selected.remove(idx);
        }
    }
    selected
}

/// Selected identification models and which requirement each covers.
#[derive(Debug, Clone)]
pub struct VertexModelSet {
    pub corners: Vec<Corner>,
    pub systems: Vec<LinearSystem>,
    pub canonical: Vec<CanonicalForm>,
    /// `(row, col, extreme)` to index into `corners`.
    pub coverage: BTreeMap<(usize, usize, Extreme), usize>,
}

impl VertexModelSet {
    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    /// Builds a model set directly from systems (no coverage information).
    pub fn from_systems(corners: Vec<Corner>, systems: Vec<LinearSystem>, tol: f64) -> Result<Self> {
        let canonical = systems
            .iter()
            .zip(&corners)
            .map(|(s, c)| canonicalize_corner(s, c, tol))
            .collect::<Result<_>>()?;
        Ok(VertexModelSet {
            corners,
            systems,
            canonical,
            coverage: BTreeMap::new(),
        })
    }
}

fn canonicalize_corner(sys: &LinearSystem, corner: &Corner, tol: f64) -> Result<CanonicalForm> {
    canonical::system_to_canonical(sys, tol).map_err(|e| match e {
        Error::Uncontrollable { ratio, .. } => Error::UncontrollableCorner {
            corner: corner.to_string(),
            ratio,
        },
        other => other,
    })
}

/// Greedy minimal corner set covering every entry's min and max, with each
/// selected system canonicalized.
pub fn select_vertex_models(
    ps: &ParameterizedSystem,
    templates: &[EntryTemplates],
    controllability_tol: f64,
) -> Result<VertexModelSet> {
    let reqs = requirements(templates);
    let corners = greedy_cover(ps.k(), &reqs);
    let mut coverage = BTreeMap::new();
    for r in &reqs {
        if let Some(idx) = corners.iter().position(|c| r.template.matches(c)) {
            coverage.insert((r.row, r.col, r.extreme), idx);
        }
    }
    let systems: Vec<LinearSystem> = corners
        .iter()
        .map(|c| ps.eval_at_corner(c))
        .collect::<Result<_>>()?;
    let mut set = VertexModelSet::from_systems(corners, systems, controllability_tol)?;
    set.coverage = coverage;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConditionStatus {
    Holds,
    Fails,
    NotChecked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub status: ConditionStatus,
    pub residual: f64,
}

impl ConditionCheck {
    fn from_bool(holds: bool, residual: f64) -> Self {
        ConditionCheck {
            status: if holds { ConditionStatus::Holds } else { ConditionStatus::Fails },
            residual,
        }
    }

    pub fn holds(&self) -> bool {
        self.status == ConditionStatus::Holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CriticalKind {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinationVerdict {
    /// Affine relationship `g2 = alpha g1 + beta`; residual is the max fit error over range(g2).
    pub affine: ConditionCheck,
    pub alpha: f64,
    pub beta: f64,
    /// Strictly monotone functional relationship; residual is the fraction of discordant pairs.
    pub functional: ConditionCheck,
    /// Common reflection center; residual is the worst reflection error over range.
    pub symmetry: ConditionCheck,
    pub symmetry_center: Option<f64>,
    /// Shared critical points; residual is the worst location mismatch in grid cells.
    pub critical_points: ConditionCheck,
    pub critical_locations: Vec<(f64, CriticalKind)>,
    pub periodic: ConditionCheck,
}

fn range(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

fn sign_with_deadband(d: f64, deadband: f64) -> i8 {
    if d > deadband {
        1
    } else if d < -deadband {
        -1
    } else {
        0
    }
}

/// Critical points as (fractional grid index, kind).
fn critical_points(g: &[f64], deadband: f64) -> Vec<(f64, CriticalKind)> {
    let diffs: Vec<(usize, i8)> = g
        .windows(2)
        .enumerate()
        .map(|(s, w)| (s, sign_with_deadband(w[1] - w[0], deadband)))
        .filter(|(_, s)| *s != 0)
        .collect();
    diffs
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| {
            let location = 0.5 * ((w[0].0 + 1) as f64 + w[1].0 as f64);
            let c = location.round() as usize;
            let second = g[c - 1] - 2.0 * g[c] + g[c + 1];
            let kind = match sign_with_deadband(second, deadband) {
                -1 => CriticalKind::Max,
                1 => CriticalKind::Min,
                _ if w[0].1 > 0 => CriticalKind::Max,
                _ => CriticalKind::Min,
            };
            (location, kind)
        })
        .collect()
}

/// Coordination conditions on two sampled curves over a uniform grid `xs`.
pub fn coordination_from_curves(xs: &[f64], g1: &[f64], g2: &[f64], tol: f64) -> Result<CoordinationVerdict> {
    let n = xs.len();
    if n < 5 || g1.len() != n || g2.len() != n {
        return Err(Error::InvalidArgument(format!(
            "coordination needs >= 5 equal-length samples, got {}, {}, {}",
            n,
            g1.len(),
            g2.len()
        )));
    }
    let (r1, r2) = (range(g1), range(g2));
    let (db1, db2) = (tol * r1, tol * r2);

    // affine least-squares fit
    let mean1 = g1.iter().sum::<f64>() / n as f64;
    let mean2 = g2.iter().sum::<f64>() / n as f64;
    let var1: f64 = g1.iter().map(|v| (v - mean1).powi(2)).sum();
    let cov: f64 = g1.iter().zip(g2).map(|(a, b)| (a - mean1) * (b - mean2)).sum();
    let (alpha, beta, affine) = if var1 > 0.0 {
        let alpha = cov / var1;
        let beta = mean2 - alpha * mean1;
        let worst = g1
            .iter()
            .zip(g2)
            .map(|(a, b)| (b - alpha * a - beta).abs())
            .fold(0.0, f64::max);
        let rel = if r2 > 0.0 { worst / r2 } else { worst };
        (alpha, beta, ConditionCheck::from_bool(rel <= tol && alpha.abs() > tol, rel))
    } else {
        (0.0, mean2, ConditionCheck::from_bool(false, f64::INFINITY))
    };

    // rank-order consistency
    let (mut concordant, mut discordant, mut tie_mismatch, mut pairs) = (0usize, 0usize, 0usize, 0usize);
    for a in 0..n {
        for b in a + 1..n {
            pairs += 1;
            let s1 = sign_with_deadband(g1[b] - g1[a], db1);
            let s2 = sign_with_deadband(g2[b] - g2[a], db2);
            match (s1, s2) {
                (0, 0) => {}
                (0, _) | (_, 0) => tie_mismatch += 1,
                _ if s1 == s2 => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let bad = tie_mismatch + concordant.min(discordant);
    let functional = ConditionCheck::from_bool(
        bad == 0 && concordant + discordant > 0,
        bad as f64 / pairs as f64,
    );

    // reflection about s/2 (grid index), at least two reflected pairs
    let mut best: Option<(f64, usize, usize)> = None;
    for s in 3..=(2 * (n - 1) - 3) {
        let lo = s.saturating_sub(n - 1);
        let mut worst = 0.0f64;
        let mut count = 0;
        let mut a = lo;
        while a < s - a {
            let b = s - a;
            if b < n {
                let e1 = (g1[a] - g1[b]).abs() / if r1 > 0.0 { r1 } else { 1.0 };
                let e2 = (g2[a] - g2[b]).abs() / if r2 > 0.0 { r2 } else { 1.0 };
                worst = worst.max(e1).max(e2);
                count += 1;
            }
            a += 1;
        }
        if count < 2 {
            continue;
        }
        let better = match best {
            None => true,
            Some((w, c, _)) => worst < w || (worst == w && count > c),
        };
        if better {
            best = Some((worst, count, s));
        }
    }
    let dx = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    let (symmetry, symmetry_center) = match best {
        Some((worst, _, s)) => (
            ConditionCheck::from_bool(worst <= tol, worst),
            Some(xs[0] + dx * s as f64 / 2.0),
        ),
        None => (ConditionCheck::from_bool(false, f64::INFINITY), None),
    };

    // shared critical points
    let c1 = critical_points(g1, db1);
    let c2 = critical_points(g2, db2);
    let critical = if c1.len() != c2.len() || c1.is_empty() {
        ConditionCheck::from_bool(false, if c1.len() == c2.len() { 0.0 } else { f64::INFINITY })
    } else {
        let mut worst = 0.0f64;
        let mut kinds_match = true;
        for ((x1, k1), (x2, k2)) in c1.iter().zip(&c2) {
            worst = worst.max((x1 - x2).abs());
            kinds_match &= k1 == k2;
        }
        ConditionCheck::from_bool(kinds_match && worst <= 1.0, worst)
    };
    let critical_locations = c1.iter().map(|(x, k)| (xs[0] + dx * x, *k)).collect();

    Ok(CoordinationVerdict {
        affine,
        alpha,
        beta,
        functional,
        symmetry,
        symmetry_center,
        critical_points: critical,
        critical_locations,
        periodic: ConditionCheck {
            status: ConditionStatus::NotChecked,
            residual: f64::NAN,
        },
    })
}

/// Coordination of `a[first]` and `a[second]` as functions of parameter
/// `param`, sampled on `grid` points with the other parameters fixed at `base`.
pub fn check_coordination(
    ps: &ParameterizedSystem,
    param: usize,
    first: (usize, usize),
    second: (usize, usize),
    base: &ParameterVector,
    grid: usize,
    tol: f64,
) -> Result<CoordinationVerdict> {
    if grid < 5 {
        return Err(Error::InvalidArgument(format!("grid must be >= 5, got {grid}")));
    }
    let n = ps.n();
    if param >= ps.k() || first.0 >= n || first.1 >= n || second.0 >= n || second.1 >= n {
        return Err(Error::DimensionMismatch(format!(
            "entry or parameter index out of range for n={n}, k={}",
            ps.k()
        )));
    }
    let pbox = ps.parameter_box();
    let (p, q) = (pbox.lower()[param], pbox.upper()[param]);
    let xs: Vec<f64> = (0..grid).map(|s| p + (q - p) * s as f64 / (grid - 1) as f64).collect();
    let mut g1 = Vec::with_capacity(grid);
    let mut g2 = Vec::with_capacity(grid);
    for x in &xs {
        let sys = ps.eval(&base.with(param, *x))?;
        g1.push(sys.a()[first]);
        g2.push(sys.a()[second]);
    }
    coordination_from_curves(&xs, &g1, &g2, tol)
}
