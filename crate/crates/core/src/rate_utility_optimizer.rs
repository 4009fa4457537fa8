//! Per-tile rate-utility choices and the greedy marginal-utility-per-bit
//! allocator, with an exhaustive oracle for small instances.
//!
//! Each tile carries a ladder of (bits, utility) points indexed by
//! representation, with index 0 the null representation. The representation
//! a tile already holds costs zero bits to keep; switching to any other
//! representation costs that representation's full bit count, since
//! representations are independently coded. The greedy allocator repeatedly
//! commits the upgrade with the steepest utility-per-bit slope until the
//! budget is spent, which walks each tile's upper convex hull.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use crate::error::{Error, Result};

/// Relative tolerance for slope ties; ties are then broken by larger
/// representation within a tile and smaller key across tiles.
const SLOPE_TIE_EPS: f64 = 1e-12;

/// Identity of a tile inside the buffer: (object, segment, gof, morton).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TileKey {
    pub object: u32,
    pub segment: u32,
    pub gof: u32,
    pub morton: u32,
}

impl TileKey {
    pub fn new(object: u32, segment: u32, gof: u32, morton: u32) -> Self {
        TileKey {
            object,
            segment,
            gof,
            morton,
        }
    }
}

impl std::fmt::Display for TileKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}/{}", self.object, self.segment, self.gof, self.morton)
    }
}

/// One tile's rate-utility point set and its current selection.
#[derive(Debug, Clone)]
pub struct TileChoice {
    pub key: TileKey,
    /// utility[m] for m = 0..=M; utility[0] = 0.
    pub utility: Vec<f64>,
    /// Raw bits for m = 0..=M; bits[0] = 0. Keeping the representation the
    /// tile entered the opportunity with costs nothing (see `entry`).
    pub bits: Vec<f64>,
    /// Current representation; advanced by the allocator.
    pub n: usize,
    /// Representation held before this request opportunity; its effective
    /// cost is zero.
    entry: usize,
    /// Best available upgrade slope and its target, maintained by the
    /// allocator.
    pub lambda_star: f64,
    pub m_star: usize,
}

impl TileChoice {
    pub fn new(key: TileKey, utility: Vec<f64>, bits: Vec<f64>, n: usize) -> Result<Self> {
        if utility.len() != bits.len() || utility.is_empty() {
            return Err(Error::Validation(
                "utility and bits arrays must be non-empty and equal length".into(),
            ));
        }
        if utility[0] != 0.0 || bits[0] != 0.0 {
            return Err(Error::Validation(
                "the null representation must have zero utility and zero bits".into(),
            ));
        }
        if n >= utility.len() {
            return Err(Error::Validation(format!(
                "current representation {n} outside ladder of length {}",
                utility.len()
            )));
        }
        let mut t = TileChoice {
            key,
            utility,
            bits,
            n,
            entry: n,
            lambda_star: 0.0,
            m_star: n,
        };
        t.refresh();
        Ok(t)
    }

    /// The representation the tile held when the opportunity began.
    pub fn entry(&self) -> usize {
        self.entry
    }

    /// Bits charged for representation `m` at this opportunity.
    pub fn effective_bits(&self, m: usize) -> f64 {
        if m == self.entry {
            0.0
        } else {
            self.bits[m]
        }
    }

    fn refresh(&mut self) {
        let (l, m) = max_lambda(self);
        self.lambda_star = l;
        self.m_star = m;
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= SLOPE_TIE_EPS * a.abs().max(b.abs())
}

/// The steepest upgrade slope from the tile's current point and the
/// representation achieving it. Returns (0, n) when no representation is
/// strictly costlier than the current one. Slope ties go to the larger m.
pub fn max_lambda(tile: &TileChoice) -> (f64, usize) {
    let n = tile.n;
    let from_bits = tile.effective_bits(n);
    let mut best: Option<(f64, usize)> = None;
    for m in 0..tile.bits.len() {
        if tile.bits[m] <= tile.bits[n] {
            continue;
        }
        let slope = (tile.utility[m] - tile.utility[n]) / (tile.effective_bits(m) - from_bits);
        best = match best {
            None => Some((slope, m)),
            Some((bs, _)) if approx_eq(slope, bs) => Some((bs, m)),
            Some((bs, _)) if slope > bs => Some((slope, m)),
            keep => keep,
        };
    }
    best.unwrap_or((0.0, n))
}

/// Whether the final committed upgrade may exceed the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    /// Budget is tested before each commit, so the last upgrade may
    /// overshoot.
    Overshoot,
    /// Stop before any commit that would exceed the budget.
    Strict,
}

/// One committed upgrade, for debug traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub key: TileKey,
    pub lambda: f64,
    pub m: usize,
    pub consumed_bits: f64,
}

/// Result of an allocation pass.
#[derive(Debug, Clone)]
pub struct AllocationPlan {
    /// Tiles whose representation changed, with the new representation.
    pub selections: BTreeMap<TileKey, usize>,
    /// Bits that must be requested: the sum of full bit counts of all
    /// changed tiles.
    pub requested_bits: f64,
    /// The marginal slope at which allocation stopped.
    pub final_lambda: f64,
    /// Sum of utility[n] over all tiles at their final selections.
    pub total_utility: f64,
    pub trace: Vec<TraceStep>,
}

impl AllocationPlan {
    fn empty(tiles: &[TileChoice]) -> Self {
        AllocationPlan {
            selections: BTreeMap::new(),
            requested_bits: 0.0,
            final_lambda: 0.0,
            total_utility: tiles.iter().map(|t| t.utility[t.n]).sum(),
            trace: Vec::new(),
        }
    }

    /// CSV dump of the per-iteration commit sequence.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("tile,lambda,m,consumed_bits\n");
        for step in &self.trace {
            out.push_str(&format!(
                "{},{:.9e},{},{:.3}\n",
                step.key, step.lambda, step.m, step.consumed_bits
            ));
        }
        out
    }
}

#[derive(Debug)]
struct HeapEntry {
    lambda: f64,
    key: TileKey,
    idx: usize,
    stamp: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: larger lambda first, then smaller key.
        self.lambda
            .total_cmp(&other.lambda)
            .then_with(|| other.key.cmp(&self.key))
    }
}

/// Greedy rate-utility allocation: repeatedly commit the pending upgrade
/// with the greatest utility-per-bit slope until the budget is consumed or
/// no upgrade improves utility.
pub fn greedy_allocate(tiles: &[TileChoice], budget: f64, mode: BudgetMode) -> AllocationPlan {
    let mut work: Vec<TileChoice> = tiles.to_vec();
    if work.is_empty() {
        return AllocationPlan::empty(tiles);
    }
    let mut stamps = vec![0u64; work.len()];
    let mut heap: BinaryHeap<HeapEntry> = work
        .iter()
        .enumerate()
        .map(|(idx, t)| HeapEntry {
            lambda: t.lambda_star,
            key: t.key,
            idx,
            stamp: 0,
        })
        .collect();

    let mut consumed = 0.0f64;
    let mut trace = Vec::new();
    while consumed < budget {
        // Pop the best fresh entry, gathering anything tied with it so the
        // cross-tile tie break (smallest key) is deterministic.
        let top = loop {
            match heap.pop() {
                None => break None,
                Some(e) if e.stamp == stamps[e.idx] => break Some(e),
                Some(_) => continue,
            }
        };
        let Some(top) = top else { break };
        let mut candidates = vec![top];
        while let Some(peek) = heap.peek() {
            if peek.stamp != stamps[peek.idx] {
                heap.pop();
                continue;
            }
            if approx_eq(peek.lambda, candidates[0].lambda) {
                candidates.push(heap.pop().unwrap());
            } else {
                break;
            }
        }
        candidates.sort_by_key(|e| e.key);
        let chosen = candidates.remove(0);
        for other in candidates {
            heap.push(other);
        }

        let tile = &mut work[chosen.idx];
        if tile.lambda_star <= 0.0 {
            break;
        }
        let increment = tile.effective_bits(tile.m_star) - tile.effective_bits(tile.n);
        if mode == BudgetMode::Strict && consumed + increment > budget {
            // Push back so final_lambda still sees this pending upgrade.
            heap.push(HeapEntry {
                lambda: tile.lambda_star,
                key: tile.key,
                idx: chosen.idx,
                stamp: stamps[chosen.idx],
            });
            break;
        }
        consumed += increment;
        tile.n = tile.m_star;
        trace.push(TraceStep {
            key: tile.key,
            lambda: chosen.lambda,
            m: tile.n,
            consumed_bits: consumed,
        });
        tile.refresh();
        stamps[chosen.idx] += 1;
        heap.push(HeapEntry {
            lambda: tile.lambda_star,
            key: tile.key,
            idx: chosen.idx,
            stamp: stamps[chosen.idx],
        });
    }

    // The stopping threshold: the best slope still pending.
    let final_lambda = heap
        .into_iter()
        .filter(|e| e.stamp == stamps[e.idx])
        .map(|e| e.lambda)
        .fold(0.0f64, f64::max);

    let mut selections = BTreeMap::new();
    for t in &work {
        if t.n != t.entry {
            selections.insert(t.key, t.n);
        }
    }
    let requested_bits: f64 = work.iter().map(|t| t.effective_bits(t.n)).sum();
    debug_assert!((requested_bits - consumed).abs() <= 1e-6 * requested_bits.max(1.0));
    let total_utility = work.iter().map(|t| t.utility[t.n]).sum();
    AllocationPlan {
        selections,
        requested_bits,
        final_lambda,
        total_utility,
        trace,
    }
}

/// Exhaustive oracle: maximize total utility subject to the sum of
/// effective bits staying within the budget. Ties keep the
/// lexicographically smallest selection vector.
pub fn brute_force_allocate(tiles: &[TileChoice], budget: f64) -> Result<AllocationPlan> {
    let mut space = 1u64;
    for t in tiles {
        space = space.saturating_mul(t.utility.len() as u64);
        if space > 10_000_000 {
            return Err(Error::TooLarge(format!(
                "selection space exceeds 1e7 for {} tiles",
                tiles.len()
            )));
        }
    }
    let k = tiles.len();
    let mut current = vec![0usize; k];
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    loop {
        let mut cost = 0.0;
        let mut util = 0.0;
        for (i, t) in tiles.iter().enumerate() {
            cost += t.effective_bits(current[i]);
            util += t.utility[current[i]];
        }
        if cost <= budget {
            let better = match &best {
                None => true,
                Some((bu, _, _)) => util > *bu,
            };
            if better {
                best = Some((util, cost, current.clone()));
            }
        }
        if k == 0 {
            break;
        }
        // Advance the odometer, least-significant position last so the
        // scan runs in lexicographic order.
        let mut pos = k;
        let mut done = false;
        loop {
            if pos == 0 {
                done = true;
                break;
            }
            pos -= 1;
            current[pos] += 1;
            if current[pos] < tiles[pos].utility.len() {
                break;
            }
            current[pos] = 0;
        }
        if done {
            break;
        }
    }
    let (util, cost, vector) = best.unwrap_or((0.0, 0.0, vec![]));
    let mut selections = BTreeMap::new();
    for (i, t) in tiles.iter().enumerate() {
        if !vector.is_empty() && vector[i] != t.entry {
            selections.insert(t.key, vector[i]);
        }
    }
    Ok(AllocationPlan {
        selections,
        requested_bits: cost,
        final_lambda: f64::NAN,
        total_utility: util,
        trace: Vec::new(),
    })
}

/// Value of the Lagrangian sum U(m) - lambda * b(m) over a full selection
/// vector, with each tile's entry representation costing zero bits.
pub fn lagrangian_value(tiles: &[TileChoice], selections: &[usize], lambda: f64) -> f64 {
    assert_eq!(tiles.len(), selections.len());
    tiles
        .iter()
        .zip(selections)
        .map(|(t, &m)| t.utility[m] - lambda * t.effective_bits(m))
        .sum()
}

/// The full selection vector a plan implies, aligned with `tiles`.
pub fn plan_selection_vector(tiles: &[TileChoice], plan: &AllocationPlan) -> Vec<usize> {
    tiles
        .iter()
        .map(|t| plan.selections.get(&t.key).copied().unwrap_or(t.entry))
        .collect()
}
