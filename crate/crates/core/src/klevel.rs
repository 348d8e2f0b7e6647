//! The k-level of a line arrangement: which of the lines `b_i + a_i z` is
//! the k-th lowest, as a piecewise-constant function of `z`.
//!
//! [`compute_klevel`] walks along the level: from the current k-th line it
//! finds the nearest line crossing it to the right, reorders only the lines
//! concurrent at that vertex, and continues. Its cost is `O(l)` per vertex of
//! the level, which is far below the `l(l-1)/2` vertices of the whole
//! arrangement. [`compute_klevel_sweep`] is the classical kinetic sweep over
//! every vertex, keeping the full order and swapping adjacent lines; it is
//! kept as an independent reference.
//!
//! Identical lines are merged into one weighted group represented by their
//! smallest index, so ranks count multiplicity and ties resolve to the
//! smallest index. At a breakpoint the segment to its right applies.

use crate::error::{arg_err, Result};
use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

/// Relative tolerance under which crossing abscissae are processed as one
/// batch.
pub const EVENT_TOL: f64 = 1e-12;

/// Lines `b_i + a_i z` and the (1-based) rank `k` to track.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFamily {
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
    k: usize,
}

impl LineFamily {
    pub fn new(slopes: Vec<f64>, intercepts: Vec<f64>, k: usize) -> Result<Self> {
        if slopes.is_empty() {
            return arg_err("line family must contain at least one line");
        }
        if slopes.len() != intercepts.len() {
            return arg_err("slopes and intercepts differ in length");
        }
        if k == 0 || k > slopes.len() {
            return arg_err(alloc::format!("rank {k} outside 1..={}", slopes.len()));
        }
        if slopes.iter().chain(&intercepts).any(|v| !v.is_finite()) {
            return arg_err("line coefficients must be finite");
        }
        Ok(Self { slopes, intercepts, k })
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.slopes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slopes.is_empty()
    }

    #[inline]
    pub fn value(&self, line: usize, z: f64) -> f64 {
        self.intercepts[line] + self.slopes[line] * z
    }
}

/// Breakpoints `I_1 < ... < I_L` and the index of the k-th line on each of
/// the `L + 1` segments `(-inf, I_1), [I_1, I_2), ..., [I_L, +inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KLevelProfile {
    breakpoints: Vec<f64>,
    segments: Vec<usize>,
    events: usize,
}

impl KLevelProfile {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Line index (0-based) of the k-th lowest line on each segment.
    pub fn segments(&self) -> &[usize] {
        &self.segments
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    /// Number of pairwise crossings processed while building the profile.
    pub fn events(&self) -> usize {
        self.events
    }

    /// Segment containing `z`; breakpoints belong to the segment on their right.
    #[inline]
    pub fn segment_of(&self, z: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= z)
    }

    #[inline]
    pub fn line_at(&self, z: f64) -> usize {
        self.segments[self.segment_of(z)]
    }

    /// `(lower, upper, line)` for every segment, with infinite outer bounds.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.segments.iter().enumerate().map(move |(i, &line)| {
            let lo = if i == 0 { f64::NEG_INFINITY } else { self.breakpoints[i - 1] };
            let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            (lo, hi, line)
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Group {
    slope: f64,
    intercept: f64,
    rep: usize,
    weight: usize,
}

fn group_lines(family: &LineFamily) -> Vec<Group> {
    let mut idx: Vec<usize> = (0..family.len()).collect();
    idx.sort_by(|&i, &j| {
        family.slopes[i]
            .total_cmp(&family.slopes[j])
            .then(family.intercepts[i].total_cmp(&family.intercepts[j]))
            .then(i.cmp(&j))
    });
    let mut groups: Vec<Group> = Vec::with_capacity(idx.len());
    for i in idx {
        let (a, b) = (family.slopes[i], family.intercepts[i]);
        match groups.last_mut() {
            Some(g) if g.slope == a && g.intercept == b => g.weight += 1,
            _ => groups.push(Group { slope: a, intercept: b, rep: i, weight: 1 }),
        }
    }
    groups
}

/// Order at `z -> -inf`: steeper lines first, then lower intercepts.
fn order_at_minus_infinity(groups: &[Group]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&x, &y| {
        groups[y]
            .slope
            .total_cmp(&groups[x].slope)
            .then(groups[x].intercept.total_cmp(&groups[y].intercept))
            .then(groups[x].rep.cmp(&groups[y].rep))
    });
    order
}

#[inline]
fn crossing(lower: &Group, upper: &Group) -> f64 {
    (upper.intercept - lower.intercept) / (lower.slope - upper.slope)
}

#[inline]
fn batch_tol(z: f64) -> f64 {
    EVENT_TOL * z.abs()
}

/// k-level by walking along it.
pub fn compute_klevel(family: &LineFamily) -> KLevelProfile {
    let groups = group_lines(family);
    let order = order_at_minus_infinity(&groups);
    let (cur, below) = kth_in_order(&groups, &order, family.k);
    walk(&groups, family.k, cur, below, f64::NEG_INFINITY, f64::INFINITY)
}

/// k-level restricted to `[lo, hi]`.
///
/// Breakpoints are exact inside the window. The first segment carries the
/// k-th line at `lo` and the last the k-th line at `hi`, both extended to
/// infinity, so the profile is only meaningful on the window. The walk
/// skips every vertex outside it.
pub fn compute_klevel_window(family: &LineFamily, lo: f64, hi: f64) -> KLevelProfile {
    if !(lo < hi) || !lo.is_finite() {
        return compute_klevel(family);
    }
    let groups = group_lines(family);
    // order just to the right of lo: by value there, flatter first on ties
    let mut order: Vec<usize> = (0..groups.len()).collect();
    let at = |g: &Group| g.intercept + g.slope * lo;
    order.sort_by(|&x, &y| {
        let (gx, gy) = (&groups[x], &groups[y]);
        at(gx).total_cmp(&at(gy)).then(gx.slope.total_cmp(&gy.slope)).then(gx.rep.cmp(&gy.rep))
    });
    let (cur, below) = kth_in_order(&groups, &order, family.k);
    walk(&groups, family.k, cur, below, lo, hi)
}

/// Group holding rank `k` in `order`, and the weight below it.
fn kth_in_order(groups: &[Group], order: &[usize], k: usize) -> (usize, usize) {
    let mut acc = 0;
    for &g in order {
        if acc + groups[g].weight >= k {
            return (g, acc);
        }
        acc += groups[g].weight;
    }
    (order[order.len() - 1], acc - groups[order[order.len() - 1]].weight)
}

/// Follows the level from `start` (where `cur` is the k-th group with
/// `below` lines under it) up to the last vertex not beyond `end`.
fn walk(groups: &[Group], k: usize, mut cur: usize, mut below: usize, start: f64, end: f64) -> KLevelProfile {
    let mut breakpoints = Vec::new();
    let mut segments = alloc::vec![groups[cur].rep];
    let mut events = 0;
    let mut z0 = start;
    let mut block: Vec<usize> = Vec::new();
    let mut next_block: Vec<(usize, f64)> = Vec::new();

    loop {
        let c = groups[cur];
        // nearest crossing to the right of z0, with every line crossing
        // within the batching tolerance of it
        let mut zmin = f64::INFINITY;
        let mut limit = f64::INFINITY;
        next_block.clear();
        for (m, g) in groups.iter().enumerate() {
            let ds = g.slope - c.slope;
            if ds == 0.0 {
                continue;
            }
            let z = (c.intercept - g.intercept) / ds;
            if !(z > z0 && z <= limit) || block.contains(&m) {
                continue;
            }
            if z < zmin {
                zmin = z;
                limit = zmin + batch_tol(zmin);
                next_block.retain(|&(_, zz)| zz <= limit);
            }
            next_block.push((m, z));
        }
        if !zmin.is_finite() || zmin > end {
            break;
        }
        block.clear();
        block.push(cur);
        block.extend(next_block.iter().map(|&(m, _)| m));
        events += block.len() - 1;

        // Concurrent lines are contiguous around the vertex. Left of it the
        // steeper ones are lower; right of it the order reverses.
        let steeper: usize = block[1..].iter().filter(|&&m| groups[m].slope > c.slope).map(|&m| groups[m].weight).sum();
        let block_start = below - steeper;
        block.sort_by(|&x, &y| {
            groups[x]
                .slope
                .total_cmp(&groups[y].slope)
                .then(groups[x].intercept.total_cmp(&groups[y].intercept))
                .then(groups[x].rep.cmp(&groups[y].rep))
        });
        let mut acc = block_start;
        let mut next = cur;
        let mut next_below = below;
        for &g in &block {
            if acc + groups[g].weight >= k {
                next = g;
                next_below = acc;
                break;
            }
            acc += groups[g].weight;
        }
        if next != cur {
            breakpoints.push(zmin);
            segments.push(groups[next].rep);
        }
        cur = next;
        below = next_below;
        z0 = zmin;
    }
    KLevelProfile { breakpoints, segments, events }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    z: f64,
    lower: usize,
    upper: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.z.total_cmp(&other.z).then(self.lower.cmp(&other.lower)).then(self.upper.cmp(&other.upper))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// k-level by a full kinetic sweep: every crossing of adjacent lines is an
/// event, and only swaps touching rank `k` can change the output.
pub fn compute_klevel_sweep(family: &LineFamily) -> KLevelProfile {
    let groups = group_lines(family);
    let mut order = order_at_minus_infinity(&groups);
    let n = order.len();
    let k = family.k;
    let mut pos = alloc::vec![0usize; n];
    let mut start = alloc::vec![0usize; n];
    let mut acc = 0;
    let mut kpos = 0;
    for (p, &g) in order.iter().enumerate() {
        pos[g] = p;
        start[p] = acc;
        if acc < k && k <= acc + groups[g].weight {
            kpos = p;
        }
        acc += groups[g].weight;
    }

    let mut heap = BinaryHeap::new();
    let schedule = |heap: &mut BinaryHeap<Reverse<Event>>, order: &[usize], p: usize, floor: f64| {
        let (lo, hi) = (order[p], order[p + 1]);
        if groups[lo].slope > groups[hi].slope {
            let z = crossing(&groups[lo], &groups[hi]).max(floor);
            heap.push(Reverse(Event { z, lower: lo, upper: hi }));
        }
    };
    for p in 0..n.saturating_sub(1) {
        schedule(&mut heap, &order, p, f64::NEG_INFINITY);
    }

    let mut breakpoints = Vec::new();
    let mut segments = alloc::vec![groups[order[kpos]].rep];
    let mut events = 0;
    let mut batch: Option<(f64, usize)> = None;

    while let Some(Reverse(ev)) = heap.pop() {
        let p = pos[ev.lower];
        if p + 1 >= n || order[p + 1] != ev.upper {
            continue;
        }
        if let Some((zb, before)) = batch {
            if ev.z > zb + batch_tol(zb) {
                if order[kpos] != before {
                    breakpoints.push(zb);
                    segments.push(groups[order[kpos]].rep);
                }
                batch = None;
            }
        }
        if batch.is_none() {
            batch = Some((ev.z, order[kpos]));
        }
        order.swap(p, p + 1);
        pos[order[p]] = p;
        pos[order[p + 1]] = p + 1;
        start[p + 1] = start[p] + groups[order[p]].weight;
        events += 1;
        if kpos == p || kpos == p + 1 {
            kpos = if k <= start[p] + groups[order[p]].weight { p } else { p + 1 };
        }
        if p > 0 {
            schedule(&mut heap, &order, p - 1, ev.z);
        }
        if p + 2 < n {
            schedule(&mut heap, &order, p + 1, ev.z);
        }
    }
    if let Some((zb, before)) = batch {
        if order[kpos] != before {
            breakpoints.push(zb);
            segments.push(groups[order[kpos]].rep);
        }
    }
    KLevelProfile { breakpoints, segments, events }
}
