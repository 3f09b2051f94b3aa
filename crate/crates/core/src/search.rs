//! Large conflict-free cell selections.
//!
//! All cells of a level have the same area, so the best selection is a
//! maximum independent set of the conflict graph after discarding
//! self-conflicting cells. This module has the double-cap baseline, greedy
//! and local-search heuristics, and an exact branch and bound for graphs of
//! at most 64 cells.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conflict::ConflictGraph;
use crate::error::{Error, Result};
use crate::grid::{divisions, CellSet};
use crate::sphere::seeded_rng;

/// Published upper bounds on the largest fraction of the sphere without
/// orthogonal pairs, loosest first.
pub const PUBLISHED_BOUNDS: [(&str, f64); 5] = [
    ("1/3", 1.0 / 3.0),
    ("0.313", 0.313),
    ("0.308", 0.308),
    ("0.30153", 0.30153),
    ("0.297742", 0.297742),
];

/// The tightest published upper bound.
pub const BEST_KNOWN_BOUND: f64 = 0.297742;

/// Normalized measure of the two open π/4 polar caps: 1 − 1/√2.
pub fn double_cap_measure_fraction() -> f64 {
    1.0 - std::f64::consts::FRAC_1_SQRT_2
}

/// Cells whose closed cos θ range lies inside one of the open polar caps of radius π/4.
pub fn double_cap_cellset(level: u32) -> Result<CellSet> {
    if level == 0 {
        return Err(Error::InvalidLevel(0));
    }
    let n = divisions(level);
    let t = std::f64::consts::FRAC_1_SQRT_2;
    let pairs = (0..n)
        .filter(|&b| {
            let z = crate::grid::DyadicCell { level, band: b, sector: 0 }.cos_theta_bounds();
            z.lo > t || z.hi < -t
        })
        .flat_map(|b| (0..n).map(move |s| (b, s)));
    CellSet::from_pairs(level, pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundGap {
    pub bound: String,
    pub value: f64,
    /// bound − fraction.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub level: u32,
    pub method: String,
    pub seed: Option<u64>,
    pub selection: CellSet,
    pub cells: usize,
    pub measure_sr: f64,
    pub fraction: f64,
    pub iterations: u64,
    pub nodes: u64,
    /// Set by exact search: whether the search space was exhausted.
    pub optimal: Option<bool>,
    pub bounds: Vec<BoundGap>,
    pub double_cap_fraction: Option<f64>,
    pub double_cap_gap: Option<f64>,
    /// Fraction above the best published bound. Never expected; a finding if set.
    pub exceeds_best_known_bound: bool,
}

/// Feasibility check plus bound comparison.
pub fn evaluate(selection: &CellSet, graph: &ConflictGraph) -> Result<SearchResult> {
    let v = graph.violations(selection)?;
    if !v.is_empty() {
        return Err(Error::InfeasibleSelection(v));
    }
    Ok(result(selection.clone(), "evaluate", None, 0, 0, None))
}

fn result(selection: CellSet, method: &str, seed: Option<u64>, iterations: u64, nodes: u64, optimal: Option<bool>) -> SearchResult {
    let level = selection.level();
    let fraction = selection.fraction();
    let dc = double_cap_cellset(level).ok().map(|s| s.fraction());
    SearchResult {
        level,
        method: method.to_string(),
        seed,
        cells: selection.len(),
        measure_sr: selection.measure(),
        fraction,
        iterations,
        nodes,
        optimal,
        bounds: PUBLISHED_BOUNDS
            .iter()
            .map(|&(name, value)| BoundGap { bound: name.to_string(), value, gap: value - fraction })
            .collect(),
        double_cap_fraction: dc,
        double_cap_gap: dc.map(|d| d - fraction),
        exceeds_best_known_bound: fraction > BEST_KNOWN_BOUND,
        selection,
    }
}

/// Compressed adjacency of the graph without self loops.
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    blocked: Vec<bool>,
}

impl Adjacency {
    fn new(g: &ConflictGraph) -> Self {
        let n = g.cell_count();
        let mut offsets = Vec::with_capacity(n as usize + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for a in 0..n {
            targets.extend(g.neighbors(a));
            offsets.push(targets.len());
        }
        let blocked = (0..n).map(|a| g.is_self_conflicting(a)).collect();
        Self { offsets, targets, blocked }
    }

    fn of(&self, a: u32) -> &[u32] {
        &self.targets[self.offsets[a as usize]..self.offsets[a as usize + 1]]
    }

    fn len(&self) -> usize {
        self.blocked.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyOrder {
    /// Repeatedly take the cell of least remaining degree (lowest ordinal on ties).
    MinDegree,
    /// Take cells in a seeded random order when compatible.
    Random(u64),
}

pub fn greedy_mis(graph: &ConflictGraph, order: GreedyOrder) -> SearchResult {
    let adj = Adjacency::new(graph);
    let n = adj.len();
    let mut chosen = Vec::new();
    match order {
        GreedyOrder::MinDegree => {
            let mut alive: Vec<bool> = adj.blocked.iter().map(|b| !b).collect();
            let mut deg: Vec<usize> = (0..n as u32)
                .map(|a| adj.of(a).iter().filter(|&&b| alive[b as usize]).count())
                .collect();
            let mut queue: BTreeSet<(usize, u32)> =
                (0..n as u32).filter(|&a| alive[a as usize]).map(|a| (deg[a as usize], a)).collect();
            while let Some((_, a)) = queue.pop_first() {
                chosen.push(a);
                alive[a as usize] = false;
                for &b in adj.of(a) {
                    if !alive[b as usize] {
                        continue;
                    }
                    alive[b as usize] = false;
                    queue.remove(&(deg[b as usize], b));
                    for &c in adj.of(b) {
                        if alive[c as usize] {
                            queue.remove(&(deg[c as usize], c));
                            deg[c as usize] -= 1;
                            queue.insert((deg[c as usize], c));
                        }
                    }
                }
            }
        }
        GreedyOrder::Random(seed) => {
            let mut perm: Vec<u32> = (0..n as u32).collect();
            perm.shuffle(&mut seeded_rng(seed, 0));
            let mut taken = vec![false; n];
            for a in perm {
                if !adj.blocked[a as usize] && adj.of(a).iter().all(|&b| !taken[b as usize]) {
                    taken[a as usize] = true;
                    chosen.push(a);
                }
            }
        }
    }
    let sel = CellSet::from_ordinals(graph.level(), chosen).expect("ordinals come from the graph");
    let (method, seed) = match order {
        GreedyOrder::MinDegree => ("greedy-min-degree", None),
        GreedyOrder::Random(s) => ("greedy-random", Some(s)),
    };
    result(sel, method, seed, n as u64, 0, None)
}

/// (1,2)-swap hill climbing from a feasible start.
///
/// Free cells are inserted whenever possible. A swap removes one selected
/// cell and inserts two non-conflicting cells whose only selected neighbor
/// it was. The selection never shrinks. Stops after `iters` attempts or when
/// a full pass over the selection finds no move.
pub fn local_search(graph: &ConflictGraph, init: &CellSet, iters: u64, seed: u64) -> Result<SearchResult> {
    let v = graph.violations(init)?;
    if !v.is_empty() {
        return Err(Error::InfeasibleSelection(v));
    }
    let adj = Adjacency::new(graph);
    let n = adj.len();
    let mut rng = seeded_rng(seed, 1);
    let mut sel = vec![false; n];
    // Number of selected neighbors of each cell.
    let mut tight = vec![0u32; n];
    let insert = |a: u32, sel: &mut Vec<bool>, tight: &mut Vec<u32>| {
        sel[a as usize] = true;
        for &b in adj.of(a) {
            tight[b as usize] += 1;
        }
    };
    let remove = |a: u32, sel: &mut Vec<bool>, tight: &mut Vec<u32>| {
        sel[a as usize] = false;
        for &b in adj.of(a) {
            tight[b as usize] -= 1;
        }
    };
    for a in init.ordinals() {
        insert(a, &mut sel, &mut tight);
    }
    let free = |a: u32, sel: &Vec<bool>, tight: &Vec<u32>| {
        !sel[a as usize] && tight[a as usize] == 0 && !adj.blocked[a as usize]
    };
    for a in 0..n as u32 {
        if free(a, &sel, &tight) {
            insert(a, &mut sel, &mut tight);
        }
    }
    let mut done = 0u64;
    let mut stale = 0usize;
    while done < iters {
        let members: Vec<u32> = (0..n as u32).filter(|&a| sel[a as usize]).collect();
        if members.is_empty() || stale > members.len() {
            break;
        }
        let x = members[rng.gen_range(0..members.len())];
        done += 1;
        let cands: Vec<u32> = adj
            .of(x)
            .iter()
            .copied()
            .filter(|&b| !sel[b as usize] && tight[b as usize] == 1 && !adj.blocked[b as usize])
            .collect();
        let mut pair = None;
        'outer: for (i, &p) in cands.iter().enumerate() {
            for &q in &cands[i + 1..] {
                if !graph.conflicts(p, q) {
                    pair = Some((p, q));
                    break 'outer;
                }
            }
        }
        match pair {
            Some((p, q)) => {
                remove(x, &mut sel, &mut tight);
                insert(p, &mut sel, &mut tight);
                insert(q, &mut sel, &mut tight);
                for &b in adj.of(x) {
                    if free(b, &sel, &tight) {
                        insert(b, &mut sel, &mut tight);
                    }
                }
                stale = 0;
            }
            None => stale += 1,
        }
    }
    let chosen: Vec<u32> = (0..n as u32).filter(|&a| sel[a as usize]).collect();
    let out = CellSet::from_ordinals(graph.level(), chosen)?;
    Ok(result(out, "local-search", Some(seed), done, 0, None))
}

/// Default cap on the number of cells accepted by [`exact_mis`].
pub const EXACT_MAX_CELLS: u32 = 64;

struct Bnb<'a> {
    adj: &'a [u64],
    best: u64,
    best_set: u64,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl Bnb<'_> {
    fn upper_bound(&self, cand: u64) -> u32 {
        let k = cand.count_ones();
        let (mut edges2, mut maxdeg) = (0u32, 0u32);
        let mut c = cand;
        while c != 0 {
            let v = c.trailing_zeros();
            c &= c - 1;
            let d = (self.adj[v as usize] & cand).count_ones();
            edges2 += d;
            maxdeg = maxdeg.max(d);
        }
        if maxdeg == 0 {
            return k;
        }
        // α ≤ k − m/Δ, since every vertex outside an independent set covers at most Δ edges.
        let m = edges2 / 2;
        k - m.div_ceil(maxdeg)
    }

    fn expand(&mut self, mut cand: u64, cur: u64) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        // Isolated candidates belong to every maximal extension.
        let mut cur = cur;
        let mut c = cand;
        while c != 0 {
            let v = c.trailing_zeros();
            c &= c - 1;
            if self.adj[v as usize] & cand == 0 {
                cur |= 1 << v;
                cand &= !(1 << v);
            }
        }
        if cand == 0 {
            if cur.count_ones() > self.best as u32 {
                self.best = cur.count_ones() as u64;
                self.best_set = cur;
            }
            return;
        }
        if (cur.count_ones() + self.upper_bound(cand)) as u64 <= self.best {
            return;
        }
        // Branch on the candidate of largest degree, lowest index first.
        let mut v = 0;
        let mut vd = 0;
        let mut c = cand;
        while c != 0 {
            let u = c.trailing_zeros();
            c &= c - 1;
            let d = (self.adj[u as usize] & cand).count_ones();
            if d > vd {
                v = u;
                vd = d;
            }
        }
        self.expand(cand & !(1 << v) & !self.adj[v as usize], cur | (1 << v));
        if self.exhausted {
            return;
        }
        self.expand(cand & !(1 << v), cur);
    }
}

/// Maximum conflict-free selection by branch and bound (at most 64 cells).
/// `optimal` is false if `node_budget` ran out; the best selection found is returned.
pub fn exact_mis(graph: &ConflictGraph, node_budget: u64) -> Result<SearchResult> {
    let n = graph.cell_count();
    if n > EXACT_MAX_CELLS {
        return Err(Error::ResourceCap { level: graph.level(), max: 2 });
    }
    let adj: Vec<u64> = (0..n)
        .map(|a| graph.neighbors(a).iter().fold(0u64, |m, &b| m | (1 << b)))
        .collect();
    let cand = (0..n).filter(|&a| !graph.is_self_conflicting(a)).fold(0u64, |m, a| m | (1 << a));
    // Greedy incumbent: min-degree order.
    let greedy = greedy_mis(graph, GreedyOrder::MinDegree);
    let best_set = greedy.selection.ordinals().iter().fold(0u64, |m, &a| m | (1 << a));
    let mut bnb = Bnb { adj: &adj, best: best_set.count_ones() as u64, best_set, nodes: 0, budget: node_budget, exhausted: false };
    bnb.expand(cand, 0);
    let chosen: Vec<u32> = (0..n).filter(|&a| bnb.best_set >> a & 1 == 1).collect();
    let sel = CellSet::from_ordinals(graph.level(), chosen)?;
    Ok(result(sel, "exact", None, 0, bnb.nodes, Some(!bnb.exhausted)))
}

/// Best-effort baseline result (double cap) evaluated against the graph.
pub fn baseline(graph: &ConflictGraph) -> Result<SearchResult> {
    let sel = double_cap_cellset(graph.level())?;
    let mut r = evaluate(&sel, graph)?;
    r.method = "baseline".into();
    Ok(r)
}

/// CSV rows `level,method,seed,cells,fraction,gap_<bound>...,gap_double_cap`.
pub fn leaderboard_csv(results: &[SearchResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["level".to_string(), "method".into(), "seed".into(), "cells".into(), "fraction".into()];
    header.extend(PUBLISHED_BOUNDS.iter().map(|(n, _)| format!("gap_{n}")));
    header.push("gap_double_cap".into());
    w.write_record(&header)?;
    for r in results {
        let mut row = vec![
            r.level.to_string(),
            r.method.clone(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.cells.to_string(),
            r.fraction.to_string(),
        ];
        row.extend(r.bounds.iter().map(|b| b.gap.to_string()));
        row.push(r.double_cap_gap.map(|g| g.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?).expect("csv output is UTF-8"))
}
