//! Offline optimal migration planner: a bipartite graph over local and
//! remote pages with net-benefit edge weights, solved by maximum-weight
//! matching and validated against exhaustive enumeration.
//!
//! Left vertices are the local pages. Each left vertex can pair with itself
//! (weight 0, no swap) or with any remote page (weight = the swap's net
//! benefit); distinct pages of the same locality never pair. The planner is
//! clairvoyant by design: edge weights come from true future access counts
//! read ahead from the trace. This is infeasible online; the planner exists
//! as a performance bound.

use std::collections::BTreeMap;

use crate::cost::{net_benefit, transfer_threshold, CostParams};
use crate::error::{Error, Result};
use crate::mem::PageId;

const BRUTE_FORCE_LIMIT: usize = 8;
/// Sentinel cost for forbidden assignment cells; large enough to dominate
/// any real weight, small enough to stay well inside f64 range.
const FORBIDDEN: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapPair {
    /// Remote page moving in.
    pub promote: PageId,
    /// Local page moving out.
    pub demote: PageId,
    pub benefit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<SwapPair>,
    pub total_weight: f64,
}

/// The promotion bipartite graph: cross-edge weights for every
/// (local, remote) pair; self edges are implicit with weight 0.
#[derive(Debug, Clone)]
pub struct SwapGraph {
    pub local: Vec<PageId>,
    pub remote: Vec<PageId>,
    /// `weights[i][j]` = net benefit of swapping `remote[j]` in for `local[i]`.
    pub weights: Vec<Vec<f64>>,
}

/// Builds the graph from clairvoyant access counts over the lookahead
/// window. Every page in either set must have a count.
pub fn build_graph(
    local: &[PageId],
    remote: &[PageId],
    future_counts: &BTreeMap<PageId, f64>,
    params: &CostParams,
    bandwidth_bps: f64,
) -> Result<SwapGraph> {
    let count = |id: PageId| -> Result<f64> {
        future_counts
            .get(&id)
            .copied()
            .ok_or(Error::MissingCount(id))
    };
    let mut weights = Vec::with_capacity(local.len());
    for &d in local {
        let count_d = count(d)?;
        let mut row = Vec::with_capacity(remote.len());
        for &p in remote {
            row.push(net_benefit(count(p)?, count_d, params, bandwidth_bps)?);
        }
        weights.push(row);
    }
    Ok(SwapGraph {
        local: local.to_vec(),
        remote: remote.to_vec(),
        weights,
    })
}

/// Maximum-weight matching, perfect on the left vertices. Solved as a
/// min-cost assignment on negated weights with one private zero-cost "stay"
/// column per left vertex, so a matching always exists and cross edges are
/// only taken when they beat staying put. Returned pairs all have strictly
/// positive benefit; zero-weight cross edges resolve to self-edges.
pub fn max_weight_matching(graph: &SwapGraph) -> Matching {
    let n = graph.local.len();
    let m_remote = graph.remote.len();
    if n == 0 {
        return Matching {
            pairs: Vec::new(),
            total_weight: 0.0,
        };
    }

    let m = m_remote + n;
    let cost = |i: usize, j: usize| -> f64 {
        if j < m_remote {
            -graph.weights[i][j]
        } else if j - m_remote == i {
            0.0
        } else {
            FORBIDDEN
        }
    };

    // Potential-based assignment (Kuhn with Dijkstra-style row insertion),
    // rows and columns 1-indexed with a virtual column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut assigned_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if reduced < min_to[j] {
                        min_to[j] = reduced;
                        way[j] = j0;
                    }
                    if min_to[j] < delta {
                        delta = min_to[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; n];
    for (j, &row) in assigned_row.iter().enumerate().skip(1) {
        if row != 0 {
            row_to_col[row - 1] = Some(j - 1);
        }
    }
    collect_pairs(graph, &row_to_col)
}

/// Exhaustive enumeration over all assignments of left vertices to distinct
/// remote pages (or themselves). Exact optimum; the test oracle for the
/// matching solver.
pub fn brute_force_matching(graph: &SwapGraph) -> Result<Matching> {
    let n = graph.local.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            limit: BRUTE_FORCE_LIMIT,
            got: n,
        });
    }

    let mut best: Vec<Option<usize>> = vec![None; n];
    let mut best_weight = 0.0f64;
    let mut current: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; graph.remote.len()];

    fn recurse(
        graph: &SwapGraph,
        row: usize,
        acc: f64,
        current: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Vec<Option<usize>>,
        best_weight: &mut f64,
    ) {
        if row == graph.local.len() {
            if acc > *best_weight {
                *best_weight = acc;
                best.clone_from(current);
            }
            return;
        }
        // Stay (self edge, weight 0) considered first so ties keep fewer swaps.
        current[row] = None;
        recurse(graph, row + 1, acc, current, used, best, best_weight);
        for j in 0..graph.remote.len() {
            if !used[j] {
                used[j] = true;
                current[row] = Some(j);
                recurse(
                    graph,
                    row + 1,
                    acc + graph.weights[row][j],
                    current,
                    used,
                    best,
                    best_weight,
                );
                current[row] = None;
                used[j] = false;
            }
        }
    }

    recurse(
        graph,
        0,
        0.0,
        &mut current,
        &mut used,
        &mut best,
        &mut best_weight,
    );
    Ok(collect_pairs(graph, &best))
}

/// Shared pair collection so both solvers sum selected weights in the same
/// order: cross pairs with strictly positive benefit, in left-vertex order.
fn collect_pairs(graph: &SwapGraph, row_to_col: &[Option<usize>]) -> Matching {
    let mut pairs = Vec::new();
    let mut total = 0.0f64;
    for (i, col) in row_to_col.iter().enumerate() {
        if let Some(j) = *col {
            if j < graph.remote.len() {
                let w = graph.weights[i][j];
                debug_assert!(w > -FORBIDDEN / 2.0, "forbidden cell selected");
                if w > 0.0 {
                    pairs.push(SwapPair {
                        promote: graph.remote[j],
                        demote: graph.local[i],
                        benefit: w,
                    });
                    total += w;
                }
            }
        }
    }
    Matching {
        pairs,
        total_weight: total,
    }
}

/// Plans the swap set for one decision step. Prunes pages that provably
/// self-match before solving: a cross edge can only be positive when the
/// remote count clears the cheapest local count plus the constant cost, so
/// dropping the rest leaves the optimum unchanged.
pub fn plan_swaps(
    local_counts: &[(PageId, f64)],
    remote_counts: &[(PageId, f64)],
    params: &CostParams,
    bandwidth_bps: f64,
) -> Result<Vec<SwapPair>> {
    if local_counts.is_empty() || remote_counts.is_empty() {
        return Ok(Vec::new());
    }
    let constant = transfer_threshold(params.page_size, bandwidth_bps, params.delta_latency_ns)?
        + params.k_accesses();
    let min_local = local_counts
        .iter()
        .map(|&(_, c)| c)
        .fold(f64::INFINITY, f64::min);
    let max_remote = remote_counts
        .iter()
        .map(|&(_, c)| c)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut counts = BTreeMap::new();
    let locals: Vec<PageId> = local_counts
        .iter()
        .filter(|&&(_, c)| max_remote - c - constant > 0.0)
        .map(|&(id, c)| {
            counts.insert(id, c);
            id
        })
        .collect();
    let remotes: Vec<PageId> = remote_counts
        .iter()
        .filter(|&&(_, c)| c - min_local - constant > 0.0)
        .map(|&(id, c)| {
            counts.insert(id, c);
            id
        })
        .collect();
    if locals.is_empty() || remotes.is_empty() {
        return Ok(Vec::new());
    }

    let graph = build_graph(&locals, &remotes, &counts, params, bandwidth_bps)?;
    Ok(max_weight_matching(&graph).pairs)
}
