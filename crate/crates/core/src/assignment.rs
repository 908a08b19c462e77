//! Batch matching: the rectangular vehicle/request cost table is padded to a
//! square sparse problem and solved with an epsilon-scaling auction. A
//! round-based bid-exchange variant solves the same problem across companies
//! that never reveal their cost tables, and a brute-force oracle backs both.

use std::collections::VecDeque;

use thiserror::Error;

use crate::model::{RequestId, VehicleId};
use crate::network::{shortest_path_time, Location, Network};
use crate::Secs;

#[derive(Debug, Error, PartialEq)]
pub enum AssignmentError {
    #[error("malformed matrix: {0}")]
    MalformedMatrix(String),
    #[error("matrix dimension {n} exceeds the brute-force limit of {limit}")]
    MatrixTooLarge { n: usize, limit: usize },
    #[error("auction did not terminate after {iterations} bids")]
    NonTermination { iterations: u64 },
}

/// One finite entry of the rectangular cost table, in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostEntry {
    pub row: usize,
    pub col: usize,
    pub cost: i64,
}

/// Rectangular sparse costs: rows are vehicles, columns are requests.
/// Absent entries are infeasible pairs.
#[derive(Debug, Clone, Default)]
pub struct RectCosts {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<CostEntry>,
}

/// Square padded problem. Rows beyond `real_rows` are artificial vehicles,
/// columns beyond `real_cols` are virtual requests; neither carries stored
/// entries. Absent pairs price at a uniform tier above any optimal use, so a
/// perfect matching always exists while real entries win whenever possible.
#[derive(Debug, Clone)]
pub struct SparseCostMatrix {
    n: usize,
    real_rows: usize,
    real_cols: usize,
    /// Stored entries per real row, sorted by column.
    row_entries: Vec<Vec<(usize, i64)>>,
    max_cost: i64,
}

/// Pads the rectangular table with artificial vehicles or virtual requests
/// until both sides have the same cardinality.
pub fn pad_symmetric(costs: &RectCosts) -> Result<SparseCostMatrix, AssignmentError> {
    let n = costs.rows.max(costs.cols);
    let mut row_entries = vec![Vec::new(); costs.rows];
    let mut max_cost = 0i64;
    for e in &costs.entries {
        if e.row >= costs.rows || e.col >= costs.cols {
            return Err(AssignmentError::MalformedMatrix(format!(
                "entry ({}, {}) outside a {}x{} table",
                e.row, e.col, costs.rows, costs.cols
            )));
        }
        if e.cost < 0 {
            return Err(AssignmentError::MalformedMatrix(format!(
                "negative cost {} at ({}, {})",
                e.cost, e.row, e.col
            )));
        }
        max_cost = max_cost.max(e.cost);
        row_entries[e.row].push((e.col, e.cost));
    }
    for row in &mut row_entries {
        row.sort_unstable_by_key(|&(col, _)| col);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(AssignmentError::MalformedMatrix("duplicate entry".into()));
        }
    }
    Ok(SparseCostMatrix { n, real_rows: costs.rows, real_cols: costs.cols, row_entries, max_cost })
}

impl SparseCostMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn real_rows(&self) -> usize {
        self.real_rows
    }

    pub fn real_cols(&self) -> usize {
        self.real_cols
    }

    pub fn artificial_rows(&self) -> usize {
        self.n - self.real_rows
    }

    pub fn virtual_cols(&self) -> usize {
        self.n - self.real_cols
    }

    /// Stored cost of a real pair; `None` for infeasible or padding pairs.
    pub fn cost(&self, row: usize, col: usize) -> Option<i64> {
        self.row_entries
            .get(row)?
            .binary_search_by_key(&col, |&(c, _)| c)
            .ok()
            .map(|i| self.row_entries[row][i].1)
    }

    /// Uniform price tier standing in for the infinite entries. It exceeds
    /// any possible total over real entries, so padding pairs absorb only
    /// otherwise-unmatchable rows and columns.
    pub fn big_cost(&self) -> i64 {
        self.n as i64 * self.max_cost + 1
    }

    fn stored_row(&self, row: usize) -> &[(usize, i64)] {
        if row < self.real_rows {
            &self.row_entries[row]
        } else {
            &[]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchedPair {
    pub row: usize,
    pub col: usize,
    pub cost: i64,
}

/// One-to-one matching over the real entries plus the refused columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    /// Real (vehicle, request) matches, sorted by column.
    pub matches: Vec<MatchedPair>,
    /// Real columns not matched through a stored entry.
    pub refused: Vec<usize>,
    /// Total stored cost over `matches`.
    pub objective: i64,
}

fn decode(m: &SparseCostMatrix, row_match: &[Option<usize>]) -> AssignmentResult {
    let mut matches = Vec::new();
    let mut objective = 0i64;
    for (row, assigned) in row_match.iter().enumerate() {
        let Some(col) = *assigned else { continue };
        if row < m.real_rows && col < m.real_cols {
            if let Some(cost) = m.cost(row, col) {
                matches.push(MatchedPair { row, col, cost });
                objective += cost;
            }
        }
    }
    matches.sort_unstable_by_key(|p| p.col);
    let refused = (0..m.real_cols)
        .filter(|c| !matches.iter().any(|p| p.col == *c))
        .collect();
    AssignmentResult { matches, refused, objective }
}

/// Scaled benefit of pairing `row` with `col` (auction maximizes benefits).
#[inline]
fn benefit(m: &SparseCostMatrix, big: i64, scale: i64, row: usize, col: usize) -> i64 {
    let cost = if row < m.real_rows { m.cost(row, col).unwrap_or(big) } else { big };
    -cost * scale
}

/// Best and second-best reduced benefit over all columns for one row.
/// Ties prefer the lower column index.
fn best_two(
    m: &SparseCostMatrix,
    big: i64,
    scale: i64,
    row: usize,
    price: &[i64],
) -> (usize, i64, i64) {
    let stored = m.stored_row(row);
    let mut ptr = 0usize;
    let mut best: Option<(i64, usize)> = None;
    let mut second: Option<i64> = None;
    for col in 0..m.n {
        let cost = if ptr < stored.len() && stored[ptr].0 == col {
            let c = stored[ptr].1;
            ptr += 1;
            c
        } else {
            big
        };
        let value = -cost * scale - price[col];
        match best {
            None => best = Some((value, col)),
            Some((bv, _)) if value > bv => {
                second = Some(bv);
                best = Some((value, col));
            }
            Some(_) => {
                if second.is_none_or(|s| value > s) {
                    second = Some(value);
                }
            }
        }
    }
    let (best_value, best_col) = best.expect("matrix has at least one column");
    (best_col, best_value, second.unwrap_or(best_value))
}

/// Checks epsilon-complementary slackness: every assigned row is within
/// `eps` of its best reduced benefit. Debug-build invariant of the auction.
fn eps_cs_holds(
    m: &SparseCostMatrix,
    big: i64,
    scale: i64,
    row_match: &[Option<usize>],
    price: &[i64],
    eps: i64,
) -> bool {
    row_match.iter().enumerate().all(|(row, assigned)| {
        let Some(col) = *assigned else { return true };
        let value = benefit(m, big, scale, row, col) - price[col];
        let best = (0..m.n)
            .map(|c| benefit(m, big, scale, row, c) - price[c])
            .max()
            .unwrap();
        value >= best - eps
    })
}

const BID_CAP: u64 = 50_000_000;

/// Solves the padded problem exactly with a forward auction under epsilon
/// scaling. Costs are integers, so once the final epsilon drops below the
/// reciprocal dimension the assignment is optimal.
pub fn auction_solve(m: &SparseCostMatrix) -> Result<AssignmentResult, AssignmentError> {
    auction_solve_traced(m).map(|(result, _)| result)
}

/// `auction_solve` plus the final column prices, for offline inspection.
pub fn auction_solve_traced(
    m: &SparseCostMatrix,
) -> Result<(AssignmentResult, Vec<i64>), AssignmentError> {
    let n = m.n;
    if n == 0 {
        return Ok((
            AssignmentResult { matches: Vec::new(), refused: Vec::new(), objective: 0 },
            Vec::new(),
        ));
    }
    let scale = n as i64 + 1;
    let big = m.big_cost();
    let mut price = vec![0i64; n];
    let mut eps = (big * scale / 2).max(1);
    let mut bids = 0u64;
    loop {
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut row_match: Vec<Option<usize>> = vec![None; n];
        let mut queue: VecDeque<usize> = (0..n).collect();
        while let Some(row) = queue.pop_front() {
            bids += 1;
            if bids > BID_CAP {
                return Err(AssignmentError::NonTermination { iterations: bids });
            }
            let (col, best_value, second_value) = best_two(m, big, scale, row, &price);
            price[col] += best_value - second_value + eps;
            if let Some(prev) = owner[col].replace(row) {
                row_match[prev] = None;
                queue.push_back(prev);
            }
            row_match[row] = Some(col);
            // per-bid eps-CS witness: the winner lands exactly eps below its
            // second-best reduced benefit
            debug_assert_eq!(benefit(m, big, scale, row, col) - price[col], second_value - eps);
        }
        debug_assert!(eps_cs_holds(m, big, scale, &row_match, &price, eps));
        if eps == 1 {
            return Ok((decode(m, &row_match), price));
        }
        eps = (eps / 5).max(1);
    }
}

/// CSV view of one solved batch for offline inspection: the stored entries
/// with their match state, then the final column prices.
pub fn debug_dump_csv(m: &SparseCostMatrix, result: &AssignmentResult, prices: &[i64]) -> String {
    use std::fmt::Write;
    let mut out = String::from("kind,row,col,cost,matched\n");
    for row in 0..m.real_rows {
        for &(col, cost) in m.stored_row(row) {
            let matched = result.matches.iter().any(|p| p.row == row && p.col == col);
            let _ = writeln!(out, "entry,{row},{col},{cost},{matched}");
        }
    }
    for (col, p) in prices.iter().enumerate() {
        let _ = writeln!(out, "price,,{col},{p},");
    }
    for &col in &result.refused {
        let _ = writeln!(out, "refused,,{col},,");
    }
    out
}

/// Exhaustive optimum for small instances; the oracle the auction is checked
/// against.
pub fn brute_force_lap(m: &SparseCostMatrix) -> Result<AssignmentResult, AssignmentError> {
    const LIMIT: usize = 8;
    let n = m.n;
    if n > LIMIT {
        return Err(AssignmentError::MatrixTooLarge { n, limit: LIMIT });
    }
    if n == 0 {
        return Ok(AssignmentResult { matches: Vec::new(), refused: Vec::new(), objective: 0 });
    }
    let big = m.big_cost();
    let full_cost = |row: usize, col: usize| {
        if row < m.real_rows { m.cost(row, col).unwrap_or(big) } else { big }
    };
    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut assigned = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn search(
        n: usize,
        row: usize,
        total: i64,
        full_cost: &impl Fn(usize, usize) -> i64,
        assigned: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut Option<(i64, Vec<usize>)>,
    ) {
        if row == n {
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                *best = Some((total, assigned.clone()));
            }
            return;
        }
        for col in 0..n {
            if used[col] {
                continue;
            }
            let t = total + full_cost(row, col);
            if best.as_ref().is_some_and(|(b, _)| t >= *b) {
                continue;
            }
            used[col] = true;
            assigned[row] = col;
            search(n, row + 1, t, full_cost, assigned, used, best);
            used[col] = false;
        }
    }
    search(n, 0, 0, &full_cost, &mut assigned, &mut used, &mut best);
    let (_, cols) = best.expect("complete matrix always has a perfect matching");
    let row_match: Vec<Option<usize>> = cols.into_iter().map(Some).collect();
    Ok(decode(m, &row_match))
}

/// Messages crossing the coordinator boundary in the bid-exchange protocol.
/// They carry request indices, opaque slot handles, company tags, and price
/// amounts; vehicle data never leaves its company.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolMessage {
    Bid { round: u64, request: usize, company: Option<u32>, slot: usize, amount: i64 },
    Award { round: u64, request: usize, company: Option<u32>, slot: usize },
    Price { round: u64, slot: usize, amount: i64 },
}

#[derive(Debug)]
pub struct DistributedSolve {
    pub result: AssignmentResult,
    pub log: Vec<ProtocolMessage>,
    pub rounds: u64,
}

/// Per-company candidate for one request: the company's best slot and value,
/// plus its second-best value. This is the only cost-derived data a company
/// reports.
struct CompanyCandidate {
    slot: usize,
    company: Option<u32>,
    best: i64,
    second: Option<i64>,
}

struct CompanyLedger {
    company: Option<u32>,
    /// Global row slots owned by this company, ascending.
    slots: Vec<usize>,
}

impl CompanyLedger {
    /// Best and second-best reduced value over this company's slots for one
    /// request column, under the broadcast prices.
    fn candidate(
        &self,
        m: &SparseCostMatrix,
        big: i64,
        scale: i64,
        col: usize,
        price: &[i64],
    ) -> Option<CompanyCandidate> {
        let mut best: Option<(i64, usize)> = None;
        let mut second: Option<i64> = None;
        for &slot in &self.slots {
            let value = benefit(m, big, scale, slot, col) - price[slot];
            match best {
                None => best = Some((value, slot)),
                Some((bv, _)) if value > bv => {
                    second = Some(bv);
                    best = Some((value, slot));
                }
                Some(_) => {
                    if second.is_none_or(|s| value > s) {
                        second = Some(value);
                    }
                }
            }
        }
        best.map(|(value, slot)| CompanyCandidate {
            slot,
            company: self.company,
            best: value,
            second,
        })
    }
}

const ROUND_CAP: u64 = 2_000_000;

/// Solves the padded problem through the multi-company bid exchange.
///
/// Requests bid for vehicle slots: each round, every unassigned request asks
/// the companies for their best two reduced values, merges them, and submits
/// one bid (the margin between its two best options plus epsilon). The
/// coordinator awards each contested slot to the highest bid and broadcasts
/// the price. The epsilon regime matches `auction_solve`, so the final
/// objective is the same.
pub fn distributed_auction_solve(
    m: &SparseCostMatrix,
    row_company: &[u32],
) -> Result<DistributedSolve, AssignmentError> {
    if row_company.len() != m.real_rows {
        return Err(AssignmentError::MalformedMatrix(format!(
            "company tags cover {} rows, matrix has {} real rows",
            row_company.len(),
            m.real_rows
        )));
    }
    let n = m.n;
    if n == 0 {
        return Ok(DistributedSolve {
            result: AssignmentResult { matches: Vec::new(), refused: Vec::new(), objective: 0 },
            log: Vec::new(),
            rounds: 0,
        });
    }
    let scale = n as i64 + 1;
    let big = m.big_cost();

    let mut companies: Vec<u32> = row_company.to_vec();
    companies.sort_unstable();
    companies.dedup();
    let mut ledgers: Vec<CompanyLedger> = companies
        .iter()
        .map(|&c| CompanyLedger {
            company: Some(c),
            slots: (0..m.real_rows).filter(|&r| row_company[r] == c).collect(),
        })
        .collect();
    if m.artificial_rows() > 0 {
        // the coordinator itself owns the artificial slots
        ledgers.push(CompanyLedger { company: None, slots: (m.real_rows..n).collect() });
    }

    let mut price = vec![0i64; n];
    let mut log = Vec::new();
    let mut rounds = 0u64;
    let mut eps = (big * scale / 2).max(1);
    loop {
        let mut col_match: Vec<Option<usize>> = vec![None; n];
        let mut slot_owner: Vec<Option<usize>> = vec![None; n];
        while col_match.iter().any(|c| c.is_none()) {
            rounds += 1;
            if rounds > ROUND_CAP {
                return Err(AssignmentError::NonTermination { iterations: rounds });
            }
            // every unassigned request computes one bid from its two best
            // options across all companies
            let mut bids: Vec<(usize, usize, Option<u32>, i64)> = Vec::new();
            for col in 0..n {
                if col_match[col].is_some() {
                    continue;
                }
                let mut best: Option<CompanyCandidate> = None;
                let mut second: Option<i64> = None;
                for ledger in &ledgers {
                    let Some(cand) = ledger.candidate(m, big, scale, col, &price) else {
                        continue;
                    };
                    match &best {
                        None => {
                            second = cand.second;
                            best = Some(cand);
                        }
                        Some(b) if cand.best > b.best => {
                            second = second.max(Some(b.best)).max(cand.second);
                            best = Some(cand);
                        }
                        Some(_) => {
                            second = second.max(Some(cand.best));
                        }
                    }
                }
                let best = best.expect("at least one ledger covers every column");
                let margin = best.best - second.unwrap_or(best.best);
                let amount = price[best.slot] + margin + eps;
                log.push(ProtocolMessage::Bid {
                    round: rounds,
                    request: col,
                    company: best.company,
                    slot: best.slot,
                    amount,
                });
                bids.push((col, best.slot, best.company, amount));
            }
            // the coordinator awards each contested slot to the highest bid;
            // ties go to the lowest request index
            bids.sort_by(|a, b| a.1.cmp(&b.1).then(b.3.cmp(&a.3)).then(a.0.cmp(&b.0)));
            let mut k = 0;
            while k < bids.len() {
                let (col, slot, company, amount) = bids[k];
                // skip the losing bids on the same slot
                let mut next = k + 1;
                while next < bids.len() && bids[next].1 == slot {
                    next += 1;
                }
                price[slot] = amount;
                log.push(ProtocolMessage::Price { round: rounds, slot, amount });
                if let Some(prev) = slot_owner[slot].replace(col) {
                    col_match[prev] = None;
                }
                col_match[col] = Some(slot);
                log.push(ProtocolMessage::Award { round: rounds, request: col, company, slot });
                k = next;
            }
        }
        if eps == 1 {
            let mut row_match: Vec<Option<usize>> = vec![None; n];
            for (col, slot) in col_match.iter().enumerate() {
                row_match[slot.expect("all columns assigned")] = Some(col);
            }
            return Ok(DistributedSolve { result: decode(m, &row_match), log, rounds });
        }
        eps = (eps / 5).max(1);
    }
}

/// One rebalancing order: an idle vehicle sent toward a refused request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RebalanceMatch {
    pub vehicle: VehicleId,
    pub request: RequestId,
    pub reach_time: Secs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalanceOutcome {
    pub matches: Vec<RebalanceMatch>,
    /// Requests no idle vehicle could be routed to; final refusals.
    pub unserved: Vec<RequestId>,
}

/// One-to-one matching of idle vehicles to refused requests minimizing the
/// total time to reach the request origins.
pub fn rebalance_assign(
    idle: &[(VehicleId, Location)],
    refused: &[(RequestId, Location)],
    net: &Network,
) -> Result<RebalanceOutcome, AssignmentError> {
    if idle.is_empty() || refused.is_empty() {
        return Ok(RebalanceOutcome {
            matches: Vec::new(),
            unserved: refused.iter().map(|&(id, _)| id).collect(),
        });
    }
    let mut entries = Vec::new();
    for (vi, (_, vloc)) in idle.iter().enumerate() {
        for (rj, (_, rloc)) in refused.iter().enumerate() {
            if let Ok(t) = shortest_path_time(net, vloc.node, rloc.node) {
                entries.push(CostEntry { row: vi, col: rj, cost: t.round() as i64 });
            }
        }
    }
    let matrix = pad_symmetric(&RectCosts { rows: idle.len(), cols: refused.len(), entries })?;
    let solved = auction_solve(&matrix)?;
    let matches = solved
        .matches
        .iter()
        .map(|p| RebalanceMatch {
            vehicle: idle[p.row].0,
            request: refused[p.col].0,
            reach_time: p.cost as Secs,
        })
        .collect();
    let unserved = solved.refused.iter().map(|&c| refused[c].0).collect();
    Ok(RebalanceOutcome { matches, unserved })
}
