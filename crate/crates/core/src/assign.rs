// Copyright 2026 The conjleak Authors
// SPDX-License-Identifier: Apache-2.0

//! Assignment solvers: an exact rectangular linear assignment solver and an
//! iterative free-set refinement for objectives with pairwise terms.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::numeric::StableSum;
use crate::rng;

/// Costs of placing token `col` on candidate `row`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param("data", alloc::format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        let m = Self { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::param("rows", "ragged matrix"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(i) => Err(Error::NonFiniteCost { row: i / self.cols.max(1), col: i % self.cols.max(1) }),
            None => Ok(()),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Add `other` entrywise.
    pub fn add_assign(&mut self, other: &CostMatrix) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::param("other", "matrix shapes differ"));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        self.check_finite()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// An injective token → candidate map. Candidates at or beyond `real_rows`
/// are virtual padding and stand for "unrecovered".
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub token_to_candidate: Vec<usize>,
    pub objective: f64,
    pub real_rows: usize,
}

impl Assignment {
    /// Real candidate of token `col`, if any.
    pub fn candidate(&self, col: usize) -> Option<usize> {
        let r = self.token_to_candidate[col];
        (r < self.real_rows).then_some(r)
    }
}

/// Sum of the selected linear entries, in token order.
pub fn linear_objective(costs: &CostMatrix, token_to_candidate: &[usize]) -> f64 {
    let mut s = StableSum::new();
    for (c, &r) in token_to_candidate.iter().enumerate() {
        s.add(costs.get(r, c));
    }
    s.value()
}

/// Minimum-cost assignment of `n` left items to distinct right items out of
/// `m >= n`; `cost[i * m + j]` is the cost of left `i` on right `j`. Shortest
/// augmenting path form of the Hungarian method, `O(n^2 m)`.
fn hungarian(n: usize, m: usize, cost: &[f64]) -> Vec<usize> {
    debug_assert!(n <= m);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let row = &cost[(i0 - 1) * m..i0 * m];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Exact minimum-cost injective assignment of every column to a row.
pub fn solve_lap(costs: &CostMatrix) -> Result<Assignment> {
    if costs.cols > costs.rows {
        return Err(Error::Infeasible { rows: costs.rows, cols: costs.cols });
    }
    let (t, m) = (costs.cols, costs.rows);
    let mut token_major = vec![0.0; t * m];
    for (r, row) in costs.data.chunks_exact(t.max(1)).enumerate().take(m) {
        for (c, &x) in row.iter().enumerate() {
            token_major[c * m + r] = x;
        }
    }
    let assign = hungarian(t, m, &token_major);
    Ok(Assignment { objective: linear_objective(costs, &assign), token_to_candidate: assign, real_rows: costs.rows })
}

/// Cost of the virtual rows appended when there are fewer candidates than
/// tokens.
pub fn padding_cost(costs: &CostMatrix) -> f64 {
    if costs.rows == 0 || costs.cols == 0 {
        1.0
    } else {
        costs.max_entry() + 1.0
    }
}

/// Append virtual rows of uniform cost `padding_cost` until rows ≥ cols.
pub fn pad_rows(costs: &CostMatrix) -> CostMatrix {
    if costs.rows >= costs.cols {
        return costs.clone();
    }
    let pad = padding_cost(costs);
    let mut data = costs.data.clone();
    data.resize(costs.cols * costs.cols, pad);
    CostMatrix { rows: costs.cols, cols: costs.cols, data }
}

/// [`solve_lap`] that pads with virtual candidates instead of failing.
pub fn solve_lap_padded(costs: &CostMatrix) -> Result<Assignment> {
    let mut a = solve_lap(&pad_rows(costs))?;
    a.real_rows = costs.rows;
    Ok(a)
}

/// Pairwise term of a quadratic assignment objective.
pub trait QuadraticCost {
    /// Cost of token `j` on candidate `g` jointly with token `k` on `h`.
    fn pair(&mut self, g: usize, h: usize, j: usize, k: usize) -> f64;

    /// For each free token, the sum over fixed `(token, candidate)` pairs of
    /// the pairwise cost, for every candidate in `0..rows`. Implementors can
    /// override this with a faster equivalent.
    fn round_costs(&mut self, free: &[usize], fixed: &[(usize, usize)], rows: usize) -> Vec<Vec<f64>> {
        free.iter()
            .map(|&j| {
                (0..rows)
                    .map(|g| {
                        let mut s = StableSum::new();
                        for &(k, h) in fixed {
                            s.add(self.pair(g, h, j, k));
                        }
                        s.value()
                    })
                    .collect()
            })
            .collect()
    }

    /// Sum over unordered token pairs of the pairwise cost.
    fn total(&mut self, pairs: &[(usize, usize)]) -> f64 {
        let mut s = StableSum::new();
        for (a, &(j, g)) in pairs.iter().enumerate() {
            for &(k, h) in &pairs[a + 1..] {
                s.add(self.pair(g, h, j, k));
            }
        }
        s.value()
    }
}

/// Pairwise term that is identically zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoQuadratic;

impl QuadraticCost for NoQuadratic {
    fn pair(&mut self, _: usize, _: usize, _: usize, _: usize) -> f64 {
        0.0
    }

    fn round_costs(&mut self, free: &[usize], _: &[(usize, usize)], rows: usize) -> Vec<Vec<f64>> {
        vec![vec![0.0; rows]; free.len()]
    }

    fn total(&mut self, _: &[(usize, usize)]) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QapParams {
    pub p_free: f64,
    pub n_iter: usize,
    pub seed: u64,
}

impl QapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_free > 0.0 && self.p_free <= 1.0) {
            return Err(Error::param("p_free", "must lie in (0, 1]"));
        }
        if self.n_iter < 1 {
            return Err(Error::param("n_iter", "must be at least 1"));
        }
        Ok(())
    }

    /// Tokens re-solved per round out of `cols`.
    pub fn free_count(&self, cols: usize) -> usize {
        let k = libm::ceil(self.p_free * cols as f64) as usize;
        k.clamp(1.min(cols), cols)
    }
}

/// One refinement round, as seen by an observer.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub index: usize,
    /// Re-solved tokens, ascending.
    pub free: Vec<usize>,
    pub before: Vec<usize>,
    pub after: Vec<usize>,
}

/// Full objective: linear entries plus the pairwise term over real
/// candidates, counting each unordered token pair once.
pub fn qap_objective<Q: QuadraticCost + ?Sized>(linear: &CostMatrix, quadratic: &mut Q, token_to_candidate: &[usize], real_rows: usize) -> f64 {
    let pad = padding_cost(linear);
    let mut s = StableSum::new();
    let mut real = Vec::new();
    for (j, &g) in token_to_candidate.iter().enumerate() {
        if g < real_rows {
            s.add(linear.get(g, j));
            real.push((j, g));
        } else {
            s.add(pad);
        }
    }
    s.add(quadratic.total(&real));
    s.value()
}

pub fn solve_iterative_qap<Q: QuadraticCost + ?Sized>(linear: &CostMatrix, quadratic: &mut Q, params: &QapParams) -> Result<Assignment> {
    solve_iterative_qap_observed(linear, quadratic, params, |_| {})
}

/// [`solve_iterative_qap`] reporting every round to `observer`.
///
/// The initial assignment solves the linear part alone. Each round samples
/// `⌈p_free·cols⌉` tokens uniformly without replacement, freezes the others,
/// and re-solves the free tokens exactly over the candidates the frozen
/// tokens leave unused, each cost being the linear entry plus the pairwise
/// costs against every frozen token.
pub fn solve_iterative_qap_observed<Q: QuadraticCost + ?Sized>(
    linear: &CostMatrix,
    quadratic: &mut Q,
    params: &QapParams,
    mut observer: impl FnMut(&Round),
) -> Result<Assignment> {
    params.validate()?;
    let real_rows = linear.rows;
    let cols = linear.cols;
    let padded = pad_rows(linear);
    let rows = padded.rows;
    let mut current = solve_lap(&padded)?.token_to_candidate;
    let mut r = rng::seeded(params.seed);
    let pad = padding_cost(linear);
    let n_free = params.free_count(cols);

    for round in 0..params.n_iter {
        if cols == 0 {
            break;
        }
        let mut free: Vec<usize> = index::sample(&mut r, cols, n_free).into_vec();
        free.sort_unstable();
        let mut is_free = vec![false; cols];
        for &j in &free {
            is_free[j] = true;
        }
        let mut taken = vec![false; rows];
        let mut fixed = Vec::with_capacity(cols - free.len());
        for j in 0..cols {
            if !is_free[j] {
                taken[current[j]] = true;
                if current[j] < real_rows {
                    fixed.push((j, current[j]));
                }
            }
        }
        let open: Vec<usize> = (0..rows).filter(|&g| !taken[g]).collect();
        let extra = quadratic.round_costs(&free, &fixed, real_rows);
        let sub = CostMatrix::from_fn(open.len(), free.len(), |a, b| {
            let g = open[a];
            if g < real_rows {
                padded.get(g, free[b]) + extra[b][g]
            } else {
                pad
            }
        })?;
        let solved = solve_lap(&sub)?;
        let before = current.clone();
        for (b, &j) in free.iter().enumerate() {
            current[j] = open[solved.token_to_candidate[b]];
        }
        observer(&Round { index: round, free, before, after: current.clone() });
    }
    let objective = qap_objective(linear, quadratic, &current, real_rows);
    Ok(Assignment { token_to_candidate: current, objective, real_rows })
}
