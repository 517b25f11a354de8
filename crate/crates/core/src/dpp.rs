//! Value iteration for the dynamic programming principle of the game,
//!
//! `u(x) = (alpha/2) (max_{B_eps(x)} u + min_{B_eps(x)} u) + beta mean_{B_eps(x)} u`,
//!
//! on a uniform grid. Balls are closed grid balls: all nodes within
//! distance `eps` of `x`, including `x`. Nodes outside the domain within
//! `eps` of an interior node form the boundary strip and carry the payoff.

use std::io::Write;
use std::sync::Arc;

use crate::domain::Domain;
use crate::game::{estimate_value, GameParams, GameView, Payoff, Player, ValueEstimate};
use crate::strategy::Strategy;
use crate::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 1_000_000;
/// Default convergence tolerance relative to `max F - min F`.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Strip,
    Exterior,
}

impl NodeKind {
    pub fn label(self) -> &'static str {
        match self {
            NodeKind::Interior => "interior",
            NodeKind::Strip => "strip",
            NodeKind::Exterior => "exterior",
        }
    }
}

/// Uniform lattice `lo + h * index`; the last axis is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub h: f64,
    pub shape: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    fn new(lo: Vec<f64>, hi: &[f64], h: f64) -> Self {
        let shape: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| ((b - a) / h).ceil() as usize + 1)
            .collect();
        let mut strides = vec![1; shape.len()];
        for d in (0..shape.len().saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * shape[d + 1];
        }
        Grid {
            lo,
            h,
            shape,
            strides,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let i = lin / s;
                lin %= s;
                i
            })
            .collect()
    }

    pub fn coords(&self, lin: usize) -> Vec<f64> {
        self.multi_index(lin)
            .iter()
            .zip(&self.lo)
            .map(|(&i, l)| l + i as f64 * self.h)
            .collect()
    }
}

/// A row of the closed grid ball: a shift of the first `n - 1` indices and
/// the half-width along the last axis.
#[derive(Debug, Clone, Copy)]
struct RowOffset {
    shift: isize,
    half_width: usize,
}

fn ball_rows(grid: &Grid, radius: f64) -> Vec<RowOffset> {
    let n = grid.dim();
    let r2 = radius * radius * (1.0 + 1e-12);
    let reach = radius.floor() as isize;
    let mut rows = Vec::new();
    let mut o = vec![-reach; n - 1];
    loop {
        let d2: f64 = o.iter().map(|&v| (v * v) as f64).sum();
        if d2 <= r2 {
            let w = (r2 - d2).sqrt().floor() as usize;
            let shift = o
                .iter()
                .zip(&grid.strides)
                .map(|(&v, &s)| v * s as isize)
                .sum();
            rows.push(RowOffset {
                shift,
                half_width: w,
            });
        }
        // Odometer over the first n - 1 axes.
        let mut d = 0;
        loop {
            if d == n - 1 {
                return rows;
            }
            o[d] += 1;
            if o[d] <= reach {
                break;
            }
            o[d] = -reach;
            d += 1;
        }
    }
}

/// Converged (or intermediate) grid solution of the DPP.
#[derive(Debug, Clone)]
pub struct GridValueField {
    pub grid: Grid,
    pub kinds: Vec<NodeKind>,
    pub values: Vec<f64>,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    /// Sup-norm update of the last sweep.
    pub residual: f64,
    /// Sup-norm update of every sweep.
    pub history: Vec<f64>,
    rows: Vec<RowOffset>,
    ball_size: usize,
    min_f: f64,
    max_f: f64,
}

impl GridValueField {
    /// Grid covering the bounding box enlarged by `eps`, with nodes
    /// classified and strip nodes set to the payoff. Interior nodes start
    /// at `0` clamped into `[min F, max F]`.
    pub fn new(params: &GameParams, domain: &Domain, payoff: &Payoff, h: f64) -> Result<Self> {
        let eps = params.eps;
        if !(h > 0.0 && h <= eps / 4.0) {
            return Err(Error::param(format!(
                "grid spacing h = {h} must satisfy 0 < h <= eps/4"
            )));
        }
        if domain.dim() != params.n {
            return Err(Error::param(
                "domain dimension does not match the parameters",
            ));
        }
        let (lo, hi) = domain.bounding_box();
        let lo: Vec<f64> = lo.iter().map(|v| v - eps - h).collect();
        let hi: Vec<f64> = hi.iter().map(|v| v + eps + h).collect();
        let grid = Grid::new(lo, &hi, h);
        let total = grid.len();
        let mut kinds: Vec<NodeKind> = (0..total)
            .map(|i| {
                if domain.contains(&grid.coords(i)) {
                    NodeKind::Interior
                } else {
                    NodeKind::Exterior
                }
            })
            .collect();
        let rows = ball_rows(&grid, eps / h);
        let last = grid.shape[grid.dim() - 1] as isize;
        for i in 0..total {
            if kinds[i] != NodeKind::Interior {
                continue;
            }
            let col = (i % last as usize) as isize;
            for row in &rows {
                let w = row.half_width as isize;
                if col - w < 0 || col + w >= last {
                    return Err(Error::Invariant("grid ball leaves the grid".into()));
                }
                for c in -w..=w {
                    let j = (i as isize + row.shift + c) as usize;
                    if kinds[j] == NodeKind::Exterior {
                        kinds[j] = NodeKind::Strip;
                    }
                }
            }
        }
        if !kinds.contains(&NodeKind::Interior) {
            return Err(Error::param("grid has no interior node; refine h"));
        }
        let mut values = vec![f64::NAN; total];
        let (mut min_f, mut max_f) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..total {
            if kinds[i] == NodeKind::Strip {
                let v = payoff.eval(&grid.coords(i))?;
                values[i] = v;
                min_f = min_f.min(v);
                max_f = max_f.max(v);
            }
        }
        let start = 0f64.clamp(min_f, max_f);
        for i in 0..total {
            if kinds[i] == NodeKind::Interior {
                values[i] = start;
            }
        }
        let ball_size = rows.iter().map(|r| 2 * r.half_width + 1).sum();
        Ok(GridValueField {
            grid,
            kinds,
            values,
            eps,
            alpha: params.alpha,
            beta: params.beta,
            iterations: 0,
            residual: f64::INFINITY,
            history: Vec::new(),
            rows,
            ball_size,
            min_f,
            max_f,
        })
    }

    pub fn payoff_range(&self) -> (f64, f64) {
        (self.min_f, self.max_f)
    }

    /// Number of nodes in every closed grid ball.
    pub fn ball_size(&self) -> usize {
        self.ball_size
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == NodeKind::Interior)
            .map(|(i, _)| i)
    }

    /// One synchronous sweep of the DPP operator applied to `values`;
    /// strip and exterior entries are copied through.
    pub fn apply_operator(&self, values: &[f64]) -> Vec<f64> {
        let total = values.len();
        let last = self.grid.shape[self.grid.dim() - 1];
        let width = self.rows.iter().map(|r| r.half_width).max().unwrap_or(0);
        // Sliding windows along the last axis, indexed [w][node].
        let mut wmax = vec![vec![f64::NEG_INFINITY; total]; width + 1];
        let mut wmin = vec![vec![f64::INFINITY; total]; width + 1];
        let mut wsum = vec![vec![0.0; total]; width + 1];
        let valued = |i: usize| self.kinds[i] != NodeKind::Exterior;
        for i in 0..total {
            if valued(i) {
                wmax[0][i] = values[i];
                wmin[0][i] = values[i];
                wsum[0][i] = values[i];
            }
        }
        for w in 1..=width {
            for start in (0..total).step_by(last) {
                for c in 0..last {
                    let i = start + c;
                    let (lo, hi) = (
                        c.checked_sub(1).map(|c| start + c),
                        (c + 1 < last).then_some(i + 1),
                    );
                    let (mut mx, mut mn) = if w == 1 {
                        (wmax[0][i], wmin[0][i])
                    } else {
                        (f64::NEG_INFINITY, f64::INFINITY)
                    };
                    for j in [lo, hi].into_iter().flatten() {
                        mx = mx.max(wmax[w - 1][j]);
                        mn = mn.min(wmin[w - 1][j]);
                    }
                    wmax[w][i] = mx;
                    wmin[w][i] = mn;
                    let mut s = wsum[w - 1][i];
                    if c >= w {
                        s += wsum[0][i - w];
                    }
                    if c + w < last {
                        s += wsum[0][i + w];
                    }
                    wsum[w][i] = s;
                }
            }
        }
        let mut out = values.to_vec();
        let inv = 1.0 / self.ball_size as f64;
        for i in self.interior_nodes() {
            let (mut mx, mut mn, mut s) = (f64::NEG_INFINITY, f64::INFINITY, 0.0);
            for row in &self.rows {
                let j = (i as isize + row.shift) as usize;
                let w = row.half_width;
                mx = mx.max(wmax[w][j]);
                mn = mn.min(wmin[w][j]);
                s += wsum[w][j];
            }
            out[i] = 0.5 * self.alpha * (mx + mn) + self.beta * s * inv;
        }
        out
    }

    /// Sup-norm of `T u - u` over interior nodes.
    pub fn dpp_residual(&self) -> f64 {
        let next = self.apply_operator(&self.values);
        self.interior_nodes()
            .map(|i| (next[i] - self.values[i]).abs())
            .fold(0.0, f64::max)
    }

    /// Multilinear interpolation at `x`; all corners of the enclosing cell
    /// must carry values.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let n = self.grid.dim();
        if x.len() != n {
            return Err(Error::param("point dimension does not match the grid"));
        }
        let mut base = Vec::with_capacity(n);
        let mut frac = Vec::with_capacity(n);
        for d in 0..n {
            let t = (x[d] - self.grid.lo[d]) / self.grid.h;
            let i = t.floor();
            if i < 0.0 || i as usize + 1 >= self.grid.shape[d] {
                return Err(Error::param("point lies outside the grid"));
            }
            base.push(i as usize);
            frac.push(t - i);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut idx = base.clone();
            let mut w = 1.0;
            for d in 0..n {
                if corner >> d & 1 == 1 {
                    idx[d] += 1;
                    w *= frac[d];
                } else {
                    w *= 1.0 - frac[d];
                }
            }
            if w == 0.0 {
                continue;
            }
            let v = self.values[self.grid.index(&idx)];
            if v.is_nan() {
                return Err(Error::param("interpolation cell touches an exterior node"));
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// CSV with columns `x0,..,x{n-1},kind,value` for every valued node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.grid.dim();
        let header: Vec<String> = (0..n).map(|d| format!("x{d}")).collect();
        writeln!(w, "{},kind,value", header.join(","))?;
        for (i, k) in self.kinds.iter().enumerate() {
            if *k == NodeKind::Exterior {
                continue;
            }
            let c: Vec<String> = self.grid.coords(i).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{}", c.join(","), k.label(), self.values[i])?;
        }
        Ok(())
    }
}

/// Jacobi iteration from the initial field until the sup-norm update is at
/// most `tol` (default `1e-9 (max F - min F)`).
pub fn solve_dpp(
    params: &GameParams,
    domain: &Domain,
    payoff: &Payoff,
    h: f64,
    tol: Option<f64>,
    max_iters: usize,
) -> Result<GridValueField> {
    let mut field = GridValueField::new(params, domain, payoff, h)?;
    let tol = tol.unwrap_or(DEFAULT_RELATIVE_TOL * (field.max_f - field.min_f));
    if !(tol >= 0.0) {
        return Err(Error::param("tolerance must be nonnegative"));
    }
    for it in 1..=max_iters {
        let next = field.apply_operator(&field.values);
        let update = field
            .interior_nodes()
            .map(|i| (next[i] - field.values[i]).abs())
            .fold(0.0, f64::max);
        field.values = next;
        field.history.push(update);
        field.iterations = it;
        field.residual = update;
        if update <= tol {
            return Ok(field);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        residual: field.residual,
        history: field.history,
    })
}

/// Moves to the grid node of largest (Player 1) or smallest (Player 2)
/// value strictly inside the `eps`-ball. Ties go to the first node in grid
/// order; with no candidate it stays put.
///
/// After a greedy move the position is a grid node, so nodes at distance
/// exactly `eps` are common. Their membership would otherwise be decided
/// by rounding of the node coordinates, differently for the two players;
/// nodes within `1e-6 h` of the sphere are therefore always excluded.
#[derive(Debug, Clone)]
pub struct GreedyStrategy {
    field: Arc<GridValueField>,
    maximize: bool,
}

impl GreedyStrategy {
    pub fn maximizer(field: Arc<GridValueField>) -> Self {
        GreedyStrategy {
            field,
            maximize: true,
        }
    }

    pub fn minimizer(field: Arc<GridValueField>) -> Self {
        GreedyStrategy {
            field,
            maximize: false,
        }
    }
}

impl Strategy for GreedyStrategy {
    fn name(&self) -> &str {
        if self.maximize {
            "greedy-max"
        } else {
            "greedy-min"
        }
    }

    fn target(&mut self, _me: Player, view: &GameView<'_>) -> Result<Vec<f64>> {
        let f = &self.field;
        let g = &f.grid;
        let x = view.current();
        let eps = view.params.eps;
        let reach = eps - 1e-6 * g.h;
        let n = g.dim();
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for d in 0..n {
            let a = ((x[d] - eps - g.lo[d]) / g.h).floor().max(0.0) as usize;
            let b = (((x[d] + eps - g.lo[d]) / g.h).ceil().max(0.0) as usize).min(g.shape[d] - 1);
            lo.push(a);
            hi.push(b);
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut idx = lo.clone();
        'outer: loop {
            let lin = g.index(&idx);
            if f.kinds[lin] != NodeKind::Exterior {
                let p = g.coords(lin);
                if crate::point::dist(&p, x) < reach {
                    let v = f.values[lin];
                    let better = match &best {
                        None => true,
                        Some((b, _)) => {
                            if self.maximize {
                                v > *b
                            } else {
                                v < *b
                            }
                        }
                    };
                    if better {
                        best = Some((v, p));
                    }
                }
            }
            let mut d = n;
            loop {
                if d == 0 {
                    break 'outer;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] <= hi[d] {
                    break;
                }
                idx[d] = lo[d];
            }
        }
        Ok(best.map(|(_, p)| p).unwrap_or_else(|| x.to_vec()))
    }

    fn clone_box(&self) -> Box<dyn Strategy> {
        Box::new(self.clone())
    }
}

#[derive(Debug, Clone)]
pub struct DppComparison {
    pub mc: ValueEstimate,
    pub dpp: f64,
    /// `|mc - dpp|`.
    pub gap: f64,
    pub field: Arc<GridValueField>,
}

/// Solves the DPP, reads the value at `x0` by interpolation and compares it
/// with the Monte Carlo value of the game played by the two greedy
/// strategies of the converged field.
pub fn compare_mc_vs_dpp(
    params: &GameParams,
    domain: &Domain,
    payoff: &Payoff,
    x0: &[f64],
    episodes: u64,
    h: f64,
    seed: u64,
) -> Result<DppComparison> {
    let field = Arc::new(solve_dpp(
        params,
        domain,
        payoff,
        h,
        None,
        DEFAULT_MAX_ITERS,
    )?);
    let dpp = field.interpolate(x0)?;
    let s1 = GreedyStrategy::maximizer(field.clone());
    let s2 = GreedyStrategy::minimizer(field.clone());
    let mc = estimate_value(params, domain, x0, &s1, &s2, payoff, episodes, seed, None)?;
    Ok(DppComparison {
        mc,
        dpp,
        gap: (mc.mean - dpp).abs(),
        field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_rows_count_nodes() {
        let grid = Grid::new(vec![0.0, 0.0], &[1.0, 1.0], 0.1);
        let rows = ball_rows(&grid, 2.0);
        let size: usize = rows.iter().map(|r| 2 * r.half_width + 1).sum();
        // Lattice points with x^2 + y^2 <= 4.
        assert_eq!(size, 13);
        let line = Grid::new(vec![0.0], &[1.0], 0.1);
        let rows = ball_rows(&line, 4.0);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].half_width, 4);
    }

    #[test]
    fn grid_indexing_round_trips() {
        let grid = Grid::new(vec![-1.0, 0.0, 2.0], &[1.0, 1.0, 3.0], 0.25);
        for lin in [0, 7, grid.len() - 1] {
            assert_eq!(grid.index(&grid.multi_index(lin)), lin);
        }
    }
}
