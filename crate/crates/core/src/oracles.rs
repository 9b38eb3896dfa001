//! Independent ground truth for the solver: POCS cycles, best-approximation
//! pairs, central finite differences, the cycle residual and the
//! zero-inclusion certificate.

use crate::error::{dim_err, Error, Result};
use crate::sets::{BoxSet, ConvexSet};
use crate::space::{norm, BlockVector, PrimalDualPoint};
use crate::splitting::SplittingContext;

/// `(x̄_1, …, x̄_m)` with `x̄_i = P_{K_i}(x̄_{i−1})`, indices mod `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTuple {
    pub points: Vec<Vec<f64>>,
}

impl CycleTuple {
    /// `max_i ‖x̄_i − P_{K_i}(x̄_{i−1})‖`.
    pub fn defect(&self, sets: &[ConvexSet]) -> Result<f64> {
        let m = self.points.len();
        if sets.len() != m {
            return Err(dim_err(format!("{} sets for a {m}-tuple", sets.len())));
        }
        let mut worst = 0.0f64;
        for i in 0..m {
            let prev = &self.points[(i + m - 1) % m];
            let p = sets[i].project(prev)?;
            worst = worst.max(distance(&self.points[i], &p));
        }
        Ok(worst)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn common_dim(sets: &[ConvexSet]) -> Result<usize> {
    let d = sets.first().map(ConvexSet::dim).ok_or_else(|| dim_err("empty set list"))?;
    if sets.iter().any(|s| s.dim() != d) {
        return Err(dim_err("sets live in different spaces"));
    }
    Ok(d)
}

/// Cyclic projections `x ← P_{K_m}(…P_{K_1}(x)…)` until two successive
/// sweeps move the tuple by less than `tol`. At least one set should be
/// bounded, otherwise the sweep may drift forever.
pub fn pocs_cycle(sets: &[ConvexSet], start: &[f64], max_iters: usize, tol: f64) -> Result<CycleTuple> {
    let m = sets.len();
    if m < 2 {
        return Err(Error::InvalidParameter(format!("a cycle needs m ≥ 2 sets, got {m}")));
    }
    let d = common_dim(sets)?;
    if start.len() != d {
        return Err(dim_err(format!("start has length {}, sets have dimension {d}", start.len())));
    }
    let mut points = vec![vec![0.0; d]; m];
    let mut next = points.clone();
    let mut last = start.to_vec();
    let mut displacement = f64::INFINITY;
    for sweep in 0..max_iters {
        for i in 0..m {
            let (before, rest) = next.split_at_mut(i);
            let input = if i == 0 { &last } else { &before[i - 1] };
            sets[i].project_into(input, &mut rest[0]);
        }
        displacement = next
            .iter()
            .zip(&points)
            .map(|(a, b)| distance(a, b))
            .sum::<f64>();
        std::mem::swap(&mut points, &mut next);
        last.copy_from_slice(&points[m - 1]);
        if sweep > 0 && displacement < tol {
            return Ok(CycleTuple { points });
        }
    }
    Err(Error::Budget {
        iterations: max_iters,
        last_displacement: displacement,
    })
}

/// Alternating projections between two sets; `‖x̄_1 − x̄_2‖ = d(K_1, K_2)`
/// at the limit.
pub fn best_approximation_pair(k1: &ConvexSet, k2: &ConvexSet, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let start = vec![0.0; k1.dim()];
    let sets = [k1.clone(), k2.clone()];
    let mut t = pocs_cycle(&sets, &start, 10_000_000, tol)?;
    let x2 = t.points.pop().expect("two points");
    let x1 = t.points.pop().expect("two points");
    Ok((x1, x2))
}

/// Closed form `d(A, B) = (Σ_k max(0, gap_k)²)^{1/2}` for two boxes.
pub fn box_distance(a: &BoxSet, b: &BoxSet) -> Result<f64> {
    if a.lower().len() != b.lower().len() {
        return Err(dim_err("boxes of different dimension"));
    }
    let mut s = 0.0;
    for k in 0..a.lower().len() {
        let gap = (b.lower()[k] - a.upper()[k]).max(a.lower()[k] - b.upper()[k]).max(0.0);
        s += gap * gap;
    }
    Ok(s.sqrt())
}

/// The intersection of boxes is the box `[max lower, min upper]`; it is
/// empty iff that interval is empty in some coordinate.
pub fn boxes_intersect(boxes: &[BoxSet]) -> bool {
    let Some(first) = boxes.first() else {
        return true;
    };
    (0..first.lower().len()).all(|k| {
        let lo = boxes.iter().map(|b| b.lower()[k]).fold(f64::NEG_INFINITY, f64::max);
        let hi = boxes.iter().map(|b| b.upper()[k]).fold(f64::INFINITY, f64::min);
        lo <= hi
    })
}

/// Central differences of `cost` with respect to the coordinates of block `i`.
pub fn finite_difference_gradient(
    cost: impl Fn(&BlockVector) -> f64,
    x: &BlockVector,
    i: usize,
    step: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    if i >= x.player_count() {
        return Err(dim_err(format!("player {i} out of range")));
    }
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(x.block(i).len());
    for k in 0..x.block(i).len() {
        let orig = x.block(i)[k];
        probe.block_mut(i)[k] = orig + step;
        let plus = cost(&probe);
        probe.block_mut(i)[k] = orig - step;
        let minus = cost(&probe);
        probe.block_mut(i)[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Domain(format!("cost is not finite near coordinate {k} of player {i}")));
        }
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}

/// `Σ_i ‖x_i − P_{K_i}(x_{i−1})‖` with `x_0 ≡ x_m`.
pub fn cycle_residual(sets: &[ConvexSet], x: &BlockVector) -> Result<f64> {
    let m = x.player_count();
    if sets.len() != m {
        return Err(dim_err(format!("{} sets for {m} players", sets.len())));
    }
    let mut total = 0.0;
    let mut buf = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let prev = x.block((i + m - 1) % m);
        if set.dim() != prev.len() || x.block(i).len() != set.dim() {
            return Err(dim_err(format!("set {i} does not match the blocks around it")));
        }
        buf.resize(set.dim(), 0.0);
        set.project_into(prev, &mut buf);
        total += distance(x.block(i), &buf);
    }
    Ok(total)
}

/// Outcome of [`zero_inclusion_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionReport {
    pub holds: bool,
    /// `‖T_FB(ξ) − ξ‖`.
    pub residual: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Tests `0 ∈ (A + B)(ξ)` through `‖T_FB(ξ) − ξ‖ ≤ tol`.
pub fn zero_inclusion_check(ctx: &SplittingContext, xi: &PrimalDualPoint, tol: f64) -> Result<InclusionReport> {
    let fb = ctx.t_fb(xi)?;
    let dx = fb.x.sub(&xi.x)?;
    let du: Vec<f64> = fb.u.iter().zip(&xi.u).map(|(a, b)| a - b).collect();
    let primal_residual = dx.norm();
    let dual_residual = norm(&du);
    let residual = primal_residual.hypot(dual_residual);
    Ok(InclusionReport {
        holds: residual <= tol,
        residual,
        primal_residual,
        dual_residual,
    })
}
