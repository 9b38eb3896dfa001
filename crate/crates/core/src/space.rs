//! Vector algebra on the product space `H_1 × … × H_m` and on the
//! primal-dual space `(H_1 × … × H_m) × G`.
//!
//! A [`BlockVector`] stores the players' strategies contiguously, one block
//! per player, and shares its [`SpaceSignature`] by reference. All
//! arithmetic is in `f64`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{dim_err, Error, Result};

/// Shape of the product space: one block dimension per player plus the
/// dimension of the dual (coupling) space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSignature {
    block_dims: Vec<usize>,
    offsets: Vec<usize>,
    dual_dim: usize,
}

impl SpaceSignature {
    pub fn new(block_dims: Vec<usize>, dual_dim: usize) -> Result<Arc<Self>> {
        if block_dims.is_empty() {
            return Err(Error::InvalidParameter("player count must be at least 1".into()));
        }
        if let Some(i) = block_dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidParameter(format!("block {i} has dimension 0")));
        }
        if dual_dim == 0 {
            return Err(Error::InvalidParameter("dual dimension must be at least 1".into()));
        }
        let mut offsets = Vec::with_capacity(block_dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in &block_dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(Arc::new(Self {
            block_dims,
            offsets,
            dual_dim,
        }))
    }

    /// `players` blocks of equal dimension `block_dim`.
    pub fn uniform(players: usize, block_dim: usize, dual_dim: usize) -> Result<Arc<Self>> {
        Self::new(vec![block_dim; players], dual_dim)
    }

    pub fn player_count(&self) -> usize {
        self.block_dims.len()
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn block_dim(&self, i: usize) -> usize {
        self.block_dims[i]
    }

    pub fn dual_dim(&self) -> usize {
        self.dual_dim
    }

    /// Total primal dimension `Σ d_i`.
    pub fn primal_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// The shared block dimension, if every player uses the same space `H`.
    pub fn common_block_dim(&self) -> Option<usize> {
        let d = self.block_dims[0];
        self.block_dims.iter().all(|&x| x == d).then_some(d)
    }

    fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.player_count() {
            return Err(dim_err(format!(
                "player index {i} out of range for {} players",
                self.player_count()
            )));
        }
        Ok(())
    }
}

fn same_space(a: &Arc<SpaceSignature>, b: &Arc<SpaceSignature>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// An element `x = (x_1, …, x_m)` of the product space.
#[derive(Clone, PartialEq)]
pub struct BlockVector {
    sig: Arc<SpaceSignature>,
    data: Vec<f64>,
}

impl fmt::Debug for BlockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.blocks()).finish()
    }
}

impl BlockVector {
    pub fn zeros(sig: &Arc<SpaceSignature>) -> Self {
        Self {
            sig: Arc::clone(sig),
            data: vec![0.0; sig.primal_dim()],
        }
    }

    pub fn from_flat(sig: &Arc<SpaceSignature>, data: Vec<f64>) -> Result<Self> {
        if data.len() != sig.primal_dim() {
            return Err(dim_err(format!(
                "flat data has length {}, signature needs {}",
                data.len(),
                sig.primal_dim()
            )));
        }
        Ok(Self {
            sig: Arc::clone(sig),
            data,
        })
    }

    pub fn from_blocks<B: AsRef<[f64]>>(sig: &Arc<SpaceSignature>, blocks: &[B]) -> Result<Self> {
        if blocks.len() != sig.player_count() {
            return Err(dim_err(format!(
                "{} blocks given for {} players",
                blocks.len(),
                sig.player_count()
            )));
        }
        let mut data = Vec::with_capacity(sig.primal_dim());
        for (i, b) in blocks.iter().enumerate() {
            let b = b.as_ref();
            if b.len() != sig.block_dim(i) {
                return Err(dim_err(format!(
                    "block {i} has length {}, expected {}",
                    b.len(),
                    sig.block_dim(i)
                )));
            }
            data.extend_from_slice(b);
        }
        Ok(Self {
            sig: Arc::clone(sig),
            data,
        })
    }

    pub fn signature(&self) -> &Arc<SpaceSignature> {
        &self.sig
    }

    pub fn player_count(&self) -> usize {
        self.sig.player_count()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.sig.block_range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.sig.block_range(i);
        &mut self.data[r]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.player_count()).map(move |i| self.block(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if !same_space(&self.sig, &other.sig) {
            return Err(dim_err("block vectors live in different product spaces"));
        }
        Ok(())
    }

    /// `a·v + w`, blockwise.
    pub fn axpy(a: f64, v: &Self, w: &Self) -> Result<Self> {
        v.check_same(w)?;
        let data = v.data.iter().zip(&w.data).map(|(vi, wi)| a * vi + wi).collect();
        Ok(Self {
            sig: Arc::clone(&w.sig),
            data,
        })
    }

    /// Sum of blockwise inner products.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .blocks()
            .zip(other.blocks())
            .map(|(a, b)| dot(a, b))
            .sum())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            sig: Arc::clone(&self.sig),
            data: self.data.iter().map(|v| a * v).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::axpy(-1.0, other, self)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::axpy(1.0, other, self)
    }

    /// `(x_i; y_{∖i})`: a copy of `self` with block `i` replaced by `xi`.
    pub fn substitute(&self, xi: &[f64], i: usize) -> Result<Self> {
        self.sig.check_player(i)?;
        if xi.len() != self.sig.block_dim(i) {
            return Err(dim_err(format!(
                "replacement block has length {}, block {i} has dimension {}",
                xi.len(),
                self.sig.block_dim(i)
            )));
        }
        let mut out = self.clone();
        out.block_mut(i).copy_from_slice(xi);
        Ok(out)
    }

    /// `(x_1, …, x_m) ↦ (x_m, x_1, …, x_{m-1})`. Needs equal block dimensions.
    pub fn circular_shift_right(&self) -> Result<Self> {
        let d = self.sig.common_block_dim().ok_or_else(|| {
            dim_err("circular shift needs all blocks to share one dimension")
        })?;
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        data.extend_from_slice(&self.data[n - d..]);
        data.extend_from_slice(&self.data[..n - d]);
        Ok(Self {
            sig: Arc::clone(&self.sig),
            data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A primal-dual point `ξ = (x, u)`.
#[derive(Clone, PartialEq)]
pub struct PrimalDualPoint {
    pub x: BlockVector,
    pub u: Vec<f64>,
}

impl fmt::Debug for PrimalDualPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrimalDualPoint")
            .field("x", &self.x)
            .field("u", &self.u)
            .finish()
    }
}

impl PrimalDualPoint {
    pub fn new(x: BlockVector, u: Vec<f64>) -> Result<Self> {
        if u.len() != x.signature().dual_dim() {
            return Err(dim_err(format!(
                "dual part has length {}, signature needs {}",
                u.len(),
                x.signature().dual_dim()
            )));
        }
        Ok(Self { x, u })
    }

    pub fn zeros(sig: &Arc<SpaceSignature>) -> Self {
        Self {
            x: BlockVector::zeros(sig),
            u: vec![0.0; sig.dual_dim()],
        }
    }

    pub fn signature(&self) -> &Arc<SpaceSignature> {
        self.x.signature()
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        self.x.check_same(&other.x)
    }

    /// `a·v + w` on both components.
    pub fn axpy(a: f64, v: &Self, w: &Self) -> Result<Self> {
        Ok(Self {
            x: BlockVector::axpy(a, &v.x, &w.x)?,
            u: v.u.iter().zip(&w.u).map(|(vi, wi)| a * vi + wi).collect(),
        })
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        Ok(self.x.inner(&other.x)? + dot(&self.u, &other.u))
    }

    /// Product norm: `‖(x,u)‖² = ‖x‖² + ‖u‖²`.
    pub fn norm(&self) -> f64 {
        (norm_sq(self.x.as_slice()) + norm_sq(&self.u)).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::axpy(-1.0, other, self)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            x: self.x.scaled(a),
            u: self.u.iter().map(|v| a * v).collect(),
        }
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        let sx: f64 = self
            .x
            .as_slice()
            .iter()
            .zip(other.x.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let su: f64 = self.u.iter().zip(&other.u).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok((sx + su).sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.u.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}
