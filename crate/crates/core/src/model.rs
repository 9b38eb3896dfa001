//! Problem data: the lower-level game (pseudo-gradient, strategy sets,
//! linear coupling, shared constraint) and the upper-level selector.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, Error, Result};
use crate::linalg;
use crate::sets::ConvexSet;
use crate::space::{BlockVector, PrimalDualPoint, SpaceSignature};

/// A bounded linear map `L : H_1 × … × H_m → G` together with its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearCoupling {
    /// `L ≡ 0` into a `dual_dim`-dimensional space.
    Zero { dual_dim: usize },
    /// `L x = Σ_i x_i`; every block and the dual space share `block_dim`.
    Sum { players: usize, block_dim: usize },
    /// Dense row-major `rows × cols` matrix acting on the flattened `x`.
    Matrix {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        op_norm: f64,
    },
}

impl LinearCoupling {
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(dim_err(format!(
                "matrix data of length {} does not fit {rows}×{cols}",
                data.len()
            )));
        }
        let op_norm = linalg::spectral_norm(&data, rows, cols);
        Ok(Self::Matrix {
            rows,
            cols,
            data,
            op_norm,
        })
    }

    pub fn dual_dim(&self) -> usize {
        match self {
            Self::Zero { dual_dim } => *dual_dim,
            Self::Sum { block_dim, .. } => *block_dim,
            Self::Matrix { rows, .. } => *rows,
        }
    }

    /// Upper bound on `‖L‖_op`. Exact for all variants: `√m` for the sum map.
    pub fn op_norm_bound(&self) -> f64 {
        match self {
            Self::Zero { .. } => 0.0,
            Self::Sum { players, .. } => (*players as f64).sqrt(),
            Self::Matrix { op_norm, .. } => *op_norm,
        }
    }

    fn check_primal(&self, sig: &SpaceSignature) -> Result<()> {
        let ok = match self {
            Self::Zero { .. } => true,
            Self::Sum { players, block_dim } => {
                sig.player_count() == *players && sig.common_block_dim() == Some(*block_dim)
            }
            Self::Matrix { cols, .. } => sig.primal_dim() == *cols,
        };
        if !ok {
            return Err(dim_err("coupling does not match the primal space"));
        }
        Ok(())
    }

    pub fn forward(&self, x: &BlockVector) -> Result<Vec<f64>> {
        self.check_primal(x.signature())?;
        Ok(match self {
            Self::Zero { dual_dim } => vec![0.0; *dual_dim],
            Self::Sum { block_dim, .. } => {
                let mut out = vec![0.0; *block_dim];
                for b in x.blocks() {
                    for (o, v) in out.iter_mut().zip(b) {
                        *o += v;
                    }
                }
                out
            }
            Self::Matrix { rows, cols, data, .. } => {
                let xs = x.as_slice();
                (0..*rows)
                    .map(|r| data[r * cols..(r + 1) * cols].iter().zip(xs).map(|(a, b)| a * b).sum())
                    .collect()
            }
        })
    }

    pub fn adjoint(&self, u: &[f64], sig: &Arc<SpaceSignature>) -> Result<BlockVector> {
        self.check_primal(sig)?;
        if u.len() != self.dual_dim() {
            return Err(dim_err(format!(
                "dual vector has length {}, coupling maps into dimension {}",
                u.len(),
                self.dual_dim()
            )));
        }
        let mut out = BlockVector::zeros(sig);
        match self {
            Self::Zero { .. } => {}
            Self::Sum { players, .. } => {
                for i in 0..*players {
                    out.block_mut(i).copy_from_slice(u);
                }
            }
            Self::Matrix { rows, cols, data, .. } => {
                let o = out.as_mut_slice();
                for r in 0..*rows {
                    let row = &data[r * cols..(r + 1) * cols];
                    for (oc, a) in o.iter_mut().zip(row) {
                        *oc += a * u[r];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The linearly coupled game `f_i(x) = (Σ_k W_k x_k − p)ᵀ x_i` with
/// nonnegative diagonal `W_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledGame {
    /// `weights[k]` is the diagonal of `W_k`.
    weights: Vec<Vec<f64>>,
    price: Vec<f64>,
}

impl CoupledGame {
    pub fn new(weights: Vec<Vec<f64>>, price: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("coupled game needs at least one player".into()));
        }
        for (k, w) in weights.iter().enumerate() {
            if w.len() != price.len() {
                return Err(dim_err(format!(
                    "W_{k} has {} diagonal entries, price vector has {}",
                    w.len(),
                    price.len()
                )));
            }
            if w.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidParameter(format!("W_{k} has a negative diagonal entry")));
            }
        }
        Ok(Self { weights, price })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn price(&self) -> &[f64] {
        &self.price
    }

    pub fn players(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.price.len()
    }

    pub fn gradient(&self, x: &BlockVector) -> Result<BlockVector> {
        coupled_game_pseudo_gradient(&self.weights, &self.price, x)
    }

    /// `f_i(x)`.
    pub fn cost(&self, i: usize, x: &BlockVector) -> Result<f64> {
        self.check(x)?;
        let agg = self.aggregate(x);
        Ok(agg
            .iter()
            .zip(&self.price)
            .zip(x.block(i))
            .map(|((a, p), xi)| (a - p) * xi)
            .sum())
    }

    fn check(&self, x: &BlockVector) -> Result<()> {
        let sig = x.signature();
        if sig.player_count() != self.players() || sig.common_block_dim() != Some(self.dim()) {
            return Err(dim_err("strategy profile does not match the coupled game"));
        }
        Ok(())
    }

    fn aggregate(&self, x: &BlockVector) -> Vec<f64> {
        let mut agg = vec![0.0; self.dim()];
        for (w, xk) in self.weights.iter().zip(x.blocks()) {
            for j in 0..agg.len() {
                agg[j] += w[j] * xk[j];
            }
        }
        agg
    }

    /// Jacobian of the pseudo-gradient restricted to coordinate `j`: the
    /// `m × m` matrix `diag(w) + 1 wᵀ`, row-major.
    fn coordinate_jacobian(&self, j: usize) -> Vec<f64> {
        let m = self.players();
        let mut jac = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                jac[i * m + k] = self.weights[k][j];
            }
            jac[i * m + i] += self.weights[i][j];
        }
        jac
    }

    /// Exact Lipschitz constant of `G`: the spectral norm of its constant
    /// Jacobian, which splits into one `m × m` block per coordinate.
    pub fn lipschitz_constant(&self) -> f64 {
        let m = self.players();
        (0..self.dim())
            .map(|j| linalg::spectral_norm(&self.coordinate_jacobian(j), m, m))
            .fold(0.0, f64::max)
    }

    /// Whether the symmetric part of the Jacobian is positive definite, i.e.
    /// `G` is strongly monotone.
    pub fn is_strongly_monotone(&self) -> bool {
        let m = self.players();
        (0..self.dim()).all(|j| {
            let jac = self.coordinate_jacobian(j);
            let sym: Vec<f64> = (0..m * m)
                .map(|idx| {
                    let (r, c) = (idx / m, idx % m);
                    jac[r * m + c] + jac[c * m + r]
                })
                .collect();
            linalg::is_positive_definite(&sym, m)
        })
    }
}

/// Block `i` is `W_i x_i + (Σ_k W_k x_k − p)`, the partial gradient of
/// `f_i(x) = (Σ_k W_k x_k − p)ᵀ x_i` in `x_i`. `weights[k]` is the diagonal of `W_k`.
pub fn coupled_game_pseudo_gradient(
    weights: &[Vec<f64>],
    price: &[f64],
    x: &BlockVector,
) -> Result<BlockVector> {
    let sig = x.signature();
    let dim = price.len();
    if weights.len() != sig.player_count()
        || sig.common_block_dim() != Some(dim)
        || weights.iter().any(|w| w.len() != dim)
    {
        return Err(dim_err("coupled game data does not match the strategy profile"));
    }
    let mut agg: Vec<f64> = price.iter().map(|p| -p).collect();
    for (w, xk) in weights.iter().zip(x.blocks()) {
        for j in 0..dim {
            agg[j] += w[j] * xk[j];
        }
    }
    let mut out = BlockVector::zeros(sig);
    for (i, w) in weights.iter().enumerate() {
        let xi = x.block(i).to_vec();
        for (j, o) in out.block_mut(i).iter_mut().enumerate() {
            *o = w[j] * xi[j] + agg[j];
        }
    }
    Ok(out)
}

/// `∇_i 𝔣_i` for `𝔣_i(x) = ½(‖x_i − t_i‖² + Σ_{j≠i} ‖x_i − x_j‖²)`.
pub fn consensus_upper_gradient(targets: &[Vec<f64>], i: usize, x: &BlockVector) -> Result<Vec<f64>> {
    let m = x.player_count();
    if targets.len() != m || i >= m {
        return Err(dim_err("consensus targets do not match the strategy profile"));
    }
    let xi = x.block(i);
    if targets[i].len() != xi.len() {
        return Err(dim_err(format!("target {i} has the wrong dimension")));
    }
    let mut g: Vec<f64> = xi.iter().zip(&targets[i]).map(|(a, t)| a - t).collect();
    for j in (0..m).filter(|&j| j != i) {
        let xj = x.block(j);
        if xj.len() != xi.len() {
            return Err(dim_err("consensus selector needs equal block dimensions"));
        }
        for (gk, (a, b)) in g.iter_mut().zip(xi.iter().zip(xj)) {
            *gk += a - b;
        }
    }
    Ok(g)
}

/// `𝔊_cyc = Id − R`: block `i` is `x_i − x_{i−1}` with `x_0 ≡ x_m`.
pub fn cycle_upper_gradient(x: &BlockVector) -> Result<BlockVector> {
    x.sub(&x.circular_shift_right()?)
}

/// Block `i` is `x_i − P_{K_i}(x_i)`, the gradient of `½ d(·, K_i)²`.
pub fn implicit_set_pseudo_gradient(sets: &[ConvexSet], x: &BlockVector) -> Result<BlockVector> {
    if sets.len() != x.player_count() {
        return Err(dim_err(format!(
            "{} sets for {} players",
            sets.len(),
            x.player_count()
        )));
    }
    let mut out = BlockVector::zeros(x.signature());
    for (i, set) in sets.iter().enumerate() {
        let g = set.half_squared_distance_gradient(x.block(i))?;
        out.block_mut(i).copy_from_slice(&g);
    }
    Ok(out)
}

type BlockMap = dyn Fn(&BlockVector) -> BlockVector + Send + Sync;
type PlayerMap = dyn Fn(usize, &BlockVector) -> Vec<f64> + Send + Sync;

/// The lower-level pseudo-gradient `G = (∇_1 f_1, …, ∇_m f_m)`.
#[derive(Clone)]
pub enum PseudoGradient {
    Zero,
    Coupled(CoupledGame),
    /// `h_i = ½ d(·, K_i)²` for each player.
    ImplicitSets(Vec<ConvexSet>),
    Custom(Arc<BlockMap>),
}

impl fmt::Debug for PseudoGradient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Coupled(g) => f.debug_tuple("Coupled").field(g).finish(),
            Self::ImplicitSets(s) => f.debug_tuple("ImplicitSets").field(s).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PseudoGradient {
    pub fn custom(op: impl Fn(&BlockVector) -> BlockVector + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(op))
    }

    pub fn apply(&self, x: &BlockVector) -> Result<BlockVector> {
        match self {
            Self::Zero => Ok(BlockVector::zeros(x.signature())),
            Self::Coupled(g) => g.gradient(x),
            Self::ImplicitSets(sets) => implicit_set_pseudo_gradient(sets, x),
            Self::Custom(op) => {
                let out = op(x);
                x.check_same(&out)?;
                Ok(out)
            }
        }
    }
}

/// Lower-level game data.
#[derive(Debug, Clone)]
pub struct LowerGame {
    signature: Arc<SpaceSignature>,
    pseudo_gradient: PseudoGradient,
    kappa_g: f64,
    strategy_sets: Vec<ConvexSet>,
    coupling: LinearCoupling,
    shared_set: ConvexSet,
}

impl LowerGame {
    pub fn new(
        signature: Arc<SpaceSignature>,
        pseudo_gradient: PseudoGradient,
        kappa_g: f64,
        strategy_sets: Vec<ConvexSet>,
        coupling: LinearCoupling,
        shared_set: ConvexSet,
    ) -> Result<Self> {
        if !(kappa_g > 0.0) || !kappa_g.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constant κ_G = {kappa_g} must be positive and finite"
            )));
        }
        if strategy_sets.len() != signature.player_count() {
            return Err(dim_err(format!(
                "{} strategy sets for {} players",
                strategy_sets.len(),
                signature.player_count()
            )));
        }
        for (i, c) in strategy_sets.iter().enumerate() {
            if c.dim() != signature.block_dim(i) {
                return Err(dim_err(format!("strategy set {i} has the wrong dimension")));
            }
        }
        coupling.check_primal(&signature)?;
        if coupling.dual_dim() != signature.dual_dim() || shared_set.dim() != signature.dual_dim() {
            return Err(dim_err("coupling or shared set does not match the dual dimension"));
        }
        Ok(Self {
            signature,
            pseudo_gradient,
            kappa_g,
            strategy_sets,
            coupling,
            shared_set,
        })
    }

    pub fn signature(&self) -> &Arc<SpaceSignature> {
        &self.signature
    }

    pub fn pseudo_gradient(&self) -> &PseudoGradient {
        &self.pseudo_gradient
    }

    pub fn kappa_g(&self) -> f64 {
        self.kappa_g
    }

    /// `κ_A = κ_G + ‖L‖_op`, the Lipschitz constant of the monotone part.
    pub fn kappa_a(&self) -> f64 {
        self.kappa_g + self.coupling.op_norm_bound()
    }

    pub fn strategy_sets(&self) -> &[ConvexSet] {
        &self.strategy_sets
    }

    pub fn coupling(&self) -> &LinearCoupling {
        &self.coupling
    }

    pub fn shared_set(&self) -> &ConvexSet {
        &self.shared_set
    }

    pub fn gradient(&self, x: &BlockVector) -> Result<BlockVector> {
        self.pseudo_gradient.apply(x)
    }
}

/// Upper-level selector `𝔊 = (∇_1 𝔣_1, …, ∇_m 𝔣_m)`.
#[derive(Clone)]
pub enum UpperSelector {
    /// `𝔣_i ≡ 0`; turns the hybrid steepest descent iteration into plain FBF.
    Zero,
    /// `𝔣_i(x) = ½(‖x_i − t_i‖² + Σ_{j≠i} ‖x_i − x_j‖²)`.
    Consensus { targets: Vec<Vec<f64>> },
    /// `𝔣_i(x) = ½‖x_i − x_{i−1}‖²`; selects cycles.
    Cycle,
    Custom { gradient: Arc<PlayerMap>, kappa: f64 },
}

impl fmt::Debug for UpperSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Consensus { targets } => f.debug_struct("Consensus").field("targets", targets).finish(),
            Self::Cycle => f.write_str("Cycle"),
            Self::Custom { kappa, .. } => f.debug_struct("Custom").field("kappa", kappa).finish_non_exhaustive(),
        }
    }
}

impl UpperSelector {
    pub fn custom(
        kappa: f64,
        gradient: impl Fn(usize, &BlockVector) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::Custom {
            gradient: Arc::new(gradient),
            kappa,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Zero => "none",
            Self::Consensus { .. } => "consensus",
            Self::Cycle => "cycle",
            Self::Custom { .. } => "custom",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Lipschitz constant `κ_𝔊` for `players` players.
    ///
    /// The cycle selector is `Id − R` with `R` the circular shift, whose
    /// eigenvalues are the `m`-th roots of unity, so `‖Id − R‖ = max_k
    /// 2|sin(πk/m)|`. The consensus gradient has Jacobian `(m+1)I − 11ᵀ`
    /// per coordinate, with norm `m + 1` once `m ≥ 2`.
    pub fn kappa(&self, players: usize) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Consensus { .. } => {
                if players >= 2 {
                    players as f64 + 1.0
                } else {
                    1.0
                }
            }
            Self::Cycle => (0..players)
                .map(|k| 2.0 * (PI * k as f64 / players as f64).sin().abs())
                .fold(0.0, f64::max),
            Self::Custom { kappa, .. } => *kappa,
        }
    }

    /// `∇_i 𝔣_i(x)`.
    pub fn player_gradient(&self, i: usize, x: &BlockVector) -> Result<Vec<f64>> {
        if i >= x.player_count() {
            return Err(dim_err(format!("player index {i} out of range")));
        }
        match self {
            Self::Zero => Ok(vec![0.0; x.block(i).len()]),
            Self::Consensus { targets } => consensus_upper_gradient(targets, i, x),
            Self::Cycle => {
                let m = x.player_count();
                let prev = x.block((i + m - 1) % m);
                let xi = x.block(i);
                if prev.len() != xi.len() {
                    return Err(dim_err("cycle selector needs equal block dimensions"));
                }
                Ok(xi.iter().zip(prev).map(|(a, b)| a - b).collect())
            }
            Self::Custom { gradient, .. } => {
                let g = gradient(i, x);
                if g.len() != x.block(i).len() {
                    return Err(dim_err(format!("custom gradient for player {i} has the wrong length")));
                }
                Ok(g)
            }
        }
    }

    /// The stacked operator `𝔊(x)`.
    pub fn gradient(&self, x: &BlockVector) -> Result<BlockVector> {
        match self {
            Self::Zero => Ok(BlockVector::zeros(x.signature())),
            Self::Cycle => cycle_upper_gradient(x),
            _ => {
                let mut out = BlockVector::zeros(x.signature());
                for i in 0..x.player_count() {
                    let g = self.player_gradient(i, x)?;
                    out.block_mut(i).copy_from_slice(&g);
                }
                Ok(out)
            }
        }
    }

    /// `(𝔣_1(x), …, 𝔣_m(x))` for the built-in families.
    pub fn costs(&self, x: &BlockVector) -> Result<Vec<f64>> {
        evaluate_upper_costs(self, x)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Per-player upper-level costs of the built-in selector families.
pub fn evaluate_upper_costs(selector: &UpperSelector, x: &BlockVector) -> Result<Vec<f64>> {
    let m = x.player_count();
    match selector {
        UpperSelector::Zero => Ok(vec![0.0; m]),
        UpperSelector::Consensus { targets } => {
            if targets.len() != m {
                return Err(dim_err("consensus targets do not match the strategy profile"));
            }
            (0..m)
                .map(|i| {
                    let xi = x.block(i);
                    if targets[i].len() != xi.len() {
                        return Err(dim_err(format!("target {i} has the wrong dimension")));
                    }
                    let spread: f64 = (0..m).filter(|&j| j != i).map(|j| sq_dist(xi, x.block(j))).sum();
                    Ok(0.5 * (sq_dist(xi, &targets[i]) + spread))
                })
                .collect()
        }
        UpperSelector::Cycle => {
            if x.signature().common_block_dim().is_none() {
                return Err(dim_err("cycle selector needs equal block dimensions"));
            }
            Ok((0..m)
                .map(|i| 0.5 * sq_dist(x.block(i), x.block((i + m - 1) % m)))
                .collect())
        }
        UpperSelector::Custom { .. } => Err(Error::Unsupported(
            "custom selectors carry gradients only, no cost functions".into(),
        )),
    }
}

/// `𝔊̃(x, u) = (𝔊(x), 0)`.
pub fn lift_upper_selector(selector: &UpperSelector, xi: &PrimalDualPoint) -> Result<PrimalDualPoint> {
    Ok(PrimalDualPoint {
        x: selector.gradient(&xi.x)?,
        u: vec![0.0; xi.u.len()],
    })
}

/// Safety factor applied by [`estimate_lipschitz`].
pub const LIPSCHITZ_SAFETY: f64 = 1.1;

/// Empirical Lipschitz constant: the largest observed `‖op(x) − op(y)‖ / ‖x − y‖`
/// over `trials` random pairs, times [`LIPSCHITZ_SAFETY`].
///
/// Pairs are drawn at scales spread log-uniformly over `[1e-2, 1e3]` so that
/// piecewise operators (projections onto far-away sets) get probed in all
/// their regimes. Deterministic for a given `seed`.
pub fn estimate_lipschitz(
    op: impl Fn(&BlockVector) -> Result<BlockVector>,
    signature: &Arc<SpaceSignature>,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = signature.primal_dim();
    let mut best: Option<f64> = None;
    for _ in 0..trials {
        let scale = 10f64.powf(rng.random_range(-2.0..3.0));
        let spread = 10f64.powf(rng.random_range(-3.0..1.0)) * scale;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..=scale)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-spread..=spread)).collect();
        let x = BlockVector::from_flat(signature, x)?;
        let y = BlockVector::from_flat(signature, y)?;
        let dx = x.sub(&y)?.norm();
        if dx == 0.0 {
            continue;
        }
        let ratio = op(&x)?.sub(&op(&y)?)?.norm() / dx;
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.map(|b| b * LIPSCHITZ_SAFETY)
        .ok_or_else(|| Error::Degenerate("every sampled pair coincided".into()))
}
