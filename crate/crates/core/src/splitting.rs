//! The monotone pair `A`, `B` on `H × G`, the resolvent of `B`, and the
//! fixed-point operators built from them:
//!
//! ```text
//! T_FB   = (Id + γB)⁻¹ ∘ (Id − γA)
//! T_FBF  = (Id − γA) ∘ T_FB + γA
//! T^α    = (1 − α) Id + α T_FBF
//! S      = P_{B̄(0;r)} ∘ T^α
//! ```
//!
//! with `A(x, u) = (G(x) + L*u, −Lx)` and `B = (⨉ ∂ι_{C_i}) × ∂ι_D*`. The
//! resolvent of `∂ι_D*` goes through the Moreau identity, so only `P_D`
//! is ever evaluated.

use crate::error::{Error, Result};
use crate::model::LowerGame;
use crate::space::{PrimalDualPoint, SpaceSignature};

/// How the dual half of the forward-backward step is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualUpdate {
    /// Resolvent applied to the forward point `u + γLx`:
    /// `w = u + γLx − γ P_D(u/γ + Lx)`.
    #[default]
    Corrected,
    /// The shortened update `w = u − γ P_D(u/γ + Lx)`, which drops the
    /// `+γLx` forward term. Kept for comparison runs only.
    Literal,
}

/// What to do when `γ (κ_G + ‖L‖_op) ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepPolicy {
    /// Refuse to build the context.
    #[default]
    Strict,
    /// Build it anyway and log a warning; the margin stays negative in reports.
    Permissive,
}

/// `0.9 / (κ_G + ‖L‖_op)`.
pub fn auto_gamma(game: &LowerGame) -> f64 {
    0.9 / game.kappa_a()
}

/// A lower game together with the step `γ`, averaging weight `α` and
/// safeguard radius `r`.
#[derive(Debug, Clone)]
pub struct SplittingContext {
    game: LowerGame,
    gamma: f64,
    alpha: f64,
    radius: f64,
    dual_update: DualUpdate,
}

impl SplittingContext {
    /// `radius` may be `f64::INFINITY`, which gives the unsafeguarded
    /// prototype iteration.
    pub fn new(game: LowerGame, gamma: f64, alpha: f64, radius: f64, policy: StepPolicy) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("step γ = {gamma} must be positive")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("averaging weight α = {alpha} must lie in (0, 1)")));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("safeguard radius r = {radius} must be positive")));
        }
        let kappa_a = game.kappa_a();
        if gamma * kappa_a >= 1.0 {
            let msg = format!(
                "step γ = {gamma} violates γ·(κ_G + ‖L‖_op) < 1 (κ_G + ‖L‖_op = {kappa_a:.6}, bound {:.6})",
                1.0 / kappa_a
            );
            match policy {
                StepPolicy::Strict => return Err(Error::InvalidParameter(msg)),
                StepPolicy::Permissive => log::warn!("{msg}"),
            }
        }
        Ok(Self {
            game,
            gamma,
            alpha,
            radius,
            dual_update: DualUpdate::Corrected,
        })
    }

    pub fn with_dual_update(mut self, dual_update: DualUpdate) -> Self {
        self.dual_update = dual_update;
        self
    }

    pub fn game(&self) -> &LowerGame {
        &self.game
    }

    pub fn signature(&self) -> &std::sync::Arc<SpaceSignature> {
        self.game.signature()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dual_update(&self) -> DualUpdate {
        self.dual_update
    }

    pub fn kappa_a(&self) -> f64 {
        self.game.kappa_a()
    }

    /// `1 − γ κ_A`; positive exactly when the step is admissible.
    pub fn admissibility_margin(&self) -> f64 {
        1.0 - self.gamma * self.kappa_a()
    }

    fn check(&self, xi: &PrimalDualPoint) -> Result<()> {
        let sig = xi.signature();
        if **sig != **self.signature() || xi.u.len() != sig.dual_dim() {
            return Err(Error::Dimension("point does not match the game's space".into()));
        }
        Ok(())
    }

    /// `A(x, u) = (G(x) + L*u, −Lx)`.
    pub fn operator_a(&self, xi: &PrimalDualPoint) -> Result<PrimalDualPoint> {
        self.check(xi)?;
        let coupling = self.game.coupling();
        let primal = self
            .game
            .gradient(&xi.x)?
            .add(&coupling.adjoint(&xi.u, xi.signature())?)?;
        let dual = coupling.forward(&xi.x)?.into_iter().map(|v| -v).collect();
        Ok(PrimalDualPoint { x: primal, u: dual })
    }

    /// `(Id + γB)⁻¹`: blockwise `P_{C_i}` on the primal part and
    /// `z ↦ z − γ P_D(z/γ)` on the dual part.
    pub fn resolvent_b(&self, z: &PrimalDualPoint) -> Result<PrimalDualPoint> {
        self.check(z)?;
        let mut x = z.x.clone();
        for (i, set) in self.game.strategy_sets().iter().enumerate() {
            set.project_into(z.x.block(i), x.block_mut(i));
        }
        let u = self.dual_prox(&z.u);
        Ok(PrimalDualPoint { x, u })
    }

    /// `z − γ P_D(z/γ)`, the resolvent of `γ ∂ι_D*` via Moreau.
    fn dual_prox(&self, z: &[f64]) -> Vec<f64> {
        let g = self.gamma;
        let scaled: Vec<f64> = z.iter().map(|v| v / g).collect();
        let mut p = vec![0.0; z.len()];
        self.game.shared_set().project_into(&scaled, &mut p);
        z.iter().zip(&p).map(|(zi, pi)| zi - g * pi).collect()
    }

    /// Forward-backward point together with `A(ξ)`, which `T_FBF` reuses.
    fn forward_backward(&self, xi: &PrimalDualPoint) -> Result<(PrimalDualPoint, PrimalDualPoint)> {
        let a = self.operator_a(xi)?;
        let forward = PrimalDualPoint::axpy(-self.gamma, &a, xi)?;
        let mut y = self.resolvent_b(&forward)?;
        if self.dual_update == DualUpdate::Literal {
            // u − γ P_D(u/γ + Lx): note `a.u = −Lx`.
            let g = self.gamma;
            let arg: Vec<f64> = xi.u.iter().zip(&a.u).map(|(u, nlx)| u / g - nlx).collect();
            let mut p = vec![0.0; arg.len()];
            self.game.shared_set().project_into(&arg, &mut p);
            y.u = xi.u.iter().zip(&p).map(|(u, pi)| u - g * pi).collect();
        }
        Ok((y, a))
    }

    /// `T_FB(ξ) = (Id + γB)⁻¹(ξ − γA(ξ))`.
    pub fn t_fb(&self, xi: &PrimalDualPoint) -> Result<PrimalDualPoint> {
        Ok(self.forward_backward(xi)?.0)
    }

    /// `T_FBF(ξ) = T_FB(ξ) − γA(T_FB(ξ)) + γA(ξ)`.
    pub fn t_fbf(&self, xi: &PrimalDualPoint) -> Result<PrimalDualPoint> {
        let (y, a_xi) = self.forward_backward(xi)?;
        let a_y = self.operator_a(&y)?;
        let correction = a_xi.sub(&a_y)?;
        PrimalDualPoint::axpy(self.gamma, &correction, &y)
    }

    /// `T^α(ξ) = (1 − α)ξ + α T_FBF(ξ)`.
    pub fn t_alpha(&self, xi: &PrimalDualPoint) -> Result<PrimalDualPoint> {
        let t = self.t_fbf(xi)?;
        PrimalDualPoint::axpy(1.0 - self.alpha, xi, &t.scaled(self.alpha))
    }

    /// `P_{B̄(0;r)}(T^α(ξ))`.
    pub fn safeguarded_t(&self, xi: &PrimalDualPoint) -> Result<PrimalDualPoint> {
        Ok(project_ball(self.radius, self.t_alpha(xi)?))
    }

    /// `‖S(ξ) − ξ‖`, zero exactly on `Fix(T^α) ∩ B̄(0;r)`.
    pub fn fix_residual(&self, xi: &PrimalDualPoint) -> Result<f64> {
        self.safeguarded_t(xi)?.distance(xi)
    }

    /// One pass of the forward-backward, forward and averaging lines of the
    /// coordinate-level algorithm, written out player by player. Agrees with
    /// [`safeguarded_t`](Self::safeguarded_t) up to rounding.
    pub fn expanded_step(&self, xi: &PrimalDualPoint) -> Result<PrimalDualPoint> {
        self.check(xi)?;
        let sig = xi.signature();
        let g = self.gamma;
        let game = self.game();
        let coupling = game.coupling();
        let (x, u) = (&xi.x, &xi.u);

        // Forward-backward step.
        let grad_x = game.gradient(x)?;
        let lstar_u = coupling.adjoint(u, sig)?;
        let lx = coupling.forward(x)?;
        let mut y = x.clone();
        for (i, set) in game.strategy_sets().iter().enumerate() {
            let arg: Vec<f64> = x
                .block(i)
                .iter()
                .zip(grad_x.block(i))
                .zip(lstar_u.block(i))
                .map(|((xk, gk), lk)| xk - g * (gk + lk))
                .collect();
            set.project_into(&arg, y.block_mut(i));
        }
        let arg: Vec<f64> = u.iter().zip(&lx).map(|(uk, lk)| uk / g + lk).collect();
        let p = game.shared_set().project(&arg)?;
        let w: Vec<f64> = match self.dual_update {
            DualUpdate::Corrected => u
                .iter()
                .zip(&lx)
                .zip(&p)
                .map(|((uk, lk), pk)| uk + g * lk - g * pk)
                .collect(),
            DualUpdate::Literal => u.iter().zip(&p).map(|(uk, pk)| uk - g * pk).collect(),
        };

        // Forward step.
        let grad_y = game.gradient(&y)?;
        let lstar_w = coupling.adjoint(&w, sig)?;
        let ly = coupling.forward(&y)?;
        let mut y_tilde = y.clone();
        for i in 0..sig.player_count() {
            let (gy, lw, gx, lu) = (grad_y.block(i), lstar_w.block(i), grad_x.block(i), lstar_u.block(i));
            for (k, v) in y_tilde.block_mut(i).iter_mut().enumerate() {
                *v -= g * ((gy[k] + lw[k]) - (gx[k] + lu[k]));
            }
        }
        let w_tilde: Vec<f64> = w
            .iter()
            .zip(ly.iter().zip(&lx))
            .map(|(wk, (a, b))| wk + g * (a - b))
            .collect();

        // Averaging and projection.
        let a = self.alpha;
        let xs: Vec<f64> = x
            .as_slice()
            .iter()
            .zip(y_tilde.as_slice())
            .map(|(xk, yk)| (1.0 - a) * xk + a * yk)
            .collect();
        let us: Vec<f64> = u.iter().zip(&w_tilde).map(|(uk, wk)| (1.0 - a) * uk + a * wk).collect();
        let avg = PrimalDualPoint::new(crate::space::BlockVector::from_flat(sig, xs)?, us)?;
        Ok(project_ball(self.radius, avg))
    }
}

/// Radial projection onto `B̄(0; radius)`.
pub fn project_ball(radius: f64, xi: PrimalDualPoint) -> PrimalDualPoint {
    let n = xi.norm();
    if n <= radius {
        xi
    } else {
        xi.scaled(radius / n)
    }
}
