//! Outer iterations: the safeguarded hybrid steepest descent method
//!
//! ```text
//! η_n     = P_{B̄(0;r)}(T^α(ξ_n))
//! ξ_{n+1} = η_n − λ_{n+1} 𝔊̃(η_n)
//! ```
//!
//! and the plain forward-backward-forward baseline `ξ_{n+1} = η_n`, which is
//! the same loop with a zero selector. The unsafeguarded prototype is the
//! same loop with `r = ∞`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{lift_upper_selector, LowerGame, PseudoGradient, UpperSelector};
use crate::oracles::cycle_residual;
use crate::space::PrimalDualPoint;
use crate::splitting::{auto_gamma, project_ball, DualUpdate, SplittingContext, StepPolicy};

/// `λ_n = 1/n`.
pub fn lambda_harmonic(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("λ_n is defined for n ≥ 1".into()));
    }
    Ok(1.0 / n as f64)
}

/// Step rules `n ↦ λ_n`. Every variant tends to zero and is not summable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LambdaSchedule {
    /// `1/n`.
    #[default]
    Harmonic,
    /// `scale / n^exponent` with `exponent ∈ (0, 1]`.
    Power { scale: f64, exponent: f64 },
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LambdaSchedule::Harmonic => Ok(()),
            LambdaSchedule::Power { scale, exponent } => {
                if !(scale > 0.0) || !scale.is_finite() {
                    return Err(Error::InvalidParameter(format!("λ scale {scale} must be positive")));
                }
                if !(exponent > 0.0 && exponent <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "λ exponent {exponent} must lie in (0, 1]"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, n: usize) -> Result<f64> {
        match *self {
            LambdaSchedule::Harmonic => lambda_harmonic(n),
            LambdaSchedule::Power { scale, exponent } => {
                if n == 0 {
                    return Err(Error::Domain("λ_n is defined for n ≥ 1".into()));
                }
                Ok(scale / (n as f64).powf(exponent))
            }
        }
    }

    /// `sup_n λ_n`, attained at `n = 1`.
    pub fn sup(&self) -> f64 {
        self.value(1).unwrap_or(0.0)
    }
}

/// Which iterates go into the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordCadence {
    /// Every `10^⌊log10 n⌋`-th iterate: 0..9, 10, 20, .., 90, 100, 200, ...
    #[default]
    LogSpaced,
    /// Every `k`-th iterate.
    Every(usize),
}

impl RecordCadence {
    pub fn records(&self, n: usize) -> bool {
        match *self {
            RecordCadence::LogSpaced => {
                if n < 10 {
                    return true;
                }
                let step = 10usize.pow(n.ilog10());
                n % step == 0
            }
            RecordCadence::Every(k) => n % k.max(1) == 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepSize {
    /// `0.9 / (κ_G + ‖L‖_op)`, resolved against the game at run time.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: StepSize,
    pub alpha: f64,
    pub safeguard_radius: f64,
    pub lambda: LambdaSchedule,
    pub max_iters: usize,
    /// Zero disables early stopping.
    pub residual_tolerance: f64,
    pub record: RecordCadence,
    /// Copied into the trace; the iteration itself is deterministic.
    pub seed: u64,
    pub step_policy: StepPolicy,
    pub dual_update: DualUpdate,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: StepSize::Auto,
            alpha: 0.5,
            safeguard_radius: 1e15,
            lambda: LambdaSchedule::Harmonic,
            max_iters: 100_000,
            residual_tolerance: 0.0,
            record: RecordCadence::LogSpaced,
            seed: 0,
            step_policy: StepPolicy::Strict,
            dual_update: DualUpdate::Corrected,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.lambda.validate()?;
        if !(self.residual_tolerance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "residual tolerance {} must be nonnegative",
                self.residual_tolerance
            )));
        }
        if self.record == RecordCadence::Every(0) {
            return Err(Error::InvalidParameter("record cadence must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve_gamma(&self, game: &LowerGame) -> f64 {
        match self.gamma {
            StepSize::Auto => auto_gamma(game),
            StepSize::Fixed(g) => g,
        }
    }

    /// Builds the splitting context; checks `α`, `r` and step admissibility.
    pub fn context(&self, game: &LowerGame) -> Result<SplittingContext> {
        self.validate()?;
        let ctx = SplittingContext::new(
            game.clone(),
            self.resolve_gamma(game),
            self.alpha,
            self.safeguard_radius,
            self.step_policy,
        )?;
        Ok(ctx.with_dual_update(self.dual_update))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    /// `‖S(ξ_n) − ξ_n‖`.
    pub fix_residual: f64,
    /// Present when the lower game is the implicit-set game.
    pub cycle_residual: Option<f64>,
    pub costs: Vec<f64>,
    pub point: PrimalDualPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    Tolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    pub final_point: PrimalDualPoint,
    /// Index of the final iterate.
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub gamma: f64,
    pub kappa_a: f64,
    pub selector: &'static str,
    pub seed: u64,
    /// `max_n ‖ξ_n‖` over every iterate, recorded or not.
    pub max_norm: f64,
    /// Number of steps in which the ball projection moved `T^α(ξ_n)`.
    pub safeguard_activations: usize,
}

impl IterationTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace always holds the initial record")
    }

    pub fn final_fix_residual(&self) -> f64 {
        self.last().fix_residual
    }

    pub fn final_costs(&self) -> &[f64] {
        &self.last().costs
    }

    pub fn fix_residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fix_residual).collect()
    }

    pub fn cycle_residuals(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.cycle_residual).collect()
    }

    /// One header line, then one row per record:
    /// `iter,fix_residual,cycle_residual,cost_1..cost_m,x_1_1..x_m_d`.
    /// Floats carry 17 significant digits; an inapplicable cycle residual
    /// is an empty field.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let sig = self.final_point.signature();
        let mut header = String::from("iter,fix_residual,cycle_residual");
        for i in 1..=sig.player_count() {
            header.push_str(&format!(",cost_{i}"));
        }
        for i in 0..sig.player_count() {
            for k in 1..=sig.block_dim(i) {
                header.push_str(&format!(",x_{}_{k}", i + 1));
            }
        }
        writeln!(w, "{header}")?;
        for r in &self.records {
            let mut line = format!("{},{:.16e},", r.iter, r.fix_residual);
            if let Some(c) = r.cycle_residual {
                line.push_str(&format!("{c:.16e}"));
            }
            for c in &r.costs {
                line.push_str(&format!(",{c:.16e}"));
            }
            for v in r.point.x.as_slice() {
                line.push_str(&format!(",{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io)?;
        self.write_csv(BufWriter::new(file)).map_err(io)
    }
}

/// `η − λ 𝔊̃(η)` with `η = S(ξ_n)`. The dual block of the result is the
/// dual block of `η`.
pub fn hsdm_step(
    ctx: &SplittingContext,
    selector: &UpperSelector,
    xi: &PrimalDualPoint,
    lambda: f64,
) -> Result<PrimalDualPoint> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("λ = {lambda} must be nonnegative")));
    }
    let eta = ctx.safeguarded_t(xi)?;
    descend(selector, eta, lambda)
}

fn descend(selector: &UpperSelector, eta: PrimalDualPoint, lambda: f64) -> Result<PrimalDualPoint> {
    if selector.is_zero() || lambda == 0.0 {
        return Ok(eta);
    }
    let g = lift_upper_selector(selector, &eta)?;
    PrimalDualPoint::axpy(-lambda, &g, &eta)
}

/// Runs the safeguarded HSDM from `xi0`.
pub fn run_hsdm(
    game: &LowerGame,
    selector: &UpperSelector,
    config: &SolverConfig,
    xi0: &PrimalDualPoint,
) -> Result<IterationTrace> {
    run_observed(game, selector, selector, config, xi0)
}

/// The FBF baseline `ξ_{n+1} = S(ξ_n)`; costs are recorded as zeros.
pub fn run_fbf(game: &LowerGame, config: &SolverConfig, xi0: &PrimalDualPoint) -> Result<IterationTrace> {
    run_observed(game, &UpperSelector::Zero, &UpperSelector::Zero, config, xi0)
}

/// The FBF baseline with upper costs of `observed` recorded alongside.
pub fn run_fbf_observed(
    game: &LowerGame,
    observed: &UpperSelector,
    config: &SolverConfig,
    xi0: &PrimalDualPoint,
) -> Result<IterationTrace> {
    run_observed(game, &UpperSelector::Zero, observed, config, xi0)
}

/// Descends along `selector` while recording the upper costs of `observed`.
pub fn run_observed(
    game: &LowerGame,
    selector: &UpperSelector,
    observed: &UpperSelector,
    config: &SolverConfig,
    xi0: &PrimalDualPoint,
) -> Result<IterationTrace> {
    let ctx = config.context(game)?;
    run_with_context(&ctx, selector, observed, config, xi0)
}

/// [`run_observed`] with a prebuilt context; `γ`, `α`, `r` and the dual
/// update come from `ctx`, the rest from `config`.
pub fn run_with_context(
    ctx: &SplittingContext,
    selector: &UpperSelector,
    observed: &UpperSelector,
    config: &SolverConfig,
    xi0: &PrimalDualPoint,
) -> Result<IterationTrace> {
    config.validate()?;
    let game = ctx.game();
    let sig = game.signature();
    if **xi0.signature() != **sig || xi0.u.len() != sig.dual_dim() {
        return Err(Error::Dimension("initial point does not match the game's space".into()));
    }
    if !xi0.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let cycle_sets = match game.pseudo_gradient() {
        PseudoGradient::ImplicitSets(sets) => Some(sets.clone()),
        _ => None,
    };
    let kappa = selector.kappa(sig.player_count());
    let radius = ctx.radius();
    let tol = config.residual_tolerance;

    let mut records = Vec::new();
    let mut record = |n: usize, res: f64, xi: &PrimalDualPoint| -> Result<()> {
        let cycle = match &cycle_sets {
            Some(sets) => Some(cycle_residual(sets, &xi.x)?),
            None => None,
        };
        records.push(TraceRecord {
            iter: n,
            fix_residual: res,
            cycle_residual: cycle,
            costs: observed.costs(&xi.x)?,
            point: xi.clone(),
        });
        Ok(())
    };

    let mut xi = xi0.clone();
    let mut max_norm = xi.norm();
    let mut activations = 0;
    let mut n = 0;
    let stop_reason = loop {
        let t = ctx.t_alpha(&xi)?;
        if !t.is_finite() {
            return Err(Error::Divergence { iteration: n });
        }
        if t.norm() > radius {
            activations += 1;
        }
        let eta = project_ball(radius, t);
        let res = eta.distance(&xi)?;
        let converged = tol > 0.0 && res < tol && {
            let lam = config.lambda.value(n.max(1))?;
            lam * kappa * xi.x.norm() < tol
        };
        if n == config.max_iters || converged || config.record.records(n) {
            record(n, res, &xi)?;
        }
        if converged {
            break StopReason::Tolerance;
        }
        if n == config.max_iters {
            break StopReason::Budget;
        }
        let next = descend(selector, eta, config.lambda.value(n + 1)?)?;
        n += 1;
        if !next.is_finite() {
            return Err(Error::Divergence { iteration: n });
        }
        max_norm = max_norm.max(next.norm());
        xi = next;
    };
    log::debug!(
        "{} run stopped at n = {n} ({stop_reason:?}), residual {:e}",
        selector.name(),
        records.last().map_or(f64::NAN, |r| r.fix_residual)
    );
    Ok(IterationTrace {
        records,
        final_point: xi,
        iterations: n,
        stop_reason,
        gamma: ctx.gamma(),
        kappa_a: ctx.kappa_a(),
        selector: selector.name(),
        seed: config.seed,
        max_norm,
        safeguard_activations: activations,
    })
}
