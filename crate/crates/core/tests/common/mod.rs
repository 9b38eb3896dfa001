#![allow(dead_code)]

use vgnep::experiment::{gen_coupled_game, gen_cycles_instance};
use vgnep::solver::{run_fbf, SolverConfig, StepSize};
use vgnep::space::{BlockVector, PrimalDualPoint};
use vgnep::splitting::{SplittingContext, StepPolicy};
use vgnep::{ConvexSet, CoupledGame, LinearCoupling, LowerGame, PseudoGradient, SpaceSignature};
use vgnep::{BoxSet, UpperBoundedSet};

/// m = 2 scalar players, W = (1, 1), p = 2, C_i = [0, 1], x_1 + x_2 ≤ 0.5.
/// The shared constraint is active at the equilibrium.
pub fn tiny_coupled() -> LowerGame {
    let sig = SpaceSignature::uniform(2, 1, 1).unwrap();
    let game = CoupledGame::new(vec![vec![1.0], vec![1.0]], vec![2.0]).unwrap();
    let kappa = game.lipschitz_constant();
    LowerGame::new(
        sig,
        PseudoGradient::Coupled(game),
        kappa,
        vec![BoxSet::new(vec![0.0], vec![1.0]).unwrap().into(); 2],
        LinearCoupling::Sum {
            players: 2,
            block_dim: 1,
        },
        UpperBoundedSet::new(vec![0.5]).unwrap().into(),
    )
    .unwrap()
}

/// The built-in families plus the tiny game, each with a range for random
/// points.
pub fn families() -> Vec<(&'static str, LowerGame, f64)> {
    vec![
        ("tiny", tiny_coupled(), 3.0),
        ("cycles", gen_cycles_instance(0).unwrap().game, 150.0),
        ("coupled", gen_coupled_game(0).unwrap().game, 10.0),
    ]
}

pub fn admissible(game: &LowerGame, alpha: f64) -> SplittingContext {
    SolverConfig {
        gamma: StepSize::Auto,
        alpha,
        ..SolverConfig::default()
    }
    .context(game)
    .unwrap()
}

/// A fixed point from a long FBF run.
pub fn fixed_point(game: &LowerGame) -> PrimalDualPoint {
    let config = SolverConfig {
        max_iters: 2_000_000,
        residual_tolerance: 1e-13,
        ..SolverConfig::default()
    };
    let t = run_fbf(game, &config, &PrimalDualPoint::zeros(game.signature())).unwrap();
    assert!(t.final_fix_residual() < 1e-12, "FBF stalled at {:e}", t.final_fix_residual());
    t.final_point
}

pub fn point(game: &LowerGame, flat: &[f64]) -> PrimalDualPoint {
    let sig = game.signature();
    let (x, u) = flat.split_at(sig.primal_dim());
    PrimalDualPoint::new(BlockVector::from_flat(sig, x.to_vec()).unwrap(), u.to_vec()).unwrap()
}

pub fn len(game: &LowerGame) -> usize {
    game.signature().primal_dim() + game.signature().dual_dim()
}

pub fn whole(dim: usize) -> ConvexSet {
    ConvexSet::whole(dim)
}

pub fn permissive(game: &LowerGame, gamma: f64, alpha: f64) -> SplittingContext {
    SplittingContext::new(game.clone(), gamma, alpha, 1e15, StepPolicy::Permissive).unwrap()
}
