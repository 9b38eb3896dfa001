//! Seeded instance generators, experiment configuration and run
//! orchestration.
//!
//! Randomness comes from `ChaCha8Rng` seeded with the experiment seed.
//! Stream 0 draws the instance; stream `k + 1` draws initial point `k`, so
//! adding inits never perturbs the instance or the earlier inits.

use std::fmt::{self, Write as _};
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::model::{CoupledGame, LinearCoupling, LowerGame, PseudoGradient, UpperSelector};
use crate::oracles::{boxes_intersect, zero_inclusion_check, InclusionReport};
use crate::sets::{BoxSet, ConvexSet, UpperBoundedSet};
use crate::solver::{
    run_with_context, IterationTrace, LambdaSchedule, RecordCadence, SolverConfig, StepSize,
};
use crate::space::{BlockVector, PrimalDualPoint};
use crate::splitting::{DualUpdate, StepPolicy};

/// Side of the cube `[0, BOX_RANGE]^d` that holds the random boxes.
pub const BOX_RANGE: f64 = 100.0;
const BOX_RESAMPLES: usize = 1000;

/// Per-resource capacity `c_j`, player upper bound `b^up` and the ranges of
/// the price, lower bounds and weights in the coupled game.
pub const CAPACITY: f64 = 120.0;
pub const UPPER_BOUND: f64 = 100.0;
pub const PRICE_RANGE: Range<f64> = 0.0..10.0;
pub const LOWER_BOUND_RANGE: Range<f64> = -1.0..1.0;
pub const WEIGHT_RANGE: Range<f64> = 0.0..1.0;
const WEIGHT_RESAMPLES: usize = 100_000;

/// Initial points of the coupled game are uniform in `[−10, 10]` per entry.
pub const COUPLED_INIT_RANGE: Range<f64> = -10.0..10.0;

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Cycles,
    CoupledGame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorKind {
    None,
    Consensus,
    Cycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Fbf,
    Hsdm,
    Both,
}

impl Algo {
    fn runs(self) -> &'static [Algo] {
        match self {
            Algo::Fbf => &[Algo::Fbf],
            Algo::Hsdm => &[Algo::Hsdm],
            Algo::Both => &[Algo::Fbf, Algo::Hsdm],
        }
    }
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(format!(
                        "unknown value {s:?}, expected one of: {}",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

named_enum!(Family { Cycles => "cycles", CoupledGame => "coupled-game" });
named_enum!(SelectorKind { None => "none", Consensus => "consensus", Cycle => "cycle" });
named_enum!(Algo { Fbf => "fbf", Hsdm => "hsdm", Both => "both" });

/// The implicit-set game: `m` boxes `K_i ⊂ [0, 100]^d` with empty common
/// intersection and `G(x)_i = x_i − P_{K_i}(x_i)`.
#[derive(Debug, Clone)]
pub struct CyclesInstance {
    pub game: LowerGame,
    pub boxes: Vec<BoxSet>,
}

impl CyclesInstance {
    pub fn sets(&self) -> Vec<ConvexSet> {
        self.boxes.iter().cloned().map(ConvexSet::from).collect()
    }
}

/// Six boxes in `[0, 100]^3`.
pub fn gen_cycles_instance(seed: u64) -> Result<CyclesInstance> {
    gen_cycles_instance_with(seed, 6, 3)
}

/// Each box takes two uniform draws per coordinate as its corners. The
/// whole collection is redrawn until the boxes have empty intersection.
pub fn gen_cycles_instance_with(seed: u64, players: usize, dim: usize) -> Result<CyclesInstance> {
    if players < 2 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "cycles need at least 2 players and dimension ≥ 1, got m = {players}, d = {dim}"
        )));
    }
    let mut rng = stream(seed, 0);
    for _ in 0..BOX_RESAMPLES {
        let boxes = (0..players)
            .map(|_| {
                let (lo, hi): (Vec<f64>, Vec<f64>) = (0..dim)
                    .map(|_| {
                        let a = rng.random_range(0.0..=BOX_RANGE);
                        let b = rng.random_range(0.0..=BOX_RANGE);
                        (a.min(b), a.max(b))
                    })
                    .unzip();
                BoxSet::new(lo, hi)
            })
            .collect::<Result<Vec<_>>>()?;
        if boxes_intersect(&boxes) {
            continue;
        }
        let sets: Vec<ConvexSet> = boxes.iter().cloned().map(ConvexSet::from).collect();
        let sig = crate::space::SpaceSignature::uniform(players, dim, 1)?;
        let game = LowerGame::new(
            sig,
            PseudoGradient::ImplicitSets(sets),
            1.0,
            vec![ConvexSet::whole(dim); players],
            LinearCoupling::Zero { dual_dim: 1 },
            ConvexSet::whole(1),
        )?;
        return Ok(CyclesInstance { game, boxes });
    }
    Err(Error::Generator(format!(
        "no box collection with empty intersection after {BOX_RESAMPLES} draws"
    )))
}

/// A coupled resource game with its generated data.
#[derive(Debug, Clone)]
pub struct CoupledInstance {
    pub game: LowerGame,
    pub model: CoupledGame,
    /// `b^low_i`, one vector per player.
    pub lower_bounds: Vec<Vec<f64>>,
    pub capacity: Vec<f64>,
    /// Consensus targets `t_i ∈ C_i`.
    pub targets: Vec<Vec<f64>>,
    /// How many weight draws were needed to get a strongly monotone `G`.
    pub weight_draws: usize,
}

/// Six players, three resources.
pub fn gen_coupled_game(seed: u64) -> Result<CoupledInstance> {
    gen_coupled_game_with(seed, 6, 3)
}

/// Draw order on stream 0: price, lower bounds, weights (redrawn until the
/// pseudo-gradient is strongly monotone), targets.
pub fn gen_coupled_game_with(seed: u64, players: usize, dim: usize) -> Result<CoupledInstance> {
    if players < 2 || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "the coupled game needs at least 2 players and 1 resource, got m = {players}, M = {dim}"
        )));
    }
    if players as f64 * LOWER_BOUND_RANGE.end >= CAPACITY {
        return Err(Error::InvalidParameter(format!(
            "{players} players can exceed the capacity {CAPACITY} at their lower bounds"
        )));
    }
    let mut rng = stream(seed, 0);
    let price: Vec<f64> = (0..dim).map(|_| rng.random_range(PRICE_RANGE)).collect();
    let lower_bounds: Vec<Vec<f64>> = (0..players)
        .map(|_| (0..dim).map(|_| rng.random_range(LOWER_BOUND_RANGE)).collect())
        .collect();
    let mut model = None;
    let mut weight_draws = 0;
    while weight_draws < WEIGHT_RESAMPLES {
        weight_draws += 1;
        let weights: Vec<Vec<f64>> = (0..players)
            .map(|_| (0..dim).map(|_| rng.random_range(WEIGHT_RANGE)).collect())
            .collect();
        let candidate = CoupledGame::new(weights, price.clone())?;
        if candidate.is_strongly_monotone() {
            model = Some(candidate);
            break;
        }
    }
    let model = model.ok_or_else(|| {
        Error::Generator(format!("no strongly monotone weights after {WEIGHT_RESAMPLES} draws"))
    })?;
    let targets: Vec<Vec<f64>> = lower_bounds
        .iter()
        .map(|lo| lo.iter().map(|&l| rng.random_range(l..=UPPER_BOUND)).collect())
        .collect();

    let sig = crate::space::SpaceSignature::uniform(players, dim, dim)?;
    let strategy_sets = lower_bounds
        .iter()
        .map(|lo| BoxSet::new(lo.clone(), vec![UPPER_BOUND; dim]).map(ConvexSet::from))
        .collect::<Result<Vec<_>>>()?;
    let capacity = vec![CAPACITY; dim];
    let game = LowerGame::new(
        sig,
        PseudoGradient::Coupled(model.clone()),
        model.lipschitz_constant(),
        strategy_sets,
        LinearCoupling::Sum {
            players,
            block_dim: dim,
        },
        UpperBoundedSet::new(capacity.clone())?.into(),
    )?;
    Ok(CoupledInstance {
        game,
        model,
        lower_bounds,
        capacity,
        targets,
        weight_draws,
    })
}

/// Initial point `k`. For the cycles family init 0 is the origin and later
/// inits are uniform in `[0, 100]` per primal entry with zero dual; for the
/// coupled game every entry is uniform in `[−10, 10]`.
pub fn initial_point(family: Family, game: &LowerGame, seed: u64, k: usize) -> Result<PrimalDualPoint> {
    let sig = game.signature();
    if family == Family::Cycles && k == 0 {
        return Ok(PrimalDualPoint::zeros(sig));
    }
    let mut rng = stream(seed, k as u64 + 1);
    let (range, dual) = match family {
        Family::Cycles => (0.0..BOX_RANGE, false),
        Family::CoupledGame => (COUPLED_INIT_RANGE, true),
    };
    let x: Vec<f64> = (0..sig.primal_dim()).map(|_| rng.random_range(range.clone())).collect();
    let u: Vec<f64> = (0..sig.dual_dim())
        .map(|_| if dual { rng.random_range(range.clone()) } else { 0.0 })
        .collect();
    PrimalDualPoint::new(BlockVector::from_flat(sig, x)?, u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub family: Family,
    pub selector: SelectorKind,
    pub algo: Algo,
    /// `m`.
    pub players: usize,
    /// Block dimension: `d` for cycles, `M` for the coupled game.
    pub dim: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub init_count: usize,
    pub output_prefix: PathBuf,
}

impl ExperimentSpec {
    /// The published settings of each experiment.
    pub fn defaults(family: Family) -> Self {
        match family {
            Family::Cycles => Self {
                family,
                selector: SelectorKind::Cycle,
                algo: Algo::Hsdm,
                players: 6,
                dim: 3,
                seed: 0,
                solver: SolverConfig {
                    gamma: StepSize::Fixed(0.2),
                    alpha: 0.5,
                    safeguard_radius: 1e15,
                    max_iters: 100_000,
                    ..SolverConfig::default()
                },
                init_count: 1,
                output_prefix: PathBuf::from("cycles"),
            },
            Family::CoupledGame => Self {
                family,
                selector: SelectorKind::Consensus,
                algo: Algo::Both,
                players: 6,
                dim: 3,
                seed: 0,
                solver: SolverConfig {
                    gamma: StepSize::Fixed(0.25),
                    alpha: 0.75,
                    safeguard_radius: 1e15,
                    max_iters: 1_000_000,
                    // γ = 0.25 is above 1/(κ_G + ‖L‖) for these instances.
                    step_policy: StepPolicy::Permissive,
                    ..SolverConfig::default()
                },
                init_count: 3,
                output_prefix: PathBuf::from("coupled-game"),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.solver.alpha > 0.0 && self.solver.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} must lie in (0, 1)", self.solver.alpha)));
        }
        if let StepSize::Fixed(g) = self.solver.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParameter(format!("gamma = {g} must be positive")));
            }
        }
        if !(self.solver.safeguard_radius > 0.0) {
            return Err(Error::InvalidParameter("radius must be positive".into()));
        }
        if self.init_count == 0 {
            return Err(Error::InvalidParameter("inits must be at least 1".into()));
        }
        if self.players < 2 || self.dim == 0 {
            return Err(Error::InvalidParameter("players must be ≥ 2 and dim ≥ 1".into()));
        }
        if self.family == Family::CoupledGame && self.players as f64 * LOWER_BOUND_RANGE.end >= CAPACITY {
            return Err(Error::InvalidParameter(format!(
                "{} players can exceed the capacity {CAPACITY}",
                self.players
            )));
        }
        if self.family == Family::Cycles && self.selector == SelectorKind::Consensus {
            return Err(Error::InvalidParameter(
                "the consensus selector needs targets, which only the coupled game provides".into(),
            ));
        }
        Ok(())
    }

    fn path_for(&self, algo: Algo, init: usize) -> PathBuf {
        suffixed(&self.output_prefix, &format!("_{algo}_init{init}.csv"))
    }

    pub fn summary_path(&self) -> PathBuf {
        suffixed(&self.output_prefix, "_summary.txt")
    }
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Flat key-value configuration. Every key is optional; missing keys keep
/// the family defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RawConfig {
    family: Option<Spanned<String>>,
    selector: Option<Spanned<String>>,
    algo: Option<Spanned<String>>,
    players: Option<Spanned<usize>>,
    dim: Option<Spanned<usize>>,
    seed: Option<Spanned<u64>>,
    gamma: Option<Spanned<GammaValue>>,
    alpha: Option<Spanned<f64>>,
    radius: Option<Spanned<f64>>,
    lambda_scale: Option<Spanned<f64>>,
    lambda_exponent: Option<Spanned<f64>>,
    iters: Option<Spanned<usize>>,
    tolerance: Option<Spanned<f64>>,
    record_every: Option<Spanned<usize>>,
    inits: Option<Spanned<usize>>,
    out: Option<Spanned<String>>,
    literal_line6: Option<Spanned<bool>>,
    step_policy: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GammaValue {
    Number(f64),
    Word(String),
}

/// Reads a configuration file. `family` fills in when the file has no
/// `family` key; when both are given they must agree.
pub fn parse_config(path: &Path, family: Option<Family>) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, &path.display().to_string(), family)
}

/// [`parse_config`] on an in-memory string; `origin` names it in errors.
pub fn parse_config_str(text: &str, origin: &str, family: Option<Family>) -> Result<ExperimentSpec> {
    let line_of = |offset: usize| text[..offset.min(text.len())].matches('\n').count() + 1;
    let fail = |span: Range<usize>, message: String| Error::Config {
        path: origin.to_string(),
        line: line_of(span.start),
        message,
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
        path: origin.to_string(),
        line: e.span().map_or(1, |s| line_of(s.start)),
        message: e.message().to_string(),
    })?;

    fn parsed<T: FromStr<Err = String>>(
        v: &Spanned<String>,
        fail: &impl Fn(Range<usize>, String) -> Error,
    ) -> Result<T> {
        v.get_ref().parse().map_err(|e| fail(v.span(), e))
    }

    let family = match (&raw.family, family) {
        (Some(v), hint) => {
            let f: Family = parsed(v, &fail)?;
            if let Some(h) = hint.filter(|&h| h != f) {
                return Err(fail(v.span(), format!("file is for family {f}, but {h} was requested")));
            }
            f
        }
        (None, Some(h)) => h,
        (None, None) => return Err(fail(0..0, "no family given".into())),
    };
    let mut spec = ExperimentSpec::defaults(family);

    if let Some(v) = &raw.selector {
        spec.selector = parsed(v, &fail)?;
    }
    if let Some(v) = &raw.algo {
        spec.algo = parsed(v, &fail)?;
    }
    if let Some(v) = &raw.players {
        spec.players = *v.get_ref();
    }
    if let Some(v) = &raw.dim {
        spec.dim = *v.get_ref();
    }
    if let Some(v) = &raw.seed {
        spec.seed = *v.get_ref();
    }
    spec.solver.seed = spec.seed;
    if let Some(v) = &raw.gamma {
        spec.solver.gamma = match v.get_ref() {
            GammaValue::Number(g) if *g > 0.0 && g.is_finite() => StepSize::Fixed(*g),
            GammaValue::Number(g) => return Err(fail(v.span(), format!("gamma = {g} must be positive"))),
            GammaValue::Word(w) if w == "auto" => StepSize::Auto,
            GammaValue::Word(w) => {
                return Err(fail(v.span(), format!("gamma must be a number or \"auto\", got {w:?}")))
            }
        };
    }
    if let Some(v) = &raw.alpha {
        let a = *v.get_ref();
        if !(a > 0.0 && a < 1.0) {
            return Err(fail(v.span(), format!("alpha = {a} must lie in (0, 1)")));
        }
        spec.solver.alpha = a;
    }
    if let Some(v) = &raw.radius {
        let r = *v.get_ref();
        if !(r > 0.0) {
            return Err(fail(v.span(), format!("radius = {r} must be positive")));
        }
        spec.solver.safeguard_radius = r;
    }
    let scale = raw.lambda_scale.as_ref().map_or(1.0, |v| *v.get_ref());
    let exponent = raw.lambda_exponent.as_ref().map_or(1.0, |v| *v.get_ref());
    spec.solver.lambda = if scale == 1.0 && exponent == 1.0 {
        LambdaSchedule::Harmonic
    } else {
        LambdaSchedule::Power { scale, exponent }
    };
    if let Err(e) = spec.solver.lambda.validate() {
        let span = raw
            .lambda_exponent
            .as_ref()
            .or(raw.lambda_scale.as_ref())
            .map_or(0..0, |v| v.span());
        return Err(fail(span, e.to_string()));
    }
    if let Some(v) = &raw.iters {
        spec.solver.max_iters = *v.get_ref();
    }
    if let Some(v) = &raw.tolerance {
        let t = *v.get_ref();
        if !(t >= 0.0) {
            return Err(fail(v.span(), format!("tolerance = {t} must be nonnegative")));
        }
        spec.solver.residual_tolerance = t;
    }
    if let Some(v) = &raw.record_every {
        spec.solver.record = match *v.get_ref() {
            0 => RecordCadence::LogSpaced,
            k => RecordCadence::Every(k),
        };
    }
    if let Some(v) = &raw.inits {
        spec.init_count = *v.get_ref();
    }
    if let Some(v) = &raw.out {
        spec.output_prefix = PathBuf::from(v.get_ref());
    }
    if let Some(v) = &raw.literal_line6 {
        spec.solver.dual_update = if *v.get_ref() {
            DualUpdate::Literal
        } else {
            DualUpdate::Corrected
        };
    }
    if let Some(v) = &raw.step_policy {
        spec.solver.step_policy = match v.get_ref().as_str() {
            "strict" => StepPolicy::Strict,
            "warn" => StepPolicy::Permissive,
            other => {
                return Err(fail(v.span(), format!("step-policy must be \"strict\" or \"warn\", got {other:?}")))
            }
        };
    }
    spec.validate().map_err(|e| fail(0..0, e.to_string()))?;
    Ok(spec)
}

/// The instance behind a spec, with the selector it asks for.
#[derive(Debug, Clone)]
pub struct BuiltInstance {
    pub game: LowerGame,
    pub selector: UpperSelector,
    pub cycles: Option<CyclesInstance>,
    pub coupled: Option<CoupledInstance>,
}

pub fn build_instance(spec: &ExperimentSpec) -> Result<BuiltInstance> {
    let (game, cycles, coupled) = match spec.family {
        Family::Cycles => {
            let inst = gen_cycles_instance_with(spec.seed, spec.players, spec.dim)?;
            (inst.game.clone(), Some(inst), None)
        }
        Family::CoupledGame => {
            let inst = gen_coupled_game_with(spec.seed, spec.players, spec.dim)?;
            (inst.game.clone(), None, Some(inst))
        }
    };
    let selector = match spec.selector {
        SelectorKind::None => UpperSelector::Zero,
        SelectorKind::Cycle => UpperSelector::Cycle,
        SelectorKind::Consensus => match &coupled {
            Some(c) => UpperSelector::Consensus {
                targets: c.targets.clone(),
            },
            None => {
                return Err(Error::InvalidParameter(
                    "the consensus selector needs targets, which only the coupled game provides".into(),
                ))
            }
        },
    };
    Ok(BuiltInstance {
        game,
        selector,
        cycles,
        coupled,
    })
}

/// Final state of one successful run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub trace: IterationTrace,
    pub inclusion: InclusionReport,
}

impl RunSummary {
    /// `‖T_FB(ξ) − ξ‖ ≤ 10 ‖S(ξ) − ξ‖` at the final point, with the right
    /// side floored at rounding level `ε max(1, ‖ξ‖)`.
    pub fn certified(&self) -> bool {
        let floor = f64::EPSILON * self.trace.final_point.norm().max(1.0);
        self.inclusion.residual <= 10.0 * self.trace.final_fix_residual().max(floor)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub algo: Algo,
    pub init: usize,
    pub csv_path: PathBuf,
    /// A failed run carries its error message; sibling runs are unaffected.
    pub outcome: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub kappa_g: f64,
    pub l_norm_bound: f64,
    pub gamma: f64,
    pub runs: Vec<RunReport>,
    pub summary_path: PathBuf,
}

impl ExperimentReport {
    pub fn kappa_a(&self) -> f64 {
        self.kappa_g + self.l_norm_bound
    }

    /// `1 − γ (κ_G + ‖L‖)`.
    pub fn gamma_margin(&self) -> f64 {
        1.0 - self.gamma * self.kappa_a()
    }

    fn summary_text(&self) -> String {
        let mut s = String::new();
        let spec = &self.spec;
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("family", spec.family.to_string());
        kv("selector", spec.selector.to_string());
        kv("seed", spec.seed.to_string());
        kv("players", spec.players.to_string());
        kv("dim", spec.dim.to_string());
        kv("gamma", format!("{:.16e}", self.gamma));
        kv("alpha", format!("{:.16e}", spec.solver.alpha));
        kv("radius", format!("{:.16e}", spec.solver.safeguard_radius));
        kv("iters", spec.solver.max_iters.to_string());
        kv("literal_line6", (spec.solver.dual_update == DualUpdate::Literal).to_string());
        kv("kappa_g", format!("{:.16e}", self.kappa_g));
        kv("l_norm_bound", format!("{:.16e}", self.l_norm_bound));
        kv("kappa_a", format!("{:.16e}", self.kappa_a()));
        kv("gamma_margin", format!("{:.16e}", self.gamma_margin()));
        for run in &self.runs {
            let key = |k: &str| format!("run.{}.{}.{k}", run.algo, run.init);
            kv(&key("csv"), run.csv_path.display().to_string());
            match &run.outcome {
                Ok(r) => {
                    let t = &r.trace;
                    kv(&key("status"), "ok".into());
                    kv(&key("iterations"), t.iterations.to_string());
                    kv(&key("fix_residual"), format!("{:.16e}", t.final_fix_residual()));
                    if let Some(c) = t.last().cycle_residual {
                        kv(&key("cycle_residual"), format!("{c:.16e}"));
                    }
                    kv(&key("inclusion_residual"), format!("{:.16e}", r.inclusion.residual));
                    kv(&key("certified"), r.certified().to_string());
                    for (i, c) in t.final_costs().iter().enumerate() {
                        kv(&key(&format!("cost_{}", i + 1)), format!("{c:.16e}"));
                    }
                    kv(&key("max_norm"), format!("{:.16e}", t.max_norm));
                    kv(&key("safeguard_activations"), t.safeguard_activations.to_string());
                }
                Err(msg) => {
                    kv(&key("status"), "failed".into());
                    kv(&key("error"), msg.replace('\n', " "));
                }
            }
        }
        s
    }
}

/// Runs every requested (algorithm, init) pair, one thread each, writes one
/// CSV per run and then the summary file.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let inst = build_instance(spec)?;
    let game = &inst.game;
    let mut solver = spec.solver.clone();
    solver.seed = spec.seed;
    // Surfaces an inadmissible step under the strict policy before any thread starts.
    let ctx = solver.context(game)?;

    if let Some(parent) = spec.output_prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }

    let jobs: Vec<(Algo, usize)> = spec
        .algo
        .runs()
        .iter()
        .flat_map(|&a| (0..spec.init_count).map(move |k| (a, k)))
        .collect();
    let runs: Vec<RunReport> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(algo, init)| {
                let (solver, ctx, inst) = (&solver, &ctx, &inst);
                scope.spawn(move || {
                    let csv_path = spec.path_for(algo, init);
                    let outcome = (|| -> Result<RunSummary> {
                        let xi0 = initial_point(spec.family, &inst.game, spec.seed, init)?;
                        let descent = match algo {
                            Algo::Hsdm => &inst.selector,
                            _ => &UpperSelector::Zero,
                        };
                        let trace = run_with_context(ctx, descent, &inst.selector, solver, &xi0)?;
                        trace.write_csv_file(&csv_path)?;
                        let inclusion = zero_inclusion_check(ctx, &trace.final_point, 0.0)?;
                        Ok(RunSummary { trace, inclusion })
                    })()
                    .map_err(|e| e.to_string());
                    match &outcome {
                        Ok(r) => log::info!(
                            "{algo} init {init}: residual {:e} after {} iterations",
                            r.trace.final_fix_residual(),
                            r.trace.iterations
                        ),
                        Err(e) => log::warn!("{algo} init {init} failed: {e}"),
                    }
                    RunReport {
                        algo,
                        init,
                        csv_path,
                        outcome,
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });

    let report = ExperimentReport {
        spec: spec.clone(),
        kappa_g: game.kappa_g(),
        l_norm_bound: game.coupling().op_norm_bound(),
        gamma: ctx.gamma(),
        runs,
        summary_path: spec.summary_path(),
    };
    fs::write(&report.summary_path, report.summary_text()).map_err(|source| Error::Io {
        path: report.summary_path.clone(),
        source,
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycles_generator_is_seeded_and_valid() {
        let a = gen_cycles_instance(3).unwrap();
        let b = gen_cycles_instance(3).unwrap();
        assert_eq!(a.boxes, b.boxes);
        assert_ne!(a.boxes, gen_cycles_instance(4).unwrap().boxes);
        assert_eq!(a.boxes.len(), 6);
        for bx in &a.boxes {
            for k in 0..3 {
                assert!(0.0 <= bx.lower()[k] && bx.lower()[k] <= bx.upper()[k] && bx.upper()[k] <= BOX_RANGE);
            }
        }
        assert!(!boxes_intersect(&a.boxes));
        assert_eq!(a.game.kappa_g(), 1.0);
        assert_eq!(a.game.coupling().op_norm_bound(), 0.0);
    }

    #[test]
    fn coupled_generator_ranges() {
        let inst = gen_coupled_game(9).unwrap();
        assert_eq!(inst.model.price(), gen_coupled_game(9).unwrap().model.price());
        assert!(inst.model.price().iter().all(|p| PRICE_RANGE.contains(p)));
        assert!(inst.model.weights().iter().flatten().all(|w| WEIGHT_RANGE.contains(w)));
        assert!(inst.lower_bounds.iter().flatten().all(|b| LOWER_BOUND_RANGE.contains(b)));
        assert!(inst.model.is_strongly_monotone());
        for (t, lo) in inst.targets.iter().zip(&inst.lower_bounds) {
            assert!(t.iter().zip(lo).all(|(t, l)| *l <= *t && *t <= UPPER_BOUND));
        }
        assert!((inst.game.coupling().op_norm_bound() - 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(inst.game.kappa_g(), inst.model.lipschitz_constant());
    }

    #[test]
    fn init_streams_are_independent() {
        let inst = gen_coupled_game(1).unwrap();
        let a = initial_point(Family::CoupledGame, &inst.game, 1, 2).unwrap();
        let b = initial_point(Family::CoupledGame, &inst.game, 1, 2).unwrap();
        let c = initial_point(Family::CoupledGame, &inst.game, 1, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.x.as_slice().iter().chain(&a.u).all(|v| COUPLED_INIT_RANGE.contains(v)));
        let cyc = gen_cycles_instance(1).unwrap();
        assert_eq!(
            initial_point(Family::Cycles, &cyc.game, 1, 0).unwrap(),
            PrimalDualPoint::zeros(cyc.game.signature())
        );
    }

    #[test]
    fn empty_config_gives_published_defaults() {
        let spec = parse_config_str("", "mem", Some(Family::CoupledGame)).unwrap();
        assert_eq!(spec, ExperimentSpec::defaults(Family::CoupledGame));
        assert_eq!(spec.solver.gamma, StepSize::Fixed(0.25));
        assert_eq!(spec.solver.alpha, 0.75);
        assert_eq!(spec.solver.safeguard_radius, 1e15);
        assert_eq!(spec.solver.lambda, LambdaSchedule::Harmonic);
        let c = parse_config_str("", "mem", Some(Family::Cycles)).unwrap();
        assert_eq!(c.solver.gamma, StepSize::Fixed(0.2));
        assert_eq!(c.solver.alpha, 0.5);
        assert_eq!(c.solver.max_iters, 100_000);
    }

    #[test]
    fn config_values() {
        let text = "family = \"coupled-game\"\ngamma = \"auto\"\niters = 2_000\nselector = \"cycle\"\nliteral-line6 = true\nrecord-every = 10\nlambda-exponent = 0.5\n";
        let spec = parse_config_str(text, "mem", None).unwrap();
        assert_eq!(spec.solver.gamma, StepSize::Auto);
        assert_eq!(spec.solver.max_iters, 2000);
        assert_eq!(spec.selector, SelectorKind::Cycle);
        assert_eq!(spec.solver.dual_update, DualUpdate::Literal);
        assert_eq!(spec.solver.record, RecordCadence::Every(10));
        assert_eq!(
            spec.solver.lambda,
            LambdaSchedule::Power {
                scale: 1.0,
                exponent: 0.5
            }
        );
    }

    fn config_error(text: &str, family: Option<Family>) -> (usize, String) {
        match parse_config_str(text, "cfg.toml", family) {
            Err(Error::Config { line, message, .. }) => (line, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn config_errors_name_the_line() {
        let (line, msg) = config_error("seed = 1\nalpha = 1.5\n", Some(Family::Cycles));
        assert_eq!(line, 2);
        assert!(msg.contains("alpha"), "{msg}");
        let (line, msg) = config_error("seed = 1\n\nbogus = 3\n", Some(Family::Cycles));
        assert_eq!(line, 3);
        assert!(msg.contains("bogus"), "{msg}");
        let (line, _) = config_error("gamma = \"fast\"\n", Some(Family::Cycles));
        assert_eq!(line, 1);
        let (line, _) = config_error("inits = 1\nseed = -4\n", Some(Family::Cycles));
        assert_eq!(line, 2);
        let (line, _) = config_error("family = \"cycles\"\n", Some(Family::CoupledGame));
        assert_eq!(line, 1);
        config_error("", None);
        config_error("selector = \"consensus\"\n", Some(Family::Cycles));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = parse_config(Path::new("/nonexistent/vgnep.toml"), Some(Family::Cycles)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn names_round_trip() {
        for f in [Family::Cycles, Family::CoupledGame] {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        for s in [SelectorKind::None, SelectorKind::Consensus, SelectorKind::Cycle] {
            assert_eq!(s.as_str().parse::<SelectorKind>().unwrap(), s);
        }
        assert!("hsdmx".parse::<Algo>().is_err());
    }
}
