//! Closed convex sets with exact metric projections.

use crate::error::{dim_err, Error, Result};
use crate::space::norm;

/// `⨉_k [lower_k, upper_k]`. A degenerate box (`lower = upper`) is a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(dim_err(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(dim_err("box must have at least one coordinate"));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InvalidParameter(format!(
                    "box coordinate {k}: lower {l} exceeds upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
}

/// Closed ball `B̄(center; radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSet {
    center: Vec<f64>,
    radius: f64,
}

impl BallSet {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius {radius} is negative")));
        }
        if center.is_empty() {
            return Err(dim_err("ball must have at least one coordinate"));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// `{y | y_k ≤ bound_k for all k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBoundedSet {
    bound: Vec<f64>,
}

impl UpperBoundedSet {
    pub fn new(bound: Vec<f64>) -> Result<Self> {
        if bound.is_empty() {
            return Err(dim_err("bound must have at least one coordinate"));
        }
        if bound.iter().any(|c| c.is_nan()) {
            return Err(Error::InvalidParameter("upper bound contains NaN".into()));
        }
        Ok(Self { bound })
    }

    pub fn bound(&self) -> &[f64] {
        &self.bound
    }
}

/// The whole space `ℝ^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WholeSpace {
    pub dim: usize,
}

/// A closed convex set exposed through its projection.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    Box(BoxSet),
    Ball(BallSet),
    UpperBounded(UpperBoundedSet),
    Whole(WholeSpace),
}

impl From<BoxSet> for ConvexSet {
    fn from(s: BoxSet) -> Self {
        Self::Box(s)
    }
}

impl From<BallSet> for ConvexSet {
    fn from(s: BallSet) -> Self {
        Self::Ball(s)
    }
}

impl From<UpperBoundedSet> for ConvexSet {
    fn from(s: UpperBoundedSet) -> Self {
        Self::UpperBounded(s)
    }
}

impl From<WholeSpace> for ConvexSet {
    fn from(s: WholeSpace) -> Self {
        Self::Whole(s)
    }
}

impl ConvexSet {
    pub fn whole(dim: usize) -> Self {
        Self::Whole(WholeSpace { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box(b) => b.lower.len(),
            Self::Ball(b) => b.center.len(),
            Self::UpperBounded(s) => s.bound.len(),
            Self::Whole(w) => w.dim,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Self::Box(b) => b
                .lower
                .iter()
                .chain(&b.upper)
                .all(|v| v.is_finite()),
            Self::Ball(_) => true,
            Self::UpperBounded(_) | Self::Whole(_) => false,
        }
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(dim_err(format!(
                "point has dimension {}, set has dimension {}",
                y.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Writes `P(y)` into `out`. Both slices must match the set dimension.
    pub(crate) fn project_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Self::Box(b) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = y[k].clamp(b.lower[k], b.upper[k]);
                }
            }
            Self::Ball(b) => {
                let d: f64 = y
                    .iter()
                    .zip(&b.center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                if d <= b.radius {
                    out.copy_from_slice(y);
                } else {
                    let s = b.radius / d;
                    for (k, o) in out.iter_mut().enumerate() {
                        *o = b.center[k] + s * (y[k] - b.center[k]);
                    }
                }
            }
            Self::UpperBounded(s) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = y[k].min(s.bound[k]);
                }
            }
            Self::Whole(_) => out.copy_from_slice(y),
        }
    }

    /// Metric projection `argmin_{z ∈ set} ‖y − z‖`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y)?;
        let mut out = vec![0.0; y.len()];
        self.project_into(y, &mut out);
        Ok(out)
    }

    /// `d(y, set) = ‖y − P(y)‖`.
    pub fn distance(&self, y: &[f64]) -> Result<f64> {
        Ok(norm(&self.half_squared_distance_gradient(y)?))
    }

    /// `∇(½ d(·, set)²)(y) = y − P(y)`.
    pub fn half_squared_distance_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let p = self.project(y)?;
        Ok(y.iter().zip(&p).map(|(a, b)| a - b).collect())
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> Result<bool> {
        Ok(self.distance(y)? <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box(n: usize) -> ConvexSet {
        BoxSet::new(vec![0.0; n], vec![1.0; n]).unwrap().into()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(unit_box(1).project(&[2.0]).unwrap(), vec![1.0]);
        let ball: ConvexSet = BallSet::new(vec![0.0, 0.0], 1.0).unwrap().into();
        let p = ball.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let ub: ConvexSet = UpperBoundedSet::new(vec![1.0]).unwrap().into();
        assert_eq!(ub.project(&[4.0]).unwrap(), vec![1.0]);
        assert_eq!(ub.project(&[0.5]).unwrap(), vec![0.5]);
        assert_eq!(ConvexSet::whole(2).project(&[7.0, -3.0]).unwrap(), vec![7.0, -3.0]);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(unit_box(2).distance(&[0.5, 0.25]).unwrap(), 0.0);
        assert!((unit_box(2).distance(&[2.0, 2.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let ball: ConvexSet = BallSet::new(vec![0.0, 0.0], 1.0).unwrap().into();
        assert_eq!(ball.distance(&[0.0, 2.0]).unwrap(), 1.0);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(unit_box(1).half_squared_distance_gradient(&[0.3]).unwrap(), vec![0.0]);
        assert_eq!(unit_box(1).half_squared_distance_gradient(&[3.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn degenerate_box_projects_to_its_point() {
        let pt: ConvexSet = BoxSet::new(vec![1.5, -2.0], vec![1.5, -2.0]).unwrap().into();
        assert_eq!(pt.project(&[10.0, 10.0]).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn invalid_sets_and_dimension_mismatch() {
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
        assert!(BoxSet::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(BallSet::new(vec![0.0], -1.0).is_err());
        assert!(matches!(unit_box(2).project(&[1.0]), Err(Error::Dimension(_))));
        assert!(matches!(unit_box(2).distance(&[1.0, 2.0, 3.0]), Err(Error::Dimension(_))));
    }

    fn half_sq_dist(set: &ConvexSet, y: &[f64]) -> f64 {
        0.5 * set.distance(y).unwrap().powi(2)
    }

    #[test]
    fn gradient_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let sets: Vec<ConvexSet> = vec![
            BoxSet::new(vec![-1.0, 0.0, 2.0], vec![1.0, 0.5, 3.0]).unwrap().into(),
            BallSet::new(vec![1.0, -1.0, 0.0], 2.0).unwrap().into(),
            UpperBoundedSet::new(vec![0.0, 1.0, -1.0]).unwrap().into(),
        ];
        let h = 1e-5;
        for set in &sets {
            for _ in 0..100 {
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
                let g = set.half_squared_distance_gradient(&y).unwrap();
                for k in 0..3 {
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    yp[k] += h;
                    ym[k] -= h;
                    let fd = (half_sq_dist(set, &yp) - half_sq_dist(set, &ym)) / (2.0 * h);
                    assert!(
                        (fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0),
                        "{set:?} at {y:?}: fd {fd} vs {}",
                        g[k]
                    );
                }
            }
        }
    }

    fn any_set() -> impl Strategy<Value = ConvexSet> {
        prop_oneof![
            (prop::collection::vec(-3.0f64..3.0, 3), prop::collection::vec(0.0f64..3.0, 3))
                .prop_map(|(l, w)| {
                    let u = l.iter().zip(&w).map(|(a, b)| a + b).collect();
                    BoxSet::new(l, u).unwrap().into()
                }),
            (prop::collection::vec(-3.0f64..3.0, 3), 0.0f64..4.0)
                .prop_map(|(c, r)| BallSet::new(c, r).unwrap().into()),
            prop::collection::vec(-3.0f64..3.0, 3)
                .prop_map(|c| UpperBoundedSet::new(c).unwrap().into()),
            Just(ConvexSet::whole(3)),
        ]
    }

    fn point() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 3)
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(set in any_set(), y in point()) {
            let p = set.project(&y).unwrap();
            let pp = set.project(&p).unwrap();
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn projection_is_nonexpansive(set in any_set(), y in point(), z in point()) {
            let py = set.project(&y).unwrap();
            let pz = set.project(&z).unwrap();
            let d: Vec<f64> = py.iter().zip(&pz).map(|(a, b)| a - b).collect();
            let e: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
            prop_assert!(norm(&d) <= norm(&e) + 1e-12);
        }

        #[test]
        fn obtuse_angle_inequality(set in any_set(), y in point(), z in point()) {
            let py = set.project(&y).unwrap();
            let zin = set.project(&z).unwrap();
            let lhs: f64 = y
                .iter()
                .zip(&py)
                .zip(&zin)
                .map(|((yk, pk), zk)| (yk - pk) * (zk - pk))
                .sum();
            prop_assert!(lhs <= 1e-10);
        }
    }
}
