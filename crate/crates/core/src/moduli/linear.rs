//! Closed forms: linear operators, convex processes and star-shaped graphs.

use serde::{Deserialize, Serialize};

use super::{recip, LiminfSchedule, ModulusEstimate, ModulusKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::directions;
use crate::setmap::{find_preimage_in, SetMap};
use crate::space::{Ball, GraphPoint, Matrix, Settings, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModuli {
    #[serde(with = "crate::ser::ext")]
    pub sur: f64,
    #[serde(with = "crate::ser::ext")]
    pub reg: f64,
    #[serde(with = "crate::ser::ext")]
    pub semireg: f64,
    /// 1/κ with κ = min over unit h of ‖A h‖.
    #[serde(with = "crate::ser::ext")]
    pub subreg_strong: f64,
    pub injective: bool,
    pub surjective: bool,
    pub singular_values: Vec<f64>,
}

/// Moduli of a linear operator from its singular values (Euclidean norms).
pub fn linear_moduli(a: &Matrix) -> LinearModuli {
    let sv = linalg::singular_values(a);
    let rank = linalg::rank(a);
    let surjective = rank == a.nrows();
    let injective = rank == a.ncols();
    let sur = if surjective { sv.last().copied().unwrap_or(0.0) } else { 0.0 };
    let kappa = if injective { linalg::lower_bound(a) } else { 0.0 };
    LinearModuli {
        sur,
        reg: recip(sur),
        semireg: recip(sur),
        subreg_strong: recip(kappa),
        injective,
        surjective,
        singular_values: sv,
    }
}

fn require_conic(f: &SetMap, seed: u64, settings: &Settings) -> Result<()> {
    let (n, m) = f.dims();
    match f {
        SetMap::LinearOp { .. } => Ok(()),
        SetMap::PolyhedralGraph { pieces, .. } => {
            let origin = Vector::zeros(n + m);
            if let Some(i) = pieces.iter().position(|p| !p.contains(&origin, 1e-12)) {
                return Err(Error::InvalidInput(format!("graph is not a cone: piece {i} misses the origin")));
            }
            let center = GraphPoint::new(Vector::zeros(n), Vector::zeros(m));
            for q in f.graph_sample(&center, 1.0, 32, seed, settings)? {
                for lambda in [0.5, 2.0] {
                    let s = GraphPoint::new(&q.x * lambda, &q.y * lambda);
                    if !f.on_graph(&s, settings)? {
                        return Err(Error::InvalidInput(format!(
                            "graph is not a cone: ({:?}, {:?}) scaled by {lambda} leaves it",
                            q.x.as_slice(),
                            q.y.as_slice()
                        )));
                    }
                }
            }
            Ok(())
        }
        other => Err(Error::Unsupported(format!("convex process check for {}", other.describe()))),
    }
}

/// sup{ϱ > 0 : F(B_X) ⊇ ϱ B_Y} for a map whose graph is a cone, estimated as
/// the minimum over sampled unit directions v of max{ϱ : ϱ v ∈ F(B_X)}.
pub fn convex_process_sur(f: &SetMap, n_directions: usize, seed: u64, settings: &Settings) -> Result<ModulusEstimate> {
    require_conic(f, seed, settings)?;
    let (n, m) = f.dims();
    let schedule = LiminfSchedule::default();
    let cap = schedule.cap;
    let unit = Ball::closed(Vector::zeros(n), 1.0);
    let attained = |rho: f64, v: &Vector| -> Result<bool> { Ok(find_preimage_in(f, &(v * rho), &unit, settings)?.is_some()) };
    let mut per_direction = Vec::new();
    for v in directions(m, n_directions, settings.norm, seed) {
        let (mut lo, mut hi);
        if attained(1.0, &v)? {
            lo = 1.0;
            hi = 2.0;
            while hi <= cap && attained(hi, &v)? {
                lo = hi;
                hi *= 2.0;
            }
            if hi > cap {
                per_direction.push(f64::INFINITY);
                continue;
            }
        } else {
            hi = 1.0;
            lo = 0.5;
            while lo >= 1.0 / cap && !attained(lo, &v)? {
                hi = lo;
                lo *= 0.5;
            }
            if lo < 1.0 / cap {
                per_direction.push(0.0);
                continue;
            }
        }
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if attained(mid, &v)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        per_direction.push(lo);
    }
    let value = per_direction.iter().copied().fold(f64::INFINITY, f64::min);
    let top = per_direction.iter().copied().fold(0.0, f64::max);
    Ok(ModulusEstimate {
        kind: ModulusKind::Sur,
        point: GraphPoint::new(Vector::zeros(n), Vector::zeros(m)),
        value,
        bracket: (value, top),
        shell_infima: per_direction,
        schedule,
        seed,
        norm: settings.norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StarShapeOutcome {
    /// Both hypotheses held on every sample; lopen ≥ β/α.
    Bound { value: f64, samples: usize },
    /// A graph point q whose segment toward the base point leaves the graph.
    NotStarShaped { x: Vec<f64>, y: Vec<f64>, t: f64 },
    /// A target of B[ȳ, β] with no preimage in B[x̄, α].
    BallNotCovered { target: Vec<f64> },
}

/// Checks local star-shapedness of the graph at `point` and the inclusion
/// B[ȳ, β] ⊆ F(B[x̄, α]); on success lopen F(x̄, ȳ) ≥ β/α.
#[allow(clippy::too_many_arguments)]
pub fn starshape_bound(
    f: &SetMap,
    point: &GraphPoint,
    alpha: f64,
    beta: f64,
    a: f64,
    samples: usize,
    seed: u64,
    settings: &Settings,
) -> Result<StarShapeOutcome> {
    if !(alpha > 0.0 && beta > 0.0 && a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidInput("need alpha, beta > 0 and 0 < a <= 1".into()));
    }
    f.require_on_graph(point, settings)?;
    let radius = 1.5 * alpha.max(beta);
    let pts = f.graph_sample(point, radius, samples, seed, settings)?;
    let ts: Vec<f64> = [0.25, 0.5, 0.75, 1.0].iter().map(|s| s * a).collect();
    for q in &pts {
        for &t in &ts {
            let z = GraphPoint::new(&point.x * (1.0 - t) + &q.x * t, &point.y * (1.0 - t) + &q.y * t);
            let on = match f.dist_to_value_set(&z.y, &z.x, settings.norm) {
                Ok(d) => d <= settings.tol_feas,
                Err(Error::OutsideDomain { .. }) => false,
                Err(e) => return Err(e),
            };
            if !on {
                return Ok(StarShapeOutcome::NotStarShaped { x: q.x.as_slice().to_vec(), y: q.y.as_slice().to_vec(), t });
            }
        }
    }
    let m = f.dims().1;
    let ball = Ball::closed(point.x.clone(), alpha);
    let mut checked = pts.len();
    for e in directions(m, 32, settings.norm, seed ^ 0x5eed) {
        for s in [0.25, 0.5, 0.75, 1.0] {
            let target = &point.y + &e * (beta * s);
            checked += 1;
            if find_preimage_in(f, &target, &ball, settings)?.is_none() {
                return Ok(StarShapeOutcome::BallNotCovered { target: target.as_slice().to_vec() });
            }
        }
    }
    Ok(StarShapeOutcome::Bound { value: beta / alpha, samples: checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedron::Polyhedron;
    use crate::setmap::Procedure;

    #[test]
    fn diagonal_and_wide_operators() {
        let lm = linear_moduli(&Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]));
        assert_eq!((lm.sur, lm.reg), (0.5, 2.0));
        let lm = linear_moduli(&Matrix::from_row_slice(1, 2, &[1.0, 0.0]));
        assert!(lm.surjective && !lm.injective);
        assert_eq!(lm.sur, 1.0);
        assert_eq!(lm.subreg_strong, f64::INFINITY);
        let lm = linear_moduli(&Matrix::zeros(1, 1));
        assert_eq!((lm.sur, lm.semireg), (0.0, f64::INFINITY));
    }

    #[test]
    fn convex_processes() {
        let s = Settings::default();
        let id = SetMap::identity(2);
        assert!((convex_process_sur(&id, 16, 3, &s).unwrap().value - 1.0).abs() < 1e-9);
        let d = SetMap::linear(Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        let v = convex_process_sur(&d, 32, 3, &s).unwrap().value;
        assert!((v - 1.0).abs() < 0.01, "{v}");
        // Graph {(x, y) : y >= x}; F([-1, 1]) = [-1, ∞).
        let epi = Polyhedron::new(Matrix::from_row_slice(1, 2, &[1.0, -1.0]), Vector::zeros(1)).unwrap();
        let f = SetMap::polyhedral(1, 1, vec![epi]).unwrap();
        assert!((convex_process_sur(&f, 2, 3, &s).unwrap().value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shifted_graph_is_not_a_cone() {
        let p = Polyhedron::new(Matrix::from_row_slice(1, 2, &[1.0, -1.0]), Vector::from_element(1, -1.0)).unwrap();
        let f = SetMap::polyhedral(1, 1, vec![p]).unwrap();
        assert!(convex_process_sur(&f, 2, 1, &Settings::default()).is_err());
    }

    #[test]
    fn star_shapes() {
        let s = Settings::default();
        let o = GraphPoint::scalar(0.0, 0.0);
        let id = SetMap::scalar_fn("x", |x| x);
        assert_eq!(
            starshape_bound(&id, &o, 1.0, 1.0, 1.0, 50, 1, &s).unwrap(),
            StarShapeOutcome::Bound { value: 1.0, samples: 50 + 8 }
        );
        let epi = SetMap::epigraph(Procedure::scalar("x", |x| x)).unwrap();
        assert!(matches!(starshape_bound(&epi, &o, 1.0, 1.0, 1.0, 50, 1, &s).unwrap(), StarShapeOutcome::Bound { .. }));
        let shifted = SetMap::finite(vec![Procedure::scalar("x", |x| x), Procedure::scalar("1", |_| 1.0)]).unwrap();
        match starshape_bound(&shifted, &o, 1.0, 1.0, 1.0, 50, 1, &s).unwrap() {
            StarShapeOutcome::NotStarShaped { y, .. } => assert_eq!(y, vec![1.0]),
            other => panic!("{other:?}"),
        }
    }
}
