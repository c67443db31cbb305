//! Set-valued maps ℝⁿ ⇉ ℝᵐ and the distance oracles built on them.

mod image;
mod search;
mod spec;
mod values;

use std::fmt;
use std::sync::Arc;

use rand::Rng;

pub use image::{covering_rate, image_intervals_1d};
pub use search::{dist_to_preimage, find_preimage_in, nearest_preimage};
pub use spec::{BoxSpec, HalfSpaceSpec, MapSpec};
pub use values::ValueSet;

use crate::error::{Error, Result};
use crate::polyhedron::Polyhedron;
use crate::rng::{uniform_in_ball, SplitMix64};
use crate::space::{check_dim, GraphPoint, Matrix, NormKind, Settings, Vector};

/// Tolerance for deciding that a coordinate sits on a box bound.
const BOUND_TOL: f64 = 1e-12;

pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// A labelled vector-valued procedure ℝⁿ → ℝᵐ.
#[derive(Clone)]
pub struct Procedure {
    pub dim_in: usize,
    pub dim_out: usize,
    pub label: String,
    f: VectorFn,
}

impl fmt::Debug for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Procedure({} : R^{} -> R^{})", self.label, self.dim_in, self.dim_out)
    }
}

impl Procedure {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        label: impl Into<String>,
        f: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Procedure { dim_in, dim_out, label: label.into(), f: Arc::new(f) }
    }

    /// Scalar function of a scalar argument.
    pub fn scalar(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Procedure::new(1, 1, label, move |x: &Vector| Vector::from_element(1, f(x[0])))
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.dim_in)?;
        let y = (self.f)(x);
        if y.len() != self.dim_out {
            return Err(Error::DimensionMismatch { expected: self.dim_out, got: y.len() });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} at {:?}", self.label, x.as_slice())));
        }
        Ok(y)
    }
}

/// Optional box domain of a procedural map.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lo: Vector,
    pub hi: Vector,
}

impl Domain {
    fn check(&self, x: &Vector) -> Result<()> {
        if (0..x.len()).any(|i| x[i] < self.lo[i] || x[i] > self.hi[i]) {
            return Err(Error::OutsideDomain { point: x.as_slice().to_vec() });
        }
        Ok(())
    }
}

fn check_domain(domain: &Option<Domain>, x: &Vector) -> Result<()> {
    domain.as_ref().map_or(Ok(()), |d| d.check(x))
}

/// Tagged representation of a set-valued map.
#[derive(Debug, Clone)]
pub enum SetMap {
    SingleValued { f: Procedure, domain: Option<Domain> },
    /// x ↦ {b₁(x), …, b_k(x)}; branches are continuous procedures.
    FiniteValued { branches: Vec<Procedure>, domain: Option<Domain> },
    /// x ↦ [f(x), ∞) for a scalar procedure f.
    Epigraph { f: Procedure, domain: Option<Domain> },
    LinearOp { a: Matrix },
    /// Normal cone to the box [lo, hi] (empty outside the box).
    NormalConeBox { lo: Vector, hi: Vector },
    /// Graph = union of polyhedra in ℝⁿ⁺ᵐ, coordinates ordered (x, y).
    PolyhedralGraph { n: usize, m: usize, pieces: Vec<Polyhedron> },
    Sum(Box<SetMap>, Box<SetMap>),
    InverseView(Box<SetMap>),
}

impl SetMap {
    pub fn single(f: Procedure) -> SetMap {
        SetMap::SingleValued { f, domain: None }
    }

    pub fn scalar_fn(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> SetMap {
        SetMap::single(Procedure::scalar(label, f))
    }

    pub fn finite(branches: Vec<Procedure>) -> Result<SetMap> {
        let first = branches
            .first()
            .ok_or_else(|| Error::InvalidInput("finite-valued map needs at least one branch".into()))?;
        if branches.iter().any(|b| b.dim_in != first.dim_in || b.dim_out != first.dim_out) {
            return Err(Error::InvalidInput("branches must share dimensions".into()));
        }
        Ok(SetMap::FiniteValued { branches, domain: None })
    }

    pub fn epigraph(f: Procedure) -> Result<SetMap> {
        if f.dim_out != 1 {
            return Err(Error::InvalidInput("epigraph needs a scalar function".into()));
        }
        Ok(SetMap::Epigraph { f, domain: None })
    }

    pub fn linear(a: Matrix) -> SetMap {
        SetMap::LinearOp { a }
    }

    pub fn identity(n: usize) -> SetMap {
        SetMap::LinearOp { a: Matrix::identity(n, n) }
    }

    pub fn normal_cone_box(lo: Vector, hi: Vector) -> Result<SetMap> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if (0..lo.len()).any(|i| lo[i] > hi[i]) {
            return Err(Error::InvalidInput("box needs lo <= hi".into()));
        }
        Ok(SetMap::NormalConeBox { lo, hi })
    }

    pub fn polyhedral(n: usize, m: usize, pieces: Vec<Polyhedron>) -> Result<SetMap> {
        if pieces.is_empty() {
            return Err(Error::InvalidInput("polyhedral graph needs at least one piece".into()));
        }
        for p in &pieces {
            if p.dim() != n + m {
                return Err(Error::DimensionMismatch { expected: n + m, got: p.dim() });
            }
            if p.is_empty()? {
                return Err(Error::InvalidInput("polyhedral graph piece is empty".into()));
            }
        }
        Ok(SetMap::PolyhedralGraph { n, m, pieces })
    }

    /// Graph of x ↦ q + A x + N_[lo,hi](x) as a union of 3ⁿ polyhedra.
    pub fn affine_vi(a: &Matrix, q: &Vector, lo: &Vector, hi: &Vector) -> Result<SetMap> {
        let n = a.ncols();
        if a.nrows() != n || q.len() != n || lo.len() != n || hi.len() != n {
            return Err(Error::InvalidInput("affine VI needs square data of matching size".into()));
        }
        let mut pieces = Vec::new();
        for code in 0..3usize.pow(n as u32) {
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut rhs: Vec<f64> = Vec::new();
            let mut c = code;
            for i in 0..n {
                let pattern = c % 3;
                c /= 3;
                // residual r_i = y_i − (A x)_i − q_i, written as rows over (x, y).
                let mut res = vec![0.0; 2 * n];
                for j in 0..n {
                    res[j] = -a[(i, j)];
                }
                res[n + i] = 1.0;
                let neg: Vec<f64> = res.iter().map(|v| -v).collect();
                let mut ex = vec![0.0; 2 * n];
                ex[i] = 1.0;
                let nex: Vec<f64> = ex.iter().map(|v| -v).collect();
                match pattern {
                    0 => {
                        // lo ≤ x_i ≤ hi, r_i = 0
                        rows.push(ex.clone());
                        rhs.push(hi[i]);
                        rows.push(nex.clone());
                        rhs.push(-lo[i]);
                        rows.push(res.clone());
                        rhs.push(q[i]);
                        rows.push(neg.clone());
                        rhs.push(-q[i]);
                    }
                    1 => {
                        // x_i = lo, r_i ≤ 0
                        rows.push(ex.clone());
                        rhs.push(lo[i]);
                        rows.push(nex.clone());
                        rhs.push(-lo[i]);
                        rows.push(res.clone());
                        rhs.push(q[i]);
                    }
                    _ => {
                        // x_i = hi, r_i ≥ 0
                        rows.push(ex.clone());
                        rhs.push(hi[i]);
                        rows.push(nex.clone());
                        rhs.push(-hi[i]);
                        rows.push(neg.clone());
                        rhs.push(-q[i]);
                    }
                }
            }
            let am = Matrix::from_fn(rows.len(), 2 * n, |r, s| rows[r][s]);
            let p = Polyhedron::new(am, Vector::from_vec(rhs))?;
            if !p.is_empty()? {
                pieces.push(p);
            }
        }
        SetMap::polyhedral(n, n, pieces)
    }

    pub fn sum(f: SetMap, g: SetMap) -> Result<SetMap> {
        if f.dims() != g.dims() {
            return Err(Error::InvalidInput(format!(
                "sum needs equal dimensions, got {:?} and {:?}",
                f.dims(),
                g.dims()
            )));
        }
        Ok(SetMap::Sum(Box::new(f), Box::new(g)))
    }

    pub fn inverse(f: SetMap) -> SetMap {
        SetMap::InverseView(Box::new(f))
    }

    /// x ↦ f(x) − A x for a single-valued f; NaN (rejected by `eval`) where f fails.
    pub fn minus_linear(&self, a: &Matrix) -> Result<SetMap> {
        let (n, m) = self.dims();
        if !self.is_single_valued() {
            return Err(Error::InvalidInput(format!("f - A needs a single-valued f, got {}", self.describe())));
        }
        if a.nrows() != m || a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: m * n, got: a.nrows() * a.ncols() });
        }
        let (f, a) = (self.clone(), a.clone());
        Ok(SetMap::single(Procedure::new(n, m, format!("{} - A", f.describe()), move |x: &Vector| match f.eval(x) {
            Ok(y) => y - &a * x,
            Err(_) => Vector::from_element(m, f64::NAN),
        })))
    }

    pub fn with_domain(self, lo: Vector, hi: Vector) -> Result<SetMap> {
        let d = Some(Domain { lo, hi });
        match self {
            SetMap::SingleValued { f, .. } => Ok(SetMap::SingleValued { f, domain: d }),
            SetMap::FiniteValued { branches, .. } => Ok(SetMap::FiniteValued { branches, domain: d }),
            SetMap::Epigraph { f, .. } => Ok(SetMap::Epigraph { f, domain: d }),
            _ => Err(Error::InvalidInput("only procedural maps carry a declared domain".into())),
        }
    }

    /// (n, m) for F: ℝⁿ ⇉ ℝᵐ.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            SetMap::SingleValued { f, .. } => (f.dim_in, f.dim_out),
            SetMap::FiniteValued { branches, .. } => (branches[0].dim_in, branches[0].dim_out),
            SetMap::Epigraph { f, .. } => (f.dim_in, 1),
            SetMap::LinearOp { a } => (a.ncols(), a.nrows()),
            SetMap::NormalConeBox { lo, .. } => (lo.len(), lo.len()),
            SetMap::PolyhedralGraph { n, m, .. } => (*n, *m),
            SetMap::Sum(f, _) => f.dims(),
            SetMap::InverseView(f) => {
                let (n, m) = f.dims();
                (m, n)
            }
        }
    }

    /// Short human-readable description for reports.
    pub fn describe(&self) -> String {
        match self {
            SetMap::SingleValued { f, .. } => format!("single({})", f.label),
            SetMap::FiniteValued { branches, .. } => {
                let b: Vec<&str> = branches.iter().map(|p| p.label.as_str()).collect();
                format!("finite{{{}}}", b.join(", "))
            }
            SetMap::Epigraph { f, .. } => format!("epigraph({})", f.label),
            SetMap::LinearOp { a } => format!("linear({}x{})", a.nrows(), a.ncols()),
            SetMap::NormalConeBox { lo, hi } => format!("normal_cone_box({:?}, {:?})", lo.as_slice(), hi.as_slice()),
            SetMap::PolyhedralGraph { pieces, .. } => format!("polyhedral_graph({} pieces)", pieces.len()),
            SetMap::Sum(f, g) => format!("({} + {})", f.describe(), g.describe()),
            SetMap::InverseView(f) => format!("inverse({})", f.describe()),
        }
    }

    /// True when every value set is a singleton on the whole domain.
    pub fn is_single_valued(&self) -> bool {
        match self {
            SetMap::SingleValued { .. } | SetMap::LinearOp { .. } => true,
            SetMap::FiniteValued { branches, .. } => branches.len() == 1,
            SetMap::Sum(f, g) => f.is_single_valued() && g.is_single_valued(),
            _ => false,
        }
    }

    /// Evaluates a single-valued map.
    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.dims().0)?;
        match self {
            SetMap::SingleValued { f, domain } => {
                check_domain(domain, x)?;
                f.eval(x)
            }
            SetMap::FiniteValued { branches, domain } if branches.len() == 1 => {
                check_domain(domain, x)?;
                branches[0].eval(x)
            }
            SetMap::LinearOp { a } => Ok(a * x),
            SetMap::Sum(f, g) => Ok(f.eval(x)? + g.eval(x)?),
            _ => Err(Error::Unsupported(format!("{} is not single-valued", self.describe()))),
        }
    }

    /// F(x) as a finite set or analytic descriptor.
    pub fn values(&self, x: &Vector) -> Result<ValueSet> {
        check_dim(x, self.dims().0)?;
        match self {
            SetMap::SingleValued { f, domain } => {
                check_domain(domain, x)?;
                Ok(ValueSet::singleton(f.eval(x)?))
            }
            SetMap::FiniteValued { branches, domain } => {
                check_domain(domain, x)?;
                let mut out: Vec<Vector> = Vec::with_capacity(branches.len());
                for b in branches {
                    let v = b.eval(x)?;
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
                Ok(ValueSet::Finite(out))
            }
            SetMap::Epigraph { f, domain } => {
                check_domain(domain, x)?;
                let v = f.eval(x)?;
                Ok(ValueSet::Boxed { lo: v, hi: Vector::from_element(1, f64::INFINITY) })
            }
            SetMap::LinearOp { a } => Ok(ValueSet::singleton(a * x)),
            SetMap::NormalConeBox { lo, hi } => {
                let n = lo.len();
                let mut vlo = Vector::zeros(n);
                let mut vhi = Vector::zeros(n);
                for i in 0..n {
                    let tl = BOUND_TOL * lo[i].abs().max(1.0);
                    let th = BOUND_TOL * hi[i].abs().max(1.0);
                    if x[i] < lo[i] - tl || x[i] > hi[i] + th {
                        return Ok(ValueSet::empty());
                    }
                    if (x[i] - lo[i]).abs() <= tl {
                        vlo[i] = f64::NEG_INFINITY;
                    }
                    if (x[i] - hi[i]).abs() <= th {
                        vhi[i] = f64::INFINITY;
                    }
                }
                Ok(ValueSet::Boxed { lo: vlo, hi: vhi })
            }
            SetMap::PolyhedralGraph { pieces, .. } => Ok(ValueSet::Union(
                pieces.iter().map(|p| p.section_leading(x).map(ValueSet::Poly)).collect::<Result<_>>()?,
            )),
            SetMap::Sum(f, g) => f.values(x)?.minkowski(&g.values(x)?),
            SetMap::InverseView(f) => f.preimage_set(x)?.ok_or_else(|| {
                Error::Unsupported(format!("values of the inverse of {} are not analytic", f.describe()))
            }),
        }
    }

    /// F⁻¹(y) when it has an analytic descriptor, `None` otherwise.
    pub fn preimage_set(&self, y: &Vector) -> Result<Option<ValueSet>> {
        check_dim(y, self.dims().1)?;
        match self {
            SetMap::LinearOp { a } => {
                let m = a.nrows();
                let n = a.ncols();
                let stacked = Matrix::from_fn(2 * m, n, |i, j| if i < m { a[(i, j)] } else { -a[(i - m, j)] });
                let rhs = Vector::from_fn(2 * m, |i, _| if i < m { y[i] } else { -y[i - m] });
                Ok(Some(ValueSet::Poly(Polyhedron::new(stacked, rhs)?)))
            }
            SetMap::NormalConeBox { lo, hi } => {
                let n = lo.len();
                let mut plo = Vector::zeros(n);
                let mut phi = Vector::zeros(n);
                for i in 0..n {
                    if y[i] > 0.0 {
                        plo[i] = hi[i];
                        phi[i] = hi[i];
                    } else if y[i] < 0.0 {
                        plo[i] = lo[i];
                        phi[i] = lo[i];
                    } else {
                        plo[i] = lo[i];
                        phi[i] = hi[i];
                    }
                }
                Ok(Some(ValueSet::Boxed { lo: plo, hi: phi }))
            }
            SetMap::PolyhedralGraph { pieces, .. } => Ok(Some(ValueSet::Union(
                pieces.iter().map(|p| p.section_trailing(y).map(ValueSet::Poly)).collect::<Result<_>>()?,
            ))),
            SetMap::InverseView(f) => f.values(y).map(Some),
            _ => Ok(None),
        }
    }

    /// dist(y, F(x)); ∞ when F(x) = ∅.
    pub fn dist_to_value_set(&self, y: &Vector, x: &Vector, norm: NormKind) -> Result<f64> {
        check_dim(y, self.dims().1)?;
        self.values(x)?.dist(y, norm)
    }

    /// Residual used by searches: domain violations count as infinitely far.
    pub(crate) fn residual(&self, y: &Vector, x: &Vector, norm: NormKind) -> Result<f64> {
        match self.dist_to_value_set(y, x, norm) {
            Ok(d) => Ok(d),
            Err(Error::OutsideDomain { .. }) | Err(Error::NonFinite(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    pub fn on_graph(&self, p: &GraphPoint, settings: &Settings) -> Result<bool> {
        Ok(self.dist_to_value_set(&p.y, &p.x, settings.norm)? <= settings.tol_feas)
    }

    /// Errors unless `p` lies on the graph within `tol_feas`.
    pub fn require_on_graph(&self, p: &GraphPoint, settings: &Settings) -> Result<()> {
        let r = self.dist_to_value_set(&p.y, &p.x, settings.norm)?;
        if r > settings.tol_feas {
            return Err(Error::NotOnGraph { residual: r });
        }
        Ok(())
    }

    fn top_level_box(&self) -> Option<(&Vector, &Vector)> {
        match self {
            SetMap::NormalConeBox { lo, hi } => Some((lo, hi)),
            SetMap::Sum(f, g) => f.top_level_box().or_else(|| g.top_level_box()),
            _ => None,
        }
    }

    /// Seeded graph points within the product ball of `radius` around
    /// `center`, each verified to lie on the graph.
    pub fn graph_sample(
        &self,
        center: &GraphPoint,
        radius: f64,
        count: usize,
        seed: u64,
        settings: &Settings,
    ) -> Result<Vec<GraphPoint>> {
        if radius <= 0.0 || count == 0 {
            return Err(Error::InvalidInput("graph_sample needs radius > 0 and count >= 1".into()));
        }
        let (n, m) = self.dims();
        check_dim(&center.x, n)?;
        check_dim(&center.y, m)?;
        let norm = settings.norm;
        let mut rng = SplitMix64::new(seed);
        let mut out = Vec::with_capacity(count);
        let max_attempts = 64 * count;
        for _ in 0..max_attempts {
            if out.len() == count {
                break;
            }
            let candidate = match self {
                SetMap::PolyhedralGraph { pieces, .. } => {
                    let zc = center.x.clone().resize_vertically(n + m, 0.0);
                    let mut zc = zc;
                    zc.rows_mut(n, m).copy_from(&center.y);
                    let z = uniform_in_ball(&zc, radius, norm, &mut rng);
                    let p = &pieces[rng.gen_range(0..pieces.len())];
                    match p.project(&z)? {
                        Some(q) => {
                            let x = q.rows(0, n).into_owned();
                            let y = q.rows(n, m).into_owned();
                            Some(GraphPoint::new(x, y))
                        }
                        None => None,
                    }
                }
                _ => {
                    let mut x = uniform_in_ball(&center.x, radius, norm, &mut rng);
                    if let Some((lo, hi)) = self.top_level_box() {
                        for i in 0..n {
                            if rng.gen_bool(0.5) {
                                let b = if (x[i] - lo[i]).abs() <= (x[i] - hi[i]).abs() { lo[i] } else { hi[i] };
                                x[i] = b;
                            }
                        }
                    }
                    match self.values(&x) {
                        Ok(vs) => vs.sample_near(&center.y, radius, norm, &mut rng).map(|y| GraphPoint::new(x, y)),
                        Err(Error::OutsideDomain { .. }) | Err(Error::NonFinite(_)) => None,
                        Err(e) => return Err(e),
                    }
                }
            };
            let Some(p) = candidate else { continue };
            if norm.product_dist(&p, center) > radius * (1.0 + 1e-12) {
                continue;
            }
            if self.residual(&p.y, &p.x, norm)? <= settings.tol_feas {
                out.push(p);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{scalar, vector};

    fn two_branch() -> SetMap {
        SetMap::finite(vec![Procedure::scalar("x", |x| x), Procedure::scalar("0", |_| 0.0)]).unwrap()
    }

    #[test]
    fn values_of_two_branch() {
        match two_branch().values(&scalar(0.3)).unwrap() {
            ValueSet::Finite(v) => assert_eq!(v, vec![scalar(0.3), scalar(0.0)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_values() {
        let x = vector(&[1.0, 2.0]).unwrap();
        assert_eq!(SetMap::identity(2).values(&x).unwrap(), ValueSet::singleton(x));
    }

    #[test]
    fn normal_cone_at_lower_bound() {
        let f = SetMap::normal_cone_box(scalar(0.0), scalar(1.0)).unwrap();
        assert_eq!(
            f.values(&scalar(0.0)).unwrap(),
            ValueSet::Boxed { lo: scalar(f64::NEG_INFINITY), hi: scalar(0.0) }
        );
        assert!(f.values(&scalar(1.5)).unwrap().is_trivially_empty());
        assert_eq!(f.dist_to_value_set(&scalar(0.0), &scalar(2.0), NormKind::Euclidean).unwrap(), f64::INFINITY);
    }

    #[test]
    fn distances_to_value_sets() {
        let e = NormKind::Euclidean;
        assert!((two_branch().dist_to_value_set(&scalar(0.5), &scalar(0.2), e).unwrap() - 0.3).abs() < 1e-15);
        let epi = SetMap::epigraph(Procedure::scalar("x", |x| x)).unwrap();
        assert_eq!(epi.dist_to_value_set(&scalar(2.0), &scalar(1.0), e).unwrap(), 0.0);
        let sq = SetMap::scalar_fn("x^2", |x| x * x);
        assert_eq!(sq.dist_to_value_set(&scalar(0.25), &scalar(0.5), e).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        let f = SetMap::scalar_fn("sqrt", f64::sqrt).with_domain(scalar(0.0), scalar(10.0)).unwrap();
        assert!(matches!(f.values(&scalar(-1.0)), Err(Error::OutsideDomain { .. })));
        assert!(matches!(
            SetMap::identity(2).values(&scalar(1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn affine_vi_graph_matches_normal_cone_sum() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.5]);
        let q = vector(&[-1.0, 0.3]).unwrap();
        let lo = vector(&[0.0, 0.0]).unwrap();
        let hi = vector(&[1.0, 1.0]).unwrap();
        let g = SetMap::affine_vi(&a, &q, &lo, &hi).unwrap();
        let aq = a.clone();
        let qq = q.clone();
        let affine = SetMap::single(Procedure::new(2, 2, "q + A x", move |x: &Vector| &qq + &aq * x));
        let reference = SetMap::sum(affine, SetMap::normal_cone_box(lo, hi).unwrap()).unwrap();
        let mut rng = SplitMix64::new(5);
        for _ in 0..200 {
            let x = Vector::from_fn(2, |_, _| {
                let r: f64 = rng.gen_range(-0.2..1.2);
                if rng.gen_bool(0.3) { r.round().clamp(0.0, 1.0) } else { r }
            });
            let y = Vector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
            let d1 = g.dist_to_value_set(&y, &x, NormKind::Euclidean).unwrap();
            let d2 = reference.dist_to_value_set(&y, &x, NormKind::Euclidean).unwrap();
            assert!((d1 - d2).abs() < 1e-9 || (d1.is_infinite() && d2.is_infinite()), "{d1} vs {d2}");
        }
    }

    #[test]
    fn graph_samples_lie_on_graph() {
        let s = Settings::default();
        let f = two_branch();
        let pts = f.graph_sample(&GraphPoint::scalar(0.0, 0.0), 1.0, 40, 9, &s).unwrap();
        assert_eq!(pts.len(), 40);
        assert!(pts.iter().any(|p| p.y[0] == 0.0 && p.x[0] != 0.0));
        assert!(pts.iter().any(|p| p.y[0] == p.x[0] && p.x[0] != 0.0));
        for p in &pts {
            assert!(f.on_graph(p, &s).unwrap());
        }
    }
}
