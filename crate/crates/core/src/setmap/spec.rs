//! JSON descriptions of set-valued maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::polyhedron::Polyhedron;
use crate::space::{matrix_from_rows, vector, Matrix, Vector};

use super::{Procedure, SetMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Half-space {z : normal · z ≤ offset}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// A set-valued map, tagged by `kind`. Scalar functions are expressions in
/// `x` (one variable) or `x1 … xn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    SingleValued {
        dim: usize,
        exprs: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<BoxSpec>,
    },
    FiniteValued {
        dim: usize,
        branches: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<BoxSpec>,
    },
    Epigraph {
        dim: usize,
        expr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<BoxSpec>,
    },
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    NormalConeBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    PolyhedralGraph {
        n: usize,
        m: usize,
        pieces: Vec<Vec<HalfSpaceSpec>>,
    },
    Sum {
        left: Box<MapSpec>,
        right: Box<MapSpec>,
    },
    Inverse {
        of: Box<MapSpec>,
    },
}

fn procedure(dim: usize, exprs: &[String]) -> Result<Procedure> {
    if exprs.is_empty() {
        return Err(Error::InvalidInput("a vector function needs at least one component".into()));
    }
    let parsed = exprs.iter().map(|e| Expr::parse(e, dim)).collect::<Result<Vec<_>>>()?;
    let label = if exprs.len() == 1 { exprs[0].clone() } else { format!("({})", exprs.join(", ")) };
    Ok(Procedure::new(dim, parsed.len(), label, move |x: &Vector| {
        Vector::from_iterator(parsed.len(), parsed.iter().map(|e| e.eval(x.as_slice())))
    }))
}

fn apply_domain(map: SetMap, domain: &Option<BoxSpec>, dim: usize) -> Result<SetMap> {
    match domain {
        None => Ok(map),
        Some(b) => {
            let (lo, hi) = (vector(&b.lo)?, vector(&b.hi)?);
            if lo.len() != dim || hi.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: lo.len().min(hi.len()) });
            }
            map.with_domain(lo, hi)
        }
    }
}

impl MapSpec {
    pub fn build(&self) -> Result<SetMap> {
        match self {
            MapSpec::SingleValued { dim, exprs, domain } => {
                apply_domain(SetMap::single(procedure(*dim, exprs)?), domain, *dim)
            }
            MapSpec::FiniteValued { dim, branches, domain } => {
                let procs = branches.iter().map(|b| procedure(*dim, b)).collect::<Result<Vec<_>>>()?;
                apply_domain(SetMap::finite(procs)?, domain, *dim)
            }
            MapSpec::Epigraph { dim, expr, domain } => {
                apply_domain(SetMap::epigraph(procedure(*dim, std::slice::from_ref(expr))?)?, domain, *dim)
            }
            MapSpec::Linear { matrix } => Ok(SetMap::linear(matrix_from_rows(matrix)?)),
            MapSpec::NormalConeBox { lo, hi } => SetMap::normal_cone_box(vector(lo)?, vector(hi)?),
            MapSpec::PolyhedralGraph { n, m, pieces } => {
                let polys = pieces
                    .iter()
                    .map(|hs| {
                        let d = n + m;
                        if hs.iter().any(|h| h.normal.len() != d) {
                            return Err(Error::DimensionMismatch { expected: d, got: hs[0].normal.len() });
                        }
                        let a = Matrix::from_fn(hs.len(), d, |i, j| hs[i].normal[j]);
                        let b = Vector::from_iterator(hs.len(), hs.iter().map(|h| h.offset));
                        Polyhedron::new(a, b)
                    })
                    .collect::<Result<Vec<_>>>()?;
                SetMap::polyhedral(*n, *m, polys)
            }
            MapSpec::Sum { left, right } => SetMap::sum(left.build()?, right.build()?),
            MapSpec::Inverse { of } => Ok(SetMap::inverse(of.build()?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setmap::ValueSet;
    use crate::space::scalar;

    #[test]
    fn two_branch_from_json() {
        let spec: MapSpec =
            serde_json::from_str(r#"{"kind":"finite_valued","dim":1,"branches":[["x"],["0"]]}"#).unwrap();
        let f = spec.build().unwrap();
        assert_eq!(f.values(&scalar(0.3)).unwrap(), ValueSet::Finite(vec![scalar(0.3), scalar(0.0)]));
    }

    #[test]
    fn nested_sum_and_inverse() {
        let spec: MapSpec = serde_json::from_str(
            r#"{"kind":"inverse","of":{"kind":"sum",
                "left":{"kind":"linear","matrix":[[2.0]]},
                "right":{"kind":"normal_cone_box","lo":[0.0],"hi":[1.0]}}}"#,
        )
        .unwrap();
        let f = spec.build().unwrap();
        assert_eq!(f.dims(), (1, 1));
        // Values of the inverse need preimages of the sum, which are not analytic.
        assert!(f.values(&scalar(0.5)).is_err());
    }

    #[test]
    fn unknown_fields_and_kinds_are_rejected() {
        assert!(serde_json::from_str::<MapSpec>(r#"{"kind":"linear","matrix":[[1.0]],"extra":1}"#).is_err());
        assert!(serde_json::from_str::<MapSpec>(r#"{"kind":"mystery"}"#).is_err());
    }

    #[test]
    fn polyhedral_graph_from_half_spaces() {
        // Graph of y >= x: piece {x - y <= 0}.
        let spec: MapSpec = serde_json::from_str(
            r#"{"kind":"polyhedral_graph","n":1,"m":1,"pieces":[[{"normal":[1.0,-1.0],"offset":0.0}]]}"#,
        )
        .unwrap();
        let f = spec.build().unwrap();
        assert_eq!(f.dist_to_value_set(&scalar(0.5), &scalar(1.0), Default::default()).unwrap(), 0.5);
    }
}
