//! Serde helpers: vectors as plain lists and extended reals with ±∞ written
//! as the strings "inf" / "-inf".

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Ext {
    Num(f64),
    Text(String),
}

fn to_ext(v: f64) -> Ext {
    if v.is_finite() {
        Ext::Num(v)
    } else if v.is_nan() {
        Ext::Text("nan".into())
    } else if v > 0.0 {
        Ext::Text("inf".into())
    } else {
        Ext::Text("-inf".into())
    }
}

fn from_ext<E: serde::de::Error>(e: Ext) -> Result<f64, E> {
    match e {
        Ext::Num(v) => Ok(v),
        Ext::Text(s) => match s.as_str() {
            "inf" | "Infinity" => Ok(f64::INFINITY),
            "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(E::custom(format!("expected a number or \"inf\", got `{other}`"))),
        },
    }
}

pub mod ext {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_ext(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_ext(Ext::deserialize(d)?)
    }
}

pub mod ext_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| to_ext(*x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Ext>::deserialize(d)?.into_iter().map(from_ext).collect()
    }
}

pub mod ext_pair {
    use super::*;

    pub fn serialize<S: Serializer>(v: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        (to_ext(v.0), to_ext(v.1)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let (a, b) = <(Ext, Ext)>::deserialize(d)?;
        Ok((from_ext(a)?, from_ext(b)?))
    }
}

pub mod ext_map {
    use std::collections::BTreeMap;

    use super::*;

    pub fn serialize<S: Serializer>(v: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|(k, x)| (k.clone(), to_ext(*x)))
            .collect::<BTreeMap<_, _>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        BTreeMap::<String, Ext>::deserialize(d)?
            .into_iter()
            .map(|(k, e)| from_ext(e).map(|v| (k, v)))
            .collect()
    }
}

pub mod vector {
    use super::*;
    use crate::space::Vector;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        crate::space::vector(&raw).map_err(D::Error::custom)
    }
}

pub mod vectors {
    use super::*;
    use crate::space::Vector;

    pub fn serialize<S: Serializer>(v: &[Vector], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| x.as_slice().to_vec()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vector>, D::Error> {
        Vec::<Vec<f64>>::deserialize(d)?
            .iter()
            .map(|raw| crate::space::vector(raw).map_err(D::Error::custom))
            .collect()
    }
}

pub mod matrix {
    use super::*;
    use crate::space::{matrix_from_rows, matrix_rows, Matrix};

    pub fn serialize<S: Serializer>(a: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        matrix_rows(a).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        matrix_from_rows(&rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Probe {
        #[serde(with = "super::ext")]
        v: f64,
        #[serde(with = "super::ext_vec")]
        w: Vec<f64>,
    }

    #[test]
    fn infinity_round_trips() {
        let p = Probe { v: f64::INFINITY, w: vec![1.0, f64::INFINITY] };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"v":"inf","w":[1.0,"inf"]}"#);
        let back: Probe = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
