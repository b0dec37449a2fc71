use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

/// A point in the support of a discrete law: an integer, the tagged
/// infinity marker, or a tuple of such values (joint laws, configurations).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Int(u64),
    Infinite,
    Tuple(Vec<Outcome>),
}

impl Outcome {
    pub fn pair(a: u64, b: Option<u64>) -> Self {
        Outcome::Tuple(vec![
            Outcome::Int(a),
            b.map_or(Outcome::Infinite, Outcome::Int),
        ])
    }

    pub fn levels(levels: &[u64]) -> Self {
        Outcome::Tuple(levels.iter().copied().map(Outcome::Int).collect())
    }
}

impl From<u64> for Outcome {
    fn from(v: u64) -> Self {
        Outcome::Int(v)
    }
}

impl From<Option<u64>> for Outcome {
    fn from(v: Option<u64>) -> Self {
        v.map_or(Outcome::Infinite, Outcome::Int)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Int(v) => write!(f, "{v}"),
            Outcome::Infinite => f.write_str("inf"),
            Outcome::Tuple(items) => {
                f.write_str("(")?;
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Probability weight: exact where the closed form is rational.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    Exact(BigRational),
    Float(f64),
}

impl Weight {
    pub fn to_f64(&self) -> f64 {
        match self {
            Weight::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Weight::Float(x) => *x,
        }
    }

    /// `num/den` for exact weights, shortest round-trip float otherwise.
    pub fn render(&self) -> String {
        match self {
            Weight::Exact(r) => format!("{}/{}", r.numer(), r.denom()),
            Weight::Float(x) => format!("{x}"),
        }
    }
}

impl From<BigRational> for Weight {
    fn from(r: BigRational) -> Self {
        Weight::Exact(r)
    }
}

impl From<f64> for Weight {
    fn from(x: f64) -> Self {
        Weight::Float(x)
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Weight", 2)?;
        match self {
            Weight::Exact(_) => st.serialize_field("exact", &Some(self.render()))?,
            Weight::Float(_) => st.serialize_field("exact", &None::<String>)?,
        }
        st.serialize_field("float", &self.to_f64())?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfRow {
    pub value: Outcome,
    pub weight: Weight,
}

/// Discrete law (exact or empirical) over a possibly truncated support.
///
/// `tail_bound` is the mass not listed in `rows`; empirical tables carry the
/// number of samples they were built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmfTable {
    pub rows: Vec<PmfRow>,
    pub tail_bound: f64,
    pub sample_size: Option<u64>,
}

impl PmfTable {
    pub fn new(rows: Vec<PmfRow>, tail_bound: f64) -> Self {
        PmfTable {
            rows,
            tail_bound,
            sample_size: None,
        }
    }

    pub fn from_pairs<I, O, W>(pairs: I, tail_bound: f64) -> Self
    where
        I: IntoIterator<Item = (O, W)>,
        O: Into<Outcome>,
        W: Into<Weight>,
    {
        let rows = pairs
            .into_iter()
            .map(|(v, w)| PmfRow {
                value: v.into(),
                weight: w.into(),
            })
            .collect();
        PmfTable::new(rows, tail_bound)
    }

    pub fn listed_mass(&self) -> f64 {
        self.rows.iter().map(|r| r.weight.to_f64()).sum()
    }

    /// `|listed mass + tail bound - 1|`.
    pub fn normalization_error(&self) -> f64 {
        (self.listed_mass() + self.tail_bound - 1.0).abs()
    }

    pub fn get(&self, value: &Outcome) -> Option<&Weight> {
        self.rows.iter().find(|r| &r.value == value).map(|r| &r.weight)
    }

    pub fn prob(&self, value: &Outcome) -> f64 {
        self.get(value).map_or(0.0, Weight::to_f64)
    }

    pub fn as_map(&self) -> BTreeMap<Outcome, f64> {
        self.rows
            .iter()
            .map(|r| (r.value.clone(), r.weight.to_f64()))
            .collect()
    }

    /// CSV with header `value,weight,tail_bound,weight_f64`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["value", "weight", "tail_bound", "weight_f64"])?;
        let tail = format!("{}", self.tail_bound);
        for row in &self.rows {
            w.write_record([
                row.value.to_string(),
                row.weight.render(),
                tail.clone(),
                format!("{}", row.weight.to_f64()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn renders_rationals_and_markers() {
        let t = PmfTable::from_pairs(
            vec![
                (Outcome::Int(1), Weight::Exact(q(1, 3))),
                (Outcome::Infinite, Weight::Float(0.5)),
            ],
            1.0 / 6.0,
        );
        assert!(t.normalization_error() < 1e-15);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("value,weight,tail_bound,weight_f64\n1,1/3,"));
        assert!(s.contains("\ninf,0.5,"));
        assert_eq!(Outcome::pair(2, None).to_string(), "(2,inf)");
    }
}
