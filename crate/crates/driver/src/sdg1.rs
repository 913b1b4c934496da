//! The SDG1 binary dump shared with the C++ runtime.
//!
//! Little-endian throughout: the magic `SDG1`, a u64 record count, then per
//! record a u64 name length, the UTF-8 name, a kind byte and the payload:
//!
//! | kind | payload |
//! |------|---------|
//! | 0 real | f64 |
//! | 1 int | u64 |
//! | 2 index array | u64 n, n × u64 |
//! | 3 value array | u64 n, n × f64 |
//! | 4 dictionary | u64 depth, u64 nnz, nnz × depth u64 keys, nnz f64 values |

use std::io::{self, Read, Write};

use sdqlite::interp::fdiff::coordinates;
use sdqlite::interp::{ArrayData, Value};
use sdqlite::lang::Type;

pub const MAGIC: &[u8; 4] = b"SDG1";

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Real(f64),
    Int(u64),
    IndexArray(Vec<u64>),
    ValueArray(Vec<f64>),
    /// Stored leaves of a nested dictionary: each key path with its value.
    Dict { depth: u64, keys: Vec<u64>, vals: Vec<f64> },
}

#[derive(Debug, thiserror::Error)]
pub enum Sdg1Error {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("not an SDG1 file")]
    Magic,
    #[error("record `{0}` has unknown kind {1}")]
    Kind(String, u8),
    #[error("record name is not UTF-8")]
    Name,
    #[error("value of `{0}` has no SDG1 encoding: {1}")]
    Unsupported(String, &'static str),
}

impl Record {
    fn kind(&self) -> u8 {
        match self {
            Record::Real(_) => 0,
            Record::Int(_) => 1,
            Record::IndexArray(_) => 2,
            Record::ValueArray(_) => 3,
            Record::Dict { .. } => 4,
        }
    }

    /// Encodes a runtime value of type `ty`; negative integers have no encoding.
    pub fn from_value(name: &str, v: &Value, ty: &Type) -> Result<Record, Sdg1Error> {
        let unsigned = |n: i64| u64::try_from(n).map_err(|_| Sdg1Error::Unsupported(name.into(), "negative integer"));
        Ok(match v {
            Value::Real(x) => Record::Real(*x),
            Value::Int(n) => Record::Int(unsigned(*n)?),
            Value::Bool(b) => Record::Int(*b as u64),
            Value::Array(a) => match &a.data {
                ArrayData::Int(xs) => Record::IndexArray(xs[a.start..a.end].iter().map(|&n| unsigned(n)).collect::<Result<_, _>>()?),
                ArrayData::Real(xs) => Record::ValueArray(xs[a.start..a.end].to_vec()),
            },
            Value::Range { .. } => return Err(Sdg1Error::Unsupported(name.into(), "range")),
            Value::Dict(_) => {
                let paths = coordinates(v);
                let depth = ty
                    .order()
                    .filter(|&d| d > 0)
                    .ok_or_else(|| Sdg1Error::Unsupported(name.into(), "dictionary whose type is not a tensor"))?
                    as u64;
                let mut keys = Vec::new();
                let mut vals = Vec::new();
                for p in paths {
                    if p.len() as u64 != depth {
                        return Err(Sdg1Error::Unsupported(name.into(), "leaf depth differs from the type"));
                    }
                    vals.push(p.iter().try_fold(v.clone(), |d, &k| d.get(k)).and_then(|x| x.as_real()).unwrap_or(0.0));
                    for k in p {
                        keys.push(unsigned(k)?);
                    }
                }
                Record::Dict { depth, keys, vals }
            }
        })
    }

    /// Decodes to a runtime value; dictionaries become nested maps.
    pub fn to_value(&self) -> Value {
        match self {
            Record::Real(x) => Value::Real(*x),
            Record::Int(n) => Value::Int(*n as i64),
            Record::IndexArray(xs) => Value::int_array(xs.iter().map(|&n| n as i64).collect()),
            Record::ValueArray(xs) => Value::real_array(xs.clone()),
            Record::Dict { depth, keys, vals } => {
                let d = *depth as usize;
                let mut out = Value::empty();
                for (e, &x) in vals.iter().enumerate() {
                    let leaf = keys[e * d..(e + 1) * d]
                        .iter()
                        .rev()
                        .fold(Value::Real(x), |acc, &k| Value::singleton(k as i64, acc));
                    out.add_assign(leaf).expect("real leaves");
                }
                out
            }
        }
    }
}

pub fn write_sdg1(mut w: impl Write, records: &[(String, Record)]) -> Result<(), Sdg1Error> {
    w.write_all(MAGIC)?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    let u64s = |w: &mut dyn Write, xs: &[u64]| xs.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()));
    let f64s = |w: &mut dyn Write, xs: &[f64]| xs.iter().try_for_each(|x| w.write_all(&x.to_le_bytes()));
    for (name, r) in records {
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[r.kind()])?;
        match r {
            Record::Real(x) => f64s(&mut w, &[*x])?,
            Record::Int(n) => u64s(&mut w, &[*n])?,
            Record::IndexArray(xs) => {
                u64s(&mut w, &[xs.len() as u64])?;
                u64s(&mut w, xs)?;
            }
            Record::ValueArray(xs) => {
                u64s(&mut w, &[xs.len() as u64])?;
                f64s(&mut w, xs)?;
            }
            Record::Dict { depth, keys, vals } => {
                u64s(&mut w, &[*depth, vals.len() as u64])?;
                u64s(&mut w, keys)?;
                f64s(&mut w, vals)?;
            }
        }
    }
    Ok(())
}

fn u64_at(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn f64_at(r: &mut impl Read) -> io::Result<f64> {
    Ok(f64::from_bits(u64_at(r)?))
}

pub fn read_sdg1(mut r: impl Read) -> Result<Vec<(String, Record)>, Sdg1Error> {
    let mut magic = [0; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Sdg1Error::Magic);
    }
    let count = u64_at(&mut r)?;
    let mut out = Vec::new();
    for _ in 0..count {
        let mut name = vec![0; u64_at(&mut r)? as usize];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Sdg1Error::Name)?;
        let mut kind = [0];
        r.read_exact(&mut kind)?;
        let rec = match kind[0] {
            0 => Record::Real(f64_at(&mut r)?),
            1 => Record::Int(u64_at(&mut r)?),
            2 => {
                let n = u64_at(&mut r)?;
                Record::IndexArray((0..n).map(|_| u64_at(&mut r)).collect::<Result<_, _>>()?)
            }
            3 => {
                let n = u64_at(&mut r)?;
                Record::ValueArray((0..n).map(|_| f64_at(&mut r)).collect::<Result<_, _>>()?)
            }
            4 => {
                let depth = u64_at(&mut r)?;
                let n = u64_at(&mut r)?;
                let keys = (0..n * depth).map(|_| u64_at(&mut r)).collect::<Result<_, _>>()?;
                let vals = (0..n).map(|_| f64_at(&mut r)).collect::<Result<_, _>>()?;
                Record::Dict { depth, keys, vals }
            }
            k => return Err(Sdg1Error::Kind(name, k)),
        };
        out.push((name, rec));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdqlite::interp::{exact_eq, parse_value};

    #[test]
    fn round_trips_every_kind() {
        let m = parse_value("{0 -> {1 -> 2.0}, 3 -> {0 -> -1.5, 2 -> 0.25}}").unwrap();
        let records = vec![
            ("beta".to_string(), Record::Real(1.5)),
            ("A_len".to_string(), Record::Int(3)),
            ("A_pos".to_string(), Record::from_value("A_pos", &Value::int_array(vec![0, 1, 3]), &Type::dict(Type::DenseInt, Type::Int)).unwrap()),
            ("A_val".to_string(), Record::from_value("A_val", &Value::real_array(vec![0.5, 2.0]), &Type::dict(Type::DenseInt, Type::Real)).unwrap()),
            ("M".to_string(), Record::from_value("M", &m, &Type::tensor(2)).unwrap()),
        ];
        let mut bytes = Vec::new();
        write_sdg1(&mut bytes, &records).unwrap();
        assert_eq!(&bytes[..4], MAGIC);
        let back = read_sdg1(bytes.as_slice()).unwrap();
        assert_eq!(back, records);
        assert!(exact_eq(&back[4].1.to_value(), &m));
        assert_eq!(back[2].1, Record::IndexArray(vec![0, 1, 3]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(read_sdg1(&b"SDG2\0\0\0\0\0\0\0\0"[..]), Err(Sdg1Error::Magic)));
        assert!(matches!(read_sdg1(&b"SDG1\x01\0\0\0\0\0\0\0"[..]), Err(Sdg1Error::Io(_))));
        assert!(Record::from_value("n", &Value::Int(-1), &Type::Int).is_err());
        let empty = Record::from_value("E", &Value::empty(), &Type::tensor(2)).unwrap();
        assert_eq!(empty, Record::Dict { depth: 2, keys: vec![], vals: vec![] });
    }
}
