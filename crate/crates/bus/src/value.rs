//! Boxed payload values and their canonical little-endian encoding.

use std::collections::BTreeMap;

use thiserror::Error;

pub const TAG_F64: u8 = 0x01;
pub const TAG_I64: u8 = 0x02;
pub const TAG_BOOL: u8 = 0x03;
pub const TAG_STR: u8 = 0x04;
pub const TAG_F32_ARRAY: u8 = 0x05;
pub const TAG_MAP: u8 = 0x06;

/// Deepest nesting accepted; a scalar has depth 1.
pub const MAX_DEPTH: usize = 8;

#[derive(Debug, Clone)]
pub enum Value {
    Float64(f64),
    Int64(i64),
    Bool(bool),
    Utf8String(String),
    Float32Array(Vec<f32>),
    Map(BTreeMap<String, Value>),
}

/// Floats compare by bit pattern, so every value equals its own round trip.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Float64(a), Value::Float64(b)) => a.to_bits() == b.to_bits(),
            (Value::Int64(a), Value::Int64(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Utf8String(a), Value::Utf8String(b)) => a == b,
            (Value::Float32Array(a), Value::Float32Array(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            }
            (Value::Map(a), Value::Map(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("nesting deeper than {MAX_DEPTH}")]
    DepthExceeded,
    #[error("unknown tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("input ends early: needed {needed} more bytes at offset {at}")]
    Truncated { at: usize, needed: usize },
    #[error("invalid UTF-8 at offset {0}")]
    InvalidUtf8(usize),
    #[error("invalid bool byte 0x{0:02x}")]
    InvalidBool(u8),
    #[error("map keys not in strictly ascending order at offset {0}")]
    UnorderedKeys(usize),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("length {0} does not fit in u32")]
    TooLong(usize),
}

impl Value {
    pub fn depth(&self) -> usize {
        match self {
            Value::Map(m) => 1 + m.values().map(Value::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn map<K: Into<String>>(entries: impl IntoIterator<Item = (K, Value)>) -> Value {
        Value::Map(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Map(m) => m.get(key),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Float64(v) => Some(v),
            Value::Int64(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Value::Int64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Utf8String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f32s(&self) -> Option<&[f32]> {
        match self {
            Value::Float32Array(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&BTreeMap<String, Value>> {
        match self {
            Value::Map(m) => Some(m),
            _ => None,
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float64(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int64(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Utf8String(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Utf8String(v)
    }
}

impl From<Vec<f32>> for Value {
    fn from(v: Vec<f32>) -> Self {
        Value::Float32Array(v)
    }
}

pub fn encode_value(v: &Value) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::with_capacity(16);
    encode_into(v, &mut out)?;
    Ok(out)
}

/// Appends the encoding of `v` to `out`. On error `out` may hold a partial
/// encoding.
pub fn encode_into(v: &Value, out: &mut Vec<u8>) -> Result<(), CodecError> {
    if v.depth() > MAX_DEPTH {
        return Err(CodecError::DepthExceeded);
    }
    write_value(v, out)
}

fn write_len(n: usize, out: &mut Vec<u8>) -> Result<(), CodecError> {
    let n = u32::try_from(n).map_err(|_| CodecError::TooLong(n))?;
    out.extend_from_slice(&n.to_le_bytes());
    Ok(())
}

fn write_str(s: &str, out: &mut Vec<u8>) -> Result<(), CodecError> {
    write_len(s.len(), out)?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn write_value(v: &Value, out: &mut Vec<u8>) -> Result<(), CodecError> {
    match v {
        Value::Float64(x) => {
            out.push(TAG_F64);
            out.extend_from_slice(&x.to_le_bytes());
        }
        Value::Int64(x) => {
            out.push(TAG_I64);
            out.extend_from_slice(&x.to_le_bytes());
        }
        Value::Bool(b) => {
            out.push(TAG_BOOL);
            out.push(u8::from(*b));
        }
        Value::Utf8String(s) => {
            out.push(TAG_STR);
            write_str(s, out)?;
        }
        Value::Float32Array(xs) => {
            out.push(TAG_F32_ARRAY);
            write_len(xs.len(), out)?;
            for x in xs {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        Value::Map(m) => {
            out.push(TAG_MAP);
            write_len(m.len(), out)?;
            // BTreeMap<String, _> iterates in ascending byte order
            for (k, child) in m {
                write_str(k, out)?;
                write_value(child, out)?;
            }
        }
    }
    Ok(())
}

pub fn decode_value(bytes: &[u8]) -> Result<Value, CodecError> {
    let mut r = Reader { bytes, at: 0 };
    let v = r.value(1)?;
    match bytes.len() - r.at {
        0 => Ok(v),
        extra => Err(CodecError::TrailingBytes(extra)),
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) at: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let left = self.bytes.len() - self.at;
        if left < n {
            return Err(CodecError::Truncated {
                at: self.at,
                needed: n - left,
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn string(&mut self) -> Result<String, CodecError> {
        let n = self.u32()? as usize;
        let start = self.at;
        let raw = self.take(n)?;
        std::str::from_utf8(raw)
            .map(str::to_owned)
            .map_err(|e| CodecError::InvalidUtf8(start + e.valid_up_to()))
    }

    pub(crate) fn value(&mut self, depth: usize) -> Result<Value, CodecError> {
        if depth > MAX_DEPTH {
            return Err(CodecError::DepthExceeded);
        }
        let tag = self.array::<1>()?[0];
        Ok(match tag {
            TAG_F64 => Value::Float64(f64::from_le_bytes(self.array()?)),
            TAG_I64 => Value::Int64(i64::from_le_bytes(self.array()?)),
            TAG_BOOL => match self.array::<1>()?[0] {
                0 => Value::Bool(false),
                1 => Value::Bool(true),
                b => return Err(CodecError::InvalidBool(b)),
            },
            TAG_STR => Value::Utf8String(self.string()?),
            TAG_F32_ARRAY => {
                let n = self.u32()? as usize;
                let raw = self.take(n.checked_mul(4).ok_or(CodecError::TooLong(n))?)?;
                Value::Float32Array(
                    raw.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
                        .collect(),
                )
            }
            TAG_MAP => {
                let n = self.u32()? as usize;
                let mut m = BTreeMap::new();
                let mut previous: Option<String> = None;
                for _ in 0..n {
                    let key_at = self.at;
                    let key = self.string()?;
                    if previous.as_ref().is_some_and(|p| p.as_bytes() >= key.as_bytes()) {
                        return Err(CodecError::UnorderedKeys(key_at));
                    }
                    let child = self.value(depth + 1)?;
                    previous = Some(key.clone());
                    m.insert(key, child);
                }
                Value::Map(m)
            }
            other => return Err(CodecError::UnknownTag(other)),
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JsonError {
    #[error("null has no value counterpart")]
    Null,
    #[error("non-finite number has no JSON form")]
    NonFinite,
    #[error("arrays may only hold numbers")]
    NonNumericArray,
    #[error("integer out of range")]
    IntegerRange,
}

impl Value {
    /// JSON mirror: integers for `Int64`, numbers with a fraction or exponent
    /// for `Float64`, arrays of numbers for `Float32Array`, objects for maps.
    pub fn to_json(&self) -> Result<serde_json::Value, JsonError> {
        use serde_json::{Number, Value as J};
        Ok(match self {
            Value::Float64(x) => J::Number(Number::from_f64(*x).ok_or(JsonError::NonFinite)?),
            Value::Int64(x) => J::Number((*x).into()),
            Value::Bool(b) => J::Bool(*b),
            Value::Utf8String(s) => J::String(s.clone()),
            Value::Float32Array(xs) => J::Array(
                xs.iter()
                    .map(|x| {
                        Number::from_f64(f64::from(*x))
                            .map(J::Number)
                            .ok_or(JsonError::NonFinite)
                    })
                    .collect::<Result<_, _>>()?,
            ),
            Value::Map(m) => J::Object(
                m.iter()
                    .map(|(k, v)| Ok((k.clone(), v.to_json()?)))
                    .collect::<Result<_, JsonError>>()?,
            ),
        })
    }

    pub fn from_json(j: &serde_json::Value) -> Result<Value, JsonError> {
        use serde_json::Value as J;
        Ok(match j {
            J::Null => return Err(JsonError::Null),
            J::Bool(b) => Value::Bool(*b),
            J::Number(n) => {
                if n.is_f64() {
                    Value::Float64(n.as_f64().ok_or(JsonError::NonFinite)?)
                } else {
                    Value::Int64(n.as_i64().ok_or(JsonError::IntegerRange)?)
                }
            }
            J::String(s) => Value::Utf8String(s.clone()),
            J::Array(items) => Value::Float32Array(
                items
                    .iter()
                    .map(|i| i.as_f64().map(|x| x as f32).ok_or(JsonError::NonNumericArray))
                    .collect::<Result<_, _>>()?,
            ),
            J::Object(o) => Value::Map(
                o.iter()
                    .map(|(k, v)| Ok((k.clone(), Value::from_json(v)?)))
                    .collect::<Result<_, JsonError>>()?,
            ),
        })
    }
}
