//! Serialization helpers shared by the verdict and suite reports.

use std::fmt::Display;

use serde::Serializer;

use crate::scalar::HpFloat;

pub fn display<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

pub fn hp<S: Serializer>(v: &HpFloat, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_decimal(6))
}
