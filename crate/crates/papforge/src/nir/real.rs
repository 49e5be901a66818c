//! Scalar abstraction: the network trains in single precision, while
//! gradient checking instantiates the same code in double precision.

use num_traits::{Float, NumAssignOps};

pub trait Real:
    Float
    + NumAssignOps
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    const DTYPE: &'static str;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn write_le(buf: &mut Vec<u8>, v: Self);
    fn read_le(bytes: &[u8], offset: usize) -> Self;
    fn width() -> usize;
}

impl Real for f32 {
    const DTYPE: &'static str = "f32";

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64(self) -> f64 {
        f64::from(self)
    }

    fn write_le(buf: &mut Vec<u8>, v: Self) {
        buf.extend_from_slice(&v.to_le_bytes());
    }

    fn read_le(bytes: &[u8], offset: usize) -> Self {
        f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
    }

    fn width() -> usize {
        4
    }
}

impl Real for f64 {
    const DTYPE: &'static str = "f64";

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(self) -> f64 {
        self
    }

    fn write_le(buf: &mut Vec<u8>, v: Self) {
        buf.extend_from_slice(&v.to_le_bytes());
    }

    fn read_le(bytes: &[u8], offset: usize) -> Self {
        f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap())
    }

    fn width() -> usize {
        8
    }
}

/// Shorthand for converting literals inside generic code.
#[inline]
pub fn r<T: Real>(v: f64) -> T {
    <T as Real>::from_f64(v)
}
