use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type the analysis routines are generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    fn count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits in a float")
    }

    fn from_f32_value(v: f32) -> Self {
        <Self as FromPrimitive>::from_f32(v).expect("f32 fits in any Scalar")
    }

    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("literal fits")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
}

/// Arithmetic mean; `None` for an empty slice.
pub(crate) fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().copied().sum::<T>() / T::count(xs.len()))
    }
}
