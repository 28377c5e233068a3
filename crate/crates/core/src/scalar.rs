use nalgebra::{Complex, DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real field the numerics run over: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Serialize + DeserializeOwned + Send + Sync
{
    /// Machine epsilon.
    fn eps() -> Self {
        Self::default_epsilon()
    }

    /// Lossy conversion from `f64`; used for fixed constants and samples.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("real is representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Cx<T> = Complex<T>;
pub type CMat<T> = DMatrix<Complex<T>>;
