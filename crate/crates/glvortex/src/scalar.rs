use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar accepted by the geometry layer: `f32` or `f64`.
pub trait Real: Float + FloatConst + FromPrimitive + core::fmt::Debug + Send + Sync + 'static {
    /// Literal conversion. Every f64 literal used here fits in f32.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}
