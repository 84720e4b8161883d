// Float methods (`exp`, `ln`, `sqrt`, ...) come from std when it is linked and
// from `num_traits::Float` (libm-backed) otherwise.
#[cfg(not(feature = "std"))]
#[allow(unused_imports)]
pub(crate) use num_traits::Float;
