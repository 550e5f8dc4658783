//! Numerical primitives shared by the physics and fitting layers.

pub mod faddeeva;
pub mod quadrature;
pub mod special;
pub mod spline;
