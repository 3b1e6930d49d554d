//! Freeform electrode shape optimization for axisymmetric DC electron guns.

pub mod geometry;
pub mod iga;
pub mod optimize;
pub mod quadrature;
pub mod spline;
pub mod tracker;
