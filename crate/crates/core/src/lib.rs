#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acoustics;
pub mod cli;
pub mod gcode;
pub mod geometry;
pub mod optimizer;
pub mod point;
pub mod shm;
pub mod specimens;
pub mod sync;

pub use point::{Point2, Point3};
