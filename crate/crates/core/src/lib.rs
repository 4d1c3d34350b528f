//! Exact computation of Bianchi fundamental polyhedra, the Flöge cell complex
//! of `PSL_2(O_{-m})` and the homological invariants derived from it.
//!
//! The pipeline runs bottom-up through the modules:
//! [`qfield`] and [`arith`] supply exact number-field arithmetic, [`hemis`]
//! and [`swan`] build the fundamental polyhedron, [`isom`] finds the group
//! elements relating points, [`complex`] turns the polyhedron into a quotient
//! CW complex and [`homology`] reads off the table columns. [`commands`] wraps
//! everything for the command-line driver and its on-disk database.

pub mod arith;
pub mod commands;
pub mod complex;
pub mod hemis;
pub mod homology;
pub mod isom;
pub mod qfield;
pub mod serial;
pub mod swan;

pub use arith::AbelianGroup;
pub use qfield::{AlgInt, FieldCtx, FieldElem, Rational};
