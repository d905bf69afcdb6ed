#![cfg_attr(not(feature = "std"), no_std)]
extern crate alloc;

pub mod chart;
pub mod contact;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod fibration;
pub mod folding;
pub mod form;
pub mod jets;
pub mod linalg;
pub mod map;
pub mod ode;
pub mod solve;
pub mod real;
pub mod report;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use expr::{ScalarExpr, Sym, ZeroVerdict};
